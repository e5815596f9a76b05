use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Variants carry enough context (location, offending value, module) for the
/// experiment runner to turn them into a machine-readable report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("integral diverges on the {tail}: {detail}")]
    Divergence { tail: String, detail: String },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("time step {dt} does not resolve the fast scale {fast_scale}; pass the stiffness override to proceed")]
    Stiffness { dt: f64, fast_scale: f64 },

    #[error("simulation blew up after t = {last_valid_time}")]
    BlowUp { last_valid_time: f64 },

    #[error("diffusion coefficient sigma2 vanishes at y = {y} (x = {x})")]
    Degenerate { x: f64, y: f64 },

    #[error("fast process is not normalizable: {0}")]
    NonErgodic(String),

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("discrete eigenfunction lost positivity at node {node}; refine the grid")]
    Monotonicity { node: usize },

    #[error("subcritical corrector infeasible at y = {y}: H0 = {h0} < V = {v}")]
    Infeasible { y: f64, h0: f64, v: f64 },

    #[error("gradient {needed} leaves the tabulated momentum range [{lo}, {hi}]; extend the p grid")]
    Range { needed: f64, lo: f64, hi: f64 },

    #[error("explicit scheme unstable at t = {t}; lower the CFL number (was {cfl})")]
    Cfl { t: f64, cfl: f64 },

    #[error("input is not convex: second difference {second_difference:e} at p = ({p0}, {p1}, {p2})")]
    NotConvex { p0: f64, p1: f64, p2: f64, second_difference: f64 },

    #[error("Hopf-Lax supremum is attained at the edge of the scan window [{lo}, {hi}]")]
    Window { lo: f64, hi: f64 },

    #[error("Monte Carlo estimation failed: {0}")]
    Estimation(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Wraps the error with the name of the module that produced it.
    pub fn in_module(self, module: &'static str) -> Self {
        match self {
            e @ Error::Module { .. } => e,
            e => Error::Module {
                module,
                source: Box::new(e),
            },
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::Divergence { .. } => "divergence",
            Error::QuadratureFailure(_) => "quadrature-failure",
            Error::Stiffness { .. } => "stiffness",
            Error::BlowUp { .. } => "blow-up",
            Error::Degenerate { .. } => "degenerate",
            Error::NonErgodic(_) => "non-ergodic",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Monotonicity { .. } => "monotonicity",
            Error::Infeasible { .. } => "infeasible",
            Error::Range { .. } => "range",
            Error::Cfl { .. } => "cfl",
            Error::NotConvex { .. } => "not-convex",
            Error::Window { .. } => "window",
            Error::Estimation(_) => "estimation",
            Error::Config { .. } => "config",
            Error::Module { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
