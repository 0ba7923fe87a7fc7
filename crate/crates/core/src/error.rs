use thiserror::Error;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{quantity} = {value} outside validity range [{min}, {max}] for {model}")]
    OutOfRange {
        model: String,
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("no phase match in range [{lo_nm} nm, {hi_nm} nm] at T = {temp_c} C")]
    NoPhaseMatch { lo_nm: f64, hi_nm: f64, temp_c: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fit did not converge: {0}")]
    FitFailure(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error{}: {msg}", path.as_ref().map(|p| format!(" in {p}")).unwrap_or_default())]
    Config { path: Option<String>, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
