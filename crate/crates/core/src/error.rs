use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("no valid grid nodes (bandwidth {bandwidth}, max weight {max_weight})")]
    NoValidNodes { bandwidth: f64, max_weight: f64 },

    #[error("simulation produced non-finite state at step {step}")]
    Diverged { step: usize },

    #[error("negative diffusion {sigma} at state {state} (step {step})")]
    NegativeDiffusion { step: usize, state: f64, sigma: f64 },

    #[error("all {n_paths} paths censored after {max_steps} steps")]
    AllCensored { n_paths: usize, max_steps: usize },

    #[error("all plan cells skipped: {0}")]
    AllCellsSkipped(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
