use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("topology construction failed: {0}")]
    Topology(String),

    #[error("bisection could not bracket the budget for BS {bs}: sum at lambda_max={lambda_max:e} is {sum:e} W > {budget:e} W")]
    Bracket {
        bs: usize,
        lambda_max: f64,
        sum: f64,
        budget: f64,
    },

    #[error("instance too large for exhaustive search: {combinations} combinations exceed cap {cap} ({detail})")]
    InstanceTooLarge {
        combinations: u128,
        cap: u128,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Topology(_) | Error::InstanceTooLarge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
