use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device parameters: {0}")]
    InvalidDeviceParams(String),

    #[error("invalid device state: {0}")]
    InvalidDeviceState(String),

    #[error("invalid drive profile: {0}")]
    InvalidProfile(String),

    #[error("invalid cell configuration: {0}")]
    InvalidCellConfig(String),

    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("endurance exceeded: {cycles} programming cycles at limit {limit}")]
    EnduranceExceeded { cycles: u64, limit: u64 },

    #[error("extraction ramp ended with neither device switched (omega1={omega1:.4}, omega2={omega2:.4})")]
    NoSwitch { omega1: f64, omega2: f64 },

    #[error("extraction ended with both devices switched (omega1={omega1:.4}, omega2={omega2:.4})")]
    DoubleSwitch { omega1: f64, omega2: f64 },

    #[error("extraction left a device mid-state (omega1={omega1:.4}, omega2={omega2:.4})")]
    IncompleteSwitch { omega1: f64, omega2: f64 },

    #[error("degenerate cell: both devices crossed threshold in one step with bit-identical voltage shares")]
    ExactTie,

    #[error("extraction requires both devices in the low-resistance state (omega1={omega1}, omega2={omega2})")]
    NotInLrs { omega1: f64, omega2: f64 },

    #[error("reconfiguration transient left a device outside the low-resistance state (omega1={omega1:.4}, omega2={omega2:.4})")]
    ReconfigIncomplete { omega1: f64, omega2: f64 },

    #[error("invalid variation spec: {0}")]
    InvalidVariationSpec(String),

    #[error("sampler made no acceptable draw for {what} after {attempts} attempts")]
    SamplerStuck { what: &'static str, attempts: u32 },

    #[error("{what} requires at least {required} {unit}, got {actual}")]
    NotEnoughData {
        what: &'static str,
        required: usize,
        actual: usize,
        unit: &'static str,
    },

    #[error("empty input for {0}")]
    EmptyInput(&'static str),

    #[error("invalid campaign config: {0}")]
    InvalidCampaignConfig(String),

    #[error("no trace recorded for cell {chip}:{cell}")]
    MissingTrace { chip: u32, cell: u32 },

    #[error("cell {chip}:{cell}: {source}")]
    AtCell {
        chip: u32,
        cell: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches cell coordinates to an error bubbling out of a per-cell simulation.
    pub fn at_cell(self, chip: u32, cell: u32) -> Self {
        Error::AtCell {
            chip,
            cell,
            source: Box::new(self),
        }
    }

    /// True for outcomes where the simulation itself ran but a cell landed in a
    /// degenerate state (as opposed to a bad config or an I/O failure).
    pub fn is_degenerate_outcome(&self) -> bool {
        match self {
            Error::NoSwitch { .. }
            | Error::DoubleSwitch { .. }
            | Error::IncompleteSwitch { .. }
            | Error::ExactTie
            | Error::ReconfigIncomplete { .. }
            | Error::EnduranceExceeded { .. } => true,
            Error::AtCell { source, .. } => source.is_degenerate_outcome(),
            _ => false,
        }
    }
}
