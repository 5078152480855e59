use thiserror::Error;

/// Errors produced anywhere in the localization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate hyperbola: |range difference| {range_difference} m >= half separation {half_separation} m")]
    DegenerateHyperbola {
        range_difference: f64,
        half_separation: f64,
    },
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("at least {required} RSS stations required, got {found}")]
    TooFewStations { required: usize, found: usize },
    #[error("position ({x}, {y}) coincides with station {station}")]
    CoincidentPosition { station: u32, x: f64, y: f64 },
    #[error("candidate ({x}, {y}) is within the singularity radius of station {station}")]
    SingularCandidate { station: u32, x: f64, y: f64 },
    #[error("search region is empty")]
    EmptyRegion,
    #[error("measurement set carries no TDOA value")]
    MissingTdoa,
    #[error("fingerprint grid is empty")]
    EmptyGrid,
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample rate {sample_rate} Hz is below twice the upper band edge {f_high} Hz")]
    AliasingSampleRate { sample_rate: f64, f_high: f64 },
    #[error("template ({template} samples) must be shorter than the received signal ({signal} samples)")]
    TemplateTooLong { template: usize, signal: usize },
    #[error("integration window [{start}, {end}] s is outside the correlation support")]
    WindowOutOfSupport { start: f64, end: f64 },
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_epoch(self, epoch: usize) -> Self {
        Error::Epoch {
            epoch,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
