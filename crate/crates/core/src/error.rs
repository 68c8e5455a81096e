use thiserror::Error;

/// Errors produced by grid construction, forecasting, and serialization.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("no cell center falls inside the boundary polygon")]
    EmptyDomain,

    #[error("invalid coordinate (lon={lon}, lat={lat})")]
    InvalidCoordinate { lon: f64, lat: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {context}")]
    NonFiniteValue { context: String },

    #[error("in-mask cell {cell} has no in-mask neighbors and self_loop = 0")]
    IsolatedCell { cell: usize },

    #[error("field/grid size mismatch: expected {expected}, got {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("all probability mass lies outside the boundary mask")]
    AllMassMasked,

    #[error("horizon {horizon} missing from forecast set")]
    MissingHorizon { horizon: u32 },

    #[error("no clusters found: every incident point is noise")]
    NoClusters,

    #[error("hotspot set is empty")]
    EmptyHotspotSet,

    #[error("no plausibility review for zone {zone_id}")]
    MissingReview { zone_id: String },

    #[error("schema violation: {}", violations.join("; "))]
    SchemaViolation { violations: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CoreError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    /// Process exit code for CLI reporting: 2 schema, 3 domain/config, 4 I/O.
    /// Malformed JSON and CSV inputs count as schema violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::SchemaViolation { .. } | CoreError::Json(_) => 2,
            CoreError::Io(_) => 4,
            CoreError::Csv(e) => {
                if e.is_io_error() {
                    4
                } else {
                    2
                }
            }
            CoreError::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Tag an error with the pipeline stage it surfaced in.
    pub fn at_stage(self, stage: &'static str) -> CoreError {
        CoreError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
