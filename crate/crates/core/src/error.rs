use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid membership shape {0}")]
    InvalidShape(String),
    #[error("invalid fuzzy partition `{label}`: {reason}")]
    InvalidPartition { label: String, reason: String },
    #[error("invalid rule base: {0}")]
    InvalidRuleBase(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("a scaling change is already in flight (enact at {enact_at_ms} ms)")]
    ChangeInFlight { enact_at_ms: u64 },
    #[error("scaling by {delta} from {nodes} nodes leaves [{min}, {max}]")]
    NodeBounds { delta: i32, nodes: u32, min: u32, max: u32 },
    #[error("scaling delta must be nonzero")]
    ZeroDelta,
    #[error("pending feedback was already resolved")]
    FeedbackResolved,
    #[error("empty experiment log")]
    EmptyLog,
}

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
