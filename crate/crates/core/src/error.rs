use alloc::string::String;

/// Errors raised by model construction and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cycle needs at least two samples, got {0}")]
    TooShort(usize),
    #[error("array lengths differ: {0}")]
    LengthMismatch(&'static str),
    #[error("time grid is not uniform at sample {index}")]
    NonUniformGrid { index: usize },
    #[error("negative speed {value} at sample {index}")]
    NegativeSpeed { index: usize, value: f64 },
    #[error("non-finite value in {field} at sample {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("supplied acceleration {supplied} at sample {index} differs from the speed trace ({computed})")]
    InconsistentAcceleration { index: usize, supplied: f64, computed: f64 },
    #[error("cycle covers no distance")]
    ZeroLength,
    #[error("resampling step {dt} exceeds the cycle duration {duration}")]
    StepTooLarge { dt: f64, duration: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("rear wheel lifts (normal load term {load} N)")]
    WheelLift { load: f64 },
    #[error("loss map cannot identify {0}")]
    Identifiability(&'static str),
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("gear ratio box is empty: upper bound {upper} below lower bound {lower}")]
    InfeasibleGearBox { lower: f64, upper: f64 },
    #[error("cycle speed {speed} m/s exceeds what the {machine} motor can reach")]
    OverSpeed { machine: &'static str, speed: f64 },
    #[error("simulation violation at step {step}: {kind}")]
    Violation { step: usize, kind: String },
}

pub type Result<T> = core::result::Result<T, Error>;
