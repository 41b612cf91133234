//! Error type shared by all modules of the engine.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Typed failure conditions. Every variant carries enough context to state
/// which contract was violated and by which value.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A stimulus or filter parameter is outside its documented domain.
    #[error("invalid parameter {name}: {message} (got {value})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        message: &'static str,
    },

    /// An interaural delay does not land on an integer number of samples.
    #[error(
        "interaural delay of {delay_s} s is {samples} samples at {sample_rate} Hz; \
         only integer sample delays are representable"
    )]
    NonIntegerDelay {
        delay_s: f64,
        sample_rate: f64,
        samples: f64,
    },

    /// Two sequences that must be aligned have different lengths.
    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// An input signal is identically zero where energy is required.
    #[error("zero-energy signal in {context}")]
    ZeroEnergy { context: &'static str },

    /// An adaptive track ran into the safety cap before finishing.
    #[error(
        "staircase did not converge: {reversals} of {needed} reversals after {trials} trials \
         (level {level_db} dB)"
    )]
    StaircaseDiverged {
        trials: usize,
        reversals: usize,
        needed: usize,
        level_db: f64,
    },

    /// Two threshold tables could not be matched row by row.
    #[error("misaligned tables: {message}")]
    MisalignedTables { message: String },

    /// A text artifact (config file, reference table) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
