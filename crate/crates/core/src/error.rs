use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by callers (e.g. the CLI) to map errors onto
/// exit codes: input problems are recoverable by fixing the file, model
/// problems mean the data carries no usable signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent input (files, configs, argument values).
    Input,
    /// The model cannot be applied: no resonance, ambiguous trace,
    /// unidentifiable parameters, validity window violated.
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A file or record failed to parse. Carries file, line and field
    /// context so the user can find the offending cell.
    Parse {
        file: String,
        line: Option<u64>,
        field: Option<String>,
        message: String,
    },
    /// An input value violated a documented invariant.
    Invalid(String),
    /// No transmission dip found in the trace (minimum above 0.99).
    NoResonance,
    /// More than one dip in the trace window; the caller must window the
    /// data down to a single resonance.
    MultiDip { dips: usize },
    /// The fit parameters cannot be separated by the data provided.
    Identifiability(String),
    /// The count model is outside its validity window (delta * P^2 >= 1).
    ModelValidity { power_mw: f64, delta: f64 },
    /// The residual function returned a non-finite value at the initial
    /// guess, so the fit cannot start.
    NonFiniteResidual,
    /// A physical quantity left its admissible domain.
    Domain(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::Invalid(_) => ErrorClass::Input,
            Error::NoResonance
            | Error::MultiDip { .. }
            | Error::Identifiability(_)
            | Error::ModelValidity { .. }
            | Error::NonFiniteResidual
            | Error::Domain(_) => ErrorClass::Model,
        }
    }

    pub fn parse(file: &str, line: Option<u64>, field: Option<&str>, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            field: field.map(str::to_string),
            message: msg.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { file, line, field, message } => {
                write!(f, "parse error in {file}")?;
                if let Some(l) = line {
                    write!(f, ", line {l}")?;
                }
                if let Some(fd) = field {
                    write!(f, ", field `{fd}`")?;
                }
                write!(f, ": {message}")
            }
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::NoResonance => write!(f, "no resonance dip found (minimum transmission > 0.99)"),
            Error::MultiDip { dips } => {
                write!(f, "trace contains {dips} dips; window the data to a single resonance")
            }
            Error::Identifiability(msg) => write!(f, "parameters not identifiable: {msg}"),
            Error::ModelValidity { power_mw, delta } => write!(
                f,
                "count model invalid at P = {power_mw} mW: delta * P^2 = {} >= 1",
                delta * power_mw * power_mw
            ),
            Error::NonFiniteResidual => write!(f, "residual is non-finite at the initial guess"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
