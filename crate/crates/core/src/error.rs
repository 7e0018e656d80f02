use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of range: {value} ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("operator is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("every gain operator is zero; Eve never causes a click")]
    ZeroGain,
    #[error(
        "no provable single-photon contribution: Q_signal {q_signal:e} <= p_multi {p_multi:e}"
    )]
    NoSinglePhotonContribution { q_signal: f64, p_multi: f64 },
    #[error("p_dark {p_dark:e} disagrees with 2 p_detector (1 - p_detector) = {derived:e}")]
    DarkCountMismatch { p_dark: f64, derived: f64 },
    #[error("no attack parameters reproduce the normal observables within {tol}")]
    Infeasible { tol: f64 },
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected,
        })
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    check_range(name, value, 0.0, 1.0, "probability in [0, 1]")
}
