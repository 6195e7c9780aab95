use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ensemble needs at least one atom")]
    NoAtoms,

    #[error("m = {m} is not a Dicke projection for N = {n_atoms}")]
    InvalidProjection { n_atoms: u64, m: f64 },

    #[error("{name} = {value} is out of range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "detuning {detuning} is within {min_ratio} linewidths ({linewidth}) of resonance; \
         the dispersive 1/detuning coupling does not hold"
    )]
    NotDispersive {
        detuning: f64,
        linewidth: f64,
        min_ratio: f64,
    },

    #[error("dual-probe preconditions violated: {0}")]
    DualProbeMismatch(String),

    #[error("invalid operating point: eta = {0} (must be below 1)")]
    InvalidOperatingPoint(f64),

    #[error("exact tabulation refused for N = {n_atoms} (limit {limit})")]
    TooLarge { n_atoms: u64, limit: u64 },

    #[error(
        "signal mean {mean} exceeds shot-noise variance {shot_noise}; \
         the detector counts cannot be Poisson"
    )]
    DetectorSaturated { mean: f64, shot_noise: f64 },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}
