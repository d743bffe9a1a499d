use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("photon-number cutoff cannot converge for lambda = {0}")]
    CutoffDiverges(f64),

    /// Every pointer density underflows at this outcome, so the conditional
    /// state is undefined.
    #[error("degenerate outcome x = {x}: outcome density underflows")]
    DegenerateOutcome { x: f64 },

    #[error("initial entanglement is zero (r = 0); the increase ratio is undefined")]
    ZeroInitialEntanglement,

    #[error("meter cutoff {cut} is inadequate: trace deficit {deficit:.3e}")]
    MeterCutoff { cut: usize, deficit: f64 },

    #[error("step size dt = {dt} exceeds the stability bound {bound} (0.01 / max(omega, gamma, g*N))")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("non-finite entry in sector ({n}, {m}) at t = {t}")]
    NonFinite { n: usize, m: usize, t: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
