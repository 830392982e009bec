use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geodesic trapped: no exit before t = {t_max}")]
    Trapping { t_max: f64 },
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("conjugate point: b2 vanished at t = {t}")]
    ConjugatePoint { t: f64 },
    #[error("surface is not simple: {0}")]
    NotSimple(String),
    #[error("inconsistent connection: {0}")]
    InconsistentConnection(String),
    #[error("Neumann series diverged after {iterations} terms (increment ratio {ratio:.3})")]
    Divergence { iterations: usize, ratio: f64 },
    #[error("Krylov solver stalled: residual {residual:.3e} after {iterations} iterations")]
    Stagnation { iterations: usize, residual: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GeoError {
    /// True for failures of a numerical contract, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GeoError::Trapping { .. }
                | GeoError::Integration(_)
                | GeoError::ConjugatePoint { .. }
                | GeoError::NotSimple(_)
                | GeoError::Divergence { .. }
                | GeoError::Stagnation { .. }
        )
    }
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
