use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-Lorentzian metric: determinant {det} must be real and non-positive")]
    NonLorentzian { det: f64 },

    #[error("imaginary residue {residue:e} exceeds tolerance")]
    ComplexResidue { residue: f64 },

    #[error("metric is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("singular metric: |det| = {det:e}")]
    SingularMetric { det: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid steps differ: {left} vs {right}")]
    MismatchedSteps { left: f64, right: f64 },

    #[error("geodesic diverged: |x^{coordinate}| = {value:e}")]
    Diverged { coordinate: usize, value: f64 },

    #[error("entangled pair has already been measured")]
    AlreadyMeasured,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonLorentzian { .. }
                | Error::ComplexResidue { .. }
                | Error::SingularMetric { .. }
                | Error::Diverged { .. }
        )
    }
}
