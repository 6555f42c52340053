use thiserror::Error;

/// Errors reported by chart maps, Hamiltonians and the integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid masses ({0}, {1}, {2}): all masses must be finite and positive")]
    InvalidMasses(f64, f64, f64),

    #[error("configuration is zero (triple collision is not representable in this chart)")]
    ZeroConfiguration,

    #[error("configuration is not translation-reduced: |Q12 + Q31 + Q23| = {residual:e}")]
    NotTranslationReduced { residual: f64 },

    #[error("total momentum is nonzero: |p1 + p2 + p3| = {residual:e}")]
    NonzeroTotalMomentum { residual: f64 },

    #[error("binary collision of bodies {pair} (distance {distance:e})")]
    Collision { pair: &'static str, distance: f64 },

    #[error("constraint `{name}` violated: residual {residual:e}")]
    Constraint { name: &'static str, residual: f64 },

    #[error("basis vectors are dependent (det g = {det:e})")]
    DependentBasis { det: f64 },

    #[error("point lies outside the domain of the {chart} chart")]
    OutOfChart { chart: &'static str },

    #[error("sign pattern {0:?} does not lift onto the cone")]
    InvalidBranch([bool; 3]),

    #[error("blow-down is undefined on the collision manifold r = 0")]
    CollisionManifold,

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),

    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
