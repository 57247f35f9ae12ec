use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{0} is not a dyadic number (1, 2, 4, ...)")]
    NonDyadic(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("grid has M = {m} points but the direct normal-form sum is capped at grid_cap = {cap}")]
    CostGuard { m: usize, cap: usize },
    #[error("numerical blowup at t = {t}")]
    Blowup { t: f64 },
    #[error("resonant multiplier: phase vanished on the cutoff support at N = {n}")]
    Resonant { n: f64 },
    #[error("quadrature needs {needed} but got {got}")]
    InsufficientSnapshots { needed: String, got: usize },
    #[error("slot index {l} outside 1..={max}")]
    InvalidSlot { l: usize, max: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("time {t} is not a stored snapshot time")]
    UnknownTime { t: f64 },
    #[error("time lattices of the two trajectories differ")]
    LatticeMismatch,
    #[error("no start time below the wrap-around horizon {horizon:.3} reaches delta = {delta_target:e} (best {best:e}); enlarge the box or raise delta_target")]
    NoDispersiveWindow { horizon: f64, delta_target: f64, best: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
