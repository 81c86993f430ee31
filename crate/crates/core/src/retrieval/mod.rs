//! Phase retrieval: TIE initialization and multi-height amplitude averaging.

pub mod multiheight;
pub mod tie;

pub use multiheight::{
    amplitude_update, iterate_once, multiheight_recover, normalize_reference_phase, EarlyExit,
    PlaneOrder, ReconstructionResult, RecoveryOptions, DEFAULT_ITERATIONS,
};
pub use tie::{solve_tie, tie_initial_phase, tie_plane_indices};
