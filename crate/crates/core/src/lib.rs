//! Simulation of PT-symmetric coupled-LC dimers whose dissipation
//! (memristor) or coupling (meminductor) carries memory.
//!
//! Working units throughout: `omega0 = C = L = 1`, voltages in `v0`, currents
//! in `i0`, so one oscillation period is `T0 = 2 pi`.

pub mod circuit;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod memory;
pub mod scenario;
pub mod sweep;

pub use circuit::{CircuitParams, PhiState};
pub use error::ParamError;
