//! Simulator and compiler for rectangular meshes of tunable beam splitters.

pub mod analysis;
pub mod campaign;
pub mod compiler;
pub mod error;
pub(crate) mod fit;
pub mod hardware;
pub mod mesh;
pub mod quantum;
pub mod rng;

pub use analysis::{amplitude_fidelity, AmplitudeMatrix};
pub use compiler::{clements_decompose, haar_random};
pub use error::{QppError, Result};
pub use hardware::{CalibrationRecord, HardwareProfile};
pub use mesh::{CellAddress, CellSetting, LossModel, MeshSettings, TransferMatrix, Unitary};
