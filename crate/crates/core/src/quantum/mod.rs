//! Two-photon interference on the mesh.

mod coincidence;
mod hom;
mod routing;

pub use coincidence::{two_photon_bunching, two_photon_coincidence, two_photon_distribution};
pub use hom::{
    default_delays, diagonal_arm, diagonal_delay_sweep, fit_gaussian_dip, hom_scan, hom_visibility_map,
    normalize_by_tails, path_shift_um, tail_baseline, CellVisibility, DelaySweep, DelaySweepPoint, DipFit, HomScan,
    PhotonPairSource, VisibilityMap,
};
pub use routing::{cell_at, cell_input_powers, route_to_tbs, verify_plan, CellState, RoutingPlan};
