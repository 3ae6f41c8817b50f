//! Matrix-free operators of the component-separation system.

mod mixing;
mod noise;
mod pointing;
mod system;

pub use mixing::{
    compute_mixing_coefficients, dust_ratio, gamma_rj, sync_ratio, MixingCoefficients, BLOCK,
    BOLTZMANN, N_COMPONENTS, PLANCK, T_CMB,
};
pub use noise::{log_spaced_knees, NoiseFilter, NoiseModel};
pub use pointing::{ScanLayout, ScanPattern, N_SUBSETS};
pub use system::{
    apply_rotation, component_index, BlockDiagPreconditioner, MapMakingOperator, SystemCore,
    SystemOperator,
};
