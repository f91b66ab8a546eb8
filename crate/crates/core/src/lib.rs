//! Dynamics of a maser pumped by periodic, number-fluctuating atom injections.
//!
//! The crate works on a truncated Fock space and represents every linear map on
//! density operators as a dense superoperator matrix under column-stacking
//! vectorization. Two levels of description are provided:
//!
//! * [`micro`]: the kicked master equation. Atoms arrive at times `jT`, act on the
//!   field through the averaged kick `K`, and the field decays under the cavity
//!   Liouvillian `L` in between.
//! * [`macroscopic`]: the coarse-grained generator `G = L + K L / (1 - exp(-L T))`,
//!   built either from the spectral decomposition of `L` or from the series
//!   `-K sum_{l>=1} L exp(L T l)` with the kernel value restored explicitly.
//!
//! The core is `no_std` (it needs `alloc`); enable the `std` feature to let the
//! linear-algebra backend use runtime SIMD dispatch.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

extern crate alloc;

mod error;
pub mod fock;
pub mod injection;
pub mod linalg;
pub mod liouvillian;
pub mod macroscopic;
pub mod micro;
pub mod observables;

pub use error::{Error, Result};
pub use faer::{c64, Col, Mat};
pub use fock::{DensityOperator, FockSpace, Operator, Superoperator};
pub use injection::{
    average_kick, multi_atom_kick, sample_event, sequential_clipping_row, single_atom_kick,
    InjectionStatistics, KickFamily, KickModel, PumpSchedule,
};
pub use liouvillian::{
    build_cavity_liouvillian, exp_action, exp_action_spectral, lift_scalar_function,
    maser_function, spectral_decompose, CavityParams, SpectralDecomposition,
};
pub use macroscopic::{
    build_macro_generator, evolve_macro, macro_initial_state, pump_generator_series,
    pump_generator_spectral, steady_state, MacroGenerator, MacroMethod,
};
pub use micro::{
    coarse_grain, evolve_micro, evolve_micro_stochastic, stroboscopic_step, CoarseGrainFilter,
    FilterKind, Trajectory,
};
pub use observables::{limit_cycle_average, photon_statistics, trace_distance, PhotonStatistics};
