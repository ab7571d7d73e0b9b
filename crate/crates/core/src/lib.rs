//! Dissipative Lipkin-Meshkov-Glick model with jump-conditioned feedback.
//!
//! Collective spin operators in the maximal-spin Dicke basis, the closed
//! model's spectrum, the feedback Liouvillian and its steady state, spin
//! observables and concurrence, the mean-field limit, and parameter sweeps.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed;
pub mod density;
pub mod error;
pub mod linalg;
pub mod liouvillian;
pub mod mean_field;
pub mod observables;
pub mod spin_ops;
pub mod steady;
pub mod sweep;

pub use closed::{
    build_hamiltonian, density_of_states, diagonalize, finite_difference, ground_state_energy_curve,
    DensityOfStates, ModelParams, ParityLabel, Spectrum,
};
pub use density::{purity, DensityMatrix};
pub use error::{Error, Result};
pub use linalg::CsrMatrix;
pub use liouvillian::{
    build_control_unitary, build_effective_hamiltonian, build_liouvillian, build_liouvillian_with,
    AssemblyOptions, ControlUnitary, Feedback, SuperOperator,
};
pub use mean_field::{
    mf_bifurcation_scan, mf_critical_coupling, mf_fixed_points, mf_integrate, mf_rhs, BifurcationRow,
    FixedPoint, MeanFieldState, MfParams, Stability,
};
pub use observables::{
    concurrence, embed_two_qubit, observables, sweep_derivative, wootters_concurrence, ObservableSet,
};
pub use spin_ops::{
    build_basis, build_j_squared, build_jminus, build_jplus, build_jx, build_jy, build_jz,
    build_parity_projector, expectation, AngularMomentumBasis, Operator, ParitySign, C64,
};
pub use steady::{evolve, solve_steady_state, solve_steady_state_with, SolverKind, SolverOptions, SteadyStateResult};
pub use sweep::{
    export_csv, export_json_metadata, iso_contour, locate_concurrence_max, run_sweep, Grid2D, SweepConfig,
    SweepResult,
};
