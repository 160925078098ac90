//! Grid-wavefunction oracle for system ⊗ probe X ⊗ probe K.
//!
//! Each axis carries a canonical pair sampled on a uniform grid and its
//! discrete-Fourier conjugate. Kicks are phase multiplications in the mixed
//! representation where they are diagonal, so every interaction is exact up
//! to grid truncation.

pub mod grid;
pub mod plan;
pub mod readout;
pub mod run;
pub mod state;
pub(crate) mod transform;
pub mod wavefn;

pub use grid::{Axis, Grid1D, Rep};
pub use plan::{plan_axes, plan_axes_for, stages, AxisPlan, Stage, DEFAULT_EXTENT_SIGMAS, DEFAULT_N};
pub use readout::{
    joint_readout_distribution, measure_moments, readout_distribution, JointTable, Moments, ProbabilityTable, ReadoutFamily,
    ReadoutModel,
};
pub use run::{
    compare, compare_initial, ComparisonRow, DeviationKind, OracleOptions, OracleReport, OracleSetup, DEFAULT_TOLERANCE,
};
pub use state::{init_state, AxisId, AxisWave, ProbeWave, WaveState};
pub use wavefn::gaussian_amplitudes;
