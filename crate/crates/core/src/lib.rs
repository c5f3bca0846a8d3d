//! Renormalization-group flows for the quantum-mechanical double well.
//!
//! The crate integrates proper-time and Wegner-Houghton flow equations for
//! the running potential `V(k, x)` and, at next-to-leading order in the
//! derivative expansion, the wave-function renormalization `Z(k, x)`, and
//! reads off the gap between the two lowest levels as the renormalized mass
//! `sqrt(V''(0,0) / Z(0,0))`. An independent finite-difference eigensolver
//! and the dilute instanton formula provide reference values.
//!
//! ```no_run
//! use dwflow::{integrate, ModelParams, SchemeSpec, SpatialGrid, SteppingConfig};
//!
//! let params = ModelParams::new(-1.0, 0.1, 1500.0)?;
//! let grid = SpatialGrid::for_params(&params, 2001)?;
//! let run = integrate(&params, SchemeSpec::ProperTimeNLO, &grid, &SteppingConfig::default(), &[])?;
//! println!("gap = {:?}, Z(0,0) = {}", run.delta_e, run.z_origin);
//! # Ok::<(), dwflow::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod exact;
pub mod flow_rhs;
pub mod instanton;
pub mod integrator;
pub mod model;
pub mod observables;
pub mod stencil;

pub use error::{Error, Result};
pub use exact::{schrodinger_gap, EigenConfig, EigenResult, Parity};
pub use flow_rhs::{alpha, rhs_pt_inf, rhs_pt_m, rhs_wh, Kernel, PointData, SchemeSpec};
pub use instanton::instanton_gap;
pub use integrator::{
    initialize, integrate, sweep_m, Diagnostics, FlowResult, FlowState, HistoryPoint,
    SteppingConfig, SweepPoint, Termination,
};
pub use model::{bare_potential, classical_minima, ModelParams, SpatialGrid};
pub use observables::{gap_from_flow, GapEstimate};
pub use stencil::{derivative, Field};
