//! Discrete-ordinate discontinuous streamline-diffusion (DODSD) solver for the
//! steady radiative transfer equation on triangulated 2D domains.
//!
//! The pipeline is:
//! - [`mesh`]: conforming triangulations, regular refinement, inflow/outflow
//!   edge classification.
//! - [`angular`]: discrete-ordinate quadratures, phase functions and the
//!   scattering matrix.
//! - [`dg`]: P1 discontinuous basis, element-local assembly and solves.
//! - [`sweep`]: per-direction layered sweep schedules and transport sweeps.
//! - [`solver`]: source iteration over all directions and the global bilinear
//!   form used for stability checks.
//! - [`analysis`]: manufactured solutions, error norms and convergence studies.
//!
//! DODG is the `delta = 0` special case of DODSD and shares every code path.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too; small
// fixed-size loops index by vertex and edge number.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod angular;
pub mod dg;
pub mod error;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sweep;

pub use error::{Result, RteError};

/// Threshold below which `|omega . n|` is treated as tangential.
pub const EPS_NORMAL: f64 = 1e-12;
