//! Variational construction of planar periodic orbits for `N + 3` equal masses:
//! `N` bodies chasing each other along one closed curve and three along another,
//! constrained by the cyclic symmetry group `Z_r x Z_3 x Z_N`.
//!
//! * [`symmetry`]: admissible parameters and the frequency basis of symmetric loops.
//! * [`loops`]: spectra, sampling, winding numbers.
//! * [`action`]: the action functional and its gradient.
//! * [`bounds`]: collision-time lattices and lower bounds on collision loops.
//! * [`testorbits`]: circular test loops and threshold certificates.
//! * [`solver`]: quasi-Newton minimization and solution checks.
//! * [`io`]: JSON exchange format.

pub mod action;
pub mod bounds;
pub mod io;
pub mod loops;
pub mod solver;
pub mod symmetry;
pub mod testorbits;

#[cfg(test)]
mod testutil;

pub use num_complex::Complex64;

pub use action::{total_action, ActionBreakdown, ActionError};
pub use bounds::{
    case_lower_bound, collision_closure, collision_threshold, verify_time_lemmas, BoundEngine, CaseBound,
    PiConvention, ThresholdReport,
};
pub use loops::{GeneratorSpectrum, SystemLoop, Trajectory, WindingTable};
pub use solver::{minimize, ode_residual, MinimizeOptions, MinimizeResult};
pub use symmetry::{Role, SymmetryParams};
pub use testorbits::{build_test_orbit, certify, CertificateReport};
