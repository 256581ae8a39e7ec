//! Circular test loops and the threshold certificate built on them.
//!
//! The main generator is `a e(3t)` and the triple generator `b e(-N t)`, both
//! with zero phase at `t = 0`. The phases of the remaining bodies follow from
//! the time shifts; they reproduce the listed configurations up to a
//! relabeling of bodies because `gcd(3, N) = 1`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::action::{total_action, ActionError};
use crate::bounds::{BoundEngine, BoundsError, Parity, PiConvention};
use crate::loops::{GeneratorSpectrum, LoopError, SystemLoop, WindingTable};
use crate::symmetry::{Compatibility, Role, SymmetryParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestOrbitError {
    #[error("incompatible parameters: {0}")]
    Incompatible(Compatibility),
    #[error("radius {name} must be positive, got {value}")]
    NonPositiveRadius { name: &'static str, value: f64 },
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Main coefficient `a` at frequency 3, triple coefficient `b` at frequency `-N`.
pub fn build_test_orbit(params: &SymmetryParams, a: f64, b: f64) -> Result<SystemLoop, TestOrbitError> {
    let compat = params.compatibility_check();
    if !compat.is_ok() {
        return Err(TestOrbitError::Incompatible(compat));
    }
    for (name, value) in [("a", a), ("b", b)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(TestOrbitError::NonPositiveRadius { name, value });
        }
    }
    let main = GeneratorSpectrum::new(Role::Main).with(3, Complex64::new(a, 0.0));
    let triple = GeneratorSpectrum::new(Role::Triple).with(-(params.n as i64), Complex64::new(b, 0.0));
    Ok(SystemLoop::new(*params, main, triple)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub params: SymmetryParams,
    pub a: f64,
    pub b: f64,
    pub grid: usize,
    pub action: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub threshold: f64,
    pub threshold_symbol: &'static str,
    pub pi: PiConvention,
    pub margin: f64,
    pub verdict: Verdict,
    pub windings: WindingTable,
}

impl CertificateReport {
    pub fn certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Certificate with the threshold evaluated at exact pi.
pub fn certify(params: &SymmetryParams, a: f64, b: f64, grid: usize) -> Result<CertificateReport, TestOrbitError> {
    certify_with(&BoundEngine::default(), params, a, b, grid)
}

pub fn certify_with(
    engine: &BoundEngine,
    params: &SymmetryParams,
    a: f64,
    b: f64,
    grid: usize,
) -> Result<CertificateReport, TestOrbitError> {
    let system = build_test_orbit(params, a, b)?;
    let action = total_action(&system, grid)?;
    let threshold = engine.collision_threshold(params)?;
    let windings = WindingTable::of(&system.sample(grid)?);
    let margin = threshold.threshold - action.total;
    let verdict = if margin > 0.0 && windings.all_match() { Verdict::Certified } else { Verdict::NotCertified };
    Ok(CertificateReport {
        params: *params,
        a,
        b,
        grid,
        action: action.total,
        kinetic: action.kinetic,
        potential: action.potential,
        threshold: threshold.threshold,
        threshold_symbol: Parity::of(params.n).symbol(),
        pi: engine.pi,
        margin,
        verdict,
        windings,
    })
}

/// Action of the circular family on a `5 x 5` stencil of spacing `h` around `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StencilReport {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    /// `values[i][j]` at `(a + (i - 2) h, b + (j - 2) h)`.
    pub values: [[f64; 5]; 5],
}

impl StencilReport {
    pub fn center(&self) -> f64 {
        self.values[2][2]
    }

    pub fn is_local_min(&self) -> bool {
        self.values.iter().flatten().all(|&v| v >= self.center())
    }

    /// Stencil point with the smallest action.
    pub fn argmin(&self) -> (f64, f64, f64) {
        let mut best = (self.a, self.b, self.center());
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < best.2 {
                    best = (self.a + (i as f64 - 2.0) * self.h, self.b + (j as f64 - 2.0) * self.h, v);
                }
            }
        }
        best
    }
}

pub fn stencil(params: &SymmetryParams, a: f64, b: f64, h: f64, grid: usize) -> Result<StencilReport, TestOrbitError> {
    let mut values = [[0.0; 5]; 5];
    for (i, row) in values.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let sys = build_test_orbit(params, a + (i as f64 - 2.0) * h, b + (j as f64 - 2.0) * h)?;
            *v = total_action(&sys, grid)?.total;
        }
    }
    Ok(StencilReport { a, b, h, values })
}
