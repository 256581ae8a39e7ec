//! The Lagrangian action, its pairwise two-body decomposition and the gradient
//! of the discretized action with respect to the generator coefficients.
//!
//! The potential integral is approximated by the trapezoid rule on the uniform
//! periodic grid `t_k = k / M` (the node average). Samples are produced from a
//! table of `M`-th roots of unity so that every body is an exact index shift of
//! its generator, and the gradient is the exact gradient of this discretized
//! functional.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::loops::{GeneratorSpectrum, SystemLoop};
use crate::symmetry::{couples_center_of_mass, Role, SymmetryParams};

/// Pair distances below this are treated as a numerical collision.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("near-collision sample: bodies {i} and {j} at node {index} are {distance:e} apart")]
    NearCollision { i: usize, j: usize, index: usize, distance: f64 },
    #[error("grid size {m} is not a positive multiple of lcm(3, N, r) = {quantum}")]
    InvalidGrid { m: usize, quantum: usize },
    #[error("grid size {m} does not resolve frequency {freq} (need M > 2|m|)")]
    Unresolved { m: usize, freq: i64 },
}

/// Kinetic, potential and total action plus the per-pair two-body terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// `(i, j, int_0^1 1/2 |q_i' - q_j'|^2 + (N+3)/|q_i - q_j| dt)`, 1-based `i < j`.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl ActionBreakdown {
    /// `(1 / (N+3)) * sum of pair terms`; equals `total` when the center of mass vanishes.
    pub fn pairwise_total(&self) -> f64 {
        let bodies = self.pairs.iter().map(|p| p.1).max().unwrap_or(1) as f64;
        self.pairs.iter().map(|p| p.2).sum::<f64>() / bodies
    }
}

/// `N/2 sum (2 pi m)^2 |c_m|^2 + 3/2 sum (2 pi m)^2 |b_m|^2`.
pub fn kinetic_action(system: &SystemLoop) -> f64 {
    let n = system.params.n as f64;
    0.5 * n * system.main.speed_square_integral() + 1.5 * system.triple.speed_square_integral()
}

/// Trapezoid approximation of `int_0^1 sum_{i<j} 1/|q_i - q_j| dt` on `m` nodes.
pub fn potential_action(system: &SystemLoop, m: usize) -> Result<f64, ActionError> {
    let (model, coeffs) = DiscreteAction::for_system(system, m)?;
    let state = model.state(&coeffs);
    model.potential(&state)
}

pub fn total_action(system: &SystemLoop, m: usize) -> Result<ActionBreakdown, ActionError> {
    let (model, coeffs) = DiscreteAction::for_system(system, m)?;
    model.breakdown(&coeffs)
}

/// Gradient of the discretized action, one planar entry per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientGradient {
    pub main: BTreeMap<i64, Complex64>,
    pub triple: BTreeMap<i64, Complex64>,
}

impl CoefficientGradient {
    pub fn norm(&self) -> f64 {
        self.main
            .values()
            .chain(self.triple.values())
            .map(|g| g.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// `d f / d Re c_m + i d f / d Im c_m` for every coefficient of `system`,
/// projected onto the center-of-mass constraint.
pub fn action_gradient(system: &SystemLoop, m: usize) -> Result<CoefficientGradient, ActionError> {
    let (model, coeffs) = DiscreteAction::for_system(system, m)?;
    let state = model.state(&coeffs);
    model.check_separation(&state)?;
    let mut grad = model.gradient(&state);
    model.project(&mut grad);
    Ok(model.to_gradient(&grad))
}

/// Generator coefficients aligned with the frequency lists of a [`DiscreteAction`].
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub main: Vec<Complex64>,
    pub triple: Vec<Complex64>,
}

impl Coefficients {
    pub fn zeros_like(other: &Coefficients) -> Self {
        Self {
            main: vec![Complex64::default(); other.main.len()],
            triple: vec![Complex64::default(); other.triple.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.main.iter().chain(self.triple.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Complex64> {
        self.main.iter_mut().chain(self.triple.iter_mut())
    }

    /// Real inner product of the flattened `(Re, Im)` vectors.
    pub fn dot(&self, other: &Coefficients) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Coefficients) -> Coefficients {
        let mut out = self.clone();
        for (o, d) in out.iter_mut().zip(other.iter()) {
            *o += d * alpha;
        }
        out
    }

    pub fn scaled(&self, alpha: f64) -> Coefficients {
        let mut out = self.clone();
        for o in out.iter_mut() {
            *o *= alpha;
        }
        out
    }

    /// Flattened `[Re c_0, Im c_0, ...]`.
    pub fn to_reals(&self) -> Vec<f64> {
        self.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn from_reals(&self, reals: &[f64]) -> Coefficients {
        let mut out = self.clone();
        for (k, o) in out.iter_mut().enumerate() {
            *o = Complex64::new(reals[2 * k], reals[2 * k + 1]);
        }
        out
    }
}

/// Sampled body positions for one coefficient vector.
#[derive(Debug, Clone)]
pub struct SampledState {
    pub coefficients: Coefficients,
    /// `positions[b][k]`, 0-based body `b`.
    pub positions: Vec<Vec<Complex64>>,
}

/// The action discretized on an `M`-node grid over a fixed frequency basis.
#[derive(Debug, Clone)]
pub struct DiscreteAction {
    pub params: SymmetryParams,
    pub main_freqs: Vec<i64>,
    pub triple_freqs: Vec<i64>,
    grid: usize,
    roots: Vec<Complex64>,
}

impl DiscreteAction {
    pub fn new(
        params: SymmetryParams,
        main_freqs: Vec<i64>,
        triple_freqs: Vec<i64>,
        grid: usize,
    ) -> Result<Self, ActionError> {
        let quantum = params.sample_quantum();
        if grid == 0 || grid % quantum != 0 {
            return Err(ActionError::InvalidGrid { m: grid, quantum });
        }
        if let Some(&freq) = main_freqs
            .iter()
            .chain(&triple_freqs)
            .find(|f| 2 * f.unsigned_abs() as usize >= grid)
        {
            return Err(ActionError::Unresolved { m: grid, freq });
        }
        let roots = (0..grid)
            .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / grid as f64))
            .collect();
        Ok(Self { params, main_freqs, triple_freqs, grid, roots })
    }

    /// Model over the frequencies present in `system`, with its coefficients.
    pub fn for_system(system: &SystemLoop, grid: usize) -> Result<(Self, Coefficients), ActionError> {
        let main_freqs: Vec<i64> = system.main.coefficients.keys().copied().collect();
        let triple_freqs: Vec<i64> = system.triple.coefficients.keys().copied().collect();
        let coeffs = Coefficients {
            main: system.main.coefficients.values().copied().collect(),
            triple: system.triple.coefficients.values().copied().collect(),
        };
        Ok((Self::new(system.params, main_freqs, triple_freqs, grid)?, coeffs))
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn coefficients_of(&self, system: &SystemLoop) -> Coefficients {
        Coefficients {
            main: self.main_freqs.iter().map(|&m| system.main.get(m)).collect(),
            triple: self.triple_freqs.iter().map(|&m| system.triple.get(m)).collect(),
        }
    }

    pub fn to_system(&self, coeffs: &Coefficients) -> SystemLoop {
        SystemLoop {
            params: self.params,
            main: GeneratorSpectrum::from_pairs(
                Role::Main,
                self.main_freqs.iter().copied().zip(coeffs.main.iter().copied()),
            ),
            triple: GeneratorSpectrum::from_pairs(
                Role::Triple,
                self.triple_freqs.iter().copied().zip(coeffs.triple.iter().copied()),
            ),
        }
    }

    fn to_gradient(&self, grad: &Coefficients) -> CoefficientGradient {
        CoefficientGradient {
            main: self.main_freqs.iter().copied().zip(grad.main.iter().copied()).collect(),
            triple: self.triple_freqs.iter().copied().zip(grad.triple.iter().copied()).collect(),
        }
    }

    fn root(&self, m: i64, k: usize) -> Complex64 {
        let g = self.grid as i64;
        self.roots[((m.rem_euclid(g) * k as i64) % g) as usize]
    }

    /// `sum_m c_m w^(m k)` for every node, with optional per-frequency weights.
    fn synthesize(&self, freqs: &[i64], coeffs: &[Complex64], weight: impl Fn(i64) -> Complex64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.grid];
        for (&m, &c) in freqs.iter().zip(coeffs) {
            let wc = c * weight(m);
            for (k, o) in out.iter_mut().enumerate() {
                *o += wc * self.root(m, k);
            }
        }
        out
    }

    /// Expand generator samples to every body by index shifts.
    fn expand(&self, main: &[Complex64], triple: &[Complex64]) -> Vec<Vec<Complex64>> {
        let m = self.grid;
        let n = self.params.n;
        let mut bodies = Vec::with_capacity(n + 3);
        for i in 0..n {
            let offset = i * m / n;
            bodies.push((0..m).map(|k| main[(k + offset) % m]).collect());
        }
        for j in 0..3 {
            let offset = j * m / 3;
            bodies.push((0..m).map(|k| triple[(k + offset) % m]).collect());
        }
        bodies
    }

    fn derivative_samples(&self, coeffs: &Coefficients, order: i32) -> Vec<Vec<Complex64>> {
        let weight = |m: i64| Complex64::new(0.0, TAU * m as f64).powi(order);
        let main = self.synthesize(&self.main_freqs, &coeffs.main, weight);
        let triple = self.synthesize(&self.triple_freqs, &coeffs.triple, weight);
        self.expand(&main, &triple)
    }

    pub fn state(&self, coeffs: &Coefficients) -> SampledState {
        SampledState { coefficients: coeffs.clone(), positions: self.derivative_samples(coeffs, 0) }
    }

    pub fn velocities(&self, coeffs: &Coefficients) -> Vec<Vec<Complex64>> {
        self.derivative_samples(coeffs, 1)
    }

    pub fn accelerations(&self, coeffs: &Coefficients) -> Vec<Vec<Complex64>> {
        self.derivative_samples(coeffs, 2)
    }

    pub fn kinetic(&self, coeffs: &Coefficients) -> f64 {
        let n = self.params.n as f64;
        let part = |freqs: &[i64], cs: &[Complex64]| -> f64 {
            freqs.iter().zip(cs).map(|(&m, c)| (TAU * m as f64).powi(2) * c.norm_sqr()).sum()
        };
        0.5 * n * part(&self.main_freqs, &coeffs.main) + 1.5 * part(&self.triple_freqs, &coeffs.triple)
    }

    pub fn check_separation(&self, state: &SampledState) -> Result<(), ActionError> {
        let bodies = state.positions.len();
        for i in 0..bodies {
            for j in i + 1..bodies {
                for (k, (a, b)) in state.positions[i].iter().zip(&state.positions[j]).enumerate() {
                    let distance = (a - b).norm();
                    if distance < DISTANCE_FLOOR {
                        return Err(ActionError::NearCollision { i: i + 1, j: j + 1, index: k, distance });
                    }
                }
            }
        }
        Ok(())
    }

    /// Node average of `sum_{i<j} 1/|q_i - q_j|`.
    pub fn potential(&self, state: &SampledState) -> Result<f64, ActionError> {
        self.check_separation(state)?;
        let bodies = state.positions.len();
        let mut total = 0.0;
        for i in 0..bodies {
            for j in i + 1..bodies {
                let pair: f64 = state.positions[i]
                    .iter()
                    .zip(&state.positions[j])
                    .map(|(a, b)| 1.0 / (a - b).norm())
                    .sum();
                total += pair;
            }
        }
        Ok(total / self.grid as f64)
    }

    pub fn value(&self, state: &SampledState) -> Result<f64, ActionError> {
        Ok(self.kinetic(&state.coefficients) + self.potential(state)?)
    }

    pub fn breakdown(&self, coeffs: &Coefficients) -> Result<ActionBreakdown, ActionError> {
        let state = self.state(coeffs);
        let kinetic = self.kinetic(coeffs);
        let potential = self.potential(&state)?;
        let velocities = self.velocities(coeffs);
        let bodies = state.positions.len();
        let strength = bodies as f64;
        let mut pairs = Vec::with_capacity(bodies * (bodies - 1) / 2);
        for i in 0..bodies {
            for j in i + 1..bodies {
                let sum: f64 = (0..self.grid)
                    .map(|k| {
                        let dv = velocities[i][k] - velocities[j][k];
                        let dq = state.positions[i][k] - state.positions[j][k];
                        0.5 * dv.norm_sqr() + strength / dq.norm()
                    })
                    .sum();
                pairs.push((i + 1, j + 1, sum / self.grid as f64));
            }
        }
        Ok(ActionBreakdown { kinetic, potential, total: kinetic + potential, pairs })
    }

    /// `dU/dq_b` at every node: `-(1/M) sum_{j != b} (q_b - q_j)/|q_b - q_j|^3`.
    fn potential_forces(&self, state: &SampledState) -> Vec<Vec<Complex64>> {
        let bodies = state.positions.len();
        let scale = 1.0 / self.grid as f64;
        let mut forces = vec![vec![Complex64::default(); self.grid]; bodies];
        for i in 0..bodies {
            for j in i + 1..bodies {
                for k in 0..self.grid {
                    let d = state.positions[i][k] - state.positions[j][k];
                    let r2 = d.norm_sqr();
                    let g = d * (scale / (r2 * r2.sqrt()));
                    forces[i][k] -= g;
                    forces[j][k] += g;
                }
            }
        }
        forces
    }

    /// Unprojected gradient of [`DiscreteAction::value`].
    pub fn gradient(&self, state: &SampledState) -> Coefficients {
        let m = self.grid;
        let n = self.params.n;
        let forces = self.potential_forces(state);
        // pull every body's force back to its generator's time frame
        let mut main_acc = vec![Complex64::default(); m];
        for (i, row) in forces.iter().take(n).enumerate() {
            let offset = i * m / n;
            for k in 0..m {
                main_acc[(k + offset) % m] += row[k];
            }
        }
        let mut triple_acc = vec![Complex64::default(); m];
        for (j, row) in forces.iter().skip(n).enumerate() {
            let offset = j * m / 3;
            for k in 0..m {
                triple_acc[(k + offset) % m] += row[k];
            }
        }
        let project = |freqs: &[i64], cs: &[Complex64], acc: &[Complex64], count: f64| -> Vec<Complex64> {
            freqs
                .iter()
                .zip(cs)
                .map(|(&f, &c)| {
                    let kinetic = c * (count * (TAU * f as f64).powi(2));
                    let potential: Complex64 =
                        (0..m).map(|k| acc[k] * self.root(f, k).conj()).sum();
                    kinetic + potential
                })
                .collect()
        };
        let coeffs = &state.coefficients;
        Coefficients {
            main: project(&self.main_freqs, &coeffs.main, &main_acc, n as f64),
            triple: project(&self.triple_freqs, &coeffs.triple, &triple_acc, 3.0),
        }
    }

    /// Projects onto `N c_m + 3 b_m = 0` at every coupled frequency present in both lists.
    pub fn project(&self, coeffs: &mut Coefficients) {
        let n = self.params.n as f64;
        let norm = n * n + 9.0;
        for (a, &m) in self.main_freqs.iter().enumerate() {
            if !couples_center_of_mass(&self.params, m) {
                continue;
            }
            match self.triple_freqs.iter().position(|&f| f == m) {
                Some(b) => {
                    let defect = coeffs.main[a] * n + coeffs.triple[b] * 3.0;
                    coeffs.main[a] -= defect * (n / norm);
                    coeffs.triple[b] -= defect * (3.0 / norm);
                }
                None => coeffs.main[a] = Complex64::default(),
            }
        }
        for (b, &m) in self.triple_freqs.iter().enumerate() {
            if couples_center_of_mass(&self.params, m) && !self.main_freqs.contains(&m) {
                coeffs.triple[b] = Complex64::default();
            }
        }
    }

    /// `f(x + step) - f(x)` evaluated without cancellation against `f(x)`.
    pub fn difference(&self, state: &SampledState, step: &Coefficients) -> Result<(f64, SampledState), ActionError> {
        let next = self.state(&state.coefficients.axpy(1.0, step));
        self.check_separation(&next)?;
        let delta = self.state(step);
        let n = self.params.n as f64;
        let kin = |freqs: &[i64], cs: &[Complex64], ds: &[Complex64]| -> f64 {
            freqs
                .iter()
                .zip(cs.iter().zip(ds))
                .map(|(&m, (c, d))| (TAU * m as f64).powi(2) * (2.0 * (c.conj() * d).re + d.norm_sqr()))
                .sum()
        };
        let c = &state.coefficients;
        let d_kinetic = 0.5 * n * kin(&self.main_freqs, &c.main, &step.main)
            + 1.5 * kin(&self.triple_freqs, &c.triple, &step.triple);
        let bodies = state.positions.len();
        let mut d_potential = 0.0;
        for i in 0..bodies {
            for j in i + 1..bodies {
                for k in 0..self.grid {
                    let d0 = state.positions[i][k] - state.positions[j][k];
                    let dd = delta.positions[i][k] - delta.positions[j][k];
                    let r0 = d0.norm();
                    let r1 = (d0 + dd).norm();
                    let num = 2.0 * (d0.conj() * dd).re + dd.norm_sqr();
                    d_potential -= num / (r0 * r1 * (r0 + r1));
                }
            }
        }
        Ok((d_kinetic + d_potential / self.grid as f64, next))
    }
}
