//! Quasi-Newton descent on the symmetry-reduced coefficient space, plus the
//! checks that a result is a collision-free periodic solution.
//!
//! The search runs over every admissible frequency up to the cutoff. Each
//! iterate is kept on the center-of-mass subspace by projecting gradients and
//! directions. A trial step is accepted only if the accurately evaluated action
//! difference satisfies the Armijo condition, the minimum pair distance stays
//! above the guard and no pair winding changes.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::action::{ActionError, Coefficients, DiscreteAction, SampledState};
use crate::bounds::{collision_threshold, BoundsError};
use crate::loops::{min_separation, LoopError, Separation, SystemLoop, Trajectory, WindingTable};
use crate::symmetry::{allowed_frequencies, group_action_residual, BasisError, GroupGenerator, ResidualError, Role};

pub const DEFAULT_EPS_SEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeOptions {
    /// Frequency cutoff `K`.
    pub modes: i64,
    /// Grid size `M`.
    pub grid: usize,
    pub max_iter: usize,
    pub gtol: f64,
    pub eps_sep: f64,
    pub shrink: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
}

impl MinimizeOptions {
    /// Defaults for `params` with `K = 24` and `M = 16 lcm(3, N, r)`.
    pub fn for_params(params: &crate::symmetry::SymmetryParams) -> Self {
        Self {
            modes: 24,
            grid: params.default_grid(),
            max_iter: 5000,
            gtol: 1e-8,
            eps_sep: DEFAULT_EPS_SEP,
            shrink: 0.5,
            armijo: 1e-4,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidOptions(what.to_string()));
        if !(self.gtol > 0.0) {
            return bad("gtol must be positive");
        }
        if !(self.eps_sep >= 1e-6) {
            return bad("eps_sep must be at least 1e-6");
        }
        if self.modes < n as i64 {
            return bad("modes K must be at least N");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo constant must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("separation guard hit at start: bodies {i} and {j} are {distance:e} apart (guard {guard:e})")]
    SeparationGuardAtStart { i: usize, j: usize, distance: f64, guard: f64 },
    #[error("no admissible step from the starting loop (gradient norm {gradnorm:e})")]
    NoAdmissibleStep { gradnorm: f64 },
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    StepUnderflow,
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Start value plus the accumulated accurate differences.
    pub action: f64,
    /// Accurate `f(x_new) - f(x_old)`, always negative.
    pub decrease: f64,
    pub gradnorm: f64,
    pub minsep: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeResult {
    #[serde(skip)]
    pub system: SystemLoop,
    pub options: MinimizeOptions,
    pub start_action: f64,
    pub action: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub gradnorm: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub ode_residual: f64,
    pub windings: WindingTable,
    pub min_separation: f64,
    pub min_separation_pair: (usize, usize),
    pub symmetry_residual: f64,
    pub threshold: f64,
    /// Converged, below the threshold, above the guard and windings intact.
    pub certified: bool,
    pub history: Vec<IterationRecord>,
}

impl MinimizeResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// `iter,action,gradnorm,minsep,step` with 17 significant digits.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,action,gradnorm,minsep,step\n");
        for h in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                h.iter,
                crate::loops::sci17(h.action),
                crate::loops::sci17(h.gradnorm),
                crate::loops::sci17(h.minsep),
                crate::loops::sci17(h.step)
            ));
        }
        out
    }
}

/// Model over every admissible frequency up to `modes`, plus any frequency
/// already present in `start`.
fn model_for(start: &SystemLoop, options: &MinimizeOptions) -> Result<DiscreteAction, SolverError> {
    let params = start.params;
    let merge = |role: Role, existing: &mut dyn Iterator<Item = i64>| -> Result<Vec<i64>, SolverError> {
        let mut freqs = allowed_frequencies(&params, role, options.modes)?;
        freqs.extend(existing);
        freqs.sort_unstable();
        freqs.dedup();
        Ok(freqs)
    };
    let main = merge(Role::Main, &mut start.main.coefficients.keys().copied())?;
    let triple = merge(Role::Triple, &mut start.triple.coefficients.keys().copied())?;
    Ok(DiscreteAction::new(params, main, triple, options.grid)?)
}

fn separation_of(positions: &[Vec<Complex64>]) -> (f64, (usize, usize)) {
    let mut best = (f64::INFINITY, (1, 2));
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            for (a, b) in positions[i].iter().zip(&positions[j]) {
                let d = (a - b).norm();
                if d < best.0 {
                    best = (d, (i + 1, j + 1));
                }
            }
        }
    }
    best
}

/// Inverse of the kinetic Hessian, per real coordinate.
fn kinetic_preconditioner(model: &DiscreteAction) -> Vec<f64> {
    let n = model.params.n as f64;
    let inv = |count: f64, m: i64| 1.0 / (count * (TAU * m as f64).powi(2));
    model
        .main_freqs
        .iter()
        .map(|&m| inv(n, m))
        .chain(model.triple_freqs.iter().map(|&m| inv(3.0, m)))
        .flat_map(|h| [h, h])
        .collect()
}

struct InverseHessian {
    dim: usize,
    h: Vec<f64>,
    diag: Vec<f64>,
}

impl InverseHessian {
    fn new(diag: Vec<f64>) -> Self {
        let dim = diag.len();
        let mut out = Self { dim, h: vec![0.0; dim * dim], diag };
        out.reset();
        out
    }

    fn reset(&mut self) {
        self.h.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.dim {
            self.h[k * self.dim + k] = self.diag[k];
        }
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.h[i * self.dim..(i + 1) * self.dim].iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// BFGS update `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
        if !(sy > 0.0) {
            return;
        }
        let rho = 1.0 / sy;
        let hy = self.apply(y);
        let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.h[i * d + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
            }
        }
    }
}

/// Minimizes the discretized action from `start`.
pub fn minimize(start: &SystemLoop, options: &MinimizeOptions) -> Result<MinimizeResult, SolverError> {
    options.validate(start.params.n)?;
    let model = model_for(start, options)?;
    let mut x = model.coefficients_of(start);
    model.project(&mut x);
    let mut state = model.state(&x);
    let (sep, pair) = separation_of(&state.positions);
    if sep < options.eps_sep {
        return Err(SolverError::SeparationGuardAtStart { i: pair.0, j: pair.1, distance: sep, guard: options.eps_sep });
    }
    let start_action = model.value(&state)?;
    let windings = WindingTable::from_positions(&model.params, &state.positions).measured();

    let gradient = |state: &SampledState| {
        let mut g = model.gradient(state);
        model.project(&mut g);
        g
    };
    let mut hess = InverseHessian::new(kinetic_preconditioner(&model));
    let mut g = gradient(&state);
    let mut f = start_action;
    let mut history = Vec::new();
    let mut termination = Termination::MaxIterations;

    for iter in 0..options.max_iter {
        let gnorm = g.norm();
        if gnorm <= options.gtol {
            termination = Termination::Converged;
            break;
        }
        let mut dir = g.from_reals(&hess.apply(&g.to_reals())).scaled(-1.0);
        model.project(&mut dir);
        let mut slope = dir.dot(&g);
        if !(slope < 0.0) {
            hess.reset();
            dir = g.from_reals(&hess.apply(&g.to_reals())).scaled(-1.0);
            model.project(&mut dir);
            slope = dir.dot(&g);
        }
        let Some((alpha, df, next)) = line_search(&model, &state, &dir, slope, &windings, options) else {
            if iter == 0 && history.is_empty() {
                return Err(SolverError::NoAdmissibleStep { gradnorm: gnorm });
            }
            termination = Termination::StepUnderflow;
            break;
        };
        let g_next = gradient(&next);
        let s = dir.scaled(alpha);
        let y = g_next.axpy(-1.0, &g);
        hess.update(&s.to_reals(), &y.to_reals());
        f += df;
        state = next;
        g = g_next;
        history.push(IterationRecord {
            iter: iter + 1,
            action: f,
            decrease: df,
            gradnorm: g.norm(),
            minsep: separation_of(&state.positions).0,
            step: s.norm(),
        });
    }

    let system = model.to_system(&state.coefficients);
    let breakdown = model.breakdown(&state.coefficients)?;
    let membership = membership_check(&system, options.grid)?;
    let ode = force_residual_rms(&state.positions, &model.accelerations(&state.coefficients));
    let threshold = collision_threshold(&system.params)?.threshold;
    let termination_ok = termination == Termination::Converged;
    let min_sep = membership.min_separation;
    let certified = termination_ok
        && breakdown.total < threshold
        && min_sep.distance >= options.eps_sep
        && membership.windings.measured() == windings;
    Ok(MinimizeResult {
        system,
        options: options.clone(),
        start_action,
        action: breakdown.total,
        kinetic: breakdown.kinetic,
        potential: breakdown.potential,
        gradnorm: g.norm(),
        iterations: history.len(),
        termination,
        ode_residual: ode,
        windings: membership.windings,
        min_separation: min_sep.distance,
        min_separation_pair: min_sep.pair,
        symmetry_residual: membership.symmetry_residual,
        threshold,
        certified,
        history,
    })
}

/// Backtracking from the full quasi-Newton step. Returns the accepted scale,
/// the accurate action change and the new state.
fn line_search(
    model: &DiscreteAction,
    state: &SampledState,
    dir: &Coefficients,
    slope: f64,
    windings: &[Option<i64>],
    options: &MinimizeOptions,
) -> Option<(f64, f64, SampledState)> {
    let scale = state.coefficients.norm().max(1.0);
    let mut alpha = 1.0;
    while alpha * dir.norm() > 1e-17 * scale {
        let step = dir.scaled(alpha);
        if let Ok((df, next)) = model.difference(state, &step) {
            let accepted = df < 0.0
                && df <= options.armijo * alpha * slope
                && separation_of(&next.positions).0 >= options.eps_sep
                && WindingTable::from_positions(&model.params, &next.positions).measured() == windings;
            if accepted {
                return Some((alpha, df, next));
            }
        }
        alpha *= options.shrink;
    }
    None
}

/// Root mean square over bodies and rows of `|a_i - sum_{j != i} (q_j - q_i) / |q_i - q_j|^3|`.
pub fn force_residual_rms(positions: &[Vec<Complex64>], accelerations: &[Vec<Complex64>]) -> f64 {
    let bodies = positions.len();
    let samples = positions.first().map_or(0, Vec::len);
    let mut sum = 0.0;
    for k in 0..samples {
        for i in 0..bodies {
            let mut force = Complex64::default();
            for j in 0..bodies {
                if j != i {
                    let d = positions[j][k] - positions[i][k];
                    force += d / d.norm().powi(3);
                }
            }
            sum += (accelerations[i][k] - force).norm_sqr();
        }
    }
    (sum / (bodies * samples).max(1) as f64).sqrt()
}

/// Newtonian equation-of-motion residual on an `m`-node grid, with spectral
/// second derivatives.
pub fn ode_residual(system: &SystemLoop, m: usize) -> Result<f64, SolverError> {
    ode_residual_guarded(system, m, DEFAULT_EPS_SEP)
}

pub fn ode_residual_guarded(system: &SystemLoop, m: usize, eps_sep: f64) -> Result<f64, SolverError> {
    let (model, coeffs) = DiscreteAction::for_system(system, m)?;
    let state = model.state(&coeffs);
    let (sep, pair) = separation_of(&state.positions);
    if sep < eps_sep {
        return Err(SolverError::SeparationGuardAtStart { i: pair.0, j: pair.1, distance: sep, guard: eps_sep });
    }
    Ok(force_residual_rms(&state.positions, &model.accelerations(&coeffs)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub windings: WindingTable,
    /// Largest `group_action_residual` over `g1, g2, g3`.
    pub symmetry_residual: f64,
    #[serde(serialize_with = "serialize_separation")]
    pub min_separation: Separation,
    pub com_drift: f64,
}

fn serialize_separation<S: serde::Serializer>(s: &Separation, ser: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = ser.serialize_struct("Separation", 3)?;
    st.serialize_field("pair", &s.pair)?;
    st.serialize_field("index", &s.index)?;
    st.serialize_field("distance", &s.distance)?;
    st.end()
}

pub fn membership_check(system: &SystemLoop, m: usize) -> Result<MembershipReport, SolverError> {
    let traj = system.sample(m)?;
    membership_of(&traj)
}

/// Membership diagnostics for already sampled data.
pub fn membership_of(traj: &Trajectory) -> Result<MembershipReport, SolverError> {
    let mut symmetry_residual: f64 = 0.0;
    for g in GroupGenerator::ALL {
        symmetry_residual = symmetry_residual.max(group_action_residual(traj, g)?);
    }
    Ok(MembershipReport {
        windings: WindingTable::of(traj),
        symmetry_residual,
        min_separation: min_separation(traj),
        com_drift: traj.center_of_mass_drift(),
    })
}

/// Re-minimizes with `K` and `M` doubled at every level, each level starting
/// from the previous result.
pub fn refinement_ladder(
    start: &SystemLoop,
    options: &MinimizeOptions,
    levels: usize,
) -> Result<Vec<MinimizeResult>, SolverError> {
    let mut out: Vec<MinimizeResult> = Vec::with_capacity(levels);
    let mut opts = options.clone();
    let mut current = start.clone();
    for level in 0..levels {
        if level > 0 {
            opts.modes *= 2;
            opts.grid *= 2;
        }
        let result = minimize(&current, &opts)?;
        current = result.system.clone();
        out.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testorbits::build_test_orbit;
    use crate::testutil::{case_n4, random_unsymmetric_trajectory};

    #[test]
    fn lagrange_equilateral_residual() {
        let omega = 3f64.powf(-0.25);
        let samples = 64;
        let mut positions = vec![Vec::new(); 3];
        let mut accelerations = vec![Vec::new(); 3];
        for k in 0..samples {
            let t = TAU * k as f64 / samples as f64 / omega;
            for b in 0..3 {
                let q = Complex64::from_polar(1.0, omega * t + TAU * b as f64 / 3.0);
                positions[b].push(q);
                accelerations[b].push(-q * omega * omega);
            }
        }
        assert!(force_residual_rms(&positions, &accelerations) <= 1e-10);
        // a wrong angular frequency is detected
        let wrong: Vec<Vec<Complex64>> = accelerations.iter().map(|r| r.iter().map(|a| a * 1.1).collect()).collect();
        assert!(force_residual_rms(&positions, &wrong) > 1e-2);
    }

    #[test]
    fn test_orbit_is_not_a_solution() {
        let p = case_n4();
        let sys = build_test_orbit(&p, 0.23, 0.088).unwrap();
        assert!(ode_residual(&sys, p.default_grid()).unwrap() > 0.1);
    }

    #[test]
    fn membership_of_test_orbit() {
        let p = case_n4();
        let sys = build_test_orbit(&p, 0.23, 0.088).unwrap();
        let report = membership_check(&sys, p.default_grid()).unwrap();
        assert_eq!(report.windings.entries.len(), 6 + 3);
        assert!(report.windings.all_match());
        assert_eq!(report.windings.summary(&p), Some((3, -4)));
        assert!(report.symmetry_residual <= 1e-10);
        assert!(report.com_drift <= 1e-12);
    }

    #[test]
    fn membership_flags_unsymmetric_data() {
        let p = case_n4();
        let traj = random_unsymmetric_trajectory(&p, 168, 5);
        assert!(membership_of(&traj).unwrap().symmetry_residual > 0.1);
    }

    #[test]
    fn option_validation() {
        let p = case_n4();
        let base = MinimizeOptions::for_params(&p);
        assert!(base.validate(4).is_ok());
        assert!(MinimizeOptions { gtol: 0.0, ..base.clone() }.validate(4).is_err());
        assert!(MinimizeOptions { eps_sep: 1e-7, ..base.clone() }.validate(4).is_err());
        assert!(MinimizeOptions { modes: 3, ..base }.validate(4).is_err());
    }

    #[test]
    fn separation_guard_at_start() {
        let p = case_n4();
        let sys = build_test_orbit(&p, 0.23, 0.088).unwrap();
        let opts = MinimizeOptions { eps_sep: 0.5, ..MinimizeOptions::for_params(&p) };
        assert!(matches!(minimize(&sys, &opts), Err(SolverError::SeparationGuardAtStart { .. })));
    }

    /// Golden-section search over one variable.
    fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if f(x1) < f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn two_parameter_family_matches_grid_oracle() {
        let p = case_n4();
        let grid = p.default_grid();
        let f = |a: f64, b: f64| {
            // a = b puts the two circles on top of each other
            crate::action::total_action(&build_test_orbit(&p, a, b).unwrap(), grid).map_or(f64::INFINITY, |x| x.total)
        };
        // coarse scan of [0.01, 0.5]^2, then alternating line refinement
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..50 {
            for j in 0..50 {
                let (a, b) = (0.01 + 0.01 * i as f64, 0.01 + 0.01 * j as f64);
                let v = f(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (mut a, mut b) = (best.1, best.2);
        for _ in 0..20 {
            a = golden(|x| f(x, b), a - 0.02, a + 0.02);
            b = golden(|y| f(a, y), (b - 0.02).max(1e-3), b + 0.02);
        }
        let oracle = f(a, b);

        let start = build_test_orbit(&p, 0.23, 0.088).unwrap();
        let opts = MinimizeOptions { modes: 4, ..MinimizeOptions::for_params(&p) };
        let result = minimize(&start, &opts).unwrap();
        assert!(result.converged(), "{:?}", result.termination);
        assert!((result.action - oracle).abs() < 1e-4, "{} vs {}", result.action, oracle);
    }

    #[test]
    fn minimize_n4_from_test_orbit() {
        let p = case_n4();
        let start = build_test_orbit(&p, 0.23, 0.088).unwrap();
        let result = minimize(&start, &MinimizeOptions::for_params(&p)).unwrap();
        assert!(result.converged(), "{:?} gradnorm {}", result.termination, result.gradnorm);
        assert!(result.action <= result.start_action);
        assert!(result.action <= 135.5123);
        assert!(result.action < 138.9586);
        assert_eq!(result.windings.summary(&p), Some((3, -4)));
        assert!(result.min_separation >= 1e-3);
        assert!(result.symmetry_residual < 1e-10);
        assert!(result.certified);
        assert!(result.history.iter().all(|h| h.decrease < 0.0));
        assert!(result.history.windows(2).all(|w| w[1].action <= w[0].action));

        // a converged result is a fixed point
        let again = minimize(&result.system, &MinimizeOptions::for_params(&p)).unwrap();
        assert!(again.iterations <= 2);
        assert!((again.action - result.action).abs() < 1e-10);

        // repeated runs are bit-identical
        let twin = minimize(&start, &MinimizeOptions::for_params(&p)).unwrap();
        assert_eq!(twin, result);
    }
}
