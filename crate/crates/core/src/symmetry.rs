//! The cyclic symmetry group `Z_r x Z_3 x Z_N`, its admissibility conditions and
//! the frequency basis of the fixed-point loop space.
//!
//! The plane is identified with `C`. A generating loop is written
//! `q(t) = sum_m c_m e(m t)` with `e(x) = exp(2 pi i x)`, so the rotation
//! `O(theta)` is multiplication by `exp(i theta)` and every group constraint
//! becomes a congruence on the frequency `m`.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loops::{SystemLoop, Trajectory};

/// Which generating curve a spectrum belongs to: the `N` main bodies or the
/// three-body chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Main,
    Triple,
}

impl Role {
    /// Number of bodies that are time shifts of this generator.
    pub fn body_count(self, params: &SymmetryParams) -> usize {
        match self {
            Role::Main => params.n,
            Role::Triple => 3,
        }
    }

    /// Sub-period divisor: main loops are `1/3`-periodic, triple loops `1/N`-periodic.
    pub fn divisor(self, params: &SymmetryParams) -> i64 {
        match self {
            Role::Main => 3,
            Role::Triple => params.n as i64,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Main => f.write_str("main"),
            Role::Triple => f.write_str("triple"),
        }
    }
}

/// `(N, r, d, k1, k2)`; all masses and the period are 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetryParams {
    /// Bodies on the main curve.
    pub n: usize,
    /// Rotation order.
    pub r: usize,
    /// Rotation multiplier, kept in `0..r`.
    pub d: i64,
    /// Winding number of main-curve pairs.
    pub k1: i64,
    /// Winding number of the triple pairs.
    pub k2: i64,
}

impl SymmetryParams {
    /// Builds the tuple, reducing `d` modulo `r` when `r > 0`.
    pub fn new(n: usize, r: usize, d: i64, k1: i64, k2: i64) -> Self {
        let d = if r > 0 { d.rem_euclid(r as i64) } else { d };
        Self { n, r, d, k1, k2 }
    }

    pub fn total_bodies(&self) -> usize {
        self.n + 3
    }

    /// `lcm(3, N, r)`: the smallest grid on which every group element maps
    /// samples to samples.
    pub fn sample_quantum(&self) -> usize {
        lcm(lcm(3, self.n), self.r)
    }

    /// Default grid `16 * lcm(3, N, r)`.
    pub fn default_grid(&self) -> usize {
        16 * self.sample_quantum()
    }

    pub fn compatibility_check(&self) -> Compatibility {
        compatibility_check(self)
    }
}

impl fmt::Display for SymmetryParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} r={} d={} k1={} k2={}",
            self.n, self.r, self.d, self.k1, self.k2
        )
    }
}

/// A failed admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    TooFewMainBodies,
    RotationOrderTooSmall,
    MainNotCoprimeToThree,
    RotationNotCoprimeToThree,
    K1NotCongruentToD,
    K2NotCongruentToD,
    K1NotMultipleOfThree,
    K2NotMultipleOfN,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::TooFewMainBodies => "N < 4",
            Violation::RotationOrderTooSmall => "r < 2",
            Violation::MainNotCoprimeToThree => "gcd(N,3) ≠ 1",
            Violation::RotationNotCoprimeToThree => "gcd(r,3) ≠ 1",
            Violation::K1NotCongruentToD => "k1 ≢ d (mod r)",
            Violation::K2NotCongruentToD => "k2 ≢ d (mod r)",
            Violation::K1NotMultipleOfThree => "k1 not multiple of 3",
            Violation::K2NotMultipleOfN => "k2 not multiple of N",
        };
        f.write_str(s)
    }
}

/// Outcome of [`compatibility_check`]; empty means admissible.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Compatibility {
    pub violations: Vec<Violation>,
}

impl Compatibility {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, v: Violation) -> bool {
        self.violations.contains(&v)
    }
}

impl fmt::Display for Compatibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let names: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&names.join("; "))
    }
}

/// Checks the compatible conditions on `(N, r, d, k1, k2)` plus the coprimality
/// requirements `(N, 3) = (r, 3) = 1`.
pub fn compatibility_check(params: &SymmetryParams) -> Compatibility {
    let mut violations = Vec::new();
    if params.n < 4 {
        violations.push(Violation::TooFewMainBodies);
    }
    if params.r < 2 {
        violations.push(Violation::RotationOrderTooSmall);
    }
    if gcd(params.n, 3) != 1 {
        violations.push(Violation::MainNotCoprimeToThree);
    }
    if gcd(params.r, 3) != 1 {
        violations.push(Violation::RotationNotCoprimeToThree);
    }
    if params.r >= 1 {
        let r = params.r as i64;
        if (params.k1 - params.d).rem_euclid(r) != 0 {
            violations.push(Violation::K1NotCongruentToD);
        }
        if (params.k2 - params.d).rem_euclid(r) != 0 {
            violations.push(Violation::K2NotCongruentToD);
        }
    }
    if params.k1 % 3 != 0 {
        violations.push(Violation::K1NotMultipleOfThree);
    }
    if params.n == 0 || params.k2 % params.n as i64 != 0 {
        violations.push(Violation::K2NotMultipleOfN);
    }
    Compatibility { violations }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BasisError {
    #[error("empty basis: no {role} frequency with |m| <= {cutoff}")]
    EmptyBasis { role: Role, cutoff: i64 },
}

/// Counterclockwise rotation of `v` by `theta`.
pub fn rotation_apply(theta: f64, v: Complex64) -> Complex64 {
    v * Complex64::from_polar(1.0, theta)
}

/// The unit rotation `e(x) = exp(2 pi i x)`.
pub fn unit(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x)
}

/// Residues `m mod lcm(divisor, r)` satisfying both congruences of `role`.
fn admissible_residues(params: &SymmetryParams, role: Role) -> (i64, Vec<i64>) {
    let divisor = role.divisor(params);
    let r = params.r as i64;
    let period = lcm(divisor as usize, params.r) as i64;
    let residues = (0..period)
        .filter(|m| m % divisor == 0 && (m - params.d).rem_euclid(r) == 0)
        .collect();
    (period, residues)
}

/// Frequencies allowed for `role` with `|m| <= cutoff`, ascending.
///
/// Main: `m = 0 (mod 3)` and `m = d (mod r)`. Triple: `m = 0 (mod N)` and
/// `m = d (mod r)`.
pub fn allowed_frequencies(
    params: &SymmetryParams,
    role: Role,
    cutoff: i64,
) -> Result<Vec<i64>, BasisError> {
    let (period, residues) = admissible_residues(params, role);
    let mut out = Vec::new();
    if cutoff >= 0 {
        for &res in &residues {
            // smallest m >= -cutoff congruent to res
            let mut m = res + (-cutoff - res).div_euclid(period) * period;
            if m < -cutoff {
                m += period;
            }
            while m <= cutoff {
                out.push(m);
                m += period;
            }
        }
    }
    out.sort_unstable();
    if out.is_empty() {
        return Err(BasisError::EmptyBasis { role, cutoff });
    }
    Ok(out)
}

/// Whether `m` is an allowed frequency for `role` (ignoring any cutoff).
pub fn is_allowed(params: &SymmetryParams, role: Role, m: i64) -> bool {
    m % role.divisor(params) == 0 && (m - params.d).rem_euclid(params.r as i64) == 0
}

/// Frequencies at which the two generators are coupled by the center-of-mass
/// constraint `N c_m + 3 b_m = 0`: exactly the multiples of `3N`.
pub fn couples_center_of_mass(params: &SymmetryParams, m: i64) -> bool {
    m % (3 * params.n as i64) == 0
}

/// Orthogonal projection of the coefficient vector onto the kernel of
/// `(c, b) -> sum_i q_i(t)`.
///
/// Only frequencies divisible by `3N` contribute to the total position, where
/// it reads `N c_m + 3 b_m`; everything else is returned unchanged.
pub fn com_project(system: &SystemLoop) -> SystemLoop {
    let params = system.params;
    let n = params.n as f64;
    let mut main = system.main.clone();
    let mut triple = system.triple.clone();
    let coupled: BTreeSet<i64> = main
        .coefficients
        .keys()
        .chain(triple.coefficients.keys())
        .copied()
        .filter(|&m| couples_center_of_mass(&params, m))
        .collect();
    let norm = n * n + 9.0;
    for m in coupled {
        let c = main.get(m);
        let b = triple.get(m);
        let defect = c * n + b * 3.0;
        main.coefficients.insert(m, c - defect * (n / norm));
        triple.coefficients.insert(m, b - defect * (3.0 / norm));
    }
    SystemLoop { params, main, triple }
}

/// Generators of the group action on loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupGenerator {
    /// Time shift by `1/r` followed by the rotation `O(-2 pi d / r)`.
    G1,
    /// Time shift by `1/3` with the cyclic relabeling of the triple.
    G2,
    /// Time shift by `1/N` with the cyclic relabeling of the main bodies.
    G3,
}

impl GroupGenerator {
    pub const ALL: [GroupGenerator; 3] = [GroupGenerator::G1, GroupGenerator::G2, GroupGenerator::G3];
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResidualError {
    #[error("{samples} samples is not a multiple of lcm(3, N, r) = {quantum}")]
    GridNotInvariant { samples: usize, quantum: usize },
}

/// `max |(g q)(t_k) - q(t_k)|` over bodies and sample nodes.
pub fn group_action_residual(traj: &Trajectory, generator: GroupGenerator) -> Result<f64, ResidualError> {
    let params = traj.params;
    let m = traj.samples();
    let quantum = params.sample_quantum();
    if m == 0 || m % quantum != 0 {
        return Err(ResidualError::GridNotInvariant { samples: m, quantum });
    }
    let n = params.n;
    let total = params.total_bodies();
    // (source body, time offset in samples, rotation) for each target body
    let source = |b: usize| -> (usize, usize, Complex64) {
        match generator {
            GroupGenerator::G1 => (
                b,
                m / params.r,
                unit(-(params.d as f64) / params.r as f64),
            ),
            GroupGenerator::G2 => {
                let src = if b < n { b } else { n + (b - n + 2) % 3 };
                (src, m / 3, Complex64::new(1.0, 0.0))
            }
            GroupGenerator::G3 => {
                let src = if b < n { (b + n - 1) % n } else { b };
                (src, m / n, Complex64::new(1.0, 0.0))
            }
        }
    };
    let mut worst: f64 = 0.0;
    for b in 0..total {
        let (src, offset, rot) = source(b);
        for k in 0..m {
            let moved = traj.positions[src][(k + offset) % m] * rot;
            worst = worst.max((moved - traj.positions[b][k]).norm());
        }
    }
    Ok(worst)
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn brute_force(params: &SymmetryParams, role: Role, cutoff: i64) -> Vec<i64> {
        let divisor = match role {
            Role::Main => 3,
            Role::Triple => params.n as i64,
        };
        (-cutoff..=cutoff)
            .filter(|m| m % divisor == 0 && (m - params.d).rem_euclid(params.r as i64) == 0)
            .collect()
    }

    #[test]
    fn reference_parameter_sets_are_compatible() {
        assert!(SymmetryParams::new(4, 7, 3, 3, -4).compatibility_check().is_ok());
        assert!(SymmetryParams::new(5, 8, 3, 3, -5).compatibility_check().is_ok());
        assert!(SymmetryParams::new(7, 10, 3, 3, -7).compatibility_check().is_ok());
    }

    #[test]
    fn k1_not_multiple_of_three_is_reported() {
        let c = SymmetryParams::new(4, 7, 3, 4, -4).compatibility_check();
        assert!(c.contains(Violation::K1NotMultipleOfThree));
        assert!(c.contains(Violation::K1NotCongruentToD));
        assert_eq!(c.violations.len(), 2);
    }

    #[test]
    fn n_divisible_by_three_is_reported() {
        let c = SymmetryParams::new(6, 7, 3, 3, -18).compatibility_check();
        assert_eq!(c.violations, vec![Violation::MainNotCoprimeToThree]);
        assert_eq!(c.to_string(), "gcd(N,3) ≠ 1");
    }

    #[test]
    fn r_divisible_by_three_is_reported() {
        let c = SymmetryParams::new(4, 9, 3, 3, 12).compatibility_check();
        assert!(c.contains(Violation::RotationNotCoprimeToThree));
    }

    #[test]
    fn rotation_examples() {
        let v = rotation_apply(0.0, Complex64::new(1.0, 0.0));
        assert_eq!(v, Complex64::new(1.0, 0.0));
        let v = rotation_apply(FRAC_PI_2, Complex64::new(1.0, 0.0));
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-15);

        let start = Complex64::new(0.3, -1.7);
        let mut v = start;
        for _ in 0..7 {
            v = rotation_apply(2.0 * PI * 3.0 / 7.0, v);
        }
        assert!((v - start).norm() < 1e-12);
    }

    #[test]
    fn allowed_frequency_examples() {
        let p = SymmetryParams::new(4, 7, 3, 3, -4);
        assert_eq!(allowed_frequencies(&p, Role::Main, 24).unwrap(), vec![-18, 3, 24]);
        assert_eq!(allowed_frequencies(&p, Role::Triple, 28).unwrap(), vec![-4, 24]);
        let p = SymmetryParams::new(5, 8, 3, 3, -5);
        assert_eq!(allowed_frequencies(&p, Role::Triple, 5).unwrap(), vec![-5]);
    }

    #[test]
    fn cutoff_below_smallest_frequency_is_empty_basis() {
        let p = SymmetryParams::new(4, 7, 3, 3, -4);
        assert_eq!(
            allowed_frequencies(&p, Role::Triple, 3),
            Err(BasisError::EmptyBasis { role: Role::Triple, cutoff: 3 })
        );
        assert!(allowed_frequencies(&p, Role::Main, 2).is_err());
    }

    #[test]
    fn frequencies_match_brute_force_exhaustively() {
        let sets = [
            SymmetryParams::new(4, 7, 3, 3, -4),
            SymmetryParams::new(5, 8, 3, 3, -5),
            SymmetryParams::new(7, 10, 3, 3, -7),
            SymmetryParams::new(8, 11, 3, 3, -8),
        ];
        for p in &sets {
            for role in [Role::Main, Role::Triple] {
                for cutoff in 0..=1000 {
                    let brute = brute_force(p, role, cutoff);
                    match allowed_frequencies(p, role, cutoff) {
                        Ok(v) => assert_eq!(v, brute, "{p} {role} K={cutoff}"),
                        Err(_) => assert!(brute.is_empty()),
                    }
                }
            }
        }
    }

    #[test]
    fn main_set_is_progression_with_step_3r() {
        let p = SymmetryParams::new(4, 7, 3, 3, -4);
        let f = allowed_frequencies(&p, Role::Main, 500).unwrap();
        assert!(f.windows(2).all(|w| w[1] - w[0] == 21));
    }

    #[test]
    fn test_orbit_frequencies_present() {
        for p in [
            SymmetryParams::new(4, 7, 3, 3, -4),
            SymmetryParams::new(5, 8, 3, 3, -5),
            SymmetryParams::new(7, 10, 3, 3, -7),
        ] {
            let k = p.n as i64;
            assert!(allowed_frequencies(&p, Role::Main, k).unwrap().contains(&3));
            assert!(allowed_frequencies(&p, Role::Triple, k).unwrap().contains(&-k));
        }
    }

    use crate::loops::{GeneratorSpectrum, SystemLoop};
    use crate::testorbits::build_test_orbit;
    use crate::testutil::{case_n4, random_system, random_unsymmetric_trajectory};

    #[test]
    fn com_projection_leaves_uncoupled_systems_alone() {
        let p = case_n4();
        let sys = build_test_orbit(&p, 0.23, 0.088).unwrap();
        assert_eq!(com_project(&sys), sys);
        let sys = SystemLoop::new(
            p,
            GeneratorSpectrum::new(Role::Main)
                .with(3, Complex64::new(0.2, 0.1))
                .with(-18, Complex64::new(0.01, 0.0)),
            GeneratorSpectrum::new(Role::Triple).with(-4, Complex64::new(0.05, -0.02)),
        )
        .unwrap();
        assert_eq!(com_project(&sys), sys);
    }

    #[test]
    fn com_projection_solves_coupled_constraint() {
        // m = 24 is the first frequency divisible by 3N = 12 allowed for N=4, r=7
        let p = case_n4();
        let sys = SystemLoop::new(
            p,
            GeneratorSpectrum::new(Role::Main)
                .with(3, Complex64::new(0.23, 0.0))
                .with(24, Complex64::new(0.01, 0.004)),
            GeneratorSpectrum::new(Role::Triple).with(-4, Complex64::new(0.088, 0.0)),
        )
        .unwrap();
        let before: f64 = (0..100)
            .map(|k| (1..=7).map(|b| sys.evaluate(b, k as f64 / 100.0).unwrap()).sum::<Complex64>().norm())
            .fold(0.0, f64::max);
        assert!(before > 1e-3);
        let projected = com_project(&sys);
        let c = projected.main.get(24);
        let b = projected.triple.get(24);
        assert!((c * 4.0 + b * 3.0).norm() < 1e-16);
        for k in 0..100 {
            let t = k as f64 / 100.0;
            let total: Complex64 = (1..=7).map(|b| projected.evaluate(b, t).unwrap()).sum();
            assert!(total.norm() < 1e-14);
        }
    }

    #[test]
    fn com_projection_is_idempotent_and_contracting() {
        let p = case_n4();
        for seed in 0..10 {
            let raw = crate::testutil::random_raw_system(&p, 60, seed);
            let once = com_project(&raw);
            let twice = com_project(&once);
            assert!(once.coefficient_norm() <= raw.coefficient_norm() + 1e-15);
            for (m, c) in &once.main.coefficients {
                assert!((twice.main.get(*m) - c).norm() < 1e-16);
            }
            for (m, c) in &once.triple.coefficients {
                assert!((twice.triple.get(*m) - c).norm() < 1e-16);
            }
        }
    }

    #[test]
    fn test_orbit_is_fixed_by_every_generator() {
        let p = case_n4();
        let traj = build_test_orbit(&p, 0.23, 0.088).unwrap().sample(p.default_grid()).unwrap();
        for g in GroupGenerator::ALL {
            assert!(group_action_residual(&traj, g).unwrap() <= 1e-10, "{g:?}");
        }
    }

    #[test]
    fn random_admissible_loops_are_fixed() {
        for p in [
            case_n4(),
            SymmetryParams::new(5, 8, 3, 3, -5),
            SymmetryParams::new(7, 10, 3, 3, -7),
        ] {
            for seed in 0..5 {
                let traj = random_system(&p, 72, seed).sample(p.default_grid()).unwrap();
                for g in GroupGenerator::ALL {
                    assert!(group_action_residual(&traj, g).unwrap() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn unsymmetric_loop_has_positive_residual() {
        let p = case_n4();
        let traj = random_unsymmetric_trajectory(&p, 168, 1);
        for g in GroupGenerator::ALL {
            assert!(group_action_residual(&traj, g).unwrap() > 1e-3);
        }
    }

    #[test]
    fn residual_rejects_non_invariant_grid() {
        let p = case_n4();
        let traj = random_unsymmetric_trajectory(&p, 100, 1);
        assert_eq!(
            group_action_residual(&traj, GroupGenerator::G1),
            Err(ResidualError::GridNotInvariant { samples: 100, quantum: 84 })
        );
    }

    proptest! {
        #[test]
        fn rotations_compose(t1 in -10.0f64..10.0, t2 in -10.0f64..10.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let v = Complex64::new(x, y);
            let lhs = rotation_apply(t1, rotation_apply(t2, v));
            let rhs = rotation_apply(t1 + t2, v);
            prop_assert!((lhs - rhs).norm() < 1e-12);
            prop_assert!((rotation_apply(t1, v).norm() - v.norm()).abs() < 1e-12);
        }
    }
}
