//! Shared fixtures for unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::loops::{GeneratorSpectrum, SystemLoop, Trajectory};
use crate::symmetry::{allowed_frequencies, com_project, Role, SymmetryParams};

pub fn case_n4() -> SymmetryParams {
    SymmetryParams::new(4, 7, 3, 3, -4)
}

pub fn case_n5() -> SymmetryParams {
    SymmetryParams::new(5, 8, 3, 3, -5)
}

pub fn case_n7() -> SymmetryParams {
    SymmetryParams::new(7, 10, 3, 3, -7)
}

/// Circular test orbit plus a small random perturbation on every allowed
/// frequency up to `cutoff`; no center-of-mass projection.
pub fn random_raw_system(params: &SymmetryParams, cutoff: i64, seed: u64) -> SystemLoop {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n as i64;
    let mut draw = |role: Role, base_freq: i64, base: f64| {
        let freqs = allowed_frequencies(params, role, cutoff).unwrap();
        GeneratorSpectrum::from_pairs(
            role,
            freqs.into_iter().map(|m| {
                let noise = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.004;
                let c = if m == base_freq { Complex64::new(base, 0.0) + noise } else { noise };
                (m, c)
            }),
        )
    };
    let main = draw(Role::Main, 3, 0.24);
    let triple = draw(Role::Triple, -n, 0.08);
    SystemLoop::new(*params, main, triple).unwrap()
}

pub fn random_system(params: &SymmetryParams, cutoff: i64, seed: u64) -> SystemLoop {
    com_project(&random_raw_system(params, cutoff, seed))
}

/// Independent random positions for every body; no symmetry at all.
pub fn random_unsymmetric_trajectory(params: &SymmetryParams, samples: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = || -> Vec<Vec<Complex64>> {
        (0..params.total_bodies())
            .map(|_| (0..samples).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect()
    };
    let positions = rows();
    let velocities = rows();
    Trajectory::from_samples(*params, positions, velocities).unwrap()
}
