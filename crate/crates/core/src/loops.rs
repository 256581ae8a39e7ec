//! Concrete loops: generator spectra, the reconstructed `N+3`-body system,
//! uniform sampling, winding numbers and separation diagnostics.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::symmetry::{is_allowed, unit, Role, SymmetryParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopError {
    #[error("frequency {m} is not admissible for the {role} generator")]
    InadmissibleFrequency { role: Role, m: i64 },
    #[error("spectrum role {found} supplied where {expected} was expected")]
    RoleMismatch { expected: Role, found: Role },
    #[error("body index {index} out of range 1..={total}")]
    BodyOutOfRange { index: usize, total: usize },
    #[error("grid size {m} is not a positive multiple of lcm(3, N, r) = {quantum}")]
    InvalidGrid { m: usize, quantum: usize },
    #[error("trajectory shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindingError {
    #[error("base point lies on the curve (sample {index})")]
    OnCurve { index: usize },
    #[error("undersampled: angular step {step:.3} rad at sample {index} is not below pi")]
    Undersampled { index: usize, step: f64 },
    #[error("curve has fewer than two samples")]
    TooShort,
}

/// Truncated spectrum of one generating body.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpectrum {
    pub role: Role,
    pub coefficients: BTreeMap<i64, Complex64>,
}

impl GeneratorSpectrum {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn from_pairs(role: Role, pairs: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        Self {
            role,
            coefficients: pairs.into_iter().collect(),
        }
    }

    pub fn with(mut self, m: i64, c: Complex64) -> Self {
        self.coefficients.insert(m, c);
        self
    }

    pub fn get(&self, m: i64) -> Complex64 {
        self.coefficients.get(&m).copied().unwrap_or_default()
    }

    /// Largest `|m|` carried, 0 for an empty spectrum.
    pub fn cutoff(&self) -> i64 {
        self.coefficients.keys().map(|m| m.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.values().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    /// `sum_m c_m e(m t)`.
    pub fn position(&self, t: f64) -> Complex64 {
        self.coefficients
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, (&m, &c)| acc + c * unit(m as f64 * t))
    }

    /// Term-wise derivative: frequency `m` contributes `2 pi i m c_m e(m t)`.
    pub fn velocity(&self, t: f64) -> Complex64 {
        self.coefficients.iter().fold(Complex64::new(0.0, 0.0), |acc, (&m, &c)| {
            acc + c * Complex64::new(0.0, TAU * m as f64) * unit(m as f64 * t)
        })
    }

    pub fn acceleration(&self, t: f64) -> Complex64 {
        self.coefficients.iter().fold(Complex64::new(0.0, 0.0), |acc, (&m, &c)| {
            let w = TAU * m as f64;
            acc - c * (w * w) * unit(m as f64 * t)
        })
    }

    /// `int_0^1 |q'|^2 dt = sum (2 pi m)^2 |c_m|^2`.
    pub fn speed_square_integral(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|(&m, c)| (TAU * m as f64).powi(2) * c.norm_sqr())
            .sum()
    }

    /// `int_0^1 |q|^2 dt = sum |c_m|^2`.
    pub fn square_integral(&self) -> f64 {
        self.coefficients.values().map(|c| c.norm_sqr()).sum()
    }
}

/// Two generator spectra; all `N+3` bodies are time shifts of them:
/// `q_i(t) = q_1(t + (i-1)/N)` and `q_{N+j}(t) = q_{N+1}(t + (j-1)/3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemLoop {
    pub params: SymmetryParams,
    pub main: GeneratorSpectrum,
    pub triple: GeneratorSpectrum,
}

impl SystemLoop {
    /// Validates that every frequency belongs to the admissible set of its role.
    pub fn new(
        params: SymmetryParams,
        main: GeneratorSpectrum,
        triple: GeneratorSpectrum,
    ) -> Result<Self, LoopError> {
        for (expected, spec) in [(Role::Main, &main), (Role::Triple, &triple)] {
            if spec.role != expected {
                return Err(LoopError::RoleMismatch { expected, found: spec.role });
            }
            for &m in spec.coefficients.keys() {
                if !is_allowed(&params, expected, m) {
                    return Err(LoopError::InadmissibleFrequency { role: expected, m });
                }
            }
        }
        Ok(Self { params, main, triple })
    }

    pub fn generator(&self, role: Role) -> &GeneratorSpectrum {
        match role {
            Role::Main => &self.main,
            Role::Triple => &self.triple,
        }
    }

    pub fn total_bodies(&self) -> usize {
        self.params.total_bodies()
    }

    /// Generator and time shift of a 1-based body index.
    pub fn body_source(&self, body: usize) -> Result<(Role, f64), LoopError> {
        let n = self.params.n;
        match body {
            b if (1..=n).contains(&b) => Ok((Role::Main, (b - 1) as f64 / n as f64)),
            b if (n + 1..=n + 3).contains(&b) => Ok((Role::Triple, (b - n - 1) as f64 / 3.0)),
            _ => Err(LoopError::BodyOutOfRange { index: body, total: n + 3 }),
        }
    }

    /// Position of body `body` (1-based) at time `t`.
    pub fn evaluate(&self, body: usize, t: f64) -> Result<Complex64, LoopError> {
        let (role, shift) = self.body_source(body)?;
        Ok(self.generator(role).position(t + shift))
    }

    pub fn velocity(&self, body: usize, t: f64) -> Result<Complex64, LoopError> {
        let (role, shift) = self.body_source(body)?;
        Ok(self.generator(role).velocity(t + shift))
    }

    pub fn acceleration(&self, body: usize, t: f64) -> Result<Complex64, LoopError> {
        let (role, shift) = self.body_source(body)?;
        Ok(self.generator(role).acceleration(t + shift))
    }

    /// Samples positions and velocities at `t_k = k / m`.
    pub fn sample(&self, m: usize) -> Result<Trajectory, LoopError> {
        let quantum = self.params.sample_quantum();
        if m == 0 || m % quantum != 0 {
            return Err(LoopError::InvalidGrid { m, quantum });
        }
        let bodies = self.total_bodies();
        let mut positions = Vec::with_capacity(bodies);
        let mut velocities = Vec::with_capacity(bodies);
        for body in 1..=bodies {
            let (role, shift) = self.body_source(body)?;
            let spec = self.generator(role);
            let (p, v): (Vec<_>, Vec<_>) = (0..m)
                .map(|k| {
                    let t = k as f64 / m as f64 + shift;
                    (spec.position(t), spec.velocity(t))
                })
                .unzip();
            positions.push(p);
            velocities.push(v);
        }
        Ok(Trajectory { params: self.params, positions, velocities })
    }

    /// Every coefficient multiplied by `factor` (global rotation/scaling).
    pub fn scaled(&self, factor: Complex64) -> Self {
        let scale = |s: &GeneratorSpectrum| GeneratorSpectrum {
            role: s.role,
            coefficients: s.coefficients.iter().map(|(&m, &c)| (m, c * factor)).collect(),
        };
        Self { params: self.params, main: scale(&self.main), triple: scale(&self.triple) }
    }

    /// Time shift by `tau`: `c_m -> c_m e(m tau)`.
    pub fn time_shifted(&self, tau: f64) -> Self {
        let shift = |s: &GeneratorSpectrum| GeneratorSpectrum {
            role: s.role,
            coefficients: s
                .coefficients
                .iter()
                .map(|(&m, &c)| (m, c * unit(m as f64 * tau)))
                .collect(),
        };
        Self { params: self.params, main: shift(&self.main), triple: shift(&self.triple) }
    }

    /// Euclidean norm of the full coefficient vector.
    pub fn coefficient_norm(&self) -> f64 {
        self.main
            .coefficients
            .values()
            .chain(self.triple.coefficients.values())
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Uniform samples of every body on `[0, 1)`. Body index is 0-based here:
/// row `b` holds body `b + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: SymmetryParams,
    pub positions: Vec<Vec<Complex64>>,
    pub velocities: Vec<Vec<Complex64>>,
}

impl Trajectory {
    /// Raw constructor for externally produced samples.
    pub fn from_samples(
        params: SymmetryParams,
        positions: Vec<Vec<Complex64>>,
        velocities: Vec<Vec<Complex64>>,
    ) -> Result<Self, LoopError> {
        if positions.len() != params.total_bodies() || velocities.len() != positions.len() {
            return Err(LoopError::Shape(format!(
                "expected {} bodies, got {} positions / {} velocities",
                params.total_bodies(),
                positions.len(),
                velocities.len()
            )));
        }
        let m = positions.first().map_or(0, Vec::len);
        if m == 0 || positions.iter().chain(&velocities).any(|row| row.len() != m) {
            return Err(LoopError::Shape("rows must share one positive length".into()));
        }
        Ok(Self { params, positions, velocities })
    }

    pub fn samples(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn bodies(&self) -> usize {
        self.positions.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.samples() as f64
    }

    /// Relative curve `q_i - q_j` (0-based bodies).
    pub fn relative(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.positions[i].iter().zip(&self.positions[j]).map(|(a, b)| a - b).collect()
    }

    /// `max_k |sum_i q_i(t_k)|`.
    pub fn center_of_mass_drift(&self) -> f64 {
        (0..self.samples())
            .map(|k| self.positions.iter().map(|row| row[k]).sum::<Complex64>().norm())
            .fold(0.0, f64::max)
    }

    /// CSV `t,body,x,y,vx,vy`, row-major by time then body, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,body,x,y,vx,vy\n");
        for k in 0..self.samples() {
            let t = self.time(k);
            for b in 0..self.bodies() {
                let p = self.positions[b][k];
                let v = self.velocities[b][k];
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    sci17(t),
                    b + 1,
                    sci17(p.re),
                    sci17(p.im),
                    sci17(v.re),
                    sci17(v.im)
                ));
            }
        }
        out
    }
}

/// Seventeen significant digits in scientific notation.
pub fn sci17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Signed number of turns of the closed polyline `curve` around `p`;
/// counterclockwise is positive.
pub fn winding_number(curve: &[Complex64], p: Complex64) -> Result<i64, WindingError> {
    if curve.len() < 2 {
        return Err(WindingError::TooShort);
    }
    let scale = curve.iter().map(|z| (z - p).norm()).fold(0.0, f64::max);
    let mut total = 0.0;
    for k in 0..curve.len() {
        let a = curve[k] - p;
        if a.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(WindingError::OnCurve { index: k });
        }
        let b = curve[(k + 1) % curve.len()] - p;
        let step = (b * a.conj()).arg();
        if step.abs() >= PI - 1e-12 {
            return Err(WindingError::Undersampled { index: k, step });
        }
        total += step;
    }
    Ok((total / TAU).round() as i64)
}

/// Closest approach over all unordered pairs and sample times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    /// 1-based body pair, `i < j`.
    pub pair: (usize, usize),
    pub index: usize,
    pub distance: f64,
}

/// Global minimum pair distance; ties keep the lexicographically first `(i, j, k)`.
pub fn min_separation(traj: &Trajectory) -> Separation {
    let mut best = Separation { pair: (1, 2), index: 0, distance: f64::INFINITY };
    let bodies = traj.bodies();
    for i in 0..bodies {
        for j in i + 1..bodies {
            for (k, (a, b)) in traj.positions[i].iter().zip(&traj.positions[j]).enumerate() {
                let d = (a - b).norm();
                if d < best.distance {
                    best = Separation { pair: (i + 1, j + 1), index: k, distance: d };
                }
            }
        }
    }
    best
}

/// Diagnostics from the Poincaré–Wirtinger and Sobolev inequalities for
/// zero-mean periodic loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityWitness {
    pub speed_square: f64,
    pub wirtinger_floor: f64,
    pub sup_norm: f64,
    pub sobolev_ceiling: f64,
}

impl CoercivityWitness {
    pub fn holds(&self) -> bool {
        self.speed_square >= self.wirtinger_floor * (1.0 - 1e-12)
            && self.sup_norm <= self.sobolev_ceiling * (1.0 + 1e-12)
    }
}

/// Checks `int |q'|^2 >= (2 pi)^2 int |q|^2` and
/// `max |q| <= sqrt(1/12) (int |q'|^2)^(1/2)` for one generator, whose shifted
/// copies share both integrals. `sup_norm` is taken over `samples` nodes.
pub fn coercivity_witness(spec: &GeneratorSpectrum, samples: usize) -> CoercivityWitness {
    let speed_square = spec.speed_square_integral();
    let sup_norm = (0..samples)
        .map(|k| spec.position(k as f64 / samples as f64).norm())
        .fold(0.0, f64::max);
    CoercivityWitness {
        speed_square,
        wirtinger_floor: TAU * TAU * spec.square_integral(),
        sup_norm,
        sobolev_ceiling: (speed_square / 12.0).sqrt(),
    }
}

/// Winding of `q_i - q_j` around the origin for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingEntry {
    pub pair: (usize, usize),
    pub expected: i64,
    pub measured: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Windings of every main pair (expected `k1`) and every triple pair (expected `k2`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingTable {
    pub entries: Vec<WindingEntry>,
}

impl WindingTable {
    pub fn of(traj: &Trajectory) -> Self {
        Self::from_positions(&traj.params, &traj.positions)
    }

    /// `positions[b]` is 0-based body `b`.
    pub fn from_positions(params: &SymmetryParams, positions: &[Vec<Complex64>]) -> Self {
        let n = params.n;
        let mut entries = Vec::new();
        let mut push = |i: usize, j: usize, expected: i64| {
            let rel: Vec<Complex64> =
                positions[i].iter().zip(&positions[j]).map(|(a, b)| a - b).collect();
            let (measured, error) = match winding_number(&rel, Complex64::default()) {
                Ok(w) => (Some(w), None),
                Err(e) => (None, Some(e.to_string())),
            };
            entries.push(WindingEntry { pair: (i + 1, j + 1), expected, measured, error });
        };
        for i in 0..n {
            for j in i + 1..n {
                push(i, j, params.k1);
            }
        }
        for i in n..n + 3 {
            for j in i + 1..n + 3 {
                push(i, j, params.k2);
            }
        }
        Self { entries }
    }

    pub fn all_match(&self) -> bool {
        self.entries.iter().all(|e| e.measured == Some(e.expected))
    }

    /// Measured values only, in entry order.
    pub fn measured(&self) -> Vec<Option<i64>> {
        self.entries.iter().map(|e| e.measured).collect()
    }

    /// `(k1, k2)` when every main pair and every triple pair agrees.
    pub fn summary(&self, params: &SymmetryParams) -> Option<(i64, i64)> {
        let n = params.n;
        let main = n * (n - 1) / 2;
        let uniform = |es: &[WindingEntry]| -> Option<i64> {
            let first = es.first()?.measured?;
            es.iter().all(|e| e.measured == Some(first)).then_some(first)
        };
        Some((uniform(&self.entries[..main])?, uniform(&self.entries[main..])?))
    }
}
