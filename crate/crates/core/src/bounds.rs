//! Lower bounds for the action on the collision set.
//!
//! A collision between two bodies at one instant propagates, through the
//! symmetry relations, to a lattice of collision times for a family of pairs.
//! Times are kept as exact integers modulo `L = 3 N r` (tick `t` means time
//! `t / L`). Each pairwise two-body action is then bounded below by Gordon's
//! fixed-end estimate on every inter-collision interval, or by the periodic
//! zero-mean estimate for pairs that do not collide.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::symmetry::SymmetryParams;

/// Unordered 1-based body pair stored as `(min, max)`.
pub type Pair = (usize, usize);

fn pair(i: usize, j: usize) -> Pair {
    (i.min(j), i.max(j))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("invalid seed pair ({0}, {1})")]
    InvalidPair(usize, usize),
}

/// Which value of pi the constants are evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiConvention {
    /// `std::f64::consts::PI`.
    #[default]
    Exact,
    /// `3.1415`, the truncation the reference constants were computed with.
    FourDecimals,
}

impl PiConvention {
    pub fn value(self) -> f64 {
        match self {
            PiConvention::Exact => PI,
            PiConvention::FourDecimals => 3.1415,
        }
    }
}

impl fmt::Display for PiConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PiConvention::Exact => f.write_str("exact"),
            PiConvention::FourDecimals => f.write_str("3.1415"),
        }
    }
}

/// Gordon-type estimates `3/2 (2 pi)^(2/3) a^(2/3) T^(1/3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GordonBound {
    pi: f64,
}

impl GordonBound {
    pub fn new(convention: PiConvention) -> Self {
        Self { pi: convention.value() }
    }

    fn value(&self, a: f64, span: f64) -> f64 {
        1.5 * (2.0 * self.pi).powf(2.0 / 3.0) * a.powf(2.0 / 3.0) * span.cbrt()
    }

    /// Fixed-end bound on an interval with `x(t1) = x(t2) = 0`.
    pub fn segment(&self, a: f64, duration: f64) -> Result<f64, BoundsError> {
        positive("strength", a)?;
        positive("duration", duration)?;
        Ok(self.value(a, duration))
    }

    /// Bound for a zero-mean loop of the given period.
    pub fn periodic(&self, a: f64, period: f64) -> Result<f64, BoundsError> {
        positive("strength", a)?;
        positive("period", period)?;
        Ok(self.value(a, period))
    }
}

impl Default for GordonBound {
    fn default() -> Self {
        Self::new(PiConvention::Exact)
    }
}

fn positive(what: &'static str, value: f64) -> Result<(), BoundsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::NonPositive { what, value })
    }
}

/// `int_{t1}^{t2} (1/2 |x'|^2 + a/|x|) >= 3/2 (2 pi)^(2/3) a^(2/3) (t2 - t1)^(1/3)`.
pub fn gordon_segment(a: f64, duration: f64) -> Result<f64, BoundsError> {
    GordonBound::default().segment(a, duration)
}

pub fn gordon_periodic(a: f64, period: f64) -> Result<f64, BoundsError> {
    GordonBound::default().periodic(a, period)
}

/// Collision ticks of one pair, sorted, modulo `modulus`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimeLattice {
    pub modulus: u64,
    pub ticks: Vec<u64>,
}

impl TimeLattice {
    pub fn new(modulus: u64, ticks: impl IntoIterator<Item = u64>) -> Self {
        let set: BTreeSet<u64> = ticks.into_iter().map(|t| t % modulus).collect();
        Self { modulus, ticks: set.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// Cyclic gaps between consecutive ticks, in ticks; they sum to `modulus`.
    pub fn gaps(&self) -> Vec<u64> {
        match self.ticks.len() {
            0 => Vec::new(),
            1 => vec![self.modulus],
            n => (0..n)
                .map(|k| {
                    let next = if k + 1 < n { self.ticks[k + 1] } else { self.ticks[0] + self.modulus };
                    next - self.ticks[k]
                })
                .collect(),
        }
    }

    /// Common step when the ticks are an arithmetic progression mod `modulus`.
    pub fn progression_step(&self) -> Option<u64> {
        let gaps = self.gaps();
        let first = *gaps.first()?;
        gaps.iter().all(|&g| g == first).then_some(first)
    }
}

/// Every pair reachable from a collision of `seed` at time 0, with its lattice.
///
/// A collision `(i, j, t)` implies
/// * `(i, j, t + 1/r)` by the rotation symmetry,
/// * `(s(i), s(j), t - 1/N)` where `s` advances main indices cyclically and
///   fixes the triple (whose loops are `1/N`-periodic),
/// * `(u(i), u(j), t - 1/3)` where `u` advances triple indices cyclically and
///   fixes the main bodies (whose loops are `1/3`-periodic).
pub fn collision_closure(
    params: &SymmetryParams,
    seed: Pair,
) -> Result<BTreeMap<Pair, TimeLattice>, BoundsError> {
    let n = params.n;
    let total = n + 3;
    let (a, b) = seed;
    if a == b || a == 0 || b == 0 || a > total || b > total {
        return Err(BoundsError::InvalidPair(a, b));
    }
    let l = (3 * n * params.r) as u64;
    let rot = l / params.r as u64;
    let main_step = l / n as u64;
    let triple_step = l / 3;
    let advance_main = |i: usize| if i <= n { i % n + 1 } else { i };
    let advance_triple = |i: usize| if i > n { (i - n) % 3 + n + 1 } else { i };

    let start = (pair(a, b), 0u64);
    let mut seen: BTreeSet<(Pair, u64)> = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(((i, j), t)) = queue.pop_front() {
        let next = [
            ((i, j), (t + rot) % l),
            (pair(advance_main(i), advance_main(j)), (t + l - main_step) % l),
            (pair(advance_triple(i), advance_triple(j)), (t + l - triple_step) % l),
        ];
        for state in next {
            if seen.insert(state) {
                queue.push_back(state);
            }
        }
    }
    let mut grouped: BTreeMap<Pair, Vec<u64>> = BTreeMap::new();
    for (p, t) in seen {
        grouped.entry(p).or_default().push(t);
    }
    Ok(grouped.into_iter().map(|(p, ticks)| (p, TimeLattice::new(l, ticks))).collect())
}

/// Kind of pair by the curves its bodies live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    MainMain,
    TripleTriple,
    Cross,
}

impl PairClass {
    pub fn of(params: &SymmetryParams, p: Pair) -> Self {
        match (p.0 <= params.n, p.1 <= params.n) {
            (true, true) => PairClass::MainMain,
            (false, false) => PairClass::TripleTriple,
            _ => PairClass::Cross,
        }
    }

    /// Period of the relative motion `q_i - q_j`.
    pub fn relative_period(self, params: &SymmetryParams) -> f64 {
        match self {
            PairClass::MainMain => 1.0 / 3.0,
            PairClass::TripleTriple => 1.0 / params.n as f64,
            PairClass::Cross => 1.0,
        }
    }
}

/// The collision case a seed pair represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    /// `q_1, q_2`.
    Adjacent,
    /// `q_1, q_{k+2}`.
    Skip { k: usize },
    /// `q_1, q_{N/2+1}` for even `N`.
    Antipodal,
    /// `q_1, q_{N+1}`.
    Cross,
    /// `q_{N+1}, q_{N+2}`.
    Triple,
}

impl CaseKind {
    pub fn classify(params: &SymmetryParams, seed: Pair) -> Self {
        let n = params.n;
        let (i, j) = seed;
        match PairClass::of(params, seed) {
            PairClass::Cross => CaseKind::Cross,
            PairClass::TripleTriple => CaseKind::Triple,
            PairClass::MainMain => {
                // cyclic index distance on the main ring
                let gap = (j - i).min(n - (j - i));
                if gap == 1 {
                    CaseKind::Adjacent
                } else if n % 2 == 0 && gap == n / 2 {
                    CaseKind::Antipodal
                } else {
                    CaseKind::Skip { k: gap - 1 }
                }
            }
        }
    }

    pub fn label(self, params: &SymmetryParams) -> String {
        match self {
            CaseKind::Adjacent => "1".into(),
            CaseKind::Skip { k } if params.n % 2 == 0 => format!("2(k={k})"),
            CaseKind::Skip { k } => format!("2′(k={k})"),
            CaseKind::Antipodal => "3".into(),
            CaseKind::Cross => "4".into(),
            CaseKind::Triple => "5".into(),
        }
    }

    /// Name of the constant the case produces.
    pub fn constant(self) -> &'static str {
        match self {
            CaseKind::Adjacent | CaseKind::Skip { .. } => "A",
            CaseKind::Antipodal => "B",
            CaseKind::Cross => "C",
            CaseKind::Triple => "D",
        }
    }
}

/// Lower bound of the action on the collision set of one case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseBound {
    pub label: String,
    pub constant: &'static str,
    pub pair: Pair,
    /// `[i, j, lattice size]` for every colliding pair.
    #[serde(serialize_with = "serialize_sizes")]
    pub lattice_sizes: Vec<(Pair, usize)>,
    pub bound: f64,
}

fn serialize_sizes<S: Serializer>(sizes: &[(Pair, usize)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(sizes.iter().map(|((i, j), n)| [*i, *j, *n]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// `Ã = inf{A, C, D}`.
    Odd,
    /// `B̃ = inf{A, B, C, D}`.
    Even,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Parity::Odd => "N odd: Ã = inf{A, C, D}",
            Parity::Even => "N even: B̃ = inf{A, B, C, D}",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Parity::Odd => "Ã",
            Parity::Even => "B̃",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub cases: Vec<CaseBound>,
    pub threshold: f64,
    pub parity: Parity,
    pub pi: PiConvention,
}

/// Case bounds evaluated with a fixed pi convention.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundEngine {
    pub pi: PiConvention,
    gordon: GordonBound,
}

impl BoundEngine {
    pub fn new(pi: PiConvention) -> Self {
        Self { pi, gordon: GordonBound::new(pi) }
    }

    pub fn gordon(&self) -> GordonBound {
        self.gordon
    }

    /// `sum` of fixed-end bounds over the gaps of `lattice`.
    pub fn lattice_bound(&self, a: f64, lattice: &TimeLattice) -> f64 {
        let l = lattice.modulus as f64;
        lattice
            .gaps()
            .iter()
            .map(|&g| self.gordon.value(a, g as f64 / l))
            .sum()
    }

    pub fn case_lower_bound(&self, params: &SymmetryParams, seed: Pair) -> Result<CaseBound, BoundsError> {
        let seed = pair(seed.0, seed.1);
        let closure = collision_closure(params, seed)?;
        let total = params.total_bodies();
        let a = total as f64;
        let mut sum = 0.0;
        for i in 1..=total {
            for j in i + 1..=total {
                sum += match closure.get(&(i, j)) {
                    Some(lattice) => self.lattice_bound(a, lattice),
                    None => {
                        let p = PairClass::of(params, (i, j)).relative_period(params);
                        self.gordon.periodic(a, p)? / p
                    }
                };
            }
        }
        let kind = CaseKind::classify(params, seed);
        Ok(CaseBound {
            label: kind.label(params),
            constant: kind.constant(),
            pair: seed,
            lattice_sizes: closure.iter().map(|(p, l)| (*p, l.len())).collect(),
            bound: sum / a,
        })
    }

    pub fn collision_threshold(&self, params: &SymmetryParams) -> Result<ThresholdReport, BoundsError> {
        let cases = representative_seeds(params)
            .into_iter()
            .map(|seed| self.case_lower_bound(params, seed))
            .collect::<Result<Vec<_>, _>>()?;
        let threshold = cases.iter().map(|c| c.bound).fold(f64::INFINITY, f64::min);
        Ok(ThresholdReport { cases, threshold, parity: Parity::of(params.n), pi: self.pi })
    }
}

/// `(1,2)`, `(1,k+2)` for `k = 1..ceil(N/2)-2`, `(1,N/2+1)` for even `N`,
/// `(1,N+1)` and `(N+1,N+2)`.
pub fn representative_seeds(params: &SymmetryParams) -> Vec<Pair> {
    let n = params.n;
    let mut seeds = vec![(1, 2)];
    for k in 1..=n.div_ceil(2).saturating_sub(2) {
        seeds.push((1, k + 2));
    }
    if n % 2 == 0 {
        seeds.push((1, n / 2 + 1));
    }
    seeds.push((1, n + 1));
    seeds.push((n + 1, n + 2));
    seeds
}

pub fn case_lower_bound(params: &SymmetryParams, seed: Pair) -> Result<CaseBound, BoundsError> {
    BoundEngine::default().case_lower_bound(params, seed)
}

pub fn collision_threshold(params: &SymmetryParams) -> Result<ThresholdReport, BoundsError> {
    BoundEngine::default().collision_threshold(params)
}

/// Outcome of one exhaustive distinctness scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LemmaStatus {
    Pass,
    Fail { witness: String },
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaOutcome {
    pub name: &'static str,
    pub statement: &'static str,
    pub status: LemmaStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub n: usize,
    pub r: usize,
    pub outcomes: Vec<LemmaOutcome>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        !self.outcomes.iter().any(|o| matches!(o.status, LemmaStatus::Fail { .. }))
    }

    pub fn first_failure(&self) -> Option<&LemmaOutcome> {
        self.outcomes.iter().find(|o| matches!(o.status, LemmaStatus::Fail { .. }))
    }
}

/// Scans `(index tuple, residue)` pairs for two distinct tuples sharing a residue.
fn first_coincidence<const K: usize>(
    values: impl Iterator<Item = ([u64; K], u64)>,
) -> Option<([u64; K], [u64; K])> {
    let mut seen: HashMap<u64, [u64; K]> = HashMap::new();
    for (tuple, residue) in values {
        if let Some(prev) = seen.get(&residue) {
            return Some((*prev, tuple));
        }
        seen.insert(residue, tuple);
    }
    None
}

fn status_from<const K: usize>(hit: Option<([u64; K], [u64; K])>, names: &str) -> LemmaStatus {
    match hit {
        None => LemmaStatus::Pass,
        Some((a, b)) => LemmaStatus::Fail { witness: format!("{names} = {a:?} and {b:?} give the same time") },
    }
}

/// Exhaustive integer check of the time-distinctness lemmas used to assemble
/// the collision lattices. Works on raw `(N, r)` so inadmissible values can be
/// probed.
pub fn verify_time_lemmas(n: usize, r: usize) -> LemmaReport {
    let (nn, rr) = (n as u64, r as u64);
    let mut outcomes = Vec::new();

    // i/r != j/r + k/3, compared as 3i vs 3j + k r modulo 3r
    let modulus = 3 * rr;
    let mut witness = None;
    'scan: for i in 0..rr {
        for j in 0..rr {
            for k in 0..3 {
                if i == j && k == 0 {
                    continue;
                }
                if (3 * i) % modulus == (3 * j + k * rr) % modulus {
                    witness = Some(format!("(i, j, k) = ({i}, {j}, {k}): {i}/{r} = {j}/{r} + {k}/3 (mod 1)"));
                    break 'scan;
                }
            }
        }
    }
    outcomes.push(LemmaOutcome {
        name: "rotation-vs-triple",
        statement: "i/r ≠ j/r + k/3 (mod 1)",
        status: witness.map_or(LemmaStatus::Pass, |w| LemmaStatus::Fail { witness: w }),
    });

    // i/(3r) + j/N over modulus 3rN
    let modulus = 3 * rr * nn;
    let values = (0..3 * rr)
        .flat_map(|i| (1..nn).map(move |j| ([i, j], (i * nn + j * 3 * rr) % modulus)));
    outcomes.push(LemmaOutcome {
        name: "main-triple-grid",
        statement: "i/(3r) + j/N pairwise distinct (mod 1)",
        status: status_from(first_coincidence(values), "(i, j)"),
    });

    // i/r + j/N + k/3 over modulus 3rN
    let values = (0..rr).flat_map(|i| {
        (1..nn).flat_map(move |j| (0..3).map(move |k| ([i, j, k], (3 * nn * i + 3 * rr * j + rr * nn * k) % modulus)))
    });
    outcomes.push(LemmaOutcome {
        name: "mixed-shift",
        statement: "i/r + j/N + k/3 pairwise distinct (mod 1)",
        status: status_from(first_coincidence(values), "(i, j, k)"),
    });

    if n % 2 == 0 {
        // i/r + j/6 over modulus 6r
        let modulus = 6 * rr;
        let values = (0..rr).flat_map(|i| (0..6).map(move |j| ([i, j], (6 * i + rr * j) % modulus)));
        outcomes.push(LemmaOutcome {
            name: "rotation-sixths",
            statement: "i/r + j/6 pairwise distinct (mod 1)",
            status: status_from(first_coincidence(values), "(i, j)"),
        });
        // i/(6r) + j/N over modulus 6rN
        let modulus = 6 * rr * nn;
        let values = (0..6 * rr)
            .flat_map(|i| (1..nn / 2).map(move |j| ([i, j], (i * nn + 6 * rr * j) % modulus)));
        outcomes.push(LemmaOutcome {
            name: "antipodal-grid",
            statement: "i/(6r) + j/N pairwise distinct (mod 1)",
            status: status_from(first_coincidence(values), "(i, j)"),
        });
    } else {
        for (name, statement) in [
            ("rotation-sixths", "i/r + j/6 pairwise distinct (mod 1)"),
            ("antipodal-grid", "i/(6r) + j/N pairwise distinct (mod 1)"),
        ] {
            outcomes.push(LemmaOutcome {
                name,
                statement,
                status: LemmaStatus::NotApplicable { reason: "only used when N is even".into() },
            });
        }
    }
    LemmaReport { n, r, outcomes }
}
