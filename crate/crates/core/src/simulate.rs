//! Exact counting checks of the sieve inequalities on explicit finite sets.
//!
//! `S(A_d, z)` counts elements `e` of the multiset `A` with `d | e` and `e / d`
//! free of primes below `z`. Every rule is checked as an exact rational
//! inequality between `S(A, z)` and the rule's right-hand side.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::admissible::{self, AdmissibleError};
use crate::exactcomb::{self, CombError, ParamVector, Rational, RuleFamily, RuleKind};

pub const DEFAULT_N_MAX: u64 = 1_000_000;
pub const DEFAULT_TUPLE_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("set is empty")]
    EmptySet,
    #[error("element {element} exceeds the limit {n_max}")]
    ElementTooLarge { element: u64, n_max: u64 },
    #[error("elements must be positive")]
    ZeroElement,
    #[error("divisor must be positive")]
    ZeroDivisor,
    #[error("invalid sifting range: {0}")]
    Range(String),
    #[error("instance too large: {primes} primes in [w, z) give C({primes}, {depth}) = {tuples} tuples, cap {cap}")]
    InstanceTooLarge { primes: usize, depth: usize, tuples: u64, cap: u64 },
    #[error("parameters {params} are not admissible for {family}")]
    Inadmissible { family: RuleFamily, params: String },
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Admissible(#[from] AdmissibleError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// A finite multiset of positive integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimSet {
    elements: Vec<u64>,
    description: String,
}

impl SimSet {
    pub fn new(elements: Vec<u64>, description: impl Into<String>, n_max: u64) -> Result<Self> {
        if elements.is_empty() {
            return Err(SimError::EmptySet);
        }
        if elements.contains(&0) {
            return Err(SimError::ZeroElement);
        }
        if let Some(&element) = elements.iter().find(|&&e| e > n_max) {
            return Err(SimError::ElementTooLarge { element, n_max });
        }
        Ok(Self {
            elements,
            description: description.into(),
        })
    }

    /// `lo, lo + 1, ..., hi`.
    pub fn interval(lo: u64, hi: u64, n_max: u64) -> Result<Self> {
        Self::new((lo..=hi).collect(), format!("interval [{lo}, {hi}]"), n_max)
    }

    /// `start, start + step, ...` with `count` terms.
    pub fn progression(start: u64, step: u64, count: u64, n_max: u64) -> Result<Self> {
        let elements = (0..count).map(|i| start + i * step).collect();
        Self::new(elements, format!("progression {start} + {step}i, {count} terms"), n_max)
    }

    /// `count` distinct elements of `[1, hi]` drawn with a fixed seed.
    pub fn random_subset(hi: u64, count: usize, seed: u64, n_max: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = count.min(hi as usize);
        let mut elements: Vec<u64> = sample(&mut rng, hi as usize, count)
            .into_iter()
            .map(|i| i as u64 + 1)
            .collect();
        elements.sort_unstable();
        Self::new(elements, format!("random {count}-subset of [1, {hi}], seed {seed}"), n_max)
    }

    /// `n^2 + 1` for every `n >= 1` with `n^2 + 1 <= hi`.
    pub fn quadratic(hi: u64, n_max: u64) -> Result<Self> {
        let elements = (1u64..).map(|n| n * n + 1).take_while(|&v| v <= hi).collect();
        Self::new(elements, format!("n^2 + 1 up to {hi}"), n_max)
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Primes `p < n` by the sieve of Eratosthenes.
pub fn primes_below(n: u64) -> Vec<u64> {
    if n < 3 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n];
    let mut out = Vec::new();
    for i in 2..n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j < n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Primes `p` with `lo <= p < hi`.
fn primes_in(lo: f64, hi: f64) -> Vec<u64> {
    let bound = hi.ceil().max(0.0) as u64;
    primes_below(bound)
        .into_iter()
        .filter(|&p| p as f64 >= lo && (p as f64) < hi)
        .collect()
}

/// `S(A_d, z)`: elements `e` with `d | e` and `e / d` coprime to every prime `< z`.
pub fn sieve_count(set: &SimSet, d: u64, z: f64) -> Result<u64> {
    if d == 0 {
        return Err(SimError::ZeroDivisor);
    }
    if !(z >= 2.0) {
        return Err(SimError::Range(format!("need z >= 2, got {z}")));
    }
    let primes = primes_in(2.0, z);
    Ok(set
        .elements
        .iter()
        .filter(|&&e| e % d == 0 && coprime_to_all(e / d, &primes))
        .count() as u64)
}

fn coprime_to_all(a: u64, primes: &[u64]) -> bool {
    primes.iter().all(|&p| a % p != 0)
}

fn check_range(w: f64, z: f64) -> Result<()> {
    if !(w >= 2.0 && w <= z && z.is_finite()) {
        return Err(SimError::Range(format!("need 2 <= w <= z, got w = {w}, z = {z}")));
    }
    Ok(())
}

/// Both sides of `S(A, z) = S(A, w) - Σ_{w <= p < z} S(A_p, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuchstabCheck {
    pub lhs: u64,
    pub rhs: i64,
}

impl BuchstabCheck {
    pub fn holds(&self) -> bool {
        self.lhs as i64 == self.rhs
    }
}

pub fn buchstab_sides(set: &SimSet, w: f64, z: f64) -> Result<BuchstabCheck> {
    check_range(w, z)?;
    let lhs = sieve_count(set, 1, z)?;
    let mut rhs = sieve_count(set, 1, w)? as i64;
    for p in primes_in(w, z) {
        rhs -= sieve_count(set, p, p as f64)? as i64;
    }
    Ok(BuchstabCheck { lhs, rhs })
}

pub fn check_buchstab(set: &SimSet, w: f64, z: f64) -> Result<bool> {
    Ok(buchstab_sides(set, w, z)?.holds())
}

/// One rule checked on one set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub family: RuleFamily,
    #[serde(serialize_with = "serialize_display")]
    pub params: ParamVector,
    pub w: f64,
    pub z: f64,
    pub lhs: u64,
    #[serde(serialize_with = "serialize_display")]
    pub rhs: Rational,
    pub holds: bool,
}

fn serialize_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl fmt::Display for TheoremCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} w={} z={} lhs={} rhs={} {}",
            self.family,
            self.params,
            self.w,
            self.z,
            self.lhs,
            self.rhs,
            if self.holds { "ok" } else { "FAIL" }
        )
    }
}

/// Elements of `A` free of primes below `w`, with their distinct prime
/// divisors in `[w, z)` given as indices into `primes`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub w: f64,
    pub z: f64,
    pub primes: Vec<u64>,
    rough: Vec<(u64, Vec<usize>)>,
}

impl Instance {
    pub fn new(set: &SimSet, w: f64, z: f64) -> Result<Self> {
        check_range(w, z)?;
        let small = primes_in(2.0, w);
        let primes = primes_in(w, z);
        let rough = set
            .elements
            .iter()
            .filter(|&&e| coprime_to_all(e, &small))
            .map(|&e| {
                let divs = primes
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| e % p == 0)
                    .map(|(i, _)| i)
                    .collect();
                (e, divs)
            })
            .collect();
        Ok(Self { w, z, primes, rough })
    }

    /// Number of elements free of primes below `w`.
    pub fn rough_count(&self) -> usize {
        self.rough.len()
    }

    /// `S(A, z)`: rough elements with no prime divisor in `[w, z)`.
    pub fn lhs(&self) -> u64 {
        self.rough.iter().filter(|(_, d)| d.is_empty()).count() as u64
    }

    /// `Σ S(A_{p_1...p_j}, w)` over tuples `w <= p_j < ... < p_1 < z`, for
    /// `j = 0..=depth`, by depth-first search over the tuples. Elements
    /// divisible by the tuple's product are tracked as a shrinking list; since
    /// every tuple prime is at least `w`, `e / d` is free of primes below `w`
    /// exactly when `e` is.
    pub fn tuple_sums(&self, depth: usize, cap: u64) -> Result<Vec<u64>> {
        let tuples = exactcomb::binom(self.primes.len() as u64, depth as u64)
            .to_u64()
            .unwrap_or(u64::MAX);
        if tuples > cap {
            return Err(SimError::InstanceTooLarge {
                primes: self.primes.len(),
                depth,
                tuples,
                cap,
            });
        }
        let mut sums = vec![0u64; depth + 1];
        let all: Vec<usize> = (0..self.rough.len()).collect();
        self.descend(&all, 0, 0, depth, &mut sums);
        Ok(sums)
    }

    fn descend(&self, members: &[usize], next: usize, j: usize, depth: usize, sums: &mut [u64]) {
        sums[j] += members.len() as u64;
        if j == depth {
            return;
        }
        for pi in next..self.primes.len() {
            let p = self.primes[pi];
            let sub: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&m| self.rough[m].0 % p == 0)
                .collect();
            if !sub.is_empty() {
                self.descend(&sub, pi + 1, j + 1, depth, sums);
            }
        }
    }

    fn omega_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.primes.len() + 1];
        for (_, d) in &self.rough {
            counts[d.len()] += 1;
        }
        counts
    }
}

fn checked_coefficients(family: RuleFamily, params: &ParamVector) -> Result<Vec<Rational>> {
    let coeffs = exactcomb::closed_form_coefficients(family, params)?;
    let ok = admissible::config_admissible(params)? && admissible::certify_sign(params)?.matches_kind();
    if !ok {
        return Err(SimError::Inadmissible {
            family,
            params: params.to_string(),
        });
    }
    Ok(coeffs.coeffs().to_vec())
}

/// Compares `S(A, z)` with the rule's right-hand side
/// `Σ_j c_j Σ_{w <= p_j < ... < p_1 < z} S(A_{p_1...p_j}, w)`.
pub fn check_theorem(
    set: &SimSet,
    family: RuleFamily,
    params: &ParamVector,
    w: f64,
    z: f64,
    cap: u64,
) -> Result<TheoremCheck> {
    let inst = Instance::new(set, w, z)?;
    check_instance(&inst, family, params, cap)
}

pub fn check_instance(inst: &Instance, family: RuleFamily, params: &ParamVector, cap: u64) -> Result<TheoremCheck> {
    let coeffs = checked_coefficients(family, params)?;
    let sums = inst.tuple_sums(coeffs.len() - 1, cap)?;
    let rhs = coeffs
        .iter()
        .zip(&sums)
        .fold(Rational::zero(), |acc, (c, &n)| acc + c * Rational::from_integer(BigInt::from(n)));
    let lhs = inst.lhs();
    let lhs_q = Rational::from_integer(BigInt::from(lhs));
    let holds = match family.kind() {
        RuleKind::Upper => lhs_q <= rhs,
        RuleKind::Lower => lhs_q >= rhs,
    };
    Ok(TheoremCheck {
        family,
        params: params.clone(),
        w: inst.w,
        z: inst.z,
        lhs,
        rhs,
        holds,
    })
}

/// Contribution `Σ_r c_r C(n, r)` of one element with `n` prime divisors in `[w, z)`.
pub fn pointwise_witness(n: u64, family: RuleFamily, params: &ParamVector) -> Result<Rational> {
    Ok(exactcomb::closed_form_coefficients(family, params)?.eval_at(n))
}

/// The counting argument replayed on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub rhs_minus_lhs: Rational,
    /// Σ of witnesses over rough elements with at least one prime divisor in `[w, z)`.
    pub witness_sum: Rational,
    /// Σ of witnesses over every rough element; equals the right-hand side.
    pub witness_sum_all: Rational,
    pub rhs: Rational,
}

impl Decomposition {
    pub fn holds(&self) -> bool {
        self.rhs_minus_lhs == self.witness_sum && self.rhs == self.witness_sum_all
    }
}

pub fn decomposition(inst: &Instance, family: RuleFamily, params: &ParamVector, cap: u64) -> Result<Decomposition> {
    let check = check_instance(inst, family, params, cap)?;
    let counts = inst.omega_counts();
    let mut witness_sum = Rational::zero();
    let mut witness_sum_all = Rational::zero();
    for (n, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let v = pointwise_witness(n as u64, family, params)? * Rational::from_integer(BigInt::from(count));
        if n > 0 {
            witness_sum += &v;
        }
        witness_sum_all += v;
    }
    Ok(Decomposition {
        rhs_minus_lhs: &check.rhs - Rational::from_integer(BigInt::from(check.lhs)),
        witness_sum,
        witness_sum_all,
        rhs: check.rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignConfig {
    /// Largest element of any generated set.
    pub n_max: u64,
    pub trials: usize,
    pub seed: u64,
    pub families: Vec<RuleFamily>,
    /// Most primes allowed in `[w, z)`.
    pub max_primes: usize,
    pub max_w: u64,
    pub max_den: i64,
    pub max_odd_k: i64,
    pub tuple_cap: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_max: 100_000,
            trials: 100,
            seed: 0,
            families: vec![
                RuleFamily::UbK(5),
                RuleFamily::Ub2d,
                RuleFamily::Ub4d,
                RuleFamily::Ub6d,
                RuleFamily::Lb3d,
                RuleFamily::Lb5d,
            ],
            max_primes: 12,
            max_w: 60,
            max_den: 16,
            max_odd_k: 9,
            tuple_cap: DEFAULT_TUPLE_CAP,
        }
    }
}

/// Random set for a trial, cycling through the generators.
pub fn trial_set<R: Rng>(trial: usize, n_max: u64, rng: &mut R) -> Result<SimSet> {
    match trial % 4 {
        0 => SimSet::interval(1, n_max, n_max),
        1 => {
            let step = rng.gen_range(1..=12);
            let start = rng.gen_range(1..=step.max(2));
            let count = (n_max - start) / step + 1;
            SimSet::progression(start, step, count, n_max)
        }
        2 => {
            let count = rng.gen_range(1..=n_max as usize);
            SimSet::random_subset(n_max, count, rng.gen(), n_max)
        }
        _ => SimSet::quadratic(n_max.max(2), n_max.max(2)),
    }
}

/// `(w, z)` with `w` in `[2, max_w]` and at most `max_primes` primes in `[w, z)`.
pub fn trial_range<R: Rng>(max_w: u64, max_primes: usize, rng: &mut R) -> (f64, f64) {
    let w = rng.gen_range(2..=max_w.max(2));
    let count = rng.gen_range(0..=max_primes);
    let after: Vec<u64> = primes_below(w * 4 + 200).into_iter().filter(|&p| p >= w).collect();
    // z sits at the (count+1)-th prime at or above w, so [w, z) holds `count` primes
    let z = after[count.min(after.len() - 1)];
    (w as f64, z as f64)
}

/// Random sets, ranges and admissible parameters; one check per trial and family.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<TheoremCheck>> {
    if cfg.trials == 0 || cfg.families.is_empty() {
        return Err(SimError::Config("need at least one trial and one family".into()));
    }
    if cfg.n_max < 2 || cfg.n_max > DEFAULT_N_MAX {
        return Err(SimError::Config(format!("n_max must be in [2, {DEFAULT_N_MAX}]")));
    }
    let per_trial: Vec<Vec<TheoremCheck>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let set = trial_set(trial, cfg.n_max, &mut rng)?;
            let (w, z) = trial_range(cfg.max_w, cfg.max_primes, &mut rng);
            let inst = Instance::new(&set, w, z)?;
            cfg.families
                .iter()
                .map(|&family| {
                    let params = admissible::random_params(family, &mut rng, cfg.max_den, cfg.max_odd_k);
                    check_instance(&inst, family, &params, cfg.tuple_cap)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactcomb::{int, ratio};

    fn upto(n: u64) -> SimSet {
        SimSet::interval(1, n, DEFAULT_N_MAX).unwrap()
    }

    fn pv(kind: RuleKind, v: &[i64]) -> ParamVector {
        ParamVector::new(kind, v.iter().map(|&x| int(x)).collect()).unwrap()
    }

    #[test]
    fn primes() {
        assert_eq!(primes_below(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(primes_below(2).is_empty());
        assert_eq!(primes_in(5.0, 30.0).len(), 8);
        assert_eq!(primes_in(2.0, 2.0), Vec::<u64>::new());
    }

    #[test]
    fn sieve_count_examples() {
        let a = upto(100);
        assert_eq!(sieve_count(&a, 1, 10.0).unwrap(), 22);
        assert_eq!(sieve_count(&a, 1, 2.0).unwrap(), 100);
        assert_eq!(sieve_count(&a, 101, 2.0).unwrap(), 0);
        assert!(matches!(sieve_count(&a, 0, 10.0), Err(SimError::ZeroDivisor)));
        assert!(sieve_count(&a, 1, 1.5).is_err());
    }

    #[test]
    fn multiset_counts_repeats() {
        let a = SimSet::new(vec![11, 11, 4], "repeats", 100).unwrap();
        assert_eq!(sieve_count(&a, 1, 10.0).unwrap(), 2);
        assert!(SimSet::new(vec![], "empty", 100).is_err());
        assert!(SimSet::new(vec![101], "big", 100).is_err());
    }

    #[test]
    fn buchstab_identity() {
        let a = upto(100);
        let c = buchstab_sides(&a, 2.0, 10.0).unwrap();
        assert_eq!((c.lhs, c.rhs), (22, 22));
        assert!(check_buchstab(&a, 7.0, 7.0).unwrap());
        let r = SimSet::random_subset(100_000, 3000, 11, DEFAULT_N_MAX).unwrap();
        for (w, z) in [(2.0, 100.0), (3.5, 17.0), (11.0, 97.0), (50.0, 50.0)] {
            assert!(check_buchstab(&r, w, z).unwrap(), "w = {w}, z = {z}");
        }
    }

    #[test]
    fn theorem_examples() {
        let a = upto(1000);
        let c = check_theorem(&a, RuleFamily::Ub2d, &pv(RuleKind::Upper, &[2, 3]), 5.0, 30.0, DEFAULT_TUPLE_CAP).unwrap();
        assert!(c.holds, "{c}");
        let c = check_theorem(&a, RuleFamily::Lb3d, &pv(RuleKind::Lower, &[1, 2, 3]), 5.0, 30.0, DEFAULT_TUPLE_CAP).unwrap();
        assert!(c.holds, "{c}");
        for fam in [RuleFamily::UbK(3), RuleFamily::Ub4d, RuleFamily::Lb5d] {
            let p = fam.base_params().unwrap();
            let c = check_theorem(&a, fam, &p, 13.0, 13.0, DEFAULT_TUPLE_CAP).unwrap();
            let s_w = sieve_count(&a, 1, 13.0).unwrap();
            assert_eq!(c.lhs, s_w);
            assert_eq!(c.rhs, Rational::from_integer(BigInt::from(s_w)));
            assert!(c.holds);
        }
    }

    #[test]
    fn tuple_sums_match_direct_counts() {
        let a = SimSet::random_subset(5000, 1500, 5, DEFAULT_N_MAX).unwrap();
        let inst = Instance::new(&a, 3.0, 30.0).unwrap();
        let sums = inst.tuple_sums(3, DEFAULT_TUPLE_CAP).unwrap();
        let ps = &inst.primes;
        let mut direct = vec![0u64; 4];
        direct[0] = sieve_count(&a, 1, 3.0).unwrap();
        for i in 0..ps.len() {
            direct[1] += sieve_count(&a, ps[i], 3.0).unwrap();
            for j in 0..i {
                direct[2] += sieve_count(&a, ps[i] * ps[j], 3.0).unwrap();
                for k in 0..j {
                    direct[3] += sieve_count(&a, ps[i] * ps[j] * ps[k], 3.0).unwrap();
                }
            }
        }
        assert_eq!(sums, direct);
        assert_eq!(inst.lhs(), sieve_count(&a, 1, 30.0).unwrap());
    }

    #[test]
    fn tuple_cap_guards_large_instances() {
        let a = upto(1000);
        let inst = Instance::new(&a, 2.0, 200.0).unwrap();
        assert!(matches!(
            inst.tuple_sums(6, DEFAULT_TUPLE_CAP),
            Err(SimError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn inadmissible_params_are_rejected() {
        let a = upto(100);
        let bad = ParamVector::new(RuleKind::Upper, vec![ratio(5, 2), int(4)]).unwrap();
        assert!(matches!(
            check_theorem(&a, RuleFamily::Ub2d, &bad, 2.0, 10.0, DEFAULT_TUPLE_CAP),
            Err(SimError::Inadmissible { .. })
        ));
    }

    #[test]
    fn witness_examples() {
        for fam in RuleFamily::searchable() {
            assert_eq!(pointwise_witness(0, fam, &fam.base_params().unwrap()).unwrap(), int(1));
        }
        assert_eq!(pointwise_witness(2, RuleFamily::Ub2d, &pv(RuleKind::Upper, &[2, 3])).unwrap(), int(0));
        // (1 - 4)(1 - 4/2)(1 - 4/3)
        assert_eq!(pointwise_witness(4, RuleFamily::Lb3d, &pv(RuleKind::Lower, &[1, 2, 3])).unwrap(), int(-1));
    }

    #[test]
    fn witness_equals_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for fam in RuleFamily::searchable().into_iter().chain([RuleFamily::UbK(7)]) {
            for _ in 0..10 {
                let p = admissible::random_params(fam, &mut rng, 12, 9);
                for n in 0..=30 {
                    assert_eq!(
                        pointwise_witness(n, fam, &p).unwrap(),
                        exactcomb::product_at(p.values(), n).unwrap(),
                        "{fam} {p} n = {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn decomposition_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..8 {
            let set = trial_set(trial, 3000, &mut rng).unwrap();
            let (w, z) = trial_range(30, 8, &mut rng);
            let inst = Instance::new(&set, w, z).unwrap();
            for fam in CampaignConfig::default().families {
                let p = admissible::random_params(fam, &mut rng, 8, 7);
                let d = decomposition(&inst, fam, &p, DEFAULT_TUPLE_CAP).unwrap();
                assert!(d.holds(), "{fam} {p} w={w} z={z}: {d:?}");
            }
        }
    }

    #[test]
    fn campaign_is_deterministic_and_holds() {
        let cfg = CampaignConfig {
            n_max: 2000,
            trials: 6,
            seed: 7,
            ..CampaignConfig::default()
        };
        let a = run_campaign(&cfg).unwrap();
        let b = run_campaign(&cfg).unwrap();
        assert_eq!(a.len(), 36);
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.holds));
    }

    #[test]
    fn trial_ranges_respect_prime_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (w, z) = trial_range(60, 12, &mut rng);
            assert!(2.0 <= w && w <= z);
            assert!(primes_in(w, z).len() <= 12);
        }
    }
}
