//! Fixed-point refinement of bound tables.
//!
//! The classical Buchstab operators are swept to convergence first (the
//! β-sieve baseline), then the generalized rules are applied at every grid
//! point for a scan of `t` values, optionally with their parameters searched
//! over the admissible domain. Each sweep reads an immutable snapshot and the
//! merged result becomes the next snapshot, so grid points can be evaluated in
//! parallel without changing the output.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::admissible::{self, AdmissibleError};
use crate::bounds::{self, BoundTable, BoundsError, GridConfig, Side};
use crate::exactcomb::{self, ratio, CombError, ParamVector, Rational, RuleFamily, RuleKind};
use crate::quadrature::{
    self, lead_side, rule_candidate, BuchstabKernel, QuadConfig, QuadError, RuleIntegrals, RuleSpec,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid iteration config: {0}")]
    Config(String),
    #[error("empty admissible search set for {0}")]
    EmptySearch(RuleFamily),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Admissible(#[from] AdmissibleError),
}

pub type Result<T> = std::result::Result<T, DriverError>;

/// `t ∈ {s, s + step, s + 2 step, ...}`, capped at `max_candidates` values and at `s_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TPolicy {
    pub step: f64,
    pub max_candidates: usize,
}

impl Default for TPolicy {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_candidates: 12,
        }
    }
}

impl TPolicy {
    pub fn candidates(&self, s: f64, s_max: f64) -> Vec<f64> {
        (0..self.max_candidates)
            .map(|j| s + j as f64 * self.step)
            .take_while(|&t| t <= s_max + 1e-12)
            .map(|t| t.min(s_max))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Exhaustive over the discrete grid when it is small enough, coordinate
    /// descent over parameter pairs otherwise.
    Grid,
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub strategy: SearchStrategy,
    /// Spacing of candidate values inside each admissible interval.
    pub grid_step: Rational,
    /// Right end of the last admissible interval `[k-1, k]` that is searched.
    pub max_odd_k: i64,
    /// Values tried for `m0` in lower rules.
    pub m0_candidates: Vec<Rational>,
    /// One coordinate-descent pass at half the grid step after the discrete search.
    pub polish: bool,
    /// Largest discrete grid searched exhaustively.
    pub max_grid_evals: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: SearchStrategy::Grid,
            grid_step: ratio(1, 4),
            max_odd_k: 7,
            m0_candidates: vec![ratio(1, 4), ratio(1, 2), ratio(3, 4), ratio(1, 1)],
            polish: true,
            max_grid_evals: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub enum RuleChoice {
    Fixed(RuleSpec),
    Search(RuleFamily),
}

impl RuleChoice {
    pub fn family(&self) -> RuleFamily {
        match self {
            RuleChoice::Fixed(r) => r.family,
            RuleChoice::Search(f) => *f,
        }
    }

    pub fn label(&self) -> String {
        match self {
            RuleChoice::Fixed(r) => format!("{}{}", r.family, r.params),
            RuleChoice::Search(f) => format!("{f}[search]"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationConfig {
    pub max_rounds: usize,
    pub convergence_tol: f64,
    pub seed_f: f64,
    pub t_policy: TPolicy,
    pub rules: Vec<RuleChoice>,
    pub search: SearchConfig,
    /// Also sweep the classical operators in every refinement round.
    pub include_buchstab: bool,
    pub sifting_threshold: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            max_rounds: 200,
            convergence_tol: 1e-6,
            seed_f: 100.0,
            t_policy: TPolicy::default(),
            rules: Vec::new(),
            search: SearchConfig::default(),
            include_buchstab: true,
            sifting_threshold: 1e-6,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds < 1 {
            return Err(DriverError::Config("max_rounds must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(DriverError::Config("convergence_tol must be positive".into()));
        }
        if !(self.t_policy.step > 0.0) || self.t_policy.max_candidates == 0 {
            return Err(DriverError::Config("t policy needs a positive step and at least one candidate".into()));
        }
        if !(self.sifting_threshold > 0.0) {
            return Err(DriverError::Config("sifting threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleCount {
    pub rule: String,
    pub improvements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub kappa: f64,
    pub grid: GridConfig,
    pub quadrature: QuadConfig,
    pub tail_convention: &'static str,
    pub below_grid_convention: &'static str,
}

impl RunMetadata {
    fn new(table: &BoundTable, quad: &QuadConfig) -> Self {
        Self {
            kappa: table.kappa,
            grid: table.grid,
            quadrature: *quad,
            tail_convention: "F = f = 1 for s > s_max (heuristic; increase s_max to check insensitivity)",
            below_grid_convention: "s^kappa F(s) constant and f = 0 for s < s_min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub phase: &'static str,
    pub rounds_used: usize,
    pub converged: bool,
    pub final_max_delta: f64,
    pub round_deltas: Vec<f64>,
    pub rule_improvements: Vec<RuleCount>,
    /// Rule evaluations whose chosen candidate used an `F`-side term cut at `Σx = 1`.
    pub clamped_evaluations: usize,
    pub sifting_threshold: f64,
    /// Smallest grid `s` with `f(s)` above the threshold; `None` if never attained.
    pub sifting_limit: Option<f64>,
    pub metadata: RunMetadata,
}

/// Smallest grid `s` with `f(s) > threshold`.
pub fn sifting_limit(table: &BoundTable, threshold: f64) -> Option<f64> {
    table
        .lower
        .iter()
        .position(|&v| v > threshold)
        .map(|i| table.grid.s_at(i))
}

struct Counter {
    labels: Vec<String>,
    counts: Vec<usize>,
}

impl Counter {
    fn new(labels: Vec<String>) -> Self {
        let counts = vec![0; labels.len()];
        Self { labels, counts }
    }

    fn into_report(self) -> Vec<RuleCount> {
        self.labels
            .into_iter()
            .zip(self.counts)
            .map(|(rule, improvements)| RuleCount { rule, improvements })
            .collect()
    }
}

fn improves(side: Side, candidate: f64, current: f64) -> bool {
    match side {
        Side::Upper => candidate < current,
        Side::Lower => candidate > current,
    }
}

/// One sweep of each classical operator against successive snapshots.
/// Returns the new table and the improvement counts (upper, lower).
fn buchstab_round(table: &BoundTable, quad: &QuadConfig) -> (BoundTable, usize, usize) {
    let grid = table.grid;
    let n = grid.len();

    let kernel = BuchstabKernel::new(table, Side::Lower, quad);
    let upper: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| Some(kernel.candidate(grid.s_at(i))))
        .collect();
    let up_count = count_improvements(table, Side::Upper, &upper);
    let next = table.merge_all(Side::Upper, &upper);

    let kernel = BuchstabKernel::new(&next, Side::Upper, quad);
    let lower: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = grid.s_at(i);
            (s > 1.0).then(|| kernel.candidate(s))
        })
        .collect();
    let low_count = count_improvements(&next, Side::Lower, &lower);
    let next = next.merge_all(Side::Lower, &lower);
    (next, up_count, low_count)
}

fn count_improvements(table: &BoundTable, side: Side, cands: &[Option<f64>]) -> usize {
    cands
        .iter()
        .zip(table.values(side))
        .filter(|(c, &v)| c.is_some_and(|c| improves(side, c, v)))
        .count()
}

/// Sweeps the classical upper and lower operators from a seed table until the
/// largest pointwise change drops below the tolerance.
pub fn run_beta_iteration(
    kappa: f64,
    grid: GridConfig,
    quad: &QuadConfig,
    itcfg: &IterationConfig,
) -> Result<(BoundTable, RunReport)> {
    itcfg.validate()?;
    quad.validate()?;
    let mut table = bounds::make_seed_table(kappa, grid, itcfg.seed_f)?;
    let mut counter = Counter::new(vec!["buchstab_upper".into(), "buchstab_lower".into()]);
    let mut deltas = Vec::new();
    let mut converged = false;
    for _ in 0..itcfg.max_rounds {
        let (next, up, low) = buchstab_round(&table, quad);
        counter.counts[0] += up;
        counter.counts[1] += low;
        let delta = next.max_delta(&table);
        debug_assert!(next.upper.iter().zip(&table.upper).all(|(a, b)| a <= b));
        debug_assert!(next.lower.iter().zip(&table.lower).all(|(a, b)| a >= b));
        table = next;
        deltas.push(delta);
        if delta < itcfg.convergence_tol {
            converged = true;
            break;
        }
    }
    let report = RunReport {
        phase: "beta_iteration",
        rounds_used: deltas.len(),
        converged,
        final_max_delta: deltas.last().copied().unwrap_or(0.0),
        round_deltas: deltas,
        rule_improvements: counter.into_report(),
        clamped_evaluations: 0,
        sifting_threshold: itcfg.sifting_threshold,
        sifting_limit: sifting_limit(&table, itcfg.sifting_threshold),
        metadata: RunMetadata::new(&table, quad),
    };
    Ok((table, report))
}

#[derive(Debug)]
struct Candidate {
    params: ParamVector,
    coeffs: Vec<f64>,
}

/// Parameter search over the admissible domain for one rule family.
///
/// Every candidate is checked with [`admissible::config_admissible`] and
/// [`admissible::certify_sign`] before it is evaluated; coefficient vectors
/// are computed exactly once and cached.
#[derive(Debug)]
pub struct ParamSearch {
    family: RuleFamily,
    cfg: SearchConfig,
    /// Options per slot: `m0` values for lower rules, then parameter pairs.
    slots: Vec<Vec<Vec<Rational>>>,
    /// Exhaustive candidate list when the grid is small enough.
    exhaustive: Option<Vec<Arc<Candidate>>>,
    /// Index of the base configuration within each slot.
    base: Vec<usize>,
    cache: Mutex<HashMap<Vec<Rational>, Option<Arc<Candidate>>>>,
}

fn interval_values(step: &Rational, max_odd_k: i64) -> Vec<Rational> {
    let mut out = Vec::new();
    let one = Rational::one();
    let mut x = step.clone();
    while x <= one {
        out.push(x.clone());
        x += step;
    }
    let mut k = 3;
    while k <= max_odd_k {
        let mut x = exactcomb::int(k - 1);
        let end = exactcomb::int(k);
        while x <= end {
            out.push(x.clone());
            x += step;
        }
        k += 2;
    }
    out
}

impl ParamSearch {
    pub fn new(family: RuleFamily, cfg: &SearchConfig) -> Result<Self> {
        if let RuleFamily::UbK(_) = family {
            return Err(DriverError::Config(format!("{family} has no free parameters")));
        }
        if !(cfg.grid_step > Rational::zero()) {
            return Err(DriverError::Config("grid step must be positive".into()));
        }
        let values = interval_values(&cfg.grid_step, cfg.max_odd_k);
        let mut pairs: Vec<Vec<Rational>> = Vec::new();
        for (i, a) in values.iter().enumerate() {
            for b in &values[i..] {
                if admissible::pair_admissible(a, b)? {
                    pairs.push(vec![a.clone(), b.clone()]);
                }
            }
        }
        let mut slots = Vec::new();
        if family.kind() == RuleKind::Lower {
            let m0: Vec<Vec<Rational>> = cfg
                .m0_candidates
                .iter()
                .filter(|x| **x > Rational::zero() && **x <= Rational::one())
                .map(|x| vec![x.clone()])
                .collect();
            slots.push(m0);
        }
        let n_pairs = if family.kind() == RuleKind::Lower {
            (family.arity() - 1) / 2
        } else {
            family.arity() / 2
        };
        for _ in 0..n_pairs {
            slots.push(pairs.clone());
        }
        if slots.iter().any(|s| s.is_empty()) {
            return Err(DriverError::EmptySearch(family));
        }
        let base_params = family.base_params()?;
        let base_vals = base_params.values();
        let mut base = Vec::new();
        let mut pos = 0;
        for slot in &slots {
            let width = slot[0].len();
            let want = &base_vals[pos..pos + width];
            base.push(slot.iter().position(|o| o.as_slice() == want).unwrap_or(0));
            pos += width;
        }

        let mut search = Self {
            family,
            cfg: cfg.clone(),
            slots,
            exhaustive: None,
            base,
            cache: Mutex::new(HashMap::new()),
        };
        if cfg.strategy == SearchStrategy::Grid {
            let combos = search.combinations();
            if combos.len() <= cfg.max_grid_evals {
                let list: Vec<Arc<Candidate>> = combos
                    .into_par_iter()
                    .map(|idx| search.build(search.assemble(&idx)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect();
                if list.is_empty() {
                    return Err(DriverError::EmptySearch(family));
                }
                search.exhaustive = Some(list);
            }
        }
        Ok(search)
    }

    pub fn family(&self) -> RuleFamily {
        self.family
    }

    /// Number of candidates in the exhaustive list, if one is used.
    pub fn exhaustive_len(&self) -> Option<usize> {
        self.exhaustive.as_ref().map(Vec::len)
    }

    /// Slot index tuples; repeated pair slots are taken in nondecreasing order
    /// since the product does not depend on the pair order.
    fn combinations(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for (si, slot) in self.slots.iter().enumerate() {
            let pair_slot = slot[0].len() == 2;
            let mut next = Vec::new();
            for prefix in &out {
                let start = match prefix.last() {
                    Some(&last) if pair_slot && si > 0 && self.slots[si - 1][0].len() == 2 => last,
                    _ => 0,
                };
                for j in start..slot.len() {
                    let mut p = prefix.clone();
                    p.push(j);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    fn assemble(&self, idx: &[usize]) -> Vec<Rational> {
        idx.iter()
            .zip(&self.slots)
            .flat_map(|(&j, slot)| slot[j].iter().cloned())
            .collect()
    }

    /// Certified candidate, or `None` if the values are not admissible.
    fn build(&self, values: Vec<Rational>) -> Result<Option<Arc<Candidate>>> {
        let Ok(params) = ParamVector::new(self.family.kind(), values) else {
            return Ok(None);
        };
        if !admissible::config_admissible(&params)? {
            return Ok(None);
        }
        if !admissible::certify_sign(&params)?.matches_kind() {
            return Ok(None);
        }
        let coeffs = exactcomb::closed_form_coefficients(self.family, &params)?.to_f64();
        Ok(Some(Arc::new(Candidate { params, coeffs })))
    }

    fn cached(&self, values: Vec<Rational>) -> Result<Option<Arc<Candidate>>> {
        if let Some(hit) = self.cache.lock().expect("search cache poisoned").get(&values) {
            return Ok(hit.clone());
        }
        let built = self.build(values.clone())?;
        self.cache
            .lock()
            .expect("search cache poisoned")
            .insert(values, built.clone());
        Ok(built)
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self.family.kind() {
            RuleKind::Upper => a < b,
            RuleKind::Lower => a > b,
        }
    }

    /// Best parameters and bound value given precomputed integrals.
    pub fn best(&self, ints: &RuleIntegrals, lead: f64, kappa: f64) -> Result<(ParamVector, f64, bool)> {
        let kind = self.family.kind();
        let eval = |c: &Candidate| rule_candidate(kind, &c.coeffs, lead, ints, kappa);

        let mut best: Option<(Arc<Candidate>, f64, bool)> = None;
        let consider = |c: Arc<Candidate>, best: &mut Option<(Arc<Candidate>, f64, bool)>| {
            let (v, clamped) = eval(&c);
            if v.is_nan() {
                return;
            }
            if best.as_ref().is_none_or(|(_, bv, _)| self.better(v, *bv)) {
                *best = Some((c, v, clamped));
            }
        };

        if let Some(list) = &self.exhaustive {
            for c in list {
                consider(c.clone(), &mut best);
            }
        } else {
            // coordinate descent over slots, starting from the base configuration
            let mut idx = self.base.clone();
            if let Some(c) = self.cached(self.assemble(&idx))? {
                consider(c, &mut best);
            }
            for _pass in 0..8 {
                let mut moved = false;
                for si in 0..self.slots.len() {
                    let mut slot_best = idx[si];
                    for j in 0..self.slots[si].len() {
                        let mut trial = idx.clone();
                        trial[si] = j;
                        if let Some(c) = self.cached(self.assemble(&trial))? {
                            let before = best.as_ref().map(|b| b.1);
                            consider(c, &mut best);
                            if best.as_ref().map(|b| b.1) != before {
                                slot_best = j;
                            }
                        }
                    }
                    if slot_best != idx[si] {
                        idx[si] = slot_best;
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
        }

        let Some((mut cand, mut value, mut clamped)) = best else {
            return Err(DriverError::EmptySearch(self.family));
        };

        if self.cfg.polish {
            let half = &self.cfg.grid_step / exactcomb::int(2);
            for i in 0..cand.params.len() {
                for dir in [-1i64, 1] {
                    let mut vals = cand.params.values().to_vec();
                    vals[i] += &half * exactcomb::int(dir);
                    if let Some(c) = self.cached(vals)? {
                        let (v, cl) = eval(&c);
                        if !v.is_nan() && self.better(v, value) {
                            cand = c;
                            value = v;
                            clamped = cl;
                            break;
                        }
                    }
                }
            }
        }
        Ok((cand.params.clone(), value, clamped))
    }
}

/// Admissible parameters optimizing one rule family at `(s, t)`.
pub fn search_params(
    table: &BoundTable,
    s: f64,
    t: f64,
    search: &ParamSearch,
    quad: &QuadConfig,
) -> Result<(ParamVector, f64)> {
    let kind = search.family().kind();
    let floor = quadrature::s_floor(kind);
    if !(s >= floor && s <= t && t <= table.grid.s_max) {
        return Err(QuadError::Domain(format!("need {floor} <= s <= t <= s_max, got s = {s}, t = {t}")).into());
    }
    let ints = RuleIntegrals::compute(table, s, t, search.family().arity(), quad)?;
    let lead = table.eval_unchecked(lead_side(kind), t);
    let (p, v, _) = search.best(&ints, lead, table.kappa)?;
    Ok((p, v))
}

enum PreparedRule {
    Fixed(RuleSpec),
    Search(ParamSearch),
}

impl PreparedRule {
    fn kind(&self) -> RuleKind {
        match self {
            PreparedRule::Fixed(r) => r.kind(),
            PreparedRule::Search(s) => s.family().kind(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            PreparedRule::Fixed(r) => r.depth(),
            PreparedRule::Search(s) => s.family().arity(),
        }
    }

    fn evaluate(&self, ints: &RuleIntegrals, lead: f64, kappa: f64) -> Result<(f64, bool)> {
        match self {
            PreparedRule::Fixed(r) => Ok(rule_candidate(r.kind(), &r.coeffs_f64, lead, ints, kappa)),
            PreparedRule::Search(s) => s.best(ints, lead, kappa).map(|(_, v, c)| (v, c)),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct PointResult {
    upper: Option<(f64, usize)>,
    lower: Option<(f64, usize)>,
    clamped: usize,
}

fn refine_point(
    table: &BoundTable,
    rules: &[PreparedRule],
    s: f64,
    t_policy: &TPolicy,
    quad: &QuadConfig,
) -> Result<PointResult> {
    let mut out = PointResult::default();
    let active: Vec<usize> = (0..rules.len())
        .filter(|&r| s >= quadrature::s_floor(rules[r].kind()))
        .collect();
    let Some(depth) = active.iter().map(|&r| rules[r].depth()).max() else {
        return Ok(out);
    };
    for t in t_policy.candidates(s, table.grid.s_max) {
        let ints = RuleIntegrals::compute(table, s, t, depth, quad)?;
        for &r in &active {
            let kind = rules[r].kind();
            let lead = table.eval_unchecked(lead_side(kind), t);
            let (v, clamped) = rules[r].evaluate(&ints, lead, table.kappa)?;
            if v.is_nan() {
                continue;
            }
            let slot = match kind {
                RuleKind::Upper => &mut out.upper,
                RuleKind::Lower => &mut out.lower,
            };
            let side = lead_side(kind);
            if slot.is_none_or(|(bv, _)| improves(side, v, bv)) {
                *slot = Some((v, r));
                if clamped {
                    out.clamped += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Applies the configured rules at every grid point and scanned `t`, merging
/// the best candidates, until the largest change drops below the tolerance.
/// The table can only tighten.
pub fn refine_with_rules(
    table: &BoundTable,
    itcfg: &IterationConfig,
    quad: &QuadConfig,
) -> Result<(BoundTable, RunReport)> {
    itcfg.validate()?;
    quad.validate()?;
    let rules: Vec<PreparedRule> = itcfg
        .rules
        .iter()
        .map(|c| match c {
            RuleChoice::Fixed(r) => Ok(PreparedRule::Fixed(r.clone())),
            RuleChoice::Search(f) => ParamSearch::new(*f, &itcfg.search).map(PreparedRule::Search),
        })
        .collect::<Result<_>>()?;

    let mut labels: Vec<String> = itcfg.rules.iter().map(RuleChoice::label).collect();
    if itcfg.include_buchstab {
        labels.push("buchstab_upper".into());
        labels.push("buchstab_lower".into());
    }
    let mut counter = Counter::new(labels);
    let n_rules = rules.len();
    let grid = table.grid;
    let mut current = table.clone();
    let mut deltas = Vec::new();
    let mut clamped_total = 0;
    let mut converged = false;

    for _ in 0..itcfg.max_rounds {
        let start = current.clone();
        if itcfg.include_buchstab {
            let (next, up, low) = buchstab_round(&current, quad);
            counter.counts[n_rules] += up;
            counter.counts[n_rules + 1] += low;
            current = next;
        }
        if !rules.is_empty() {
            let snap = &current;
            let results: Vec<PointResult> = (0..grid.len())
                .into_par_iter()
                .map(|i| refine_point(snap, &rules, grid.s_at(i), &itcfg.t_policy, quad))
                .collect::<Result<_>>()?;
            let upper: Vec<Option<f64>> = results.iter().map(|r| r.upper.map(|u| u.0)).collect();
            let lower: Vec<Option<f64>> = results.iter().map(|r| r.lower.map(|u| u.0)).collect();
            for (i, r) in results.iter().enumerate() {
                if let Some((v, which)) = r.upper {
                    if improves(Side::Upper, v, snap.upper[i]) {
                        counter.counts[which] += 1;
                    }
                }
                if let Some((v, which)) = r.lower {
                    if improves(Side::Lower, v, snap.lower[i]) {
                        counter.counts[which] += 1;
                    }
                }
                clamped_total += r.clamped;
            }
            current = current.merge_all(Side::Upper, &upper).merge_all(Side::Lower, &lower);
        }
        let delta = current.max_delta(&start);
        deltas.push(delta);
        if delta < itcfg.convergence_tol {
            converged = true;
            break;
        }
    }

    let report = RunReport {
        phase: "rule_refinement",
        rounds_used: deltas.len(),
        converged,
        final_max_delta: deltas.last().copied().unwrap_or(0.0),
        round_deltas: deltas,
        rule_improvements: counter.into_report(),
        clamped_evaluations: clamped_total,
        sifting_threshold: itcfg.sifting_threshold,
        sifting_limit: sifting_limit(&current, itcfg.sifting_threshold),
        metadata: RunMetadata::new(&current, quad),
    };
    Ok((current, report))
}
