//! Numerical operators on bound tables.
//!
//! Two kinds of integrals appear:
//!
//! * the classical one-dimensional operators
//!   `s^κ F(s) <= s^κ - κ ∫_{t>s} t^{κ-1} (f(t-1) - 1) dt` and its mirror for `f`;
//! * the `j`-fold integrals over the ordered region
//!   `1/t <= x_j < ... < x_1 <= 1/s` of `t^κ Φ(t(1 - Σx)) / Π x_i`, which make up
//!   the generalized iteration rules.
//!
//! For the second kind the integrand depends on the `x_i` only through `Σx` and
//! the weight `Π dx_i/x_i`, so the ordered integral is `1/j!` times the integral
//! over the cube `[1/t, 1/s]^j`. The cube integral is computed as a chain of
//! one-dimensional convolutions `ψ_d(σ) = ∫ ψ_{d-1}(σ + x) dx/x`, each tabulated
//! on a σ-grid and read back by linear interpolation. One chain of depth `D`
//! yields every depth `1..=D` at once.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissible::{self, AdmissibleError, Verdict};
use crate::bounds::{BoundTable, Side};
use crate::exactcomb::{self, CoeffVector, CombError, ParamVector, RuleFamily, RuleKind};

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("operator domain: {0}")]
    Domain(String),
    #[error("inadmissible rule {family} {params}: sign certificate says {verdict:?}")]
    Inadmissible {
        family: RuleFamily,
        params: String,
        verdict: Verdict,
    },
    #[error("invalid quadrature config: {0}")]
    Config(String),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Admissible(#[from] AdmissibleError),
}

pub type Result<T> = std::result::Result<T, QuadError>;

/// Largest depth of any supported rule.
pub const MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss-Legendre panels per unit length of the log variable.
    pub panels_per_unit: usize,
    /// Nodes per panel.
    pub nodes_per_panel: usize,
    /// σ-grid cells per width `1/s` for the convolution chain.
    pub sigma_cells: usize,
    /// Integrand arguments `t(1 - Σx)` at or below this value contribute 0.
    pub argument_floor: f64,
    /// `F`-side integrands are cut off where `Σx >= 1 - singular_margin`.
    pub singular_margin: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            panels_per_unit: 32,
            nodes_per_panel: 4,
            sigma_cells: 128,
            argument_floor: 0.0,
            singular_margin: 1e-9,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.panels_per_unit < 4 {
            return Err(QuadError::Config("panels_per_unit must be at least 4".into()));
        }
        if !(1..=GL_MAX_NODES).contains(&self.nodes_per_panel) {
            return Err(QuadError::Config(format!(
                "nodes_per_panel must be in 1..={GL_MAX_NODES}"
            )));
        }
        if self.sigma_cells < 2 {
            return Err(QuadError::Config("sigma_cells must be at least 2".into()));
        }
        if !(self.argument_floor >= 0.0) {
            return Err(QuadError::Config("argument_floor must be nonnegative".into()));
        }
        if !(self.singular_margin > 0.0 && self.singular_margin < 1.0) {
            return Err(QuadError::Config("singular_margin must be in (0, 1)".into()));
        }
        Ok(())
    }
}

const GL_MAX_NODES: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, from Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn gl_table(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static TABLES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    &TABLES.get_or_init(|| (0..=GL_MAX_NODES).map(|k| if k == 0 { (vec![], vec![]) } else { gauss_legendre(k) }).collect())[n]
}

/// Composite Gauss-Legendre nodes on `[a, b]` as `(node, weight)` pairs.
fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gl_table(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in xs.iter().zip(ws) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

fn panels_for(len: f64, quad: &QuadConfig) -> usize {
    ((quad.panels_per_unit as f64 * len).ceil() as usize).max(1)
}

/// Ordered-region integrals `∫ g(Σx) Π dx_i/x_i` over
/// `1/t <= x_d < ... < x_1 <= 1/s`, for every depth `d = 1..=depth`.
///
/// Entry `d - 1` of the result is the depth-`d` integral.
pub fn ordered_integrals<G>(depth: usize, s: f64, t: f64, g: G, quad: &QuadConfig) -> Result<Vec<f64>>
where
    G: Fn(f64) -> f64,
{
    if !(s > 0.0 && s <= t && t.is_finite()) {
        return Err(QuadError::Domain(format!("need 0 < s <= t, got s = {s}, t = {t}")));
    }
    if depth == 0 {
        return Ok(Vec::new());
    }
    if s == t {
        return Ok(vec![0.0; depth]);
    }
    let (lo, hi) = (-t.ln(), -s.ln());
    let nodes: Vec<(f64, f64)> = composite(lo, hi, panels_for(hi - lo, quad), quad.nodes_per_panel)
        .into_iter()
        .map(|(u, w)| (u.exp(), w))
        .collect();

    let cells = quad.sigma_cells;
    let delta = (1.0 / s) / cells as f64;
    let mut out = Vec::with_capacity(depth);
    let mut factorial = 1.0;

    // Level 1 uses g directly.
    let k1 = (depth - 1) * cells;
    let mut prev: Vec<f64> = (0..=k1)
        .map(|k| {
            let sigma = k as f64 * delta;
            nodes.iter().map(|&(x, w)| w * g(sigma + x)).sum()
        })
        .collect();
    out.push(prev[0]);

    for d in 2..=depth {
        factorial *= d as f64;
        let kd = (depth - d) * cells;
        let last = prev.len() - 1;
        let next: Vec<f64> = (0..=kd)
            .map(|k| {
                nodes
                    .iter()
                    .map(|&(x, w)| {
                        let pos = k as f64 + x / delta;
                        let i = (pos.floor() as usize).min(last - 1);
                        let frac = (pos - i as f64).min(1.0);
                        w * (prev[i] + (prev[i + 1] - prev[i]) * frac)
                    })
                    .sum()
            })
            .collect();
        out.push(next[0] / factorial);
        prev = next;
    }
    Ok(out)
}

/// Integrand `Φ(t(1 - σ))` for one side of a table, with the region cut-offs.
fn side_integrand<'a>(table: &'a BoundTable, side: Side, t: f64, quad: &'a QuadConfig) -> impl Fn(f64) -> f64 + 'a {
    let floor = quad.argument_floor;
    let cut = 1.0 - quad.singular_margin;
    move |sigma: f64| {
        let arg = t * (1.0 - sigma);
        if arg <= floor || (side == Side::Upper && sigma >= cut) {
            0.0
        } else {
            table.eval_unchecked(side, arg)
        }
    }
}

fn check_rule_domain(s: f64, t: f64, s_floor: f64) -> Result<()> {
    if !(s >= s_floor && s <= t) {
        return Err(QuadError::Domain(format!(
            "need {s_floor} <= s <= t, got s = {s}, t = {t}"
        )));
    }
    Ok(())
}

/// `∫ t^κ Φ(t(1 - Σx)) / Π x_i` over the depth-`j` ordered region, with `Φ` read
/// from `table` on `side`.
pub fn nested_ordered_integral(
    table: &BoundTable,
    side: Side,
    s: f64,
    t: f64,
    depth: usize,
    quad: &QuadConfig,
) -> Result<f64> {
    nested_ordered_integral_with(side_integrand(table, side, t, quad), table.kappa, s, t, depth, quad)
}

/// [`nested_ordered_integral`] for an arbitrary integrand `φ(Σx)` in place of a
/// table lookup, with no region clamp.
pub fn nested_ordered_integral_with<G>(phi: G, kappa: f64, s: f64, t: f64, depth: usize, quad: &QuadConfig) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    check_rule_domain(s, t, 2.0)?;
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(QuadError::Domain(format!("depth must be in 1..={MAX_DEPTH}, got {depth}")));
    }
    let vals = ordered_integrals(depth, s, t, phi, quad)?;
    Ok(t.powf(kappa) * vals[depth - 1])
}

/// All ordered-region integrals up to a depth for both sides at one `(s, t)`.
/// Values exclude the `t^κ` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleIntegrals {
    pub s: f64,
    pub t: f64,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// Depths whose region reaches `Σx = 1`, where the `F`-side integrand was cut.
    pub clamped: Vec<bool>,
}

impl RuleIntegrals {
    pub fn compute(table: &BoundTable, s: f64, t: f64, depth: usize, quad: &QuadConfig) -> Result<Self> {
        let upper = ordered_integrals(depth, s, t, side_integrand(table, Side::Upper, t, quad), quad)?;
        let lower = ordered_integrals(depth, s, t, side_integrand(table, Side::Lower, t, quad), quad)?;
        let clamped = (1..=depth)
            .map(|j| s < t && j as f64 / s >= 1.0 - quad.singular_margin)
            .collect();
        Ok(Self { s, t, upper, lower, clamped })
    }

    pub fn depth(&self) -> usize {
        self.upper.len()
    }

    fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }
}

/// Side needed for a term: a subtracted term needs a lower bound on what is
/// subtracted in an upper rule, and the reverse in a lower rule.
pub fn side_for(kind: RuleKind, coeff_sign: f64) -> Side {
    match (kind, coeff_sign < 0.0) {
        (RuleKind::Upper, true) | (RuleKind::Lower, false) => Side::Lower,
        (RuleKind::Upper, false) | (RuleKind::Lower, true) => Side::Upper,
    }
}

pub fn lead_side(kind: RuleKind) -> Side {
    match kind {
        RuleKind::Upper => Side::Upper,
        RuleKind::Lower => Side::Lower,
    }
}

/// Smallest `s` at which each kind of rule applies.
pub fn s_floor(kind: RuleKind) -> f64 {
    match kind {
        RuleKind::Upper => 2.0,
        RuleKind::Lower => 3.0,
    }
}

/// A certified iteration rule with its coefficients in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub family: RuleFamily,
    pub params: ParamVector,
    pub coeffs: CoeffVector,
    pub coeffs_f64: Vec<f64>,
    /// Side per depth `1..=k` (index 0 is depth 1).
    pub sides: Vec<Side>,
    pub s_floor: f64,
}

impl RuleSpec {
    /// Builds a rule, rejecting parameters whose sign certificate does not
    /// match the family kind.
    pub fn new(family: RuleFamily, params: ParamVector) -> Result<Self> {
        let coeffs = exactcomb::closed_form_coefficients(family, &params)?;
        let cert = admissible::certify_sign(&params)?;
        if !cert.matches_kind() {
            return Err(QuadError::Inadmissible {
                family,
                params: params.to_string(),
                verdict: cert.verdict,
            });
        }
        let coeffs_f64 = coeffs.to_f64();
        let kind = family.kind();
        let sides = coeffs_f64[1..].iter().map(|&c| side_for(kind, c)).collect();
        Ok(Self {
            family,
            params,
            coeffs,
            coeffs_f64,
            sides,
            s_floor: s_floor(kind),
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.family.kind()
    }

    pub fn depth(&self) -> usize {
        self.coeffs_f64.len() - 1
    }
}

/// Candidate bound from precomputed integrals: `(t/s)^κ (lead + Σ c_j I_j)`.
/// Zero coefficients are skipped. Returns the value and whether any used
/// `F`-side term was cut at `Σx = 1`.
pub fn rule_candidate(
    kind: RuleKind,
    coeffs: &[f64],
    lead: f64,
    ints: &RuleIntegrals,
    kappa: f64,
) -> (f64, bool) {
    let mut acc = lead;
    let mut clamped = false;
    for (j, &c) in coeffs.iter().enumerate().skip(1) {
        if c == 0.0 {
            continue;
        }
        let side = side_for(kind, c);
        acc += c * ints.side(side)[j - 1];
        clamped |= side == Side::Upper && ints.clamped[j - 1];
    }
    ((ints.t / ints.s).powf(kappa) * acc, clamped)
}

/// Candidate for `F(s)` (upper rules) or `f(s)` (lower rules) from one rule at
/// one `t`.
pub fn apply_rule(table: &BoundTable, rule: &RuleSpec, s: f64, t: f64, quad: &QuadConfig) -> Result<f64> {
    check_rule_domain(s, t, rule.s_floor)?;
    if t > table.grid.s_max {
        return Err(QuadError::Domain(format!("t = {t} exceeds s_max = {}", table.grid.s_max)));
    }
    let ints = RuleIntegrals::compute(table, s, t, rule.depth(), quad)?;
    let lead = table.eval_unchecked(lead_side(rule.kind()), t);
    Ok(rule_candidate(rule.kind(), &rule.coeffs_f64, lead, &ints, table.kappa).0)
}

/// Tabulated `∫_{u0}^{s_max} (u+1)^{κ-1} (Φ(u) - 1) du` for one side of a table,
/// where `u = t - 1`. Below the grid the extension conventions apply.
#[derive(Debug, Clone)]
pub struct BuchstabKernel<'a> {
    table: &'a BoundTable,
    side: Side,
    quad: QuadConfig,
    /// `suffix[i] = ∫_{s_i}^{s_max}`.
    suffix: Vec<f64>,
}

const CELL_ORDER: usize = 3;

impl<'a> BuchstabKernel<'a> {
    pub fn new(table: &'a BoundTable, side: Side, quad: &QuadConfig) -> Self {
        let n = table.grid.len();
        let mut suffix = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let (a, b) = (table.grid.s_at(i), table.grid.s_at(i + 1));
            suffix[i] = suffix[i + 1] + Self::piece(table, side, a, b);
        }
        Self {
            table,
            side,
            quad: *quad,
            suffix,
        }
    }

    fn piece(table: &BoundTable, side: Side, a: f64, b: f64) -> f64 {
        let km1 = table.kappa - 1.0;
        composite(a, b, 1, CELL_ORDER)
            .into_iter()
            .map(|(u, w)| w * (u + 1.0).powf(km1) * (table.eval_unchecked(side, u) - 1.0))
            .sum()
    }

    /// Integral from `u0 > 0` up to `s_max`.
    pub fn from(&self, u0: f64) -> f64 {
        let g = &self.table.grid;
        if u0 >= g.s_max {
            return 0.0;
        }
        let mut total = 0.0;
        let mut start = u0;
        if u0 < g.s_min {
            total += self.below_grid(u0);
            start = g.s_min;
        }
        let x = (start - g.s_min) / g.step;
        let i = (x.floor() as usize).min(g.len() - 2);
        let next = g.s_at(i + 1);
        total + Self::piece(self.table, self.side, start, next) + self.suffix[i + 1]
    }

    fn below_grid(&self, u0: f64) -> f64 {
        let kappa = self.table.kappa;
        let s_min = self.table.grid.s_min;
        match self.side {
            // f = 0 below the grid: ∫ -(u+1)^{κ-1} du in closed form.
            Side::Lower => -((s_min + 1.0).powf(kappa) - (u0 + 1.0).powf(kappa)) / kappa,
            // F(u) = F(s_min) (s_min/u)^κ; integrate in ln u to tame u -> 0.
            Side::Upper => {
                let f0 = self.table.upper[0];
                let (lo, hi) = (u0.ln(), s_min.ln());
                composite(lo, hi, panels_for(hi - lo, &self.quad), self.quad.nodes_per_panel)
                    .into_iter()
                    .map(|(l, w)| {
                        let u = l.exp();
                        w * u * (u + 1.0).powf(kappa - 1.0) * (f0 * (s_min / u).powf(kappa) - 1.0)
                    })
                    .sum()
            }
        }
    }

    /// `1 - κ ∫_s^{s_max+1} t^{κ-1} (Φ(t-1) - 1) dt / s^κ`.
    pub fn candidate(&self, s: f64) -> f64 {
        1.0 - self.table.kappa * self.from(s - 1.0) / s.powf(self.table.kappa)
    }
}

fn check_buchstab_domain(s: f64, min: f64, strict: bool) -> Result<()> {
    let ok = if strict { s > min } else { s >= min };
    if !ok || !s.is_finite() {
        let rel = if strict { ">" } else { ">=" };
        return Err(QuadError::Domain(format!("need s {rel} {min}, got s = {s}")));
    }
    Ok(())
}

/// Upper-bound candidate for `F(s)` from the classical Buchstab operator.
/// Defined for `s >= 1`; below `s = 2` the lower function is read through its
/// zero extension.
pub fn buchstab_upper(table: &BoundTable, s: f64, quad: &QuadConfig) -> Result<f64> {
    check_buchstab_domain(s, 1.0, false)?;
    Ok(BuchstabKernel::new(table, Side::Lower, quad).candidate(s))
}

/// Lower-bound candidate for `f(s)`; may be negative. Defined for `s > 1`.
pub fn buchstab_lower(table: &BoundTable, s: f64, quad: &QuadConfig) -> Result<f64> {
    check_buchstab_domain(s, 1.0, true)?;
    Ok(BuchstabKernel::new(table, Side::Upper, quad).candidate(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{make_seed_table, GridConfig};
    use crate::exactcomb::int;

    fn flat_table(kappa: f64, upper: f64, lower: f64) -> BoundTable {
        let mut t = make_seed_table(kappa, GridConfig::new(1.0, 20.0, 0.01).unwrap(), upper).unwrap();
        t.lower.iter_mut().for_each(|v| *v = lower);
        t
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=GL_MAX_NODES {
            let (xs, ws) = gauss_legendre(n);
            assert!((ws.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            // x^(2n-2) is integrated exactly
            let p = 2 * n - 2;
            let got: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(p as i32)).sum();
            assert!((got - 2.0 / (p as f64 + 1.0)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn ordered_integral_constant_examples() {
        let q = QuadConfig::default();
        let vals = ordered_integrals(2, 2.0, 4.0, |_| 1.0, &q).unwrap();
        let l = 2f64.ln();
        assert!((4.0 * vals[0] - 4.0 * l).abs() / (4.0 * l) < 1e-10);
        assert!((4.0 * vals[1] - 4.0 * l * l / 2.0).abs() < 1e-10);
        assert_eq!(ordered_integrals(3, 3.0, 3.0, |_| 1.0, &q).unwrap(), vec![0.0; 3]);
    }

    /// Nested Gauss-Legendre in the ordered log-variables, no symmetrization.
    fn nested_direct(depth: usize, lo: f64, hi: f64, sum: f64, g: &dyn Fn(f64) -> f64) -> f64 {
        if depth == 0 {
            return g(sum);
        }
        composite(lo, hi, 24, 6)
            .into_iter()
            .map(|(u, w)| w * nested_direct(depth - 1, lo, u, sum + u.exp(), g))
            .sum()
    }

    #[test]
    fn chain_matches_direct_nesting_for_smooth_integrand() {
        // linear interpolation in σ is second order: 4x the cells, ~16x less error
        let coarse = QuadConfig::default();
        let fine = QuadConfig {
            sigma_cells: 4 * coarse.sigma_cells,
            ..coarse
        };
        let g = |sigma: f64| (1.0 + sigma).powi(3) - sigma.sin();
        let (s, t) = (2.5, 6.0);
        let got_coarse = ordered_integrals(3, s, t, g, &coarse).unwrap();
        let got = ordered_integrals(3, s, t, g, &fine).unwrap();
        for d in 1..=3 {
            let want = nested_direct(d, -t.ln(), -s.ln(), 0.0, &g);
            let err = (got[d - 1] - want).abs() / want.abs();
            let err_coarse = (got_coarse[d - 1] - want).abs() / want.abs();
            assert!(err < 1e-6, "d = {d}: {} vs {want}", got[d - 1]);
            assert!(err_coarse < 1e-5, "d = {d}: {} vs {want}", got_coarse[d - 1]);
            if d > 1 {
                assert!(err < err_coarse / 8.0, "d = {d}: {err} vs {err_coarse}");
            }
        }
    }

    #[test]
    fn constant_integrand_closed_form() {
        let q = QuadConfig::default();
        for kappa in [1.0, 1.5, 2.0, 3.0] {
            for (s, t) in [(2.0f64, 3.0f64), (2.0, 4.0), (3.0, 6.0)] {
                let l = (t / s).ln();
                let mut fact = 1.0;
                for j in 1..=MAX_DEPTH {
                    fact *= j as f64;
                    let want = t.powf(kappa) * l.powi(j as i32) / fact;
                    let got = nested_ordered_integral_with(|_| 1.0, kappa, s, t, j, &q).unwrap();
                    assert!((got - want).abs() <= 1e-8 * want, "κ={kappa} s={s} t={t} j={j}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn table_integral_at_equal_limits_is_zero() {
        let t = flat_table(1.0, 3.0, 0.5);
        let q = QuadConfig::default();
        for j in 1..=6 {
            assert_eq!(nested_ordered_integral(&t, Side::Upper, 4.0, 4.0, j, &q).unwrap(), 0.0);
        }
        assert!(nested_ordered_integral(&t, Side::Upper, 1.5, 4.0, 1, &q).is_err());
        assert!(nested_ordered_integral(&t, Side::Upper, 4.0, 3.0, 1, &q).is_err());
        assert!(nested_ordered_integral(&t, Side::Upper, 3.0, 4.0, 7, &q).is_err());
    }

    #[test]
    fn buchstab_examples() {
        let q = QuadConfig::default();
        let t = flat_table(1.0, 1.0, 1.0);
        assert!((buchstab_upper(&t, 3.0, &q).unwrap() - 1.0).abs() < 1e-12);
        assert!((buchstab_lower(&t, 3.0, &q).unwrap() - 1.0).abs() < 1e-12);

        let t = flat_table(1.0, 5.0, 0.0);
        assert!((buchstab_upper(&t, 3.0, &q).unwrap() - 7.0).abs() < 1e-9);
        let t = flat_table(2.0, 5.0, 0.0);
        assert!((buchstab_upper(&t, 3.0, &q).unwrap() - 49.0).abs() < 1e-9);

        for c in [0.25, 2.0] {
            let t = flat_table(1.0, 1.0 + c, 0.0);
            let got = buchstab_lower(&t, 3.0, &q).unwrap();
            assert!((got - (1.0 - 6.0 * c)).abs() < 1e-9, "c = {c}: {got}");
        }
        assert!(buchstab_upper(&t, 0.5, &q).is_err());
        assert!(buchstab_lower(&t, 1.0, &q).is_err());
    }

    #[test]
    fn buchstab_below_grid_branch() {
        // f = 0 below s_min and on the grid: ∫_s^21 -1 dt = s - 21.
        let q = QuadConfig::default();
        let t = flat_table(1.0, 5.0, 0.0);
        let got = buchstab_upper(&t, 1.5, &q).unwrap();
        assert!((got - (1.0 + 19.5 / 1.5)).abs() < 1e-9);

        // F ≡ 2 on [1, 20], 2/u below: ∫_{0.5}^{1} (2/u - 1) du = 2 ln 2 - 0.5
        let t = flat_table(1.0, 2.0, 0.0);
        let kernel = BuchstabKernel::new(&t, Side::Upper, &q);
        let want = (2.0 * 2f64.ln() - 0.5) + 19.0;
        assert!((kernel.from(0.5) - want).abs() < 1e-9);
    }

    #[test]
    fn side_assignment_follows_signs() {
        let rule = RuleSpec::new(RuleFamily::Ub2d, RuleFamily::Ub2d.base_params().unwrap()).unwrap();
        assert_eq!(rule.sides, vec![Side::Lower, Side::Upper]);
        let rule = RuleSpec::new(RuleFamily::Lb3d, RuleFamily::Lb3d.base_params().unwrap()).unwrap();
        assert_eq!(rule.sides, vec![Side::Upper, Side::Lower, Side::Upper]);
        assert_eq!(rule.s_floor, 3.0);
        // UB6D at (2,3,2,3,2,3) has a zero degree-5 coefficient.
        let rule = RuleSpec::new(RuleFamily::Ub6d, RuleFamily::Ub6d.base_params().unwrap()).unwrap();
        assert_eq!(rule.coeffs_f64[5], 0.0);
    }

    #[test]
    fn inadmissible_rule_is_rejected() {
        let p = ParamVector::new(RuleKind::Upper, vec![exactcomb::ratio(5, 2), int(4)]).unwrap();
        assert!(matches!(
            RuleSpec::new(RuleFamily::Ub2d, p),
            Err(QuadError::Inadmissible { .. })
        ));
    }

    fn constant_integrals(s: f64, t: f64, depth: usize) -> RuleIntegrals {
        let q = QuadConfig::default();
        let v = ordered_integrals(depth, s, t, |_| 1.0, &q).unwrap();
        RuleIntegrals {
            s,
            t,
            upper: v.clone(),
            lower: v,
            clamped: vec![false; depth],
        }
    }

    #[test]
    fn rule_candidate_constant_integrand() {
        let l = 2f64.ln();
        let ub2 = RuleSpec::new(RuleFamily::Ub2d, RuleFamily::Ub2d.base_params().unwrap()).unwrap();
        let (got, _) = rule_candidate(RuleKind::Upper, &ub2.coeffs_f64, 1.0, &constant_integrals(2.0, 4.0, 2), 1.0);
        let want = (4.0 - (2.0 / 3.0) * 4.0 * l + (1.0 / 3.0) * 4.0 * l * l / 2.0) / 2.0;
        assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
        assert!((want - 1.2359547638928068).abs() < 1e-12);

        let ub4 = RuleSpec::new(RuleFamily::Ub4d, RuleFamily::Ub4d.base_params().unwrap()).unwrap();
        let (got, _) = rule_candidate(RuleKind::Upper, &ub4.coeffs_f64, 1.0, &constant_integrals(2.0, 4.0, 4), 1.0);
        let c = [1.0, -8.0 / 9.0, 7.0 / 9.0, -2.0 / 3.0, 2.0 / 3.0];
        let want: f64 = 2.0 * (0..5).map(|j| c[j] * l.powi(j as i32) / [1.0, 1.0, 2.0, 6.0, 24.0][j]).sum::<f64>();
        assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
    }

    #[test]
    fn apply_rule_domain_and_equal_limits() {
        let q = QuadConfig::default();
        let rule = RuleSpec::new(RuleFamily::Ub2d, RuleFamily::Ub2d.base_params().unwrap()).unwrap();
        let t = flat_table(1.7, 2.5, 0.3);
        let at_t = apply_rule(&t, &rule, 5.0, 5.0, &q).unwrap();
        assert_eq!(at_t, t.evaluate(Side::Upper, 5.0).unwrap());
        assert!(apply_rule(&t, &rule, 1.5, 4.0, &q).is_err());
        assert!(apply_rule(&t, &rule, 5.0, 25.0, &q).is_err());
        let lb = RuleSpec::new(RuleFamily::Lb3d, RuleFamily::Lb3d.base_params().unwrap()).unwrap();
        assert!(apply_rule(&t, &lb, 2.5, 4.0, &q).is_err());
        assert_eq!(apply_rule(&t, &lb, 4.0, 4.0, &q).unwrap(), t.evaluate(Side::Lower, 4.0).unwrap());
    }
}
