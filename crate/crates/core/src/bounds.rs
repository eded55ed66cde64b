//! Grid tables for the upper sieve function `F` and lower sieve function `f`.
//!
//! Values live on an equispaced grid `s_min, s_min + h, ..., s_max` and are
//! linearly interpolated between nodes. Outside the grid:
//!
//! * `u > s_max`: both functions are taken to be 1 (tail convention).
//! * `0 < u < s_min`: `u^κ F(u)` is held constant and `f(u) = 0`.
//!
//! Tables only ever tighten: `F` by pointwise minimum, `f` by pointwise maximum.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("seed must dominate 1, got {0}")]
    Seed(f64),
    #[error("argument out of domain: u = {0}")]
    Domain(f64),
    #[error("sieve dimension must be positive, got {0}")]
    Kappa(f64),
    #[error("table invariant violated at s = {s}: {what}")]
    Invariant { s: f64, what: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

/// Which of the two sieve functions is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Upper sieve function `F`.
    Upper,
    /// Lower sieve function `f`.
    Lower,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Upper => "F",
            Side::Lower => "f",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            s_min: 1.0,
            s_max: 20.0,
            step: 0.01,
        }
    }
}

impl GridConfig {
    pub fn new(s_min: f64, s_max: f64, step: f64) -> Result<Self> {
        let g = Self { s_min, s_max, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BoundsError::Grid(m.to_string()));
        if !(self.s_min.is_finite() && self.s_max.is_finite() && self.step.is_finite()) {
            return bad("non-finite value");
        }
        if self.s_min < 1.0 {
            return bad("s_min must be at least 1");
        }
        if self.s_min >= self.s_max {
            return bad("s_min must be below s_max");
        }
        if self.step <= 0.0 {
            return bad("step must be positive");
        }
        let cells = (self.s_max - self.s_min) / self.step;
        if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) {
            return bad("(s_max - s_min) / step is not an integer");
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        ((self.s_max - self.s_min) / self.step).round() as usize
    }

    pub fn len(&self) -> usize {
        self.cells() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid node `i`, computed from the index to avoid accumulated drift.
    pub fn s_at(&self, i: usize) -> f64 {
        if i == self.cells() {
            self.s_max
        } else {
            self.s_min + i as f64 * self.step
        }
    }

    /// Index of the first node `>= s` (within a relative slack of 1e-9 step).
    pub fn index_at_or_above(&self, s: f64) -> usize {
        let x = (s - self.s_min) / self.step;
        let i = (x - 1e-9).ceil().max(0.0) as usize;
        i.min(self.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    pub kappa: f64,
    pub grid: GridConfig,
    /// Upper bounds `F` at the grid nodes.
    pub upper: Vec<f64>,
    /// Lower bounds `f` at the grid nodes.
    pub lower: Vec<f64>,
}

pub fn make_seed_table(kappa: f64, grid: GridConfig, seed_f: f64) -> Result<BoundTable> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(BoundsError::Kappa(kappa));
    }
    grid.validate()?;
    if !(seed_f >= 1.0) {
        return Err(BoundsError::Seed(seed_f));
    }
    let n = grid.len();
    Ok(BoundTable {
        kappa,
        grid,
        upper: vec![seed_f; n],
        lower: vec![0.0; n],
    })
}

impl BoundTable {
    pub fn values(&self, side: Side) -> &[f64] {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    fn values_mut(&mut self, side: Side) -> &mut Vec<f64> {
        match side {
            Side::Upper => &mut self.upper,
            Side::Lower => &mut self.lower,
        }
    }

    /// Value of `F` or `f` at `u > 0` under the interpolation and extension
    /// conventions described at the module level.
    pub fn evaluate(&self, side: Side, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(BoundsError::Domain(u));
        }
        Ok(self.eval_unchecked(side, u))
    }

    /// [`evaluate`](Self::evaluate) without the domain check; `u` must be positive.
    #[inline]
    pub(crate) fn eval_unchecked(&self, side: Side, u: f64) -> f64 {
        let g = &self.grid;
        if u > g.s_max {
            return 1.0;
        }
        let vals = self.values(side);
        if u < g.s_min {
            return match side {
                Side::Upper => vals[0] * (g.s_min / u).powf(self.kappa),
                Side::Lower => 0.0,
            };
        }
        let x = (u - g.s_min) / g.step;
        let last = vals.len() - 1;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            return vals[(r as usize).min(last)];
        }
        let i = (x.floor() as usize).min(last - 1);
        let frac = x - i as f64;
        vals[i] + (vals[i + 1] - vals[i]) * frac
    }

    /// Tightens one node with a candidate value, then repairs the shape.
    pub fn merge_improve(&self, side: Side, s_index: usize, candidate: f64) -> BoundTable {
        let mut next = self.clone();
        next.tighten(side, s_index, candidate);
        next.enforce_shape_in_place();
        next
    }

    /// Applies every available candidate of one side, then repairs the shape once.
    pub fn merge_all(&self, side: Side, candidates: &[Option<f64>]) -> BoundTable {
        let mut next = self.clone();
        for (i, c) in candidates.iter().enumerate() {
            if let Some(c) = c {
                next.tighten(side, i, *c);
            }
        }
        next.enforce_shape_in_place();
        next
    }

    fn tighten(&mut self, side: Side, i: usize, candidate: f64) {
        if candidate.is_nan() {
            return;
        }
        let v = &mut self.values_mut(side)[i];
        *v = match side {
            Side::Upper => v.min(candidate),
            Side::Lower => v.max(candidate),
        };
    }

    pub fn enforce_shape(&self) -> BoundTable {
        let mut next = self.clone();
        next.enforce_shape_in_place();
        next
    }

    /// Clamps `F >= 1` and `0 <= f <= 1`, then propagates bounds toward larger
    /// `s`: `F` is nonincreasing and `f` nondecreasing in `s`, so a bound valid
    /// at a smaller `s` stays valid at every larger `s`.
    fn enforce_shape_in_place(&mut self) {
        for v in &mut self.upper {
            *v = v.max(1.0);
        }
        for v in &mut self.lower {
            *v = v.clamp(0.0, 1.0);
        }
        for i in 1..self.upper.len() {
            self.upper[i] = self.upper[i].min(self.upper[i - 1]);
            self.lower[i] = self.lower[i].max(self.lower[i - 1]);
        }
    }

    /// Checks the sandwich, monotonicity and (optionally) the tail tolerance.
    pub fn validate(&self, tail_tol: Option<f64>) -> Result<()> {
        let fail = |i: usize, what: String| {
            Err(BoundsError::Invariant {
                s: self.grid.s_at(i),
                what,
            })
        };
        for i in 0..self.grid.len() {
            let (hi, lo) = (self.upper[i], self.lower[i]);
            if !(0.0 <= lo && lo <= 1.0 && 1.0 <= hi) {
                return fail(i, format!("expected 0 <= f <= 1 <= F, got f = {lo}, F = {hi}"));
            }
            if i > 0 && (hi > self.upper[i - 1] || lo < self.lower[i - 1]) {
                return fail(i, "monotonicity".to_string());
            }
        }
        if let Some(tol) = tail_tol {
            let last = self.grid.len() - 1;
            let (hi, lo) = (self.upper[last], self.lower[last]);
            if (hi - 1.0).abs() > tol || (1.0 - lo).abs() > tol {
                return fail(last, format!("tail values F = {hi}, f = {lo} not within {tol} of 1"));
            }
        }
        Ok(())
    }

    /// Largest pointwise change between two tables on the same grid.
    pub fn max_delta(&self, other: &BoundTable) -> f64 {
        self.upper
            .iter()
            .zip(&other.upper)
            .chain(self.lower.iter().zip(&other.lower))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `s,F,f` rows with a header, 10 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,F,f")?;
        for i in 0..self.grid.len() {
            writeln!(
                w,
                "{},{},{}",
                sig10(self.grid.s_at(i)),
                sig10(self.upper[i]),
                sig10(self.lower[i])
            )?;
        }
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). The grid is
    /// recovered from the first, last and node count.
    pub fn read_csv<R: BufRead>(r: R, kappa: f64) -> Result<BoundTable> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "s,F,f" {
            return Err(BoundsError::Csv(format!("unexpected header `{header}`")));
        }
        let (mut s, mut upper, mut lower) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| BoundsError::Csv(format!("line {}: bad number `{x}`", n + 2)))
            };
            if fields.len() != 3 {
                return Err(BoundsError::Csv(format!("line {}: expected 3 fields", n + 2)));
            }
            s.push(parse(fields[0])?);
            upper.push(parse(fields[1])?);
            lower.push(parse(fields[2])?);
        }
        if s.len() < 2 {
            return Err(BoundsError::Csv("need at least two rows".into()));
        }
        let (s_min, s_max) = (s[0], s[s.len() - 1]);
        let step = (s_max - s_min) / (s.len() - 1) as f64;
        // Snap the step to the printed precision so index arithmetic is stable.
        let step: f64 = sig10(step).parse().unwrap_or(step);
        let grid = GridConfig::new(s_min, s_max, step)?;
        if grid.len() != s.len() {
            return Err(BoundsError::Csv("rows are not an equispaced grid".into()));
        }
        if !(kappa > 0.0) {
            return Err(BoundsError::Kappa(kappa));
        }
        Ok(BoundTable {
            kappa,
            grid,
            upper,
            lower,
        })
    }
}

/// Formats with 10 significant digits in positional notation.
pub fn sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.9}", x);
    }
    // The exponent of the rounded scientific form accounts for carries
    // such as 9.99999999999 -> 1.000000000e1.
    let sci = format!("{:.9e}", x);
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    format!("{:.*}", (9 - exp).max(0) as usize, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, h: f64) -> GridConfig {
        GridConfig::new(a, b, h).unwrap()
    }

    #[test]
    fn seed_tables() {
        let t = make_seed_table(1.0, grid(1.0, 20.0, 0.01), 10.0).unwrap();
        assert_eq!(t.grid.len(), 1901);
        assert_eq!(t.evaluate(Side::Upper, 2.0).unwrap(), 10.0);
        assert_eq!(t.evaluate(Side::Lower, 2.0).unwrap(), 0.0);
        let t = make_seed_table(2.0, grid(1.0, 30.0, 0.01), 50.0).unwrap();
        assert!(t.upper.iter().all(|&v| v == 50.0));
        assert!(matches!(
            make_seed_table(1.0, grid(1.0, 20.0, 0.01), 0.5),
            Err(BoundsError::Seed(_))
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(GridConfig::new(1.0, 20.0, 0.01).is_ok());
        assert!(GridConfig::new(1.0, 20.0, 0.3).is_err());
        assert!(GridConfig::new(0.5, 20.0, 0.5).is_err());
        assert!(GridConfig::new(3.0, 2.0, 0.5).is_err());
        let g = grid(1.0, 20.0, 0.01);
        assert_eq!(g.s_at(1900), 20.0);
        assert_eq!(g.index_at_or_above(2.0), 100);
        assert_eq!(g.index_at_or_above(2.005), 101);
    }

    #[test]
    fn evaluation_conventions() {
        let t = make_seed_table(1.0, grid(1.0, 20.0, 0.01), 10.0).unwrap();
        assert_eq!(t.evaluate(Side::Upper, 25.0).unwrap(), 1.0);
        assert_eq!(t.evaluate(Side::Lower, 0.5).unwrap(), 0.0);
        assert_eq!(t.evaluate(Side::Upper, 0.5).unwrap(), 20.0);
        assert!(matches!(
            t.evaluate(Side::Upper, 0.0),
            Err(BoundsError::Domain(_))
        ));

        let mut t = make_seed_table(2.0, grid(1.0, 3.0, 0.5), 4.0).unwrap();
        t.upper = vec![4.0, 3.0, 2.0, 1.5, 1.0];
        assert_eq!(t.evaluate(Side::Upper, 1.25).unwrap(), 3.5);
        assert_eq!(t.evaluate(Side::Upper, 3.0).unwrap(), 1.0);
        assert_eq!(t.evaluate(Side::Upper, 0.5).unwrap(), 16.0);
        // continuation meets the first node
        assert_eq!(t.evaluate(Side::Upper, 1.0).unwrap(), 4.0);
        let just_below = t.evaluate(Side::Upper, 1.0 - 1e-12).unwrap();
        assert!((just_below - 4.0).abs() < 1e-9);
    }

    #[test]
    fn merging() {
        let t = make_seed_table(1.0, grid(1.0, 2.0, 0.5), 10.0).unwrap();
        let t = t.merge_improve(Side::Upper, 2, 3.0);
        assert_eq!(t.upper[2], 3.0);
        let t = t.merge_improve(Side::Lower, 0, 0.4);
        assert_eq!(t.lower[0], 0.4);
        let t = t.merge_improve(Side::Lower, 0, 0.5).merge_improve(Side::Lower, 0, 0.2);
        assert_eq!(t.lower[0], 0.5);
    }

    #[test]
    fn shape_repair() {
        let mut t = make_seed_table(1.0, grid(2.0, 2.01, 0.01), 10.0).unwrap();
        t.upper = vec![3.0, 4.0];
        t.lower = vec![0.2, 0.1];
        let r = t.enforce_shape();
        assert_eq!(r.upper, vec![3.0, 3.0]);
        // lower bounds propagate toward larger s
        assert_eq!(r.lower, vec![0.2, 0.2]);

        t.upper = vec![0.9, 0.8];
        t.lower = vec![-0.1, 1.2];
        let r = t.enforce_shape();
        assert_eq!(r.upper, vec![1.0, 1.0]);
        assert_eq!(r.lower, vec![0.0, 1.0]);
        assert!(r.validate(None).is_ok());
    }

    #[test]
    fn validation_flags_violations() {
        let mut t = make_seed_table(1.0, grid(1.0, 2.0, 0.5), 10.0).unwrap();
        assert!(t.validate(None).is_ok());
        assert!(t.validate(Some(1e-3)).is_err());
        t.upper[1] = 11.0;
        assert!(t.validate(None).is_err());
    }

    #[test]
    fn sig10_formatting() {
        assert_eq!(sig10(1.0), "1.000000000");
        assert_eq!(sig10(20.0), "20.00000000");
        assert_eq!(sig10(1.7810724179901979), "1.781072418");
        assert_eq!(sig10(0.0), "0.000000000");
        assert_eq!(sig10(0.012345678912), "0.01234567891");
        assert_eq!(sig10(9.99999999999), "10.00000000");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = make_seed_table(1.0, grid(1.0, 3.0, 0.25), 5.0).unwrap();
        t.lower[8] = 0.75;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = BoundTable::read_csv(buf.as_slice(), 1.0).unwrap();
        assert_eq!(back, t);
        assert!(BoundTable::read_csv("x,y\n".as_bytes(), 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn merge_is_order_insensitive(cands in proptest::collection::vec(0.0f64..20.0, 1..12)) {
                let base = make_seed_table(1.5, grid(1.0, 3.0, 0.5), 15.0).unwrap();
                let forward = cands.iter().fold(base.clone(), |t, &c| t.merge_improve(Side::Upper, 2, c));
                let backward = cands.iter().rev().fold(base.clone(), |t, &c| t.merge_improve(Side::Upper, 2, c));
                prop_assert_eq!(&forward, &backward);
                let again = cands.iter().fold(forward.clone(), |t, &c| t.merge_improve(Side::Upper, 2, c));
                prop_assert_eq!(&forward, &again);
                prop_assert!(forward.validate(None).is_ok());

                let lf = cands.iter().fold(base.clone(), |t, &c| t.merge_improve(Side::Lower, 1, c / 20.0));
                let lb = cands.iter().rev().fold(base, |t, &c| t.merge_improve(Side::Lower, 1, c / 20.0));
                prop_assert_eq!(&lf, &lb);
                prop_assert!(lf.validate(None).is_ok());
            }

            #[test]
            fn invariants_survive_random_mutation(
                ops in proptest::collection::vec((any::<bool>(), 0usize..9, -1.0f64..12.0), 1..40)
            ) {
                let mut t = make_seed_table(2.0, grid(1.0, 5.0, 0.5), 10.0).unwrap();
                for (upper, i, c) in ops {
                    let side = if upper { Side::Upper } else { Side::Lower };
                    t = t.merge_improve(side, i, c);
                    prop_assert!(t.validate(None).is_ok());
                }
            }

            #[test]
            fn interpolation_hits_nodes(vals in proptest::collection::vec(1.0f64..9.0, 9)) {
                let mut t = make_seed_table(1.0, grid(1.0, 5.0, 0.5), 10.0).unwrap();
                t.upper = vals;
                for i in 0..9 {
                    prop_assert_eq!(t.evaluate(Side::Upper, t.grid.s_at(i)).unwrap(), t.upper[i]);
                }
            }
        }
    }
}
