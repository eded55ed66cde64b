//! Exact rational combinatorics for sieve iteration rules.
//!
//! A rule with parameters `m_1, ..., m_k` weights the element that has exactly
//! `n` prime factors in `[w, z)` by `prod_i (1 - n/m_i)`. Writing that product in
//! the binomial basis `sum_r c_r * C(n, r)` gives the coefficients in front of the
//! `r`-fold prime sums of the rule. This module computes those coefficients in two
//! independent ways (by interpolation of the product, and from the closed forms
//! attached to each rule family) so they can be compared exactly.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact arbitrary precision fraction, always kept in lowest terms.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombError {
    #[error("degree exceeds parameter count: r = {r}, parameters = {len}")]
    DegreeExceedsParams { r: usize, len: usize },
    #[error("division by zero parameter")]
    ZeroParameter,
    #[error("parameter must be positive, got {0}")]
    NonPositiveParameter(String),
    #[error("lower rules need 0 < m0 <= 1, got m0 = {0}")]
    LeadingParameter(String),
    #[error("rule family arity: {family} takes {expected} parameters, got {got}")]
    Arity {
        family: RuleFamily,
        expected: usize,
        got: usize,
    },
    #[error("rule family {family} is a {expected} rule, parameters are tagged {got}")]
    KindMismatch {
        family: RuleFamily,
        expected: RuleKind,
        got: RuleKind,
    },
    #[error("UB_k needs an odd k >= 3, got {0}")]
    EvenK(u32),
    #[error("unknown rule family `{0}`")]
    UnknownFamily(String),
    #[error("cannot parse rational `{0}`")]
    BadRational(String),
}

pub type Result<T> = std::result::Result<T, CombError>;

/// Whether a rule bounds `S(A, z)` from above or from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Upper,
    Lower,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Upper => f.write_str("upper"),
            RuleKind::Lower => f.write_str("lower"),
        }
    }
}

/// The closed set of rule families with published coefficient formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleFamily {
    /// Parameters fixed to `(2, 3, ..., k)` for odd `k`.
    UbK(u32),
    Ub2d,
    Ub4d,
    Ub6d,
    Lb3d,
    Lb5d,
}

impl RuleFamily {
    /// Number of parameters (including `m0` for lower families).
    pub fn arity(self) -> usize {
        match self {
            RuleFamily::UbK(k) => k.saturating_sub(1) as usize,
            RuleFamily::Ub2d => 2,
            RuleFamily::Ub4d => 4,
            RuleFamily::Ub6d => 6,
            RuleFamily::Lb3d => 3,
            RuleFamily::Lb5d => 5,
        }
    }

    pub fn kind(self) -> RuleKind {
        match self {
            RuleFamily::Lb3d | RuleFamily::Lb5d => RuleKind::Lower,
            _ => RuleKind::Upper,
        }
    }

    /// The families whose parameters are free (everything except `UB_k`).
    pub fn searchable() -> [RuleFamily; 5] {
        [
            RuleFamily::Ub2d,
            RuleFamily::Ub4d,
            RuleFamily::Ub6d,
            RuleFamily::Lb3d,
            RuleFamily::Lb5d,
        ]
    }

    /// Canonical parameters: `(2, 3, ...)` pairs, with `m0 = 1` for lower rules.
    pub fn base_params(self) -> Result<ParamVector> {
        let ints: Vec<i64> = match self {
            RuleFamily::UbK(k) => {
                if k < 3 || k % 2 == 0 {
                    return Err(CombError::EvenK(k));
                }
                (2..=k as i64).collect()
            }
            RuleFamily::Ub2d => vec![2, 3],
            RuleFamily::Ub4d => vec![2, 3, 2, 3],
            RuleFamily::Ub6d => vec![2, 3, 2, 3, 2, 3],
            RuleFamily::Lb3d => vec![1, 2, 3],
            RuleFamily::Lb5d => vec![1, 2, 3, 2, 3],
        };
        ParamVector::new(self.kind(), ints.into_iter().map(int).collect())
    }
}

impl fmt::Display for RuleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleFamily::UbK(k) => write!(f, "UB{k}"),
            RuleFamily::Ub2d => f.write_str("UB2D"),
            RuleFamily::Ub4d => f.write_str("UB4D"),
            RuleFamily::Ub6d => f.write_str("UB6D"),
            RuleFamily::Lb3d => f.write_str("LB3D"),
            RuleFamily::Lb5d => f.write_str("LB5D"),
        }
    }
}

impl FromStr for RuleFamily {
    type Err = CombError;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "UB2D" => Ok(RuleFamily::Ub2d),
            "UB4D" => Ok(RuleFamily::Ub4d),
            "UB6D" => Ok(RuleFamily::Ub6d),
            "LB3D" => Ok(RuleFamily::Lb3d),
            "LB5D" => Ok(RuleFamily::Lb5d),
            _ => {
                let digits = up
                    .strip_prefix("UB_K")
                    .or_else(|| up.strip_prefix("UB_"))
                    .or_else(|| up.strip_prefix("UB"))
                    .map(|d| d.trim_start_matches('='));
                match digits.and_then(|d| d.parse::<u32>().ok()) {
                    Some(k) if k >= 3 && k % 2 == 1 => Ok(RuleFamily::UbK(k)),
                    Some(k) => Err(CombError::EvenK(k)),
                    None => Err(CombError::UnknownFamily(s.to_string())),
                }
            }
        }
    }
}

/// Rule parameters. For lower rules `m[0]` is the extra parameter `m0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamVector {
    kind: RuleKind,
    m: Vec<Rational>,
}

impl ParamVector {
    pub fn new(kind: RuleKind, m: Vec<Rational>) -> Result<Self> {
        if let Some(bad) = m.iter().find(|x| !x.is_positive()) {
            return Err(CombError::NonPositiveParameter(bad.to_string()));
        }
        if kind == RuleKind::Lower {
            match m.first() {
                Some(m0) if *m0 <= Rational::one() => {}
                Some(m0) => return Err(CombError::LeadingParameter(m0.to_string())),
                None => return Err(CombError::LeadingParameter("<missing>".into())),
            }
        }
        Ok(Self { kind, m })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn values(&self) -> &[Rational] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.m.iter().map(rational_to_f64).collect()
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, x) in self.m.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str(")")
    }
}

/// Coefficients `c_0..c_k` of a rule in the binomial basis `sum_r c_r * C(n, r)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoeffVector(Vec<Rational>);

impl CoeffVector {
    pub fn new(c: Vec<Rational>) -> Self {
        Self(c)
    }

    /// Degree, i.e. the number of parameters the rule was built from.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational_to_f64).collect()
    }

    /// `sum_r c_r * C(n, r)`.
    pub fn eval_at(&self, n: u64) -> Rational {
        self.0
            .iter()
            .enumerate()
            .fold(Rational::zero(), |acc, (r, c)| {
                acc + c * Rational::from_integer(binom(n, r as u64))
            })
    }
}

impl fmt::Display for CoeffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str(")")
    }
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `3`, `-7/2` or a terminating decimal such as `2.25`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || CombError::BadRational(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(digits, den));
    }
    s.parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad())
}

pub fn rational_to_f64(x: &Rational) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => f64::NAN,
    }
}

/// `C(n, r)`, zero when `r > n`.
pub fn binom(n: u64, r: u64) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigInt::one();
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Elementary symmetric polynomial `e_r(m)`; `e_0 = 1`.
pub fn elementary_symmetric(m: &[Rational], r: usize) -> Result<Rational> {
    if r > m.len() {
        return Err(CombError::DegreeExceedsParams { r, len: m.len() });
    }
    // e[j] holds e_j of the prefix processed so far.
    let mut e = vec![Rational::zero(); r + 1];
    e[0] = Rational::one();
    for x in m {
        for j in (1..=r).rev() {
            let add = &e[j - 1] * x;
            e[j] += add;
        }
    }
    Ok(e.swap_remove(r))
}

/// `prod_i (1 - n / m_i)`, exactly.
pub fn product_at(m: &[Rational], n: u64) -> Result<Rational> {
    let n = Rational::from_integer(BigInt::from(n));
    m.iter().try_fold(Rational::one(), |acc, x| {
        if x.is_zero() {
            Err(CombError::ZeroParameter)
        } else {
            Ok(acc * (Rational::one() - &n / x))
        }
    })
}

/// Binomial-basis coefficients of `prod_i (1 - n / m_i)`.
///
/// The product is evaluated at `n = 0..=k` and the lower triangular system
/// `P(n) = sum_{r <= n} c_r C(n, r)` is solved by forward substitution.
pub fn expand_to_binomial_basis(m: &[Rational]) -> Result<CoeffVector> {
    let k = m.len();
    let mut c: Vec<Rational> = Vec::with_capacity(k + 1);
    for n in 0..=k as u64 {
        let mut rest = product_at(m, n)?;
        for (r, cr) in c.iter().enumerate() {
            rest -= cr * Rational::from_integer(binom(n, r as u64));
        }
        // C(n, n) = 1 on the diagonal.
        c.push(rest);
    }
    Ok(CoeffVector(c))
}

fn check_shape(family: RuleFamily, params: &ParamVector) -> Result<()> {
    if params.kind() != family.kind() {
        return Err(CombError::KindMismatch {
            family,
            expected: family.kind(),
            got: params.kind(),
        });
    }
    if params.len() != family.arity() {
        return Err(CombError::Arity {
            family,
            expected: family.arity(),
            got: params.len(),
        });
    }
    Ok(())
}

/// Coefficients as printed in the statement of each rule family, with the
/// symmetric functions `M^r` (upper rules) and `N^r` (lower rules, including
/// `m0`) computed from the parameters.
pub fn closed_form_coefficients(family: RuleFamily, params: &ParamVector) -> Result<CoeffVector> {
    check_shape(family, params)?;
    let m = params.values();
    let e = |r: usize| elementary_symmetric(m, r);
    let prod = e(m.len())?;
    if prod.is_zero() {
        return Err(CombError::ZeroParameter);
    }
    let over = |x: Rational| x / &prod;

    let c = match family {
        RuleFamily::UbK(k) => {
            let expected: Vec<Rational> = (2..=k as i64).map(int).collect();
            if m != expected.as_slice() {
                return Err(CombError::Arity {
                    family,
                    expected: family.arity(),
                    got: m.len(),
                });
            }
            // c_r = (-1)^r (k - r) / k, r = 0..k-1
            (0..k as i64)
                .map(|r| {
                    let sign = if r % 2 == 0 { 1 } else { -1 };
                    ratio(sign * (k as i64 - r), k as i64)
                })
                .collect()
        }
        RuleFamily::Ub2d => {
            let (m1, m2) = (&m[0], &m[1]);
            vec![
                Rational::one(),
                -over(m1 + m2 - int(1)),
                over(int(2)),
            ]
        }
        RuleFamily::Ub4d => {
            let (s1, s2, s3) = (e(1)?, e(2)?, e(3)?);
            vec![
                Rational::one(),
                -over(&s3 - &s2 + &s1 - int(1)),
                over(int(2) * (&s2 - int(3) * &s1 + int(7))),
                -over(int(6) * (&s1 - int(6))),
                over(int(24)),
            ]
        }
        RuleFamily::Ub6d => {
            let (s1, s2, s3, s4, s5) = (e(1)?, e(2)?, e(3)?, e(4)?, e(5)?);
            vec![
                Rational::one(),
                -over(&s5 - &s4 + &s3 - &s2 + &s1 - int(1)),
                over(int(2) * (&s4 - int(3) * &s3 + int(7) * &s2 - int(15) * &s1 + int(31))),
                -over(int(6) * (&s3 - int(6) * &s2 + int(25) * &s1 - int(90))),
                over(int(24) * (&s2 - int(10) * &s1 + int(65))),
                -over(int(120) * (&s1 - int(15))),
                over(int(720)),
            ]
        }
        RuleFamily::Lb3d => {
            let (m0, m1, m2) = (&m[0], &m[1], &m[2]);
            let pairwise = m0 * m1 + m0 * m2 + m1 * m2;
            vec![
                Rational::one(),
                -over(pairwise - m0 - m1 - m2 + int(1)),
                over(int(2) * (m0 + m1 + m2 - int(3))),
                -over(int(6)),
            ]
        }
        RuleFamily::Lb5d => {
            let (n1, n2, n3, n4) = (e(1)?, e(2)?, e(3)?, e(4)?);
            vec![
                Rational::one(),
                -over(&n4 - &n3 + &n2 - &n1 + int(1)),
                over(int(2) * (&n3 - int(3) * &n2 + int(7) * &n1 - int(15))),
                -over(int(6) * (&n2 - int(6) * &n1 + int(25))),
                over(int(24) * (&n1 - int(10))),
                -over(int(120)),
            ]
        }
    };
    Ok(CoeffVector(c))
}

/// True iff the closed-form coefficients equal the interpolated expansion.
pub fn verify_identity(family: RuleFamily, params: &ParamVector) -> Result<bool> {
    let printed = closed_form_coefficients(family, params)?;
    let expanded = expand_to_binomial_basis(params.values())?;
    Ok(printed == expanded)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().copied().map(int).collect()
    }

    fn coeffs(v: &[(i64, i64)]) -> CoeffVector {
        CoeffVector(v.iter().map(|&(n, d)| ratio(n, d)).collect())
    }

    fn upper(v: &[i64]) -> ParamVector {
        ParamVector::new(RuleKind::Upper, ints(v)).unwrap()
    }

    fn lower(v: &[i64]) -> ParamVector {
        ParamVector::new(RuleKind::Lower, ints(v)).unwrap()
    }

    /// Sum over all r-subsets by bitmask enumeration.
    fn subset_sum(m: &[Rational], r: usize) -> Rational {
        let mut total = Rational::zero();
        for mask in 0u32..(1 << m.len()) {
            if mask.count_ones() as usize == r {
                let mut p = Rational::one();
                for (i, x) in m.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        p *= x;
                    }
                }
                total += p;
            }
        }
        total
    }

    #[test]
    fn binom_small_values() {
        assert_eq!(binom(5, 2), BigInt::from(10));
        assert_eq!(binom(4, 0), BigInt::from(1));
        assert_eq!(binom(2, 3), BigInt::from(0));
        assert_eq!(binom(30, 15), BigInt::from(155_117_520u64));
    }

    #[test]
    fn elementary_symmetric_matches_enumeration() {
        let m = ints(&[2, 3, 2, 3]);
        assert_eq!(subset_sum(&m, 1), int(10));
        assert_eq!(subset_sum(&m, 2), int(37));
        for r in 0..=4 {
            assert_eq!(elementary_symmetric(&m, r).unwrap(), subset_sum(&m, r));
        }
        assert_eq!(elementary_symmetric(&[], 0).unwrap(), int(1));
        assert!(matches!(
            elementary_symmetric(&m, 5),
            Err(CombError::DegreeExceedsParams { .. })
        ));
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(
            expand_to_binomial_basis(&ints(&[2, 3])).unwrap(),
            coeffs(&[(1, 1), (-2, 3), (1, 3)])
        );
        assert_eq!(
            expand_to_binomial_basis(&ints(&[2, 3, 2, 3])).unwrap(),
            coeffs(&[(1, 1), (-8, 9), (7, 9), (-2, 3), (2, 3)])
        );
        assert_eq!(
            expand_to_binomial_basis(&ints(&[1, 2, 3])).unwrap(),
            coeffs(&[(1, 1), (-1, 1), (1, 1), (-1, 1)])
        );
        assert_eq!(
            expand_to_binomial_basis(&[int(2), int(0)]),
            Err(CombError::ZeroParameter)
        );
    }

    #[test]
    fn printed_coefficients_examples() {
        let brady = closed_form_coefficients(RuleFamily::Ub2d, &upper(&[2, 3])).unwrap();
        assert_eq!(brady, coeffs(&[(1, 1), (-2, 3), (1, 3)]));
        let ub4 = closed_form_coefficients(RuleFamily::Ub4d, &upper(&[2, 3, 2, 3])).unwrap();
        assert_eq!(ub4, coeffs(&[(1, 1), (-8, 9), (7, 9), (-2, 3), (2, 3)]));
        let lb3 = closed_form_coefficients(RuleFamily::Lb3d, &lower(&[1, 2, 3])).unwrap();
        assert_eq!(lb3, coeffs(&[(1, 1), (-1, 1), (1, 1), (-1, 1)]));
        let ub3 = closed_form_coefficients(RuleFamily::UbK(3), &upper(&[2, 3])).unwrap();
        assert_eq!(ub3, brady);
    }

    #[test]
    fn identities_hold_at_base_params() {
        for fam in RuleFamily::searchable() {
            assert!(verify_identity(fam, &fam.base_params().unwrap()).unwrap(), "{fam}");
        }
        for k in [3, 5, 7, 9, 11] {
            let fam = RuleFamily::UbK(k);
            assert!(verify_identity(fam, &fam.base_params().unwrap()).unwrap());
        }
    }

    #[test]
    fn arity_and_kind_are_checked() {
        assert!(matches!(
            closed_form_coefficients(RuleFamily::Ub4d, &upper(&[2, 3])),
            Err(CombError::Arity { expected: 4, got: 2, .. })
        ));
        assert!(matches!(
            closed_form_coefficients(RuleFamily::Lb3d, &upper(&[1, 2, 3])),
            Err(CombError::KindMismatch { .. })
        ));
        assert!(matches!(
            ParamVector::new(RuleKind::Lower, ints(&[2, 2, 3])),
            Err(CombError::LeadingParameter(_))
        ));
        assert!(matches!(
            ParamVector::new(RuleKind::Upper, vec![int(2), ratio(-1, 2)]),
            Err(CombError::NonPositiveParameter(_))
        ));
    }

    #[test]
    fn family_names_round_trip() {
        for fam in [
            RuleFamily::UbK(3),
            RuleFamily::UbK(11),
            RuleFamily::Ub2d,
            RuleFamily::Ub4d,
            RuleFamily::Ub6d,
            RuleFamily::Lb3d,
            RuleFamily::Lb5d,
        ] {
            assert_eq!(fam.to_string().parse::<RuleFamily>().unwrap(), fam);
        }
        assert_eq!("ub_k=5".parse::<RuleFamily>().unwrap(), RuleFamily::UbK(5));
        assert_eq!("UB4".parse::<RuleFamily>(), Err(CombError::EvenK(4)));
        assert!("XB2".parse::<RuleFamily>().is_err());
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("7/2").unwrap(), ratio(7, 2));
        assert_eq!(parse_rational("2.25").unwrap(), ratio(9, 4));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    /// Stirling numbers of the second kind, `S(q, r)` for `q, r <= n`.
    fn stirling2(n: usize) -> Vec<Vec<BigInt>> {
        let mut s = vec![vec![BigInt::zero(); n + 1]; n + 1];
        s[0][0] = BigInt::one();
        for q in 1..=n {
            for r in 1..=q {
                s[q][r] = BigInt::from(r) * &s[q - 1][r] + &s[q - 1][r - 1];
            }
        }
        s
    }

    /// Monomial expansion of `prod (1 - n/m_i)` converted with `n^q = Σ_r S(q, r) r! C(n, r)`.
    fn stirling_coefficients(m: &[Rational]) -> Vec<Rational> {
        let k = m.len();
        let inv: Vec<Rational> = m.iter().map(|x| -x.recip()).collect();
        let st = stirling2(k);
        let mut fact = BigInt::one();
        let mut out = Vec::with_capacity(k + 1);
        for r in 0..=k {
            if r > 0 {
                fact *= BigInt::from(r);
            }
            let mut c = Rational::zero();
            for q in r..=k {
                c += elementary_symmetric(&inv, q).unwrap() * Rational::from_integer(&st[q][r] * &fact);
            }
            out.push(c);
        }
        out
    }

    #[test]
    fn expansion_matches_stirling_route() {
        let cases: Vec<Vec<Rational>> = vec![
            ints(&[2, 3]),
            ints(&[2, 3, 2, 3, 4, 5]),
            vec![ratio(1, 2), ratio(9, 4), ratio(5, 2)],
            vec![ratio(3, 7), int(2), ratio(11, 4), int(6), ratio(13, 2)],
            ints(&[2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
        ];
        for m in cases {
            assert_eq!(expand_to_binomial_basis(&m).unwrap().coeffs(), stirling_coefficients(&m).as_slice());
        }
    }

    mod props {
        use super::*;
        use crate::admissible::random_params;
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        fn family_strategy() -> impl Strategy<Value = RuleFamily> {
            prop_oneof![
                Just(RuleFamily::Ub2d),
                Just(RuleFamily::Ub4d),
                Just(RuleFamily::Ub6d),
                Just(RuleFamily::Lb3d),
                Just(RuleFamily::Lb5d),
                (1u32..6).prop_map(|h| RuleFamily::UbK(2 * h + 1)),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn closed_forms_reproduce_the_product(fam in family_strategy(), seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = random_params(fam, &mut rng, 16, 9);
                let c = closed_form_coefficients(fam, &p).unwrap();
                let k = p.len() as u64;
                for n in 0..=3 * k {
                    prop_assert_eq!(c.eval_at(n), product_at(p.values(), n).unwrap());
                }
                prop_assert_eq!(&c, &expand_to_binomial_basis(p.values()).unwrap());
                let prod = p.values().iter().fold(Rational::one(), |acc, x| acc * x);
                let mut lead = Rational::from_integer((1..=k).map(BigInt::from).product::<BigInt>()) / prod;
                if k % 2 == 1 {
                    lead = -lead;
                }
                prop_assert_eq!(&c.coeffs()[k as usize], &lead);
            }
        }
    }
}

