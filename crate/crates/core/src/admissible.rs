//! Membership in the admissible parameter domain and sign certificates.
//!
//! A pair `(x1, x2)` is admissible when both entries lie in
//! `(0, 1] ∪ [2, 3] ∪ [4, 5] ∪ ...` and `|x1 - x2| <= 1`; such a pair keeps
//! `(1 - n/x1)(1 - n/x2) >= 0` at every positive integer `n`.
//!
//! [`certify_sign`] checks the product sign directly and never consults the
//! interval test, so the two can be cross-validated.

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exactcomb::{self, ratio, CombError, ParamVector, Rational, RuleFamily, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdmissibleError {
    #[error("parameter must be positive, got {0}")]
    NonPositive(String),
    #[error("{kind} configuration has arity {arity}; upper rules need an even count, lower rules an odd count led by m0")]
    Arity { kind: RuleKind, arity: usize },
    #[error(transparent)]
    Comb(#[from] CombError),
}

pub type Result<T> = std::result::Result<T, AdmissibleError>;

fn ensure_positive(x: &Rational) -> Result<()> {
    if x.is_positive() {
        Ok(())
    } else {
        Err(AdmissibleError::NonPositive(x.to_string()))
    }
}

/// `x ∈ (0, 1]` or `x ∈ [k-1, k]` for some odd `k >= 3`.
pub fn in_interval_set(x: &Rational) -> Result<bool> {
    ensure_positive(x)?;
    if *x <= Rational::one() {
        return Ok(true);
    }
    if x.is_integer() {
        // Every integer >= 2 is an endpoint of some [k-1, k].
        return Ok(true);
    }
    // Strictly inside (f, f+1): a member iff f = k - 1 is even.
    Ok(x.floor().to_integer().is_even())
}

pub fn pair_admissible(x1: &Rational, x2: &Rational) -> Result<bool> {
    let both = in_interval_set(x1)? && in_interval_set(x2)?;
    Ok(both && (x1 - x2).abs() <= Rational::one())
}

/// Consecutive disjoint pairs must be admissible; lower configurations carry
/// a leading `m0` in `(0, 1]`.
pub fn config_admissible(cfg: &ParamVector) -> Result<bool> {
    let m = cfg.values();
    for x in m {
        ensure_positive(x)?;
    }
    let pairs = match cfg.kind() {
        RuleKind::Upper => {
            if m.is_empty() || m.len() % 2 != 0 {
                return Err(AdmissibleError::Arity {
                    kind: cfg.kind(),
                    arity: m.len(),
                });
            }
            m
        }
        RuleKind::Lower => {
            if m.len() % 2 != 1 {
                return Err(AdmissibleError::Arity {
                    kind: cfg.kind(),
                    arity: m.len(),
                });
            }
            if m[0] > Rational::one() {
                return Ok(false);
            }
            &m[1..]
        }
    };
    for pair in pairs.chunks(2) {
        if !pair_admissible(&pair[0], &pair[1])? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ValidUpper,
    ValidLower,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignCertificate {
    pub config: ParamVector,
    pub checked_up_to: u64,
    pub asymptotic_sign: i8,
    pub verdict: Verdict,
    pub first_violation: Option<u64>,
    pub rationale: &'static str,
}

impl SignCertificate {
    pub fn matches_kind(&self) -> bool {
        matches!(
            (self.config.kind(), self.verdict),
            (RuleKind::Upper, Verdict::ValidUpper) | (RuleKind::Lower, Verdict::ValidLower)
        )
    }
}

const CERT_RATIONALE: &str = "values checked exactly for 1 <= n <= ceil(max m)+1; \
beyond max m every factor 1 - n/m_i is negative, so the sign is (-1)^arity";

/// Exact sign scan of `prod (1 - n/m_i)` over `1..=ceil(max m) + 1`, plus the
/// parity of the factor count for every larger `n`.
pub fn certify_sign(cfg: &ParamVector) -> Result<SignCertificate> {
    let m = cfg.values();
    for x in m {
        ensure_positive(x)?;
    }
    let max_m = m.iter().max().cloned().unwrap_or_else(Rational::zero);
    let n_max = max_m.ceil().to_integer().to_u64().unwrap_or(u64::MAX - 1) + 1;
    let asymptotic_sign: i8 = if m.len() % 2 == 0 { 1 } else { -1 };

    let mut first_violation = None;
    for n in 1..=n_max {
        let v = exactcomb::product_at(m, n)?;
        let bad = if asymptotic_sign > 0 {
            v.is_negative()
        } else {
            v.is_positive()
        };
        if bad {
            first_violation = Some(n);
            break;
        }
    }
    let verdict = match (first_violation, asymptotic_sign) {
        (None, 1) => Verdict::ValidUpper,
        (None, _) => Verdict::ValidLower,
        (Some(_), _) => Verdict::Invalid,
    };
    Ok(SignCertificate {
        config: cfg.clone(),
        checked_up_to: n_max,
        asymptotic_sign,
        verdict,
        first_violation,
        rationale: CERT_RATIONALE,
    })
}

/// Random rational in one interval of the admissible set, with denominator at
/// most `max_den` and right endpoint at most `max_odd_k`.
pub fn random_member<R: Rng + ?Sized>(rng: &mut R, max_den: i64, max_odd_k: i64) -> Rational {
    let intervals = (max_odd_k - 1) / 2 + 1;
    let which = rng.gen_range(0..intervals);
    let q = rng.gen_range(1..=max_den);
    if which == 0 {
        ratio(rng.gen_range(1..=q), q)
    } else {
        let left = 2 * which;
        ratio(left * q + rng.gen_range(0..=q), q)
    }
}

/// Random admissible pair by rejection on `|x1 - x2| <= 1`.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, max_den: i64, max_odd_k: i64) -> [Rational; 2] {
    loop {
        let a = random_member(rng, max_den, max_odd_k);
        let b = random_member(rng, max_den, max_odd_k);
        if (&a - &b).abs() <= Rational::one() {
            return [a, b];
        }
    }
}

/// Random admissible parameters for a family. `UB_k` has no free parameters.
pub fn random_params<R: Rng + ?Sized>(
    family: RuleFamily,
    rng: &mut R,
    max_den: i64,
    max_odd_k: i64,
) -> ParamVector {
    if let RuleFamily::UbK(_) = family {
        return family.base_params().expect("UB_k family carries an odd k");
    }
    let mut m: Vec<BigRational> = Vec::with_capacity(family.arity());
    if family.kind() == RuleKind::Lower {
        let q = rng.gen_range(1..=max_den);
        m.push(ratio(rng.gen_range(1..=q), q));
    }
    while m.len() < family.arity() {
        m.extend(random_pair(rng, max_den, max_odd_k));
    }
    ParamVector::new(family.kind(), m).expect("sampled parameters are positive")
}
