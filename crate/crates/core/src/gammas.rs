//! Noise functions `γ: {0..K} → [0,1]` and their closed-form constructors.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{binom, hypergeom_majority_mass, ln_binom, EXACT_BINOM_MAX_N};
use crate::error::{domain, DarrmError, Result};
use crate::scalar::{lit, Real, Scalar};

const SYMMETRY_TOL: f64 = 1e-12;

/// A noise function over the vote count support `{0..K}`.
///
/// Construction only checks the shape (`K` odd, `K + 1` values); the range
/// and symmetry invariants are checked by [`NoiseFn::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseFn<T> {
    k: usize,
    values: Vec<T>,
}

/// First invariant broken by a noise function.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Range { index: usize, value: f64 },
    Symmetry { index: usize, value: f64, mirror: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Range { index, value } => {
                write!(f, "range violation at l={index}: gamma = {value} is outside [0,1]")
            }
            Violation::Symmetry { index, value, mirror } => write!(
                f,
                "symmetry violation at l={index}: gamma(l) = {value} but gamma(K-l) = {mirror}"
            ),
        }
    }
}

impl<T: Scalar> NoiseFn<T> {
    pub fn new(k: usize, values: Vec<T>) -> Result<Self> {
        check_k(k)?;
        if values.len() != k + 1 {
            return domain(format!("K = {k} needs {} values, got {}", k + 1, values.len()));
        }
        Ok(Self { k, values })
    }

    /// [`NoiseFn::new`] followed by [`NoiseFn::validate`].
    pub fn checked(k: usize, values: Vec<T>) -> Result<Self> {
        let g = Self::new(k, values)?;
        g.ensure_valid()?;
        Ok(g)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, l: usize) -> T {
        self.values[l].clone()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    /// Range is checked over every index before symmetry.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        let f = |x: &T| x.to_f64().unwrap_or(f64::NAN);
        for (index, v) in self.values.iter().enumerate() {
            if !(*v >= T::zero() && *v <= T::one()) {
                return Err(Violation::Range { index, value: f(v) });
            }
        }
        let tol: T = lit(SYMMETRY_TOL);
        for index in 0..=self.k / 2 {
            let (a, b) = (&self.values[index], &self.values[self.k - index]);
            let d = if a > b { a.clone() - b.clone() } else { b.clone() - a.clone() };
            if d > tol {
                return Err(Violation::Symmetry { index, value: f(a), mirror: f(b) });
            }
        }
        Ok(())
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(|v| DarrmError::Domain(v.to_string()))
    }

    /// Non-increasing on `l ≤ (K-1)/2` and non-decreasing on `l ≥ (K+1)/2`.
    pub fn is_monotone(&self) -> bool {
        let tol: T = lit(SYMMETRY_TOL);
        let h = self.k / 2;
        let lower = (0..h).all(|l| self.values[l + 1] <= self.values[l].clone() + tol.clone());
        let upper = (h + 1..self.k).all(|l| self.values[l] <= self.values[l + 1].clone() + tol.clone());
        lower && upper
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> NoiseFn<U> {
        NoiseFn { k: self.k, values: self.values.iter().map(f).collect() }
    }
}

impl NoiseFn<f64> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s)?;
        g.ensure_valid()?;
        Ok(g)
    }

    pub fn from_reader(r: impl Read) -> Result<Self> {
        let g: Self = serde_json::from_reader(r)?;
        g.ensure_valid()?;
        Ok(g)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("noise functions always serialize")
    }

    pub fn to_writer(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawNoiseFn<T> {
    #[serde(rename = "K")]
    k: usize,
    values: Vec<T>,
}

impl<T: Serialize + Clone> Serialize for NoiseFn<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawNoiseFn { k: self.k, values: self.values.clone() }.serialize(s)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for NoiseFn<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNoiseFn::<T>::deserialize(d)?;
        NoiseFn::new(raw.k, raw.values).map_err(serde::de::Error::custom)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return domain(format!("K must be odd and positive, got {k}"));
    }
    Ok(())
}

fn check_m(k: usize, m: usize) -> Result<()> {
    check_k(k)?;
    if m == 0 || m > k {
        return domain(format!("m must lie in 1..={k}, got {m}"));
    }
    Ok(())
}

/// Converts a real allowance to the integer subsample count the closed-form
/// constructors need, rejecting non-integers.
pub fn integer_allowance(m: f64) -> Result<usize> {
    if !(m.is_finite() && m >= 1.0 && m.fract() == 0.0) {
        return domain(format!("m must be a positive integer here, got {m}"));
    }
    Ok(m as usize)
}

fn mirrored<T: Scalar>(k: usize, lower: impl Fn(usize) -> Result<T>) -> Result<NoiseFn<T>> {
    let h = k / 2;
    let half: Vec<T> = (0..=h).map(lower).collect::<Result<_>>()?;
    let values = (0..=k).map(|l| half[l.min(k - l)].clone()).collect();
    NoiseFn::new(k, values)
}

/// Noise function of majority-of-`m`-subsampled mechanisms.
pub fn gamma_sub<T: Scalar>(k: usize, m: usize) -> Result<NoiseFn<T>> {
    check_m(k, m)?;
    let two = T::one() + T::one();
    mirrored(k, |l| Ok(T::one() - two.clone() * hypergeom_majority_mass::<T>(l, k, m)?))
}

/// Double-subsampling noise function, which is `mε`-DP for `m ≥ 1`.
pub fn gamma_dsub<T: Scalar>(k: usize, m: usize) -> Result<NoiseFn<T>> {
    check_m(k, m)?;
    if 2 * m > k {
        return Ok(all_ones(k));
    }
    let s = 2 * m - 1;
    let den: T = binom(k, s);
    let terms = |l: usize| (m..=s.min(l)).filter(move |&i| s - i <= k - l);
    let h = |l: usize| {
        if k <= EXACT_BINOM_MAX_N {
            terms(l).fold(T::zero(), |acc, i| acc + binom::<T>(l, i) * binom::<T>(k - l, s - i)) / den.clone()
        } else {
            let ln_den = ln_binom(k, s);
            let mass: f64 = terms(l).map(|i| (ln_binom(l, i) + ln_binom(k - l, s - i) - ln_den).exp()).sum();
            T::from_f64(mass.min(1.0)).unwrap()
        }
    };
    let two = T::one() + T::one();
    let upper: Vec<T> = (k / 2 + 1..=k)
        .map(|l| {
            let v = two.clone() * h(l) - T::one();
            if v < T::zero() { T::zero() } else { v }
        })
        .collect();
    let values = (0..=k).map(|l| upper[l.max(k - l) - k / 2 - 1].clone()).collect();
    NoiseFn::new(k, values)
}

pub fn gamma_const<T: Scalar>(k: usize, p_const: T) -> Result<NoiseFn<T>> {
    check_k(k)?;
    if !(p_const >= T::zero() && p_const <= T::one()) {
        return domain(format!("p_const must lie in [0,1], got {p_const:?}"));
    }
    NoiseFn::new(k, vec![p_const; k + 1])
}

/// Always release the true majority.
pub fn all_ones<T: Scalar>(k: usize) -> NoiseFn<T> {
    NoiseFn { k, values: vec![T::one(); k + 1] }
}

/// Always release a fair coin.
pub fn all_zeros<T: Scalar>(k: usize) -> NoiseFn<T> {
    NoiseFn { k, values: vec![T::zero(); k + 1] }
}

/// Privacy of the composed majority that randomized response starts from:
/// `(τε, λ)`-DP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrParams<T> {
    pub tau: T,
    pub lambda: T,
}

impl<T: Scalar> RrParams<T> {
    pub fn new(tau: T, lambda: T) -> Result<Self> {
        if !(tau >= T::one()) {
            return domain(format!("tau must be at least 1, got {tau:?}"));
        }
        if !(lambda >= T::zero() && lambda < T::one()) {
            return domain(format!("lambda must lie in [0,1), got {lambda:?}"));
        }
        Ok(Self { tau, lambda })
    }

    pub fn check_for(&self, k: usize) -> Result<()> {
        if self.tau > T::from_usize(k).unwrap() {
            return domain(format!("tau {:?} exceeds K = {k}", self.tau));
        }
        Ok(())
    }
}

/// Output probability of the true majority under randomized response that
/// turns a `(τε, λ)`-DP majority into an `(mε, δ)`-DP one.
pub fn compute_p_const<T: Real>(eps: T, m: T, delta: T, rr: RrParams<T>) -> Result<T> {
    if !(eps > T::zero()) {
        return domain(format!("eps must be positive, got {eps:?}"));
    }
    if !(m >= T::one()) {
        return domain(format!("m must be at least 1, got {m:?}"));
    }
    if !(delta >= T::zero() && delta < T::one()) {
        return domain(format!("delta must lie in [0,1), got {delta:?}"));
    }
    let rr = RrParams::new(rr.tau, rr.lambda)?;
    let one = T::one();
    let two = one + one;
    let em = (m * eps).exp();
    let et = (rr.tau * eps).exp();
    let num = em - one + two * delta;
    let den = two * (et - em + (one + em) * rr.lambda) / (et + one) + em - one;
    if !(den > T::zero()) {
        return Err(DarrmError::Infeasible(format!(
            "randomized response denominator is {den:?}; no p_const exists"
        )));
    }
    Ok((num / den).max(T::zero()).min(one))
}
