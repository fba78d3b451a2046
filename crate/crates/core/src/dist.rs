//! Exact masses over vote counts: Binomial, Poisson-Binomial and the
//! hypergeometric majority mass used by subsampling.

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// Largest population for which binomial coefficients are formed in exact
/// integer arithmetic. Above it they come from `lgamma`.
pub const EXACT_BINOM_MAX_N: usize = 60;

const NEG_CLAMP: f64 = 1e-15;
const SUM_TOL: f64 = 1e-10;

/// Per-mechanism probabilities `p_i = Pr[M_i(D) = 1]` for an odd number of
/// mechanisms.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() || values.len() % 2 == 0 {
            return domain(format!(
                "a probability vector needs an odd positive length, got {}",
                values.len()
            ));
        }
        check_probs(&values)?;
        Ok(Self { values })
    }

    /// `K` copies of the same probability.
    pub fn iid(k: usize, p: T) -> Result<Self> {
        Self::new(vec![p; k])
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }
}

/// Mass function `α_0..α_K` of the vote count `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf<T> {
    mass: Vec<T>,
}

impl<T: Scalar> Pmf<T> {
    /// Checks the simplex invariants. Entries in `[-1e-15, 0)` are clamped to
    /// zero; anything more negative, or a total off by more than `1e-10`, is
    /// rejected.
    pub fn new(mut mass: Vec<T>) -> Result<Self> {
        if mass.is_empty() {
            return domain("a pmf needs at least one entry");
        }
        let floor = T::zero() - T::from_f64(NEG_CLAMP).unwrap();
        let mut total = T::zero();
        for (l, a) in mass.iter_mut().enumerate() {
            if *a < T::zero() {
                if *a < floor {
                    return domain(format!("pmf entry {l} is negative: {a:?}"));
                }
                *a = T::zero();
            }
            total = total + a.clone();
        }
        let tol = T::from_f64(SUM_TOL).unwrap();
        if total.clone() < T::one() - tol.clone() || total.clone() > T::one() + tol {
            return domain(format!("pmf sums to {total:?}"));
        }
        Ok(Self { mass })
    }

    /// Number of mechanisms, `len - 1`.
    pub fn k(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn get(&self, l: usize) -> T {
        self.mass[l].clone()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.mass
    }
}

fn check_probs<T: Scalar>(p: &[T]) -> Result<()> {
    for (i, x) in p.iter().enumerate() {
        // written so that NaN fails too
        if !(*x >= T::zero() && *x <= T::one()) {
            return domain(format!("probability {i} is outside [0,1]: {x:?}"));
        }
    }
    Ok(())
}

/// Raw Poisson-Binomial convolution over any number of trials, in the
/// order given.
pub fn convolve<T: Scalar>(p: &[T]) -> Vec<T> {
    let mut mass = Vec::with_capacity(p.len() + 1);
    mass.push(T::one());
    for pi in p {
        push_trial(&mut mass, pi.clone());
    }
    mass
}

/// Extends a pmf over `n` trials to one over `n + 1` trials in place.
pub fn push_trial<T: Scalar>(mass: &mut Vec<T>, p: T) {
    let q = T::one() - p.clone();
    mass.push(T::zero());
    for j in (1..mass.len()).rev() {
        mass[j] = mass[j].clone() * q.clone() + mass[j - 1].clone() * p.clone();
    }
    mass[0] = mass[0].clone() * q;
}

/// Distribution of `L = Σ_i Bernoulli(p_i)`.
///
/// The trials are convolved in ascending order of `p`, so the result is
/// bit-identical under any permutation of the input.
pub fn poisson_binomial_pmf<T: Scalar>(p: &ProbVector<T>) -> Result<Pmf<T>> {
    let mut sorted = p.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("validated probabilities"));
    Pmf::new(convolve(&sorted))
}

/// Same as [`poisson_binomial_pmf`] on an unchecked slice of any length.
pub fn poisson_binomial_slice<T: Scalar>(p: &[T]) -> Result<Pmf<T>> {
    check_probs(p)?;
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Pmf::new(convolve(&sorted))
}

/// `Binomial(K, p)` built from binomial coefficients.
pub fn binomial_pmf<T: Scalar>(k: usize, p: T) -> Result<Pmf<T>> {
    if k == 0 || k % 2 == 0 {
        return domain(format!("K must be odd and positive, got {k}"));
    }
    check_probs(std::slice::from_ref(&p))?;
    let q = T::one() - p.clone();
    let mass = (0..=k)
        .map(|l| binom::<T>(k, l) * num_traits::pow(p.clone(), l) * num_traits::pow(q.clone(), k - l))
        .collect();
    Pmf::new(mass)
}

/// Exact `C(n, k)`; `None` on overflow.
pub fn binom_u64(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as u64)
}

/// `ln C(n, k)`, or `-inf` when `k > n`.
pub fn ln_binom(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `C(n, k)` as a scalar: exact for `n ≤ 60`, log-space above.
pub fn binom<T: Scalar>(n: usize, k: usize) -> T {
    if n <= EXACT_BINOM_MAX_N {
        T::from_u64(binom_u64(n, k).unwrap()).unwrap()
    } else if k > n {
        T::zero()
    } else {
        T::from_f64(ln_binom(n, k).exp().round()).unwrap()
    }
}

/// Probability that the majority of `s` draws without replacement from a
/// population of `K` voters, `l` of whom vote 1, is 1. A tie (even `s`,
/// exactly `s/2` ones) counts one half.
pub fn hypergeom_majority_mass<T: Scalar>(l: usize, k: usize, s: usize) -> Result<T> {
    if k == 0 || k % 2 == 0 {
        return domain(format!("K must be odd and positive, got {k}"));
    }
    if l > k {
        return domain(format!("l = {l} exceeds K = {k}"));
    }
    if s == 0 || s > k {
        return domain(format!("subsample size must lie in 1..={k}, got {s}"));
    }
    let lo = s / 2 + 1;
    let tie = s % 2 == 0;
    if k <= EXACT_BINOM_MAX_N {
        // every term is at most C(K,s) ≤ C(60,30), so doubled sums fit in u64
        let term = |j: usize| binom_u64(l, j).unwrap() * binom_u64(k - l, s - j).unwrap();
        let mut num: u64 = (lo..=s.min(l)).map(|j| 2 * term(j)).sum();
        if tie {
            num += term(s / 2);
        }
        let den = 2 * binom_u64(k, s).unwrap();
        return Ok(T::from_u64(num).unwrap() / T::from_u64(den).unwrap());
    }
    let ln_den = ln_binom(k, s);
    let term = |j: usize| {
        if j > l || s - j > k - l {
            0.0
        } else {
            (ln_binom(l, j) + ln_binom(k - l, s - j) - ln_den).exp()
        }
    };
    let mut mass: f64 = (lo..=s.min(l)).map(term).sum();
    if tie {
        mass += 0.5 * term(s / 2);
    }
    Ok(T::from_f64(mass.min(1.0)).unwrap())
}
