//! Executable aggregation mechanisms and their exact output laws.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Pmf, ProbVector};
use crate::error::{domain, Result};
use crate::gammas::NoiseFn;
use crate::scalar::{half, Scalar};

/// Observed outputs `S_1..S_K` of the `K` mechanisms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSet {
    bits: Vec<u8>,
}

impl OutcomeSet {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() || bits.len() % 2 == 0 {
            return domain(format!("need an odd number of outcomes, got {}", bits.len()));
        }
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return domain(format!("outcome {i} is not a bit: {}", bits[i]));
        }
        Ok(Self { bits })
    }

    /// `K` outcomes of which the first `l` are ones.
    pub fn with_sum(k: usize, l: usize) -> Result<Self> {
        if l > k {
            return domain(format!("sum {l} exceeds K = {k}"));
        }
        Self::new((0..k).map(|i| u8::from(i < l)).collect())
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// `L = Σ S_i`.
    pub fn sum(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn majority(&self) -> u8 {
        u8::from(2 * self.sum() > self.k())
    }
}

/// A seed plus stream id for the pinned ChaCha20 generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Trials per shard. Shard `i` draws from stream `i`, so results do not
/// depend on how many threads run the shards.
pub const SHARD: u64 = 8192;

pub(crate) fn sharded<R, I, F, M>(count: u64, seed: u64, init: I, body: F, merge: M) -> R
where
    R: Send,
    I: Fn() -> R + Sync,
    F: Fn(&mut ChaCha20Rng, &mut R, u64) + Sync,
    M: Fn(R, R) -> R,
{
    let shards = count.div_ceil(SHARD);
    let parts: Vec<R> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngSeed::new(seed, s).rng();
            let mut acc = init();
            for t in s * SHARD..((s + 1) * SHARD).min(count) {
                body(&mut rng, &mut acc, t);
            }
            acc
        })
        .collect();
    parts.into_iter().reduce(merge).unwrap_or_else(init)
}

fn fair_coin<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    u8::from(rng.gen::<bool>())
}

fn check_k(g: &NoiseFn<f64>, s: &OutcomeSet) -> Result<()> {
    if g.k() != s.k() {
        return domain(format!("gamma has K = {} but there are {} outcomes", g.k(), s.k()));
    }
    Ok(())
}

/// One step of DaRRM, reporting whether the fair coin was used.
pub fn darrm_run_traced<R: Rng + ?Sized>(g: &NoiseFn<f64>, s: &OutcomeSet, rng: &mut R) -> Result<(u8, bool)> {
    check_k(g, s)?;
    if rng.gen::<f64>() < g.get(s.sum()) {
        Ok((s.majority(), false))
    } else {
        Ok((fair_coin(rng), true))
    }
}

/// With probability `γ(L)` release the majority, otherwise a fair coin.
pub fn darrm_run<R: Rng + ?Sized>(g: &NoiseFn<f64>, s: &OutcomeSet, rng: &mut R) -> Result<u8> {
    darrm_run_traced(g, s, rng).map(|(b, _)| b)
}

/// `Pr[DaRRM_γ = 1] = Σ_l (γ(l)·1{l > K/2} + (1 − γ(l))/2)·α_l`.
pub fn darrm_output_prob<T: Scalar>(g: &NoiseFn<T>, alpha: &Pmf<T>) -> Result<T> {
    if g.k() != alpha.k() {
        return domain(format!("gamma has K = {} but the pmf has K = {}", g.k(), alpha.k()));
    }
    let k = g.k();
    Ok(g.values().iter().zip(alpha.mass()).enumerate().fold(T::zero(), |acc, (l, (v, a))| {
        let coin = half::<T>() * (T::one() - v.clone());
        let keep = if 2 * l > k { v.clone() } else { T::zero() };
        acc + (keep + coin) * a.clone()
    }))
}

/// Majority of `m` outcomes drawn without replacement; ties go to a fair
/// coin.
pub fn subsample_majority<R: Rng + ?Sized>(s: &OutcomeSet, m: usize, rng: &mut R) -> Result<u8> {
    if m == 0 || m > s.k() {
        return domain(format!("m must lie in 1..={}, got {m}", s.k()));
    }
    let ones: usize = sample(rng, s.k(), m).iter().map(|i| s.bits[i] as usize).sum();
    Ok(match (2 * ones).cmp(&m) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => fair_coin(rng),
    })
}

/// Randomized response on the majority with a fixed release probability.
pub fn rr_majority<R: Rng + ?Sized>(p_const: f64, s: &OutcomeSet, rng: &mut R) -> Result<u8> {
    if !(0.0..=1.0).contains(&p_const) {
        return domain(format!("p_const must lie in [0,1], got {p_const}"));
    }
    Ok(if rng.gen::<f64>() < p_const { s.majority() } else { fair_coin(rng) })
}

/// Draws `S_i ~ Bernoulli(p_i)` independently.
pub fn draw_outcomes<R: Rng + ?Sized>(p: &ProbVector<f64>, rng: &mut R) -> OutcomeSet {
    OutcomeSet { bits: p.values().iter().map(|&pi| u8::from(rng.gen::<f64>() < pi)).collect() }
}

/// Runs `trials` rounds of drawing outcomes from `p` and applying DaRRM;
/// returns the number of ones released.
pub fn simulate_darrm(g: &NoiseFn<f64>, p: &ProbVector<f64>, trials: u64, seed: u64) -> Result<u64> {
    if g.k() != p.k() {
        return domain(format!("gamma has K = {} but p has {} entries", g.k(), p.k()));
    }
    Ok(sharded(
        trials,
        seed,
        || 0u64,
        |rng, acc, _| {
            let s = draw_outcomes(p, rng);
            *acc += u64::from(darrm_run(g, &s, rng).expect("sizes checked"));
        },
        |a, b| a + b,
    ))
}

/// Same draws as [`simulate_darrm`], written as CSV rows
/// `trial,L,coin,output` where `coin` is 1 when the fair coin was released.
pub fn simulate_darrm_trace<W: Write>(
    g: &NoiseFn<f64>,
    p: &ProbVector<f64>,
    trials: u64,
    seed: u64,
    mut out: W,
) -> Result<u64> {
    if g.k() != p.k() {
        return domain(format!("gamma has K = {} but p has {} entries", g.k(), p.k()));
    }
    writeln!(out, "trial,L,coin,output")?;
    let mut ones = 0;
    for s in 0..trials.div_ceil(SHARD) {
        let mut rng = RngSeed::new(seed, s).rng();
        for t in s * SHARD..((s + 1) * SHARD).min(trials) {
            let o = draw_outcomes(p, &mut rng);
            let (b, coin) = darrm_run_traced(g, &o, &mut rng)?;
            ones += u64::from(b);
            writeln!(out, "{t},{},{},{b}", o.sum(), u8::from(coin))?;
        }
    }
    Ok(ones)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::dist::{hypergeom_majority_mass, poisson_binomial_pmf};
    use crate::gammas::{all_ones, all_zeros, gamma_const, gamma_sub};
    use proptest::prelude::*;

    fn rate(n: u64, f: impl Fn(&mut ChaCha20Rng) -> u8) -> f64 {
        let mut rng = RngSeed::new(7, 0).rng();
        (0..n).map(|_| f64::from(f(&mut rng))).sum::<f64>() / n as f64
    }

    fn within_3se(est: f64, p: f64, n: u64) {
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
        assert!((est - p).abs() <= 3.0 * se, "{est} vs {p}");
    }

    #[test]
    fn outcome_checks() {
        assert!(OutcomeSet::new(vec![1, 0]).is_err());
        assert!(OutcomeSet::new(vec![1, 2, 0]).is_err());
        let s = OutcomeSet::with_sum(5, 3).unwrap();
        assert_eq!((s.sum(), s.majority()), (3, 1));
    }

    #[test]
    fn extremes() {
        let mut rng = RngSeed::new(1, 0).rng();
        let s = OutcomeSet::new(vec![1, 0, 1, 1, 0]).unwrap();
        for _ in 0..100 {
            assert_eq!(darrm_run(&all_ones(5), &s, &mut rng).unwrap(), 1);
            assert_eq!(rr_majority(1.0, &s, &mut rng).unwrap(), 1);
            assert_eq!(subsample_majority(&s, 5, &mut rng).unwrap(), 1);
            let ones = OutcomeSet::with_sum(5, 5).unwrap();
            assert_eq!(subsample_majority(&ones, 2, &mut rng).unwrap(), 1);
        }
        within_3se(rate(100_000, |r| darrm_run(&all_zeros(5), &s, r).unwrap()), 0.5, 100_000);
        within_3se(rate(100_000, |r| rr_majority(0.0, &s, r).unwrap()), 0.5, 100_000);
        assert!(darrm_run(&all_ones(3), &s, &mut rng).is_err());
    }

    #[test]
    fn darrm_conditional_law() {
        let g = gamma_sub::<f64>(5, 3).unwrap();
        let s = OutcomeSet::with_sum(5, 4).unwrap();
        let want = g.get(4) + (1.0 - g.get(4)) / 2.0;
        within_3se(rate(1_000_000, |r| darrm_run(&g, &s, r).unwrap()), want, 1_000_000);
    }

    #[test]
    fn submaj_law() {
        let s = OutcomeSet::with_sum(5, 3).unwrap();
        let want: f64 = hypergeom_majority_mass(3, 5, 3).unwrap();
        assert!((want - 0.7).abs() < 1e-15);
        within_3se(rate(200_000, |r| subsample_majority(&s, 3, r).unwrap()), 0.7, 200_000);
        let even = OutcomeSet::with_sum(5, 2).unwrap();
        let want: f64 = hypergeom_majority_mass(2, 5, 2).unwrap();
        within_3se(rate(200_000, |r| subsample_majority(&even, 2, r).unwrap()), want, 200_000);
    }

    #[test]
    fn rr_law() {
        let s = OutcomeSet::with_sum(7, 5).unwrap();
        within_3se(rate(1_000_000, |r| rr_majority(0.3, &s, r).unwrap()), 0.65, 1_000_000);
    }

    #[test]
    fn output_prob_extremes() {
        let pmf = poisson_binomial_pmf(&ProbVector::new(vec![0.2, 0.9, 0.6]).unwrap()).unwrap();
        let maj: f64 = pmf.mass()[2..].iter().sum();
        assert!((darrm_output_prob(&all_ones(3), &pmf).unwrap() - maj).abs() < 1e-15);
        assert!((darrm_output_prob(&all_zeros(3), &pmf).unwrap() - 0.5).abs() < 1e-15);
        assert!(darrm_output_prob(&all_ones(5), &pmf).is_err());
    }

    #[test]
    fn rr_is_constant_darrm() {
        let pmf = poisson_binomial_pmf(&ProbVector::new(vec![0.2, 0.9, 0.6, 0.4, 0.7]).unwrap()).unwrap();
        let g = gamma_const(5, 0.3).unwrap();
        let maj: f64 = pmf.mass()[3..].iter().sum();
        assert!((darrm_output_prob(&g, &pmf).unwrap() - (0.3 * maj + 0.35)).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_reproducible() {
        let g = gamma_sub::<f64>(7, 3).unwrap();
        let p = ProbVector::new(vec![0.1, 0.5, 0.9, 0.3, 0.7, 0.6, 0.2]).unwrap();
        let a = simulate_darrm(&g, &p, 50_000, 11).unwrap();
        let b = simulate_darrm(&g, &p, 50_000, 11).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        let c = simulate_darrm_trace(&g, &p, 50_000, 11, &mut buf).unwrap();
        assert_eq!(a, c);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("trial,L,coin,output\n0,"));
        assert_eq!(text.lines().count(), 50_001);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert_eq!(pool.install(|| simulate_darrm(&g, &p, 50_000, 11).unwrap()), a);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = RngSeed::new(3, 0).rng().gen();
        let b: u64 = RngSeed::new(3, 1).rng().gen();
        assert_ne!(a, b);
        assert_eq!(a, RngSeed::new(3, 0).rng().gen::<u64>());
    }

    proptest! {
        #[test]
        fn output_prob_is_affine_and_monotone(
            v in prop::collection::vec(0.0..=1.0f64, 4),
            p in prop::collection::vec(0.5..=1.0f64, 7),
            l in 4usize..8, bump in 0.0..=1.0f64,
        ) {
            let vals = vec![v[0], v[1], v[2], v[3], v[3], v[2], v[1], v[0]];
            let g = NoiseFn::new(7, vals.clone()).unwrap();
            let pmf = poisson_binomial_pmf(&ProbVector::new(p).unwrap()).unwrap();
            let mut up = vals;
            let nv = up[l] + bump * (1.0 - up[l]);
            up[l] = nv;
            up[7 - l] = nv;
            let g2 = NoiseFn::new(7, up).unwrap();
            let (a, b) = (darrm_output_prob(&g, &pmf).unwrap(), darrm_output_prob(&g2, &pmf).unwrap());
            if pmf.get(l) >= pmf.get(7 - l) {
                prop_assert!(b >= a - 1e-15);
            }
            let slope = 0.5 * (pmf.get(l) - pmf.get(7 - l));
            prop_assert!((b - a - slope * (nv - g.get(l))).abs() < 1e-12);
        }
    }
}
