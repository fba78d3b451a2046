use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Union of disjoint subintervals of `[0,1]`; each `p_i` is drawn uniformly
/// from it. Zero-width intervals are point masses, used only when every
/// interval has zero width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Prior {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for Prior {
    type Error = crate::DarrmError;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Prior::new(v)
    }
}

impl From<Prior> for Vec<(f64, f64)> {
    fn from(p: Prior) -> Self {
        p.intervals
    }
}

impl Prior {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return domain("a prior needs at least one interval");
        }
        for &(lo, hi) in &intervals {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return domain(format!("interval [{lo}, {hi}] is not inside [0,1]"));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if intervals.windows(2).any(|w| w[1].0 < w[0].1 || w[1] == w[0]) {
            return domain("prior intervals overlap");
        }
        Ok(Self { intervals })
    }

    pub fn uniform() -> Self {
        Self { intervals: vec![(0.0, 1.0)] }
    }

    pub fn point(p: f64) -> Result<Self> {
        Self::new(vec![(p, p)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Whether the set is its own mirror image under `p ↦ 1 − p`.
    pub fn is_symmetric(&self) -> bool {
        let mut mirror: Vec<(f64, f64)> = self.intervals.iter().map(|&(a, b)| (1.0 - b, 1.0 - a)).collect();
        mirror.sort_by(|a, b| a.0.total_cmp(&b.0));
        mirror.iter().zip(&self.intervals).all(|(x, y)| (x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        locate(&self.intervals, rng.gen::<f64>())
    }

    /// Part of the prior at or above one half.
    pub fn upper_region(&self) -> Result<Vec<(f64, f64)>> {
        let up: Vec<(f64, f64)> =
            self.intervals.iter().filter(|(_, b)| *b >= 0.5).map(|&(a, b)| (a.max(0.5), b)).collect();
        if up.is_empty() {
            return domain("the prior puts no mass at or above 0.5");
        }
        Ok(up)
    }

    /// `τ` left endpoints of equal-measure cells covering the upper region;
    /// for the uniform prior these are `0.5 + i·0.5/τ`.
    pub fn upper_grid(&self, tau: usize) -> Result<Vec<f64>> {
        if tau == 0 {
            return domain("tau must be positive");
        }
        let up = self.upper_region()?;
        Ok((0..tau).map(|i| locate(&up, i as f64 / tau as f64)).collect())
    }
}

/// Maps `u ∈ [0,1)` to the point at measure fraction `u` of the union.
fn locate(intervals: &[(f64, f64)], u: f64) -> f64 {
    let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    if total <= 0.0 {
        let i = ((u * intervals.len() as f64) as usize).min(intervals.len() - 1);
        return intervals[i].0;
    }
    let mut left = u * total;
    for &(a, b) in intervals {
        let w = b - a;
        if left < w {
            return a + left;
        }
        left -= w;
    }
    intervals.iter().rev().find(|(a, b)| b > a).map(|x| x.1).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::RngSeed;

    #[test]
    fn construction() {
        assert!(Prior::new(vec![]).is_err());
        assert!(Prior::new(vec![(0.2, 0.1)]).is_err());
        assert!(Prior::new(vec![(0.0, 0.5), (0.4, 1.0)]).is_err());
        let p = Prior::new(vec![(0.7, 1.0), (0.0, 0.3)]).unwrap();
        assert_eq!(p.intervals(), &[(0.0, 0.3), (0.7, 1.0)]);
        assert!(p.is_symmetric());
        assert!(!Prior::new(vec![(0.0, 0.2)]).unwrap().is_symmetric());
        assert!(Prior::point(1.0).is_ok());
    }

    #[test]
    fn grids() {
        let g = Prior::uniform().upper_grid(50).unwrap();
        assert_eq!(g.len(), 50);
        for (i, x) in g.iter().enumerate() {
            assert!((x - (0.5 + i as f64 * 0.01)).abs() < 1e-15);
        }
        let split = Prior::new(vec![(0.0, 0.3), (0.7, 1.0)]).unwrap().upper_grid(3).unwrap();
        assert!((split[0] - 0.7).abs() < 1e-15 && (split[2] - 0.9).abs() < 1e-12);
        assert_eq!(Prior::point(1.0).unwrap().upper_grid(4).unwrap(), vec![1.0; 4]);
        assert!(Prior::new(vec![(0.0, 0.3)]).unwrap().upper_grid(4).is_err());
    }

    #[test]
    fn samples_stay_inside() {
        let p = Prior::new(vec![(0.0, 0.3), (0.7, 1.0)]).unwrap();
        let mut rng = RngSeed::new(0, 0).rng();
        let xs: Vec<f64> = (0..10_000).map(|_| p.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| (0.0..=0.3).contains(x) || (0.7..=1.0).contains(x)));
        let low = xs.iter().filter(|x| **x < 0.5).count() as f64 / 1e4;
        assert!((low - 0.5).abs() < 0.03);
        assert_eq!(Prior::point(0.5).unwrap().sample(&mut rng), 0.5);
    }

    #[test]
    fn json_shape() {
        let p: Prior = serde_json::from_str("[[0,0.3],[0.7,1]]").unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[[0.0,0.3],[0.7,1.0]]");
        assert!(serde_json::from_str::<Prior>("[[0.5,0.2]]").is_err());
    }
}
