use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::scalar::Real;

/// Vertices of the region of `(p, p')` pairs a single `(ε, Δ)`-DP mechanism
/// can produce on adjacent datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerSet<T> {
    pub pairs: Vec<(T, T)>,
    /// Set when `ε = 0`, where the region collapses to the diagonal.
    pub degenerate: bool,
}

impl<T> CornerSet<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The eight corners, with coincident ones removed (four remain at `Δ = 0`).
pub fn corner_set<T: Real>(eps: T, delta_mech: T) -> Result<CornerSet<T>> {
    if !(eps >= T::zero() && eps.is_finite()) {
        return domain(format!("eps must be non-negative and finite, got {eps:?}"));
    }
    if !(delta_mech >= T::zero() && delta_mech < T::one()) {
        return domain(format!("Delta must lie in [0,1), got {delta_mech:?}"));
    }
    let (zero, one, d) = (T::zero(), T::one(), delta_mech);
    let e = eps.exp();
    let hi = (e + d) / (e + one);
    let lo = (one - d) / (e + one);
    let raw = [
        (zero, zero),
        (one, one),
        (zero, d),
        (d, zero),
        (one - d, one),
        (one, one - d),
        (hi, lo),
        (lo, hi),
    ];
    let mut pairs: Vec<(T, T)> = Vec::with_capacity(raw.len());
    for c in raw {
        if !pairs.contains(&c) {
            pairs.push(c);
        }
    }
    Ok(CornerSet { pairs, degenerate: eps == zero })
}

/// `C(K + c − 1, K)`, the number of size-`K` multisets over `c` corners.
pub fn multiset_count(k: usize, c: usize) -> u64 {
    if c == 0 {
        return u64::from(k == 0);
    }
    let n = k + c - 1;
    let r = (c - 1).min(k);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).unwrap_or(u64::MAX)
}

/// Size-`K` multisets of corner indices as non-decreasing index vectors, in
/// lexicographic order.
#[derive(Clone, Debug)]
pub struct ConstraintMultisets {
    c: usize,
    next: Option<Vec<usize>>,
}

pub fn constraint_multisets(k: usize, c: usize) -> ConstraintMultisets {
    ConstraintMultisets { c, next: (c > 0).then(|| vec![0; k]) }
}

impl Iterator for ConstraintMultisets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        if let Some(i) = succ.iter().rposition(|&j| j + 1 < self.c) {
            let v = succ[i] + 1;
            succ[i..].iter_mut().for_each(|x| *x = v);
            self.next = Some(succ);
        }
        Some(cur)
    }
}

fn extend<T: Real>(bufs: &mut [Vec<T>], d: usize, p: T) {
    let (head, tail) = bufs.split_at_mut(d + 1);
    let (src, dst) = (&head[d], &mut tail[0]);
    let q = T::one() - p;
    dst.clear();
    dst.push(src[0] * q);
    for i in 1..src.len() {
        dst.push(src[i] * q + src[i - 1] * p);
    }
    dst.push(src[src.len() - 1] * p);
}

struct Walk<'a, T, R, V> {
    k: usize,
    corners: &'a [(T, T)],
    idx: Vec<usize>,
    a: Vec<Vec<T>>,
    b: Vec<Vec<T>>,
    counter: u64,
    visit: &'a V,
    _r: std::marker::PhantomData<R>,
}

impl<T: Real, R, V> Walk<'_, T, R, V>
where
    V: Fn(&mut R, u64, &[usize], &[T], &[T]),
{
    fn run(&mut self, depth: usize, start: usize, state: &mut R) {
        if depth == self.k {
            (self.visit)(state, self.counter, &self.idx, &self.a[depth], &self.b[depth]);
            self.counter += 1;
            return;
        }
        for j in start..self.corners.len() {
            self.idx[depth] = j;
            extend(&mut self.a, depth, self.corners[j].0);
            extend(&mut self.b, depth, self.corners[j].1);
            self.run(depth + 1, j, state);
        }
    }
}

/// Visits every corner multiset with the pmfs `α` (first coordinates) and
/// `α'` (second coordinates) of its vote count, in the order of
/// [`constraint_multisets`]. Each visit gets the multiset's global index.
///
/// Work is split over short index prefixes and run on the rayon pool; the
/// per-prefix accumulators are merged left to right, so any order-sensitive
/// `merge` sees the same sequence whatever the thread count.
pub fn fold_multisets<T, R, I, V, M>(k: usize, corners: &[(T, T)], init: I, visit: V, merge: M) -> R
where
    T: Real,
    R: Send,
    I: Fn() -> R + Sync,
    V: Fn(&mut R, u64, &[usize], &[T], &[T]) + Sync,
    M: Fn(R, R) -> R,
{
    let c = corners.len();
    let depth = k.min(2);
    let prefixes: Vec<Vec<usize>> = constraint_multisets(depth, c).collect();
    let mut offsets = Vec::with_capacity(prefixes.len());
    let mut acc = 0u64;
    for p in &prefixes {
        offsets.push(acc);
        let last = p.last().copied().unwrap_or(0);
        acc += multiset_count(k - depth, c - last);
    }
    let parts: Vec<R> = prefixes
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(prefix, &offset)| {
            let mut walk = Walk {
                k,
                corners,
                idx: vec![0; k],
                a: (0..=k).map(|d| Vec::with_capacity(d + 1)).collect(),
                b: (0..=k).map(|d| Vec::with_capacity(d + 1)).collect(),
                counter: offset,
                visit: &visit,
                _r: std::marker::PhantomData,
            };
            walk.a[0].push(T::one());
            walk.b[0].push(T::one());
            for (d, &j) in prefix.iter().enumerate() {
                walk.idx[d] = j;
                extend(&mut walk.a, d, corners[j].0);
                extend(&mut walk.b, d, corners[j].1);
            }
            let mut state = init();
            walk.run(depth, prefix.last().copied().unwrap_or(0), &mut state);
            state
        })
        .collect();
    parts.into_iter().reduce(merge).unwrap_or_else(init)
}
