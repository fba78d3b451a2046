//! Dense primal simplex for small boxed linear programs.
//!
//! The problem is `max c·x` subject to `A x ≤ b` and `lo ≤ x ≤ hi`. Every
//! constraint, bounds included, is handled as a half-space `g·x ≤ h`; a
//! vertex is a set of `n` tight, independent half-spaces. Pivots drop the
//! tight constraint with the smallest id whose multiplier is negative and
//! admit the blocking constraint with the smallest id (Bland's rule).
//!
//! Several objectives can be given; they are optimized lexicographically,
//! which pins down a unique optimum among ties.

use serde::{Deserialize, Serialize};

use crate::error::{domain, DarrmError, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    /// Primary objective first, then tie-breakers.
    pub objectives: Vec<Vec<T>>,
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult<T> {
    pub x: Vec<T>,
    pub status: LpStatus,
    pub iterations: usize,
    /// Ids of the tight constraints at the final vertex: `0..m` are rows,
    /// `m + j` the upper bound and `m + n + j` the lower bound of `x_j`.
    pub active: Vec<usize>,
}

impl<T: Real> SimplexResult<T> {
    pub fn active_rows(&self, m: usize) -> usize {
        self.active.iter().filter(|&&i| i < m).count()
    }
}

fn tol<T: Real>() -> T {
    T::epsilon().sqrt() * T::epsilon().sqrt().sqrt()
}

/// Solves `M y = r` in place by Gaussian elimination with partial pivoting.
pub fn solve_dense<T: Real>(mut mat: Vec<Vec<T>>, mut rhs: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = mat.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| mat[a][col].abs().partial_cmp(&mat[b][col].abs()).unwrap())?;
        if mat[piv][col].abs() <= T::epsilon() {
            return None;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = mat[r][col] / mat[col][col];
            if f == T::zero() {
                continue;
            }
            for c in col..n {
                let v = mat[col][c];
                mat[r][c] = mat[r][c] - f * v;
            }
            for c in 0..rhs[r].len() {
                let v = rhs[col][c];
                rhs[r][c] = rhs[r][c] - f * v;
            }
        }
    }
    for col in (0..n).rev() {
        for c in 0..rhs[col].len() {
            let mut acc = rhs[col][c];
            for k in col + 1..n {
                acc = acc - mat[col][k] * rhs[k][c];
            }
            rhs[col][c] = acc / mat[col][col];
        }
    }
    Some(rhs)
}

impl<T: Real> LinearProgram<T> {
    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        if self.upper.len() != n || self.objectives.is_empty() {
            return domain("bounds and objectives must be given");
        }
        if self.objectives.iter().chain(&self.rows).any(|v| v.len() != n) || self.rhs.len() != self.m() {
            return domain("inconsistent linear program dimensions");
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return domain("a lower bound exceeds its upper bound");
        }
        Ok(())
    }

    /// `(g, h)` of constraint `id`.
    fn constraint(&self, id: usize) -> (Vec<T>, T) {
        let (m, n) = (self.m(), self.n());
        if id < m {
            (self.rows[id].clone(), self.rhs[id])
        } else if id < m + n {
            let mut g = vec![T::zero(); n];
            g[id - m] = T::one();
            (g, self.upper[id - m])
        } else {
            let mut g = vec![T::zero(); n];
            g[id - m - n] = -T::one();
            (g, -self.lower[id - m - n])
        }
    }

    fn dot_row(&self, id: usize, v: &[T]) -> T {
        let (m, n) = (self.m(), self.n());
        if id < m {
            self.rows[id].iter().zip(v).fold(T::zero(), |a, (x, y)| a + *x * *y)
        } else if id < m + n {
            v[id - m]
        } else {
            -v[id - m - n]
        }
    }

    fn rhs_of(&self, id: usize) -> T {
        let (m, n) = (self.m(), self.n());
        if id < m {
            self.rhs[id]
        } else if id < m + n {
            self.upper[id - m]
        } else {
            -self.lower[id - m - n]
        }
    }

    /// Largest violation of any row at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        (0..self.m()).map(|i| self.dot_row(i, x) - self.rhs[i]).fold(T::zero(), T::max)
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.objectives[0].iter().zip(x).fold(T::zero(), |a, (c, v)| a + *c * *v)
    }

    /// Runs the simplex from the vertex `x = lower`, which must satisfy
    /// every row.
    pub fn solve(&self, max_iters: usize) -> Result<SimplexResult<T>> {
        self.check()?;
        let (m, n) = (self.m(), self.n());
        let eps = tol::<T>();
        let mut x = self.lower.clone();
        if (0..m).any(|i| self.dot_row(i, &x) > self.rhs[i] + eps) {
            return Ok(SimplexResult { x, status: LpStatus::Infeasible, iterations: 0, active: Vec::new() });
        }
        let mut active: Vec<usize> = (0..n).map(|j| m + n + j).collect();
        let total = m + 2 * n;
        let q = self.objectives.len();
        for iter in 0..max_iters {
            let gw: Vec<Vec<T>> = active.iter().map(|&id| self.constraint(id).0).collect();
            // multipliers: G_Wᵀ Λ = [c_1 .. c_q]
            let gt: Vec<Vec<T>> = (0..n).map(|r| (0..n).map(|c| gw[c][r]).collect()).collect();
            let cs: Vec<Vec<T>> = (0..n).map(|r| (0..q).map(|o| self.objectives[o][r]).collect()).collect();
            let lam = solve_dense(gt, cs).ok_or_else(|| DarrmError::Infeasible("singular simplex basis".into()))?;
            let lex_negative = |row: &[T]| row.iter().find(|v| v.abs() > eps).is_some_and(|v| *v < T::zero());
            let leave = (0..n).filter(|&p| lex_negative(&lam[p])).min_by_key(|&p| active[p]);
            let Some(p) = leave else {
                return Ok(SimplexResult { x, status: LpStatus::Optimal, iterations: iter, active });
            };
            // direction: G_W d = −e_p
            let rhs: Vec<Vec<T>> = (0..n).map(|r| vec![if r == p { -T::one() } else { T::zero() }]).collect();
            let d: Vec<T> = solve_dense(gw, rhs).unwrap().into_iter().map(|v| v[0]).collect();
            let mut enter: Option<(T, usize)> = None;
            for id in 0..total {
                if active.contains(&id) {
                    continue;
                }
                let gd = self.dot_row(id, &d);
                if gd <= eps {
                    continue;
                }
                let slack = (self.rhs_of(id) - self.dot_row(id, &x)).max(T::zero());
                let t = slack / gd;
                match enter {
                    Some((best, _)) if t >= best => {}
                    _ => enter = Some((t, id)),
                }
            }
            let Some((_, id)) = enter else {
                return Err(DarrmError::Infeasible("linear program is unbounded".into()));
            };
            active[p] = id;
            let gw: Vec<Vec<T>> = active.iter().map(|&i| self.constraint(i).0).collect();
            let hw: Vec<Vec<T>> = active.iter().map(|&i| vec![self.rhs_of(i)]).collect();
            x = solve_dense(gw, hw)
                .ok_or_else(|| DarrmError::Infeasible("singular simplex basis".into()))?
                .into_iter()
                .map(|v| v[0])
                .collect();
        }
        Ok(SimplexResult { x, status: LpStatus::IterationLimit, iterations: max_iters, active })
    }
}
