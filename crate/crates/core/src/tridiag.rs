//! Constant tridiagonal systems solved by a pre-factored Thomas sweep.

use alloc::vec::Vec;

use crate::{Error, Result};

/// LU factors of a tridiagonal matrix with rows `lower[i] x[i−1] + diag[i] x[i]
/// + upper[i] x[i+1]`. `lower[0]` and `upper[n−1]` are ignored.
#[derive(Debug, Clone)]
pub struct Thomas {
    lower: Vec<f64>,
    /// modified super-diagonal `c'`
    upper: Vec<f64>,
    /// reciprocal pivots `1/(b_i − a_i c'_{i−1})`
    inv_pivot: Vec<f64>,
}

impl Thomas {
    /// Factor once; fails on a zero pivot (the matrices used here are strictly
    /// diagonally dominant, so that signals a construction bug).
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n, "band lengths differ");
        let mut c = Vec::with_capacity(n);
        let mut inv = Vec::with_capacity(n);
        let mut prev_c = 0.0;
        for i in 0..n {
            let a = if i == 0 { 0.0 } else { lower[i] };
            let pivot = diag[i] - a * prev_c;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Numerical {
                    t: 0.0,
                    detail: alloc::format!("singular tridiagonal pivot at row {i}"),
                });
            }
            let r = 1.0 / pivot;
            prev_c = if i + 1 < n { upper[i] * r } else { 0.0 };
            c.push(prev_c);
            inv.push(r);
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: c,
            inv_pivot: inv,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrite `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        let mut prev = 0.0;
        for (i, r) in rhs.iter_mut().enumerate() {
            let a = if i == 0 { 0.0 } else { self.lower[i] };
            prev = (*r - a * prev) * self.inv_pivot[i];
            *r = prev;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apply(l: &[f64], d: &[f64], u: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = d[i] * x[i];
                if i > 0 {
                    s += l[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += u[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn singular_is_reported() {
        assert!(Thomas::factor(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn solves_dominant_systems(
            rows in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -5.0f64..5.0), 1..64)
        ) {
            let l: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let u: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let d: Vec<f64> = rows.iter().map(|r| 2.5 + r.0.abs() + r.1.abs()).collect();
            let x: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let mut b = apply(&l, &d, &u, &x);
            Thomas::factor(&l, &d, &u).unwrap().solve_in_place(&mut b);
            for (got, want) in b.iter().zip(&x) {
                prop_assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
            }
        }
    }
}
