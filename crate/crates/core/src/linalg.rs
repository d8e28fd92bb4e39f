//! Sparse linear systems from lattice stencils: banded LU with partial
//! pivoting for moderate bandwidths, Jacobi-preconditioned BiCGSTAB otherwise.

use crate::error::{Error, Result};

/// Square sparse matrix stored as row lists of `(column, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    /// Rows may contain repeated columns; they are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::invalid("row count does not match dimension"));
        }
        let mut out = Vec::with_capacity(n);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
            for (j, v) in r {
                if j >= n {
                    return Err(Error::invalid(format!("column {j} out of range")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            out.push(merged);
        }
        Ok(SparseMatrix { n, rows: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `max_i |(Ax - b)_i|`
    pub fn residual_inf(&self, x: &[f64], b: &[f64]) -> f64 {
        self.mul(x)
            .iter()
            .zip(b)
            .fold(0.0f64, |m, (ax, bi)| m.max((ax - bi).abs()))
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, _) in r {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().find(|e| e.0 == i).map_or(0.0, |e| e.1))
            .collect()
    }
}

/// Row-wise band LU factors with the pivot and elimination history.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    /// Upper factor: row `k` holds columns `k..k + len`.
    upper: Vec<Vec<f64>>,
    pivots: Vec<usize>,
    /// Multipliers applied after pivot `k`: `(row, factor)`.
    lower: Vec<Vec<(usize, f64)>>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.n;
        let (kl, _) = a.bandwidths();
        // Each working row is dense from `start` onwards.
        let mut rows: Vec<(usize, Vec<f64>)> = a
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let start = r.first().map_or(i, |e| e.0.min(i));
                let end = r.last().map_or(i, |e| e.0.max(i));
                let mut v = vec![0.0; end - start + 1];
                for &(j, x) in r {
                    v[j - start] = x;
                }
                (start, v)
            })
            .collect();
        let at = |row: &(usize, Vec<f64>), col: usize| -> f64 {
            if col < row.0 {
                0.0
            } else {
                row.1.get(col - row.0).copied().unwrap_or(0.0)
            }
        };
        let scale = a
            .rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, e| m.max(e.1.abs()))
            .max(f64::MIN_POSITIVE);
        let mut upper = Vec::with_capacity(n);
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = at(&rows[k], k).abs();
            for r in k + 1..=last {
                let v = at(&rows[r], k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(Error::Solve {
                    reason: format!("matrix is singular to working precision at pivot {k}"),
                    residual: f64::INFINITY,
                });
            }
            rows.swap(k, p);
            pivots.push(p);
            let (start, pivot_row) = {
                let (s, v) = &rows[k];
                (*s, v[k - s..].to_vec())
            };
            debug_assert!(start <= k);
            let piv = pivot_row[0];
            let mut mults = Vec::new();
            for r in k + 1..=last {
                let v = at(&rows[r], k);
                if v == 0.0 {
                    continue;
                }
                let f = v / piv;
                mults.push((r, f));
                let row = &mut rows[r];
                let need = k + pivot_row.len() - row.0;
                if row.1.len() < need {
                    row.1.resize(need, 0.0);
                }
                let off = k - row.0;
                for (c, pv) in pivot_row.iter().enumerate() {
                    row.1[off + c] -= f * pv;
                }
                row.1[off] = 0.0;
            }
            lower.push(mults);
            upper.push(pivot_row);
            // Rows above k are no longer needed.
            rows[k].1 = Vec::new();
        }
        Ok(BandedLu {
            n,
            upper,
            pivots,
            lower,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for k in 0..self.n {
            y.swap(k, self.pivots[k]);
            let yk = y[k];
            for &(r, f) in &self.lower[k] {
                y[r] -= f * yk;
            }
        }
        for k in (0..self.n).rev() {
            let row = &self.upper[k];
            let mut s = y[k];
            for (c, v) in row.iter().enumerate().skip(1) {
                s -= v * y[k + c];
            }
            y[k] = s / row[0];
        }
        y
    }
}

/// Jacobi-preconditioned BiCGSTAB. Returns `(x, residual_inf, iterations)`.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.contains(&0.0) {
        return Err(Error::Solve {
            reason: "zero diagonal entry; Jacobi preconditioner undefined".into(),
            residual: f64::INFINITY,
        });
    }
    let prec = |v: &[f64]| -> Vec<f64> { v.iter().zip(&diag).map(|(x, d)| x / d).collect() };
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(x, y)| x * y).sum() };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let ax = a.mul(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 0..max_iter {
        let res = inf(&r);
        if res <= tol {
            let true_res = a.residual_inf(&x, b);
            if true_res <= tol {
                return Ok((x, true_res, it));
            }
            // Recurrence drifted; restart from the true residual.
            let ax = a.mul(&x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = prec(&p);
        v = a.mul(&ph);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if inf(&s) <= tol {
            let mut xs = x.clone();
            for i in 0..n {
                xs[i] += alpha * ph[i];
            }
            let true_res = a.residual_inf(&xs, b);
            if true_res <= tol {
                return Ok((xs, true_res, it + 1));
            }
        }
        let sh = prec(&s);
        let t = a.mul(&sh);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    let res = a.residual_inf(&x, b);
    if res <= tol {
        Ok((x, res, max_iter))
    } else {
        Err(Error::Solve {
            reason: format!("BiCGSTAB stalled after {max_iter} iterations"),
            residual: res,
        })
    }
}
