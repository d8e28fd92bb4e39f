//! Finite-difference derivative rows on a lattice.
//!
//! Every derivative is a sparse linear row over node values, so the solver
//! assembles exactly the operator that [`fd_derivatives`] evaluates.
//!
//! * first derivatives: central three-point stencil (unequal arms near curved
//!   boundaries), otherwise one-sided three-point;
//! * pure second derivatives: central three-point, otherwise one-sided
//!   four-point (three-point if the line is short);
//! * mixed derivatives: four-point diagonal stencil when the diagonal grid
//!   nodes exist;
//! * anything else: local quadratic least-squares fit.

use nalgebra::DMatrix;

use crate::domain::{direction, Lattice};
use crate::error::{Error, Result};
use crate::field::{Derivatives, SampledField};

pub type Row = Vec<(usize, f64)>;

/// Derivative rows for every node: `first[axis][node]`, `second[pair][node]`
/// with pairs ordered as [`second_pairs`].
#[derive(Debug)]
pub struct Stencils {
    pub first: Vec<Vec<Row>>,
    pub second: Vec<Vec<Row>>,
}

/// Multi-indices of order two as `(i, j)` with `i <= j`.
pub fn second_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            out.push((i, j));
        }
    }
    out
}

pub fn second_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    second_pairs(dim)
        .iter()
        .position(|&p| p == (i, j))
        .expect("valid multi-index")
}

/// Finite-difference weights at `z` for nodes `x`, derivative orders
/// `0..=m`: `c[k][j]` multiplies `u(x[j])` in the k-th derivative.
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Nodes along `axis` through `i`: up to `depth` on each side as
/// `(node, signed offset)`.
fn line(lat: &Lattice, i: usize, axis: usize, positive: bool, depth: usize) -> Vec<(usize, f64)> {
    let dir = direction(axis, positive);
    let sign = if positive { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    let mut cur = i;
    let mut off = 0.0;
    while out.len() < depth {
        match lat.neighbor(cur, dir) {
            Some(arm) => {
                off += arm.len;
                cur = arm.node;
                out.push((cur, sign * off));
            }
            None => break,
        }
    }
    out
}

fn weighted_row(i: usize, pts: &[(usize, f64)], order: usize) -> Row {
    let mut nodes = vec![i];
    let mut offs = vec![0.0];
    for &(j, o) in pts {
        nodes.push(j);
        offs.push(o);
    }
    let w = fornberg_weights(0.0, &offs, order);
    nodes.into_iter().zip(w[order].iter().copied()).collect()
}

fn axis_rows(lat: &Lattice, i: usize, axis: usize) -> (Option<Row>, Option<Row>) {
    let plus = line(lat, i, axis, true, 3);
    let minus = line(lat, i, axis, false, 3);
    let (first, second) = if !plus.is_empty() && !minus.is_empty() {
        let pts = [minus[0], plus[0]];
        (Some(weighted_row(i, &pts, 1)), Some(weighted_row(i, &pts, 2)))
    } else {
        let side = if plus.len() >= minus.len() { &plus } else { &minus };
        let first = (side.len() >= 2).then(|| weighted_row(i, &side[..2], 1));
        let second = match side.len() {
            3 => Some(weighted_row(i, &side[..3], 2)),
            2 => Some(weighted_row(i, &side[..2], 2)),
            _ => None,
        };
        (first, second)
    };
    (first, second)
}

fn diagonal_row(lat: &Lattice, i: usize, a: usize, b: usize) -> Option<Row> {
    let g = lat.grid_index(i)?;
    let h = lat.h();
    let mut row = Vec::with_capacity(4);
    for (sa, sb, w) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
        let mut q = g;
        q[a] += sa;
        q[b] += sb;
        let j = lat.node_at(&q)?;
        row.push((j, w / (4.0 * h * h)));
    }
    Some(row)
}

/// Quadratic least-squares fit rows: (gradient rows, second-derivative rows).
fn lsq_rows(lat: &Lattice, i: usize) -> std::result::Result<(Vec<Row>, Vec<Row>), String> {
    let dim = lat.dim();
    let h = lat.h();
    let pairs = second_pairs(dim);
    let n_unknown = 1 + dim + pairs.len();
    let x0 = *lat.point(i);
    for (reach, radius) in [(2i64, 2.5), (3, 3.5), (4, 4.5)] {
        let cand: Vec<usize> = lat
            .nearby_nodes(i, reach)
            .into_iter()
            .filter(|&j| crate::domain::dist(lat.point(j), &x0) <= radius * h)
            .collect();
        if cand.len() < n_unknown + 1 {
            continue;
        }
        let m = cand.len();
        let mut v = DMatrix::<f64>::zeros(m, n_unknown);
        for (r, &j) in cand.iter().enumerate() {
            let p = lat.point(j);
            let s: Vec<f64> = (0..dim).map(|k| (p[k] - x0[k]) / h).collect();
            v[(r, 0)] = 1.0;
            for k in 0..dim {
                v[(r, 1 + k)] = s[k];
            }
            for (q, &(a, b)) in pairs.iter().enumerate() {
                v[(r, 1 + dim + q)] = s[a] * s[b];
            }
        }
        let svd = v.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-8 * smax) {
            continue;
        }
        let pinv = match svd.pseudo_inverse(1e-12 * smax) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let grad = (0..dim)
            .map(|k| cand.iter().enumerate().map(|(r, &j)| (j, pinv[(1 + k, r)] / h)).collect())
            .collect();
        let hess = pairs
            .iter()
            .enumerate()
            .map(|(q, &(a, b))| {
                let f = if a == b { 2.0 } else { 1.0 };
                cand.iter()
                    .enumerate()
                    .map(|(r, &j)| (j, f * pinv[(1 + dim + q, r)] / (h * h)))
                    .collect()
            })
            .collect();
        return Ok((grad, hess));
    }
    Err("not enough nearby nodes for a quadratic fit".into())
}

fn build(lat: &Lattice) -> std::result::Result<Stencils, (usize, String)> {
    let dim = lat.dim();
    let n = lat.len();
    let pairs = second_pairs(dim);
    let mut first = vec![Vec::with_capacity(n); dim];
    let mut second = vec![Vec::with_capacity(n); pairs.len()];
    for i in 0..n {
        let mut f_rows: Vec<Option<Row>> = Vec::with_capacity(dim);
        let mut s_rows: Vec<Option<Row>> = vec![None; pairs.len()];
        for axis in 0..dim {
            let (f, s) = axis_rows(lat, i, axis);
            f_rows.push(f);
            s_rows[second_index(dim, axis, axis)] = s;
        }
        for (q, &(a, b)) in pairs.iter().enumerate() {
            if a != b {
                s_rows[q] = diagonal_row(lat, i, a, b);
            }
        }
        if f_rows.iter().any(Option::is_none) || s_rows.iter().any(Option::is_none) {
            let (g, hs) = lsq_rows(lat, i).map_err(|e| (i, e))?;
            for (k, row) in g.into_iter().enumerate() {
                f_rows[k].get_or_insert(row);
            }
            for (q, row) in hs.into_iter().enumerate() {
                s_rows[q].get_or_insert(row);
            }
        }
        for (k, row) in f_rows.into_iter().enumerate() {
            first[k].push(row.expect("filled"));
        }
        for (q, row) in s_rows.into_iter().enumerate() {
            second[q].push(row.expect("filled"));
        }
    }
    Ok(Stencils { first, second })
}

/// Derivative rows of a lattice (built once, then cached on the lattice).
pub fn stencils(lat: &Lattice) -> Result<&Stencils> {
    lat.stencil_cache()
        .get_or_init(|| build(lat))
        .as_ref()
        .map_err(|(node, reason)| Error::Stencil {
            node: *node,
            reason: reason.clone(),
        })
}

pub fn apply_row(row: &Row, values: &[f64]) -> f64 {
    row.iter().map(|&(j, w)| w * values[j]).sum()
}

/// Attach derivative caches up to order `k` (1 or 2).
pub fn fd_derivatives(u: &SampledField, k: usize) -> Result<SampledField> {
    if !(1..=2).contains(&k) {
        return Err(Error::invalid(format!("derivative order must be 1 or 2, got {k}")));
    }
    let lat = u.lattice();
    let st = stencils(lat)?;
    let vals = u.values();
    let first = st
        .first
        .iter()
        .map(|rows| rows.iter().map(|r| apply_row(r, vals)).collect())
        .collect();
    let second = if k == 2 {
        st.second
            .iter()
            .map(|rows| rows.iter().map(|r| apply_row(r, vals)).collect())
            .collect()
    } else {
        Vec::new()
    };
    Ok(u.clone().with_derivs(Derivatives {
        lattice_id: lat.id(),
        order: k,
        first,
        second,
    }))
}
