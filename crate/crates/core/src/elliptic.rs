//! Operators `Lu = a^{ij} D_ij u + b^i D_i u + c u`, the finite-difference
//! Dirichlet solver, the constant-coefficient transform, the continuity sweep
//! and the discrete maximum principle.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::domain::{DomainShape, Lattice, NodeClass};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::expr::Expression;
use crate::fd::{apply_row, fd_derivatives, second_pairs, stencils};
use crate::field::SampledField;
use crate::linalg::{bicgstab, BandedLu, SparseMatrix};
use crate::norms::{holder_norm, NormReport};
use crate::potential::Matrix3;
use crate::verify::record::{digest, VerificationRecord};

#[derive(Debug, Clone)]
pub struct EllipticOperator {
    lattice: Arc<Lattice>,
    a: Vec<Matrix3>,
    b: Vec<[f64; 3]>,
    c: Vec<f64>,
}

fn min_max_eigen(m: &Matrix3, dim: usize) -> (f64, f64) {
    let dm = DMatrix::from_fn(dim, dim, |i, j| m[i][j]);
    let e = SymmetricEigen::new(dm).eigenvalues;
    (e.min(), e.max())
}

impl EllipticOperator {
    pub fn new(lattice: Arc<Lattice>, a: Vec<Matrix3>, b: Vec<[f64; 3]>, c: Vec<f64>) -> Result<Self> {
        let n = lattice.len();
        if a.len() != n || b.len() != n || c.len() != n {
            return Err(Error::invalid("coefficient fields must have one entry per node"));
        }
        let dim = lattice.dim();
        for (k, m) in a.iter().enumerate() {
            let scale = m.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
            for i in 0..dim {
                for j in 0..dim {
                    if !m[i][j].is_finite() {
                        return Err(Error::invalid(format!("non-finite a at node {k}")));
                    }
                    if (m[i][j] - m[j][i]).abs() > 1e-12 * scale {
                        return Err(Error::invalid(format!("a is not symmetric at node {k}")));
                    }
                }
            }
        }
        if b.iter().flatten().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite lower-order coefficient"));
        }
        let op = EllipticOperator { lattice, a, b, c };
        let lambda = op.lambda();
        if !(lambda > 0.0) {
            return Err(Error::Hypothesis(format!(
                "operator is not strictly elliptic (lambda = {lambda})"
            )));
        }
        Ok(op)
    }

    pub fn from_fns(
        lattice: Arc<Lattice>,
        a: impl Fn(&[f64]) -> Matrix3,
        b: impl Fn(&[f64]) -> [f64; 3],
        c: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let n = lattice.len();
        let av = (0..n).map(|i| a(lattice.coords(i))).collect();
        let bv = (0..n).map(|i| b(lattice.coords(i))).collect();
        let cv = (0..n).map(|i| c(lattice.coords(i))).collect();
        Self::new(lattice, av, bv, cv)
    }

    /// Coefficients from expressions: `a` is `dim × dim`, `b` has `dim` entries.
    pub fn from_exprs(
        lattice: Arc<Lattice>,
        a: &[Vec<Expression>],
        b: &[Expression],
        c: &Expression,
    ) -> Result<Self> {
        let dim = lattice.dim();
        if a.len() != dim || a.iter().any(|r| r.len() != dim) || b.len() != dim {
            return Err(Error::invalid(format!("coefficient shapes must match dimension {dim}")));
        }
        let n = lattice.len();
        let mut av = Vec::with_capacity(n);
        let mut bv = Vec::with_capacity(n);
        let mut cv = Vec::with_capacity(n);
        for k in 0..n {
            let p = lattice.coords(k);
            let mut m = [[0.0; 3]; 3];
            let mut v = [0.0; 3];
            for i in 0..dim {
                for j in 0..dim {
                    m[i][j] = a[i][j].evaluate(p, dim)?;
                }
                v[i] = b[i].evaluate(p, dim)?;
            }
            av.push(m);
            bv.push(v);
            cv.push(c.evaluate(p, dim)?);
        }
        Self::new(lattice, av, bv, cv)
    }

    pub fn laplacian(lattice: Arc<Lattice>) -> Self {
        let n = lattice.len();
        let mut id = [[0.0; 3]; 3];
        for (k, row) in id.iter_mut().enumerate().take(lattice.dim()) {
            row[k] = 1.0;
        }
        EllipticOperator {
            lattice,
            a: vec![id; n],
            b: vec![[0.0; 3]; n],
            c: vec![0.0; n],
        }
    }

    /// `(1 - t) L0 + t L1`
    pub fn blend(l0: &Self, l1: &Self, t: f64) -> Result<Self> {
        if l0.lattice.id() != l1.lattice.id() {
            return Err(Error::invalid("operators live on different lattices"));
        }
        let mix = |x: f64, y: f64| (1.0 - t) * x + t * y;
        let n = l0.lattice.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            let mut m = [[0.0; 3]; 3];
            let mut v = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = mix(l0.a[k][i][j], l1.a[k][i][j]);
                }
                v[i] = mix(l0.b[k][i], l1.b[k][i]);
            }
            a.push(m);
            b.push(v);
            c.push(mix(l0.c[k], l1.c[k]));
        }
        Self::new(l0.lattice.clone(), a, b, c)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn a(&self) -> &[Matrix3] {
        &self.a
    }

    pub fn b(&self) -> &[[f64; 3]] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Minimum over nodes of the smallest eigenvalue of `a`.
    pub fn lambda(&self) -> f64 {
        let dim = self.lattice.dim();
        self.a
            .iter()
            .map(|m| min_max_eigen(m, dim).0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_b(&self) -> f64 {
        self.b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_c(&self) -> f64 {
        self.c.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipticity {
    pub lambda: f64,
    /// Largest eigenvalue of `a` over nodes.
    pub eig_max: f64,
    /// Max of the coefficient norms `|a^{ij}|_{0,α}`, `|b^i|_{0,α}`, `|c|_{0,α}`
    /// (sup norms when no exponent is given), and at least `eig_max`.
    pub big_lambda: f64,
}

pub fn ellipticity_constants(op: &EllipticOperator, alpha: Option<&ExponentField>, budget: usize) -> Result<Ellipticity> {
    let lat = &op.lattice;
    let dim = lat.dim();
    let mut lambda = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    for m in &op.a {
        let (lo, hi) = min_max_eigen(m, dim);
        lambda = lambda.min(lo);
        eig_max = eig_max.max(hi);
    }
    if !(lambda > 0.0) {
        return Err(Error::Hypothesis(format!("lambda = {lambda} is not positive")));
    }
    let mut fields: Vec<Vec<f64>> = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            fields.push(op.a.iter().map(|m| m[i][j]).collect());
        }
        fields.push(op.b.iter().map(|v| v[i]).collect());
    }
    fields.push(op.c.clone());
    let mut big = eig_max;
    for f in fields {
        let v = match alpha {
            Some(a) => holder_norm(&SampledField::new(lat.clone(), f)?, a, 0, budget)?.norm,
            None => f.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        };
        big = big.max(v);
    }
    Ok(Ellipticity {
        lambda,
        eig_max,
        big_lambda: big,
    })
}

/// `Lu` at every node from the cached derivatives of `u`.
pub fn apply_operator(op: &EllipticOperator, u: &SampledField) -> Result<SampledField> {
    if u.lattice().id() != op.lattice.id() {
        return Err(Error::invalid("field and operator live on different lattices"));
    }
    let dim = op.lattice.dim();
    let first = u.components(1)?;
    let second = u.components(2)?;
    let pairs = second_pairs(dim);
    let v = (0..op.lattice.len())
        .map(|k| {
            let mut s = op.c[k] * u.value(k);
            for (q, &(i, j)) in pairs.iter().enumerate() {
                let coef = if i == j { op.a[k][i][i] } else { op.a[k][i][j] + op.a[k][j][i] };
                s += coef * second[q][k];
            }
            for i in 0..dim {
                s += op.b[k][i] * first[i][k];
            }
            s
        })
        .collect();
    u.with_values(v)
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub op: EllipticOperator,
    /// Right-hand side, used at interior nodes.
    pub f: SampledField,
    /// Boundary data, used at non-interior nodes.
    pub phi: SampledField,
}

impl DirichletProblem {
    pub fn new(op: EllipticOperator, f: SampledField, phi: SampledField) -> Result<Self> {
        let id = op.lattice.id();
        if f.lattice().id() != id || phi.lattice().id() != id {
            return Err(Error::invalid("problem fields live on different lattices"));
        }
        Ok(DirichletProblem { op, f, phi })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.op.lattice
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Banded LU when its cost is moderate, BiCGSTAB otherwise.
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub allow_positive_c: bool,
    pub method: SolverMethod,
    /// Starting values (interior unknowns, lattice order) for the iterative solver.
    pub initial_guess: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            allow_positive_c: false,
            method: SolverMethod::Auto,
            initial_guess: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: SampledField,
    pub residual: f64,
    pub method: SolverMethod,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

const DIRECT_MAX_UNKNOWNS: usize = 100_000;
const DIRECT_MAX_COST: f64 = 4e9;

/// Interior unknown index per node.
fn unknown_map(lat: &Lattice) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut map = vec![None; lat.len()];
    let mut ids = Vec::new();
    for i in 0..lat.len() {
        if lat.class(i) == NodeClass::Interior {
            map[i] = Some(ids.len());
            ids.push(i);
        }
    }
    (map, ids)
}

/// Assemble `A x = rhs` over interior unknowns with `φ` eliminated.
pub fn assemble(p: &DirichletProblem) -> Result<(SparseMatrix, Vec<f64>, Vec<usize>)> {
    let lat = p.lattice();
    let dim = lat.dim();
    let st = stencils(lat)?;
    let (map, ids) = unknown_map(lat);
    let pairs = second_pairs(dim);
    let op = &p.op;
    let phi = p.phi.values();
    let mut rows = Vec::with_capacity(ids.len());
    let mut rhs = Vec::with_capacity(ids.len());
    for &k in &ids {
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut b = p.f.value(k);
        let push = |node: usize, w: f64, row: &mut Vec<(usize, f64)>, b: &mut f64| match map[node] {
            Some(u) => row.push((u, w)),
            None => *b -= w * phi[node],
        };
        push(k, op.c[k], &mut row, &mut b);
        for (q, &(i, j)) in pairs.iter().enumerate() {
            let coef = if i == j { op.a[k][i][i] } else { op.a[k][i][j] + op.a[k][j][i] };
            if coef != 0.0 {
                for &(node, w) in &st.second[q][k] {
                    push(node, coef * w, &mut row, &mut b);
                }
            }
        }
        for i in 0..dim {
            let coef = op.b[k][i];
            if coef != 0.0 {
                for &(node, w) in &st.first[i][k] {
                    push(node, coef * w, &mut row, &mut b);
                }
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    Ok((SparseMatrix::from_rows(ids.len(), rows)?, rhs, ids))
}

pub fn solve_dirichlet(p: &DirichletProblem, opts: &SolveOptions) -> Result<Solution> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let op = &p.op;
    let lat = p.lattice();
    let mut warnings = Vec::new();
    if op.max_c() > 0.0 {
        let msg = format!("c > 0 somewhere (max {}); uniqueness is not guaranteed", op.max_c());
        if !opts.allow_positive_c {
            return Err(Error::Hypothesis(msg));
        }
        warnings.push(msg);
    }
    let lambda = op.lambda();
    let cell_peclet = lat.h() * op.max_b() / (2.0 * lambda);
    if cell_peclet >= 1.0 {
        warnings.push(format!(
            "h max|b| / (2 lambda) = {cell_peclet:.3} >= 1; the discrete maximum principle may fail"
        ));
    }
    let (a, rhs, ids) = assemble(p)?;
    let f_inf = ids.iter().fold(0.0f64, |m, &k| m.max(p.f.value(k).abs()));
    let target = opts.tol * (1.0 + f_inf);
    let n = a.n();
    let (kl, ku) = a.bandwidths();
    let cost = n as f64 * kl as f64 * (kl + ku) as f64;
    let method = match opts.method {
        SolverMethod::Auto if n <= DIRECT_MAX_UNKNOWNS && cost <= DIRECT_MAX_COST && opts.initial_guess.is_none() => {
            SolverMethod::Direct
        }
        SolverMethod::Auto => SolverMethod::Iterative,
        m => m,
    };
    let (x, iterations) = match method {
        SolverMethod::Direct => (BandedLu::factor(&a)?.solve(&rhs), 0),
        _ => {
            if let Some(g) = &opts.initial_guess {
                if g.len() != n {
                    return Err(Error::invalid(format!("initial guess has {} entries, need {n}", g.len())));
                }
            }
            let (x, _, it) = bicgstab(&a, &rhs, opts.initial_guess.as_deref(), target * 0.5, 20 * n + 1000)?;
            (x, it)
        }
    };
    let residual = a.residual_inf(&x, &rhs);
    if !(residual <= target) {
        return Err(Error::Solve {
            reason: format!("residual above target {target:e}"),
            residual,
        });
    }
    let mut u = p.phi.values().to_vec();
    for (k, &node) in ids.iter().enumerate() {
        u[node] = x[k];
    }
    for (node, v) in u.iter_mut().enumerate() {
        if lat.class(node) != NodeClass::Interior {
            *v = p.phi.value(node);
        }
    }
    Ok(Solution {
        u: p.f.with_values(u)?,
        residual,
        method,
        iterations,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformReport {
    pub eigenvalues: Vec<f64>,
    pub lambda: f64,
    pub big_lambda: f64,
    /// `max |P A Pᵀ - I|`
    pub identity_error: f64,
    pub aligned: bool,
}

#[derive(Debug, Clone)]
pub struct Transform {
    pub p: DMatrix<f64>,
    pub report: TransformReport,
}

fn householder_to(v: &DVector<f64>, target: usize) -> DMatrix<f64> {
    let n = v.len();
    let mut e = DVector::zeros(n);
    e[target] = 1.0;
    let w = v / v.norm() - &e;
    let wn = w.norm();
    if wn < 1e-15 {
        return DMatrix::identity(n, n);
    }
    let u = w / wn;
    DMatrix::identity(n, n) - 2.0 * &u * u.transpose()
}

/// `P = R D Vᵀ` with `A = V Λ Vᵀ` and `D = Λ^{-1/2}`, so `P A Pᵀ = I`.
/// With `align_half_space`, `R` is the rotation taking the image of the
/// normal of `{x_n = 0}` to `e_n`; otherwise `R = I`.
pub fn constant_coeff_transform(a: &DMatrix<f64>, align_half_space: bool) -> Result<Transform> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid("matrix must be square and non-empty"));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
    let (vals, vecs) = if diagonal {
        (DVector::from_fn(n, |i, _| a[(i, i)]), DMatrix::identity(n, n))
    } else {
        let e = SymmetricEigen::new(a.clone());
        // Order eigenvectors by their dominant component and fix signs.
        let mut cols: Vec<(usize, f64, DVector<f64>)> = (0..n)
            .map(|k| {
                let mut v = e.eigenvectors.column(k).into_owned();
                let dom = v.iamax();
                if v[dom] < 0.0 {
                    v = -v;
                }
                (dom, e.eigenvalues[k], v)
            })
            .collect();
        cols.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        (
            DVector::from_iterator(n, cols.iter().map(|c| c.1)),
            DMatrix::from_columns(&cols.iter().map(|c| c.2.clone()).collect::<Vec<_>>()),
        )
    };
    if vals.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Hypothesis(format!(
            "matrix is not positive definite (eigenvalues {:?})",
            vals.as_slice()
        )));
    }
    let d = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
    let m = &d * vecs.transpose();
    let r = if align_half_space && n >= 2 {
        let mt = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("transform is singular"))?
            .transpose();
        let normal = mt.column(n - 1).into_owned();
        let h = householder_to(&normal, n - 1);
        let mut s = DMatrix::identity(n, n);
        if h != DMatrix::identity(n, n) {
            s[(0, 0)] = -1.0;
        }
        s * h
    } else {
        DMatrix::identity(n, n)
    };
    let p = r * m;
    let err = (&p * a * p.transpose() - DMatrix::identity(n, n)).amax();
    let lambda = vals.min();
    let big_lambda = vals.max();
    Ok(Transform {
        p,
        report: TransformReport {
            eigenvalues: vals.iter().copied().collect(),
            lambda,
            big_lambda,
            identity_error: err,
            aligned: align_half_space,
        },
    })
}

/// Distance from a point inside an axis-aligned ellipsoid (semi-axes `axes`,
/// centred at the origin) to its boundary.
pub fn ellipsoid_distance(axes: &[f64], z: &[f64]) -> f64 {
    let n = axes.len();
    let emin = axes.iter().copied().fold(f64::INFINITY, f64::min);
    // Closest point y_i = e_i² z_i / (e_i² + t) with t in (-emin², 0].
    let g = |t: f64| -> f64 {
        (0..n)
            .map(|i| {
                let e2 = axes[i] * axes[i];
                (axes[i] * z[i] / (e2 + t)).powi(2)
            })
            .sum::<f64>()
            - 1.0
    };
    let mut lo = -emin * emin;
    let mut hi = 0.0;
    if g(hi) >= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm.is_nan() || gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = hi;
    let on_boundary = g(t).abs() <= 1e-8;
    let mut d2 = 0.0;
    let mut onto = vec![0.0; n];
    for i in 0..n {
        let e2 = axes[i] * axes[i];
        onto[i] = e2 * z[i] / (e2 + t);
        d2 += (onto[i] - z[i]).powi(2);
    }
    // Degenerate branch (z on a short axis plane): the nearest point may sit
    // off that plane; the bisection point is still on the boundary, so take
    // the smaller of it and the shortest semi-axis candidate.
    let r = (0..n)
        .filter(|&i| axes[i] == emin)
        .map(|i| {
            let others: f64 = (0..n)
                .filter(|&k| k != i)
                .map(|k| {
                    let e2 = axes[k] * axes[k];
                    let s = e2 - emin * emin;
                    if s > 0.0 {
                        (z[k] * e2 / s).powi(2) / e2
                    } else {
                        f64::INFINITY
                    }
                })
                .sum();
            if others < 1.0 && z[i] == 0.0 {
                let mut d = 0.0;
                for k in 0..n {
                    if k != i {
                        let e2 = axes[k] * axes[k];
                        let yk = e2 * z[k] / (e2 - emin * emin);
                        d += (yk - z[k]).powi(2);
                    }
                }
                d += emin * emin * (1.0 - others);
                d.sqrt()
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    let direct = if on_boundary { d2.sqrt() } else { f64::INFINITY };
    direct.min(r)
}

/// Radius of a ball centred at the shape's centre that contains it.
fn enclosing_radius(shape: &DomainShape) -> f64 {
    match shape {
        DomainShape::Rectangle { .. } => shape.diameter() / 2.0,
        DomainShape::Ball { radius, .. } | DomainShape::HalfBall { radius, .. } => *radius,
        DomainShape::Annulus { outer, .. } => *outer,
    }
}

/// Barrier constant `C` in `sup|u| ≤ sup|φ| + C sup|f|`:
/// `R²/(2nλ)` without drift, `(e^{(β+1)d} - 1)/λ` with `β = sup|b|/λ`.
pub fn barrier_constant(op: &EllipticOperator) -> f64 {
    let lat = &op.lattice;
    let lambda = op.lambda();
    if op.max_b() == 0.0 {
        let r = enclosing_radius(lat.shape());
        r * r / (2.0 * lat.dim() as f64 * lambda)
    } else {
        let beta = op.max_b() / lambda;
        (((beta + 1.0) * lat.diameter()).exp() - 1.0) / lambda
    }
}

/// Discrete comparison principle: `f ≥ 0, φ ≤ 0 ⇒ u ≤ tol` (or the mirrored
/// sign pattern). The barrier bound is reported in the note.
pub fn max_principle_check(p: &DirichletProblem, u: &SampledField, tol: f64) -> VerificationRecord {
    const SUITE: &str = "max_principle";
    let statement = "c <= 0, Lu = f >= 0 in the domain, u <= 0 on the boundary imply u <= 0";
    let lat = p.lattice();
    let fixture = format!("{:?} h={}", lat.shape(), lat.h());
    let dg = digest("max_principle", &[p.f.values(), p.phi.values(), u.values()]);
    if p.op.max_c() > 0.0 {
        return VerificationRecord::not_applicable(SUITE, "sign", statement, fixture, "c > 0 somewhere")
            .with_digest(dg);
    }
    let interior = lat.interior_ids();
    let boundary: Vec<usize> = (0..lat.len()).filter(|&i| lat.class(i) != NodeClass::Interior).collect();
    let f_nonneg = interior.iter().all(|&i| p.f.value(i) >= 0.0);
    let f_nonpos = interior.iter().all(|&i| p.f.value(i) <= 0.0);
    let phi_nonpos = boundary.iter().all(|&i| p.phi.value(i) <= 0.0);
    let phi_nonneg = boundary.iter().all(|&i| p.phi.value(i) >= 0.0);
    let sign = if f_nonneg && phi_nonpos {
        1.0
    } else if f_nonpos && phi_nonneg {
        -1.0
    } else {
        return VerificationRecord::not_applicable(SUITE, "sign", statement, fixture, "sign pattern absent")
            .with_digest(dg);
    };
    let lhs = u.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(sign * v));
    let sup_u = u.sup();
    let sup_phi = boundary.iter().fold(0.0f64, |m, &i| m.max(p.phi.value(i).abs()));
    let sup_f = interior.iter().fold(0.0f64, |m, &i| m.max(p.f.value(i).abs()));
    let c = barrier_constant(&p.op);
    VerificationRecord::inequality(SUITE, "sign", statement, fixture, lhs, 0.0, 0.0)
        .with_floor(tol)
        .with_digest(dg)
        .with_note(format!(
            "sup|u| = {sup_u:e}; barrier bound sup|phi| + C sup|f| = {:e} with C = {c:e}",
            sup_phi + c * sup_f
        ))
}

#[derive(Debug, Clone)]
pub struct SweepStep {
    pub t: f64,
    pub solution: SampledField,
    /// `|u_t|_{2,α(·)}`
    pub norm: NormReport,
    /// `|L_t u_t|_{0,α(·)}`
    pub rhs_norm: NormReport,
    pub ratio: f64,
    /// `max |u_t - u_{t-Δt}|` (0 at the first step).
    pub step_change: f64,
}

/// Solve `L_t u_t = f` for `L_t = (1-t)Δ + t L1` on a uniform `t` grid.
pub fn continuity_sweep(
    l1: &EllipticOperator,
    p: &DirichletProblem,
    steps: usize,
    alpha: &ExponentField,
    opts: &SolveOptions,
    budget: usize,
) -> Result<Vec<SweepStep>> {
    if steps < 2 {
        return Err(Error::invalid("sweep needs at least 2 steps"));
    }
    let l0 = EllipticOperator::laplacian(l1.lattice.clone());
    let mut out: Vec<SweepStep> = Vec::with_capacity(steps);
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let lt = EllipticOperator::blend(&l0, l1, t)?;
        let prob = DirichletProblem::new(lt.clone(), p.f.clone(), p.phi.clone())?;
        let sol = solve_dirichlet(&prob, opts).map_err(|e| Error::Solve {
            reason: format!("sweep failed at t = {t}: {e}"),
            residual: match e {
                Error::Solve { residual, .. } => residual,
                _ => f64::NAN,
            },
        })?;
        let u2 = fd_derivatives(&sol.u, 2)?;
        let norm = holder_norm(&u2, alpha, 2, budget)?;
        let lu = apply_operator(&lt, &u2)?;
        let rhs_norm = holder_norm(&lu, alpha, 0, budget)?;
        let ratio = norm.norm / rhs_norm.norm;
        let step_change = out.last().map_or(0.0, |prev| {
            prev.solution
                .values()
                .iter()
                .zip(sol.u.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        });
        out.push(SweepStep {
            t,
            solution: sol.u,
            norm,
            rhs_norm,
            ratio,
            step_change,
        });
    }
    Ok(out)
}

/// Residual of `Lu = f` at interior nodes using the solver's own rows.
pub fn interior_residual(p: &DirichletProblem, u: &SampledField) -> Result<f64> {
    let lat = p.lattice();
    let st = stencils(lat)?;
    let dim = lat.dim();
    let pairs = second_pairs(dim);
    let op = &p.op;
    let v = u.values();
    let mut worst = 0.0f64;
    for k in lat.interior_ids() {
        let mut s = op.c[k] * v[k];
        for (q, &(i, j)) in pairs.iter().enumerate() {
            let coef = if i == j { op.a[k][i][i] } else { op.a[k][i][j] + op.a[k][j][i] };
            s += coef * apply_row(&st.second[q][k], v);
        }
        for i in 0..dim {
            s += op.b[k][i] * apply_row(&st.first[i][k], v);
        }
        worst = worst.max((s - p.f.value(k)).abs());
    }
    Ok(worst)
}
