//! Fundamental solution of the Laplacian (`ΔΓ = δ`) and the Newtonian
//! potential `w = Γ * f` on ball and half-ball lattices.

use std::f64::consts::PI;

use crate::domain::{dist, DomainShape, Lattice, NodeClass, Point};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::field::SampledField;
use crate::norms::pointwise_seminorm;

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalSolution {
    dim: usize,
}

impl FundamentalSolution {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 2 || dim == 3 {
            Ok(FundamentalSolution { dim })
        } else {
            Err(Error::invalid(format!("potentials need dimension 2 or 3, got {dim}")))
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Volume of the unit ball.
    pub fn omega(&self) -> f64 {
        if self.dim == 2 {
            PI
        } else {
            4.0 * PI / 3.0
        }
    }

    /// Area of the unit sphere, `n ω_n`.
    pub fn sphere_area(&self) -> f64 {
        self.dim as f64 * self.omega()
    }

    fn radius(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.dim {
            return Err(Error::invalid("point has too few coordinates"));
        }
        let r = x[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::invalid("fundamental solution is singular at 0"));
        }
        Ok(r)
    }

    pub fn gamma(&self, x: &[f64]) -> Result<f64> {
        let r = self.radius(x)?;
        Ok(if self.dim == 2 {
            r.ln() / (2.0 * PI)
        } else {
            -1.0 / (4.0 * PI * r)
        })
    }

    /// `DΓ(x) = x / (n ω_n |x|^n)`
    pub fn dgamma(&self, x: &[f64]) -> Result<[f64; 3]> {
        let r = self.radius(x)?;
        let c = 1.0 / (self.sphere_area() * r.powi(self.dim as i32));
        let mut g = [0.0; 3];
        for k in 0..self.dim {
            g[k] = c * x[k];
        }
        Ok(g)
    }

    /// `D_ijΓ(x) = (δ_ij |x|² - n x_i x_j) / (n ω_n |x|^{n+2})`
    pub fn d2gamma(&self, x: &[f64]) -> Result<Matrix3> {
        let r = self.radius(x)?;
        let n = self.dim;
        let r2 = r * r;
        let c = 1.0 / (self.sphere_area() * r.powi(n as i32 + 2));
        let mut m = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { r2 } else { 0.0 };
                m[i][j] = c * (delta - n as f64 * x[i] * x[j]);
            }
        }
        Ok(m)
    }

    /// Exact integral of Γ over the ball of radius `rho` centred at its pole.
    pub fn ball_integral(&self, rho: f64) -> f64 {
        if self.dim == 2 {
            rho * rho * rho.ln() / 2.0 - rho * rho / 4.0
        } else {
            -rho * rho / 2.0
        }
    }

    /// Radius of the ball with volume `vol`.
    pub fn equal_volume_radius(&self, vol: f64) -> f64 {
        (vol / self.omega()).powf(1.0 / self.dim as f64)
    }
}

pub fn gamma(x: &[f64]) -> Result<f64> {
    FundamentalSolution::new(x.len())?.gamma(x)
}

pub fn dgamma(x: &[f64]) -> Result<[f64; 3]> {
    FundamentalSolution::new(x.len())?.dgamma(x)
}

pub fn d2gamma(x: &[f64]) -> Result<Matrix3> {
    FundamentalSolution::new(x.len())?.d2gamma(x)
}

/// Cell volumes: full for grid interior nodes, half on the boundary and on
/// the flat face, none for off-grid crossing nodes.
pub fn quadrature_weights(lat: &Lattice) -> Vec<f64> {
    let cell = lat.h().powi(lat.dim() as i32);
    (0..lat.len())
        .map(|i| {
            if lat.grid_index(i).is_none() {
                return 0.0;
            }
            match lat.class(i) {
                NodeClass::Interior => cell,
                NodeClass::Boundary | NodeClass::BoundaryOnT => cell / 2.0,
                NodeClass::Outside => 0.0,
            }
        })
        .collect()
}

fn ball_of(lat: &Lattice) -> Result<(Point, f64, bool)> {
    match lat.shape() {
        DomainShape::Ball { radius, .. } => Ok((lat.shape().center().expect("ball"), *radius, false)),
        DomainShape::HalfBall { radius, .. } => Ok((lat.shape().center().expect("ball"), *radius, true)),
        _ => Err(Error::invalid("potential needs a ball or half-ball lattice")),
    }
}

/// `w(p) = Σ_y w_y Γ(p - y) f(y)`; when `p` is a node, that node's cell is
/// replaced by the exact integral over the equal-volume ball.
fn potential_at(fs: &FundamentalSolution, lat: &Lattice, weights: &[f64], f: &[f64], p: &Point, own: Option<usize>) -> f64 {
    let n = fs.dim();
    let mut acc = 0.0;
    for y in 0..lat.len() {
        if Some(y) == own || weights[y] == 0.0 || f[y] == 0.0 {
            continue;
        }
        let q = lat.point(y);
        let mut z = [0.0; 3];
        for k in 0..n {
            z[k] = p[k] - q[k];
        }
        if let Ok(g) = fs.gamma(&z[..n]) {
            acc += weights[y] * g * f[y];
        }
    }
    if let Some(x) = own {
        let vol = lat.h().powi(n as i32);
        acc += f[x] * fs.ball_integral(fs.equal_volume_radius(vol));
    }
    acc
}

/// Newtonian potential at the given nodes of the field's lattice.
pub fn newtonian_potential_at(f: &SampledField, nodes: &[usize]) -> Result<Vec<f64>> {
    let lat = f.lattice();
    ball_of(lat)?;
    let fs = FundamentalSolution::new(lat.dim())?;
    check_finite(f)?;
    let w = quadrature_weights(lat);
    nodes
        .iter()
        .map(|&x| {
            if x >= lat.len() {
                return Err(Error::invalid(format!("node {x} out of range")));
            }
            Ok(potential_at(&fs, lat, &w, f.values(), lat.point(x), Some(x)))
        })
        .collect()
}

/// Newtonian potential at arbitrary points (inside or outside the ball).
pub fn newtonian_potential_points(f: &SampledField, points: &[Point]) -> Result<Vec<f64>> {
    let lat = f.lattice();
    ball_of(lat)?;
    let fs = FundamentalSolution::new(lat.dim())?;
    check_finite(f)?;
    let w = quadrature_weights(lat);
    Ok(points
        .iter()
        .map(|p| {
            let own = lat.find_node(p, 1e-12 * lat.h());
            potential_at(&fs, lat, &w, f.values(), p, own)
        })
        .collect())
}

/// Newtonian potential at every node.
pub fn newtonian_potential(f: &SampledField) -> Result<SampledField> {
    let ids: Vec<usize> = (0..f.lattice().len()).collect();
    let v = newtonian_potential_at(f, &ids)?;
    f.with_values(v)
}

fn check_finite(f: &SampledField) -> Result<()> {
    if f.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("potential density must be finite"))
    }
}

/// Quadrature nodes on the curved part of a ball's boundary.
#[derive(Debug, Clone)]
pub struct SurfaceRule {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
}

pub const SPHERE_THETA: usize = 64;
pub const SPHERE_PHI: usize = 128;
pub const CIRCLE_SEGMENTS: usize = 8192;
const DISK_PHI: usize = 1024;

impl SurfaceRule {
    /// Full sphere, or the upper half (`x_n > c_n`) when `half` is set.
    pub fn new(dim: usize, center: &Point, radius: f64, half: bool) -> Self {
        let mut rule = SurfaceRule {
            points: Vec::new(),
            normals: Vec::new(),
            weights: Vec::new(),
        };
        if dim == 2 {
            let span = if half { PI } else { 2.0 * PI };
            let m = if half { CIRCLE_SEGMENTS / 2 } else { CIRCLE_SEGMENTS };
            let dt = span / m as f64;
            for k in 0..m {
                let t = (k as f64 + 0.5) * dt;
                let nu = [t.cos(), t.sin(), 0.0];
                rule.push(center, radius, nu, radius * dt);
            }
        } else {
            let top = if half { PI / 2.0 } else { PI };
            let dth = top / SPHERE_THETA as f64;
            let dph = 2.0 * PI / SPHERE_PHI as f64;
            for a in 0..SPHERE_THETA {
                let (t0, t1) = (a as f64 * dth, (a + 1) as f64 * dth);
                let t = 0.5 * (t0 + t1);
                let area = radius * radius * (t0.cos() - t1.cos()) * dph;
                for b in 0..SPHERE_PHI {
                    let p = (b as f64 + 0.5) * dph;
                    let nu = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                    rule.push(center, radius, nu, area);
                }
            }
        }
        rule
    }

    fn push(&mut self, c: &Point, r: f64, nu: Point, w: f64) {
        self.points.push([c[0] + r * nu[0], c[1] + r * nu[1], c[2] + r * nu[2]]);
        self.normals.push(nu);
        self.weights.push(w);
    }

    /// `S_ij = ∫ D_iΓ(x - y) ν_j(y) dS(y)` over the rule.
    pub fn moment(&self, fs: &FundamentalSolution, x: &Point) -> Matrix3 {
        let n = fs.dim();
        let mut s = [[0.0; 3]; 3];
        for (k, y) in self.points.iter().enumerate() {
            let mut z = [0.0; 3];
            for a in 0..n {
                z[a] = x[a] - y[a];
            }
            let g = fs.dgamma(&z[..n]).expect("x off the surface");
            let nu = &self.normals[k];
            for i in 0..n {
                for j in 0..n {
                    s[i][j] += self.weights[k] * g[i] * nu[j];
                }
            }
        }
        s
    }
}

/// `∫_T D_iΓ(x - y) dS(y)` over the flat face `{y_n = c_n, |y - c| < R}` for
/// `x` strictly above it; radial integrals are done in closed form.
fn flat_face_gradient(fs: &FundamentalSolution, x: &Point, c: &Point, radius: f64) -> [f64; 3] {
    let n = fs.dim();
    let t = x[n - 1] - c[n - 1];
    let mut out = [0.0; 3];
    if n == 2 {
        let (a, b) = (c[0] - radius, c[0] + radius);
        out[1] = (((b - x[0]) / t).atan() - ((a - x[0]) / t).atan()) / (2.0 * PI);
        out[0] = (((x[0] - a).powi(2) + t * t).ln() - ((x[0] - b).powi(2) + t * t).ln()) / (4.0 * PI);
        return out;
    }
    let q = [x[0] - c[0], x[1] - c[1]];
    let qq = q[0] * q[0] + q[1] * q[1];
    let dph = 2.0 * PI / DISK_PHI as f64;
    for k in 0..DISK_PHI {
        let p = (k as f64 + 0.5) * dph;
        let e = [p.cos(), p.sin()];
        let qe = q[0] * e[0] + q[1] * e[1];
        let reach = -qe + (qe * qe - qq + radius * radius).max(0.0).sqrt();
        let hyp = (reach * reach + t * t).sqrt();
        let normal_part = 1.0 - t / hyp;
        let tangential = (reach / t).asinh() - reach / hyp;
        out[2] += normal_part * dph;
        out[0] -= e[0] * tangential * dph;
        out[1] -= e[1] * tangential * dph;
    }
    for v in &mut out {
        *v /= 4.0 * PI;
    }
    out
}

/// Surface matrix `S_ij(x) = ∫_{∂B} D_iΓ(x - y) ν_j dS` for a ball or half-ball
/// lattice (the half-ball adds its flat face with `ν = -e_n`).
pub fn surface_matrix(lat: &Lattice, x: &Point) -> Result<Matrix3> {
    let (c, r, half) = ball_of(lat)?;
    let fs = FundamentalSolution::new(lat.dim())?;
    let rule = SurfaceRule::new(lat.dim(), &c, r, half);
    Ok(surface_matrix_with(&fs, &rule, half.then_some((c, r)), x))
}

fn surface_matrix_with(fs: &FundamentalSolution, rule: &SurfaceRule, flat: Option<(Point, f64)>, x: &Point) -> Matrix3 {
    let n = fs.dim();
    let mut s = rule.moment(fs, x);
    if let Some((c, r)) = flat {
        let g = flat_face_gradient(fs, x, &c, r);
        for i in 0..n {
            s[i][n - 1] -= g[i];
        }
    }
    s
}

/// Hessian evaluator for one density on a ball or half-ball lattice.
pub struct HessianEvaluator<'a> {
    f: &'a SampledField,
    fs: FundamentalSolution,
    weights: Vec<f64>,
    rule: SurfaceRule,
    flat: Option<(Point, f64)>,
}

impl<'a> HessianEvaluator<'a> {
    pub fn new(f: &'a SampledField) -> Result<Self> {
        let lat = f.lattice();
        let (c, r, half) = ball_of(lat)?;
        check_finite(f)?;
        let fs = FundamentalSolution::new(lat.dim())?;
        Ok(HessianEvaluator {
            f,
            fs,
            weights: quadrature_weights(lat),
            rule: SurfaceRule::new(lat.dim(), &c, r, half),
            flat: half.then_some((c, r)),
        })
    }

    /// `D²w(x)` at an interior node `x`.
    pub fn at(&self, x: usize) -> Result<Matrix3> {
        let lat = self.f.lattice();
        if x >= lat.len() || lat.class(x) != NodeClass::Interior {
            return Err(Error::invalid(format!("node {x} is not strictly inside the ball")));
        }
        let n = self.fs.dim();
        let px = lat.point(x);
        let v = self.f.values();
        let fx = v[x];
        let mut m = [[0.0; 3]; 3];
        for y in 0..lat.len() {
            let df = v[y] - fx;
            if y == x || self.weights[y] == 0.0 || df == 0.0 {
                continue;
            }
            let q = lat.point(y);
            let mut z = [0.0; 3];
            for k in 0..n {
                z[k] = px[k] - q[k];
            }
            let d2 = self.fs.d2gamma(&z[..n])?;
            let w = self.weights[y] * df;
            for i in 0..n {
                for j in 0..n {
                    m[i][j] += w * d2[i][j];
                }
            }
        }
        if fx != 0.0 {
            let s = surface_matrix_with(&self.fs, &self.rule, self.flat, px);
            for i in 0..n {
                for j in 0..n {
                    m[i][j] -= fx * s[i][j];
                }
            }
        }
        // The exact Hessian is symmetric; average away quadrature asymmetry.
        for i in 0..n {
            for j in i + 1..n {
                let a = 0.5 * (m[i][j] + m[j][i]);
                m[i][j] = a;
                m[j][i] = a;
            }
        }
        Ok(m)
    }
}

/// `D²w(x)` at node `x` of a ball or half-ball lattice.
pub fn potential_hessian(f: &SampledField, x: usize) -> Result<Matrix3> {
    HessianEvaluator::new(f)?.at(x)
}

/// Right-hand side of the pointwise Hessian bound:
/// `2^{n-1}|f(x)| + n (3R)^{α(x)} [f]_{α(·),x} / α(x)`, with `2R` the ball radius.
pub fn hessian_bound(f: &SampledField, a: &ExponentField, x: usize) -> Result<f64> {
    let lat = f.lattice();
    let (_, r2, _) = ball_of(lat)?;
    let n = lat.dim() as f64;
    let ax = a.values()[x];
    let seminorm = pointwise_seminorm(f, a, x)?;
    Ok(2f64.powf(n - 1.0) * f.value(x).abs() + n * (1.5 * r2).powf(ax) * seminorm / ax)
}

/// Distance helper used by callers that pick evaluation nodes.
pub fn distance_to_center(lat: &Lattice, x: usize) -> Result<f64> {
    let (c, _, _) = ball_of(lat)?;
    Ok(dist(lat.point(x), &c))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::domain::build_lattice;

    fn ball(dim: usize, h: f64) -> Arc<Lattice> {
        Arc::new(
            build_lattice(
                &DomainShape::Ball {
                    center: vec![0.0; dim],
                    radius: 1.0,
                },
                h,
            )
            .unwrap(),
        )
    }

    #[test]
    fn closed_forms() {
        let g3 = FundamentalSolution::new(3).unwrap();
        assert!((g3.gamma(&[1.0, 0.0, 0.0]).unwrap() + 0.0795775).abs() < 1e-7);
        assert_eq!(gamma(&[0.0, 1.0]).unwrap(), 0.0);
        assert!(gamma(&[0.0, 0.0]).is_err());
        assert!(FundamentalSolution::new(4).is_err());
    }

    proptest! {
        #[test]
        fn harmonic_and_symmetric(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
            prop_assume!(x * x + y * y > 1e-4);
            for p in [vec![x, y], vec![x, y, z]] {
                let m = d2gamma(&p).unwrap();
                let tr: f64 = (0..p.len()).map(|i| m[i][i]).sum();
                let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
                prop_assert!(tr.abs() <= 1e-12 * scale.max(1.0));
                let neg: Vec<f64> = p.iter().map(|v| -v).collect();
                prop_assert_eq!(gamma(&p).unwrap(), gamma(&neg).unwrap());
            }
        }

        #[test]
        fn gradient_matches_difference(x in 0.2f64..2.0, y in -2.0f64..2.0) {
            let e = 1e-6;
            let g = dgamma(&[x, y]).unwrap();
            let fd = (gamma(&[x + e, y]).unwrap() - gamma(&[x - e, y]).unwrap()) / (2.0 * e);
            prop_assert!((g[0] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn discrete_laplacian_of_gamma_is_small() {
        let h = 1e-3;
        let p = [0.4, -0.3, 0.2];
        let mut lap = -6.0 * gamma(&p).unwrap();
        for k in 0..3 {
            for s in [-1.0, 1.0] {
                let mut q = p;
                q[k] += s * h;
                lap += gamma(&q).unwrap();
            }
        }
        assert!((lap / (h * h)).abs() < 1e-3);
    }

    #[test]
    fn unit_density_potential_and_hessian() {
        let lat = ball(3, 0.1);
        let one = SampledField::from_fn(lat.clone(), |_| 1.0);
        let c = lat.nearest_node(&[0.0; 3]);
        let w0 = newtonian_potential_at(&one, &[c]).unwrap()[0];
        assert!((w0 + 0.5).abs() < 0.02, "{w0}");
        let m = potential_hessian(&one, c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((m[i][j] - want).abs() < 1e-3, "{i}{j} {}", m[i][j]);
            }
        }
        let zero = SampledField::from_fn(lat.clone(), |_| 0.0);
        assert_eq!(newtonian_potential_at(&zero, &[c]).unwrap()[0], 0.0);
    }

    #[test]
    fn linear_in_density() {
        let lat = ball(2, 0.1);
        let f = SampledField::from_fn(lat.clone(), |x| x[0] * x[1] + 1.0);
        let g = SampledField::from_fn(lat.clone(), |x| (2.0 * x[0]).sin());
        let ids: Vec<usize> = (0..lat.len()).step_by(17).collect();
        let a = newtonian_potential_at(&f, &ids).unwrap();
        let b = newtonian_potential_at(&g, &ids).unwrap();
        let s = newtonian_potential_at(&f.add(&g).unwrap(), &ids).unwrap();
        for k in 0..ids.len() {
            assert!((s[k] - a[k] - b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn half_ball_surface_flux_is_one() {
        for dim in [2, 3] {
            let lat = build_lattice(
                &DomainShape::HalfBall {
                    center: vec![0.0; dim],
                    radius: 1.0,
                },
                0.1,
            )
            .unwrap();
            let mut x = [0.0; 3];
            x[dim - 1] = 0.3;
            x[0] = 0.1;
            let s = surface_matrix(&lat, &x).unwrap();
            let tr: f64 = (0..dim).map(|i| s[i][i]).sum();
            assert!((tr + 1.0).abs() < 1e-3, "dim {dim}: {tr}");
        }
    }
}
