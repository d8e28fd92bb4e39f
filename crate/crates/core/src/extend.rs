//! Half-ball reflection, tubular extension across the boundary of a ball or
//! annulus, and mollification.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{
    build_enlarged, dist, mirror_halfball, star_map, DomainShape, Lattice, NodeClass, Point,
};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::field::SampledField;

/// `(f*, α*)` on the doubled lattice `D`.
#[derive(Debug, Clone)]
pub struct Reflection {
    pub lattice: Arc<Lattice>,
    pub f: SampledField,
    pub alpha: ExponentField,
    /// Half-ball node each `D` node copies.
    pub source: Vec<usize>,
    pub mirrored: Vec<bool>,
}

pub fn reflect_halfball(f: &SampledField, a: &ExponentField) -> Result<Reflection> {
    let base = f.lattice();
    a.check_len(base)?;
    let m = mirror_halfball(base)?;
    let lattice = Arc::new(m.lattice);
    let fv = m.source.iter().map(|&s| f.value(s)).collect();
    let av = m.source.iter().map(|&s| a.values()[s]).collect();
    Ok(Reflection {
        f: SampledField::new(lattice.clone(), fv)?,
        alpha: ExponentField::new(av)?,
        lattice,
        source: m.source,
        mirrored: m.mirrored,
    })
}

/// Convex interpolation weights of a base lattice at an arbitrary point:
/// multilinear when the enclosing grid cell is complete, inverse-distance
/// otherwise.
pub fn interpolation_weights(lat: &Lattice, x: &Point) -> Result<Vec<(usize, f64)>> {
    if let Some(j) = lat.find_node(x, 1e-12 * lat.h()) {
        return Ok(vec![(j, 1.0)]);
    }
    let dim = lat.dim();
    let h = lat.h();
    let cell = lat.cell_of(x);
    let lo = lat.grid_point(&cell);
    let mut out = Vec::with_capacity(1 << dim);
    let mut complete = true;
    for corner in 0..(1usize << dim) {
        let mut g = cell;
        let mut w = 1.0;
        for k in 0..dim {
            let t = ((x[k] - lo[k]) / h).clamp(0.0, 1.0);
            if corner >> k & 1 == 1 {
                g[k] += 1;
                w *= t;
            } else {
                w *= 1.0 - t;
            }
        }
        match lat.node_at(&g) {
            Some(j) => {
                if w > 0.0 {
                    out.push((j, w));
                }
            }
            None if w > 0.0 => {
                complete = false;
                break;
            }
            None => {}
        }
    }
    if complete && !out.is_empty() {
        return Ok(out);
    }
    let near = lat.nearest_node(x);
    for radius in [2.0, 3.0] {
        let cand: Vec<(usize, f64)> = lat
            .nearby_nodes(near, radius as i64)
            .into_iter()
            .map(|j| (j, dist(lat.point(j), x)))
            .filter(|&(_, d)| d <= radius * h)
            .collect();
        if !cand.is_empty() {
            let mut w: Vec<(usize, f64)> = cand.iter().map(|&(j, d)| (j, 1.0 / (d * d))).collect();
            let s: f64 = w.iter().map(|e| e.1).sum();
            for e in &mut w {
                e.1 /= s;
            }
            return Ok(w);
        }
    }
    Err(Error::invalid(format!("no lattice nodes near {x:?}")))
}

fn interpolate(w: &[(usize, f64)], v: &[f64]) -> f64 {
    w.iter().map(|&(j, c)| c * v[j]).sum()
}

/// `(f̄, ᾱ)` on the σ-enlarged lattice `Ω_σ`.
#[derive(Debug, Clone)]
pub struct Extension {
    pub base: Arc<Lattice>,
    pub lattice: Arc<Lattice>,
    pub f: SampledField,
    pub alpha: ExponentField,
    /// Enlarged-lattice id of each base node.
    pub base_ids: Vec<usize>,
    /// Point whose (interpolated) values each enlarged node carries:
    /// the node itself inside `Ω̄`, its star image outside.
    pub source_points: Vec<Point>,
    pub sigma: f64,
    pub report: ExtensionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// Measured bilipschitz constant of the star map over pairs of band nodes.
    pub k_measured: f64,
    /// Analytic bound `max_k (R_k + σ)/(R_k - σ)` over the boundary shells.
    pub k_analytic: f64,
    pub pairs_scanned: u64,
    pub full_scan: bool,
    /// `ᾱ⁻ - α⁻` and `ᾱ⁺ - α⁺`.
    pub alpha_minus_shift: f64,
    pub alpha_plus_shift: f64,
}

pub fn extend_domain(f: &SampledField, a: &ExponentField, sigma: f64, budget: usize) -> Result<Extension> {
    let base = f.lattice_arc().clone();
    a.check_len(&base)?;
    let shape = base.shape().clone();
    if !matches!(shape, DomainShape::Ball { .. } | DomainShape::Annulus { .. }) {
        return Err(Error::invalid("extension needs a ball or annulus"));
    }
    let e = build_enlarged(&base, sigma)?;
    let lat = Arc::new(e.lattice);
    let n = lat.len();
    let mut fv = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut src = Vec::with_capacity(n);
    for i in 0..n {
        match e.source[i] {
            Some(b) => {
                fv[i] = f.value(b);
                av[i] = a.values()[b];
                src.push(*lat.point(i));
            }
            None => {
                let xs = star_map(&shape, lat.point(i), sigma)?;
                let w = interpolation_weights(&base, &xs)?;
                fv[i] = interpolate(&w, f.values());
                av[i] = interpolate(&w, a.values());
                src.push(xs);
            }
        }
    }
    let alpha = ExponentField::new(av)?;
    let band: Vec<usize> = (0..n).filter(|&i| e.source[i].is_none()).collect();
    let (k_measured, pairs_scanned, full_scan) = measure_bilipschitz(&lat, &band, &src, budget);
    let k_analytic = shape.shell_lipschitz_bound(sigma)?;
    let report = ExtensionReport {
        k_measured,
        k_analytic,
        pairs_scanned,
        full_scan,
        alpha_minus_shift: alpha.alpha_minus() - a.alpha_minus(),
        alpha_plus_shift: alpha.alpha_plus() - a.alpha_plus(),
    };
    Ok(Extension {
        base,
        f: SampledField::new(lat.clone(), fv)?,
        alpha,
        lattice: lat,
        base_ids: e.base_ids,
        source_points: src,
        sigma,
        report,
    })
}

/// `max(|s(x)-s(y)|/|x-y|, |x-y|/|s(x)-s(y)|)` over pairs drawn from `ids`.
fn measure_bilipschitz(lat: &Lattice, ids: &[usize], src: &[Point], budget: usize) -> (f64, u64, bool) {
    let (nodes, full) = crate::pairs::sample_nodes(ids, budget);
    let mut k = 1.0f64;
    for (a, &x) in nodes.iter().enumerate() {
        for &y in &nodes[a + 1..] {
            let d = dist(lat.point(x), lat.point(y));
            let ds = dist(&src[x], &src[y]);
            if d > 0.0 && ds > 0.0 {
                k = k.max(ds / d).max(d / ds);
            }
        }
    }
    let m = nodes.len() as u64;
    (k, m * m.saturating_sub(1) / 2, full)
}

/// Discrete bump kernel of radius ε, renormalized at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifierKernel {
    pub epsilon: f64,
    pub h: f64,
}

impl MollifierKernel {
    pub fn new(epsilon: f64, h: f64) -> Result<Self> {
        if !(epsilon >= 2.0 * h) {
            return Err(Error::invalid(format!("epsilon {epsilon} below 2h = {}", 2.0 * h)));
        }
        Ok(MollifierKernel { epsilon, h })
    }

    /// Unnormalized weight at distance `r`.
    pub fn bump(&self, r: f64) -> f64 {
        let s = r / self.epsilon;
        if s >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    }

    /// Normalized weights over the grid nodes of `lat` within ε of `x`.
    pub fn weights(&self, lat: &Lattice, x: &Point) -> Vec<(usize, f64)> {
        let dim = lat.dim();
        let reach = (self.epsilon / self.h).ceil() as i64 + 1;
        let g = lat.cell_of(x);
        let mut out = Vec::new();
        let span = |k: usize| if k < dim { -reach..=reach + 1 } else { 0..=0 };
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    let q = [g[0] + a, g[1] + b, g[2] + c];
                    if let Some(j) = lat.node_at(&q) {
                        let w = self.bump(dist(lat.point(j), x));
                        if w > 0.0 {
                            out.push((j, w));
                        }
                    }
                }
            }
        }
        let s: f64 = out.iter().map(|e| e.1).sum();
        for e in &mut out {
            e.1 /= s;
        }
        out
    }
}

/// `f_ε = φ_ε * f̄` on the base lattice `Ω`.
pub fn mollify(ext: &Extension, epsilon: f64) -> Result<SampledField> {
    if !(epsilon < ext.sigma) {
        return Err(Error::invalid(format!(
            "epsilon {epsilon} must be below sigma {}",
            ext.sigma
        )));
    }
    let kernel = MollifierKernel::new(epsilon, ext.lattice.h())?;
    let v = ext.f.values();
    let out = ext
        .base_ids
        .iter()
        .map(|&id| {
            let w = kernel.weights(&ext.lattice, ext.lattice.point(id));
            if w.is_empty() {
                return Err(Error::invalid(format!("empty kernel support at node {id}")));
            }
            Ok(interpolate(&w, v))
        })
        .collect::<Result<Vec<_>>>()?;
    SampledField::new(ext.base.clone(), out)
}

/// `max |α(x) - α(y)|` over node pairs closer than `eps`.
pub fn continuity_modulus(lat: &Lattice, a: &ExponentField, eps: f64) -> f64 {
    let v = a.values();
    let mut order: Vec<usize> = (0..lat.len()).collect();
    order.sort_by(|&i, &j| lat.point(i)[0].total_cmp(&lat.point(j)[0]));
    let mut worst = 0.0f64;
    for (k, &x) in order.iter().enumerate() {
        let px = lat.point(x);
        for &y in &order[k + 1..] {
            let py = lat.point(y);
            if py[0] - px[0] >= eps {
                break;
            }
            if dist(px, py) < eps {
                worst = worst.max((v[x] - v[y]).abs());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSearch {
    pub delta: f64,
    pub epsilon: f64,
    pub modulus: f64,
    /// `(ε_k, modulus_k)` for every candidate tried.
    pub trail: Vec<(f64, f64)>,
}

/// Largest `ε_k = max(ε₀/2^k, 2h)` with the modulus of `ᾱ` below `delta`,
/// starting from `ε₀ = 0.9 σ`.
pub fn epsilon_search(ext: &Extension, delta: f64) -> Result<EpsilonSearch> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let floor = 2.0 * ext.lattice.h();
    if floor >= ext.sigma {
        return Err(Error::invalid(format!(
            "spacing {} too coarse for sigma {}: the kernel needs 2h < sigma",
            ext.lattice.h(),
            ext.sigma
        )));
    }
    let mut eps = 0.9 * ext.sigma;
    let mut trail = Vec::new();
    loop {
        let eps_k = eps.max(floor);
        let m = continuity_modulus(&ext.lattice, &ext.alpha, eps_k);
        trail.push((eps_k, m));
        if m < delta {
            return Ok(EpsilonSearch {
                delta,
                epsilon: eps_k,
                modulus: m,
                trail,
            });
        }
        if eps_k <= floor {
            return Err(Error::Hypothesis(format!(
                "exponent modulus {m} at the finest epsilon {eps_k} is not below delta {delta}"
            )));
        }
        eps /= 2.0;
    }
}

/// Nodes of `Ω_σ` lying outside `Ω̄`.
pub fn band_nodes(ext: &Extension) -> Vec<usize> {
    (0..ext.lattice.len())
        .filter(|&i| ext.lattice.class(i) == NodeClass::Outside)
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::domain::build_lattice;
    use crate::norms::{holder_norm, primed_norm};

    fn annulus(h: f64) -> Arc<Lattice> {
        Arc::new(
            build_lattice(
                &DomainShape::Annulus {
                    center: vec![0.0, 0.0],
                    inner: 0.2,
                    outer: 0.8,
                },
                h,
            )
            .unwrap(),
        )
    }

    fn half_disk(h: f64) -> Arc<Lattice> {
        Arc::new(
            build_lattice(
                &DomainShape::HalfBall {
                    center: vec![0.0, 0.0],
                    radius: 1.0,
                },
                h,
            )
            .unwrap(),
        )
    }

    fn radius(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn reflection_examples() {
        let lat = half_disk(0.125);
        let a = ExponentField::from_fn(&lat, |x| 0.3 + 0.2 * x[1]).unwrap();
        let c = SampledField::from_fn(lat.clone(), |_| 2.5);
        let r = reflect_halfball(&c, &a).unwrap();
        assert!(r.f.values().iter().all(|v| *v == 2.5));
        let xn = SampledField::from_fn(lat.clone(), |x| x[1]);
        let r = reflect_halfball(&xn, &a).unwrap();
        for i in 0..r.lattice.len() {
            assert_eq!(r.f.value(i), r.lattice.point(i)[1].abs());
        }
        let d = primed_norm(&r.f, &r.alpha, 0, 100_000).unwrap();
        let b = primed_norm(&xn, &a, 0, 100_000).unwrap();
        assert!(d.norm <= b.norm * (1.0 + 1e-9));
        let flat = SampledField::from_fn(lat.clone(), |_| 0.0);
        assert!(reflect_halfball(&flat, &ExponentField::constant(&annulus(0.1), 0.5).unwrap()).is_err());
    }

    #[test]
    fn extension_examples() {
        let lat = annulus(0.05);
        let a = ExponentField::from_fn(&lat, radius).unwrap();
        let c = SampledField::from_fn(lat.clone(), |_| -1.0);
        let e = extend_domain(&c, &a, 0.1, 4096).unwrap();
        assert!(e.f.values().iter().all(|v| (*v + 1.0).abs() < 1e-15));
        for (k, &id) in e.base_ids.iter().enumerate() {
            assert_eq!(e.alpha.values()[id], a.values()[k]);
        }
        assert!(e.report.k_measured <= e.report.k_analytic * (1.0 + 1e-9));
        assert!(e.report.alpha_minus_shift >= -1e-12 && e.report.alpha_plus_shift <= 1e-12);
        let f = SampledField::from_fn(lat.clone(), |x| (x[0] * 3.0).sin() + x[1]);
        let e = extend_domain(&f, &a, 0.1, 4096).unwrap();
        for (k, &id) in e.base_ids.iter().enumerate() {
            assert_eq!(e.f.value(id), f.value(k));
        }
        let lhs = holder_norm(&e.f, &e.alpha, 0, 100_000).unwrap().norm;
        let rhs = holder_norm(&f, &a, 0, 100_000).unwrap().norm;
        assert!(lhs <= e.report.k_measured.powf(a.alpha_plus()) * rhs * 1.05, "{lhs} {rhs}");
        assert!(extend_domain(&f, &a, 0.5, 4096).is_err());
    }

    #[test]
    fn mollifier_examples() {
        let lat = annulus(0.05);
        let a = ExponentField::from_fn(&lat, radius).unwrap();
        let c = SampledField::from_fn(lat.clone(), |_| 4.0);
        let e = extend_domain(&c, &a, 0.15, 4096).unwrap();
        let m = mollify(&e, 0.12).unwrap();
        assert!(m.values().iter().all(|v| (v - 4.0).abs() < 1e-12));
        assert!(mollify(&e, 0.2).is_err());
        assert!(mollify(&e, 0.05).is_err());
        let f = SampledField::from_fn(lat.clone(), |x| (5.0 * x[0]).sin() * x[1]);
        let e = extend_domain(&f, &a, 0.15, 4096).unwrap();
        let m = mollify(&e, 0.12).unwrap();
        assert!(m.sup() <= e.f.sup() + 1e-12);
        let s = epsilon_search(&e, 0.15).unwrap();
        assert!(s.modulus < 0.15 && s.epsilon >= 0.1);
        assert!(epsilon_search(&e, 0.05).is_err());
    }

    #[test]
    fn kernel_weights_sum_to_one() {
        let lat = annulus(0.05);
        let k = MollifierKernel::new(0.13, 0.05).unwrap();
        let w = k.weights(&lat, lat.point(100));
        let s: f64 = w.iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|&(j, x)| x >= 0.0 && dist(lat.point(j), lat.point(100)) < 0.13));
    }

    #[test]
    fn mollifier_converges() {
        let lat = annulus(0.02);
        let a = ExponentField::from_fn(&lat, radius).unwrap();
        let f = SampledField::from_fn(lat.clone(), |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let e = extend_domain(&f, &a, 0.15, 512).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.14, 0.1, 0.07, 0.05] {
            let m = mollify(&e, eps).unwrap();
            let err = m.values().iter().zip(f.values()).fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
            // The reflected extension has a kink, so the error is O(ε).
            assert!(err <= eps, "{eps}: {err}");
            assert!(err <= prev + 1e-12, "{eps}: {err} > {prev}");
            prev = err;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn interpolation_is_convex(x in -0.75f64..0.75, y in -0.75f64..0.75) {
            let lat = annulus(0.05);
            let r = (x * x + y * y).sqrt();
            prop_assume!(r > 0.21 && r < 0.79);
            let w = interpolation_weights(&lat, &[x, y, 0.0]).unwrap();
            let s: f64 = w.iter().map(|e| e.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|e| e.1 >= 0.0));
        }

        #[test]
        fn mirror_symmetry(k in 0usize..1000) {
            let lat = half_disk(0.1);
            let a = ExponentField::from_fn(&lat, |x| 0.3 + 0.1 * x[0]).unwrap();
            let f = SampledField::from_fn(lat.clone(), |x| x[0] * x[0] - x[1]);
            let r = reflect_halfball(&f, &a).unwrap();
            let i = k % r.lattice.len();
            let mut p = *r.lattice.point(i);
            p[1] = -p[1];
            let j = r.lattice.find_node(&p, 1e-12).unwrap();
            prop_assert_eq!(r.f.value(i), r.f.value(j));
            prop_assert_eq!(r.alpha.values()[i], r.alpha.values()[j]);
        }
    }
}
