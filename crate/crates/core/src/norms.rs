use serde::{Deserialize, Serialize};

use crate::domain::{dist, DistanceFields, Lattice};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::field::SampledField;
use crate::pairs::{scan_budgeted, PairScan, PairWeight};

/// Norm family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Plain,
    /// Weights `diam(Ω)^j` and `diam(Ω)^{k+α(x)}`.
    Primed,
    /// Weights `d_x^j` and `d_{x,y}^{k+α(x)}`.
    Starred,
    /// Starred weights with an extra power `s`.
    WeightedS { s: f64 },
    /// Starred weights built from `d̄` (distance to the boundary minus `T`).
    BoundaryPortion,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Plain => "plain",
            Family::Primed => "primed",
            Family::Starred => "starred",
            Family::WeightedS { .. } => "weighted_s",
            Family::BoundaryPortion => "boundary_portion",
        }
    }

    pub fn s(&self) -> f64 {
        match self {
            Family::WeightedS { s } => *s,
            _ => 0.0,
        }
    }

    fn needs_distance(&self) -> bool {
        !matches!(self, Family::Plain | Family::Primed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub family: String,
    pub k: usize,
    pub s: f64,
    pub seminorm: f64,
    pub norm: f64,
    /// Weighted sup terms for orders `0..=k`.
    pub sup_terms: Vec<f64>,
    pub argmax_pair: Option<[usize; 2]>,
    pub pairs_scanned: u64,
    pub full_scan: bool,
}

impl NormReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// `Σ_j sup terms`, the norm without the seminorm.
    pub fn sup_sum(&self) -> f64 {
        self.sup_terms.iter().sum()
    }
}

/// Per-node weights for one family.
pub struct Weights<'a> {
    family: Family,
    diam: f64,
    d: Option<&'a [f64]>,
}

impl<'a> Weights<'a> {
    pub fn new(family: Family, lat: &Lattice, dist_fields: Option<&'a DistanceFields>) -> Result<Self> {
        if let Family::WeightedS { s } = family {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("weight power s = {s} must be non-negative")));
            }
        }
        let d = if family.needs_distance() {
            let df = dist_fields.ok_or_else(|| {
                Error::invalid(format!("{} norm needs distance fields", family.name()))
            })?;
            if df.d.len() != lat.len() {
                return Err(Error::invalid("distance fields belong to another lattice"));
            }
            Some(if family == Family::BoundaryPortion {
                df.d_bar.as_slice()
            } else {
                df.d.as_slice()
            })
        } else {
            None
        };
        Ok(Weights {
            family,
            diam: lat.diameter(),
            d,
        })
    }

    /// Explicit per-node distance weights (e.g. distance to a ball's boundary).
    pub fn with_distance(family: Family, d: &'a [f64]) -> Self {
        Weights {
            family,
            diam: 0.0,
            d: Some(d),
        }
    }

    /// Weight on the order-`j` sup term at node `i`.
    pub fn node(&self, j: usize, i: usize) -> f64 {
        let p = j as f64 + self.family.s();
        match self.family {
            Family::Plain => 1.0,
            Family::Primed => self.diam.powi(j as i32),
            _ => {
                let d = self.d.expect("distance weights")[i];
                if p == 0.0 {
                    1.0
                } else {
                    d.powf(p)
                }
            }
        }
    }

    pub fn pair(&self, k: usize) -> PairWeight<'a> {
        let power = k as f64 + self.family.s();
        match self.family {
            Family::Plain => PairWeight::Unit,
            Family::Primed => PairWeight::Diam {
                scale: self.diam,
                power,
            },
            _ => PairWeight::MinDist {
                d: self.d.expect("distance weights"),
                power,
            },
        }
    }
}

/// Weighted sup over `ids` of the max over components.
pub fn weighted_sup(comps: &[&[f64]], ids: &[usize], weight: impl Fn(usize) -> f64) -> Result<f64> {
    let mut best = 0.0f64;
    for &i in ids {
        let w = weight(i);
        if w == 0.0 {
            continue;
        }
        for c in comps {
            let v = c[i];
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at node {i}")));
            }
            best = best.max(w * v.abs());
        }
    }
    Ok(best)
}

/// Weighted seminorm of arbitrary component fields over node set `ids`.
pub fn components_seminorm(
    lat: &Lattice,
    comps: &[&[f64]],
    a: &ExponentField,
    weight: PairWeight,
    ids: &[usize],
    budget: usize,
) -> Result<PairScan> {
    a.check_len(lat)?;
    scan_budgeted(lat.points(), comps, a.values(), ids, weight, budget)
}

/// Norm of family `family` and order `k` over the node set `ids`.
pub fn family_norm_on(
    u: &SampledField,
    a: &ExponentField,
    k: usize,
    family: Family,
    dist_fields: Option<&DistanceFields>,
    ids: &[usize],
    budget: usize,
) -> Result<NormReport> {
    let lat = u.lattice();
    a.check_len(lat)?;
    a.check_norm_range()?;
    if k > 2 {
        return Err(Error::invalid(format!("order k = {k} not supported")));
    }
    let w = Weights::new(family, lat, dist_fields)?;
    let mut sup_terms = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let comps = u.components(j)?;
        sup_terms.push(weighted_sup(&comps, ids, |i| w.node(j, i))?);
    }
    let comps = u.components(k)?;
    let s = scan_budgeted(lat.points(), &comps, a.values(), ids, w.pair(k), budget)?;
    Ok(NormReport {
        family: family.name().into(),
        k,
        s: family.s(),
        seminorm: s.value,
        norm: sup_terms.iter().sum::<f64>() + s.value,
        sup_terms,
        argmax_pair: s.argmax,
        pairs_scanned: s.pairs_scanned,
        full_scan: s.full_scan,
    })
}

pub fn family_norm(
    u: &SampledField,
    a: &ExponentField,
    k: usize,
    family: Family,
    dist_fields: Option<&DistanceFields>,
    budget: usize,
) -> Result<NormReport> {
    let ids: Vec<usize> = (0..u.lattice().len()).collect();
    family_norm_on(u, a, k, family, dist_fields, &ids, budget)
}

/// `[u]_{k,α(·),Ω}` (the report's `norm` field also carries the full norm).
pub fn holder_seminorm(u: &SampledField, a: &ExponentField, k: usize, budget: usize) -> Result<NormReport> {
    family_norm(u, a, k, Family::Plain, None, budget)
}

/// `|u|_{k,α(·),Ω} = Σ_j sup|D^j u| + [u]_{k,α(·),Ω}`.
pub fn holder_norm(u: &SampledField, a: &ExponentField, k: usize, budget: usize) -> Result<NormReport> {
    family_norm(u, a, k, Family::Plain, None, budget)
}

pub fn primed_norm(u: &SampledField, a: &ExponentField, k: usize, budget: usize) -> Result<NormReport> {
    family_norm(u, a, k, Family::Primed, None, budget)
}

pub fn starred_norm(
    u: &SampledField,
    a: &ExponentField,
    k: usize,
    dist_fields: &DistanceFields,
    use_boundary_portion: bool,
    budget: usize,
) -> Result<NormReport> {
    let family = if use_boundary_portion {
        Family::BoundaryPortion
    } else {
        Family::Starred
    };
    family_norm(u, a, k, family, Some(dist_fields), budget)
}

pub fn weighted_norm_s(
    u: &SampledField,
    a: &ExponentField,
    k: usize,
    s: f64,
    dist_fields: &DistanceFields,
    budget: usize,
) -> Result<NormReport> {
    family_norm(u, a, k, Family::WeightedS { s }, Some(dist_fields), budget)
}

/// `[u]_{α(·),x} = sup_{y≠x} |u(x)-u(y)| / |x-y|^{α(x)}` over all nodes.
pub fn pointwise_seminorm(u: &SampledField, a: &ExponentField, x: usize) -> Result<f64> {
    let lat = u.lattice();
    a.check_len(lat)?;
    if x >= lat.len() {
        return Err(Error::invalid(format!("node {x} out of range")));
    }
    let ax = a.values()[x];
    if !(ax > 0.0 && ax <= 1.0) {
        return Err(Error::invalid(format!("exponent {ax} at node {x} outside (0, 1]")));
    }
    let v = u.values();
    if !v[x].is_finite() {
        return Err(Error::invalid(format!("non-finite value at node {x}")));
    }
    let px = lat.point(x);
    let mut best = 0.0f64;
    for y in 0..lat.len() {
        if y == x {
            continue;
        }
        let diff = (v[x] - v[y]).abs();
        if diff == 0.0 {
            continue;
        }
        if !v[y].is_finite() {
            return Err(Error::invalid(format!("non-finite value at node {y}")));
        }
        best = best.max(diff / dist(px, lat.point(y)).powf(ax));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::domain::{build_lattice, distance_fields, DomainShape};
    use crate::fd::fd_derivatives;

    fn rect(hi: f64, h: f64) -> Arc<Lattice> {
        Arc::new(
            build_lattice(
                &DomainShape::Rectangle {
                    lo: vec![0.0, 0.0],
                    hi: vec![hi, hi],
                },
                h,
            )
            .unwrap(),
        )
    }

    fn disk(h: f64) -> Arc<Lattice> {
        Arc::new(
            build_lattice(
                &DomainShape::Ball {
                    center: vec![0.0, 0.0],
                    radius: 1.0,
                },
                h,
            )
            .unwrap(),
        )
    }

    fn oracle_seminorm(lat: &Lattice, v: &[f64], a: f64) -> f64 {
        let mut best = 0.0f64;
        for x in 0..lat.len() {
            for y in 0..lat.len() {
                if x != y {
                    let p = lat.coords(x);
                    let q = lat.coords(y);
                    let r = p.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum::<f64>().sqrt();
                    best = best.max((v[x] - v[y]).abs() / r.powf(a));
                }
            }
        }
        best
    }

    #[test]
    fn plain_examples() {
        let lat = rect(1.0, 0.125);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let c = SampledField::from_fn(lat.clone(), |_| 3.0);
        let r = holder_norm(&c, &a, 0, 4096).unwrap();
        assert_eq!((r.seminorm, r.norm), (0.0, 3.0));
        let u = SampledField::from_fn(lat.clone(), |x| x[0]);
        let r = holder_seminorm(&u, &a, 0, 4096).unwrap();
        assert!((r.seminorm - 1.0).abs() < 1e-12);
        let u1 = fd_derivatives(&u, 1).unwrap();
        let r = holder_norm(&u1, &a, 1, 4096).unwrap();
        assert!(r.seminorm < 1e-12 && (r.norm - 2.0).abs() < 1e-12);
        let q = fd_derivatives(&SampledField::from_fn(lat.clone(), |x| x[0] * x[0]), 2).unwrap();
        assert!(holder_seminorm(&q, &a, 2, 4096).unwrap().seminorm < 1e-8);
    }

    #[test]
    fn constant_exponent_matches_oracle_bitwise() {
        let lat = rect(1.0, 0.1);
        let a = ExponentField::constant(&lat, 0.37).unwrap();
        let u = SampledField::from_fn(lat.clone(), |x| (3.0 * x[0]).sin() * x[1] + x[0] * x[0]);
        let r = holder_seminorm(&u, &a, 0, 4096).unwrap();
        assert_eq!(r.seminorm, oracle_seminorm(&lat, u.values(), 0.37));
        let [x, y] = r.argmax_pair.unwrap();
        let d = dist(lat.point(x), lat.point(y));
        assert_eq!(r.seminorm, (u.value(x) - u.value(y)).abs() / d.powf(0.37));
    }

    #[test]
    fn primed_examples() {
        let lat = rect(2.0, 0.25);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let u = SampledField::from_fn(lat.clone(), |x| x[0]);
        let r = primed_norm(&u, &a, 0, 4096).unwrap();
        let d = 8.0f64.sqrt();
        let plain = holder_seminorm(&u, &a, 0, 4096).unwrap().seminorm;
        assert_eq!(r.sup_terms, vec![2.0]);
        assert!((r.seminorm - d.sqrt() * plain).abs() < 1e-12);
        let c = SampledField::from_fn(lat.clone(), |_| -1.5);
        assert_eq!(primed_norm(&c, &a, 0, 4096).unwrap().norm, 1.5);
    }

    #[test]
    fn starred_examples() {
        let lat = disk(0.1);
        let df = distance_fields(&lat);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let c = SampledField::from_fn(lat.clone(), |_| 2.0);
        let r = starred_norm(&c, &a, 0, &df, false, 4096).unwrap();
        assert_eq!((r.seminorm, r.norm), (0.0, 2.0));
        let u = fd_derivatives(&SampledField::from_fn(lat.clone(), |x| x[0]), 1).unwrap();
        let r = starred_norm(&u, &a, 1, &df, false, 4096).unwrap();
        assert!((r.sup_terms[1] - 1.0).abs() < 1e-9);
        let q = fd_derivatives(&SampledField::from_fn(lat.clone(), |x| x[0] * x[0]), 2).unwrap();
        let r = starred_norm(&q, &a, 2, &df, false, 4096).unwrap();
        assert!(r.seminorm < 1e-7);
        assert!((r.sup_terms[2] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn weighted_examples() {
        let lat = disk(0.05);
        let df = distance_fields(&lat);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let one = SampledField::from_fn(lat.clone(), |_| 1.0);
        let r = weighted_norm_s(&one, &a, 0, 2.0, &df, 4096).unwrap();
        assert!((r.sup_terms[0] - 1.0).abs() < 1e-12);
        let inv = SampledField::new(lat.clone(), df.d.iter().map(|d| 1.0 / d).collect()).unwrap();
        let r = weighted_norm_s(&inv, &a, 0, 2.0, &df, 4096).unwrap();
        assert!((r.sup_terms[0] - 1.0).abs() < 1e-12);
        let u = SampledField::from_fn(lat.clone(), |x| x[0] * x[1]);
        let s0 = weighted_norm_s(&u, &a, 0, 0.0, &df, 4096).unwrap();
        let st = starred_norm(&u, &a, 0, &df, false, 4096).unwrap();
        assert_eq!((s0.seminorm, s0.norm), (st.seminorm, st.norm));
    }

    #[test]
    fn pointwise_examples() {
        let lat = rect(1.0, 0.125);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let u = SampledField::from_fn(lat.clone(), |x| x[0]);
        assert!((pointwise_seminorm(&u, &a, 0).unwrap() - 1.0).abs() < 1e-12);
        let g = holder_seminorm(&u, &a, 0, 4096).unwrap().seminorm;
        for x in 0..lat.len() {
            assert!(pointwise_seminorm(&u, &a, x).unwrap() <= g);
        }
        let c = SampledField::from_fn(lat.clone(), |_| 1.0);
        assert_eq!(pointwise_seminorm(&c, &a, 3).unwrap(), 0.0);
    }

    #[test]
    fn report_json_fields() {
        let lat = rect(1.0, 0.25);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let u = SampledField::from_fn(lat.clone(), |x| x[0]);
        let v: serde_json::Value = serde_json::from_str(&holder_norm(&u, &a, 0, 4096).unwrap().to_json()).unwrap();
        for key in ["family", "k", "s", "seminorm", "norm", "argmax_pair", "pairs_scanned", "full_scan"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    fn families() -> Vec<Family> {
        vec![
            Family::Plain,
            Family::Primed,
            Family::Starred,
            Family::WeightedS { s: 1.0 },
            Family::BoundaryPortion,
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn homogeneity_triangle_monotonicity(
            c in -4.0f64..4.0,
            f1 in 0.5f64..4.0,
            f2 in 0.5f64..4.0,
            budget in 10usize..200,
        ) {
            let lat = disk(0.125);
            let df = distance_fields(&lat);
            let a = ExponentField::from_fn(&lat, |x| 0.3 + 0.2 * x[0] * x[0]).unwrap();
            let u = SampledField::from_fn(lat.clone(), |x| (f1 * x[0]).sin() + x[1]);
            let v = SampledField::from_fn(lat.clone(), |x| (f2 * x[1]).cos() * x[0]);
            let uv = u.add(&v).unwrap();
            let cu = u.scaled(c);
            for fam in families() {
                let su = family_norm(&u, &a, 0, fam, Some(&df), 4096).unwrap().seminorm;
                let sv = family_norm(&v, &a, 0, fam, Some(&df), 4096).unwrap().seminorm;
                let suv = family_norm(&uv, &a, 0, fam, Some(&df), 4096).unwrap().seminorm;
                let scu = family_norm(&cu, &a, 0, fam, Some(&df), 4096).unwrap().seminorm;
                prop_assert!((scu - c.abs() * su).abs() <= 1e-12 * su.max(1.0));
                prop_assert!(suv <= su + sv + 1e-12);
                let sub = family_norm(&u, &a, 0, fam, Some(&df), budget).unwrap();
                prop_assert!(sub.seminorm <= su);
                let half: Vec<usize> = (0..lat.len()).filter(|i| i % 3 != 0).collect();
                let part = family_norm_on(&u, &a, 0, fam, Some(&df), &half, 4096).unwrap();
                prop_assert!(part.seminorm <= su);
            }
        }

        #[test]
        fn first_element_convention(f in 0.5f64..4.0) {
            let lat = rect(1.0, 0.125);
            let a = ExponentField::from_fn(&lat, |x| 0.2 + 0.6 * x[0]).unwrap();
            let u = SampledField::from_fn(lat.clone(), |x| (f * x[0]).sin() + x[1] * x[1]);
            let r = holder_seminorm(&u, &a, 0, 4096).unwrap().seminorm;
            let n = lat.len();
            let mut second = 0.0f64;
            for x in 0..n {
                for y in x + 1..n {
                    let d = dist(lat.point(x), lat.point(y));
                    let diff = (u.value(x) - u.value(y)).abs();
                    second = second.max(diff / d.powf(a.values()[y].max(a.values()[x])));
                }
            }
            prop_assert!(r >= second);
        }
    }
}
