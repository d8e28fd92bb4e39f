//! Deterministic pair scans shared by every seminorm.
//!
//! A scan visits each unordered node pair once and evaluates both ordered
//! ratios `w(x, y) |v(x) - v(y)| / |x - y|^{α(x)}`. Pairs that provably cannot
//! beat the running maximum are skipped without evaluating `powf`; the bound
//! used for skipping is exact, so the result equals the brute-force maximum.

use crate::domain::{dist, Point};
use crate::error::{Error, Result};

/// Pair weight `w(x, y)` in front of the Hölder quotient.
#[derive(Debug, Clone, Copy)]
pub enum PairWeight<'a> {
    /// `w = 1`
    Unit,
    /// `w = scale^{power + α(x)}`
    Diam { scale: f64, power: f64 },
    /// `w = min(d(x), d(y))^{power + α(x)}`
    MinDist { d: &'a [f64], power: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScan {
    pub value: f64,
    /// Ordered pair `(x, y)` realizing `value`.
    pub argmax: Option<[usize; 2]>,
    pub pairs_scanned: u64,
    pub full_scan: bool,
}

/// Every `p`-th node of `ids` (in order) so that at most `budget` remain.
pub fn sample_nodes(ids: &[usize], budget: usize) -> (Vec<usize>, bool) {
    let budget = budget.max(2);
    if ids.len() <= budget {
        return (ids.to_vec(), true);
    }
    let p = ids.len().div_ceil(budget);
    (ids.iter().copied().step_by(p).collect(), false)
}

fn ordered_ratio(
    weight: &PairWeight,
    wx: f64,
    dmin: f64,
    ax: f64,
    diff: f64,
    distance: f64,
) -> f64 {
    match weight {
        PairWeight::Unit => diff / distance.powf(ax),
        PairWeight::Diam { .. } => wx * diff / distance.powf(ax),
        PairWeight::MinDist { power, .. } => dmin.powf(power + ax) * diff / distance.powf(ax),
    }
}

/// Sup over ordered pairs of `nodes` of the weighted Hölder quotient, taking
/// the max over components.
pub fn scan(
    points: &[Point],
    comps: &[&[f64]],
    alpha: &[f64],
    nodes: &[usize],
    weight: PairWeight,
) -> Result<PairScan> {
    let active = |i: usize| match weight {
        PairWeight::MinDist { d, .. } => d[i] > 0.0,
        _ => true,
    };
    for &i in nodes {
        if !(alpha[i] > 0.0 && alpha[i] <= 1.0) {
            return Err(Error::invalid(format!(
                "exponent {} at node {i} outside (0, 1]",
                alpha[i]
            )));
        }
        if active(i) && comps.iter().any(|c| !c[i].is_finite()) {
            return Err(Error::invalid(format!("non-finite field value at node {i}")));
        }
    }
    let m = nodes.len();
    // Per-node part of the weight: scale^{power+α(x)} or d(x)^{power}.
    let node_w: Vec<f64> = nodes
        .iter()
        .map(|&i| match weight {
            PairWeight::Unit => 1.0,
            PairWeight::Diam { scale, power } => scale.powf(power + alpha[i]),
            PairWeight::MinDist { d, power } => d[i].powf(power),
        })
        .collect();
    let mut best = 0.0f64;
    let mut arg = None;
    for a in 0..m {
        let x = nodes[a];
        if !active(x) {
            continue;
        }
        for b in a + 1..m {
            let y = nodes[b];
            if !active(y) {
                continue;
            }
            let mut diff = 0.0f64;
            for c in comps {
                diff = diff.max((c[x] - c[y]).abs());
            }
            if !(diff > 0.0) {
                continue;
            }
            let distance = dist(&points[x], &points[y]);
            if distance == 0.0 {
                continue;
            }
            let (dmin, bound) = match weight {
                PairWeight::Unit => (0.0, diff / distance.min(1.0)),
                PairWeight::Diam { .. } => (0.0, node_w[a].max(node_w[b]) * diff / distance.min(1.0)),
                PairWeight::MinDist { d, .. } => {
                    let dmin = d[x].min(d[y]);
                    let wk = node_w[a].min(node_w[b]);
                    (dmin, wk * (dmin / distance).max(1.0) * diff)
                }
            };
            if bound * (1.0 + 1e-9) < best {
                continue;
            }
            for (p, q, wp) in [(x, y, node_w[a]), (y, x, node_w[b])] {
                let r = ordered_ratio(&weight, wp, dmin, alpha[p], diff, distance);
                if r > best {
                    best = r;
                    arg = Some([p, q]);
                }
            }
        }
    }
    Ok(PairScan {
        value: best,
        argmax: arg,
        pairs_scanned: (m as u64) * (m.saturating_sub(1) as u64),
        full_scan: true,
    })
}

/// [`scan`] after strided subsampling of `ids` down to `budget` nodes.
pub fn scan_budgeted(
    points: &[Point],
    comps: &[&[f64]],
    alpha: &[f64],
    ids: &[usize],
    weight: PairWeight,
    budget: usize,
) -> Result<PairScan> {
    let (nodes, full) = sample_nodes(ids, budget);
    let mut s = scan(points, comps, alpha, &nodes, weight)?;
    s.full_scan = full;
    Ok(s)
}

/// Recompute the ordered ratio of a single pair (used to confirm argmax).
pub fn pair_ratio(
    points: &[Point],
    comps: &[&[f64]],
    alpha: &[f64],
    pair: [usize; 2],
    weight: PairWeight,
) -> f64 {
    let [x, y] = pair;
    let diff = comps.iter().fold(0.0f64, |m, c| m.max((c[x] - c[y]).abs()));
    let distance = dist(&points[x], &points[y]);
    let (wx, dmin) = match weight {
        PairWeight::Unit => (1.0, 0.0),
        PairWeight::Diam { scale, power } => (scale.powf(power + alpha[x]), 0.0),
        PairWeight::MinDist { d, .. } => (0.0, d[x].min(d[y])),
    };
    ordered_ratio(&weight, wx, dmin, alpha[x], diff, distance)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn brute(points: &[Point], v: &[f64], alpha: &[f64], d: Option<&[f64]>, power: f64) -> f64 {
        let mut best = 0.0f64;
        for x in 0..points.len() {
            for y in 0..points.len() {
                if x == y {
                    continue;
                }
                let diff = (v[x] - v[y]).abs();
                let r = ((0..3).map(|k| (points[x][k] - points[y][k]).powi(2)).sum::<f64>()).sqrt();
                let w = d.map_or(1.0, |d| d[x].min(d[y]).powf(power + alpha[x]));
                if w > 0.0 {
                    best = best.max(w * diff / r.powf(alpha[x]));
                }
            }
        }
        best
    }

    fn cloud(seed: &[(f64, f64, f64, f64, f64)]) -> (Vec<Point>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let pts = seed.iter().map(|s| [s.0, s.1, 0.0]).collect();
        let v = seed.iter().map(|s| s.2).collect();
        let a = seed.iter().map(|s| s.3).collect();
        let d = seed.iter().map(|s| s.4).collect();
        (pts, v, a, d)
    }

    proptest! {
        #[test]
        fn pruned_scan_matches_brute_force(
            seed in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -5.0f64..5.0, 0.05f64..1.0, 0.0f64..1.5), 2..40),
            power in 0.0f64..2.5,
        ) {
            let (pts, v, a, d) = cloud(&seed);
            let ids: Vec<usize> = (0..pts.len()).collect();
            let unit = scan(&pts, &[&v], &a, &ids, PairWeight::Unit).unwrap();
            let b = brute(&pts, &v, &a, None, 0.0);
            prop_assert!((unit.value - b).abs() <= 1e-12 * b.max(1.0));
            let md = scan(&pts, &[&v], &a, &ids, PairWeight::MinDist { d: &d, power }).unwrap();
            let b = brute(&pts, &v, &a, Some(&d), power);
            prop_assert!((md.value - b).abs() <= 1e-12 * b.max(1.0));
            if let Some(p) = md.argmax {
                let r = pair_ratio(&pts, &[&v], &a, p, PairWeight::MinDist { d: &d, power });
                prop_assert_eq!(r, md.value);
            }
        }

        #[test]
        fn subsample_never_exceeds_full(
            seed in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -5.0f64..5.0, 0.05f64..1.0, 0.0f64..1.5), 2..60),
            budget in 2usize..20,
        ) {
            let (pts, v, a, _) = cloud(&seed);
            let ids: Vec<usize> = (0..pts.len()).collect();
            let full = scan(&pts, &[&v], &a, &ids, PairWeight::Unit).unwrap();
            let sub = scan_budgeted(&pts, &[&v], &a, &ids, PairWeight::Unit, budget).unwrap();
            prop_assert!(sub.value <= full.value);
            prop_assert_eq!(sub.full_scan, ids.len() <= budget);
        }
    }

    #[test]
    fn rejects_nan_and_bad_exponent() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        assert!(scan(&pts, &[&[0.0, f64::NAN]], &[0.5, 0.5], &[0, 1], PairWeight::Unit).is_err());
        assert!(scan(&pts, &[&[0.0, 1.0]], &[0.5, 1.5], &[0, 1], PairWeight::Unit).is_err());
    }

    #[test]
    fn zero_weight_nodes_ignored() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let v = [f64::INFINITY, 1.0, 2.0];
        let d = [0.0, 1.0, 1.0];
        let s = scan(&pts, &[&v], &[1.0; 3], &[0, 1, 2], PairWeight::MinDist { d: &d, power: 0.0 }).unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn sampling_is_strided() {
        let ids: Vec<usize> = (0..10).collect();
        assert_eq!(sample_nodes(&ids, 4), (vec![0, 3, 6, 9], false));
        assert!(sample_nodes(&ids, 10).1);
    }
}
