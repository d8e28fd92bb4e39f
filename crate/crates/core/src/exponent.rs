use serde::Serialize;

use crate::domain::{dist, Lattice};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::pairs::sample_nodes;

/// Sampled variable exponent α, one value per lattice node.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    values: Vec<f64>,
    alpha_minus: f64,
    alpha_plus: f64,
}

impl ExponentField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty exponent field"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite exponent value {v}")));
        }
        let alpha_minus = values.iter().copied().fold(f64::INFINITY, f64::min);
        let alpha_plus = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(ExponentField {
            values,
            alpha_minus,
            alpha_plus,
        })
    }

    pub fn constant(lat: &Lattice, a: f64) -> Result<Self> {
        Self::new(vec![a; lat.len()])
    }

    pub fn from_fn(lat: &Lattice, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new((0..lat.len()).map(|i| f(lat.coords(i))).collect())
    }

    pub fn from_expr(lat: &Lattice, e: &Expression) -> Result<Self> {
        let dim = lat.dim();
        let v = (0..lat.len())
            .map(|i| e.evaluate(lat.coords(i), dim))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn alpha_minus(&self) -> f64 {
        self.alpha_minus
    }

    pub fn alpha_plus(&self) -> f64 {
        self.alpha_plus
    }

    /// `α - delta` at every node.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|a| a - delta).collect())
    }

    /// Values restricted to `ids`, in that order.
    pub fn restrict(&self, ids: &[usize]) -> Result<Self> {
        Self::new(ids.iter().map(|&i| self.values[i]).collect())
    }

    /// Norm evaluation accepts `0 < α ≤ 1`.
    pub fn check_norm_range(&self) -> Result<()> {
        if self.alpha_minus > 0.0 && self.alpha_plus <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "exponent range [{}, {}] not inside (0, 1]",
                self.alpha_minus, self.alpha_plus
            )))
        }
    }

    pub(crate) fn check_len(&self, lat: &Lattice) -> Result<()> {
        if self.values.len() != lat.len() {
            return Err(Error::invalid(format!(
                "exponent has {} values, lattice has {} nodes",
                self.values.len(),
                lat.len()
            )));
        }
        Ok(())
    }
}

/// `(inf, sup)` of α over `subset`.
pub fn exponent_bounds(a: &ExponentField, subset: &[usize]) -> Result<(f64, f64)> {
    if subset.is_empty() {
        return Err(Error::invalid("empty node subset"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &i in subset {
        let v = *a
            .values
            .get(i)
            .ok_or_else(|| Error::invalid(format!("node {i} out of range")))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogHolderScan {
    pub value: f64,
    pub argmax_pair: Option<[usize; 2]>,
    pub pairs_scanned: u64,
    pub full_scan: bool,
}

/// Max of `|ln|x-y|| |α(x)-α(y)|` over the pair sample of `ids`.
pub fn log_holder_scan_on(a: &ExponentField, lat: &Lattice, ids: &[usize], budget: usize) -> LogHolderScan {
    let (nodes, full) = sample_nodes(ids, budget);
    let v = &a.values;
    let mut best = 0.0f64;
    let mut arg = None;
    for (k, &x) in nodes.iter().enumerate() {
        for &y in &nodes[k + 1..] {
            let da = (v[x] - v[y]).abs();
            if da == 0.0 {
                continue;
            }
            let r = dist(lat.point(x), lat.point(y));
            if r == 0.0 {
                continue;
            }
            let m = r.ln().abs() * da;
            if m > best {
                best = m;
                arg = Some([x, y]);
            }
        }
    }
    let m = nodes.len() as u64;
    LogHolderScan {
        value: best,
        argmax_pair: arg,
        pairs_scanned: m * m.saturating_sub(1) / 2,
        full_scan: full,
    }
}

pub fn log_holder_scan(a: &ExponentField, lat: &Lattice, budget: usize) -> LogHolderScan {
    let ids: Vec<usize> = (0..lat.len()).collect();
    log_holder_scan_on(a, lat, &ids, budget)
}

/// Grid lower bound for the log-Hölder constant of α.
pub fn log_holder_constant(a: &ExponentField, lat: &Lattice, budget: usize) -> f64 {
    log_holder_scan(a, lat, budget).value
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub c_log: f64,
    pub full_scan: bool,
    pub reason: Option<String>,
}

/// Membership test for the log-Hölder class: `0 < α⁻ ≤ α⁺ < 1`, with the
/// grid estimate of the log-Hölder constant attached.
pub fn check_admissible(a: &ExponentField, lat: &Lattice, budget: usize) -> Admissibility {
    let s = log_holder_scan(a, lat, budget);
    let (lo, hi) = (a.alpha_minus, a.alpha_plus);
    let reason = if lo <= 0.0 {
        Some(format!("alpha_minus = {lo} is not positive"))
    } else if hi >= 1.0 {
        Some(format!("alpha_plus = {hi} is not below 1"))
    } else {
        None
    };
    Admissibility {
        admissible: reason.is_none(),
        alpha_minus: lo,
        alpha_plus: hi,
        c_log: s.value,
        full_scan: s.full_scan,
        reason,
    }
}
