use std::sync::Arc;

use crate::domain::Lattice;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fd::second_pairs;

/// Finite-difference derivative values, stamped with the lattice they were
/// computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub lattice_id: u64,
    pub order: usize,
    /// `first[axis][node]`
    pub first: Vec<Vec<f64>>,
    /// `second[pair][node]`, pairs as in [`second_pairs`].
    pub second: Vec<Vec<f64>>,
}

/// Node values on a lattice, with optional derivative caches.
#[derive(Debug, Clone)]
pub struct SampledField {
    lattice: Arc<Lattice>,
    values: Vec<f64>,
    derivs: Option<Arc<Derivatives>>,
}

impl SampledField {
    pub fn new(lattice: Arc<Lattice>, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::invalid(format!(
                "{} values for a lattice of {} nodes",
                values.len(),
                lattice.len()
            )));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("field contains NaN"));
        }
        Ok(SampledField {
            lattice,
            values,
            derivs: None,
        })
    }

    pub fn from_fn(lattice: Arc<Lattice>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..lattice.len()).map(|i| f(lattice.coords(i))).collect();
        SampledField {
            lattice,
            values,
            derivs: None,
        }
    }

    pub fn from_expr(lattice: Arc<Lattice>, e: &Expression) -> Result<Self> {
        let dim = lattice.dim();
        let values = (0..lattice.len())
            .map(|i| e.evaluate(lattice.coords(i), dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SampledField {
            lattice,
            values,
            derivs: None,
        })
    }

    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        let n = lattice.len();
        SampledField {
            lattice,
            values: vec![0.0; n],
            derivs: None,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn derivatives(&self) -> Option<&Derivatives> {
        self.derivs.as_deref()
    }

    /// Highest cached derivative order (0 when none).
    pub fn order(&self) -> usize {
        self.derivs.as_ref().map_or(0, |d| d.order)
    }

    pub(crate) fn with_derivs(mut self, d: Derivatives) -> Self {
        self.derivs = Some(Arc::new(d));
        self
    }

    /// Component fields `D^β u` for all `|β| = order`.
    pub fn components(&self, order: usize) -> Result<Vec<&[f64]>> {
        if order == 0 {
            return Ok(vec![&self.values]);
        }
        let d = self
            .derivs
            .as_deref()
            .filter(|d| d.order >= order && d.lattice_id == self.lattice.id())
            .ok_or(Error::MissingDerivatives {
                needed: order,
                have: self.order(),
            })?;
        Ok(match order {
            1 => d.first.iter().map(Vec::as_slice).collect(),
            2 => d.second.iter().map(Vec::as_slice).collect(),
            _ => {
                return Err(Error::MissingDerivatives {
                    needed: order,
                    have: d.order,
                })
            }
        })
    }

    /// `c * u`, derivative caches included.
    pub fn scaled(&self, c: f64) -> Self {
        let derivs = self.derivs.as_ref().map(|d| {
            Arc::new(Derivatives {
                lattice_id: d.lattice_id,
                order: d.order,
                first: d.first.iter().map(|v| v.iter().map(|x| c * x).collect()).collect(),
                second: d.second.iter().map(|v| v.iter().map(|x| c * x).collect()).collect(),
            })
        });
        SampledField {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|x| c * x).collect(),
            derivs,
        }
    }

    /// Pointwise sum; derivative caches are dropped.
    pub fn add(&self, other: &SampledField) -> Result<Self> {
        if self.lattice.id() != other.lattice.id() {
            return Err(Error::invalid("fields live on different lattices"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(SampledField {
            lattice: self.lattice.clone(),
            values,
            derivs: None,
        })
    }

    /// Same lattice, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        SampledField::new(self.lattice.clone(), values)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// One `x1,x2,x3,value` row per node; unused coordinates are 0.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from("x1,x2,x3,value\n");
        for (p, v) in self.lattice.points().iter().zip(&self.values) {
            let _ = writeln!(s, "{},{},{},{}", p[0], p[1], p[2], v);
        }
        s
    }

    /// Second-derivative component `D_ij u`.
    pub fn second(&self, i: usize, j: usize) -> Result<&[f64]> {
        let dim = self.lattice.dim();
        let comps = self.components(2)?;
        Ok(comps[crate::fd::second_index(dim, i, j)])
    }

    pub fn second_pairs(&self) -> Vec<(usize, usize)> {
        second_pairs(self.lattice.dim())
    }
}
