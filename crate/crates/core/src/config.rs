//! Run configuration read from TOML.
//!
//! ```toml
//! pair_budget = 4096
//!
//! [domain]
//! kind = "ball"
//! center = [0.0, 0.0]
//! radius = 1.0
//! h = 0.05
//!
//! [exponent]
//! expr = "0.3 + 0.2 * r"
//!
//! [fields]
//! f = "sin(pi * x1) * x2"
//!
//! [norm]
//! family = "starred"
//! k = 1
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{build_lattice, DomainShape, Lattice};
use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::expr::{parse_expression, Expression};
use crate::field::SampledField;
use crate::norms::Family;
use crate::verify::annulus::AnnulusParams;
use crate::verify::suite::SuiteConfig;
use crate::DEFAULT_PAIR_BUDGET;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: DomainShape,
    pub h: f64,
}

/// Either `expr = "..."` or `constant = 0.5`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSpec {
    pub expr: Option<String>,
    pub constant: Option<f64>,
}

/// Expressions for the data of `Lu = f`, `u = φ` on the boundary. Missing
/// coefficients default to the Laplacian.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpecs {
    pub f: Option<String>,
    pub phi: Option<String>,
    /// Row-major `a^{ij}`, `dim × dim`.
    pub a: Option<Vec<Vec<String>>>,
    pub b: Option<Vec<String>>,
    pub c: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormSpec {
    #[serde(flatten)]
    pub family: Family,
    pub k: usize,
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec {
            family: Family::Plain,
            k: 0,
        }
    }
}

/// Options for `extend`, `mollify` and `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub sigma: f64,
    /// Mollifier radius; chosen by the `ε(δ)` search when absent.
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub tol: f64,
    pub allow_positive_c: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            sigma: 0.1,
            epsilon: None,
            delta: 0.1,
            tol: 1e-10,
            allow_positive_c: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// JSON Lines record stream.
    pub records: Option<PathBuf>,
    /// Summary CSV.
    pub summary: Option<PathBuf>,
    /// Field values as CSV.
    pub field: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pair_budget: usize,
    pub domain: Option<DomainSpec>,
    pub exponent: Option<ExponentSpec>,
    pub fields: FieldSpecs,
    pub norm: NormSpec,
    pub options: Options,
    pub verify: SuiteConfig,
    pub annulus: AnnulusParams,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pair_budget: DEFAULT_PAIR_BUDGET,
            domain: None,
            exponent: None,
            fields: FieldSpecs::default(),
            norm: NormSpec::default(),
            options: Options::default(),
            verify: SuiteConfig::default(),
            annulus: AnnulusParams::default(),
            output: OutputPaths::default(),
        }
    }
}

/// Subcommands and the config sections each one reads.
pub const COMMANDS: [&str; 8] = [
    "norm",
    "logholder",
    "potential",
    "solve",
    "extend",
    "mollify",
    "verify",
    "example-annulus",
];

fn parse_at(key: &str, src: &str) -> Result<Expression> {
    parse_expression(src).map_err(|e| Error::Config(format!("{key}: {e}")))
}

impl RunConfig {
    /// Parse TOML; syntax errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every expression parses and every section `command` needs is present.
    pub fn validate(&self, command: &str) -> Result<()> {
        if !COMMANDS.contains(&command) {
            return Err(Error::Config(format!("unknown subcommand `{command}`")));
        }
        for (k, v) in self.expressions() {
            parse_at(&k, v)?;
        }
        if let Some(e) = &self.exponent {
            match (&e.expr, e.constant) {
                (Some(_), Some(_)) => return Err(Error::Config("exponent: give either expr or constant".into())),
                (None, None) => return Err(Error::Config("exponent: expr or constant required".into())),
                _ => {}
            }
        }
        if let Some(d) = &self.domain {
            d.shape.validate().map_err(|e| Error::Config(format!("domain: {e}")))?;
            if let Some(a) = &self.fields.a {
                let n = d.shape.dim();
                if a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("fields.a must be {n} x {n}")));
                }
            }
            if let Some(b) = &self.fields.b {
                if b.len() != d.shape.dim() {
                    return Err(Error::Config(format!("fields.b must have {} entries", d.shape.dim())));
                }
            }
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("`{command}` requires {what}")))
            }
        };
        let (dom, exp, f) = (self.domain.is_some(), self.exponent.is_some(), self.fields.f.is_some());
        match command {
            "norm" | "extend" | "mollify" => {
                need(dom, "[domain]")?;
                need(exp, "[exponent]")?;
                need(f, "fields.f")
            }
            "logholder" => {
                need(dom, "[domain]")?;
                need(exp, "[exponent]")
            }
            "potential" | "solve" => {
                need(dom, "[domain]")?;
                need(f, "fields.f")
            }
            _ => Ok(()),
        }
    }

    fn expressions(&self) -> Vec<(String, &str)> {
        let mut out = Vec::new();
        if let Some(Some(e)) = self.exponent.as_ref().map(|e| e.expr.as_ref()) {
            out.push(("exponent.expr".to_string(), e.as_str()));
        }
        let fs = &self.fields;
        for (k, v) in [("fields.f", &fs.f), ("fields.phi", &fs.phi), ("fields.c", &fs.c)] {
            if let Some(v) = v {
                out.push((k.to_string(), v.as_str()));
            }
        }
        if let Some(a) = &fs.a {
            for (i, row) in a.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    out.push((format!("fields.a[{i}][{j}]"), v.as_str()));
                }
            }
        }
        if let Some(b) = &fs.b {
            for (i, v) in b.iter().enumerate() {
                out.push((format!("fields.b[{i}]"), v.as_str()));
            }
        }
        out
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        let d = self.domain.as_ref().ok_or_else(|| Error::Config("missing [domain]".into()))?;
        Ok(Arc::new(build_lattice(&d.shape, d.h)?))
    }

    pub fn exponent_field(&self, lat: &Lattice) -> Result<ExponentField> {
        let e = self.exponent.as_ref().ok_or_else(|| Error::Config("missing [exponent]".into()))?;
        match (&e.expr, e.constant) {
            (Some(s), None) => ExponentField::from_expr(lat, &parse_at("exponent.expr", s)?),
            (None, Some(c)) => ExponentField::constant(lat, c),
            _ => Err(Error::Config("exponent: give exactly one of expr, constant".into())),
        }
    }

    fn sampled(&self, lat: &Arc<Lattice>, key: &str, src: Option<&String>) -> Result<Option<SampledField>> {
        src.map(|s| SampledField::from_expr(lat.clone(), &parse_at(key, s)?)).transpose()
    }

    pub fn f(&self, lat: &Arc<Lattice>) -> Result<SampledField> {
        self.sampled(lat, "fields.f", self.fields.f.as_ref())?
            .ok_or_else(|| Error::Config("missing fields.f".into()))
    }

    /// `φ`, zero when absent.
    pub fn phi(&self, lat: &Arc<Lattice>) -> Result<SampledField> {
        Ok(self
            .sampled(lat, "fields.phi", self.fields.phi.as_ref())?
            .unwrap_or_else(|| SampledField::zeros(lat.clone())))
    }

    pub fn operator(&self, lat: &Arc<Lattice>) -> Result<EllipticOperator> {
        let fs = &self.fields;
        if fs.a.is_none() && fs.b.is_none() && fs.c.is_none() {
            return Ok(EllipticOperator::laplacian(lat.clone()));
        }
        let n = lat.dim();
        let zero = || "0".to_string();
        let a = fs.a.clone().unwrap_or_else(|| {
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { "1".into() } else { zero() }).collect())
                .collect()
        });
        let b = fs.b.clone().unwrap_or_else(|| vec![zero(); n]);
        let c = fs.c.clone().unwrap_or_else(zero);
        let mut ae = Vec::with_capacity(n);
        for (i, row) in a.iter().enumerate() {
            let mut r = Vec::with_capacity(n);
            for (j, s) in row.iter().enumerate() {
                r.push(parse_at(&format!("fields.a[{i}][{j}]"), s)?);
            }
            ae.push(r);
        }
        let be = b
            .iter()
            .enumerate()
            .map(|(i, s)| parse_at(&format!("fields.b[{i}]"), s))
            .collect::<Result<Vec<_>>>()?;
        let ce = parse_at("fields.c", &c)?;
        EllipticOperator::from_exprs(lat.clone(), &ae, &be, &ce)
    }
}

/// Header object written as the first JSON Lines record: the command and the
/// configuration with every default filled in.
pub fn report_header(command: &str, cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "header": {
            "tool": "varholder",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "default_floor": crate::verify::record::DEFAULT_FLOOR,
            "config": cfg,
        }
    })
}
