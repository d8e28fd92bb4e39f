//! Suite registry, default fixtures and report output.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{build_lattice, DomainShape, Lattice};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::extend::extend_domain;
use crate::expr::parse_expression;
use crate::field::SampledField;
use crate::fixtures::smooth_field;
use crate::verify::annulus::{annulus_example, AnnulusParams};
use crate::verify::ball::BallInputs;
use crate::verify::extension::{extension_checks, mollifier_checks, reflection_check};
use crate::verify::interpolation::InterpolationInputs;
use crate::verify::potential::{potential_consistency, potential_estimate_suite};
use crate::verify::record::{Kind, Status, VerificationRecord};
use crate::verify::schauder::{
    max_principle_fixtures, schauder_suite, solver_convergence, sweep_suite, transform_suite,
};

/// Suite names in report order.
pub const SUITES: [&str; 10] = [
    "annulus_example",
    "interpolation",
    "ball_proposition",
    "extension",
    "mollifier",
    "solver_convergence",
    "potential",
    "transform",
    "schauder",
    "continuity_sweep",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub budget: usize,
    pub seed: u64,
    /// Slack for inequalities whose proof is pointwise on identical pair sets.
    pub slack_pointwise: f64,
    /// Slack for inequalities proved in the continuum, on smooth data.
    pub slack_continuum: f64,
    /// Slack for quadrature-backed potential ratios.
    pub slack_quadrature: f64,
    pub interpolation_fields: usize,
    /// Nodes per side of the square grid.
    pub interpolation_grid: usize,
    pub interpolation_boundary_fields: usize,
    pub mus: Vec<f64>,
    pub ball_fields: usize,
    pub ball_h: f64,
    pub ball_mus: Vec<f64>,
    pub reflection_fields: usize,
    pub reflection_h: f64,
    pub extension_fields: usize,
    pub extension_h: f64,
    pub sigma: f64,
    pub mollifier_fields: usize,
    pub deltas: Vec<f64>,
    pub solver_h: f64,
    pub potential_h: f64,
    pub potential_estimate_h: f64,
    pub transform_count: usize,
    pub transform_vectors: usize,
    pub schauder_h: f64,
    pub schauder_tolerance: f64,
    pub sweep_h: f64,
    pub sweep_steps: usize,
    pub annulus: AnnulusParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            budget: crate::DEFAULT_PAIR_BUDGET,
            seed: 1,
            slack_pointwise: 1e-9,
            slack_continuum: 0.05,
            slack_quadrature: 0.25,
            interpolation_fields: 20,
            interpolation_grid: 64,
            interpolation_boundary_fields: 5,
            mus: vec![0.5, 0.25, 0.125],
            ball_fields: 10,
            ball_h: 1.0 / 32.0,
            ball_mus: vec![0.5, 0.25],
            reflection_fields: 5,
            reflection_h: 1.0 / 32.0,
            extension_fields: 3,
            extension_h: 0.02,
            sigma: 0.1,
            mollifier_fields: 5,
            deltas: vec![0.05, 0.1],
            solver_h: 1.0 / 32.0,
            potential_h: 0.05,
            potential_estimate_h: 0.2,
            transform_count: 100,
            transform_vectors: 1000,
            schauder_h: 1.0 / 16.0,
            schauder_tolerance: 0.2,
            sweep_h: 1.0 / 16.0,
            sweep_steps: 11,
            annulus: AnnulusParams::default(),
        }
    }
}

impl SuiteConfig {
    /// Small fixtures for smoke runs.
    pub fn quick() -> Self {
        SuiteConfig {
            interpolation_fields: 2,
            interpolation_grid: 24,
            interpolation_boundary_fields: 1,
            ball_fields: 2,
            ball_h: 1.0 / 16.0,
            reflection_fields: 1,
            reflection_h: 0.1,
            extension_fields: 1,
            extension_h: 0.04,
            mollifier_fields: 1,
            deltas: vec![0.1],
            solver_h: 1.0 / 16.0,
            potential_h: 0.1,
            potential_estimate_h: 0.4,
            transform_count: 5,
            transform_vectors: 50,
            schauder_h: 1.0 / 8.0,
            sweep_h: 1.0 / 8.0,
            sweep_steps: 3,
            annulus: AnnulusParams {
                h: 0.04,
                ..AnnulusParams::default()
            },
            ..SuiteConfig::default()
        }
    }
}

fn lattice(shape: DomainShape, h: f64) -> Result<Arc<Lattice>> {
    Ok(Arc::new(build_lattice(&shape, h)?))
}

fn disk(radius: f64) -> DomainShape {
    DomainShape::Ball {
        center: vec![0.0, 0.0],
        radius,
    }
}

fn half_disk(radius: f64) -> DomainShape {
    DomainShape::HalfBall {
        center: vec![0.0, 0.0],
        radius,
    }
}

fn annulus(gamma: f64, zeta: f64) -> DomainShape {
    DomainShape::Annulus {
        center: vec![0.0, 0.0],
        inner: gamma,
        outer: zeta,
    }
}

fn radial(lat: &Lattice) -> Result<ExponentField> {
    ExponentField::from_expr(lat, &parse_expression("r")?)
}

/// Annulus example fixture `(f, α) = ((|x|-γ)^{|x|}, |x|)`.
pub fn annulus_fixture(gamma: f64, zeta: f64, h: f64) -> Result<(SampledField, ExponentField)> {
    let lat = lattice(annulus(gamma, zeta), h)?;
    let f = SampledField::from_expr(lat.clone(), &parse_expression(&format!("max(r - {gamma:e}, 0)^r"))?)?;
    Ok((f, radial(&lat)?))
}

pub fn run_interpolation(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let square = lattice(
        DomainShape::Rectangle {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        },
        1.0 / (cfg.interpolation_grid - 1) as f64,
    )?;
    let half = lattice(half_disk(1.0), 1.0 / 48.0)?;
    let mut out = Vec::new();
    let runs = [(square, cfg.interpolation_fields, false), (half, cfg.interpolation_boundary_fields, true)];
    for (lat, count, bp) in runs {
        let a = ExponentField::from_fn(&lat, |x| 0.6 + 0.2 * x[0].abs())?;
        let b = ExponentField::from_fn(&lat, |x| 0.4 + 0.1 * x[1].abs())?;
        for k in 0..count {
            let seed = cfg.seed * 1000 + k as u64;
            let u = crate::fd::fd_derivatives(&smooth_field(seed, lat.clone()), 2)?;
            let fixture = format!("trig seed={seed}");
            let with_beta = InterpolationInputs::new(fixture.clone(), &u, Some(&a), Some(&b), bp, cfg.budget)?;
            let beta_zero = InterpolationInputs::new(fixture, &u, Some(&a), None, bp, cfg.budget)?;
            for &mu in &cfg.mus {
                for (j, kk) in [(0, 1), (0, 2), (1, 2), (0, 0)] {
                    out.push(with_beta.check(j, kk, mu, cfg.slack_continuum));
                }
                for (j, kk) in [(1, 2), (2, 2)] {
                    out.push(beta_zero.check(j, kk, mu, cfg.slack_continuum));
                }
            }
        }
    }
    Ok(out)
}

/// Ball centres used by the proposition suite.
pub const BALL_CENTERS: [[f64; 2]; 5] = [[0.0, 0.0], [0.3, 0.1], [-0.25, 0.4], [0.1, -0.5], [-0.5, -0.3]];

pub fn run_ball(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let lat = lattice(disk(1.0), cfg.ball_h)?;
    let a = ExponentField::from_fn(&lat, |x| 0.4 + 0.3 * (x[0] * x[0] + x[1] * x[1]))?;
    let mut out = Vec::new();
    for k in 0..cfg.ball_fields {
        let seed = cfg.seed * 2000 + k as u64;
        let g = smooth_field(seed, lat.clone());
        let inp = BallInputs::new(format!("trig seed={seed}"), &g, &a)?;
        for c in BALL_CENTERS {
            let x0 = lat.nearest_node(&[c[0], c[1], 0.0]);
            for &mu in &cfg.ball_mus {
                out.extend(inp.check(x0, mu, cfg.slack_pointwise)?);
            }
        }
    }
    Ok(out)
}

pub fn run_extension(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let mut out = Vec::new();
    let half = lattice(half_disk(1.0), cfg.reflection_h)?;
    let ah = ExponentField::from_fn(&half, |x| 0.3 + 0.2 * x[1] + 0.1 * x[0])?;
    for k in 0..cfg.reflection_fields {
        let seed = cfg.seed * 3000 + k as u64;
        let f = smooth_field(seed, half.clone());
        out.push(reflection_check(&format!("trig seed={seed}"), &f, &ah, cfg.slack_pointwise)?);
    }
    let g = cfg.annulus.gamma;
    let z = cfg.annulus.zeta;
    let (f, a) = annulus_fixture(g, z, cfg.extension_h)?;
    out.extend(extension_checks("annulus example", &f, &a, cfg.sigma, cfg.slack_continuum, usize::MAX)?.1);
    for k in 0..cfg.extension_fields {
        let seed = cfg.seed * 4000 + k as u64;
        let f = smooth_field(seed, f.lattice_arc().clone());
        out.extend(extension_checks(&format!("annulus trig seed={seed}"), &f, &a, cfg.sigma, cfg.slack_continuum, usize::MAX)?.1);
    }
    let ball = lattice(disk(1.0), cfg.extension_h * 2.0)?;
    let ab = ExponentField::from_fn(&ball, |x| 0.3 + 0.2 * x[0])?;
    let f = smooth_field(cfg.seed * 4000 + 999, ball.clone());
    out.extend(extension_checks("disk trig", &f, &ab, 2.0 * cfg.sigma, cfg.slack_continuum, usize::MAX)?.1);
    Ok(out)
}

pub fn run_mollifier(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let g = cfg.annulus.gamma;
    let z = cfg.annulus.zeta;
    let (f, a) = annulus_fixture(g, z, cfg.extension_h)?;
    let mut fields = vec![("annulus example".to_string(), f.clone())];
    for k in 0..cfg.mollifier_fields {
        let seed = cfg.seed * 5000 + k as u64;
        fields.push((format!("annulus trig seed={seed}"), smooth_field(seed, f.lattice_arc().clone())));
    }
    let mut out = Vec::new();
    for (name, f) in fields {
        let e = extend_domain(&f, &a, cfg.sigma, cfg.budget)?;
        out.extend(mollifier_checks(&name, &e, &cfg.deltas, cfg.slack_continuum, usize::MAX)?);
    }
    Ok(out)
}

pub fn run_potential(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let mut out = potential_consistency(cfg.potential_h, cfg.seed)?;
    out.extend(potential_estimate_suite(cfg.potential_estimate_h, cfg.slack_quadrature, cfg.budget)?);
    Ok(out)
}

pub fn run_sweep(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let mut out = sweep_suite(cfg.sweep_h, cfg.sweep_steps, cfg.budget)?;
    out.extend(max_principle_fixtures(cfg.sweep_h)?);
    Ok(out)
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    match name {
        "annulus_example" => Ok(annulus_example(&cfg.annulus)?.records),
        "interpolation" => run_interpolation(cfg),
        "ball_proposition" => run_ball(cfg),
        "extension" => run_extension(cfg),
        "mollifier" => run_mollifier(cfg),
        "solver_convergence" => solver_convergence(cfg.solver_h),
        "potential" => run_potential(cfg),
        "transform" => transform_suite(cfg.seed, cfg.transform_count, cfg.transform_vectors),
        "schauder" => schauder_suite(cfg.schauder_h, cfg.schauder_tolerance, usize::MAX),
        "continuity_sweep" => run_sweep(cfg),
        other => Err(Error::invalid(format!(
            "unknown suite '{other}' (expected one of {})",
            SUITES.join(", ")
        ))),
    }
}

/// Every suite in report order.
pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<VerificationRecord>> {
    let mut out = Vec::new();
    for s in SUITES {
        out.extend(run_suite(s, cfg)?);
    }
    Ok(out)
}

/// One JSON object per line.
pub fn to_jsonl(records: &[VerificationRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_json());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub passed: usize,
    pub failed: usize,
    /// Largest `lhs / (rhs (1 + slack) + floor)` over inequality records, or
    /// the largest measured ratio when the suite only has ratio records.
    pub max_ratio: f64,
}

/// Per-suite counts, in order of first appearance. Not-applicable records
/// count as passed.
pub fn summarize(records: &[VerificationRecord]) -> Vec<SuiteSummary> {
    let mut out: Vec<SuiteSummary> = Vec::new();
    let mut has_ineq: Vec<bool> = Vec::new();
    for r in records {
        let k = match out.iter().position(|s| s.suite == r.suite) {
            Some(k) => k,
            None => {
                out.push(SuiteSummary {
                    suite: r.suite.clone(),
                    passed: 0,
                    failed: 0,
                    max_ratio: 0.0,
                });
                has_ineq.push(false);
                out.len() - 1
            }
        };
        if r.passed {
            out[k].passed += 1;
        } else {
            out[k].failed += 1;
        }
        if r.status == Status::NotApplicable {
            continue;
        }
        match r.kind {
            Kind::Inequality => {
                let allowed = r.rhs * (1.0 + r.slack) + r.floor;
                let q = if allowed > 0.0 { r.lhs / allowed } else if r.lhs <= 0.0 { 0.0 } else { f64::INFINITY };
                if !has_ineq[k] {
                    has_ineq[k] = true;
                    out[k].max_ratio = q;
                } else {
                    out[k].max_ratio = out[k].max_ratio.max(q);
                }
            }
            Kind::Ratio if !has_ineq[k] => out[k].max_ratio = out[k].max_ratio.max(r.lhs),
            Kind::Ratio => {}
        }
    }
    out
}

pub fn summary_csv(records: &[VerificationRecord]) -> String {
    let mut s = String::from("suite,passed,failed,max_ratio\n");
    for r in summarize(records) {
        let _ = writeln!(s, "{},{},{},{}", r.suite, r.passed, r.failed, r.max_ratio);
    }
    s
}
