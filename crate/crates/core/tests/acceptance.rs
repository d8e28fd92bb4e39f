//! Acceptance criteria. Runs with `harness = false` so that every criterion
//! prints one PASS/FAIL line; the process exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use varholder::domain::{build_lattice, DomainShape, Lattice, NodeClass};
use varholder::elliptic::{
    constant_coeff_transform, continuity_sweep, interior_residual, solve_dirichlet, DirichletProblem,
    EllipticOperator, SolveOptions,
};
use varholder::exponent::ExponentField;
use varholder::field::SampledField;
use varholder::fixtures::{random_vector, rng, spd_matrix};
use varholder::potential::{newtonian_potential_at, FundamentalSolution, HessianEvaluator};
use varholder::verify::annulus::{annulus_example, AnnulusParams};
use varholder::verify::record::{Status, VerificationRecord};
use varholder::verify::schauder::schauder_suite;
use varholder::verify::suite::{run_ball, run_extension, run_interpolation, run_mollifier, SuiteConfig};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `lhs ≤ rhs (1 + slack) + floor` with constants pinned by the caller.
fn holds(r: &VerificationRecord, slack: f64, floor: f64) -> bool {
    r.lhs <= r.rhs * (1.0 + slack) + floor
}

fn check_records<'a>(
    recs: impl IntoIterator<Item = &'a VerificationRecord>,
    slack: f64,
    floor: f64,
) -> Result<usize, String> {
    let mut n = 0;
    for r in recs {
        if r.status == Status::NotApplicable {
            return Err(format!("{}:{} [{}] not applicable: {}", r.suite, r.id, r.fixture, r.note));
        }
        ensure(holds(r, slack, floor), || {
            format!("{}:{} [{}] lhs {} > rhs {} (slack {slack})", r.suite, r.id, r.fixture, r.lhs, r.rhs)
        })?;
        n += 1;
    }
    Ok(n)
}

fn square(h: f64) -> Arc<Lattice> {
    Arc::new(
        build_lattice(
            &DomainShape::Rectangle {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            h,
        )
        .unwrap(),
    )
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let p = AnnulusParams {
        gamma: 0.2,
        zeta: 0.8,
        beta: 0.5,
        n_min: 0,
        n_max: 12,
        h: 0.005,
        threshold: Some(4.0),
        seminorm_budget: usize::MAX,
        log_budget: 4096,
    };
    let rep = annulus_example(&p).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let semi = rep.records.iter().find(|r| r.id == "seminorm").unwrap();
    ensure(semi.full_scan, || "seminorm scan was subsampled".into())?;
    ensure(rep.seminorm <= 1.0 + 1e-6, || format!("[f]_a = {} > 1 + 1e-6", rep.seminorm))?;
    let mut failures = Vec::new();
    for pt in &rep.ratios {
        // Bound evaluated independently of the library.
        let bound = (0.3 / 2f64.powi(pt.n as i32)).powf((0.2 - 0.5) / 2.0);
        // n = 1 is an exact equality, so allow a relative 1e-12 for rounding.
        if pt.ratio.is_nan() || pt.ratio < bound * (1.0 - 1e-12) {
            failures.push(format!("n = {}: ratio {} < bound {}", pt.n, pt.ratio, bound));
        }
    }
    let r12 = rep.ratios.iter().find(|p| p.n == 12).unwrap().ratio;
    ensure(r12 >= 4.0, || format!("ratio(12) = {r12} < 4.0"))?;
    ensure(secs < 60.0, || format!("runtime {secs:.1} s >= 60 s"))?;
    let summary = format!(
        "[f]_a = {:.9} on {} nodes, ratio(12) = {r12:.4}, {secs:.1} s",
        rep.seminorm, rep.nodes
    );
    // At n = 0 the ratio is exactly 1 while the bound is 0.3^-0.15 ≈ 1.198.
    ensure(failures.is_empty(), || {
        format!("{}; other sub-checks pass ({summary})", failures.join("; "))
    })?;
    Ok(summary)
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let cfg = SuiteConfig {
        interpolation_fields: 20,
        interpolation_grid: 64,
        interpolation_boundary_fields: 0,
        mus: vec![0.5, 0.25, 0.125],
        budget: 4096,
        slack_continuum: 0.05,
        ..SuiteConfig::default()
    };
    let recs = run_interpolation(&cfg).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(recs.iter().all(|r| r.full_scan), || "a scan was subsampled".into())?;
    // Six cases (four with β, two with β ≡ 0), three μ values, twenty fields.
    ensure(recs.len() == 20 * 3 * 6, || format!("{} records", recs.len()))?;
    let n = check_records(&recs, 0.05, 1e-12)?;
    ensure(secs < 300.0, || format!("runtime {secs:.1} s >= 300 s"))?;
    Ok(format!("{n} records pass with slack 5%, {secs:.1} s"))
}

fn criterion_3() -> Outcome {
    let cfg = SuiteConfig {
        ball_fields: 10,
        ball_mus: vec![0.5, 0.25],
        ..SuiteConfig::default()
    };
    let recs = run_ball(&cfg).map_err(|e| e.to_string())?;
    ensure(recs.len() == 10 * 5 * 2 * 2, || format!("{} records", recs.len()))?;
    ensure(recs.iter().all(|r| r.full_scan), || "a scan was subsampled".into())?;
    let n = check_records(&recs, 1e-9, 1e-12)?;
    Ok(format!("{n} records pass with slack 1e-9"))
}

fn criterion_4() -> Outcome {
    let recs = run_extension(&SuiteConfig::default()).map_err(|e| e.to_string())?;
    let refl: Vec<_> = recs.iter().filter(|r| r.suite == "reflection").collect();
    ensure(!refl.is_empty() && refl.iter().all(|r| r.full_scan), || "reflection scans".into())?;
    let a = check_records(refl.iter().copied(), 1e-9, 1e-12)?;
    let norm: Vec<_> = recs.iter().filter(|r| r.id == "norm_bound").collect();
    let b = check_records(norm.iter().copied(), 0.05, 1e-12)?;
    let log: Vec<_> = recs.iter().filter(|r| r.id == "log_holder").collect();
    let c = check_records(log.iter().copied(), 0.05, 1e-12)?;
    let other: Vec<_> = recs
        .iter()
        .filter(|r| r.id == "bilipschitz" || r.id == "restriction")
        .collect();
    check_records(other.iter().copied(), 1e-9, 0.0)?;
    Ok(format!("{a} reflection, {b} norm and {c} log-Hölder records pass"))
}

fn criterion_5() -> Outcome {
    let cfg = SuiteConfig {
        mollifier_fields: 5,
        deltas: vec![0.05, 0.1],
        ..SuiteConfig::default()
    };
    let recs = run_mollifier(&cfg).map_err(|e| e.to_string())?;
    ensure(recs.len() == 6 * 2 * 2, || format!("{} records", recs.len()))?;
    let factor3: Vec<_> = recs.iter().filter(|r| r.id.starts_with("factor3")).collect();
    let a = check_records(factor3.iter().copied(), 0.05, 1e-12)?;
    let sup: Vec<_> = recs.iter().filter(|r| r.id.starts_with("sup")).collect();
    let b = check_records(sup.iter().copied(), 0.0, 1e-12)?;
    Ok(format!("{a} factor-3 and {b} sup records pass"))
}

fn sin_sin(x: &[f64]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn poisson_error(h: f64) -> f64 {
    let lat = square(h);
    let op = EllipticOperator::laplacian(lat.clone());
    let f = SampledField::from_fn(lat.clone(), |x| -2.0 * PI * PI * sin_sin(x));
    let phi = SampledField::zeros(lat.clone());
    let s = solve_dirichlet(&DirichletProblem::new(op, f, phi).unwrap(), &SolveOptions::default()).unwrap();
    (0..lat.len()).fold(0.0f64, |m, i| m.max((s.u.value(i) - sin_sin(lat.coords(i))).abs()))
}

fn criterion_6() -> Outcome {
    let ratio = poisson_error(1.0 / 32.0) / poisson_error(1.0 / 64.0);
    ensure((3.5..=4.5).contains(&ratio), || format!("error ratio {ratio}"))?;
    let lat = square(1.0 / 16.0);
    let q = |x: &[f64]| 1.0 + x[0] - 2.0 * x[1] + 3.0 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1];
    let op = EllipticOperator::from_fns(
        lat.clone(),
        |x| [[2.0 + x[0], 0.25, 0.0], [0.25, 1.5, 0.0], [0.0; 3]],
        |_| [0.5, -1.0, 0.0],
        |_| -2.0,
    )
    .unwrap();
    // L q with q'' = [[6, -1], [-1, 1]].
    let f = SampledField::from_fn(lat.clone(), |x| {
        (2.0 + x[0]) * 6.0 - 2.0 * 0.25 + 1.5 * 1.0 + 0.5 * (1.0 + 6.0 * x[0] - x[1])
            - (-2.0 - x[0] + x[1])
            - 2.0 * q(x)
    });
    let phi = SampledField::from_fn(lat.clone(), q);
    let s = solve_dirichlet(&DirichletProblem::new(op, f, phi).unwrap(), &SolveOptions::default()).unwrap();
    let err = (0..lat.len()).fold(0.0f64, |m, i| m.max((s.u.value(i) - q(lat.coords(i))).abs()));
    ensure(err <= 1e-10, || format!("quadratic error {err:e}"))?;
    Ok(format!("error ratio {ratio:.3}, quadratic error {err:.1e}"))
}

fn criterion_7() -> Outcome {
    let lat = Arc::new(
        build_lattice(
            &DomainShape::Ball {
                center: vec![0.0; 3],
                radius: 1.0,
            },
            0.05,
        )
        .unwrap(),
    );
    let f = SampledField::from_fn(lat.clone(), |_| 1.0);
    let x0 = lat.nearest_node(&[0.0; 3]);
    ensure(lat.point(x0) == &[0.0; 3], || "no node at the origin".into())?;
    // Closed form: w(x) = (|x|² - 3)/6 inside the unit ball.
    let w0 = newtonian_potential_at(&f, &[x0]).map_err(|e| e.to_string())?[0];
    ensure((w0 + 0.5).abs() <= 0.01 * 0.5, || format!("w(0) = {w0}"))?;
    let m = HessianEvaluator::new(&f).and_then(|e| e.at(x0)).map_err(|e| e.to_string())?;
    let tr = m[0][0] + m[1][1] + m[2][2];
    ensure((tr - 1.0).abs() <= 0.02, || format!("trace = {tr}"))?;
    let mut r = rng(77);
    let mut worst = 0.0f64;
    for dim in [2usize, 3] {
        let fs = FundamentalSolution::new(dim).unwrap();
        for _ in 0..500 {
            let mut x = random_vector(&mut r, dim);
            x[0] += if x[0] >= 0.0 { 0.2 } else { -0.2 };
            let d2 = fs.d2gamma(&x).unwrap();
            worst = worst.max((0..dim).map(|i| d2[i][i]).sum::<f64>().abs());
        }
    }
    ensure(worst <= 1e-12, || format!("Laplacian of Gamma {worst:e}"))?;
    Ok(format!("w(0) = {w0:.5}, trace = {tr:.5}, |ΔΓ| <= {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    let mut r = rng(2024);
    let mut worst_id = 0.0f64;
    let mut worst_eq = 0.0f64;
    for dim in [2usize, 3] {
        for k in 0..100 {
            let a = spd_matrix(&mut r, dim);
            let t = constant_coeff_transform(&a, k % 2 == 1).map_err(|e| e.to_string())?;
            let e = (&t.p * &a * t.p.transpose() - DMatrix::<f64>::identity(dim, dim)).amax();
            worst_id = worst_id.max(e);
            let ev = a.clone().symmetric_eigen().eigenvalues;
            let (lo, hi) = (ev.min(), ev.max());
            for _ in 0..1000 {
                let x = DVector::from_vec(random_vector(&mut r, dim));
                let (px, xn) = ((&t.p * &x).norm(), x.norm());
                worst_eq = worst_eq.max(xn / hi.sqrt() - px).max(px - xn / lo.sqrt());
            }
        }
    }
    ensure(worst_id <= 1e-10, || format!("max |PAP^T - I| = {worst_id:e}"))?;
    ensure(worst_eq <= 1e-12, || format!("equivalence violated by {worst_eq:e}"))?;
    Ok(format!("max |PAP^T - I| = {worst_id:.1e}, bound slack {worst_eq:.1e}"))
}

fn criterion_9() -> Outcome {
    let recs = schauder_suite(1.0 / 16.0, 0.2, usize::MAX).map_err(|e| e.to_string())?;
    let refine: Vec<_> = recs.iter().filter(|r| r.id.ends_with("_refinement")).collect();
    let scaling: Vec<_> = recs.iter().filter(|r| r.id.ends_with("_scaling")).collect();
    // Ten problems, interior and global each.
    ensure(refine.len() == 20 && scaling.len() == 20, || format!("{} / {} records", refine.len(), scaling.len()))?;
    check_records(refine.iter().copied(), 0.0, 0.0)?;
    check_records(scaling.iter().copied(), 0.0, 0.0)?;
    let ratios: Vec<_> = recs.iter().filter(|r| r.id.ends_with("_ratio")).collect();
    ensure(ratios.iter().all(|r| r.lhs.is_finite() && r.lhs > 0.0), || "non-finite ratio".into())?;
    let worst = refine.iter().map(|r| r.lhs / (r.rhs / 0.2)).fold(0.0f64, f64::max);
    Ok(format!("20 ratios stable, worst relative change {:.2}%", 100.0 * worst))
}

fn criterion_10() -> Outcome {
    let lat = square(1.0 / 16.0);
    let l1 = EllipticOperator::from_fns(
        lat.clone(),
        |_| [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]],
        |x| [1.0 + x[1], 0.5, 0.0],
        |_| -1.0,
    )
    .unwrap();
    let f = SampledField::from_fn(lat.clone(), |x| 1.0 + x[0] * x[1]);
    let phi = SampledField::zeros(lat.clone());
    let p = DirichletProblem::new(l1.clone(), f.clone(), phi.clone()).unwrap();
    let a = ExponentField::constant(&lat, 0.5).unwrap();
    let opts = SolveOptions::default();
    let sweep = continuity_sweep(&l1, &p, 11, &a, &opts, usize::MAX).map_err(|e| e.to_string())?;
    ensure(sweep.len() == 11, || format!("{} steps", sweep.len()))?;
    let l0 = EllipticOperator::laplacian(lat.clone());
    let mut umax = f64::NEG_INFINITY;
    for s in &sweep {
        let lt = EllipticOperator::blend(&l0, &l1, s.t).unwrap();
        let pt = DirichletProblem::new(lt, f.clone(), phi.clone()).unwrap();
        let res = interior_residual(&pt, &s.solution).unwrap();
        // Solver tolerance 1e-10 relative to 1 + |f|_inf = 3.
        ensure(res <= 3e-10, || format!("residual {res:e} at t = {}", s.t))?;
        umax = umax.max(s.solution.values().iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    ensure(umax <= 1e-10, || format!("max u = {umax:e} along the sweep"))?;
    ensure(lat.count(NodeClass::Interior) > 0, || "no interior".into())?;
    // Variable operator with c = -1 and nonnegative sources.
    let op = EllipticOperator::from_fns(
        lat.clone(),
        |x| [[2.0 + x[0], 0.3, 0.0], [0.3, 1.0 + x[1], 0.0], [0.0; 3]],
        |_| [1.0, -0.5, 0.0],
        |_| -1.0,
    )
    .unwrap();
    let sources: [fn(&[f64]) -> f64; 3] = [
        |_| 1.0,
        |x| (PI * x[0]).sin().powi(2) * x[1],
        |x| (x[0] - 0.5).max(0.0) * (x[1] - 0.5).max(0.0),
    ];
    let mut vmax = f64::NEG_INFINITY;
    for src in sources {
        let f = SampledField::from_fn(lat.clone(), src);
        let p = DirichletProblem::new(op.clone(), f, phi.clone()).unwrap();
        let s = solve_dirichlet(&p, &SolveOptions::default()).map_err(|e| e.to_string())?;
        vmax = vmax.max(s.u.values().iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    ensure(vmax <= 1e-10, || format!("max u = {vmax:e} on the variable fixtures"))?;
    Ok(format!("11 steps solved, max u = {umax:.2e} (sweep), {vmax:.2e} (variable fixtures)"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "annulus example", criterion_1),
        (2, "interpolation suite", criterion_2),
        (3, "small-ball proposition", criterion_3),
        (4, "reflection and extension", criterion_4),
        (5, "mollifier", criterion_5),
        (6, "solver convergence", criterion_6),
        (7, "potential consistency", criterion_7),
        (8, "constant-coefficient transform", criterion_8),
        (9, "Schauder ratio stability", criterion_9),
        (10, "continuity sweep and maximum principle", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        let tag = format!("criterion_{n}");
        if !filter.is_empty() && !filter.iter().any(|f| tag.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("{tag} PASS ({name}): {msg} [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("{tag} FAIL ({name}): {msg} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
