//! End-to-end runs through the public API.

use std::sync::Arc;

use varholder::config::RunConfig;
use varholder::domain::{build_lattice, distance_fields, DomainShape, NodeClass};
use varholder::elliptic::{apply_operator, solve_dirichlet, DirichletProblem, SolveOptions};
use varholder::extend::{epsilon_search, extend_domain, mollify};
use varholder::fd::fd_derivatives;
use varholder::norms::{family_norm, holder_norm};
use varholder::verify::suite::{run_suite, summarize, to_jsonl, SuiteConfig};
use varholder::{ExponentField, Family, SampledField};

const CONFIG: &str = r#"
pair_budget = 1000

[domain]
kind = "rectangle"
lo = [0, 0]
hi = [1, 1]
h = 0.0625

[exponent]
expr = "0.3 + 0.4 * x1"

[fields]
f = "1 + x1 * x2"
a = [["2 + x1", "0.3"], ["0.3", "1 + x2"]]
b = ["1", "-0.5"]
c = "-1"
"#;

#[test]
fn config_to_solution_to_norms() {
    let cfg = RunConfig::from_toml(CONFIG).unwrap();
    cfg.validate("solve").unwrap();
    let lat = cfg.lattice().unwrap();
    let p = DirichletProblem::new(cfg.operator(&lat).unwrap(), cfg.f(&lat).unwrap(), cfg.phi(&lat).unwrap()).unwrap();
    let s = solve_dirichlet(&p, &SolveOptions::default()).unwrap();
    // c ≤ 0 and f ≥ 0 with zero boundary data.
    assert!(s.u.values().iter().all(|v| *v <= 1e-12));
    let a = cfg.exponent_field(&lat).unwrap();
    let u2 = fd_derivatives(&s.u, 2).unwrap();
    let n2 = holder_norm(&u2, &a, 2, cfg.pair_budget).unwrap();
    let lu = apply_operator(&p.op, &u2).unwrap();
    // L u reproduces f at interior nodes.
    for i in lat.interior_ids() {
        assert!((lu.value(i) - p.f.value(i)).abs() < 1e-8);
    }
    let df = distance_fields(&lat);
    let star = family_norm(&u2, &a, 2, Family::Starred, Some(&df), cfg.pair_budget).unwrap();
    // d ≤ 1/2 on the unit square, so weighted terms shrink.
    assert!(star.norm <= n2.norm);
    assert!(n2.norm.is_finite() && n2.norm > 0.0);
}

#[test]
fn extension_then_mollifier() {
    let lat = Arc::new(
        build_lattice(
            &DomainShape::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            0.02,
        )
        .unwrap(),
    );
    let f = SampledField::from_fn(lat.clone(), |x| (2.0 * x[0]).sin() + x[1] * x[1]);
    let a = ExponentField::from_fn(&lat, |x| 0.4 + 0.1 * x[0]).unwrap();
    let ext = extend_domain(&f, &a, 0.1, 500).unwrap();
    // The extension agrees with f on the original nodes.
    for (i, &j) in ext.base_ids.iter().enumerate() {
        assert_eq!(ext.f.value(j), f.value(i));
    }
    assert!(ext.lattice.len() > lat.len());
    let s = epsilon_search(&ext, 0.1).unwrap();
    assert!(s.modulus < 0.1 && s.epsilon < ext.sigma);
    let m = mollify(&ext, s.epsilon).unwrap();
    assert!(m.sup() <= ext.f.sup() + 1e-12);
    assert_eq!(lat.count(NodeClass::Interior) + lat.count(NodeClass::Boundary), lat.len());
}

#[test]
fn suite_output_is_deterministic() {
    let cfg = SuiteConfig::quick();
    for name in ["ball_proposition", "transform", "mollifier"] {
        let a = run_suite(name, &cfg).unwrap();
        let b = run_suite(name, &cfg).unwrap();
        assert_eq!(to_jsonl(&a), to_jsonl(&b), "{name}");
        let s = summarize(&a);
        assert!(s.iter().all(|x| x.failed == 0), "{name}: {s:?}");
    }
}
