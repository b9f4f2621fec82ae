use fraclab_core::dim_est::lower_reg_estimate;
use fraclab_core::experiments::*;
use fraclab_core::{Error, Word};
use proptest::prelude::*;

fn vk_with(q: f64, n_max: usize) -> ExperimentReport {
    let mut cfg = bundled_config("cantor_point").unwrap();
    cfg.params.q = q;
    cfg.params.n_max = n_max;
    run_vk_descent(&cfg).unwrap()
}

// Re-derives each check from its relation and the verdict from the roles.
fn assert_recomputable(r: &ExperimentReport) {
    for c in &r.checks {
        let d = c.measured - c.predicted;
        let pass = match c.relation {
            Relation::Within => d.abs() <= c.tolerance,
            Relation::AtLeast => d >= -c.tolerance,
            Relation::AtMost => d <= c.tolerance,
            Relation::Above => d > 0.0,
            Relation::Below => d < 0.0,
        };
        assert_eq!(pass, c.pass, "{}: {c:?}", r.system);
    }
    let all = r.checks.iter().all(|c| c.pass || c.role == Role::Info);
    assert_eq!(r.verdict == Verdict::Pass, all);
}

#[test]
fn vk_descent_constant_on_point_condensation() {
    let r = vk_with(0.4, 10);
    let c = r.check("descent_constant").unwrap();
    // 3^s = 2 for the middle-thirds maps
    assert!((c.measured - 0.8).abs() <= 0.01, "{c:?}");
    assert!((c.predicted - 0.8).abs() < 1e-12);
    assert!(r.check("strict_descent").unwrap().pass);
    assert_eq!(r.details["boundary_case"], false);
    assert_eq!(r.verdict, Verdict::Pass);
    assert_recomputable(&r);
}

#[test]
fn vk_closed_form_is_twice_q() {
    for q in [0.2, 0.3, 0.45] {
        let r = vk_with(q, 8);
        let c0 = r.details["closed_form_c0"].as_f64().unwrap();
        assert!((c0 - 2.0 * q).abs() < 1e-12, "{q}: {c0}");
        let measured = r.details["measured_c0"].as_f64().unwrap();
        assert!((measured - 2.0 * q).abs() <= 0.01, "{q}: {measured}");
    }
}

#[test]
fn vk_boundary_case_has_no_strict_descent() {
    let r = vk_with(0.5, 8);
    assert_eq!(r.details["boundary_case"], true);
    assert!(!r.check("strict_descent").unwrap().pass, "{:?}", r.check("strict_descent"));
    assert!(r.note.as_deref().unwrap().contains("boundary"));
    assert_eq!(r.verdict, Verdict::Fail);
    assert_recomputable(&r);
}

#[test]
fn vk_decay_sequence_follows_powers() {
    let r = vk_with(0.45, 12);
    assert!(r.check("decay_sequence").unwrap().pass);
    let seq: Vec<f64> = r.details["decay_sequence"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(seq.len(), 13);
    for (n, a) in seq.iter().enumerate() {
        let ratio = a / (seq[0] * 0.9f64.powi(n as i32));
        assert!((1.0 / 1.01..=1.01).contains(&ratio), "n = {n}: {ratio}");
    }
}

#[test]
fn word_measure_cylinders_carry_q_powers() {
    let cfg = bundled_config("cantor_point").unwrap();
    let q = 0.35;
    let wm = word_measure(&cfg.ifs, q, 3f64.powi(-7)).unwrap();
    let total: f64 = wm.measure.weights().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    for w in ["1", "2", "12", "221", "1212"] {
        let word = Word::parse(w).unwrap();
        let expect = q.powi(word.len() as i32);
        assert!((wm.cylinder_mass(&word) - expect).abs() < 1e-12, "{w}");
    }
    assert_eq!(word_measure(&cfg.ifs, 0.6, 0.01).unwrap_err().kind(), "argument");
}

#[test]
fn regularity_measure_ignores_weight_scale() {
    let cfg = bundled_config("cantor_interval").unwrap();
    let sweep = cfg.params.sweep(&cfg.ifs);
    let mu = regularity_measure(&cfg.ifs, 1.0, 3f64.powi(-7)).unwrap();
    let total: f64 = mu.weights().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let a = lower_reg_estimate(&mu, &sweep).unwrap();
    let b = lower_reg_estimate(&mu.scaled_weights(7.0).unwrap(), &sweep).unwrap();
    assert!((a.exponent - b.exponent).abs() < 1e-9);
    assert!((a.raw_exponent - b.raw_exponent).abs() < 1e-9);
}

#[test]
fn regularity_needs_a_tag() {
    let cfg = bundled_config("cantor_point").unwrap();
    match run_regularity(&cfg, false).unwrap_err() {
        Error::Precondition { detail, .. } => assert!(detail.is_none()),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn failed_cosc_needs_force() {
    let cfg = bundled_config("cantor_sequence34").unwrap();
    match run(Experiment::Thm41, &cfg, false).unwrap_err() {
        Error::Precondition { message, detail } => {
            assert!(message.contains("--force"));
            assert_eq!(detail.unwrap()["cosc"], false);
        }
        e => panic!("unexpected {e}"),
    }
    let r = run(Experiment::Thm41, &cfg, true).unwrap();
    assert!(r.forced);
    assert_eq!(r.check("formula").unwrap().role, Role::Info);
    assert!(r.check("lower_bound").unwrap().pass);
    assert!(r.check("counterexample_predicted").unwrap().pass);
    assert_recomputable(&r);
}

#[test]
fn point_condensation_reports() {
    let cfg = bundled_config("cantor_point").unwrap();
    for e in [Experiment::Thm41, Experiment::Thm42] {
        let r = run(e, &cfg, false).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", e.name());
        assert!(r.cosc.as_ref().unwrap().cosc == Some(true));
        assert_recomputable(&r);
    }
    let r = run(Experiment::Thm42, &cfg, false).unwrap();
    assert_eq!(r.check("formula").unwrap().predicted, 0.0);
}

#[test]
fn config_parsing() {
    let text = r#"{"dim": 1, "maps": [{"ratio": 0.5, "translation": [0]}, {"ratio": 0.5, "translation": [0.5]}],
                   "experiment": {"q": 0.3, "seed": 4}}"#;
    let cfg = ExperimentConfig::from_json_str("halves", text).unwrap();
    assert_eq!(cfg.name, "halves");
    assert_eq!(cfg.params.q, 0.3);
    assert_eq!(cfg.params.seed, 4);
    assert_eq!(cfg.params.delta, ExperimentParams::default().delta);
    let unknown = text.replace("\"seed\"", "\"sead\"");
    assert_eq!(ExperimentConfig::from_json_str("x", &unknown).unwrap_err().kind(), "format");
    let bad_q = text.replace("0.3", "1.5");
    assert_eq!(ExperimentConfig::from_json_str("x", &bad_q).unwrap_err().kind(), "argument");
    assert_eq!(ExperimentConfig::from_json_str("x", "[1]").unwrap_err().kind(), "format");
    assert_eq!(ExperimentConfig::from_json_str("x", "{").unwrap_err().kind(), "format");
}

#[test]
fn bundled_configs_resolve() {
    for (name, _) in BUNDLED_CONFIGS {
        assert_eq!(bundled_config(name).unwrap().name, name);
    }
    assert_eq!(bundled_config("configs/cantor.json").unwrap().name, "cantor");
    assert_eq!(bundled_config("nope").unwrap_err().kind(), "argument");
    for e in SUITE {
        assert!(bundled_config(e.config).is_ok());
    }
}

#[test]
fn experiment_names_round_trip() {
    for e in Experiment::ALL {
        assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
    }
    assert_eq!("thm43".parse::<Experiment>().unwrap_err().kind(), "argument");
}

#[test]
fn markdown_lists_every_check() {
    let r = vk_with(0.4, 6);
    let md = markdown_summary(std::slice::from_ref(&r));
    assert!(md.starts_with("| experiment |"));
    assert_eq!(md.lines().filter(|l| l.starts_with("| vk |")).count(), r.checks.len());
    assert!(md.contains("1 of 1 experiments pass."));
}

#[test]
fn reports_are_deterministic() {
    let cfg = bundled_config("cantor_point").unwrap();
    let a = serde_json::to_string(&run(Experiment::Thm41, &cfg, false).unwrap()).unwrap();
    let b = serde_json::to_string(&run(Experiment::Thm41, &cfg, false).unwrap()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn check_pass_follows_relation(
        rel in prop::sample::select(vec![Relation::Within, Relation::AtLeast, Relation::AtMost, Relation::Above, Relation::Below]),
        predicted in -2.0..2.0f64, measured in -2.0..2.0f64, tol in 0.0..0.5f64,
    ) {
        let c = Check::new("c", "", Role::Claim, rel, predicted, measured, tol);
        let expect = match rel {
            Relation::Within => predicted - tol <= measured && measured <= predicted + tol,
            Relation::AtLeast => measured + tol >= predicted,
            Relation::AtMost => measured <= predicted + tol,
            Relation::Above => measured > predicted,
            Relation::Below => measured < predicted,
        };
        // interval and shifted forms can disagree only by rounding at the edge
        let edge = (measured - predicted).abs() - tol;
        if edge.abs() > 1e-12 {
            prop_assert_eq!(c.pass, expect);
        }
    }
}
