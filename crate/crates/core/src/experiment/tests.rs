use super::*;
use crate::error::Error;
use crate::policy::parameter_count;

fn tiny(dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(ModelKind::Heat, Scale::Desk);
    c.points = 10;
    c.horizon = 0.05;
    c.rollouts = 4;
    c.iterations = 6;
    c.checkpoint_every = 3;
    c.snapshot_rollouts = 3;
    c.verify_rollouts = 1000;
    c.verify_horizon = 0.03;
    c.regions = vec![crate::optimizer::Region { lo: 0.3, hi: 0.5, desired: 1.0 }];
    c.out_dir = dir.to_path_buf();
    c
}

#[test]
fn heat_preset_values() {
    let c = ExperimentConfig::preset(ModelKind::Heat, Scale::Full);
    assert_eq!((c.length, c.points, c.dt, c.rho), (1.0, 64, 0.01, 10.0));
    assert_eq!((c.actuators, c.iterations, c.rollouts), (3, 3000, 200));
    assert!((c.sigma_sq - 0.01).abs() < 1e-15);
    assert_eq!((c.lr_theta, c.lr_x), (1e-3, 3e-2));
    assert!((c.lr_x / c.lr_theta - 30.0).abs() < 1e-9);
}

#[test]
fn nagumo_and_beam_presets() {
    let n = ExperimentConfig::preset(ModelKind::Nagumo, Scale::Full);
    assert_eq!((n.length, n.alpha, n.epsilon, n.horizon, n.kappa), (5.0, -0.5, 1.0, 3.5, 1e-3));
    assert_eq!(n.lr_x, 5e-2);
    assert_eq!((n.regions[0].lo, n.regions[0].hi), (3.5, 4.95));
    assert!((n.sigma_sq - 0.25).abs() < 1e-15);

    let b = ExperimentConfig::preset(ModelKind::EulerBernoulli, Scale::Full);
    assert_eq!(b.policy_dims(), [64, 64, 64, 8]);
    assert_eq!(parameter_count(&b.policy_dims()), 64 * 64 + 64 + 64 * 64 + 64 + 64 * 8 + 8);
    assert_eq!((b.rho, b.kappa, b.c_d, b.mu), (1.0, 3e-4, 1e-4, 1e-3));

    let d = ExperimentConfig::preset(ModelKind::Heat, Scale::Desk);
    assert_eq!((d.points, d.iterations, d.rollouts, d.actuators), (32, 300, 50, 2));
    for k in ModelKind::ALL {
        for s in [Scale::Full, Scale::Desk] {
            ExperimentConfig::preset(k, s).validate().unwrap();
        }
    }
}

#[test]
fn config_text_round_trips() {
    for k in ModelKind::ALL {
        let c = ExperimentConfig::preset(k, Scale::Desk);
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }
}

#[test]
fn partial_config_falls_back_to_preset() {
    let c = ExperimentConfig::parse("model = \"nagumo\"\nrollouts = 7\n").unwrap();
    assert_eq!(c.rollouts, 7);
    assert_eq!(c.length, 5.0);
}

#[test]
fn desk_fallback_keeps_explicit_keys() {
    let c = ExperimentConfig::parse_scaled("model = \"heat\"\npoints = 40\n", Scale::Desk).unwrap();
    assert_eq!(c.points, 40);
    assert_eq!(c.iterations, 300);
    assert_eq!(c.actuators, 2);
}

#[test]
fn config_errors_name_line_and_field() {
    match ExperimentConfig::parse("model = \"heat\"\ndt = -0.01\n") {
        Err(Error::ConfigValidation { field, .. }) => assert_eq!(field, "dt"),
        other => panic!("{other:?}"),
    }
    match ExperimentConfig::parse("model = \"heat\"\n\nbogus = 3\n") {
        Err(Error::ConfigParse { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match ExperimentConfig::parse("model = \"heat\"\nrho = = 2\n") {
        Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(ExperimentConfig::parse("rho = 1.0\n").is_err());
    assert!(ExperimentConfig::parse("model = \"heat\"\ninit_hi = 2.0\n").is_err());
    assert!(ExperimentConfig::parse("model = \"heat\"\nhorizon = 0.015\n").is_err());
    assert!(ExperimentConfig::parse("model = \"heat\"\nscheme = \"rk4\"\n").is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(&tiny(dir.path())).unwrap();
    s.step().unwrap();
    s.step().unwrap();
    let ck = s.checkpoint();
    let path = dir.path().join("c.txt");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = Session::new(&tiny(dir.path())).unwrap();
    let text = s.checkpoint().to_text();
    let truncated = &text[..text.len() / 2];
    assert!(matches!(Checkpoint::parse(truncated), Err(Error::Checkpoint(_))));
    let wrong = text.replace(CHECKPOINT_HEADER, "codesign-checkpoint v0");
    assert!(matches!(Checkpoint::parse(&wrong), Err(Error::Checkpoint(_))));
    let garbled = text.replacen("adam_t 0", "adam_t x", 1);
    assert!(Checkpoint::parse(&garbled).is_err());
    assert!(Checkpoint::parse(&text.replace("end\n", "")).is_err());
}

#[test]
fn beam_checkpoint_has_expected_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(ModelKind::EulerBernoulli, Scale::Full);
    c.out_dir = dir.path().to_path_buf();
    let s = Session::new(&c).unwrap();
    let ck = Checkpoint::parse(&s.checkpoint().to_text()).unwrap();
    assert_eq!(ck.params.len(), 64 * 64 + 64 + 64 * 64 + 64 + 64 * 8 + 8);
    assert_eq!(ck.actuators.count(), 8);
}

#[test]
fn actuators_start_in_init_interval() {
    let dir = tempfile::tempdir().unwrap();
    let s = Session::new(&tiny(dir.path())).unwrap();
    for (x, sh) in s.actuators.locations.iter().zip(&s.optimizer.shadow) {
        assert!((0.4..0.6).contains(sh));
        assert!(s.problem.grid.nodes().contains(x));
    }
}

#[test]
fn training_artifacts_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&tiny(a.path()), Mode::Train, None).unwrap();
    run_experiment(&tiny(b.path()), Mode::Train, None).unwrap();
    for f in ["iterations.csv", "snapshot.csv", "checkpoint_000003.txt", "checkpoint_000006.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let csv = std::fs::read_to_string(a.path().join("iterations.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "iter,meanJ,minJ,meanP,loss,x_1,x_2,wall_s");
    assert_eq!(lines.count(), 6);
    let snap = std::fs::read_to_string(a.path().join("snapshot.csv")).unwrap();
    assert!(snap.starts_with(SNAPSHOT_HEADER));
    assert_eq!(snap.lines().count(), 1 + 6 * 10);
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let full = tempfile::tempdir().unwrap();
    run_experiment(&tiny(full.path()), Mode::Train, None).unwrap();

    let part = tempfile::tempdir().unwrap();
    let mut c = tiny(part.path());
    c.iterations = 3;
    run_experiment(&c, Mode::Train, None).unwrap();
    c.iterations = 6;
    let ck = part.path().join("checkpoint_000003.txt");
    run_experiment(&c, Mode::Train, Some(&ck)).unwrap();
    for f in ["iterations.csv", "snapshot.csv", "checkpoint_000006.txt"] {
        let x = std::fs::read(full.path().join(f)).unwrap();
        let y = std::fs::read(part.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn verify_mode_writes_checks() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s1 = run_experiment(&tiny(a.path()), Mode::Verify, None).unwrap();
    run_experiment(&tiny(b.path()), Mode::Verify, None).unwrap();
    let text = std::fs::read_to_string(a.path().join("checks.csv")).unwrap();
    assert_eq!(text, std::fs::read_to_string(b.path().join("checks.csv")).unwrap());
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["martingale", "importance_sampling", "free_energy"]);
    assert_eq!(text.lines().next().unwrap(), CHECKS_HEADER);
    assert_eq!(s1.checks.len(), 3);
}

#[test]
fn deterministic_nagumo_baseline_front_advances() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(ModelKind::Nagumo, Scale::Desk);
    c.noisy = false;
    c.snapshot_rollouts = 2;
    c.out_dir = dir.path().to_path_buf();
    run_experiment(&c, Mode::Baseline, None).unwrap();
    let text = std::fs::read_to_string(dir.path().join("snapshot.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let mean_at = |t: f64| {
        let v: Vec<f64> = rows.iter().filter(|r| (r[0] - t).abs() < 1e-9).map(|r| r[2]).collect();
        assert_eq!(v.len(), 32);
        v.iter().sum::<f64>() / 32.0
    };
    assert!(mean_at(3.5) > mean_at(0.0));
    assert!(rows.iter().all(|r| r[3] == 0.0));
}
