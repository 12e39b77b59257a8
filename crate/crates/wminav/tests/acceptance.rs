//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`
//! to see them).
//!
//! Criterion 7 (public-dataset reproduction) needs the recorded dataset and
//! a desk-scale training budget, so it is `#[ignore]` by default; see the
//! README for the manual procedure. Everything else runs in CI.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wminav::dataio::{load_session, make_windows, synchronize, WheelTag};
use wminav::evalkit::{prmse, tde, wmin_baseline};
use wminav::mechanizer::DEFAULT_GRAVITY;
use wminav::simkit::{simulate_session, ImuNoiseSpec, PeriodicTrajSpec, SessionSpec};
use wminav::tensornet::{Tensor, Workspace};
use wminav::types::{TrajPoint, Trajectory};
use wminav::wminet::{
    build_loss_graph, build_model, loss_single, loss_wc, train, DisplacementPrediction,
    ModelConfig, TrainOptions, WcWeights,
};

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wminav_acc_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Criterion 1 — noise-free straight session (0.5 m/s, 10 s, 120 Hz)
/// through ingestion, synchronization, and the mechanizer: endpoint error
/// below 0.05 m, total runtime below 5 s.
#[test]
fn criterion_1_oracle_round_trip() {
    let started = Instant::now();
    let dir = temp_dir("c1");
    let spec = SessionSpec {
        traj: PeriodicTrajSpec {
            speed: 0.5,
            amplitude: 0.0,
            frequency_hz: 0.2,
            duration: 10.0,
            heading: 0.0,
        },
        noise: None,
        ..Default::default()
    };
    simulate_session(&dir, &spec).unwrap();
    let session = synchronize(load_session(&dir).unwrap()).unwrap();
    let run = wmin_baseline(&session, WheelTag::Front, true, DEFAULT_GRAVITY).unwrap();
    let (e, g) = (
        run.estimated.endpoint().unwrap(),
        run.wheel_truth.endpoint().unwrap(),
    );
    let err = ((e.x - g.x).powi(2) + (e.y - g.y).powi(2)).sqrt();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(err < 0.05, "endpoint error {err} m");
    assert!(elapsed < 5.0, "runtime {elapsed:.2} s");
    println!("criterion 1 (oracle round trip): PASS — endpoint error {err:.2e} m in {elapsed:.2} s");
}

/// Criterion 2 — with the sensor-spec bias/noise enabled, the uncorrected
/// 3D mechanization of a 12 m, 2-minute periodic trajectory exceeds 50 m
/// PRMSE on every one of 10 seeded runs.
#[test]
fn criterion_2_drift_reproduction() {
    let mut values = Vec::new();
    for seed in 0..10u64 {
        let dir = temp_dir(&format!("c2_{seed}"));
        let spec = SessionSpec {
            traj: PeriodicTrajSpec {
                speed: 0.1,
                amplitude: 0.3,
                frequency_hz: 0.2,
                duration: 120.0,
                heading: 0.0,
            },
            noise: Some(ImuNoiseSpec { seed, ..Default::default() }),
            ..Default::default()
        };
        simulate_session(&dir, &spec).unwrap();
        let session = synchronize(load_session(&dir).unwrap()).unwrap();
        let run = wmin_baseline(&session, WheelTag::Front, false, DEFAULT_GRAVITY).unwrap();
        let p = prmse(&run.wheel_truth, &run.estimated).unwrap();
        assert!(p > 50.0, "seed {seed}: PRMSE {p:.1} m did not exceed 50 m");
        values.push(p);
    }
    let min = values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    println!(
        "criterion 2 (drift reproduction): PASS — PRMSE over 10 seeds ≥ {min:.0} m (all > 50 m)"
    );
}

/// Criterion 3 — central finite differences match the reverse-mode
/// gradients of the full composed network graph with relative error below
/// 1e-4 on at least 20 probes (ReLU-kink probes excluded), within 60 s.
#[test]
fn criterion_3_gradient_correctness() {
    let started = Instant::now();
    let cfg = ModelConfig { seed: 42, ..Default::default() };
    let lg = build_loss_graph(&cfg).unwrap();
    let mut params = build_model(&cfg).unwrap().tensors;

    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut rnd = |n: usize, s: f64| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-s..s)).collect()
    };
    let inputs = vec![
        Tensor::new(vec![1, 3, 120], rnd(360, 1.0)).unwrap(),
        Tensor::new(vec![1, 3, 120], rnd(360, 1.0)).unwrap(),
        Tensor::new(vec![5, 2], rnd(10, 0.1)).unwrap(),
    ];

    let mut ws = Workspace::default();
    lg.graph.forward(&params, &inputs, &mut ws).unwrap();
    let mut grads: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
    lg.graph
        .backward(lg.loss, &params, &inputs, &mut ws, &mut grads)
        .unwrap();

    let h = 1e-5;
    let mut probe_rng = ChaCha8Rng::seed_from_u64(9099);
    let mut checked = 0usize;
    let mut excluded = 0usize;
    let mut attempts = 0usize;
    let mut worst = 0.0f64;
    while checked < 20 {
        attempts += 1;
        assert!(attempts < 400, "could not find 20 clean probes");
        let pi = probe_rng.random_range(0..params.len());
        let ei = probe_rng.random_range(0..params[pi].numel());
        let orig = params[pi].data()[ei];

        // Forward at θ±h; a probe is excluded when any ReLU input the
        // perturbation reaches crosses its kink — it changed sign between
        // the two evaluations, or sits within 1e-3 of zero while moving.
        let mut ws2 = Workspace::default();
        params[pi].data_mut()[ei] = orig + h;
        lg.graph.forward(&params, &inputs, &mut ws2).unwrap();
        let lp = lg.graph.value(&ws2, &params, &inputs, lg.loss).unwrap().data()[0];
        let relu_plus: Vec<Vec<f64>> = lg
            .relu_inputs
            .iter()
            .map(|&id| lg.graph.value(&ws2, &params, &inputs, id).unwrap().data().to_vec())
            .collect();
        params[pi].data_mut()[ei] = orig - h;
        lg.graph.forward(&params, &inputs, &mut ws2).unwrap();
        let lm = lg.graph.value(&ws2, &params, &inputs, lg.loss).unwrap().data()[0];
        let mut kink = false;
        'outer: for (ri, &id) in lg.relu_inputs.iter().enumerate() {
            let minus = lg.graph.value(&ws2, &params, &inputs, id).unwrap();
            for (&a, &b) in relu_plus[ri].iter().zip(minus.data()) {
                if (a > 0.0) != (b > 0.0) && a != b {
                    kink = true;
                    break 'outer;
                }
            }
        }
        params[pi].data_mut()[ei] = orig;
        if kink {
            excluded += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * h);
        let an = grads[pi].data()[ei];
        let denom = an.abs().max(fd.abs());
        if denom < 1e-9 {
            continue; // off-path entry, nothing to compare
        }
        let rel = (fd - an).abs() / denom;
        worst = worst.max(rel);
        assert!(rel < 1e-4, "probe {pi}[{ei}]: rel error {rel:.3e}");
        checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "runtime {elapsed:.1} s");
    println!(
        "criterion 3 (gradient correctness): PASS — {checked} probes, worst rel error {worst:.2e}, {excluded} kink-excluded, {elapsed:.1} s"
    );
}

/// Criterion 4 — 32 synthetic windows under the published hyperparameters
/// (lr 0.002, batch 128, 400 epochs, window 120): final training MSE within
/// 1% of the first epoch's, in under 10 minutes.
#[test]
fn criterion_4_overfit_sanity() {
    let started = Instant::now();
    let dir = temp_dir("c4");
    let spec = SessionSpec {
        traj: PeriodicTrajSpec {
            speed: 0.4,
            amplitude: 0.3,
            frequency_hz: 0.2,
            duration: 40.0,
            heading: 0.2,
        },
        noise: Some(ImuNoiseSpec { seed: 1, ..Default::default() }),
        ..Default::default()
    };
    simulate_session(&dir, &spec).unwrap();
    let session = synchronize(load_session(&dir).unwrap()).unwrap();
    let geometry = session.geometry.clone();
    let mut windows = make_windows(&session, WheelTag::Front, &geometry).unwrap();
    assert!(windows.len() >= 32, "only {} windows", windows.len());
    windows.truncate(32);

    let mut model = build_model(&ModelConfig { seed: 7, ..Default::default() }).unwrap();
    let opts = TrainOptions { seed: 7, ..Default::default() };
    let report = train(&mut model, &windows, &opts).unwrap();
    let first = report.history[0].train;
    let last = report.history.last().unwrap().train;
    let ratio = last / first;
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        ratio <= 0.01,
        "final MSE {last:.3e} is {ratio:.3e} of epoch-1 {first:.3e}"
    );
    assert!(elapsed < 600.0, "runtime {elapsed:.0} s");
    println!(
        "criterion 4 (overfit sanity): PASS — final/epoch-1 MSE ratio {ratio:.2e} in {elapsed:.0} s"
    );
}

/// Criterion 5 — wheelbase-constraint algebra: γ = 0 reduces J to the
/// weighted MSE sum within 1e-12, the signed residual hits its closed-form
/// zeros, and perfect predictions on geometry-consistent truth give J = 0.
#[test]
fn criterion_5_wc_loss_algebra() {
    use wminav::wminet::wheelbase_residual;

    // Signed-residual fixtures.
    assert_eq!(wheelbase_residual((0.0, 0.0), (0.3, 0.0), 0.3), 0.0);
    assert_eq!(wheelbase_residual((0.0, 0.0), (0.0, 0.0), 0.3), 0.3);
    assert!(wheelbase_residual((1.0, 1.0), (4.0, 5.0), 5.0).abs() < 1e-15);

    // γ = 0 degeneracy over random inputs.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..50 {
        let mut rows = || -> Vec<[f64; 2]> {
            (0..5).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
        };
        let (p1, p2, t1, t2, a1, a2) = (rows(), rows(), rows(), rows(), rows(), rows());
        let d1 = DisplacementPrediction { deltas: p1 };
        let d2 = DisplacementPrediction { deltas: p2 };
        let w = WcWeights { gamma: 0.0, ..Default::default() };
        let j = loss_wc(&d1, &d2, &t1, &t2, &a1, &a2, &w).unwrap();
        let expect =
            w.alpha * loss_single(&d1, &t1).unwrap() + w.beta * loss_single(&d2, &t2).unwrap();
        assert!((j - expect).abs() < 1e-12, "γ=0: {j} vs {expect}");
    }

    // Perfect predictions on truth that keeps the wheels exactly d apart.
    let w = WcWeights::default();
    let deltas: Vec<[f64; 2]> = (0..5).map(|i| [0.08 * (i as f64 + 1.0), -0.03]).collect();
    let anchors1: Vec<[f64; 2]> = (0..5).map(|i| [0.2 * i as f64, 0.0]).collect();
    let anchors2: Vec<[f64; 2]> =
        anchors1.iter().map(|a| [a[0], a[1] + w.wheelbase]).collect();
    let pred = DisplacementPrediction { deltas: deltas.clone() };
    let j = loss_wc(&pred, &pred, &deltas, &deltas, &anchors1, &anchors2, &w).unwrap();
    assert!(j.abs() < 1e-15, "perfect J = {j}");
    println!("criterion 5 (wheelbase-constraint loss algebra): PASS");
}

/// Criterion 6 — metric oracles: PRMSE/TDE match hand-computed three-point
/// fixtures to 1e-12 and the TDE arithmetic is consistent with the
/// published (1.54 m, 12.91%) pairing at D ≈ 12 m.
#[test]
fn criterion_6_metric_oracles() {
    let gt = Trajectory::new(vec![
        TrajPoint { t: 0.0, x: 0.0, y: 0.0 },
        TrajPoint { t: 1.0, x: 3.0, y: 0.0 },
        TrajPoint { t: 2.0, x: 6.0, y: 0.0 },
    ])
    .unwrap();
    // Errors 0, 4, 3 → √((0 + 16 + 9)/3).
    let est = Trajectory::new(vec![
        TrajPoint { t: 0.0, x: 0.0, y: 0.0 },
        TrajPoint { t: 1.0, x: 3.0, y: 4.0 },
        TrajPoint { t: 2.0, x: 6.0, y: -3.0 },
    ])
    .unwrap();
    let p = prmse(&gt, &est).unwrap();
    assert!((p - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!((prmse(&gt, &gt).unwrap()).abs() < 1e-12);

    // Two-point hand value √8.
    let gt2 = Trajectory::new(vec![
        TrajPoint { t: 0.0, x: 0.0, y: 0.0 },
        TrajPoint { t: 1.0, x: 0.0, y: 0.0 },
    ])
    .unwrap();
    let est2 = Trajectory::new(vec![
        TrajPoint { t: 0.0, x: 0.0, y: 0.0 },
        TrajPoint { t: 1.0, x: 4.0, y: 0.0 },
    ])
    .unwrap();
    assert!((prmse(&gt2, &est2).unwrap() - 8.0f64.sqrt()).abs() < 1e-12);

    assert!((tde(3.0, 12.0).unwrap() - 25.0).abs() < 1e-12);
    assert!(tde(0.0, 7.0).unwrap().abs() < 1e-12);
    // Published pairing: 1.54 m at D ≈ 12 m sits beside the reported 12.91%.
    let paired = tde(1.54, 12.0).unwrap();
    assert!((paired - 100.0 * 1.54 / 12.0).abs() < 1e-12);
    assert!((paired - 12.91).abs() < 0.15);
    println!("criterion 6 (metric oracles): PASS");
}

/// Criterion 7 — reproduction on the recorded public dataset. Requires the
/// dataset on disk and a desk-scale training budget, so it must be invoked
/// explicitly:
///
/// ```text
/// WMINAV_DATASET=/path/to/sessions \
///   cargo test --release --test acceptance criterion_7 -- --ignored --nocapture
/// ```
///
/// The dataset root must contain one session directory per trajectory (each
/// with a `session.cfg` column map; see the README) plus `train_sessions` /
/// `test_sessions` name lists in `roles.cfg`. The criterion: average test
/// PRMSE ≤ 3.0 m for the plain regressor and the wheelbase-constrained
/// variant improving it by ≥ 10%.
#[test]
#[ignore = "needs the recorded public dataset; see README for the manual procedure"]
fn criterion_7_dataset_reproduction() {
    let root = match std::env::var("WMINAV_DATASET") {
        Ok(v) => PathBuf::from(v),
        Err(_) => {
            panic!("set WMINAV_DATASET to the dataset root (see README)");
        }
    };
    let roles = wminav::kvcfg::KvConfig::load(&root.join("roles.cfg")).unwrap();
    let out = temp_dir("c7");
    let run = |args: &[&str]| {
        let mut argv = vec!["wminav"];
        argv.extend_from_slice(args);
        assert_eq!(wminav::cli::run(argv), 0, "command failed: {args:?}");
    };

    // Prepare windows for both wheels over the declared split.
    let prep = out.join("prepared");
    let prep_cfg = out.join("prepare.cfg");
    std::fs::write(
        &prep_cfg,
        format!(
            "prepare.train_sessions = {}\nprepare.test_sessions = {}\n",
            roles.require("train_sessions").unwrap(),
            roles.require("test_sessions").unwrap()
        ),
    )
    .unwrap();
    run(&[
        "prepare",
        "--config",
        prep_cfg.to_str().unwrap(),
        "--dataset",
        root.to_str().unwrap(),
        "--out",
        prep.to_str().unwrap(),
        "--wheel",
        "both",
    ]);

    // Plain regressor and the wheelbase-constrained variant.
    let plain = out.join("plain");
    run(&[
        "train",
        "--dataset",
        prep.to_str().unwrap(),
        "--out",
        plain.to_str().unwrap(),
        "--seed",
        "1",
        "--loss",
        "mse",
        "--wheel",
        "front",
    ]);
    let wc = out.join("wc");
    run(&[
        "train",
        "--dataset",
        prep.to_str().unwrap(),
        "--out",
        wc.to_str().unwrap(),
        "--seed",
        "1",
        "--loss",
        "wc",
    ]);

    // Evaluate both on the held-out trajectories.
    let test_sessions: Vec<String> = roles
        .require("test_sessions")
        .unwrap()
        .split(',')
        .map(|s| root.join(s.trim()).display().to_string())
        .collect();
    let eval_list = test_sessions.join(",");
    let eval = |ckpt: &PathBuf, method: &str, dir: &str| -> f64 {
        let eval_cfg = out.join(format!("eval_{dir}.cfg"));
        std::fs::write(
            &eval_cfg,
            format!(
                "eval.checkpoint = {}\neval.method = {method}\neval.sessions = {eval_list}\n",
                ckpt.display()
            ),
        )
        .unwrap();
        let eval_out = out.join(dir);
        run(&[
            "eval",
            "--config",
            eval_cfg.to_str().unwrap(),
            "--out",
            eval_out.to_str().unwrap(),
            "--wheel",
            "front",
        ]);
        let report = std::fs::read_to_string(eval_out.join("report.csv")).unwrap();
        let mut sum = 0.0;
        let mut n = 0;
        for line in report.lines().skip(1) {
            sum += line.split(',').nth(2).unwrap().parse::<f64>().unwrap();
            n += 1;
        }
        sum / n as f64
    };
    let plain_prmse = eval(&plain.join("checkpoint.ckpt"), "wminet", "eval_plain");
    let wc_prmse = eval(&wc.join("checkpoint.ckpt"), "wminet-wc", "eval_wc");
    let improvement = 100.0 * (plain_prmse - wc_prmse) / plain_prmse;
    assert!(plain_prmse <= 3.0, "average PRMSE {plain_prmse:.2} m exceeds 3.0 m");
    assert!(improvement >= 10.0, "constraint improvement {improvement:.1}% below 10%");
    println!(
        "criterion 7 (dataset reproduction): PASS — plain {plain_prmse:.2} m, constrained {wc_prmse:.2} m ({improvement:.1}%)"
    );
}

/// Criterion 8 — reruns from a manifest reproduce artifacts bit-exactly,
/// for both simulation and training.
#[test]
fn criterion_8_determinism() {
    let base = temp_dir("c8");
    let run = |args: &[&str]| {
        let mut argv = vec!["wminav"];
        argv.extend_from_slice(args);
        assert_eq!(wminav::cli::run(argv), 0, "command failed: {args:?}");
    };
    let cfg = base.join("sim.cfg");
    std::fs::write(&cfg, "sim.duration = 20\nsim.noise = on\nseed = 13\n").unwrap();
    let sim_a = base.join("sim_a");
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", sim_a.to_str().unwrap()]);
    let sim_b = base.join("sim_b");
    run(&[
        "simulate",
        "--config",
        sim_a.join("manifest.txt").to_str().unwrap(),
        "--out",
        sim_b.to_str().unwrap(),
    ]);
    for name in ["gnss.csv", "gt.csv", "front.csv", "rear.csv", "session.cfg"] {
        let a = std::fs::read(sim_a.join("session").join(name)).unwrap();
        let b = std::fs::read(sim_b.join("session").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }

    let prep = base.join("prepared");
    run(&[
        "prepare",
        "--dataset",
        sim_a.join("session").to_str().unwrap(),
        "--out",
        prep.to_str().unwrap(),
        "--wheel",
        "front",
    ]);
    let train_cfg = base.join("train.cfg");
    std::fs::write(
        &train_cfg,
        "model.head_channels = 4\nmodel.trunk_channels = 6\nmodel.fc1 = 32\nmodel.fc2 = 16\ntrain.epochs = 5\nseed = 21\nwheel = front\n",
    )
    .unwrap();
    let t_a = base.join("train_a");
    run(&[
        "train",
        "--config",
        train_cfg.to_str().unwrap(),
        "--dataset",
        prep.to_str().unwrap(),
        "--out",
        t_a.to_str().unwrap(),
    ]);
    let t_b = base.join("train_b");
    run(&[
        "train",
        "--config",
        t_a.join("manifest.txt").to_str().unwrap(),
        "--dataset",
        prep.to_str().unwrap(),
        "--out",
        t_b.to_str().unwrap(),
    ]);
    for name in ["checkpoint.ckpt", "loss_log.csv"] {
        let a = std::fs::read(t_a.join(name)).unwrap();
        let b = std::fs::read(t_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between manifest reruns");
    }
    println!("criterion 8 (determinism): PASS — simulate and train reruns are bit-identical");
}
