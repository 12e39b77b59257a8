//! Command-line entry point: simulate, mechanize, prepare, train, eval, and
//! compare subcommands with reproducible run manifests.
//!
//! Configuration is layered: built-in defaults, then the `--config` file,
//! then explicit flags (flags win). Every run writes `manifest.txt` into the
//! output directory containing the fully resolved configuration plus an
//! FNV-1a fingerprint per artifact; a manifest parses as a config file, so
//! `--config manifest.txt` reruns the exact same job.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataio::{
    load_session, make_windows, read_windows, synchronize, RecordingSession,
    TrainingWindow, WheelGeometry, WheelTag, WindowSetMeta,
};
use crate::error::{Error, Result};
use crate::evalkit::{
    evaluate, format_report_table, madgwick_heading, morpinet_update, reference, wmin_baseline,
    write_report_csv, EvalReport,
};
use crate::kvcfg::{write_manifest, KvConfig};
use crate::mechanizer::DEFAULT_GRAVITY;
use crate::simkit::{simulate_session, ImuNoiseSpec, PeriodicTrajSpec, SessionSpec};
use crate::types::Trajectory;
use crate::wminet::{
    build_model, infer_trajectory, load_model, load_wc_model, save_model, save_wc_model, train,
    train_wc, write_loss_log, ModelConfig, TrainHyperparams, TrainOptions, WcExample, WcModel,
    WcWeights,
};

#[derive(Parser)]
#[command(
    name = "wminav",
    about = "Wheel-mounted inertial navigation: simulation, dead reckoning, displacement regression, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording session.
    Simulate(CommonArgs),
    /// Dead-reckon a wheel IMU stream through the strapdown equations.
    Mechanize(CommonArgs),
    /// Ingest sessions and cut training windows.
    Prepare(CommonArgs),
    /// Train the displacement regressor.
    Train(CommonArgs),
    /// Evaluate a method on sessions (PRMSE / TDE).
    Eval(CommonArgs),
    /// Compare two evaluation reports side by side.
    Compare(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Key=value configuration file (a previous manifest also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root random seed (mandatory for simulate and train).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset path (session directory, session root, or window bundle).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Which wheel to use.
    #[arg(long, value_parser = ["front", "rear", "both"])]
    wheel: Option<String>,
    /// Training loss.
    #[arg(long, value_parser = ["mse", "wc"])]
    loss: Option<String>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Window size in IMU samples.
    #[arg(long)]
    window: Option<usize>,
}

impl CommonArgs {
    /// Defaults ← config file ← flags.
    fn resolve(&self, command: &str) -> Result<KvConfig> {
        let mut cfg = KvConfig::new();
        if let Some(path) = &self.config {
            cfg.merge(&KvConfig::load(path)?);
        }
        cfg.set("command", command);
        if let Some(v) = self.seed {
            cfg.set("seed", v);
        }
        if let Some(v) = &self.out {
            cfg.set("out", v.display());
        }
        if let Some(v) = &self.dataset {
            cfg.set("dataset", v.display());
        }
        if let Some(v) = &self.wheel {
            cfg.set("wheel", v);
        }
        if let Some(v) = &self.loss {
            cfg.set("loss", v);
        }
        if let Some(v) = self.epochs {
            cfg.set("train.epochs", v);
        }
        if let Some(v) = self.batch_size {
            cfg.set("train.batch_size", v);
        }
        if let Some(v) = self.lr {
            cfg.set("train.lr", v);
        }
        if let Some(v) = self.window {
            cfg.set("train.window", v);
        }
        Ok(cfg)
    }
}

/// Parses and executes; returns the process exit code
/// (0 success, 1 usage/config, 2 data error, 3 numeric divergence).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successful exits.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => a.resolve("simulate").and_then(cmd_simulate),
        Command::Mechanize(a) => a.resolve("mechanize").and_then(cmd_mechanize),
        Command::Prepare(a) => a.resolve("prepare").and_then(cmd_prepare),
        Command::Train(a) => a.resolve("train").and_then(cmd_train),
        Command::Eval(a) => a.resolve("eval").and_then(cmd_eval),
        Command::Compare(a) => a.resolve("compare").and_then(cmd_compare),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn out_dir(cfg: &KvConfig) -> Result<PathBuf> {
    let out = PathBuf::from(cfg.require("out").map_err(|_| {
        Error::Usage("missing --out (or `out` in the config file)".into())
    })?);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn dataset_path(cfg: &KvConfig) -> Result<PathBuf> {
    Ok(PathBuf::from(cfg.require("dataset").map_err(|_| {
        Error::Usage("missing --dataset (or `dataset` in the config file)".into())
    })?))
}

fn require_seed(cfg: &KvConfig) -> Result<u64> {
    cfg.get_u64("seed")?
        .ok_or_else(|| Error::Usage("missing --seed (mandatory for this command)".into()))
}

fn geometry_from(cfg: &KvConfig) -> Result<WheelGeometry> {
    let default = WheelGeometry::default();
    let geom = WheelGeometry {
        wheelbase: cfg.get_f64("geometry.wheelbase_m")?.unwrap_or(default.wheelbase),
        lever_front: cfg.get_pair("geometry.lever_front")?.unwrap_or(default.lever_front),
        lever_rear: cfg.get_pair("geometry.lever_rear")?.unwrap_or(default.lever_rear),
        wheel_radius: cfg.get_f64("geometry.wheel_radius_m")?.unwrap_or(default.wheel_radius),
    };
    geom.validate()?;
    Ok(geom)
}

fn record_resolved_geometry(cfg: &mut KvConfig, geom: &WheelGeometry) {
    cfg.set("geometry.wheelbase_m", geom.wheelbase);
    cfg.set("geometry.lever_front", format!("{},{}", geom.lever_front[0], geom.lever_front[1]));
    cfg.set("geometry.lever_rear", format!("{},{}", geom.lever_rear[0], geom.lever_rear[1]));
    cfg.set("geometry.wheel_radius_m", geom.wheel_radius);
}

fn cmd_simulate(mut cfg: KvConfig) -> Result<()> {
    let out = out_dir(&cfg)?;
    let seed = require_seed(&cfg)?;
    let geometry = geometry_from(&cfg)?;
    let traj = PeriodicTrajSpec {
        speed: cfg.get_f64("sim.speed")?.unwrap_or(0.4),
        amplitude: cfg.get_f64("sim.amplitude")?.unwrap_or(0.3),
        frequency_hz: cfg.get_f64("sim.frequency_hz")?.unwrap_or(0.2),
        duration: cfg.get_f64("sim.duration")?.unwrap_or(60.0),
        heading: cfg.get_f64("sim.heading")?.unwrap_or(0.0),
    };
    let noise_on = cfg.get_bool("sim.noise")?.unwrap_or(true);
    let spec = SessionSpec {
        traj,
        geometry,
        noise: if noise_on { Some(ImuNoiseSpec { seed, ..Default::default() }) } else { None },
        prologue: cfg.get_f64("sim.prologue")?.unwrap_or(10.0),
        epilogue: cfg.get_f64("sim.epilogue")?.unwrap_or(10.0),
        ramp: cfg.get_f64("sim.ramp")?.unwrap_or(1.0),
        imu_rate_hz: cfg.get_f64("sim.imu_rate_hz")?.unwrap_or(120.0),
        gnss_rate_hz: cfg.get_f64("sim.gnss_rate_hz")?.unwrap_or(5.0),
        with_chassis: cfg.get_bool("sim.chassis")?.unwrap_or(false),
        trial_id: cfg.get("sim.trial_id").unwrap_or("synthetic").to_string(),
    };
    let session_dir = out.join("session");
    simulate_session(&session_dir, &spec)?;

    // Record the resolved values before fingerprinting.
    cfg.set("seed", seed);
    cfg.set("sim.speed", spec.traj.speed);
    cfg.set("sim.amplitude", spec.traj.amplitude);
    cfg.set("sim.frequency_hz", spec.traj.frequency_hz);
    cfg.set("sim.duration", spec.traj.duration);
    cfg.set("sim.heading", spec.traj.heading);
    cfg.set("sim.noise", noise_on);
    cfg.set("sim.prologue", spec.prologue);
    cfg.set("sim.epilogue", spec.epilogue);
    cfg.set("sim.ramp", spec.ramp);
    cfg.set("sim.imu_rate_hz", spec.imu_rate_hz);
    cfg.set("sim.gnss_rate_hz", spec.gnss_rate_hz);
    cfg.set("sim.chassis", spec.with_chassis);
    cfg.set("sim.trial_id", &spec.trial_id);
    record_resolved_geometry(&mut cfg, &spec.geometry);

    let mut artifacts: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(&session_dir).map_err(|e| Error::io(&session_dir, e))? {
        let entry = entry.map_err(|e| Error::io(&session_dir, e))?;
        artifacts.push(entry.path());
    }
    artifacts.sort();
    write_manifest(&out.join("manifest.txt"), &cfg, &artifacts)?;
    println!("session written to {}", session_dir.display());
    Ok(())
}

fn load_synced(dir: &Path) -> Result<RecordingSession> {
    synchronize(load_session(dir)?)
}

fn cmd_mechanize(mut cfg: KvConfig) -> Result<()> {
    let out = out_dir(&cfg)?;
    let dataset = dataset_path(&cfg)?;
    let wheel = WheelTag::parse(cfg.get("wheel").unwrap_or("front"))?;
    let planar = cfg.get_bool("mech.planar")?.unwrap_or(true);
    let gravity = cfg.get_f64("mech.gravity")?.unwrap_or(DEFAULT_GRAVITY);
    cfg.set("wheel", wheel);
    cfg.set("mech.planar", planar);
    cfg.set("mech.gravity", gravity);

    let session = load_synced(&dataset)?;
    let run = wmin_baseline(&session, wheel, planar, gravity)?;
    let traj_path = out.join("trajectory.csv");
    run.estimated.write_csv(&traj_path)?;
    let truth_path = out.join("wheel_truth.csv");
    run.wheel_truth.write_csv(&truth_path)?;

    let report = evaluate(
        "wmin",
        &session.meta.trial_id,
        &run.wheel_truth,
        &run.estimated,
    )?;
    let report_path = out.join("report.csv");
    write_report_csv(&report_path, std::slice::from_ref(&report))?;
    let endpoint_err = match (run.estimated.endpoint(), run.wheel_truth.endpoint()) {
        (Some(ee), Some(ge)) => ((ee.x - ge.x).powi(2) + (ee.y - ge.y).powi(2)).sqrt(),
        _ => f64::NAN,
    };
    let text = format!(
        "{}\nendpoint error: {:.4} m\n",
        format_report_table(&[report]),
        endpoint_err
    );
    let text_path = out.join("report.txt");
    std::fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    print!("{text}");

    write_manifest(
        &out.join("manifest.txt"),
        &cfg,
        &[traj_path, truth_path, report_path, text_path],
    )?;
    Ok(())
}

fn wheels_from(cfg: &KvConfig) -> Result<Vec<WheelTag>> {
    Ok(match cfg.get("wheel").unwrap_or("both") {
        "both" => vec![WheelTag::Front, WheelTag::Rear],
        one => vec![WheelTag::parse(one)?],
    })
}

/// Session subdirectories of a dataset root, honoring the optional
/// `prepare.train_sessions` / `prepare.test_sessions` comma lists.
fn session_roles(cfg: &KvConfig, root: &Path) -> Result<Vec<(String, PathBuf, String)>> {
    let mut out = Vec::new();
    let listed = |key: &str| -> Option<Vec<String>> {
        cfg.get(key).map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    };
    let train = listed("prepare.train_sessions");
    let test = listed("prepare.test_sessions");
    if train.is_none() && test.is_none() {
        // Every session directory under the root trains.
        let mut names = Vec::new();
        for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
            let entry = entry.map_err(|e| Error::io(root, e))?;
            if entry.path().join(crate::dataio::SESSION_CONFIG_NAME).exists() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        if names.is_empty() && root.join(crate::dataio::SESSION_CONFIG_NAME).exists() {
            // The root itself is a single session.
            out.push(("train".to_string(), root.to_path_buf(), "session".to_string()));
            return Ok(out);
        }
        for n in names {
            out.push(("train".to_string(), root.join(&n), n));
        }
        return Ok(out);
    }
    for (role, list) in [("train", train), ("test", test)] {
        if let Some(list) = list {
            for name in list {
                out.push((role.to_string(), root.join(&name), name));
            }
        }
    }
    Ok(out)
}

fn cmd_prepare(mut cfg: KvConfig) -> Result<()> {
    let out = out_dir(&cfg)?;
    let root = dataset_path(&cfg)?;
    let wheels = wheels_from(&cfg)?;
    let stride = cfg.get_usize("prepare.stride_fixes")?.unwrap_or(5);
    cfg.set("prepare.stride_fixes", stride);

    let roles = session_roles(&cfg, &root)?;
    if roles.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no sessions found under {}",
            root.display()
        )));
    }
    let mut artifacts = Vec::new();
    for wheel in &wheels {
        let mut by_role: std::collections::BTreeMap<String, Vec<TrainingWindow>> =
            Default::default();
        let mut sources: std::collections::BTreeMap<String, Vec<String>> = Default::default();
        for (role, dir, name) in &roles {
            let session = load_synced(dir)?;
            let geometry = session.geometry.clone();
            let windows = crate::dataio::make_windows_with_stride(
                &session, *wheel, &geometry, stride,
            )?;
            println!("{name}: {} {} windows ({role})", windows.len(), wheel);
            by_role.entry(role.clone()).or_default().extend(windows);
            sources.entry(role.clone()).or_default().push(name.clone());
        }
        for (role, windows) in by_role {
            if windows.is_empty() {
                continue;
            }
            let meta = WindowSetMeta {
                window: windows[0].acc.shape()[1],
                intervals: windows[0].target.len(),
                rate_hz: 120.0,
                source: sources[&role].join("+"),
            };
            let path = out.join(format!("{role}_{wheel}.win"));
            crate::dataio::write_windows(&path, &windows, &meta)?;
            artifacts.push(path);
        }
    }
    write_manifest(&out.join("manifest.txt"), &cfg, &artifacts)?;
    Ok(())
}

fn hyperparams_from(cfg: &KvConfig) -> Result<TrainHyperparams> {
    let d = TrainHyperparams::default();
    Ok(TrainHyperparams {
        learning_rate: cfg.get_f64("train.lr")?.unwrap_or(d.learning_rate),
        batch_size: cfg.get_usize("train.batch_size")?.unwrap_or(d.batch_size),
        epochs: cfg.get_usize("train.epochs")?.unwrap_or(d.epochs),
        window_size: cfg.get_usize("train.window")?.unwrap_or(d.window_size),
    })
}

fn model_config_from(cfg: &KvConfig, window: usize, seed: u64) -> Result<ModelConfig> {
    let d = ModelConfig::default();
    Ok(ModelConfig {
        window,
        intervals: cfg.get_usize("model.intervals")?.unwrap_or(window / 24),
        head_channels: cfg.get_usize("model.head_channels")?.unwrap_or(d.head_channels),
        head1_kernel: cfg
            .get_pair("model.head1_kernel")?
            .map(|p| (p[0] as usize, p[1] as usize))
            .unwrap_or(d.head1_kernel),
        head2_kernel: cfg
            .get_pair("model.head2_kernel")?
            .map(|p| (p[0] as usize, p[1] as usize))
            .unwrap_or(d.head2_kernel),
        trunk_channels: cfg.get_usize("model.trunk_channels")?.unwrap_or(d.trunk_channels),
        trunk_kernel: cfg
            .get_pair("model.trunk_kernel")?
            .map(|p| (p[0] as usize, p[1] as usize))
            .unwrap_or(d.trunk_kernel),
        fc1: cfg.get_usize("model.fc1")?.unwrap_or(d.fc1),
        fc2: cfg.get_usize("model.fc2")?.unwrap_or(d.fc2),
        seed,
    })
}

fn record_resolved_training(cfg: &mut KvConfig, hp: &TrainHyperparams, opts: &TrainOptions) {
    cfg.set("train.lr", hp.learning_rate);
    cfg.set("train.batch_size", hp.batch_size);
    cfg.set("train.epochs", hp.epochs);
    cfg.set("train.window", hp.window_size);
    cfg.set("train.val_fraction", opts.val_fraction);
    cfg.set("train.normalize_inputs", opts.normalize_inputs);
}

fn bundle_path(cfg: &KvConfig, dataset: &Path, wheel: WheelTag) -> PathBuf {
    // `dataset` may point straight at a bundle or at a prepare output dir.
    if dataset.is_file() {
        dataset.to_path_buf()
    } else {
        let role = cfg.get("train.role").unwrap_or("train");
        dataset.join(format!("{role}_{wheel}.win"))
    }
}

fn cmd_train(mut cfg: KvConfig) -> Result<()> {
    let out = out_dir(&cfg)?;
    let dataset = dataset_path(&cfg)?;
    let seed = require_seed(&cfg)?;
    let loss = cfg.get("loss").unwrap_or("mse").to_string();
    let hp = hyperparams_from(&cfg)?;
    let opts = TrainOptions {
        hp: hp.clone(),
        seed,
        val_fraction: cfg.get_f64("train.val_fraction")?.unwrap_or(0.1),
        normalize_inputs: cfg.get_bool("train.normalize_inputs")?.unwrap_or(true),
    };
    cfg.set("seed", seed);
    cfg.set("loss", &loss);
    record_resolved_training(&mut cfg, &hp, &opts);

    let ckpt_path = out.join("checkpoint.ckpt");
    let log_path = out.join("loss_log.csv");
    match loss.as_str() {
        "mse" => {
            let wheel = WheelTag::parse(cfg.get("wheel").unwrap_or("front"))?;
            cfg.set("wheel", wheel);
            let (meta, windows) = read_windows(&bundle_path(&cfg, &dataset, wheel))?;
            let model_cfg = model_config_from(&cfg, meta.window, seed)?;
            let mut model = build_model(&model_cfg)?;
            let report = train(&mut model, &windows, &opts)?;
            save_model(&ckpt_path, &model)?;
            write_loss_log(&log_path, &report.history)?;
            let last = report.history.last().expect("nonempty history");
            println!(
                "trained {} epochs on {} windows, final train MSE {:.6e}",
                report.history.len(),
                windows.len(),
                last.train
            );
        }
        "wc" => {
            let weights = WcWeights {
                alpha: cfg.get_f64("wc.alpha")?.unwrap_or(0.5),
                beta: cfg.get_f64("wc.beta")?.unwrap_or(0.4),
                gamma: cfg.get_f64("wc.gamma")?.unwrap_or(0.1),
                wheelbase: cfg.get_f64("geometry.wheelbase_m")?.unwrap_or(0.192),
            };
            cfg.set("wc.alpha", weights.alpha);
            cfg.set("wc.beta", weights.beta);
            cfg.set("wc.gamma", weights.gamma);
            cfg.set("geometry.wheelbase_m", weights.wheelbase);
            let shared = cfg.get_bool("wc.shared_weights")?.unwrap_or(false);
            cfg.set("wc.shared_weights", shared);
            let (meta_f, front) = read_windows(&bundle_path(&cfg, &dataset, WheelTag::Front))?;
            let (_meta_r, rear) = read_windows(&bundle_path(&cfg, &dataset, WheelTag::Rear))?;
            if front.len() != rear.len() {
                return Err(Error::Schema(format!(
                    "front bundle has {} windows, rear has {}",
                    front.len(),
                    rear.len()
                )));
            }
            let examples: Vec<WcExample> = front
                .into_iter()
                .zip(rear)
                .map(|(f, r)| {
                    if (f.t_start - r.t_start).abs() > 1e-6 {
                        Err(Error::Schema(format!(
                            "window misalignment: front at t={}, rear at t={}",
                            f.t_start, r.t_start
                        )))
                    } else {
                        Ok(WcExample { front: f, rear: r })
                    }
                })
                .collect::<Result<_>>()?;
            let model_cfg = model_config_from(&cfg, meta_f.window, seed)?;
            let mut model = WcModel::build(&model_cfg, shared)?;
            let report = train_wc(&mut model, &examples, &weights, &opts)?;
            save_wc_model(&ckpt_path, &model)?;
            write_loss_log(&log_path, &report.history)?;
            let last = report.history.last().expect("nonempty history");
            println!(
                "trained {} epochs on {} window pairs, final train J {:.6e}",
                report.history.len(),
                examples.len(),
                last.train
            );
        }
        other => return Err(Error::Usage(format!("unknown loss {other:?}"))),
    }
    write_manifest(&out.join("manifest.txt"), &cfg, &[ckpt_path, log_path])?;
    Ok(())
}

/// Rebuilds the wheel ground-truth track covered by a window sequence from
/// its anchors and final displacement (telescoping).
fn truth_from_windows(windows: &[TrainingWindow], interval_s: f64) -> Result<Trajectory> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("no windows".into()));
    }
    let mut points = Vec::new();
    for w in windows {
        for (i, a) in w.anchors.iter().enumerate() {
            points.push(crate::types::TrajPoint {
                t: w.t_start + i as f64 * interval_s,
                x: a[0],
                y: a[1],
            });
        }
    }
    let last = windows.last().expect("nonempty");
    let n = last.anchors.len();
    points.push(crate::types::TrajPoint {
        t: last.t_start + n as f64 * interval_s,
        x: last.anchors[n - 1][0] + last.target[n - 1][0],
        y: last.anchors[n - 1][1] + last.target[n - 1][1],
    });
    Trajectory::new(points)
}

fn cmd_eval(mut cfg: KvConfig) -> Result<()> {
    let out = out_dir(&cfg)?;
    let method = cfg.get("eval.method").unwrap_or("wminet").to_string();
    cfg.set("eval.method", &method);
    let sessions: Vec<PathBuf> = match cfg.get("eval.sessions") {
        Some(list) => list.split(',').map(|s| PathBuf::from(s.trim())).collect(),
        None => vec![dataset_path(&cfg)?],
    };
    let wheel = WheelTag::parse(cfg.get("wheel").unwrap_or("front"))?;
    cfg.set("wheel", wheel);

    let mut reports: Vec<EvalReport> = Vec::new();
    let mut artifacts = Vec::new();
    for dir in &sessions {
        let session = load_synced(dir)?;
        let name = session.meta.trial_id.clone();
        let interval_s = 1.0 / session.meta.gnss_rate_hz;
        let report = match method.as_str() {
            "wmin" => {
                let planar = cfg.get_bool("mech.planar")?.unwrap_or(true);
                let gravity = cfg.get_f64("mech.gravity")?.unwrap_or(DEFAULT_GRAVITY);
                let run = wmin_baseline(&session, wheel, planar, gravity)?;
                evaluate("wmin", &name, &run.wheel_truth, &run.estimated)?
            }
            "wminet" | "wminet-wc" => {
                let ckpt = PathBuf::from(cfg.require("eval.checkpoint")?);
                let geometry = session.geometry.clone();
                let windows = make_windows(&session, wheel, &geometry)?;
                if windows.is_empty() {
                    return Err(Error::EmptyInput(format!(
                        "session {name} produced no evaluation windows"
                    )));
                }
                let model = if method == "wminet-wc" {
                    let wc = load_wc_model(&ckpt)?;
                    match wheel {
                        WheelTag::Front => wc.front,
                        WheelTag::Rear => wc.rear,
                    }
                } else {
                    load_model(&ckpt)?
                };
                let origin = (windows[0].anchors[0][0], windows[0].anchors[0][1]);
                let est = infer_trajectory(&model, &windows, origin, interval_s)?;
                let truth = truth_from_windows(&windows, interval_s)?;
                evaluate(&method, &name, &truth, &est)?
            }
            "morpinet" => {
                // Oracle per-interval distances from the RTK track, headings
                // from the chassis stream through the orientation filter.
                let chassis = session.imu.get("chassis").ok_or_else(|| {
                    Error::Schema("distance-plus-heading method needs a chassis stream".into())
                })?;
                let sync = session.sync()?;
                let track = session
                    .gnss_track()?
                    .slice_time(sync.motion_start, sync.motion_end);
                let beta = cfg.get_f64("eval.madgwick_beta")?.unwrap_or(0.1);
                let headings_full = madgwick_heading(chassis, beta)?;
                let pts = track.points();
                let mut distances = Vec::new();
                let mut headings = Vec::new();
                for pair in pts.windows(2) {
                    distances.push(
                        ((pair[1].x - pair[0].x).powi(2) + (pair[1].y - pair[0].y).powi(2)).sqrt(),
                    );
                    // Heading at the interval start.
                    let t = pair[0].t;
                    let idx = headings_full.partition_point(|&(ht, _)| ht < t);
                    let (_, psi) = headings_full[idx.min(headings_full.len() - 1)];
                    headings.push(psi);
                }
                // The filter yaw starts at zero; offset by the initial course.
                let course0 = (pts[1].y - pts[0].y).atan2(pts[1].x - pts[0].x);
                let offset = course0 - headings[0];
                for h in &mut headings {
                    *h += offset;
                }
                let est = morpinet_update(
                    (pts[0].x, pts[0].y),
                    pts[0].t,
                    1.0 / session.meta.gnss_rate_hz,
                    &distances,
                    &headings,
                )?;
                evaluate("morpinet", &name, &track, &est)?
            }
            other => return Err(Error::Usage(format!("unknown eval method {other:?}"))),
        };
        let recon_path = out.join(format!("recon_{name}.csv"));
        report.reconstructed.write_csv(&recon_path)?;
        artifacts.push(recon_path);
        reports.push(report);
    }

    let report_path = out.join("report.csv");
    write_report_csv(&report_path, &reports)?;
    let table = format_report_table(&reports);
    let text_path = out.join("report.txt");
    std::fs::write(&text_path, &table).map_err(|e| Error::io(&text_path, e))?;
    print!("{table}");
    artifacts.push(report_path);
    artifacts.push(text_path);
    write_manifest(&out.join("manifest.txt"), &cfg, &artifacts)?;
    Ok(())
}

fn read_report_csv(path: &Path) -> Result<Vec<(String, String, f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Schema(format!(
                "{} line {}: expected 4 columns",
                path.display(),
                ln + 1
            )));
        }
        rows.push((
            parts[0].to_string(),
            parts[1].to_string(),
            parts[2].parse().map_err(|e| Error::Parse(format!("PRMSE_m: {e}")))?,
            parts[3].parse().map_err(|e| Error::Parse(format!("TDE_pct: {e}")))?,
        ));
    }
    Ok(rows)
}

fn cmd_compare(mut cfg: KvConfig) -> Result<()> {
    let out = out_dir(&cfg)?;
    let path_a = PathBuf::from(cfg.require("compare.a")?);
    let path_b = PathBuf::from(cfg.require("compare.b")?);
    let rows_a = read_report_csv(&path_a)?;
    let rows_b = read_report_csv(&path_b)?;
    cfg.set("compare.a", path_a.display());
    cfg.set("compare.b", path_b.display());

    let label_a = rows_a.first().map(|r| r.0.clone()).unwrap_or_else(|| "a".into());
    let label_b = rows_b.first().map(|r| r.0.clone()).unwrap_or_else(|| "b".into());

    let mut csv = String::from("trajectory,PRMSE_a_m,PRMSE_b_m,improvement_pct\n");
    let mut text = format!(
        "{:<14} {:>12} {:>12} {:>16}\n",
        "trajectory",
        format!("{label_a} [m]"),
        format!("{label_b} [m]"),
        "improvement [%]"
    );
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    let mut n = 0usize;
    for (_, traj, prmse_a, _) in &rows_a {
        if let Some((_, _, prmse_b, _)) = rows_b.iter().find(|(_, t, _, _)| t == traj) {
            let improvement = 100.0 * (prmse_a - prmse_b) / prmse_a;
            csv.push_str(&format!("{traj},{prmse_a},{prmse_b},{improvement}\n"));
            text.push_str(&format!(
                "{traj:<14} {prmse_a:>12.3} {prmse_b:>12.3} {improvement:>16.2}\n"
            ));
            sum_a += prmse_a;
            sum_b += prmse_b;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("no common trajectories to compare".into()));
    }
    let (avg_a, avg_b) = (sum_a / n as f64, sum_b / n as f64);
    let avg_improvement = 100.0 * (avg_a - avg_b) / avg_a;
    csv.push_str(&format!("average,{avg_a},{avg_b},{avg_improvement}\n"));
    text.push_str(&format!(
        "{:<14} {avg_a:>12.3} {avg_b:>12.3} {avg_improvement:>16.2}\n",
        "average"
    ));
    text.push_str(&format!(
        "\nreference: plain {} m vs constrained {} m, improvement {} %\n",
        reference::WMINET_PRMSE_M,
        reference::WMINET_WC_PRMSE_M,
        reference::WMINET_WC_IMPROVEMENT_PCT,
    ));

    let csv_path = out.join("compare.csv");
    std::fs::write(&csv_path, &csv).map_err(|e| Error::io(&csv_path, e))?;
    let text_path = out.join("compare.txt");
    std::fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    print!("{text}");
    write_manifest(&out.join("manifest.txt"), &cfg, &[csv_path, text_path])?;
    Ok(())
}
