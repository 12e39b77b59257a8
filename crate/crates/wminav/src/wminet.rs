//! Displacement regressor over one-second wheel-IMU windows.
//!
//! The network is a multi-head 2D CNN: the accelerometer and gyroscope
//! windows (one-channel 3×window images) pass through two convolution+ReLU
//! stages each, the feature maps are concatenated along channels, one more
//! convolution+ReLU and a flatten feed two fully-connected ReLU layers (512
//! and 32 neurons), and a linear head emits the five per-interval planar
//! displacements. The output layer is linear rather than ReLU so negative
//! displacement components stay representable.
//!
//! Training supports the plain MSE loss and the dual-wheel variant whose
//! loss adds a signed wheelbase residual: with front/rear predictions and
//! their anchor positions, `J = α·MSE₁ + β·MSE₂ + γ·L_d` where `L_d` is the
//! mean over the intervals of `d − ‖p₁ − p₂‖` at the displaced positions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::TrainingWindow;
use crate::error::{Error, Result};
use crate::tensornet::{
    adam_step, read_checkpoint_file, write_checkpoint_file, AdamState, Graph, NodeId, Tensor,
    Workspace,
};
use crate::types::{Trajectory, TrajPoint};

/// Network architecture. The convolution channel counts and kernel sizes are
/// configurable; the defaults reduce the 3-axis extent in the first stage
/// and then convolve along time only.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// IMU samples per window.
    pub window: usize,
    /// Output displacement intervals per window.
    pub intervals: usize,
    /// Channels of the two per-sensor convolutions.
    pub head_channels: usize,
    /// Kernel of the first per-sensor convolution (axes × time).
    pub head1_kernel: (usize, usize),
    /// Kernel of the second per-sensor convolution.
    pub head2_kernel: (usize, usize),
    /// Channels of the post-concatenation convolution.
    pub trunk_channels: usize,
    /// Kernel of the post-concatenation convolution.
    pub trunk_kernel: (usize, usize),
    /// First fully-connected width.
    pub fc1: usize,
    /// Second fully-connected width.
    pub fc2: usize,
    /// Weight-initialization seed.
    pub seed: u64,
}

/// IMU samples per GNSS fix gap (120 Hz over 5 Hz).
pub const SAMPLES_PER_INTERVAL: usize = 24;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window: 120,
            intervals: 5,
            head_channels: 16,
            head1_kernel: (3, 5),
            head2_kernel: (1, 5),
            trunk_channels: 32,
            trunk_kernel: (1, 5),
            fc1: 512,
            fc2: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window != SAMPLES_PER_INTERVAL * self.intervals {
            return Err(Error::Config(format!(
                "window {} must be {} × intervals ({})",
                self.window, SAMPLES_PER_INTERVAL, self.intervals
            )));
        }
        for (name, v) in [
            ("intervals", self.intervals),
            ("head_channels", self.head_channels),
            ("trunk_channels", self.trunk_channels),
            ("fc1", self.fc1),
            ("fc2", self.fc2),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.head1_kernel.0 > 3 || self.head1_kernel.0 < 1 {
            return Err(Error::Config("first kernel height must be within the 3 axes".into()));
        }
        Ok(())
    }

    /// Spatial width after the three convolution stages.
    fn flat_len(&self) -> Result<(usize, usize)> {
        let h1 = 3usize.checked_sub(self.head1_kernel.0 - 1).filter(|&h| h > 0);
        let w1 = self.window.checked_sub(self.head1_kernel.1 - 1).filter(|&w| w > 0);
        let (h1, w1) = match (h1, w1) {
            (Some(h), Some(w)) => (h, w),
            _ => return Err(Error::Config("first kernel larger than input".into())),
        };
        let h2 = h1.checked_sub(self.head2_kernel.0 - 1).filter(|&h| h > 0);
        let w2 = w1.checked_sub(self.head2_kernel.1 - 1).filter(|&w| w > 0);
        let (h2, w2) = match (h2, w2) {
            (Some(h), Some(w)) => (h, w),
            _ => return Err(Error::Config("second kernel larger than its input".into())),
        };
        let h3 = h2.checked_sub(self.trunk_kernel.0 - 1).filter(|&h| h > 0);
        let w3 = w2.checked_sub(self.trunk_kernel.1 - 1).filter(|&w| w > 0);
        match (h3, w3) {
            (Some(h), Some(w)) => Ok((h, w)),
            _ => Err(Error::Config("trunk kernel larger than its input".into())),
        }
    }

    /// Declared parameter tensor shapes, in graph binding order.
    fn param_shapes(&self) -> Result<Vec<Vec<usize>>> {
        self.validate()?;
        let (h3, w3) = self.flat_len()?;
        let flat = self.trunk_channels * h3 * w3;
        let c = self.head_channels;
        let mut shapes = Vec::new();
        for _sensor in 0..2 {
            shapes.push(vec![c, 1, self.head1_kernel.0, self.head1_kernel.1]);
            shapes.push(vec![c]);
            shapes.push(vec![c, c, self.head2_kernel.0, self.head2_kernel.1]);
            shapes.push(vec![c]);
        }
        shapes.push(vec![
            self.trunk_channels,
            2 * c,
            self.trunk_kernel.0,
            self.trunk_kernel.1,
        ]);
        shapes.push(vec![self.trunk_channels]);
        shapes.push(vec![self.fc1, flat]);
        shapes.push(vec![self.fc1]);
        shapes.push(vec![self.fc2, self.fc1]);
        shapes.push(vec![self.fc2]);
        shapes.push(vec![2 * self.intervals, self.fc2]);
        shapes.push(vec![2 * self.intervals]);
        Ok(shapes)
    }

    /// Total trainable parameter count.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self
            .param_shapes()?
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum())
    }
}

/// All trainable tensors plus the per-channel input standardization
/// constants (fixed at training time, stored in checkpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor>,
    /// Mean per channel: acc x/y/z then gyro x/y/z.
    pub norm_mean: [f64; 6],
    /// Standard deviation per channel, floored away from zero.
    pub norm_std: [f64; 6],
}

impl ModelParams {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }
}

/// Builds a model with He-uniform fan-in weight initialization (biases
/// zero), deterministic in the config seed.
pub fn build_model(config: &ModelConfig) -> Result<ModelParams> {
    let shapes = config.param_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tensors = Vec::with_capacity(shapes.len());
    for shape in &shapes {
        let numel: usize = shape.iter().product();
        if shape.len() == 1 {
            tensors.push(Tensor::zeros(shape));
        } else {
            // fan-in: everything but the leading (output) extent.
            let fan_in: usize = shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..numel).map(|_| rng.random_range(-bound..bound)).collect();
            tensors.push(Tensor::new(shape.clone(), data)?);
        }
    }
    Ok(ModelParams {
        config: config.clone(),
        tensors,
        norm_mean: [0.0; 6],
        norm_std: [1.0; 6],
    })
}

/// Five (or `intervals`) planar displacement estimates for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementPrediction {
    /// (δx, δy) per interval, m.
    pub deltas: Vec<[f64; 2]>,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub window_size: usize,
}

impl Default for TrainHyperparams {
    fn default() -> Self {
        TrainHyperparams { learning_rate: 0.002, batch_size: 128, epochs: 400, window_size: 120 }
    }
}

impl TrainHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("learning rate must be nonnegative".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.window_size == 0 {
            return Err(Error::Config("batch size, epochs, window size must be positive".into()));
        }
        Ok(())
    }
}

/// Weights of the dual-wheel loss.
#[derive(Debug, Clone, PartialEq)]
pub struct WcWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Fixed inter-wheel distance d, m.
    pub wheelbase: f64,
}

impl Default for WcWeights {
    fn default() -> Self {
        WcWeights { alpha: 0.5, beta: 0.4, gamma: 0.1, wheelbase: 0.192 }
    }
}

impl WcWeights {
    pub fn validate(&self) -> Result<()> {
        if !self.wheelbase.is_finite() || self.wheelbase <= 0.0 {
            return Err(Error::Config("wheelbase must be positive".into()));
        }
        Ok(())
    }
}

/// Handles of one recorded network branch.
struct ForwardHandles {
    pred: NodeId,
    /// Pre-activation nodes feeding each ReLU (for kink diagnostics).
    relu_inputs: Vec<NodeId>,
}

/// Records one network branch on `g`, declaring parameters in
/// `param_shapes` order starting from fresh slots (or re-binding the slots
/// starting at `share_base` when provided).
fn record_branch(
    g: &mut Graph,
    cfg: &ModelConfig,
    share_base: Option<usize>,
) -> Result<ForwardHandles> {
    let acc = g.input(&[1, 3, cfg.window]);
    let gyro = g.input(&[1, 3, cfg.window]);
    let sensor_inputs = (acc, gyro);
    let mut relu_inputs = Vec::new();
    let mut slot = share_base;
    let mut param = |g: &mut Graph, shape: &[usize]| -> Result<NodeId> {
        match slot.as_mut() {
            Some(s) => {
                let id = g.param_slot(*s, shape)?;
                *s += 1;
                Ok(id)
            }
            None => Ok(g.param(shape)),
        }
    };

    let mut head = |g: &mut Graph, x: NodeId| -> Result<(NodeId, Vec<NodeId>)> {
        let w1 = param(g, &[cfg.head_channels, 1, cfg.head1_kernel.0, cfg.head1_kernel.1])?;
        let b1 = param(g, &[cfg.head_channels])?;
        let c1 = g.conv2d(x, w1, b1)?;
        let h1 = g.relu(c1);
        let w2 = param(
            g,
            &[cfg.head_channels, cfg.head_channels, cfg.head2_kernel.0, cfg.head2_kernel.1],
        )?;
        let b2 = param(g, &[cfg.head_channels])?;
        let c2 = g.conv2d(h1, w2, b2)?;
        Ok((g.relu(c2), vec![c1, c2]))
    };
    let (acc_feat, acc_pre) = head(g, acc)?;
    let (gyro_feat, gyro_pre) = head(g, gyro)?;
    relu_inputs.extend(acc_pre);
    relu_inputs.extend(gyro_pre);
    // Concatenate gyro features first, then accelerometer features.
    let cat = g.concat_channels(gyro_feat, acc_feat)?;
    let wt = param(
        g,
        &[cfg.trunk_channels, 2 * cfg.head_channels, cfg.trunk_kernel.0, cfg.trunk_kernel.1],
    )?;
    let bt = param(g, &[cfg.trunk_channels])?;
    let ct = g.conv2d(cat, wt, bt)?;
    relu_inputs.push(ct);
    let ht = g.relu(ct);
    let flat = g.flatten(ht);
    let w_fc1 = param(g, &[cfg.fc1, g.shape(flat)[0]])?;
    let b_fc1 = param(g, &[cfg.fc1])?;
    let d1 = g.dense(flat, w_fc1, b_fc1)?;
    relu_inputs.push(d1);
    let h4 = g.relu(d1);
    let w_fc2 = param(g, &[cfg.fc2, cfg.fc1])?;
    let b_fc2 = param(g, &[cfg.fc2])?;
    let d2 = g.dense(h4, w_fc2, b_fc2)?;
    relu_inputs.push(d2);
    let h5 = g.relu(d2);
    let w_out = param(g, &[2 * cfg.intervals, cfg.fc2])?;
    let b_out = param(g, &[2 * cfg.intervals])?;
    let out = g.dense(h5, w_out, b_out)?;
    let pred = g.reshape(out, &[cfg.intervals, 2])?;
    let _ = sensor_inputs; // inputs bind positionally: acc then gyro
    Ok(ForwardHandles { pred, relu_inputs })
}

/// Standardizes a (3, window) sensor tensor into the (1, 3, window) network
/// input using three of the model's six channel constants.
fn normalize_input(x: &Tensor, mean: &[f64], std: &[f64], window: usize) -> Result<Tensor> {
    if x.shape() != [3, window] {
        return Err(Error::Shape(format!(
            "sensor window must be (3, {window}), got {:?}",
            x.shape()
        )));
    }
    let mut data = Vec::with_capacity(3 * window);
    for axis in 0..3 {
        let row = &x.data()[axis * window..(axis + 1) * window];
        for &v in row {
            data.push((v - mean[axis]) / std[axis]);
        }
    }
    Tensor::new(vec![1, 3, window], data)
}

fn window_inputs(model: &ModelParams, w: &TrainingWindow) -> Result<(Tensor, Tensor)> {
    let acc = normalize_input(&w.acc, &model.norm_mean[..3], &model.norm_std[..3], model.config.window)?;
    let gyro = normalize_input(&w.gyro, &model.norm_mean[3..], &model.norm_std[3..], model.config.window)?;
    Ok((acc, gyro))
}

fn target_tensor(rows: &[[f64; 2]], intervals: usize) -> Result<Tensor> {
    if rows.len() != intervals {
        return Err(Error::Shape(format!(
            "expected {intervals} target rows, got {}",
            rows.len()
        )));
    }
    Tensor::new(vec![intervals, 2], rows.iter().flatten().copied().collect())
}

/// A recorded single-wheel training graph: inputs bind in the order
/// (normalized acc image, normalized gyro image, target), parameters in the
/// model's tensor order.
pub struct LossGraph {
    pub graph: Graph,
    pub prediction: NodeId,
    pub loss: NodeId,
    /// Pre-activation nodes feeding each ReLU (for kink diagnostics in
    /// gradient checks).
    pub relu_inputs: Vec<NodeId>,
}

/// Records the forward pass plus the MSE loss against a target input.
pub fn build_loss_graph(config: &ModelConfig) -> Result<LossGraph> {
    config.validate()?;
    let mut graph = Graph::new();
    let handles = record_branch(&mut graph, config, None)?;
    let target = graph.input(&[config.intervals, 2]);
    let loss = graph.mse(handles.pred, target)?;
    Ok(LossGraph {
        graph,
        prediction: handles.pred,
        loss,
        relu_inputs: handles.relu_inputs,
    })
}

/// Runs the network on one window.
pub fn forward(model: &ModelParams, acc: &Tensor, gyro: &Tensor) -> Result<DisplacementPrediction> {
    let cfg = &model.config;
    let mut g = Graph::new();
    let ForwardHandles { pred, .. } = record_branch(&mut g, cfg, None)?;
    let acc_in = normalize_input(acc, &model.norm_mean[..3], &model.norm_std[..3], cfg.window)?;
    let gyro_in = normalize_input(gyro, &model.norm_mean[3..], &model.norm_std[3..], cfg.window)?;
    let inputs = [acc_in, gyro_in];
    let mut ws = Workspace::default();
    g.forward(&model.tensors, &inputs, &mut ws)?;
    let pred = g.value(&ws, &model.tensors, &inputs, pred)?;
    Ok(DisplacementPrediction {
        deltas: pred.data().chunks(2).map(|c| [c[0], c[1]]).collect(),
    })
}

/// MSE over the per-interval displacement pairs.
pub fn loss_single(pred: &DisplacementPrediction, target: &[[f64; 2]]) -> Result<f64> {
    let n = pred.deltas.len();
    let p = target_tensor(&pred.deltas, n)?;
    let t = target_tensor(target, n)?;
    crate::tensornet::mse(&p, &t)
}

/// Signed wheelbase residual `d − √((x₁−x₂)² + (y₁−y₂)²)`.
pub fn wheelbase_residual(p1: (f64, f64), p2: (f64, f64), d: f64) -> f64 {
    d - ((p1.0 - p2.0).powi(2) + (p1.1 - p2.1).powi(2)).sqrt()
}

/// Dual-wheel loss `J = α·MSE₁ + β·MSE₂ + γ·mean_i L_d(i)` with the
/// residual evaluated at the anchor-displaced wheel positions.
#[allow(clippy::too_many_arguments)]
pub fn loss_wc(
    pred1: &DisplacementPrediction,
    pred2: &DisplacementPrediction,
    gt1: &[[f64; 2]],
    gt2: &[[f64; 2]],
    anchors1: &[[f64; 2]],
    anchors2: &[[f64; 2]],
    weights: &WcWeights,
) -> Result<f64> {
    weights.validate()?;
    let n = pred1.deltas.len();
    if pred2.deltas.len() != n
        || gt1.len() != n
        || gt2.len() != n
        || anchors1.len() != n
        || anchors2.len() != n
    {
        return Err(Error::Shape("loss_wc inputs must share the interval count".into()));
    }
    let mse1 = loss_single(pred1, gt1)?;
    let mse2 = loss_single(pred2, gt2)?;
    let mut ld = 0.0;
    for i in 0..n {
        let p1 = (anchors1[i][0] + pred1.deltas[i][0], anchors1[i][1] + pred1.deltas[i][1]);
        let p2 = (anchors2[i][0] + pred2.deltas[i][0], anchors2[i][1] + pred2.deltas[i][1]);
        ld += wheelbase_residual(p1, p2, weights.wheelbase);
    }
    ld /= n as f64;
    Ok(weights.alpha * mse1 + weights.beta * mse2 + weights.gamma * ld)
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

/// Training outcome: loss history plus the optimizer step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    pub optimizer_steps: u64,
}

/// Training options beyond the core hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub hp: TrainHyperparams,
    /// Seed for the epoch shuffles and the held-out split.
    pub seed: u64,
    /// Held-out fraction used only to report a validation loss (0 disables).
    pub val_fraction: f64,
    /// Fit per-channel standardization constants from the training split.
    pub normalize_inputs: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            hp: TrainHyperparams::default(),
            seed: 0,
            val_fraction: 0.1,
            normalize_inputs: true,
        }
    }
}

/// Per-channel mean/std over a set of windows, in sample-index order.
fn channel_stats(windows: &[&TrainingWindow]) -> ([f64; 6], [f64; 6]) {
    let mut sum = [0.0f64; 6];
    let mut sumsq = [0.0f64; 6];
    let mut count = 0usize;
    for w in windows {
        let n = w.acc.shape()[1];
        count += n;
        for axis in 0..3 {
            for &v in &w.acc.data()[axis * n..(axis + 1) * n] {
                sum[axis] += v;
                sumsq[axis] += v * v;
            }
            for &v in &w.gyro.data()[axis * n..(axis + 1) * n] {
                sum[3 + axis] += v;
                sumsq[3 + axis] += v * v;
            }
        }
    }
    let mut mean = [0.0f64; 6];
    let mut std = [1.0f64; 6];
    if count > 0 {
        for i in 0..6 {
            mean[i] = sum[i] / count as f64;
            let var = (sumsq[i] / count as f64 - mean[i] * mean[i]).max(0.0);
            std[i] = var.sqrt().max(1e-8);
        }
    }
    (mean, std)
}

fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    use rand::seq::SliceRandom;
    idx.shuffle(&mut rng);
    let mut val_n = (n as f64 * val_fraction).floor() as usize;
    if val_n >= n {
        val_n = 0; // never leave the training split empty
    }
    let val = idx[..val_n].to_vec();
    let train = idx[val_n..].to_vec();
    (train, val)
}

/// Epoch-shuffled minibatch Adam over the MSE loss of a single wheel.
pub fn train(
    model: &mut ModelParams,
    windows: &[TrainingWindow],
    opts: &TrainOptions,
) -> Result<TrainReport> {
    opts.hp.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyInput("training dataset is empty".into()));
    }
    if opts.hp.window_size != model.config.window {
        return Err(Error::Config(format!(
            "hyperparameter window size {} does not match model window {}",
            opts.hp.window_size, model.config.window
        )));
    }
    let cfg = model.config.clone();
    let (train_idx, val_idx) = split_indices(windows.len(), opts.val_fraction, opts.seed);
    if opts.normalize_inputs {
        let train_refs: Vec<&TrainingWindow> = train_idx.iter().map(|&i| &windows[i]).collect();
        let (mean, std) = channel_stats(&train_refs);
        model.norm_mean = mean;
        model.norm_std = std;
    }

    // Pre-normalize every window once.
    let mut prepared = Vec::with_capacity(windows.len());
    for w in windows {
        let (acc, gyro) = window_inputs(model, w)?;
        let tgt = target_tensor(&w.target, cfg.intervals)?;
        prepared.push((acc, gyro, tgt));
    }

    let lg = build_loss_graph(&cfg)?;
    let (g, loss) = (lg.graph, lg.loss);
    debug_assert_eq!(g.n_params(), model.tensors.len());

    let mut ws = Workspace::default();
    let mut grads: Vec<Tensor> = model.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect();
    let mut adam = AdamState::new(&model.tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    use rand::seq::SliceRandom;

    let mut history = Vec::with_capacity(opts.hp.epochs);
    let mut order = train_idx.clone();
    let mut sample_losses = vec![0.0f64; windows.len()];
    for epoch in 1..=opts.hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(opts.hp.batch_size) {
            for gt in grads.iter_mut() {
                gt.fill(0.0);
            }
            for &i in chunk {
                let (acc, gyro, tgt) = &prepared[i];
                let inputs = [acc.clone(), gyro.clone(), tgt.clone()];
                g.forward(&model.tensors, &inputs, &mut ws)?;
                sample_losses[i] = g.value(&ws, &model.tensors, &inputs, loss)?.data()[0];
                g.backward(loss, &model.tensors, &inputs, &mut ws, &mut grads)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            for gt in grads.iter_mut() {
                for v in gt.data_mut() {
                    *v *= scale;
                }
            }
            adam_step(&mut model.tensors, &grads, &mut adam, opts.hp.learning_rate)?;
        }
        // Mean in stable sample-index order: independent of the shuffle.
        let epoch_loss: f64 = train_idx.iter().map(|&i| sample_losses[i]).sum();
        let train_mean = epoch_loss / order.len() as f64;
        if !train_mean.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("training loss became {train_mean}"),
            });
        }
        let val = if val_idx.is_empty() {
            None
        } else {
            let mut v = 0.0;
            for &i in &val_idx {
                let (acc, gyro, tgt) = &prepared[i];
                let inputs = [acc.clone(), gyro.clone(), tgt.clone()];
                g.forward(&model.tensors, &inputs, &mut ws)?;
                v += g.value(&ws, &model.tensors, &inputs, loss)?.data()[0];
            }
            Some(v / val_idx.len() as f64)
        };
        history.push(EpochLoss { epoch, train: train_mean, val });
    }
    Ok(TrainReport { history, optimizer_steps: adam.step_count() })
}

/// Dual-wheel model: independent front/rear parameter sets by default, or a
/// single shared set applied to both wheels.
#[derive(Debug, Clone, PartialEq)]
pub struct WcModel {
    pub front: ModelParams,
    pub rear: ModelParams,
    pub shared: bool,
}

impl WcModel {
    pub fn build(config: &ModelConfig, shared: bool) -> Result<WcModel> {
        let front = build_model(config)?;
        let rear = if shared {
            front.clone()
        } else {
            let rear_cfg = ModelConfig { seed: config.seed.wrapping_add(1), ..config.clone() };
            ModelParams { config: config.clone(), ..build_model(&rear_cfg)? }
        };
        Ok(WcModel { front, rear, shared })
    }
}

/// One aligned front/rear training pair.
#[derive(Debug, Clone)]
pub struct WcExample {
    pub front: TrainingWindow,
    pub rear: TrainingWindow,
}

/// Joint training of both wheels under the wheelbase-constrained loss.
pub fn train_wc(
    model: &mut WcModel,
    examples: &[WcExample],
    weights: &WcWeights,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    opts.hp.validate()?;
    weights.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("training dataset is empty".into()));
    }
    let cfg = model.front.config.clone();
    if opts.hp.window_size != cfg.window {
        return Err(Error::Config(format!(
            "hyperparameter window size {} does not match model window {}",
            opts.hp.window_size, cfg.window
        )));
    }
    let (train_idx, val_idx) = split_indices(examples.len(), opts.val_fraction, opts.seed);
    if opts.normalize_inputs {
        let fronts: Vec<&TrainingWindow> = train_idx.iter().map(|&i| &examples[i].front).collect();
        let (m, s) = channel_stats(&fronts);
        model.front.norm_mean = m;
        model.front.norm_std = s;
        let rears: Vec<&TrainingWindow> = train_idx.iter().map(|&i| &examples[i].rear).collect();
        let (m, s) = channel_stats(&rears);
        model.rear.norm_mean = m;
        model.rear.norm_std = s;
        if model.shared {
            model.rear.norm_mean = model.front.norm_mean;
            model.rear.norm_std = model.front.norm_std;
        }
    }

    // inputs: acc1, gyro1, t1, a1, acc2, gyro2, t2, a2
    let mut prepared = Vec::with_capacity(examples.len());
    for ex in examples {
        let (acc1, gyro1) = window_inputs(&model.front, &ex.front)?;
        let (acc2, gyro2) = window_inputs(&model.rear, &ex.rear)?;
        prepared.push([
            acc1,
            gyro1,
            target_tensor(&ex.front.target, cfg.intervals)?,
            target_tensor(&ex.front.anchors, cfg.intervals)?,
            acc2,
            gyro2,
            target_tensor(&ex.rear.target, cfg.intervals)?,
            target_tensor(&ex.rear.anchors, cfg.intervals)?,
        ]);
    }

    let mut g = Graph::new();
    let front_h = record_branch(&mut g, &cfg, None)?;
    let t1 = g.input(&[cfg.intervals, 2]);
    let a1 = g.input(&[cfg.intervals, 2]);
    let rear_h = record_branch(&mut g, &cfg, if model.shared { Some(0) } else { None })?;
    let t2 = g.input(&[cfg.intervals, 2]);
    let a2 = g.input(&[cfg.intervals, 2]);
    let mse1 = g.mse(front_h.pred, t1)?;
    let mse2 = g.mse(rear_h.pred, t2)?;
    let pos1 = g.add(front_h.pred, a1)?;
    let pos2 = g.add(rear_h.pred, a2)?;
    let dist = g.row_pair_distance(pos1, pos2)?;
    let resid = g.affine(dist, -1.0, weights.wheelbase);
    let ld = g.mean(resid);
    let wm1 = g.affine(mse1, weights.alpha, 0.0);
    let wm2 = g.affine(mse2, weights.beta, 0.0);
    let wld = g.affine(ld, weights.gamma, 0.0);
    let partial = g.add(wm1, wm2)?;
    let j = g.add(partial, wld)?;

    // Concatenated parameter vector: front tensors then (unless shared) rear.
    let mut params: Vec<Tensor> = model.front.tensors.clone();
    if !model.shared {
        params.extend(model.rear.tensors.iter().cloned());
    }
    if g.n_params() != params.len() {
        return Err(Error::Shape(format!(
            "graph expects {} parameters, model provides {}",
            g.n_params(),
            params.len()
        )));
    }

    let mut ws = Workspace::default();
    let mut grads: Vec<Tensor> = params.iter().map(|t| Tensor::zeros(t.shape())).collect();
    let mut adam = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    use rand::seq::SliceRandom;

    // Graph input order matches the prepared layout:
    // acc1, gyro1, t1, a1, acc2, gyro2, t2, a2.
    let build_inputs = |p: &[Tensor; 8]| -> [Tensor; 8] { p.clone() };

    let mut history = Vec::with_capacity(opts.hp.epochs);
    let mut order = train_idx.clone();
    let mut sample_losses = vec![0.0f64; examples.len()];
    for epoch in 1..=opts.hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(opts.hp.batch_size) {
            for gt in grads.iter_mut() {
                gt.fill(0.0);
            }
            for &i in chunk {
                let inputs = build_inputs(&prepared[i]);
                g.forward(&params, &inputs, &mut ws)?;
                sample_losses[i] = g.value(&ws, &params, &inputs, j)?.data()[0];
                g.backward(j, &params, &inputs, &mut ws, &mut grads)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            for gt in grads.iter_mut() {
                for v in gt.data_mut() {
                    *v *= scale;
                }
            }
            adam_step(&mut params, &grads, &mut adam, opts.hp.learning_rate)?;
        }
        // Mean in stable sample-index order: independent of the shuffle.
        let epoch_loss: f64 = train_idx.iter().map(|&i| sample_losses[i]).sum();
        let train_mean = epoch_loss / order.len() as f64;
        if !train_mean.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("training loss became {train_mean}"),
            });
        }
        let val = if val_idx.is_empty() {
            None
        } else {
            let mut v = 0.0;
            for &i in &val_idx {
                let inputs = build_inputs(&prepared[i]);
                g.forward(&params, &inputs, &mut ws)?;
                v += g.value(&ws, &params, &inputs, j)?.data()[0];
            }
            Some(v / val_idx.len() as f64)
        };
        history.push(EpochLoss { epoch, train: train_mean, val });
    }

    let n = model.front.tensors.len();
    model.front.tensors = params[..n].to_vec();
    if model.shared {
        model.rear.tensors = model.front.tensors.clone();
    } else {
        model.rear.tensors = params[n..].to_vec();
    }
    Ok(TrainReport { history, optimizer_steps: adam.step_count() })
}

/// Cumulative position update from per-interval deltas at the fix rate.
pub fn reconstruct_from_deltas(
    origin: (f64, f64),
    t0: f64,
    interval_s: f64,
    deltas: &[[f64; 2]],
) -> Result<Trajectory> {
    if !interval_s.is_finite() || interval_s <= 0.0 {
        return Err(Error::InvalidArgument("interval must be positive".into()));
    }
    let mut points = Vec::with_capacity(deltas.len() + 1);
    let (mut x, mut y) = origin;
    points.push(TrajPoint { t: t0, x, y });
    for (i, d) in deltas.iter().enumerate() {
        x += d[0];
        y += d[1];
        points.push(TrajPoint { t: t0 + (i + 1) as f64 * interval_s, x, y });
    }
    Trajectory::new(points)
}

/// Runs the model over temporally contiguous windows and accumulates the
/// predicted displacements from `origin` at the fix rate.
pub fn infer_trajectory(
    model: &ModelParams,
    windows: &[TrainingWindow],
    origin: (f64, f64),
    interval_s: f64,
) -> Result<Trajectory> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("no windows to infer from".into()));
    }
    let window_span = model.config.intervals as f64 * interval_s;
    let sample_period = window_span / model.config.window as f64;
    for pair in windows.windows(2) {
        let gap = pair[1].t_start - (pair[0].t_start + window_span);
        if gap.abs() > sample_period + 1e-9 {
            return Err(Error::Contiguity(format!(
                "gap of {gap:.4} s between windows at t={}",
                pair[0].t_start
            )));
        }
    }
    let mut deltas = Vec::with_capacity(windows.len() * model.config.intervals);
    for w in windows {
        let pred = forward(model, &w.acc, &w.gyro)?;
        deltas.extend(pred.deltas);
    }
    reconstruct_from_deltas(origin, windows[0].t_start, interval_s, &deltas)
}

const CKPT_KIND_SINGLE: &str = "displacement-regressor";
const CKPT_KIND_WC: &str = "displacement-regressor-dual";

fn config_meta(cfg: &ModelConfig, meta: &mut BTreeMap<String, String>, prefix: &str) {
    meta.insert(format!("{prefix}window"), cfg.window.to_string());
    meta.insert(format!("{prefix}intervals"), cfg.intervals.to_string());
    meta.insert(format!("{prefix}head_channels"), cfg.head_channels.to_string());
    meta.insert(format!("{prefix}head1_kernel"), format!("{},{}", cfg.head1_kernel.0, cfg.head1_kernel.1));
    meta.insert(format!("{prefix}head2_kernel"), format!("{},{}", cfg.head2_kernel.0, cfg.head2_kernel.1));
    meta.insert(format!("{prefix}trunk_channels"), cfg.trunk_channels.to_string());
    meta.insert(format!("{prefix}trunk_kernel"), format!("{},{}", cfg.trunk_kernel.0, cfg.trunk_kernel.1));
    meta.insert(format!("{prefix}fc1"), cfg.fc1.to_string());
    meta.insert(format!("{prefix}fc2"), cfg.fc2.to_string());
    meta.insert(format!("{prefix}seed"), cfg.seed.to_string());
}

fn config_from_meta(meta: &BTreeMap<String, String>, prefix: &str) -> Result<ModelConfig> {
    let get = |k: &str| -> Result<&String> {
        meta.get(&format!("{prefix}{k}"))
            .ok_or_else(|| Error::Parse(format!("checkpoint missing {prefix}{k}")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|e| Error::Parse(format!("{prefix}{k}: {e}")))
    };
    let pair = |k: &str| -> Result<(usize, usize)> {
        let v = get(k)?;
        let (a, b) = v
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("{prefix}{k}: expected two values")))?;
        Ok((
            a.trim().parse().map_err(|e| Error::Parse(format!("{prefix}{k}: {e}")))?,
            b.trim().parse().map_err(|e| Error::Parse(format!("{prefix}{k}: {e}")))?,
        ))
    };
    Ok(ModelConfig {
        window: num("window")?,
        intervals: num("intervals")?,
        head_channels: num("head_channels")?,
        head1_kernel: pair("head1_kernel")?,
        head2_kernel: pair("head2_kernel")?,
        trunk_channels: num("trunk_channels")?,
        trunk_kernel: pair("trunk_kernel")?,
        fc1: num("fc1")?,
        fc2: num("fc2")?,
        seed: get("seed")?.parse().map_err(|e| Error::Parse(format!("{prefix}seed: {e}")))?,
    })
}

fn norm_tensors(model: &ModelParams) -> (Tensor, Tensor) {
    (
        Tensor::from_parts(vec![6], model.norm_mean.to_vec()),
        Tensor::from_parts(vec![6], model.norm_std.to_vec()),
    )
}

fn named_tensors<'a>(prefix: &str, model: &'a ModelParams) -> Vec<(String, &'a Tensor)> {
    model
        .tensors
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("{prefix}p{i:02}"), t))
        .collect()
}

/// Saves a single-wheel model checkpoint.
pub fn save_model(path: &Path, model: &ModelParams) -> Result<()> {
    let mut meta = BTreeMap::new();
    meta.insert("kind".to_string(), CKPT_KIND_SINGLE.to_string());
    config_meta(&model.config, &mut meta, "config.");
    let (mean, std) = norm_tensors(model);
    let mut tensors = named_tensors("", model);
    tensors.push(("norm_mean".to_string(), &mean));
    tensors.push(("norm_std".to_string(), &std));
    write_checkpoint_file(path, &meta, &tensors)
}

fn model_from_tensors(
    config: ModelConfig,
    tensors: &mut BTreeMap<String, Tensor>,
    prefix: &str,
) -> Result<ModelParams> {
    let shapes = config.param_shapes()?;
    let mut out = Vec::with_capacity(shapes.len());
    for (i, shape) in shapes.iter().enumerate() {
        let name = format!("{prefix}p{i:02}");
        let t = tensors
            .remove(&name)
            .ok_or_else(|| Error::Parse(format!("checkpoint missing tensor {name}")))?;
        if t.shape() != shape.as_slice() {
            return Err(Error::Shape(format!(
                "tensor {name} has shape {:?}, config implies {:?}",
                t.shape(),
                shape
            )));
        }
        out.push(t);
    }
    let mean = tensors
        .remove(&format!("{prefix}norm_mean"))
        .or_else(|| tensors.remove("norm_mean"))
        .ok_or_else(|| Error::Parse("checkpoint missing norm_mean".into()))?;
    let std = tensors
        .remove(&format!("{prefix}norm_std"))
        .or_else(|| tensors.remove("norm_std"))
        .ok_or_else(|| Error::Parse("checkpoint missing norm_std".into()))?;
    let mut norm_mean = [0.0; 6];
    let mut norm_std = [1.0; 6];
    norm_mean.copy_from_slice(mean.data());
    norm_std.copy_from_slice(std.data());
    Ok(ModelParams { config, tensors: out, norm_mean, norm_std })
}

/// Loads a single-wheel model checkpoint.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let (meta, tensor_list) = read_checkpoint_file(path)?;
    if meta.get("kind").map(|s| s.as_str()) != Some(CKPT_KIND_SINGLE) {
        return Err(Error::Parse(format!(
            "{} is not a single-wheel model checkpoint",
            path.display()
        )));
    }
    let config = config_from_meta(&meta, "config.")?;
    let mut tensors: BTreeMap<String, Tensor> = tensor_list.into_iter().collect();
    model_from_tensors(config, &mut tensors, "")
}

/// Saves a dual-wheel model checkpoint.
pub fn save_wc_model(path: &Path, model: &WcModel) -> Result<()> {
    let mut meta = BTreeMap::new();
    meta.insert("kind".to_string(), CKPT_KIND_WC.to_string());
    meta.insert("shared".to_string(), model.shared.to_string());
    config_meta(&model.front.config, &mut meta, "config.");
    let (fm, fs) = norm_tensors(&model.front);
    let (rm, rs) = norm_tensors(&model.rear);
    let mut tensors = named_tensors("front.", &model.front);
    tensors.extend(named_tensors("rear.", &model.rear));
    tensors.push(("front.norm_mean".to_string(), &fm));
    tensors.push(("front.norm_std".to_string(), &fs));
    tensors.push(("rear.norm_mean".to_string(), &rm));
    tensors.push(("rear.norm_std".to_string(), &rs));
    write_checkpoint_file(path, &meta, &tensors)
}

/// Loads a dual-wheel model checkpoint.
pub fn load_wc_model(path: &Path) -> Result<WcModel> {
    let (meta, tensor_list) = read_checkpoint_file(path)?;
    if meta.get("kind").map(|s| s.as_str()) != Some(CKPT_KIND_WC) {
        return Err(Error::Parse(format!(
            "{} is not a dual-wheel model checkpoint",
            path.display()
        )));
    }
    let config = config_from_meta(&meta, "config.")?;
    let shared = meta.get("shared").map(|s| s == "true").unwrap_or(false);
    let mut tensors: BTreeMap<String, Tensor> = tensor_list.into_iter().collect();
    let front = model_from_tensors(config.clone(), &mut tensors, "front.")?;
    let rear = model_from_tensors(config, &mut tensors, "rear.")?;
    Ok(WcModel { front, rear, shared })
}

/// Writes the loss history as `epoch,train_mse,val_mse` CSV.
pub fn write_loss_log(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for e in history {
        match e.val {
            Some(v) => out.push_str(&format!("{},{},{}\n", e.epoch, e.train, v)),
            None => out.push_str(&format!("{},{},\n", e.epoch, e.train)),
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
