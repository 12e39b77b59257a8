//! Recorded-operation tape with reverse-mode gradients.
//!
//! A [`Graph`] is built once per architecture: each builder call records an
//! operation node with a statically checked output shape. Leaves bind to
//! external storage by slot index — inputs to per-sample tensors, parameters
//! to the model's parameter list — so repeated forward/backward passes over a
//! batch never copy parameters. A [`Workspace`] holds the per-pass value and
//! gradient buffers and is reused across samples.
//!
//! Nodes are appended in topological order, so the forward pass is a single
//! left-to-right sweep and the backward pass a right-to-left sweep.

use crate::error::{Error, Result};

use super::layers::{conv2d_backward_raw, conv2d_raw, conv_out_extents, dense_backward_raw, dense_raw};
use super::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// External input, bound by slot at forward time.
    Input(usize),
    /// External parameter, bound by slot at forward time.
    Param(usize),
    /// Valid 2D cross-correlation.
    Conv2d { x: NodeId, w: NodeId, b: NodeId },
    /// Fully-connected layer.
    Dense { x: NodeId, w: NodeId, b: NodeId },
    Relu(NodeId),
    /// Channel-axis concatenation of two rank-3 tensors.
    ConcatChannels(NodeId, NodeId),
    Reshape(NodeId),
    /// Per-leading-extent mean squared error (scalar output).
    Mse { pred: NodeId, target: NodeId },
    Add(NodeId, NodeId),
    /// scale·x + shift, elementwise.
    AffineConst { x: NodeId, scale: f64, shift: f64 },
    /// Mean over all elements (scalar output).
    Mean(NodeId),
    /// Euclidean distance between matching rows of two (n, 2) tensors.
    RowPairDistance { a: NodeId, b: NodeId },
}

/// Static computation graph over externally stored leaves.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    ops: Vec<Op>,
    shapes: Vec<Vec<usize>>,
    n_inputs: usize,
    n_params: usize,
}

/// Reusable value/gradient buffers for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Workspace {
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    forward_done: bool,
}

/// Resolves a node's value from the leaf stores or the workspace values.
fn node_value<'a>(
    ops: &[Op],
    values: &'a [Tensor],
    params: &'a [Tensor],
    inputs: &'a [Tensor],
    id: NodeId,
) -> &'a Tensor {
    match ops[id.0] {
        Op::Input(slot) => &inputs[slot],
        Op::Param(slot) => &params[slot],
        _ => &values[id.0],
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.shapes[id.0]
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeId {
        self.ops.push(op);
        self.shapes.push(shape);
        NodeId(self.ops.len() - 1)
    }

    /// Declares the next external input slot.
    pub fn input(&mut self, shape: &[usize]) -> NodeId {
        let slot = self.n_inputs;
        self.n_inputs += 1;
        self.push(Op::Input(slot), shape.to_vec())
    }

    /// Declares the next external parameter slot.
    pub fn param(&mut self, shape: &[usize]) -> NodeId {
        let slot = self.n_params;
        self.n_params += 1;
        self.push(Op::Param(slot), shape.to_vec())
    }

    /// Re-binds an existing parameter slot as a new node (weight sharing).
    pub fn param_slot(&mut self, slot: usize, shape: &[usize]) -> Result<NodeId> {
        if slot >= self.n_params {
            return Err(Error::InvalidArgument(format!(
                "parameter slot {slot} not yet declared"
            )));
        }
        Ok(self.push(Op::Param(slot), shape.to_vec()))
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (oc, oh, ow) = conv_out_extents(self.shape(x), self.shape(w))?;
        if self.shape(b) != [oc] {
            return Err(Error::Shape(format!(
                "conv bias shape {:?} does not match {oc} output channels",
                self.shape(b)
            )));
        }
        Ok(self.push(Op::Conv2d { x, w, b }, vec![oc, oh, ow]))
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 {
            return Err(Error::Shape(format!("dense weights must be rank 2, got {ws:?}")));
        }
        let n_in: usize = self.shape(x).iter().product();
        if n_in != ws[1] {
            return Err(Error::Shape(format!(
                "dense input has {n_in} elements, weights expect {}",
                ws[1]
            )));
        }
        if self.shape(b) != [ws[0]] {
            return Err(Error::Shape(format!(
                "dense bias shape {:?} does not match {} outputs",
                self.shape(b),
                ws[0]
            )));
        }
        Ok(self.push(Op::Dense { x, w, b }, vec![ws[0]]))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Op::Relu(x), shape)
    }

    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[1..] != sb[1..] {
            return Err(Error::Shape(format!(
                "concat requires rank-3 tensors with equal spatial extents, got {sa:?} and {sb:?}"
            )));
        }
        Ok(self.push(Op::ConcatChannels(a, b), vec![sa[0] + sb[0], sa[1], sa[2]]))
    }

    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let n: usize = self.shape(x).iter().product();
        self.push(Op::Reshape(x), vec![n])
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let n: usize = self.shape(x).iter().product();
        if shape.iter().product::<usize>() != n {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape(x)
            )));
        }
        Ok(self.push(Op::Reshape(x), shape.to_vec()))
    }

    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::Shape(format!(
                "mse shapes differ: {:?} vs {:?}",
                self.shape(pred),
                self.shape(target)
            )));
        }
        if self.shape(pred).iter().product::<usize>() == 0 {
            return Err(Error::EmptyInput("mse over empty tensors".into()));
        }
        Ok(self.push(Op::Mse { pred, target }, vec![1]))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "add shapes differ: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Add(a, b), shape))
    }

    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Op::AffineConst { x, scale, shift }, shape)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Mean(x), vec![1])
    }

    pub fn row_pair_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa != sb || sa.len() != 2 || sa[1] != 2 {
            return Err(Error::Shape(format!(
                "row_pair_distance requires two equal (n, 2) tensors, got {sa:?} and {sb:?}"
            )));
        }
        Ok(self.push(Op::RowPairDistance { a, b }, vec![sa[0]]))
    }

    /// Evaluates every node. Leaf slots must match the declared shapes.
    pub fn forward(
        &self,
        params: &[Tensor],
        inputs: &[Tensor],
        ws: &mut Workspace,
    ) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Shape(format!(
                "graph expects {} parameter tensors, got {}",
                self.n_params,
                params.len()
            )));
        }
        if inputs.len() != self.n_inputs {
            return Err(Error::Shape(format!(
                "graph expects {} input tensors, got {}",
                self.n_inputs,
                inputs.len()
            )));
        }
        if ws.values.len() != self.ops.len() {
            ws.values = self.shapes.iter().map(|s| Tensor::zeros(s)).collect();
            ws.grads = self.shapes.iter().map(|s| Tensor::zeros(s)).collect();
        }
        for (idx, op) in self.ops.iter().enumerate() {
            match *op {
                Op::Input(slot) => {
                    if inputs[slot].shape() != self.shapes[idx] {
                        return Err(Error::Shape(format!(
                            "input slot {slot} has shape {:?}, declared {:?}",
                            inputs[slot].shape(),
                            self.shapes[idx]
                        )));
                    }
                }
                Op::Param(slot) => {
                    if params[slot].shape() != self.shapes[idx] {
                        return Err(Error::Shape(format!(
                            "parameter slot {slot} has shape {:?}, declared {:?}",
                            params[slot].shape(),
                            self.shapes[idx]
                        )));
                    }
                }
                _ => {
                    // Children always precede idx, so splitting gives the
                    // output buffer and read access to every child value.
                    let (lower, upper) = ws.values.split_at_mut(idx);
                    let out = upper[0].data_mut();
                    let val = |id: NodeId| node_value(&self.ops, lower, params, inputs, id);
                    eval_op(op, val, out);
                }
            }
        }
        ws.forward_done = true;
        Ok(())
    }

    /// Value of a node after [`Graph::forward`].
    pub fn value<'a>(
        &self,
        ws: &'a Workspace,
        params: &'a [Tensor],
        inputs: &'a [Tensor],
        id: NodeId,
    ) -> Result<&'a Tensor> {
        if !ws.forward_done {
            return Err(Error::Usage("value() before forward()".into()));
        }
        Ok(node_value(&self.ops, &ws.values, params, inputs, id))
    }

    /// Reverse-mode gradients of the scalar `root` with respect to every node.
    ///
    /// Parameter gradients are accumulated (`+=`) into `param_grads`, which
    /// must hold one tensor per parameter slot with matching shapes — batch
    /// callers zero them once per batch and accumulate in sample order.
    pub fn backward(
        &self,
        root: NodeId,
        params: &[Tensor],
        inputs: &[Tensor],
        ws: &mut Workspace,
        param_grads: &mut [Tensor],
    ) -> Result<()> {
        if !ws.forward_done {
            return Err(Error::Usage("backward() before forward()".into()));
        }
        if self.shapes[root.0].iter().product::<usize>() != 1 {
            return Err(Error::Shape(format!(
                "backward root must be scalar, got shape {:?}",
                self.shapes[root.0]
            )));
        }
        if param_grads.len() != self.n_params {
            return Err(Error::Shape(format!(
                "expected {} gradient tensors, got {}",
                self.n_params,
                param_grads.len()
            )));
        }
        for g in ws.grads.iter_mut() {
            g.fill(0.0);
        }
        ws.grads[root.0].data_mut()[0] = 1.0;

        let values = &ws.values;
        for idx in (0..=root.0).rev() {
            let op = &self.ops[idx];
            if matches!(op, Op::Input(_) | Op::Param(_)) {
                continue;
            }
            let (lower, upper) = ws.grads.split_at_mut(idx);
            let g_out: &[f64] = upper[0].data();
            let val = |id: NodeId| node_value(&self.ops, values, params, inputs, id);
            backprop_op(op, val, g_out, lower);
        }
        for (idx, op) in self.ops.iter().enumerate() {
            if let Op::Param(slot) = *op {
                if param_grads[slot].shape() != self.shapes[idx].as_slice() {
                    return Err(Error::Shape(format!(
                        "gradient tensor for slot {slot} has shape {:?}, expected {:?}",
                        param_grads[slot].shape(),
                        self.shapes[idx]
                    )));
                }
                for (g, v) in param_grads[slot]
                    .data_mut()
                    .iter_mut()
                    .zip(ws.grads[idx].data())
                {
                    *g += v;
                }
            }
        }
        Ok(())
    }

    /// Gradient of the last backward root with respect to any node (e.g. an input).
    pub fn grad<'a>(&self, ws: &'a Workspace, id: NodeId) -> &'a Tensor {
        &ws.grads[id.0]
    }
}

fn eval_op<'a>(op: &Op, val: impl Fn(NodeId) -> &'a Tensor, out: &mut [f64]) {
    match *op {
        Op::Input(_) | Op::Param(_) => unreachable!("leaves are bound externally"),
        Op::Conv2d { x, w, b } => {
            let (xt, wt, bt) = (val(x), val(w), val(b));
            let (xs, ws) = (xt.shape(), wt.shape());
            conv2d_raw(
                xt.data(),
                (xs[0], xs[1], xs[2]),
                wt.data(),
                (ws[0], ws[1], ws[2], ws[3]),
                bt.data(),
                out,
            );
        }
        Op::Dense { x, w, b } => {
            dense_raw(val(x).data(), val(w).data(), val(b).data(), out);
        }
        Op::Relu(x) => {
            for (o, v) in out.iter_mut().zip(val(x).data()) {
                *o = v.max(0.0);
            }
        }
        Op::ConcatChannels(a, b) => {
            let (da, db) = (val(a).data(), val(b).data());
            out[..da.len()].copy_from_slice(da);
            out[da.len()..].copy_from_slice(db);
        }
        Op::Reshape(x) => out.copy_from_slice(val(x).data()),
        Op::Mse { pred, target } => {
            let pt = val(pred);
            let n = pt.shape()[0] as f64;
            let ss: f64 = pt
                .data()
                .iter()
                .zip(val(target).data())
                .map(|(p, t)| (p - t) * (p - t))
                .sum();
            out[0] = ss / n;
        }
        Op::Add(a, b) => {
            for ((o, x), y) in out.iter_mut().zip(val(a).data()).zip(val(b).data()) {
                *o = x + y;
            }
        }
        Op::AffineConst { x, scale, shift } => {
            for (o, v) in out.iter_mut().zip(val(x).data()) {
                *o = scale * v + shift;
            }
        }
        Op::Mean(x) => {
            let d = val(x).data();
            out[0] = d.iter().sum::<f64>() / d.len() as f64;
        }
        Op::RowPairDistance { a, b } => {
            let (da, db) = (val(a).data(), val(b).data());
            for (i, o) in out.iter_mut().enumerate() {
                let dx = da[2 * i] - db[2 * i];
                let dy = da[2 * i + 1] - db[2 * i + 1];
                *o = (dx * dx + dy * dy).sqrt();
            }
        }
    }
}

/// Propagates `g_out` into the gradients of the operation's children, which
/// all live at indices below the node (`lower`).
fn backprop_op<'a>(
    op: &Op,
    val: impl Fn(NodeId) -> &'a Tensor,
    g_out: &[f64],
    lower: &mut [Tensor],
) {
    match *op {
        Op::Input(_) | Op::Param(_) => {}
        Op::Conv2d { x, w, b } => {
            let (xt, wt) = (val(x), val(w));
            let (xs, ws) = (xt.shape().to_vec(), wt.shape().to_vec());
            let (dx, dw, db) = three_grads(lower, x, w, b);
            conv2d_backward_raw(
                xt.data(),
                (xs[0], xs[1], xs[2]),
                wt.data(),
                (ws[0], ws[1], ws[2], ws[3]),
                g_out,
                dx,
                dw,
                db,
            );
        }
        Op::Dense { x, w, b } => {
            let (xt, wt) = (val(x), val(w));
            let (dx, dw, db) = three_grads(lower, x, w, b);
            dense_backward_raw(xt.data(), wt.data(), g_out, dx, dw, db);
        }
        Op::Relu(x) => {
            let xd = val(x).data();
            let dx = lower[x.0].data_mut();
            for (i, g) in g_out.iter().enumerate() {
                if xd[i] > 0.0 {
                    dx[i] += g;
                }
            }
        }
        Op::ConcatChannels(a, b) => {
            let na = lower[a.0].numel();
            let (first, second) = if a.0 < b.0 {
                let (lo, hi) = lower.split_at_mut(b.0);
                (&mut lo[a.0], &mut hi[0])
            } else {
                let (lo, hi) = lower.split_at_mut(a.0);
                (&mut hi[0], &mut lo[b.0])
            };
            for (ga, g) in first.data_mut().iter_mut().zip(&g_out[..na]) {
                *ga += g;
            }
            for (gb, g) in second.data_mut().iter_mut().zip(&g_out[na..]) {
                *gb += g;
            }
        }
        Op::Reshape(x) => {
            for (gx, g) in lower[x.0].data_mut().iter_mut().zip(g_out) {
                *gx += g;
            }
        }
        Op::Mse { pred, target } => {
            if pred == target {
                return; // both sides cancel exactly
            }
            let pt = val(pred);
            let n = pt.shape()[0] as f64;
            let g = g_out[0];
            let pd: &[f64] = pt.data();
            let td: &[f64] = val(target).data();
            let (dp, dt) = two_grads(lower, pred, target);
            for i in 0..pd.len() {
                let d = 2.0 * (pd[i] - td[i]) / n * g;
                dp[i] += d;
                dt[i] -= d;
            }
        }
        Op::Add(a, b) => {
            if a == b {
                let da = lower[a.0].data_mut();
                for (i, g) in g_out.iter().enumerate() {
                    da[i] += 2.0 * g;
                }
            } else {
                let (da, db) = two_grads(lower, a, b);
                for (i, g) in g_out.iter().enumerate() {
                    da[i] += g;
                    db[i] += g;
                }
            }
        }
        Op::AffineConst { x, scale, .. } => {
            let dx = lower[x.0].data_mut();
            for (i, g) in g_out.iter().enumerate() {
                dx[i] += scale * g;
            }
        }
        Op::Mean(x) => {
            let dx = lower[x.0].data_mut();
            let g = g_out[0] / dx.len() as f64;
            for v in dx {
                *v += g;
            }
        }
        Op::RowPairDistance { a, b } => {
            if a == b {
                return; // zero distance everywhere, zero subgradient
            }
            let ad: &[f64] = val(a).data();
            let bd: &[f64] = val(b).data();
            let (da, db) = two_grads(lower, a, b);
            for (i, g) in g_out.iter().enumerate() {
                let dx = ad[2 * i] - bd[2 * i];
                let dy = ad[2 * i + 1] - bd[2 * i + 1];
                let dist = (dx * dx + dy * dy).sqrt();
                if dist == 0.0 {
                    continue; // distance kink: subgradient 0
                }
                let (gx, gy) = (g * dx / dist, g * dy / dist);
                da[2 * i] += gx;
                da[2 * i + 1] += gy;
                db[2 * i] -= gx;
                db[2 * i + 1] -= gy;
            }
        }
    }
}

/// Disjoint mutable gradient buffers for two distinct child nodes.
fn two_grads(lower: &mut [Tensor], a: NodeId, b: NodeId) -> (&mut [f64], &mut [f64]) {
    assert_ne!(a.0, b.0, "children of a two-input op must be distinct nodes");
    if a.0 < b.0 {
        let (lo, hi) = lower.split_at_mut(b.0);
        (lo[a.0].data_mut(), hi[0].data_mut())
    } else {
        let (lo, hi) = lower.split_at_mut(a.0);
        (hi[0].data_mut(), lo[b.0].data_mut())
    }
}

/// Disjoint mutable gradient buffers for three distinct child nodes.
fn three_grads(
    lower: &mut [Tensor],
    x: NodeId,
    w: NodeId,
    b: NodeId,
) -> (&mut [f64], &mut [f64], &mut [f64]) {
    let mut order = [(x.0, 0usize), (w.0, 1), (b.0, 2)];
    order.sort_unstable();
    assert!(order[0].0 < order[1].0 && order[1].0 < order[2].0);
    let (lo, rest) = lower.split_at_mut(order[1].0);
    let (mid, hi) = rest.split_at_mut(order[2].0 - order[1].0);
    let mut slots: [Option<&mut [f64]>; 3] = [
        Some(lo[order[0].0].data_mut()),
        Some(mid[0].data_mut()),
        Some(hi[0].data_mut()),
    ];
    let gx = slots[order.iter().position(|&(_, r)| r == 0).unwrap()].take().unwrap();
    let gw = slots[order.iter().position(|&(_, r)| r == 1).unwrap()].take().unwrap();
    let gb = slots[order.iter().position(|&(_, r)| r == 2).unwrap()].take().unwrap();
    (gx, gw, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_before_forward_is_usage_error() {
        let mut g = Graph::new();
        let x = g.param(&[1]);
        let t = g.input(&[1]);
        let loss = g.mse(x, t).unwrap();
        let mut ws = Workspace::default();
        let mut grads = vec![Tensor::zeros(&[1])];
        let err = g.backward(
            loss,
            &[Tensor::scalar(3.0)],
            &[Tensor::scalar(0.0)],
            &mut ws,
            &mut grads,
        );
        assert!(matches!(err, Err(Error::Usage(_))));
    }

    #[test]
    fn scalar_mse_gradient() {
        // loss = mse(x, 0) with scalar x = 3 → dloss/dx = 6.
        let mut g = Graph::new();
        let x = g.param(&[1]);
        let t = g.input(&[1]);
        let loss = g.mse(x, t).unwrap();
        let params = [Tensor::scalar(3.0)];
        let inputs = [Tensor::scalar(0.0)];
        let mut ws = Workspace::default();
        g.forward(&params, &inputs, &mut ws).unwrap();
        assert_eq!(g.value(&ws, &params, &inputs, loss).unwrap().data(), &[9.0]);
        let mut grads = vec![Tensor::zeros(&[1])];
        g.backward(loss, &params, &inputs, &mut ws, &mut grads).unwrap();
        assert_eq!(grads[0].data(), &[6.0]);
    }

    #[test]
    fn off_path_parameter_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(&[1]);
        let _unused = g.param(&[3]);
        let t = g.input(&[1]);
        let loss = g.mse(x, t).unwrap();
        let params = [Tensor::scalar(2.0), Tensor::new(vec![3], vec![5.0, 6.0, 7.0]).unwrap()];
        let inputs = [Tensor::scalar(0.0)];
        let mut ws = Workspace::default();
        g.forward(&params, &inputs, &mut ws).unwrap();
        let mut grads = vec![Tensor::zeros(&[1]), Tensor::zeros(&[3])];
        g.backward(loss, &params, &inputs, &mut ws, &mut grads).unwrap();
        assert!(grads[1].data().iter().all(|&v| v == 0.0));
    }

    /// Central finite differences on randomly probed parameter entries.
    fn finite_diff_check(
        g: &Graph,
        loss: NodeId,
        params: &mut [Tensor],
        inputs: &[Tensor],
        probes: usize,
        seed: u64,
        tol: f64,
    ) {
        let mut ws = Workspace::default();
        g.forward(params, inputs, &mut ws).unwrap();
        let mut grads: Vec<Tensor> =
            params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        g.backward(loss, params, inputs, &mut ws, &mut grads).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-5;
        for _ in 0..probes {
            let pi = rng.random_range(0..params.len());
            let ei = rng.random_range(0..params[pi].numel());
            let orig = params[pi].data()[ei];
            params[pi].data_mut()[ei] = orig + h;
            let mut ws2 = Workspace::default();
            g.forward(params, inputs, &mut ws2).unwrap();
            let lp = g.value(&ws2, params, inputs, loss).unwrap().data()[0];
            params[pi].data_mut()[ei] = orig - h;
            g.forward(params, inputs, &mut ws2).unwrap();
            let lm = g.value(&ws2, params, inputs, loss).unwrap().data()[0];
            params[pi].data_mut()[ei] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let an = grads[pi].data()[ei];
            let denom = an.abs().max(fd.abs()).max(1e-8);
            assert!(
                (fd - an).abs() / denom < tol,
                "param {pi}[{ei}]: fd {fd} vs analytic {an}"
            );
        }
    }

    fn rnd(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn conv_layer_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut g = Graph::new();
        let x = g.input(&[2, 3, 7]);
        let w = g.param(&[3, 2, 2, 3]);
        let b = g.param(&[3]);
        let y = g.conv2d(x, w, b).unwrap();
        let t = g.input(&[3, 2, 5]);
        let loss = g.mse(y, t).unwrap();
        let mut params = vec![
            Tensor::new(vec![3, 2, 2, 3], rnd(&mut rng, 36)).unwrap(),
            Tensor::new(vec![3], rnd(&mut rng, 3)).unwrap(),
        ];
        let inputs = vec![
            Tensor::new(vec![2, 3, 7], rnd(&mut rng, 42)).unwrap(),
            Tensor::new(vec![3, 2, 5], rnd(&mut rng, 30)).unwrap(),
        ];
        finite_diff_check(&g, loss, &mut params, &inputs, 25, 22, 1e-4);
    }

    #[test]
    fn dense_relu_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut g = Graph::new();
        let x = g.input(&[6]);
        let w1 = g.param(&[4, 6]);
        let b1 = g.param(&[4]);
        let h = g.dense(x, w1, b1).unwrap();
        let hr = g.relu(h);
        let w2 = g.param(&[2, 4]);
        let b2 = g.param(&[2]);
        let y = g.dense(hr, w2, b2).unwrap();
        let t = g.input(&[2]);
        let loss = g.mse(y, t).unwrap();
        let mut params = vec![
            Tensor::new(vec![4, 6], rnd(&mut rng, 24)).unwrap(),
            Tensor::new(vec![4], rnd(&mut rng, 4)).unwrap(),
            Tensor::new(vec![2, 4], rnd(&mut rng, 8)).unwrap(),
            Tensor::new(vec![2], rnd(&mut rng, 2)).unwrap(),
        ];
        let inputs = vec![
            Tensor::new(vec![6], rnd(&mut rng, 6)).unwrap(),
            Tensor::new(vec![2], rnd(&mut rng, 2)).unwrap(),
        ];
        finite_diff_check(&g, loss, &mut params, &inputs, 25, 24, 1e-4);
    }

    #[test]
    fn composite_loss_gradient_matches_finite_differences() {
        // Two mse terms plus a row-pair-distance penalty, mirroring the
        // weighted dual-branch loss shape.
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut g = Graph::new();
        let p1 = g.param(&[5, 2]);
        let p2 = g.param(&[5, 2]);
        let t1 = g.input(&[5, 2]);
        let t2 = g.input(&[5, 2]);
        let a1 = g.input(&[5, 2]);
        let a2 = g.input(&[5, 2]);
        let m1 = g.mse(p1, t1).unwrap();
        let m2 = g.mse(p2, t2).unwrap();
        let pos1 = g.add(p1, a1).unwrap();
        let pos2 = g.add(p2, a2).unwrap();
        let dist = g.row_pair_distance(pos1, pos2).unwrap();
        let resid = g.affine(dist, -1.0, 0.3);
        let ld = g.mean(resid);
        let wm1 = g.affine(m1, 0.5, 0.0);
        let wm2 = g.affine(m2, 0.4, 0.0);
        let wld = g.affine(ld, 0.1, 0.0);
        let s = g.add(wm1, wm2).unwrap();
        let loss = g.add(s, wld).unwrap();
        let mut params = vec![
            Tensor::new(vec![5, 2], rnd(&mut rng, 10)).unwrap(),
            Tensor::new(vec![5, 2], rnd(&mut rng, 10)).unwrap(),
        ];
        let inputs = vec![
            Tensor::new(vec![5, 2], rnd(&mut rng, 10)).unwrap(),
            Tensor::new(vec![5, 2], rnd(&mut rng, 10)).unwrap(),
            Tensor::new(vec![5, 2], rnd(&mut rng, 10)).unwrap(),
            Tensor::new(vec![5, 2], rnd(&mut rng, 10)).unwrap(),
        ];
        finite_diff_check(&g, loss, &mut params, &inputs, 20, 26, 1e-4);
    }

    #[test]
    fn shared_parameter_slot_accumulates_gradient() {
        // y = (w·x + b) + (w·x + b) with shared slots → dloss/dw = 2x·dloss/dy.
        let mut g = Graph::new();
        let x = g.input(&[1]);
        let w = g.param(&[1, 1]);
        let b = g.param(&[1]);
        let y1 = g.dense(x, w, b).unwrap();
        let w_again = g.param_slot(0, &[1, 1]).unwrap();
        let b_again = g.param_slot(1, &[1]).unwrap();
        let y2 = g.dense(x, w_again, b_again).unwrap();
        let y = g.add(y1, y2).unwrap();
        let t = g.input(&[1]);
        let loss = g.mse(y, t).unwrap();
        let params = [
            Tensor::new(vec![1, 1], vec![2.0]).unwrap(),
            Tensor::new(vec![1], vec![0.0]).unwrap(),
        ];
        let inputs = [Tensor::scalar(3.0), Tensor::scalar(0.0)];
        let mut ws = Workspace::default();
        g.forward(&params, &inputs, &mut ws).unwrap();
        // y = 12, loss = 144, dloss/dy = 24 → dw = 24·(2·3) = 144, db = 24·2 = 48.
        let mut grads = vec![Tensor::zeros(&[1, 1]), Tensor::zeros(&[1])];
        g.backward(loss, &params, &inputs, &mut ws, &mut grads).unwrap();
        assert!((grads[0].data()[0] - 144.0).abs() < 1e-12);
        assert!((grads[1].data()[0] - 48.0).abs() < 1e-12);
    }

    #[test]
    fn input_gradient_is_exposed() {
        let mut g = Graph::new();
        let x = g.input(&[1]);
        let w = g.param(&[1, 1]);
        let b = g.param(&[1]);
        let y = g.dense(x, w, b).unwrap();
        let t = g.input(&[1]);
        let loss = g.mse(y, t).unwrap();
        let params = [
            Tensor::new(vec![1, 1], vec![3.0]).unwrap(),
            Tensor::new(vec![1], vec![0.0]).unwrap(),
        ];
        let inputs = [Tensor::scalar(2.0), Tensor::scalar(0.0)];
        let mut ws = Workspace::default();
        g.forward(&params, &inputs, &mut ws).unwrap();
        let mut grads = vec![Tensor::zeros(&[1, 1]), Tensor::zeros(&[1])];
        g.backward(loss, &params, &inputs, &mut ws, &mut grads).unwrap();
        // y = 6, dloss/dy = 12, dy/dx = 3 → 36.
        assert!((g.grad(&ws, x).data()[0] - 36.0).abs() < 1e-12);
    }
}
