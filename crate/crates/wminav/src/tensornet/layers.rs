//! Convolution, fully-connected, ReLU, and MSE primitives.
//!
//! The raw kernels here are shared between the standalone forward functions
//! and the recorded-graph engine in [`super::graph`].

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// 2D convolution layer: kernels of shape `(out_channels, in_channels, m1, m2)`
/// plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl ConvLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let ws = weights.shape();
        if ws.len() != 4 {
            return Err(Error::Shape(format!(
                "conv weights must be rank 4 (out, in, m1, m2), got {ws:?}"
            )));
        }
        if ws[2] < 1 || ws[3] < 1 {
            return Err(Error::Shape("conv kernel extents must be >= 1".into()));
        }
        if bias.shape() != [ws[0]] {
            return Err(Error::Shape(format!(
                "conv bias shape {:?} does not match {} output channels",
                bias.shape(),
                ws[0]
            )));
        }
        Ok(ConvLayer { weights, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weights.shape()[2], self.weights.shape()[3])
    }
}

/// Fully-connected layer: weights `(n_out, n_in)`, bias per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let ws = weights.shape();
        if ws.len() != 2 {
            return Err(Error::Shape(format!(
                "dense weights must be rank 2 (out, in), got {ws:?}"
            )));
        }
        if bias.shape() != [ws[0]] {
            return Err(Error::Shape(format!(
                "dense bias shape {:?} does not match {} outputs",
                bias.shape(),
                ws[0]
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[1]
    }
}

/// Output spatial extents of a valid (no padding) convolution.
pub(crate) fn conv_out_extents(
    in_shape: &[usize],
    w_shape: &[usize],
) -> Result<(usize, usize, usize)> {
    if in_shape.len() != 3 {
        return Err(Error::Shape(format!(
            "conv input must be rank 3 (channels, h, w), got {in_shape:?}"
        )));
    }
    let (ic, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oc, wic, kh, kw) = (w_shape[0], w_shape[1], w_shape[2], w_shape[3]);
    if ic != wic {
        return Err(Error::Shape(format!(
            "conv input has {ic} channels, kernel expects {wic}"
        )));
    }
    if h < kh || w < kw {
        return Err(Error::Shape(format!(
            "conv input {h}x{w} smaller than kernel {kh}x{kw}"
        )));
    }
    Ok((oc, h - kh + 1, w - kw + 1))
}

/// out[co, i, j] = b[co] + Σ_{ci,a,b} W[co,ci,a,b] · x[ci, i+a, j+b]
pub(crate) fn conv2d_raw(
    x: &[f64],
    (ic, h, w): (usize, usize, usize),
    weights: &[f64],
    (oc, _wic, kh, kw): (usize, usize, usize, usize),
    bias: &[f64],
    out: &mut [f64],
) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    for co in 0..oc {
        let w_co = &weights[co * ic * kh * kw..(co + 1) * ic * kh * kw];
        let out_co = &mut out[co * oh * ow..(co + 1) * oh * ow];
        out_co.fill(bias[co]);
        for ci in 0..ic {
            let x_ci = &x[ci * h * w..(ci + 1) * h * w];
            let w_ci = &w_co[ci * kh * kw..(ci + 1) * kh * kw];
            for i in 0..oh {
                for a in 0..kh {
                    let x_row = &x_ci[(i + a) * w..(i + a + 1) * w];
                    let w_row = &w_ci[a * kw..(a + 1) * kw];
                    let out_row = &mut out_co[i * ow..(i + 1) * ow];
                    for j in 0..ow {
                        let mut acc = 0.0;
                        for (xv, wv) in x_row[j..j + kw].iter().zip(w_row) {
                            acc += xv * wv;
                        }
                        out_row[j] += acc;
                    }
                }
            }
        }
    }
}

/// Accumulates input/weight/bias gradients of the valid convolution.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward_raw(
    x: &[f64],
    (ic, h, w): (usize, usize, usize),
    weights: &[f64],
    (oc, _wic, kh, kw): (usize, usize, usize, usize),
    d_out: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    for co in 0..oc {
        let d_co = &d_out[co * oh * ow..(co + 1) * oh * ow];
        db[co] += d_co.iter().sum::<f64>();
        for ci in 0..ic {
            let x_ci = &x[ci * h * w..(ci + 1) * h * w];
            let dx_ci = &mut dx[ci * h * w..(ci + 1) * h * w];
            let w_ci = &weights[(co * ic + ci) * kh * kw..(co * ic + ci + 1) * kh * kw];
            let dw_ci = &mut dw[(co * ic + ci) * kh * kw..(co * ic + ci + 1) * kh * kw];
            for i in 0..oh {
                let d_row = &d_co[i * ow..(i + 1) * ow];
                for a in 0..kh {
                    let x_row = &x_ci[(i + a) * w..(i + a + 1) * w];
                    let dx_row = &mut dx_ci[(i + a) * w..(i + a + 1) * w];
                    let w_row = &w_ci[a * kw..(a + 1) * kw];
                    let dw_row = &mut dw_ci[a * kw..(a + 1) * kw];
                    for b in 0..kw {
                        let wv = w_row[b];
                        let mut dwv = 0.0;
                        for j in 0..ow {
                            let g = d_row[j];
                            dx_row[j + b] += g * wv;
                            dwv += g * x_row[j + b];
                        }
                        dw_row[b] += dwv;
                    }
                }
            }
        }
    }
}

/// out[i] = b[i] + Σ_j W[i,j]·x[j]
pub(crate) fn dense_raw(x: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &weights[i * n_in..(i + 1) * n_in];
        let mut acc = bias[i];
        for (xv, wv) in x.iter().zip(row) {
            acc += xv * wv;
        }
        *o = acc;
    }
}

pub(crate) fn dense_backward_raw(
    x: &[f64],
    weights: &[f64],
    d_out: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    let n_in = x.len();
    for (i, &g) in d_out.iter().enumerate() {
        db[i] += g;
        let row = &weights[i * n_in..(i + 1) * n_in];
        let dw_row = &mut dw[i * n_in..(i + 1) * n_in];
        for j in 0..n_in {
            dx[j] += g * row[j];
            dw_row[j] += g * x[j];
        }
    }
}

/// Valid (no padding) cross-correlation of a rank-3 input `(channels, h, w)`.
pub fn conv2d_forward(input: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    let (oc, oh, ow) = conv_out_extents(input.shape(), layer.weights.shape())?;
    let mut out = vec![0.0; oc * oh * ow];
    let s = input.shape();
    let ws = layer.weights.shape();
    conv2d_raw(
        input.data(),
        (s[0], s[1], s[2]),
        layer.weights.data(),
        (ws[0], ws[1], ws[2], ws[3]),
        layer.bias.data(),
        &mut out,
    );
    Ok(Tensor::from_parts(vec![oc, oh, ow], out))
}

/// z_i = Σ_j ω_ij a_j + b_i over a flat input.
pub fn dense_forward(input: &Tensor, layer: &DenseLayer) -> Result<Tensor> {
    if input.numel() != layer.in_features() {
        return Err(Error::Shape(format!(
            "dense input has {} elements, layer expects {}",
            input.numel(),
            layer.in_features()
        )));
    }
    let mut out = vec![0.0; layer.out_features()];
    dense_raw(input.data(), layer.weights.data(), layer.bias.data(), &mut out);
    Ok(Tensor::from_parts(vec![layer.out_features()], out))
}

/// Elementwise max(0, x).
pub fn relu(input: &Tensor) -> Tensor {
    Tensor::from_parts(
        input.shape().to_vec(),
        input.data().iter().map(|&v| v.max(0.0)).collect(),
    )
}

/// Mean squared error: `(1/n) Σ ‖pred_i − target_i‖²` where `n` is the
/// leading extent (number of samples) and the norm runs over the remaining
/// axes of each sample.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "mse shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.numel() == 0 {
        return Err(Error::EmptyInput("mse over empty tensors".into()));
    }
    let n = pred.shape()[0] as f64;
    let ss: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(ss / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn conv_1x1_identity_kernel() {
        let input = Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let layer = ConvLayer::new(
            Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::new(vec![1], vec![0.0]).unwrap(),
        )
        .unwrap();
        let out = conv2d_forward(&input, &layer).unwrap();
        assert_eq!(out.shape(), &[1, 2, 3]);
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn conv_diagonal_kernel() {
        let input = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let layer = ConvLayer::new(
            Tensor::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::new(vec![1], vec![0.0]).unwrap(),
        )
        .unwrap();
        let out = conv2d_forward(&input, &layer).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[5.0]);
    }

    /// Independent nested-loop oracle over the Eq.-style index arithmetic.
    fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
        let (ic, h, ww) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (oc, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
        let (oh, ow) = (h - kh + 1, ww - kw + 1);
        let mut out = vec![0.0; oc * oh * ow];
        for co in 0..oc {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = b.data()[co];
                    for ci in 0..ic {
                        for a in 0..kh {
                            for bb in 0..kw {
                                let xv = x.data()[ci * h * ww + (i + a) * ww + (j + bb)];
                                let wv =
                                    w.data()[((co * ic + ci) * kh + a) * kw + bb];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[co * oh * ow + i * ow + j] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::new(vec![1, 3, 8], rand_vec(&mut rng, 24)).unwrap();
        let w = Tensor::new(vec![2, 1, 1, 3], rand_vec(&mut rng, 6)).unwrap();
        let b = Tensor::new(vec![2], rand_vec(&mut rng, 2)).unwrap();
        let layer = ConvLayer::new(w.clone(), b.clone()).unwrap();
        let out = conv2d_forward(&x, &layer).unwrap();
        let expect = conv_oracle(&x, &w, &b);
        for (a, e) in out.data().iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_linearity_with_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Tensor::new(vec![2, 4, 5], rand_vec(&mut rng, 40)).unwrap();
        let layer = ConvLayer::new(
            Tensor::new(vec![3, 2, 2, 2], rand_vec(&mut rng, 24)).unwrap(),
            Tensor::zeros(&[3]),
        )
        .unwrap();
        let k = 3.7;
        let xs = Tensor::new(vec![2, 4, 5], x.data().iter().map(|v| k * v).collect()).unwrap();
        let a = conv2d_forward(&xs, &layer).unwrap();
        let b = conv2d_forward(&x, &layer).unwrap();
        for (av, bv) in a.data().iter().zip(b.data()) {
            assert!((av - k * bv).abs() < 1e-10);
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::zeros(&[2, 3, 3]);
        let layer = ConvLayer::new(Tensor::zeros(&[1, 1, 2, 2]), Tensor::zeros(&[1])).unwrap();
        assert!(conv2d_forward(&x, &layer).is_err());
    }

    #[test]
    fn dense_identity() {
        let x = Tensor::new(vec![3], vec![1.0, -2.0, 3.0]).unwrap();
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let layer =
            DenseLayer::new(Tensor::new(vec![3, 3], w).unwrap(), Tensor::zeros(&[3])).unwrap();
        assert_eq!(dense_forward(&x, &layer).unwrap().data(), x.data());
    }

    #[test]
    fn dense_sum_plus_bias() {
        let x = Tensor::new(vec![2], vec![2.0, 3.0]).unwrap();
        let layer = DenseLayer::new(
            Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(),
            Tensor::new(vec![1], vec![1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(dense_forward(&x, &layer).unwrap().data(), &[6.0]);
    }

    #[test]
    fn dense_matches_matvec_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Tensor::new(vec![32], rand_vec(&mut rng, 32)).unwrap();
        let w = Tensor::new(vec![5, 32], rand_vec(&mut rng, 160)).unwrap();
        let b = Tensor::new(vec![5], rand_vec(&mut rng, 5)).unwrap();
        let layer = DenseLayer::new(w.clone(), b.clone()).unwrap();
        let out = dense_forward(&x, &layer).unwrap();
        for i in 0..5 {
            let mut acc = b.data()[i];
            for j in 0..32 {
                acc += w.data()[i * 32 + j] * x.data()[j];
            }
            assert!((out.data()[i] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_rejects_length_mismatch() {
        let x = Tensor::zeros(&[4]);
        let layer = DenseLayer::new(Tensor::zeros(&[2, 3]), Tensor::zeros(&[2])).unwrap();
        assert!(dense_forward(&x, &layer).is_err());
    }

    #[test]
    fn relu_basic_and_idempotent() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::new(vec![4], vec![-3.0, -0.5, -1e9, -1e-9]).unwrap();
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let r = Tensor::new(vec![16], rand_vec(&mut rng, 16)).unwrap();
        assert_eq!(relu(&relu(&r)), relu(&r));
    }

    #[test]
    fn mse_values() {
        let p = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let t = Tensor::zeros(&[1, 2]);
        assert_eq!(mse(&p, &t).unwrap(), 2.0);
        assert_eq!(mse(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn mse_symmetry_and_batch_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = Tensor::new(vec![4, 3], rand_vec(&mut rng, 12)).unwrap();
        let t = Tensor::new(vec![4, 3], rand_vec(&mut rng, 12)).unwrap();
        assert_eq!(mse(&p, &t).unwrap(), mse(&t, &p).unwrap());
        let mut acc = 0.0;
        for i in 0..12 {
            let d = p.data()[i] - t.data()[i];
            acc += d * d;
        }
        assert!((mse(&p, &t).unwrap() - acc / 4.0).abs() < 1e-12);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let p = Tensor::zeros(&[2, 2]);
        let t = Tensor::zeros(&[4]);
        assert!(mse(&p, &t).is_err());
    }
}
