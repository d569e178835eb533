//! Layer vocabulary: linear, conv2d, relu, flatten, global average pool.
//!
//! Shapes below are per-sample; all runtime tensors carry a leading batch
//! dimension. Output shape is a total function of input shape and spec, so a
//! mismatched stack is rejected when the network is built, not at run time.

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Linear {
        in_dim: usize,
        out_dim: usize,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    Flatten,
    GlobalAvgPool,
}

impl LayerSpec {
    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Linear { in_dim, out_dim } => {
                if input != [in_dim] {
                    return Err(Error::msg(format!(
                        "linear({in_dim}->{out_dim}) expects input [{in_dim}], got {input:?}"
                    )));
                }
                Ok(vec![out_dim])
            }
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                if kernel == 0 || stride == 0 || in_ch == 0 || out_ch == 0 {
                    return Err(Error::msg("conv2d: zero kernel/stride/channels".to_string()));
                }
                let [c, h, w] = *input else {
                    return Err(Error::msg(format!("conv2d expects [C,H,W] input, got {input:?}")));
                };
                if c != in_ch {
                    return Err(Error::msg(format!(
                        "conv2d expects {in_ch} input channels, got {c}"
                    )));
                }
                let h_p = h + 2 * padding;
                let w_p = w + 2 * padding;
                if h_p < kernel || w_p < kernel {
                    return Err(Error::msg(format!(
                        "conv2d kernel {kernel} larger than padded input {h_p}x{w_p}"
                    )));
                }
                let oh = (h_p - kernel) / stride + 1;
                let ow = (w_p - kernel) / stride + 1;
                Ok(vec![out_ch, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => {
                if input.is_empty() {
                    return Err(Error::msg("flatten expects rank >= 1 input".to_string()));
                }
                Ok(vec![input.iter().product()])
            }
            LayerSpec::GlobalAvgPool => {
                let [c, _, _] = *input else {
                    return Err(Error::msg(format!(
                        "global avg pool expects [C,H,W] input, got {input:?}"
                    )));
                };
                Ok(vec![c])
            }
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Linear { .. } | LayerSpec::Conv2d { .. })
    }

    /// (fan_in, fan_out) for init scaling; None for parameterless layers.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Linear { in_dim, out_dim } => Some((in_dim, out_dim)),
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some((in_ch * kernel * kernel, out_ch * kernel * kernel)),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::GlobalAvgPool => "avgpool",
        }
    }
}

/// A layer instance: spec plus parameters (weight/bias for linear and conv).
#[derive(Debug, Clone)]
pub struct Layer<T: Scalar> {
    pub spec: LayerSpec,
    pub weight: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> Layer<T> {
    pub fn forward(&self, x: &Tensor<T>, sample_in: &[usize], sample_out: &[usize]) -> Tensor<T> {
        let n = x.shape()[0];
        match self.spec {
            LayerSpec::Linear { in_dim, out_dim } => {
                let w = self.weight.as_ref().unwrap(); // [out, in]
                let b = self.bias.as_ref().unwrap(); // [out]
                let mut y = matmul_a_bt(x.data(), w.data(), n, in_dim, out_dim);
                for row in y.chunks_mut(out_dim) {
                    for (v, &bv) in row.iter_mut().zip(b.data()) {
                        *v += bv;
                    }
                }
                Tensor::new(vec![n, out_dim], y)
            }
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                let (h, w_in) = (sample_in[1], sample_in[2]);
                let (oh, ow) = (sample_out[1], sample_out[2]);
                let wt = self.weight.as_ref().unwrap(); // [OC, C*K*K]
                let b = self.bias.as_ref().unwrap();
                let ckk = in_ch * kernel * kernel;
                let ohw = oh * ow;
                let mut out = vec![T::zero(); n * out_ch * ohw];
                let mut cols = vec![T::zero(); ckk * ohw];
                for s in 0..n {
                    let xs = &x.data()[s * in_ch * h * w_in..(s + 1) * in_ch * h * w_in];
                    im2col(xs, in_ch, h, w_in, kernel, stride, padding, oh, ow, &mut cols);
                    let y = matmul(wt.data(), &cols, out_ch, ckk, ohw);
                    let dst = &mut out[s * out_ch * ohw..(s + 1) * out_ch * ohw];
                    dst.copy_from_slice(&y);
                    for (c, row) in dst.chunks_mut(ohw).enumerate() {
                        let bv = b.data()[c];
                        row.iter_mut().for_each(|v| *v += bv);
                    }
                }
                Tensor::new(vec![n, out_ch, oh, ow], out)
            }
            LayerSpec::Relu => {
                let data = x.data().iter().map(|&v| v.max(T::zero())).collect();
                Tensor::new(x.shape().to_vec(), data)
            }
            LayerSpec::Flatten => {
                let flat: usize = sample_out[0];
                x.reshape(vec![n, flat])
            }
            LayerSpec::GlobalAvgPool => {
                let (c, h, w) = (sample_in[0], sample_in[1], sample_in[2]);
                let hw = h * w;
                let inv = T::c(1.0 / hw as f64);
                let mut out = vec![T::zero(); n * c];
                for s in 0..n {
                    for ci in 0..c {
                        let base = (s * c + ci) * hw;
                        let mut acc = T::zero();
                        for &v in &x.data()[base..base + hw] {
                            acc += v;
                        }
                        out[s * c + ci] = acc * inv;
                    }
                }
                Tensor::new(vec![n, c], out)
            }
        }
    }

    /// Backward pass: accumulates parameter gradients into the grad slots and
    /// returns the gradient with respect to this layer's input.
    pub fn backward(
        &mut self,
        x_in: &Tensor<T>,
        dy: &Tensor<T>,
        sample_in: &[usize],
        sample_out: &[usize],
    ) -> Tensor<T> {
        let n = x_in.shape()[0];
        match self.spec {
            LayerSpec::Linear { in_dim, out_dim } => {
                // y = x W^T + b: dW = dy^T x, db = col-sum dy, dx = dy W
                let dw = matmul_at_b(dy.data(), x_in.data(), n, out_dim, in_dim);
                let mut db = vec![T::zero(); out_dim];
                for row in dy.data().chunks(out_dim) {
                    for (d, &g) in db.iter_mut().zip(row) {
                        *d += g;
                    }
                }
                let w = self.weight.as_mut().unwrap();
                let dx = matmul(dy.data(), w.data(), n, out_dim, in_dim);
                w.accumulate_grad(&dw);
                self.bias.as_mut().unwrap().accumulate_grad(&db);
                Tensor::new(vec![n, in_dim], dx)
            }
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                let (h, w_in) = (sample_in[1], sample_in[2]);
                let (oh, ow) = (sample_out[1], sample_out[2]);
                let ckk = in_ch * kernel * kernel;
                let ohw = oh * ow;
                let mut dw_acc = vec![T::zero(); out_ch * ckk];
                let mut db_acc = vec![T::zero(); out_ch];
                let mut dx = vec![T::zero(); n * in_ch * h * w_in];
                let mut cols = vec![T::zero(); ckk * ohw];
                let wt = self.weight.as_ref().unwrap().data().to_vec();
                for s in 0..n {
                    let xs = &x_in.data()[s * in_ch * h * w_in..(s + 1) * in_ch * h * w_in];
                    let dys = &dy.data()[s * out_ch * ohw..(s + 1) * out_ch * ohw];
                    im2col(xs, in_ch, h, w_in, kernel, stride, padding, oh, ow, &mut cols);
                    // dW += dy_s cols^T
                    let dws = matmul_a_bt(dys, &cols, out_ch, ohw, ckk);
                    for (a, b) in dw_acc.iter_mut().zip(&dws) {
                        *a += *b;
                    }
                    for (c, row) in dys.chunks(ohw).enumerate() {
                        let mut acc = T::zero();
                        for &g in row {
                            acc += g;
                        }
                        db_acc[c] += acc;
                    }
                    // dcols = W^T dy_s, then scatter back
                    let dcols = matmul_at_b(&wt, dys, out_ch, ckk, ohw);
                    let dxs = &mut dx[s * in_ch * h * w_in..(s + 1) * in_ch * h * w_in];
                    col2im(&dcols, in_ch, h, w_in, kernel, stride, padding, oh, ow, dxs);
                }
                self.weight.as_mut().unwrap().accumulate_grad(&dw_acc);
                self.bias.as_mut().unwrap().accumulate_grad(&db_acc);
                Tensor::new(vec![n, in_ch, h, w_in], dx)
            }
            LayerSpec::Relu => {
                let data = x_in
                    .data()
                    .iter()
                    .zip(dy.data())
                    .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                Tensor::new(x_in.shape().to_vec(), data)
            }
            LayerSpec::Flatten => dy.reshape(x_in.shape().to_vec()),
            LayerSpec::GlobalAvgPool => {
                let (c, h, w) = (sample_in[0], sample_in[1], sample_in[2]);
                let hw = h * w;
                let inv = T::c(1.0 / hw as f64);
                let mut dx = vec![T::zero(); n * c * hw];
                for s in 0..n {
                    for ci in 0..c {
                        let g = dy.data()[s * c + ci] * inv;
                        let base = (s * c + ci) * hw;
                        dx[base..base + hw].iter_mut().for_each(|v| *v = g);
                    }
                }
                Tensor::new(vec![n, c, h, w], dx)
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_ref().map_or(0, Tensor::len) + self.bias.as_ref().map_or(0, Tensor::len)
    }
}

#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cols: &mut [T],
) {
    debug_assert_eq!(cols.len(), c * k * k * oh * ow);
    let ohw = oh * ow;
    for ci in 0..c {
        let x_ch = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * ohw..((ci * k + ky) * k + kx + 1) * ohw];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src_row = &x_ch[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    dcols: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    dx: &mut [T],
) {
    let ohw = oh * ow;
    for ci in 0..c {
        let dx_ch = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &dcols[((ci * k + ky) * k + kx) * ohw..((ci * k + ky) * k + kx + 1) * ohw];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut dx_ch[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &g) in row[oy * ow..(oy + 1) * ow].iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
}
