//! Forward and backward primitives for the 1-D CNN. Feature maps are flat
//! `[channel][time]` buffers; the time axis is innermost so the hot loops
//! vectorize.

use super::{ConvLayer, DenseLayer};

/// Valid overlap of `out[t] += w * x[t + shift]` for t in [0, t_len):
/// returns (out_start, x_start, len).
fn overlap(t_len: usize, shift: isize) -> (usize, usize, usize) {
    if shift >= 0 {
        let s = shift as usize;
        (0, s, t_len - s)
    } else {
        let s = (-shift) as usize;
        (s, 0, t_len - s)
    }
}

/// Same-length conv1d, stride 1, zero padding of kernel/2 per side.
pub(crate) fn conv_forward(layer: &ConvLayer, x: &[f64], t_len: usize) -> Vec<f64> {
    let pad = (layer.kernel / 2) as isize;
    let mut out = vec![0.0f64; layer.out_ch * t_len];
    for oc in 0..layer.out_ch {
        let orow = &mut out[oc * t_len..(oc + 1) * t_len];
        orow.fill(layer.bias[oc]);
        for ic in 0..layer.in_ch {
            let xrow = &x[ic * t_len..(ic + 1) * t_len];
            let wbase = (oc * layer.in_ch + ic) * layer.kernel;
            for k in 0..layer.kernel {
                let w = layer.weights[wbase + k];
                let (o0, x0, n) = overlap(t_len, k as isize - pad);
                let os = &mut orow[o0..o0 + n];
                let xs = &xrow[x0..x0 + n];
                for i in 0..n {
                    os[i] += w * xs[i];
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients into `dw`/`db` and returns the input
/// gradient.
pub(crate) fn conv_backward(
    layer: &ConvLayer,
    x: &[f64],
    g: &[f64],
    t_len: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let pad = (layer.kernel / 2) as isize;
    let mut dx = vec![0.0f64; layer.in_ch * t_len];
    for oc in 0..layer.out_ch {
        let grow = &g[oc * t_len..(oc + 1) * t_len];
        db[oc] += grow.iter().sum::<f64>();
        for ic in 0..layer.in_ch {
            let xrow = &x[ic * t_len..(ic + 1) * t_len];
            let dxrow = &mut dx[ic * t_len..(ic + 1) * t_len];
            let wbase = (oc * layer.in_ch + ic) * layer.kernel;
            for k in 0..layer.kernel {
                let (o0, x0, n) = overlap(t_len, k as isize - pad);
                let gs = &grow[o0..o0 + n];
                let xs = &xrow[x0..x0 + n];
                let mut dot = 0.0;
                for i in 0..n {
                    dot += gs[i] * xs[i];
                }
                dw[wbase + k] += dot;

                let w = layer.weights[wbase + k];
                let dxs = &mut dxrow[x0..x0 + n];
                for i in 0..n {
                    dxs[i] += w * gs[i];
                }
            }
        }
    }
    dx
}

/// Max pooling of width 2; ties take the earlier sample. Returns the pooled
/// map and the chosen offsets (0 or 1) for the backward pass.
pub(crate) fn maxpool2_forward(x: &[f64], ch: usize, t_in: usize) -> (Vec<f64>, Vec<u8>) {
    debug_assert_eq!(t_in % 2, 0);
    let t_out = t_in / 2;
    let mut out = vec![0.0f64; ch * t_out];
    let mut idx = vec![0u8; ch * t_out];
    for c in 0..ch {
        let xrow = &x[c * t_in..(c + 1) * t_in];
        for t in 0..t_out {
            let (a, b) = (xrow[2 * t], xrow[2 * t + 1]);
            if b > a {
                out[c * t_out + t] = b;
                idx[c * t_out + t] = 1;
            } else {
                out[c * t_out + t] = a;
            }
        }
    }
    (out, idx)
}

pub(crate) fn maxpool2_backward(g: &[f64], idx: &[u8], ch: usize, t_out: usize) -> Vec<f64> {
    let t_in = 2 * t_out;
    let mut dx = vec![0.0f64; ch * t_in];
    for c in 0..ch {
        for t in 0..t_out {
            let j = c * t_out + t;
            dx[c * t_in + 2 * t + idx[j] as usize] = g[j];
        }
    }
    dx
}

pub(crate) fn global_avg_pool(x: &[f64], ch: usize, t_len: usize) -> Vec<f64> {
    (0..ch)
        .map(|c| x[c * t_len..(c + 1) * t_len].iter().sum::<f64>() / t_len as f64)
        .collect()
}

pub(crate) fn global_avg_pool_backward(g: &[f64], ch: usize, t_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0f64; ch * t_len];
    for c in 0..ch {
        let v = g[c] / t_len as f64;
        dx[c * t_len..(c + 1) * t_len].fill(v);
    }
    dx
}

pub(crate) fn dense_forward(layer: &DenseLayer, x: &[f64]) -> Vec<f64> {
    (0..layer.out_dim)
        .map(|o| {
            let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            layer.bias[o] + wrow.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

pub(crate) fn dense_backward(
    layer: &DenseLayer,
    x: &[f64],
    g: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0f64; layer.in_dim];
    for o in 0..layer.out_dim {
        db[o] += g[o];
        let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        let dwrow = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
        let go = g[o];
        for i in 0..layer.in_dim {
            dwrow[i] += go * x[i];
            dx[i] += wrow[i] * go;
        }
    }
    dx
}

pub(crate) fn relu_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries where the post-activation value is not positive.
pub(crate) fn relu_backward_inplace(g: &mut [f64], post: &[f64]) {
    for (gv, &p) in g.iter_mut().zip(post) {
        if p <= 0.0 {
            *gv = 0.0;
        }
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::MIN, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}
