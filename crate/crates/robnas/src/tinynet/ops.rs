//! Forward and backward kernels: convolution, pooling, linear, ReLU, batch norm.
//!
//! All kernels are plain NCHW loops over `f64` slices. The inner loops run
//! along the width axis so they vectorize; shapes at desk scale are small
//! enough that no im2col buffer is worth the copies.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub n: usize,
    pub ci: usize,
    pub h: usize,
    pub w: usize,
    pub co: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvDims {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }
    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }
    pub fn weight_len(&self) -> usize {
        self.co * self.ci * self.k * self.k
    }
}

/// 2-D convolution, no bias.
pub fn conv2d(x: &[f64], weight: &[f64], d: &ConvDims) -> Vec<f64> {
    let (oh, ow) = (d.out_h(), d.out_w());
    let mut y = vec![0.0; d.n * d.co * oh * ow];
    for n in 0..d.n {
        let xn = &x[n * d.ci * d.h * d.w..];
        let yn = &mut y[n * d.co * oh * ow..(n + 1) * d.co * oh * ow];
        for co in 0..d.co {
            let yc = &mut yn[co * oh * ow..(co + 1) * oh * ow];
            for ci in 0..d.ci {
                let xc = &xn[ci * d.h * d.w..(ci + 1) * d.h * d.w];
                let wc = &weight[(co * d.ci + ci) * d.k * d.k..];
                for kh in 0..d.k {
                    for kw in 0..d.k {
                        let wv = wc[kh * d.k + kw];
                        if wv == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * d.stride + kh) as isize - d.pad as isize;
                            if iy < 0 || iy >= d.h as isize {
                                continue;
                            }
                            let xrow = &xc[iy as usize * d.w..(iy as usize + 1) * d.w];
                            let yrow = &mut yc[oy * ow..(oy + 1) * ow];
                            for ox in 0..ow {
                                let ix = (ox * d.stride + kw) as isize - d.pad as isize;
                                if ix >= 0 && ix < d.w as isize {
                                    yrow[ox] += wv * xrow[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Gradients of [`conv2d`] with respect to input and weight.
///
/// Either output may be skipped by passing `None` buffers; `dw` accumulates.
pub fn conv2d_backward(
    x: &[f64],
    weight: &[f64],
    dy: &[f64],
    d: &ConvDims,
    mut dx: Option<&mut [f64]>,
    mut dw: Option<&mut [f64]>,
) {
    let (oh, ow) = (d.out_h(), d.out_w());
    for n in 0..d.n {
        let xn = &x[n * d.ci * d.h * d.w..];
        let dyn_ = &dy[n * d.co * oh * ow..(n + 1) * d.co * oh * ow];
        for co in 0..d.co {
            let dyc = &dyn_[co * oh * ow..(co + 1) * oh * ow];
            for ci in 0..d.ci {
                let xc = &xn[ci * d.h * d.w..(ci + 1) * d.h * d.w];
                for kh in 0..d.k {
                    for kw in 0..d.k {
                        let widx = ((co * d.ci + ci) * d.k + kh) * d.k + kw;
                        let wv = weight[widx];
                        let mut wgrad = 0.0;
                        for oy in 0..oh {
                            let iy = (oy * d.stride + kh) as isize - d.pad as isize;
                            if iy < 0 || iy >= d.h as isize {
                                continue;
                            }
                            let dyrow = &dyc[oy * ow..(oy + 1) * ow];
                            let x_base = iy as usize * d.w;
                            for ox in 0..ow {
                                let ix = (ox * d.stride + kw) as isize - d.pad as isize;
                                if ix < 0 || ix >= d.w as isize {
                                    continue;
                                }
                                let g = dyrow[ox];
                                wgrad += g * xc[x_base + ix as usize];
                                if let Some(dx) = dx.as_deref_mut() {
                                    dx[n * d.ci * d.h * d.w
                                        + ci * d.h * d.w
                                        + x_base
                                        + ix as usize] += wv * g;
                                }
                            }
                        }
                        if let Some(dw) = dw.as_deref_mut() {
                            dw[widx] += wgrad;
                        }
                    }
                }
            }
        }
    }
}

/// Average pooling with a fixed divisor `k*k` (zero padding counts).
pub fn avg_pool(x: &[f64], n: usize, c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Vec<f64> {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let inv = 1.0 / (k * k) as f64;
    let mut y = vec![0.0; n * c * oh * ow];
    for img in 0..n * c {
        let xc = &x[img * h * w..(img + 1) * h * w];
        let yc = &mut y[img * oh * ow..(img + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for kh in 0..k {
                    let iy = (oy * stride + kh) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kw in 0..k {
                        let ix = (ox * stride + kw) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            acc += xc[iy as usize * w + ix as usize];
                        }
                    }
                }
                yc[oy * ow + ox] = acc * inv;
            }
        }
    }
    y
}

pub fn avg_pool_backward(dy: &[f64], n: usize, c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Vec<f64> {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let inv = 1.0 / (k * k) as f64;
    let mut dx = vec![0.0; n * c * h * w];
    for img in 0..n * c {
        let dyc = &dy[img * oh * ow..(img + 1) * oh * ow];
        let dxc = &mut dx[img * h * w..(img + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let g = dyc[oy * ow + ox] * inv;
                for kh in 0..k {
                    let iy = (oy * stride + kh) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kw in 0..k {
                        let ix = (ox * stride + kw) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dxc[iy as usize * w + ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
    dx
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// `dx = dy * 1[x > 0]`, accumulated into `dx`.
pub fn relu_backward_into(x: &[f64], dy: &[f64], dx: &mut [f64]) {
    for i in 0..x.len() {
        if x[i] > 0.0 {
            dx[i] += dy[i];
        }
    }
}

/// Global average pooling: NCHW -> NC.
pub fn global_avg_pool(x: &[f64], n: usize, c: usize, hw: usize) -> Vec<f64> {
    let inv = 1.0 / hw as f64;
    let mut y = vec![0.0; n * c];
    for i in 0..n * c {
        y[i] = x[i * hw..(i + 1) * hw].iter().sum::<f64>() * inv;
    }
    y
}

pub fn global_avg_pool_backward(dy: &[f64], n: usize, c: usize, hw: usize) -> Vec<f64> {
    let inv = 1.0 / hw as f64;
    let mut dx = vec![0.0; n * c * hw];
    for i in 0..n * c {
        let g = dy[i] * inv;
        for v in dx[i * hw..(i + 1) * hw].iter_mut() {
            *v = g;
        }
    }
    dx
}

/// `y = x W^T + b` with `W` of shape `[co, ci]`.
pub fn linear(x: &[f64], w: &[f64], b: &[f64], n: usize, ci: usize, co: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * co];
    for i in 0..n {
        let xi = &x[i * ci..(i + 1) * ci];
        for o in 0..co {
            let wo = &w[o * ci..(o + 1) * ci];
            y[i * co + o] = b[o] + xi.iter().zip(wo).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    y
}

pub fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    n: usize,
    ci: usize,
    co: usize,
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(dw) = dw {
        for o in 0..co {
            for i in 0..n {
                let g = dy[i * co + o];
                let xi = &x[i * ci..(i + 1) * ci];
                for (c, xv) in xi.iter().enumerate() {
                    dw[o * ci + c] += g * xv;
                }
            }
        }
    }
    if let Some(db) = db {
        for o in 0..co {
            db[o] += (0..n).map(|i| dy[i * co + o]).sum::<f64>();
        }
    }
    if let Some(dx) = dx {
        for i in 0..n {
            for o in 0..co {
                let g = dy[i * co + o];
                let wo = &w[o * ci..(o + 1) * ci];
                for c in 0..ci {
                    dx[i * ci + c] += g * wo[c];
                }
            }
        }
    }
}

/// Per-channel batch statistics cache for batch-norm backward.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

/// Training-mode batch norm over (N,H,W) per channel.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm_train(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    eps: f64,
    running_mean: &mut [f64],
    running_var: &mut [f64],
    momentum: f64,
) -> (Vec<f64>, BnCache) {
    let m = (n * hw) as f64;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; c];
    for ch in 0..c {
        let mut mean = 0.0;
        for i in 0..n {
            let base = (i * c + ch) * hw;
            mean += x[base..base + hw].iter().sum::<f64>();
        }
        mean /= m;
        let mut var = 0.0;
        for i in 0..n {
            let base = (i * c + ch) * hw;
            var += x[base..base + hw].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        var /= m;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[ch] = istd;
        running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mean;
        running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var;
        for i in 0..n {
            let base = (i * c + ch) * hw;
            for j in 0..hw {
                let xh = (x[base + j] - mean) * istd;
                xhat[base + j] = xh;
                y[base + j] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    (y, BnCache { xhat, inv_std })
}

/// Eval-mode batch norm using running statistics.
pub fn batch_norm_eval(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    eps: f64,
    running_mean: &[f64],
    running_var: &[f64],
) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for ch in 0..c {
        let istd = 1.0 / (running_var[ch] + eps).sqrt();
        let (g, b, mu) = (gamma[ch], beta[ch], running_mean[ch]);
        for i in 0..n {
            let base = (i * c + ch) * hw;
            for j in 0..hw {
                y[base + j] = g * (x[base + j] - mu) * istd + b;
            }
        }
    }
    y
}

/// Backward of training-mode batch norm. Returns `dx`; accumulates into
/// `dgamma`/`dbeta` when given.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm_train_backward(
    dy: &[f64],
    gamma: &[f64],
    cache: &BnCache,
    n: usize,
    c: usize,
    hw: usize,
    dgamma: Option<&mut [f64]>,
    dbeta: Option<&mut [f64]>,
) -> Vec<f64> {
    let m = (n * hw) as f64;
    let mut dx = vec![0.0; dy.len()];
    let mut dg_local = vec![0.0; c];
    let mut db_local = vec![0.0; c];
    for ch in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for i in 0..n {
            let base = (i * c + ch) * hw;
            for j in 0..hw {
                sum_dy += dy[base + j];
                sum_dy_xhat += dy[base + j] * cache.xhat[base + j];
            }
        }
        dg_local[ch] = sum_dy_xhat;
        db_local[ch] = sum_dy;
        let scale = gamma[ch] * cache.inv_std[ch];
        for i in 0..n {
            let base = (i * c + ch) * hw;
            for j in 0..hw {
                dx[base + j] = scale
                    * (dy[base + j] - sum_dy / m - cache.xhat[base + j] * sum_dy_xhat / m);
            }
        }
    }
    if let Some(dg) = dgamma {
        for ch in 0..c {
            dg[ch] += dg_local[ch];
        }
    }
    if let Some(db) = dbeta {
        for ch in 0..c {
            db[ch] += db_local[ch];
        }
    }
    dx
}

/// Backward of eval-mode batch norm with respect to the input only.
pub fn batch_norm_eval_backward_input(
    dy: &[f64],
    gamma: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    eps: f64,
    running_var: &[f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; dy.len()];
    for ch in 0..c {
        let scale = gamma[ch] / (running_var[ch] + eps).sqrt();
        for i in 0..n {
            let base = (i * c + ch) * hw;
            for j in 0..hw {
                dx[base + j] = dy[base + j] * scale;
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel() {
        // 1x1 conv with unit weight copies the input
        let d = ConvDims { n: 1, ci: 1, h: 3, w: 3, co: 1, k: 1, stride: 1, pad: 0 };
        let x: Vec<f64> = (0..9).map(|v| v as f64).collect();
        let y = conv2d(&x, &[1.0], &d);
        assert_eq!(y, x);
    }

    #[test]
    fn conv_known_3x3() {
        // single 3x3 kernel summing the neighbourhood, zero padding
        let d = ConvDims { n: 1, ci: 1, h: 2, w: 2, co: 1, k: 3, stride: 1, pad: 1 };
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = conv2d(&x, &[1.0; 9], &d);
        assert_eq!(y, vec![10.0, 10.0, 10.0, 10.0]);
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let d = ConvDims { n: 2, ci: 2, h: 5, w: 4, co: 3, k: 3, stride: 2, pad: 1 };
        let xs: Vec<f64> = (0..d.n * d.ci * d.h * d.w).map(|i| ((i * 37 % 17) as f64 - 8.0) / 7.0).collect();
        let ws: Vec<f64> = (0..d.weight_len()).map(|i| ((i * 29 % 13) as f64 - 6.0) / 11.0).collect();
        let y = conv2d(&xs, &ws, &d);
        // scalar objective: weighted sum of outputs
        let cot: Vec<f64> = (0..y.len()).map(|i| ((i % 5) as f64 - 2.0) / 3.0).collect();
        let mut dx = vec![0.0; xs.len()];
        let mut dw = vec![0.0; ws.len()];
        conv2d_backward(&xs, &ws, &cot, &d, Some(&mut dx), Some(&mut dw));
        let f = |xs: &[f64], ws: &[f64]| -> f64 {
            conv2d(xs, ws, &d).iter().zip(&cot).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in (0..xs.len()).step_by(7) {
            let mut xp = xs.clone();
            xp[i] += h;
            let mut xm = xs.clone();
            xm[i] -= h;
            let fd = (f(&xp, &ws) - f(&xm, &ws)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-6, "dx[{i}]: fd {fd} vs {dx:?}", dx = dx[i]);
        }
        for i in (0..ws.len()).step_by(5) {
            let mut wp = ws.clone();
            wp[i] += h;
            let mut wm = ws.clone();
            wm[i] -= h;
            let fd = (f(&xs, &wp) - f(&xs, &wm)) / (2.0 * h);
            assert!((fd - dw[i]).abs() < 1e-6, "dw[{i}]: fd {fd} vs {g}", g = dw[i]);
        }
    }

    #[test]
    fn avg_pool_constant_divisor() {
        // 3x3 pool, pad 1: corners see 4 values but divide by 9
        let x = vec![9.0; 4];
        let y = avg_pool(&x, 1, 1, 2, 2, 3, 1, 1);
        assert_eq!(y, vec![4.0; 4]);
    }

    #[test]
    fn bn_train_normalizes() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let mut rm = vec![0.0];
        let mut rv = vec![1.0];
        let (y, _) = batch_norm_train(&x, &[1.0], &[0.0], 4, 1, 1, 1e-5, &mut rm, &mut rv, 0.1);
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }
}
