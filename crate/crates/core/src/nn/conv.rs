//! 2D cross-correlation over single-channel images.

use rayon::prelude::*;

use super::Tensor;
use crate::error::{Error, Result};

fn out_extent(input: usize, kernel: usize, padding: usize, stride: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if kernel > padded {
        return Err(Error::Shape(format!(
            "kernel extent {kernel} exceeds padded input {padded}"
        )));
    }
    let span = padded - kernel;
    if span % stride != 0 {
        return Err(Error::Shape(format!(
            "non-integral output extent: ({input} + 2·{padding} − {kernel}) / {stride}"
        )));
    }
    Ok(span / stride + 1)
}

/// Cross-correlate `input: [N,1,H,W]` with `kernels: [F,1,kh,kw]`,
/// producing `[N,F,H',W']`.
pub fn conv2d(input: &Tensor, kernels: &Tensor, padding: usize, stride: usize) -> Result<Tensor> {
    if stride == 0 {
        return Err(Error::Config("conv2d stride must be ≥ 1".into()));
    }
    let [n, ci, h, w] = shape4(input, "conv2d input")?;
    let [f, ck, kh, kw] = shape4(kernels, "conv2d kernels")?;
    if ci != 1 || ck != 1 {
        return Err(Error::Shape("conv2d expects single-channel input and kernels".into()));
    }
    let oh = out_extent(h, kh, padding, stride)?;
    let ow = out_extent(w, kw, padding, stride)?;
    let mut out = Tensor::zeros(&[n, f, oh, ow])?;
    let xd = input.data();
    let kd = kernels.data();
    let per_image = f * oh * ow;
    let fill = |(ni, chunk): (usize, &mut [f64])| {
        let img = &xd[ni * h * w..(ni + 1) * h * w];
        for fi in 0..f {
            let ker = &kd[fi * kh * kw..(fi + 1) * kh * kw];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let x = (ox * stride + kx) as isize - padding as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            acc += img[y as usize * w + x as usize] * ker[ky * kw + kx];
                        }
                    }
                    chunk[(fi * oh + oy) * ow + ox] = acc;
                }
            }
        }
    };
    if n >= 4 {
        out.data_mut().par_chunks_mut(per_image).enumerate().for_each(fill);
    } else {
        out.data_mut().chunks_mut(per_image).enumerate().for_each(fill);
    }
    Ok(out)
}

/// Gradients of [`conv2d`] w.r.t. the input and the kernels.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    padding: usize,
    stride: usize,
) -> Result<(Tensor, Tensor)> {
    let [n, _, h, w] = shape4(input, "conv2d input")?;
    let [f, _, kh, kw] = shape4(kernels, "conv2d kernels")?;
    let [gn, gf, oh, ow] = shape4(grad_out, "conv2d grad")?;
    if gn != n || gf != f {
        return Err(Error::Shape("conv2d_backward: gradient shape mismatch".into()));
    }
    let xd = input.data();
    let kd = kernels.data();
    let gd = grad_out.data();

    let mut grad_input = Tensor::zeros(&[n, 1, h, w])?;
    let gi_fill = |(ni, gin): (usize, &mut [f64])| {
        let gout = &gd[ni * f * oh * ow..(ni + 1) * f * oh * ow];
        for fi in 0..f {
            let ker = &kd[fi * kh * kw..(fi + 1) * kh * kw];
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gout[(fi * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    for ky in 0..kh {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let x = (ox * stride + kx) as isize - padding as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            gin[y as usize * w + x as usize] += g * ker[ky * kw + kx];
                        }
                    }
                }
            }
        }
    };
    if n >= 4 {
        grad_input.data_mut().par_chunks_mut(h * w).enumerate().for_each(gi_fill);
    } else {
        grad_input.data_mut().chunks_mut(h * w).enumerate().for_each(gi_fill);
    }

    let mut grad_kernels = Tensor::zeros(&[f, 1, kh, kw])?;
    let gk = grad_kernels.data_mut();
    for ni in 0..n {
        let img = &xd[ni * h * w..(ni + 1) * h * w];
        let gout = &gd[ni * f * oh * ow..(ni + 1) * f * oh * ow];
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gout[(fi * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    for ky in 0..kh {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let x = (ox * stride + kx) as isize - padding as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            gk[fi * kh * kw + ky * kw + kx] += g * img[y as usize * w + x as usize];
                        }
                    }
                }
            }
        }
    }
    Ok((grad_input, grad_kernels))
}

fn shape4(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    match t.shape() {
        [a, b, c, d] => Ok([*a, *b, *c, *d]),
        s => Err(Error::Shape(format!("{what} must be 4-axis, got {s:?}"))),
    }
}
