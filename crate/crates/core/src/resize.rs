//! Separable bicubic resampling compatible with MATLAB's `imresize`:
//! cubic convolution with `a = -0.5`, pixel-center alignment, edge
//! replication, and (when shrinking with antialiasing) a kernel stretched by
//! the inverse scale.

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Cubic convolution kernel with `a = -0.5`.
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    let x2 = x * x;
    let x3 = x2 * x;
    if x <= 1.0 {
        1.5 * x3 - 2.5 * x2 + 1.0
    } else if x < 2.0 {
        -0.5 * x3 + 2.5 * x2 - 4.0 * x + 2.0
    } else {
        0.0
    }
}

/// Normalized taps for one output sample.
#[derive(Clone, Debug)]
pub struct Contribution {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Taps of every output sample when resizing `in_len` samples to `out_len`
/// at `scale`.
pub fn contributions(in_len: usize, out_len: usize, scale: f64, antialias: bool) -> Vec<Contribution> {
    let shrink = antialias && scale < 1.0;
    let width = if shrink { 4.0 / scale } else { 4.0 };
    let taps = width.ceil() as usize + 2;
    let last = in_len as isize - 1;
    (0..out_len)
        .map(|i| {
            let x = (i as f64 + 0.5) / scale - 0.5;
            let left = (x - width / 2.0).floor() as isize;
            let mut indices = Vec::with_capacity(taps);
            let mut weights = Vec::with_capacity(taps);
            for t in 0..taps as isize {
                let j = left + t;
                let d = x - j as f64;
                let w = if shrink {
                    scale * cubic_kernel(scale * d)
                } else {
                    cubic_kernel(d)
                };
                indices.push(j.clamp(0, last) as usize);
                weights.push(w);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Contribution { indices, weights }
        })
        .collect()
}

/// Resizes every plane of `img` by `scale`; output dims are
/// `ceil(h * scale) x ceil(w * scale)`.
pub fn bicubic_resize(img: &Tensor, scale: f64, antialias: bool) -> Result<Tensor> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::range(format!("scale {scale} must be positive")));
    }
    let s = img.shape();
    let oh = (s.h as f64 * scale - 1e-9).ceil() as usize;
    let ow = (s.w as f64 * scale - 1e-9).ceil() as usize;
    if oh == 0 || ow == 0 {
        return Err(Error::range(format!("scale {scale} gives an empty image")));
    }
    resize_with(img, oh, ow, scale, scale, antialias)
}

/// Resizes to exactly `oh x ow`, with per-axis scale `out / in`.
pub fn resize_to(img: &Tensor, oh: usize, ow: usize, antialias: bool) -> Result<Tensor> {
    if oh == 0 || ow == 0 {
        return Err(Error::range("target dimensions must be positive"));
    }
    let s = img.shape();
    resize_with(
        img,
        oh,
        ow,
        oh as f64 / s.h as f64,
        ow as f64 / s.w as f64,
        antialias,
    )
}

fn resize_with(img: &Tensor, oh: usize, ow: usize, sy: f64, sx: f64, antialias: bool) -> Result<Tensor> {
    let s = img.shape();
    let rows = contributions(s.h, oh, sy, antialias);
    let cols = contributions(s.w, ow, sx, antialias);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let mut tmp = vec![0.0f64; oh * s.w];
    for n in 0..s.n {
        for c in 0..s.c {
            let src = img.plane(n, c);
            // height first
            for (y, con) in rows.iter().enumerate() {
                for x in 0..s.w {
                    tmp[y * s.w + x] = con
                        .indices
                        .iter()
                        .zip(&con.weights)
                        .map(|(&j, &w)| w * src[j * s.w + x] as f64)
                        .sum();
                }
            }
            let dst = out.plane_mut(n, c);
            for y in 0..oh {
                let row = &tmp[y * s.w..(y + 1) * s.w];
                for (x, con) in cols.iter().enumerate() {
                    dst[y * ow + x] = con
                        .indices
                        .iter()
                        .zip(&con.weights)
                        .map(|(&j, &w)| w * row[j])
                        .sum::<f64>() as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Crops the bottom and right edges so both dims are multiples of `scale`.
pub fn modcrop(img: &Tensor, scale: usize) -> Result<Tensor> {
    let s = img.shape();
    let (h, w) = (s.h - s.h % scale, s.w - s.w % scale);
    if scale == 0 || h == 0 || w == 0 {
        return Err(Error::range(format!("cannot crop {}x{} to a multiple of {scale}", s.h, s.w)));
    }
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, h, w));
    for n in 0..s.n {
        for c in 0..s.c {
            let src = img.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..h {
                dst[y * w..(y + 1) * w].copy_from_slice(&src[y * s.w..y * s.w + w]);
            }
        }
    }
    Ok(out)
}

/// Low-resolution input for `hr`: crop to a multiple of `scale`, then
/// antialiased bicubic downscaling by `1 / scale`.
pub fn degrade(hr: &Tensor, scale: usize) -> Result<Tensor> {
    let cropped = modcrop(hr, scale)?;
    bicubic_resize(&cropped, 1.0 / scale as f64, true)
}
