//! Image quality on the luminance channel: BT.601 Y, PSNR, SSIM.

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Studio-swing BT.601 luma of an RGB tensor in `[0, 1]`.
pub fn rgb_to_y(img: &Tensor) -> Result<Tensor> {
    let s = img.shape();
    if s.c != 3 {
        return Err(Error::Shape(format!("luma needs 3 channels, got {}", s.c)));
    }
    let mut out = Tensor::zeros(Shape::new(s.n, 1, s.h, s.w));
    for n in 0..s.n {
        let (r, g, b) = (img.plane(n, 0), img.plane(n, 1), img.plane(n, 2));
        for (k, y) in out.plane_mut(n, 0).iter_mut().enumerate() {
            *y = (65.738 * r[k] + 129.057 * g[k] + 25.064 * b[k]) / 255.0 + 16.0 / 255.0;
        }
    }
    Ok(out)
}

fn check_pair(a: &Tensor, b: &Tensor, border: usize) -> Result<Shape> {
    let s = a.shape();
    if s != b.shape() {
        return Err(Error::Shape(format!("cannot compare {} with {}", s, b.shape())));
    }
    if 2 * border >= s.h || 2 * border >= s.w {
        return Err(Error::Range(format!(
            "border {border} leaves nothing of a {}x{} image",
            s.h, s.w
        )));
    }
    Ok(s)
}

/// Mean squared error after cropping `border` pixels from every side.
pub fn mse(a: &Tensor, b: &Tensor, border: usize) -> Result<f64> {
    let s = check_pair(a, b, border)?;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            let (pa, pb) = (a.plane(n, c), b.plane(n, c));
            for y in border..s.h - border {
                for x in border..s.w - border {
                    let d = pa[y * s.w + x] as f64 - pb[y * s.w + x] as f64;
                    sum += d * d;
                    count += 1;
                }
            }
        }
    }
    Ok(sum / count as f64)
}

/// PSNR in dB for data range 1.0; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Tensor, b: &Tensor, border: usize) -> Result<f64> {
    let e = mse(a, b, border)?;
    Ok(if e == 0.0 { f64::INFINITY } else { -10.0 * e.log10() })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Separable "valid" filtering of an `h x w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|t| k[t] * src[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|t| k[t] * tmp[(y + t) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of two single-channel images in `[0, 1]` over every valid
/// 11x11 Gaussian window after cropping `border` pixels.
pub fn ssim(a: &Tensor, b: &Tensor, border: usize) -> Result<f64> {
    let s = check_pair(a, b, border)?;
    if s.n != 1 || s.c != 1 {
        return Err(Error::Shape(format!("ssim needs one channel, got {s}")));
    }
    let (h, w) = (s.h - 2 * border, s.w - 2 * border);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Range(format!(
            "{h}x{w} crop is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let crop = |t: &Tensor| -> Vec<f64> {
        let p = t.plane(0, 0);
        (border..s.h - border)
            .flat_map(|y| (border..s.w - border).map(move |x| p[y * s.w + x] as f64))
            .collect()
    };
    let (x, y) = (crop(a), crop(b));
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let k = gaussian_window();
    let mu_x = filter_valid(&x, h, w, &k);
    let mu_y = filter_valid(&y, h, w, &k);
    let e_xx = filter_valid(&xx, h, w, &k);
    let e_yy = filter_valid(&yy, h, w, &k);
    let e_xy = filter_valid(&xy, h, w, &k);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// Y-channel PSNR and SSIM of an RGB pair, ignoring `border` pixels.
pub fn evaluate_y(sr: &Tensor, hr: &Tensor, border: usize) -> Result<(f64, f64)> {
    let (a, b) = (rgb_to_y(sr)?, rgb_to_y(hr)?);
    Ok((psnr(&a, &b, border)?, ssim(&a, &b, border)?))
}

/// Rounds every value to the nearest 8-bit level, as saving to an 8-bit
/// file would.
pub fn quantize_8bit(t: &Tensor) -> Tensor {
    t.map(|v| crate::io::netpbm::quantize(v) as f32 / 255.0)
}
