//! Convolution through three interchangeable paths: a direct nested-loop
//! oracle, im2col lowering followed by a matrix multiply, and the same
//! lowering with rows skipped wherever the output mask is zero.
//!
//! Every path accumulates each output element in the same order (input
//! channel, then kernel row, then kernel column) starting from zero and adds
//! the bias last, so the lowered path reproduces the direct path bit for bit
//! when both run in full.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Rows handled by one GEMM task.
const ROW_CHUNK: usize = 64;
/// Rows that share one pass over the kernel matrix inside the micro-kernel.
const ROW_TILE: usize = 4;

/// How out-of-range input pixels are filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PadMode {
    #[default]
    Zeros,
    /// Clamp to the nearest edge pixel.
    Replicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub pad_mode: PadMode,
    pub has_bias: bool,
}

impl ConvSpec {
    /// 3x3, stride 1, padding 1, with bias.
    pub const fn same3x3(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: (3, 3),
            stride: 1,
            padding: 1,
            pad_mode: PadMode::Zeros,
            has_bias: true,
        }
    }

    /// 1x1 with bias.
    pub const fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: (1, 1),
            stride: 1,
            padding: 0,
            pad_mode: PadMode::Zeros,
            has_bias: true,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_channels,
            self.kernel.0,
            self.kernel.1,
        )
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let ph = h + 2 * self.padding;
        let pw = w + 2 * self.padding;
        if ph < kh || pw < kw {
            return Err(Error::shape(format!(
                "{kh}x{kw} kernel larger than padded {ph}x{pw} input"
            )));
        }
        Ok(((ph - kh) / self.stride + 1, (pw - kw) / self.stride + 1))
    }

    fn validate(&self) -> Result<()> {
        let (kh, kw) = self.kernel;
        if kh == 0 || kw == 0 {
            return Err(Error::shape(format!("empty {kh}x{kw} kernel")));
        }
        if self.stride == 0 {
            return Err(Error::shape("stride must be positive"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::shape("channel counts must be positive"));
        }
        Ok(())
    }

    fn check_operands(&self, f: &Tensor, w: &Tensor, b: Option<&[f32]>) -> Result<()> {
        self.validate()?;
        if f.channels() != self.in_channels {
            return Err(Error::shape(format!(
                "input has {} channels, conv expects {}",
                f.channels(),
                self.in_channels
            )));
        }
        if w.shape() != self.weight_shape() {
            return Err(Error::shape(format!(
                "weight shape {} does not match {}",
                w.shape(),
                self.weight_shape()
            )));
        }
        match (b, self.has_bias) {
            (Some(b), true) if b.len() == self.out_channels => Ok(()),
            (Some(b), true) => Err(Error::shape(format!(
                "bias has {} entries for {} output channels",
                b.len(),
                self.out_channels
            ))),
            (None, false) => Ok(()),
            (Some(_), false) => Err(Error::shape("bias supplied to a bias-free conv")),
            (None, true) => Err(Error::shape("conv expects a bias")),
        }
    }
}

/// Boolean map over output positions marking where computation is needed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support {
    h: usize,
    w: usize,
    bits: Vec<bool>,
}

impl Support {
    pub fn new(h: usize, w: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != h * w {
            return Err(Error::shape(format!(
                "{} support bits for a {h}x{w} map",
                bits.len()
            )));
        }
        Ok(Support { h, w, bits })
    }

    pub fn full(h: usize, w: usize) -> Self {
        Support {
            h,
            w,
            bits: vec![true; h * w],
        }
    }

    pub fn empty(h: usize, w: usize) -> Self {
        Support {
            h,
            w,
            bits: vec![false; h * w],
        }
    }

    /// Strict-positivity set of a row-major `h*w` mask.
    pub fn from_mask(h: usize, w: usize, mask: &[f32]) -> Result<Self> {
        Self::new(h, w, mask.iter().map(|&m| m > 0.0).collect())
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.w + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Positions in raster order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.w;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / w, k % w))
    }
}

/// Receptive-field matrix produced by [`im2col`]: one row per retained output
/// position, `in_channels * kh * kw` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LoweredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub row_index: Vec<(usize, usize)>,
}

impl LoweredMatrix {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Reference convolution: a plain nested loop over every output element.
pub fn direct_conv(f: &Tensor, w: &Tensor, b: Option<&[f32]>, spec: &ConvSpec) -> Result<Tensor> {
    spec.check_operands(f, w, b)?;
    let s = f.shape();
    let (oh, ow) = spec.output_size(s.h, s.w)?;
    let (kh, kw) = spec.kernel;
    let pad = spec.padding as isize;
    let mut out = Tensor::zeros(Shape::new(s.n, spec.out_channels, oh, ow));
    for n in 0..s.n {
        for co in 0..spec.out_channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = 0.0f32;
                    for ci in 0..spec.in_channels {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * spec.stride + ky) as isize - pad;
                                let ix = (x * spec.stride + kx) as isize - pad;
                                let v = match source(iy, ix, s.h, s.w, spec.pad_mode) {
                                    Some((sy, sx)) => f.at(n, ci, sy, sx),
                                    None => 0.0,
                                };
                                acc += v * w.at(co, ci, ky, kx);
                            }
                        }
                    }
                    if let Some(b) = b {
                        acc += b[co];
                    }
                    out.set(n, co, y, x, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Lowers a single-image input to its receptive-field matrix, skipping the
/// rows of output positions outside `mask`.
pub fn im2col(f: &Tensor, spec: &ConvSpec, mask: Option<&Support>) -> Result<LoweredMatrix> {
    spec.validate()?;
    if f.shape().n != 1 {
        return Err(Error::shape("im2col expects a single image"));
    }
    if f.channels() != spec.in_channels {
        return Err(Error::shape(format!(
            "input has {} channels, conv expects {}",
            f.channels(),
            spec.in_channels
        )));
    }
    lower_item(f, 0, spec, mask)
}

fn lower_item(f: &Tensor, n: usize, spec: &ConvSpec, mask: Option<&Support>) -> Result<LoweredMatrix> {
    let s = f.shape();
    let (oh, ow) = spec.output_size(s.h, s.w)?;
    let row_index: Vec<(usize, usize)> = match mask {
        Some(m) => {
            if m.height() != oh || m.width() != ow {
                return Err(Error::shape(format!(
                    "mask is {}x{}, conv output is {oh}x{ow}",
                    m.height(),
                    m.width()
                )));
            }
            m.positions().collect()
        }
        None => (0..oh).flat_map(|y| (0..ow).map(move |x| (y, x))).collect(),
    };

    let cols = spec.patch_len();
    let (kh, kw) = spec.kernel;
    let pad = spec.padding as isize;
    let mut data = vec![0.0f32; row_index.len() * cols];
    data.par_chunks_mut(cols.max(1))
        .zip(row_index.par_iter())
        .for_each(|(row, &(y, x))| {
            let mut k = 0;
            for ci in 0..spec.in_channels {
                let plane = f.plane(n, ci);
                for ky in 0..kh {
                    let iy = (y * spec.stride + ky) as isize - pad;
                    for kx in 0..kw {
                        let ix = (x * spec.stride + kx) as isize - pad;
                        if let Some((sy, sx)) = source(iy, ix, s.h, s.w, spec.pad_mode) {
                            row[k] = plane[sy * s.w + sx];
                        }
                        k += 1;
                    }
                }
            }
        });

    Ok(LoweredMatrix {
        rows: row_index.len(),
        cols,
        data,
        row_index,
    })
}

/// Convolution through im2col and a matrix multiply. Positions outside
/// `mask` are not lowered, not multiplied, and receive `fill`.
pub fn conv_lowered(
    f: &Tensor,
    w: &Tensor,
    b: Option<&[f32]>,
    spec: &ConvSpec,
    mask: Option<&Support>,
    fill: f32,
) -> Result<Tensor> {
    conv_lowered_counted(f, w, b, spec, mask, fill).map(|(t, _)| t)
}

/// [`conv_lowered`] that also returns the number of multiplications the
/// matrix multiply actually performed.
pub fn conv_lowered_counted(
    f: &Tensor,
    w: &Tensor,
    b: Option<&[f32]>,
    spec: &ConvSpec,
    mask: Option<&Support>,
    fill: f32,
) -> Result<(Tensor, u64)> {
    spec.check_operands(f, w, b)?;
    let s = f.shape();
    let (oh, ow) = spec.output_size(s.h, s.w)?;
    let co = spec.out_channels;
    let kmat = kernel_matrix(w, spec);
    let mut out = Tensor::full(Shape::new(s.n, co, oh, ow), fill);
    let mut macs = 0u64;

    for n in 0..s.n {
        let lowered = lower_item(f, n, spec, mask)?;
        let (prod, count) = gemm(&lowered, &kmat, co);
        macs += count;
        for (r, &(y, x)) in lowered.row_index.iter().enumerate() {
            let vals = &prod[r * co..(r + 1) * co];
            for (c, &v) in vals.iter().enumerate() {
                let v = match b {
                    Some(b) => v + b[c],
                    None => v,
                };
                out.set(n, c, y, x, v);
            }
        }
    }
    Ok((out, macs))
}

/// Input pixel read for padded coordinate `(iy, ix)`; `None` reads zero.
#[inline]
fn source(iy: isize, ix: isize, h: usize, w: usize, mode: PadMode) -> Option<(usize, usize)> {
    let inside = iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize;
    match mode {
        _ if inside => Some((iy as usize, ix as usize)),
        PadMode::Zeros => None,
        PadMode::Replicate => Some((
            iy.clamp(0, h as isize - 1) as usize,
            ix.clamp(0, w as isize - 1) as usize,
        )),
    }
}

/// Multiply-accumulates for `retained_positions` output positions.
pub fn count_macs(spec: &ConvSpec, retained_positions: usize) -> u64 {
    (spec.out_channels * spec.patch_len()) as u64 * retained_positions as u64
}

/// Kernel reshaped to a `(patch_len, out_channels)` row-major matrix.
fn kernel_matrix(w: &Tensor, spec: &ConvSpec) -> Vec<f32> {
    let k = spec.patch_len();
    let co = spec.out_channels;
    let src = w.data();
    let mut m = vec![0.0f32; k * co];
    for c in 0..co {
        for j in 0..k {
            m[j * co + c] = src[c * k + j];
        }
    }
    m
}

/// `lowered (rows x k) * kmat (k x co)`, returned row-major with the number
/// of multiplications performed.
fn gemm(lowered: &LoweredMatrix, kmat: &[f32], co: usize) -> (Vec<f32>, u64) {
    let k = lowered.cols;
    let mut out = vec![0.0f32; lowered.rows * co];
    if lowered.rows == 0 {
        return (out, 0);
    }
    let macs = out
        .par_chunks_mut(ROW_CHUNK * co)
        .enumerate()
        .map(|(chunk, dst)| {
            let first = chunk * ROW_CHUNK;
            let rows = dst.len() / co;
            let src = &lowered.data[first * k..(first + rows) * k];
            gemm_block(src, kmat, dst, k, co);
            (rows * k * co) as u64
        })
        .sum();
    (out, macs)
}

fn gemm_block(src: &[f32], kmat: &[f32], dst: &mut [f32], k: usize, co: usize) {
    let rows = dst.len() / co;
    let mut r = 0;
    while r + ROW_TILE <= rows {
        let (d0, rest) = dst[r * co..(r + ROW_TILE) * co].split_at_mut(co);
        let (d1, rest) = rest.split_at_mut(co);
        let (d2, d3) = rest.split_at_mut(co);
        let a0 = &src[r * k..(r + 1) * k];
        let a1 = &src[(r + 1) * k..(r + 2) * k];
        let a2 = &src[(r + 2) * k..(r + 3) * k];
        let a3 = &src[(r + 3) * k..(r + 4) * k];
        for j in 0..k {
            let wrow = &kmat[j * co..(j + 1) * co];
            let (v0, v1, v2, v3) = (a0[j], a1[j], a2[j], a3[j]);
            for c in 0..co {
                let wv = wrow[c];
                d0[c] += v0 * wv;
                d1[c] += v1 * wv;
                d2[c] += v2 * wv;
                d3[c] += v3 * wv;
            }
        }
        r += ROW_TILE;
    }
    for r in r..rows {
        let a = &src[r * k..(r + 1) * k];
        let d = &mut dst[r * co..(r + 1) * co];
        for j in 0..k {
            let wrow = &kmat[j * co..(j + 1) * co];
            let v = a[j];
            for c in 0..co {
                d[c] += v * wrow[c];
            }
        }
    }
}
