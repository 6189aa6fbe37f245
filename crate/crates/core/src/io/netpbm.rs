//! Binary netpbm codecs: PPM (P6) for RGB images and PGM (P5) for depth
//! maps, 8-bit with maxval 255. PNG input is also accepted by
//! [`read_image`].

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gating::DepthMap;
use crate::tensor::{Shape, Tensor};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// `[0, 1]` value to an 8-bit sample: clip, scale, round half away from zero.
#[inline]
pub fn quantize(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(0, "not a netpbm file"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start as u64, "header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format(pos as u64, "missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(0, format!("maxval {maxval} unsupported, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(0, "zero image dimension"));
    }
    Ok(Header {
        magic,
        width,
        height,
        data_offset: pos,
    })
}

fn raster<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    let n = h.width * h.height * channels;
    bytes
        .get(h.data_offset..h.data_offset + n)
        .ok_or_else(|| Error::format(bytes.len() as u64, format!("raster truncated, need {n} bytes")))
}

/// Decodes a P6 file into a `(1, 3, h, w)` tensor in `[0, 1]`.
pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(Error::format(0, "expected a P6 header"));
    }
    let data = raster(bytes, &h, 3)?;
    Ok(from_interleaved_rgb(data, h.width, h.height))
}

fn from_interleaved_rgb(data: &[u8], w: usize, h: usize) -> Tensor {
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| {
        data[(y * w + x) * 3 + c] as f32 / 255.0
    })
}

pub fn encode_ppm(img: &Tensor) -> Result<Vec<u8>> {
    let s = img.shape();
    if s.n != 1 || s.c != 3 {
        return Err(Error::shape(format!("PPM needs a (1, 3, h, w) image, got {s}")));
    }
    let mut out = format!("P6\n{} {}\n255\n", s.w, s.h).into_bytes();
    out.reserve(s.len());
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..3 {
                out.push(quantize(img.at(0, c, y, x)));
            }
        }
    }
    Ok(out)
}

/// Reads a PPM, or a PNG when the file starts with the PNG signature.
pub fn read_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(PNG_SIGNATURE) {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::format(0, format!("png: {e}")))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        return Ok(from_interleaved_rgb(img.as_raw(), w as usize, h as usize));
    }
    decode_ppm(&bytes)
}

pub fn write_image(path: impl AsRef<Path>, img: &Tensor) -> Result<()> {
    fs::write(path, encode_ppm(img)?)?;
    Ok(())
}

/// Depth to PGM sample: `round(depth / max_depth * 255)`.
#[inline]
pub fn depth_to_byte(depth: f32, max_depth: usize) -> u8 {
    quantize(depth / max_depth as f32)
}

/// Encodes a depth map as one P5 image with the groups stacked vertically.
pub fn encode_pgm(map: &DepthMap, max_depth: usize) -> Vec<u8> {
    let (w, h) = (map.width(), map.height() * map.groups());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(map.values().iter().map(|&d| depth_to_byte(d, max_depth)));
    out
}

/// Inverse of [`encode_pgm`]; the image height must be a multiple of
/// `groups`.
pub fn decode_pgm(bytes: &[u8], max_depth: usize, groups: usize) -> Result<DepthMap> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::format(0, "expected a P5 header"));
    }
    if groups == 0 || h.height % groups != 0 {
        return Err(Error::format(0, format!("height {} not divisible into {groups} groups", h.height)));
    }
    let data = raster(bytes, &h, 1)?;
    let values = data
        .iter()
        .map(|&b| b as f32 / 255.0 * max_depth as f32)
        .collect();
    DepthMap::new(groups, h.height / groups, h.width, values)
}

pub fn write_map(path: impl AsRef<Path>, map: &DepthMap, max_depth: usize) -> Result<()> {
    fs::write(path, encode_pgm(map, max_depth))?;
    Ok(())
}

pub fn read_map(path: impl AsRef<Path>, max_depth: usize, groups: usize) -> Result<DepthMap> {
    decode_pgm(&fs::read(path)?, max_depth, groups)
}
