//! Dense NCHW tensors and the handful of elementwise and structural
//! operations the network needs.

use std::fmt;

use crate::error::{Error, Result};

/// Dimensions of a 4-D tensor in (batch, channel, height, width) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

/// Row-major NCHW tensor of `f32` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0 {
            return Err(Error::shape(format!("zero-sized dimension in {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "data length {} does not match shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Shape, value: f32) -> Self {
        assert!(!shape.is_empty(), "zero-sized dimension in {shape}");
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds a tensor by evaluating `f(i, j, y, x)` at every index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for i in 0..shape.n {
            for j in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(i, j, y, x));
                    }
                }
            }
        }
        Self::new(shape, data).expect("from_fn shape")
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.c
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, y: usize, x: usize) -> usize {
        ((i * self.shape.c + j) * self.shape.h + y) * self.shape.w + x
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, y: usize, x: usize) -> f32 {
        self.data[self.offset(i, j, y, x)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, y: usize, x: usize, v: f32) {
        let o = self.offset(i, j, y, x);
        self.data[o] = v;
    }

    /// The `h*w` plane of channel `j` in batch item `i`.
    pub fn plane(&self, i: usize, j: usize) -> &[f32] {
        let start = self.offset(i, j, 0, 0);
        &self.data[start..start + self.shape.plane()]
    }

    pub fn plane_mut(&mut self, i: usize, j: usize) -> &mut [f32] {
        let start = self.offset(i, j, 0, 0);
        let len = self.shape.plane();
        &mut self.data[start..start + len]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise sum with a tensor of identical shape.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "cannot add {} and {}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape,
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f32> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "cannot compare {} and {}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }
}

/// Pointwise nonlinearity.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Relu,
    /// Leaky slope per channel.
    Prelu(Vec<f32>),
    Sigmoid,
}

pub fn activation(t: &Tensor, kind: &Activation) -> Result<Tensor> {
    match kind {
        Activation::Relu => Ok(t.map(|v| v.max(0.0))),
        Activation::Sigmoid => Ok(t.map(sigmoid)),
        Activation::Prelu(slopes) => {
            if slopes.len() != t.channels() {
                return Err(Error::param(format!(
                    "prelu has {} slopes for {} channels",
                    slopes.len(),
                    t.channels()
                )));
            }
            let mut out = t.clone();
            let s = t.shape();
            for i in 0..s.n {
                for (j, &slope) in slopes.iter().enumerate() {
                    for v in out.plane_mut(i, j) {
                        if *v < 0.0 {
                            *v *= slope;
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

#[inline]
pub fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

/// Rearranges `r*r` channel groups into an `r`-times larger spatial grid:
/// `out(j, y*r + p, x*r + q) = in(j*r*r + p*r + q, y, x)`.
pub fn pixel_shuffle(t: &Tensor, r: usize) -> Result<Tensor> {
    let s = t.shape();
    if r == 0 || s.c % (r * r) != 0 {
        return Err(Error::shape(format!(
            "{} channels not divisible by upscale factor {r} squared",
            s.c
        )));
    }
    let oc = s.c / (r * r);
    let os = Shape::new(s.n, oc, s.h * r, s.w * r);
    let mut out = Tensor::zeros(os);
    for i in 0..s.n {
        for j in 0..oc {
            for p in 0..r {
                for q in 0..r {
                    let src = t.plane(i, j * r * r + p * r + q);
                    for y in 0..s.h {
                        for x in 0..s.w {
                            out.set(i, j, y * r + p, x * r + q, src[y * s.w + x]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel spatial mean, shape `(n, c, 1, 1)`.
pub fn global_avg_pool(t: &Tensor) -> Tensor {
    let s = t.shape();
    let mut data = Vec::with_capacity(s.n * s.c);
    for i in 0..s.n {
        for j in 0..s.c {
            let sum: f64 = t.plane(i, j).iter().map(|&v| v as f64).sum();
            data.push((sum / s.plane() as f64) as f32);
        }
    }
    Tensor::new(Shape::new(s.n, s.c, 1, 1), data).expect("pool shape")
}

/// Multiplicative factor for [`broadcast_mul`].
#[derive(Clone, Copy, Debug)]
pub enum Factor<'a> {
    /// One value per channel.
    PerChannel(&'a [f32]),
    /// An `h*w` map applied identically to every channel.
    Spatial(&'a [f32]),
}

pub fn broadcast_mul(t: &Tensor, factor: Factor<'_>) -> Result<Tensor> {
    let s = t.shape();
    let mut out = t.clone();
    match factor {
        Factor::PerChannel(f) => {
            if f.len() != s.c {
                return Err(Error::shape(format!(
                    "{} channel factors for {} channels",
                    f.len(),
                    s.c
                )));
            }
            for i in 0..s.n {
                for (j, &k) in f.iter().enumerate() {
                    out.plane_mut(i, j).iter_mut().for_each(|v| *v *= k);
                }
            }
        }
        Factor::Spatial(m) => {
            if m.len() != s.plane() {
                return Err(Error::shape(format!(
                    "spatial factor of {} entries for {}x{} planes",
                    m.len(),
                    s.h,
                    s.w
                )));
            }
            for i in 0..s.n {
                for j in 0..s.c {
                    for (v, &k) in out.plane_mut(i, j).iter_mut().zip(m) {
                        *v *= k;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(values: &[f32]) -> Tensor {
        Tensor::new(Shape::new(1, 1, 1, values.len()), values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Tensor::new(Shape::new(1, 1, 2, 2), vec![0.0; 3]).is_err());
        assert!(Tensor::new(Shape::new(1, 0, 2, 2), vec![]).is_err());
    }

    #[test]
    fn offsets_are_row_major() {
        let t = Tensor::from_fn(Shape::new(2, 3, 4, 5), |i, j, y, x| {
            (((i * 3 + j) * 4 + y) * 5 + x) as f32
        });
        for (k, &v) in t.data().iter().enumerate() {
            assert_eq!(v, k as f32);
        }
        assert_eq!(t.offset(1, 2, 3, 4), 119);
    }

    #[test]
    fn activations() {
        let r = activation(&row(&[-1.0, 0.0, 2.0]), &Activation::Relu).unwrap();
        assert_eq!(r.data(), &[0.0, 0.0, 2.0]);
        let p = activation(&row(&[-2.0, 3.0]), &Activation::Prelu(vec![0.25])).unwrap();
        assert_eq!(p.data(), &[-0.5, 3.0]);
        let s = activation(&row(&[0.0]), &Activation::Sigmoid).unwrap();
        assert_eq!(s.data(), &[0.5]);
    }

    #[test]
    fn prelu_slope_count_mismatch() {
        let err = activation(&row(&[1.0]), &Activation::Prelu(vec![0.1, 0.2])).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn pixel_shuffle_cases() {
        let t = Tensor::new(Shape::new(1, 4, 1, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let o = pixel_shuffle(&t, 2).unwrap();
        assert_eq!(o.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(o.data(), &[1.0, 2.0, 3.0, 4.0]);

        let t = Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, j, y, x| (j * 7 + y * 2 + x) as f32);
        assert_eq!(pixel_shuffle(&t, 1).unwrap(), t);

        let t = Tensor::zeros(Shape::new(1, 9, 2, 2));
        assert_eq!(pixel_shuffle(&t, 3).unwrap().shape(), Shape::new(1, 1, 6, 6));

        let t = Tensor::zeros(Shape::new(1, 6, 2, 2));
        assert!(matches!(pixel_shuffle(&t, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn pooling() {
        let t = Tensor::new(Shape::new(1, 1, 2, 2), vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(global_avg_pool(&t).data(), &[4.0]);
        let t = Tensor::full(Shape::new(1, 3, 5, 4), 0.3);
        for &v in global_avg_pool(&t).data() {
            assert!((v - 0.3).abs() < 1e-7);
        }
        let t = Tensor::new(
            Shape::new(1, 2, 2, 2),
            vec![0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0],
        )
        .unwrap();
        assert_eq!(global_avg_pool(&t).data(), &[0.0, 2.0]);
    }

    #[test]
    fn broadcasting() {
        let ones = Tensor::full(Shape::new(1, 2, 2, 2), 1.0);
        let o = broadcast_mul(&ones, Factor::Spatial(&[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(o.data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);

        let t = Tensor::from_fn(Shape::new(1, 2, 2, 2), |_, _, y, x| (y * 2 + x + 1) as f32);
        let o = broadcast_mul(&t, Factor::PerChannel(&[0.0, 1.0])).unwrap();
        assert_eq!(o.plane(0, 0), &[0.0; 4]);
        assert_eq!(o.plane(0, 1), t.plane(0, 1));

        let t = Tensor::new(Shape::new(1, 1, 2, 2), vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let o = broadcast_mul(&t, Factor::Spatial(&[0.5; 4])).unwrap();
        assert_eq!(o.data(), &[1.0, 2.0, 3.0, 4.0]);

        assert!(broadcast_mul(&t, Factor::Spatial(&[1.0; 3])).is_err());
        assert!(broadcast_mul(&t, Factor::PerChannel(&[1.0, 1.0])).is_err());
    }

    fn arb_tensor() -> impl Strategy<Value = Tensor> {
        (1usize..3, 1usize..5, 1usize..6, 1usize..6).prop_flat_map(|(n, c, h, w)| {
            proptest::collection::vec(-10.0f32..10.0, n * c * h * w)
                .prop_map(move |d| Tensor::new(Shape::new(n, c, h, w), d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn pixel_shuffle_permutes_elements(
            r in 1usize..4,
            c in 1usize..3,
            h in 1usize..5,
            w in 1usize..5,
            seed in any::<u64>(),
        ) {
            let s = Shape::new(1, c * r * r, h, w);
            let t = Tensor::from_fn(s, |_, j, y, x| {
                ((seed as usize).wrapping_mul(31) ^ (j * 1000 + y * 37 + x)) as f32
            });
            let o = pixel_shuffle(&t, r).unwrap();
            prop_assert_eq!(o.shape().len(), s.len());
            let mut a = t.data().to_vec();
            let mut b = o.data().to_vec();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn broadcast_identity_and_zero(t in arb_tensor()) {
            let s = t.shape();
            let ones_c = vec![1.0; s.c];
            let ones_hw = vec![1.0; s.plane()];
            prop_assert_eq!(&broadcast_mul(&t, Factor::PerChannel(&ones_c)).unwrap(), &t);
            prop_assert_eq!(&broadcast_mul(&t, Factor::Spatial(&ones_hw)).unwrap(), &t);
            let zeros = vec![0.0; s.plane()];
            let z = broadcast_mul(&t, Factor::Spatial(&zeros)).unwrap();
            prop_assert!(z.data().iter().all(|&v| v == 0.0));
        }
    }
}
