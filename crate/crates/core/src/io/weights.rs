//! Binary weight container.
//!
//! ```text
//! magic      4 bytes  "ADSR"
//! version    u32      1
//! count      u32
//! count times:
//!   name_len u32
//!   name     name_len bytes, UTF-8
//!   dtype    u8       0 = f32
//!   ndim     u8
//!   dims     u32 * ndim
//!   payload  f32 * product(dims), row-major
//! ```
//!
//! All integers and floats are little-endian. Tensors are written in name
//! order, so saving is deterministic.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"ADSR";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// Range of the seeded uniform weight initialization.
pub const INIT_RANGE: f32 = 0.05;
pub const INIT_PRELU_SLOPE: f32 = 0.25;

/// A named parameter of arbitrary rank.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "{} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(RawTensor { dims, data })
    }
}

impl From<&Tensor> for RawTensor {
    fn from(t: &Tensor) -> Self {
        let s = t.shape();
        RawTensor {
            dims: vec![s.n, s.c, s.h, s.w],
            data: t.data().to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, RawTensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: RawTensor) -> Option<RawTensor> {
        self.tensors.insert(name.into(), t)
    }

    pub fn get(&self, name: &str) -> Option<&RawTensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut RawTensor> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RawTensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// A rank-4 parameter as a [`Tensor`].
    pub fn tensor4(&self, name: &str) -> Result<Tensor> {
        let t = self.require(name)?;
        match t.dims[..] {
            [n, c, h, w] => Tensor::new(Shape::new(n, c, h, w), t.data.clone()),
            _ => Err(Error::param(format!("{name} is not rank 4"))),
        }
    }

    /// A rank-1 parameter.
    pub fn vector(&self, name: &str) -> Result<Vec<f32>> {
        let t = self.require(name)?;
        if t.dims.len() != 1 {
            return Err(Error::param(format!("{name} is not rank 1")));
        }
        Ok(t.data.clone())
    }

    fn require(&self, name: &str) -> Result<&RawTensor> {
        self.get(name)
            .ok_or_else(|| Error::param(format!("missing parameter {name}")))
    }

    /// Seeded weights for `config`: conv weights uniform in
    /// `[-INIT_RANGE, INIT_RANGE]`, biases zero, PReLU slopes 0.25.
    pub fn random(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = WeightStore::new();
        for (name, dims) in config.param_layout()? {
            let n: usize = dims.iter().product();
            let data = if name.ends_with(".weight") {
                (0..n).map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE)).collect()
            } else if name.ends_with(".slopes") {
                vec![INIT_PRELU_SLOPE; n]
            } else {
                vec![0.0; n]
            };
            store.insert(name, RawTensor { dims, data });
        }
        Ok(store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format(0, "bad magic, expected \"ADSR\""));
        }
        let at = r.pos;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(at as u64, format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut store = WeightStore::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let at = r.pos;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::format(at as u64, "tensor name is not UTF-8"))?
                .to_owned();
            if store.tensors.contains_key(&name) {
                return Err(Error::format(at as u64, format!("duplicate tensor {name}")));
            }
            let at = r.pos;
            let dtype = r.u8()?;
            if dtype != DTYPE_F32 {
                return Err(Error::format(at as u64, format!("unsupported dtype {dtype}")));
            }
            let ndim = r.u8()? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32()? as usize);
            }
            let at = r.pos;
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::format(at as u64, format!("dims {dims:?} overflow")))?;
            let data = r
                .take(n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store.tensors.insert(name, RawTensor { dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(r.pos as u64, "trailing bytes after last tensor"));
        }
        Ok(store)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(
                    self.pos as u64,
                    format!("truncated: need {n} bytes, {} left", self.bytes.len() - self.pos),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    WeightStore::from_bytes(&fs::read(path)?)
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, store.to_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> WeightStore {
        let mut s = WeightStore::new();
        s.insert("a.weight", RawTensor::new(vec![2, 1, 1, 2], vec![1.0, -2.5, f32::MIN_POSITIVE, 3.0]).unwrap());
        s.insert("a.bias", RawTensor::new(vec![2], vec![0.5, -0.0]).unwrap());
        s
    }

    #[test]
    fn empty_store_is_valid() {
        let bytes = WeightStore::new().to_bytes();
        assert_eq!(bytes.len(), 12);
        assert!(WeightStore::from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"ADSR");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        // names are sorted: "a.bias" first
        assert_eq!(&bytes[12..16], &6u32.to_le_bytes());
        assert_eq!(&bytes[16..22], b"a.bias");
        assert_eq!(bytes[22], 0);
        assert_eq!(bytes[23], 1);
        assert_eq!(&bytes[24..28], &2u32.to_le_bytes());
        assert_eq!(&bytes[28..32], &0.5f32.to_le_bytes());
    }

    #[test]
    fn corruption_reports_offsets() {
        let good = sample().to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        match WeightStore::from_bytes(&bad) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(WeightStore::from_bytes(&bad), Err(Error::Format { offset: 4, .. })));

        let cut = &good[..good.len() - 3];
        match WeightStore::from_bytes(cut) {
            Err(Error::Format { offset, .. }) => assert!(offset > 12 && offset < good.len() as u64),
            other => panic!("{other:?}"),
        }

        let mut longer = good.clone();
        longer.push(0);
        assert!(matches!(
            WeightStore::from_bytes(&longer),
            Err(Error::Format { offset, .. }) if offset == good.len() as u64
        ));

        let mut bad = good.clone();
        bad[22] = 7;
        assert!(matches!(WeightStore::from_bytes(&bad), Err(Error::Format { offset: 22, .. })));
    }

    #[test]
    fn duplicate_names_rejected() {
        let one = sample().to_bytes();
        // append the first record again and bump the count
        let first_record = &one[12..32 + 4];
        let mut bytes = one.clone();
        bytes[8..12].copy_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(first_record);
        match WeightStore::from_bytes(&bytes) {
            Err(Error::Format { offset, msg }) => {
                assert_eq!(offset, one.len() as u64 + 4);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let s = sample();
        save_weights(&s, &path).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(loaded.to_bytes(), s.to_bytes());
        assert_eq!(std::fs::read(&path).unwrap(), loaded.to_bytes());
        assert!(load_weights(dir.path().join("missing.bin")).is_err());
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let cfg = ModelConfig {
            feat_channels: 4,
            blocks: 2,
            adapter_channels: 4,
            ..ModelConfig::default()
        };
        let a = WeightStore::random(&cfg, 9).unwrap();
        let b = WeightStore::random(&cfg, 9).unwrap();
        let c = WeightStore::random(&cfg, 10).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_ne!(a.to_bytes(), c.to_bytes());
        let w = a.get("head.weight").unwrap();
        assert!(w.data.iter().all(|v| v.abs() <= INIT_RANGE));
        assert!(a.get("head.bias").unwrap().data.iter().all(|&v| v == 0.0));
        assert!(a.get("adapter.prelu1.slopes").unwrap().data.iter().all(|&v| v == 0.25));
    }

    proptest! {
        #[test]
        fn bitwise_round_trip(
            entries in proptest::collection::btree_map(
                "[a-z.]{1,12}",
                (proptest::collection::vec(0usize..4, 0..4), any::<u32>()),
                0..6,
            )
        ) {
            let mut s = WeightStore::new();
            for (name, (dims, seed)) in entries {
                let n: usize = dims.iter().product();
                let data = (0..n).map(|k| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(k as u32))).collect();
                s.insert(name, RawTensor::new(dims, data).unwrap());
            }
            let bytes = s.to_bytes();
            let back = WeightStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            for (name, t) in s.iter() {
                let u = back.get(name).unwrap();
                prop_assert_eq!(&u.dims, &t.dims);
                let a: Vec<u32> = t.data.iter().map(|v| v.to_bits()).collect();
                let b: Vec<u32> = u.data.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
