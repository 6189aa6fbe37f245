//! Squeeze-and-excitation style channel attention: pool, 1x1 reduce, ReLU,
//! 1x1 expand, sigmoid, per-channel rescale.

use crate::conv::Support;
use crate::error::{Error, Result};
use crate::layers::ConvParams;
use crate::tensor::{broadcast_mul, global_avg_pool, sigmoid, Factor, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct CaWeights {
    pub reduce: ConvParams,
    pub expand: ConvParams,
}

impl CaWeights {
    pub fn new(reduce: ConvParams, expand: ConvParams) -> Result<Self> {
        let (r, e) = (&reduce.spec, &expand.spec);
        if r.kernel != (1, 1) || e.kernel != (1, 1) {
            return Err(Error::param("channel attention convs must be 1x1"));
        }
        if r.out_channels != e.in_channels || r.in_channels != e.out_channels {
            return Err(Error::param(format!(
                "channel attention maps {}->{} then {}->{}",
                r.in_channels, r.out_channels, e.in_channels, e.out_channels
            )));
        }
        if r.in_channels % r.out_channels != 0 {
            return Err(Error::param(format!(
                "reduced width {} does not divide {} channels",
                r.out_channels, r.in_channels
            )));
        }
        Ok(CaWeights { reduce, expand })
    }

    pub fn channels(&self) -> usize {
        self.reduce.spec.in_channels
    }

    pub fn reduced(&self) -> usize {
        self.reduce.spec.out_channels
    }

    /// Multiplications in the two 1x1 layers on the pooled vector.
    pub fn macs(&self) -> u64 {
        2 * (self.channels() * self.reduced()) as u64
    }
}

/// Which positions feed the channel statistics.
#[derive(Clone, Copy, Debug)]
pub enum Pooling<'a> {
    Full,
    /// Mean over the set positions only.
    Support(&'a Support),
}

/// Scales `features` per channel by the attention gate. Returns the scaled
/// features and the multiplications spent in the 1x1 layers.
pub fn channel_attention_apply(
    features: &Tensor,
    ca: &CaWeights,
    pool: Pooling<'_>,
) -> Result<(Tensor, u64)> {
    let s = features.shape();
    if s.n != 1 || s.c != ca.channels() {
        return Err(Error::param(format!(
            "channel attention for {} channels applied to {}",
            ca.channels(),
            s
        )));
    }
    let pooled: Vec<f32> = match pool {
        Pooling::Full => global_avg_pool(features).into_data(),
        Pooling::Support(sup) => {
            if sup.height() != s.h || sup.width() != s.w {
                return Err(Error::shape("pooling support does not match features"));
            }
            let count = sup.count();
            (0..s.c)
                .map(|c| {
                    if count == 0 {
                        return 0.0;
                    }
                    let sum: f64 = features
                        .plane(0, c)
                        .iter()
                        .zip(sup.bits())
                        .filter(|(_, &b)| b)
                        .map(|(&v, _)| v as f64)
                        .sum();
                    (sum / count as f64) as f32
                })
                .collect()
        }
    };

    let hidden = pointwise(&ca.reduce, &pooled, |v| v.max(0.0));
    let gate = pointwise(&ca.expand, &hidden, sigmoid);
    let out = broadcast_mul(features, Factor::PerChannel(&gate))?;
    Ok((out, ca.macs()))
}

fn pointwise(p: &ConvParams, x: &[f32], act: impl Fn(f32) -> f32) -> Vec<f32> {
    let ci = p.spec.in_channels;
    let w = p.weight.data();
    (0..p.spec.out_channels)
        .map(|o| {
            let mut acc = 0.0f32;
            for (i, &v) in x.iter().enumerate() {
                acc += v * w[o * ci + i];
            }
            act(acc + p.bias_or_zero(o))
        })
        .collect()
}
