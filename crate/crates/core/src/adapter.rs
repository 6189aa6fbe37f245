//! Depth-map predictor: four 3x3 conv + PReLU layers followed by a 3x3 conv
//! + ReLU, with the first layer's weights multiplied by the desired depth.

use crate::conv::count_macs;
use crate::error::{Error, Result};
use crate::gating::DepthMap;
use crate::layers::ConvParams;
use crate::report::LayerMacs;
use crate::tensor::{activation, Activation, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterWeights {
    pub convs: [ConvParams; 5],
    pub slopes: [Vec<f32>; 4],
}

impl AdapterWeights {
    pub fn new(convs: [ConvParams; 5], slopes: [Vec<f32>; 4]) -> Result<Self> {
        for pair in convs.windows(2) {
            if pair[0].spec.out_channels != pair[1].spec.in_channels {
                return Err(Error::param("adapter layer widths do not chain"));
            }
        }
        for (k, s) in slopes.iter().enumerate() {
            if s.len() != convs[k].spec.out_channels {
                return Err(Error::param(format!(
                    "adapter prelu{} has {} slopes for {} channels",
                    k + 1,
                    s.len(),
                    convs[k].spec.out_channels
                )));
            }
        }
        Ok(AdapterWeights { convs, slopes })
    }

    pub fn in_channels(&self) -> usize {
        self.convs[0].spec.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.convs[4].spec.out_channels
    }
}

/// Predicts a `groups x h x w` depth map in `[0, max_depth]` for the desired
/// depth `desired`.
pub fn adapter_forward(
    z0: &Tensor,
    desired: f32,
    w: &AdapterWeights,
    max_depth: usize,
    groups: usize,
) -> Result<DepthMap> {
    adapter_forward_counted(z0, desired, w, max_depth, groups).map(|(m, _)| m)
}

pub fn adapter_forward_counted(
    z0: &Tensor,
    desired: f32,
    w: &AdapterWeights,
    max_depth: usize,
    groups: usize,
) -> Result<(DepthMap, Vec<LayerMacs>)> {
    let s = z0.shape();
    if s.n != 1 || s.c != w.in_channels() {
        return Err(Error::shape(format!(
            "adapter expects 1x{} features, got {}",
            w.in_channels(),
            s
        )));
    }
    if w.out_channels() != groups {
        return Err(Error::param(format!(
            "adapter emits {} maps for {groups} groups",
            w.out_channels()
        )));
    }
    if !(desired >= 0.0) {
        return Err(Error::range(format!("desired depth {desired} is negative")));
    }

    let positions = s.plane();
    let mut layers = Vec::with_capacity(5);
    let mut first = w.convs[0].clone();
    first.weight = first.weight.map(|v| desired * v);

    let mut x = z0.clone();
    for k in 0..5 {
        let conv = if k == 0 { &first } else { &w.convs[k] };
        let (t, m) = conv.forward(&x, None)?;
        layers.push(LayerMacs::new(
            format!("adapter.conv{}", k + 1),
            count_macs(&conv.spec, positions),
            m,
        ));
        x = if k < 4 {
            activation(&t, &Activation::Prelu(w.slopes[k].clone()))?
        } else {
            activation(&t, &Activation::Relu)?
        };
    }
    let max = max_depth as f32;
    let values = x.into_data().into_iter().map(|v| v.min(max)).collect();
    Ok((DepthMap::new(groups, s.h, s.w, values)?, layers))
}

/// Mean of all entries of all groups.
pub fn average_depth(m: &DepthMap) -> f64 {
    m.average()
}
