//! Ungated backbone evaluated with direct convolutions: every block runs at
//! every position. Serves as the ground truth the gated engine must reproduce
//! at full depth.

use crate::attention::{channel_attention_apply, Pooling};
use crate::error::{Error, Result};
use crate::model::{shift_mean, Model};
use crate::tensor::{pixel_shuffle, Tensor};

/// Residual trunk without gates: `z0 + tail(blocks(z0))`.
pub fn ungated_trunk(model: &Model, z0: &Tensor) -> Result<Tensor> {
    let cfg = &model.config;
    let mut x = z0.clone();
    for group in &model.trunk.groups {
        let group_in = x.clone();
        for bw in &group.blocks {
            let t = bw.conv1.forward_direct(&x)?.map(|v| v.max(0.0));
            let mut f = bw.conv2.forward_direct(&t)?.map(|v| v * cfg.res_scale);
            if let Some(ca) = &bw.ca {
                f = channel_attention_apply(&f, ca, Pooling::Full)?.0;
            }
            x = x.add(&f)?;
        }
        if let Some(tail) = &group.tail {
            x = tail.forward_direct(&x)?;
        }
        if cfg.group_skip {
            x = x.add(&group_in)?;
        }
    }
    if let Some(tail) = &model.trunk.tail {
        x = tail.forward_direct(&x)?;
    }
    x.add(z0)
}

/// Full ungated super-resolution forward.
pub fn ungated_forward(model: &Model, x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    if s.n != 1 || s.c != 3 {
        return Err(Error::Shape(format!("expected a (1, 3, h, w) image, got {s}")));
    }
    let cfg = &model.config;
    let z0 = model.head.forward_direct(&shift_mean(x, &cfg.rgb_mean, -1.0))?;
    let mut feat = ungated_trunk(model, &z0)?;
    for (conv, r) in &model.upsampler {
        feat = pixel_shuffle(&conv.forward_direct(&feat)?, *r)?;
    }
    let y = model.out.forward_direct(&feat)?;
    Ok(shift_mean(&y, &cfg.rgb_mean, 1.0))
}
