use crate::conv::{conv_lowered_counted, direct_conv, ConvSpec, Support};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weights and bias of one convolution layer together with its geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub spec: ConvSpec,
    pub weight: Tensor,
    pub bias: Option<Vec<f32>>,
}

impl ConvParams {
    pub fn new(spec: ConvSpec, weight: Tensor, bias: Option<Vec<f32>>) -> Result<Self> {
        if weight.shape() != spec.weight_shape() {
            return Err(Error::param(format!(
                "weight shape {} does not match conv {}",
                weight.shape(),
                spec.weight_shape()
            )));
        }
        if bias.is_some() != spec.has_bias {
            return Err(Error::param("bias presence does not match conv spec"));
        }
        if let Some(b) = &bias {
            if b.len() != spec.out_channels {
                return Err(Error::param(format!(
                    "bias has {} entries for {} output channels",
                    b.len(),
                    spec.out_channels
                )));
            }
        }
        Ok(ConvParams { spec, weight, bias })
    }

    /// Lowered convolution restricted to `support` (zero elsewhere), with the
    /// multiply count.
    pub fn forward(&self, x: &Tensor, support: Option<&Support>) -> Result<(Tensor, u64)> {
        conv_lowered_counted(x, &self.weight, self.bias.as_deref(), &self.spec, support, 0.0)
    }

    /// Direct nested-loop convolution.
    pub fn forward_direct(&self, x: &Tensor) -> Result<Tensor> {
        direct_conv(x, &self.weight, self.bias.as_deref(), &self.spec)
    }

    pub fn bias_or_zero(&self, c: usize) -> f32 {
        self.bias.as_ref().map_or(0.0, |b| b[c])
    }
}
