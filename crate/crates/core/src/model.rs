//! End-to-end network: mean shift, head conv, adapter, gated trunk,
//! conv + pixel-shuffle upsampler and output conv.

use std::time::Instant;

use crate::adapter::{adapter_forward_counted, AdapterWeights};
use crate::attention::CaWeights;
use crate::conv::{count_macs, ConvSpec, PadMode};
use crate::error::{Error, Result};
use crate::gating::{
    trunk_forward, BlockOptions, BlockWeights, CaPool, DepthMap, ExecMode, GroupWeights, TrunkOptions,
    TrunkWeights,
};
use crate::io::weights::WeightStore;
use crate::layers::ConvParams;
use crate::report::{EfficiencyReport, LayerMacs};
use crate::tensor::{pixel_shuffle, Shape, Tensor};

/// Widely used DIV2K RGB mean.
pub const DIV2K_RGB_MEAN: [f32; 3] = [0.4488, 0.4371, 0.4040];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 32 blocks of 256 channels in one group.
    Edsr,
    /// 10 groups of 20 channel-attention blocks, 64 channels.
    Rcan,
    None,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edsr" => Ok(Preset::Edsr),
            "rcan" => Ok(Preset::Rcan),
            "none" => Ok(Preset::None),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub scale: usize,
    pub feat_channels: usize,
    pub groups: usize,
    /// Residual blocks per group; also the maximum depth-map value.
    pub blocks: usize,
    pub channel_attention: bool,
    pub ca_reduction: usize,
    pub group_skip: bool,
    pub group_tail: bool,
    pub body_tail: bool,
    pub res_scale: f32,
    pub rgb_mean: [f32; 3],
    pub adapter_channels: usize,
    pub adapter_padding: PadMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::preset(Preset::None, 2)
    }
}

impl ModelConfig {
    pub fn preset(preset: Preset, scale: usize) -> Self {
        let base = ModelConfig {
            scale,
            feat_channels: 64,
            groups: 1,
            blocks: 16,
            channel_attention: false,
            ca_reduction: 16,
            group_skip: false,
            group_tail: false,
            body_tail: true,
            res_scale: 1.0,
            rgb_mean: DIV2K_RGB_MEAN,
            adapter_channels: 64,
            adapter_padding: PadMode::Replicate,
        };
        match preset {
            Preset::None => base,
            Preset::Edsr => ModelConfig {
                feat_channels: 256,
                blocks: 32,
                res_scale: 0.1,
                ..base
            },
            Preset::Rcan => ModelConfig {
                feat_channels: 64,
                groups: 10,
                blocks: 20,
                channel_attention: true,
                group_skip: true,
                group_tail: true,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.scale, 2..=4) {
            return Err(Error::Config(format!("unsupported scale {}", self.scale)));
        }
        if self.feat_channels == 0 || self.groups == 0 || self.blocks == 0 || self.adapter_channels == 0 {
            return Err(Error::Config("channel, group and block counts must be positive".into()));
        }
        if self.channel_attention
            && (self.ca_reduction == 0 || self.feat_channels % self.ca_reduction != 0)
        {
            return Err(Error::Config(format!(
                "ca_reduction {} does not divide {} channels",
                self.ca_reduction, self.feat_channels
            )));
        }
        if !self.res_scale.is_finite() {
            return Err(Error::Config("res_scale must be finite".into()));
        }
        Ok(())
    }

    /// Total residual blocks across groups.
    pub fn total_blocks(&self) -> usize {
        self.groups * self.blocks
    }

    /// Pixel-shuffle factors of the upsampler stages.
    pub fn upsample_factors(&self) -> Result<Vec<usize>> {
        match self.scale {
            2 => Ok(vec![2]),
            3 => Ok(vec![3]),
            4 => Ok(vec![2, 2]),
            s => Err(Error::Config(format!("unsupported scale {s}"))),
        }
    }

    fn adapter_spec(&self, ci: usize, co: usize) -> ConvSpec {
        ConvSpec {
            pad_mode: self.adapter_padding,
            ..ConvSpec::same3x3(ci, co)
        }
    }

    /// Every parameter the model needs, as `(name, dims)` in canonical order.
    pub fn param_layout(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let c = self.feat_channels;
        let a = self.adapter_channels;
        let mut out = Vec::new();
        let mut conv = |name: String, spec: ConvSpec| {
            let ws = spec.weight_shape();
            out.push((format!("{name}.weight"), vec![ws.n, ws.c, ws.h, ws.w]));
            out.push((format!("{name}.bias"), vec![spec.out_channels]));
        };
        conv("head".into(), ConvSpec::same3x3(3, c));
        for g in 0..self.groups {
            for b in 0..self.blocks {
                conv(format!("body.g{g}.b{b}.conv1"), ConvSpec::same3x3(c, c));
                conv(format!("body.g{g}.b{b}.conv2"), ConvSpec::same3x3(c, c));
                if self.channel_attention {
                    let r = c / self.ca_reduction;
                    conv(format!("body.g{g}.b{b}.ca.reduce"), ConvSpec::pointwise(c, r));
                    conv(format!("body.g{g}.b{b}.ca.expand"), ConvSpec::pointwise(r, c));
                }
            }
            if self.group_tail {
                conv(format!("body.g{g}.tail"), ConvSpec::same3x3(c, c));
            }
        }
        if self.body_tail {
            conv("body.tail".into(), ConvSpec::same3x3(c, c));
        }
        let widths = [c, a, a, a, a, self.groups];
        for k in 0..5 {
            conv(format!("adapter.conv{}", k + 1), self.adapter_spec(widths[k], widths[k + 1]));
        }
        for (k, r) in self.upsample_factors()?.into_iter().enumerate() {
            conv(format!("tail.up{k}.conv"), ConvSpec::same3x3(c, c * r * r));
        }
        conv("tail.out".into(), ConvSpec::same3x3(c, 3));
        for k in 1..=4 {
            out.push((format!("adapter.prelu{k}.slopes"), vec![a]));
        }
        Ok(out)
    }
}

/// Where the trunk's depth map comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DepthSource {
    /// Run the adapter with this desired depth.
    Adapter(f32),
    /// Same depth at every position of every group (adapter not run).
    Uniform(f32),
    /// A caller-supplied map (adapter not run).
    Map(DepthMap),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForwardOptions {
    pub mode: ExecMode,
    pub ca_pool: CaPool,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Super-resolved image, not clipped.
    pub image: Tensor,
    /// The depth map the trunk was gated with, clamped to `[0, blocks]`.
    pub depth: DepthMap,
    pub report: EfficiencyReport,
}

/// A validated configuration and its weights.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub head: ConvParams,
    pub adapter: AdapterWeights,
    pub trunk: TrunkWeights,
    pub upsampler: Vec<(ConvParams, usize)>,
    pub out: ConvParams,
}

impl Model {
    /// Checks `store` against the layout of `config` (every name present with
    /// the right dims, nothing extra) and assembles the typed weights.
    pub fn from_store(config: ModelConfig, store: &WeightStore) -> Result<Model> {
        let layout = config.param_layout()?;
        for (name, dims) in &layout {
            let t = store
                .get(name)
                .ok_or_else(|| Error::param(format!("missing parameter {name}")))?;
            if &t.dims != dims {
                return Err(Error::param(format!(
                    "parameter {name} has dims {:?}, expected {dims:?}",
                    t.dims
                )));
            }
        }
        if store.len() != layout.len() {
            let extra = store
                .names()
                .find(|n| !layout.iter().any(|(l, _)| l == n))
                .unwrap_or_default();
            return Err(Error::param(format!("unexpected parameter {extra}")));
        }

        let c = config.feat_channels;
        let a = config.adapter_channels;
        let conv = |name: &str, spec: ConvSpec| -> Result<ConvParams> {
            let w = store.tensor4(&format!("{name}.weight"))?;
            let b = store.vector(&format!("{name}.bias"))?;
            ConvParams::new(spec, w, Some(b))
        };

        let head = conv("head", ConvSpec::same3x3(3, c))?;
        let mut groups = Vec::with_capacity(config.groups);
        for g in 0..config.groups {
            let mut blocks = Vec::with_capacity(config.blocks);
            for b in 0..config.blocks {
                let p = format!("body.g{g}.b{b}");
                let ca = if config.channel_attention {
                    let r = c / config.ca_reduction;
                    Some(CaWeights::new(
                        conv(&format!("{p}.ca.reduce"), ConvSpec::pointwise(c, r))?,
                        conv(&format!("{p}.ca.expand"), ConvSpec::pointwise(r, c))?,
                    )?)
                } else {
                    None
                };
                blocks.push(BlockWeights {
                    conv1: conv(&format!("{p}.conv1"), ConvSpec::same3x3(c, c))?,
                    conv2: conv(&format!("{p}.conv2"), ConvSpec::same3x3(c, c))?,
                    ca,
                });
            }
            let tail = if config.group_tail {
                Some(conv(&format!("body.g{g}.tail"), ConvSpec::same3x3(c, c))?)
            } else {
                None
            };
            groups.push(GroupWeights { blocks, tail });
        }
        let trunk = TrunkWeights {
            groups,
            tail: if config.body_tail {
                Some(conv("body.tail", ConvSpec::same3x3(c, c))?)
            } else {
                None
            },
        };

        let widths = [c, a, a, a, a, config.groups];
        let convs = [0, 1, 2, 3, 4].map(|k| {
            conv(
                &format!("adapter.conv{}", k + 1),
                config.adapter_spec(widths[k], widths[k + 1]),
            )
        });
        let [c1, c2, c3, c4, c5] = convs;
        let slopes = [1, 2, 3, 4].map(|k| store.vector(&format!("adapter.prelu{k}.slopes")));
        let [s1, s2, s3, s4] = slopes;
        let adapter = AdapterWeights::new([c1?, c2?, c3?, c4?, c5?], [s1?, s2?, s3?, s4?])?;

        let upsampler = config
            .upsample_factors()?
            .into_iter()
            .enumerate()
            .map(|(k, r)| Ok((conv(&format!("tail.up{k}.conv"), ConvSpec::same3x3(c, c * r * r))?, r)))
            .collect::<Result<Vec<_>>>()?;
        let out = conv("tail.out", ConvSpec::same3x3(c, 3))?;

        Ok(Model {
            config,
            head,
            adapter,
            trunk,
            upsampler,
            out,
        })
    }

    /// Super-resolves `x` (shape `(1, 3, h, w)`, values in `[0, 1]`) with the
    /// adapter driven by `desired_depth`.
    pub fn forward(&self, x: &Tensor, desired_depth: f32, opts: &ForwardOptions) -> Result<ForwardOutput> {
        self.forward_with(x, &DepthSource::Adapter(desired_depth), opts)
    }

    pub fn forward_with(&self, x: &Tensor, source: &DepthSource, opts: &ForwardOptions) -> Result<ForwardOutput> {
        let start = Instant::now();
        let cfg = &self.config;
        let s = x.shape();
        if s.n != 1 || s.c != 3 {
            return Err(Error::shape(format!("expected a (1, 3, h, w) image, got {s}")));
        }
        let positions = s.plane();
        let mut layers = Vec::new();

        let shifted = shift_mean(x, &cfg.rgb_mean, -1.0);
        let (z0, m) = self.head.forward(&shifted, None)?;
        layers.push(LayerMacs::new("head", count_macs(&self.head.spec, positions), m));

        let depth = match source {
            DepthSource::Adapter(d) => {
                let (map, l) = adapter_forward_counted(&z0, *d, &self.adapter, cfg.blocks, cfg.groups)?;
                layers.extend(l);
                map
            }
            DepthSource::Uniform(d) => DepthMap::uniform(cfg.groups, s.h, s.w, *d),
            DepthSource::Map(m) => m.clone(),
        };
        let depth = depth.clamped(cfg.blocks as f32);

        let trunk_opts = TrunkOptions {
            block: BlockOptions {
                mode: opts.mode,
                ca_pool: opts.ca_pool,
                res_scale: cfg.res_scale,
            },
            group_skip: cfg.group_skip,
        };
        let (mut feat, trunk_report) = trunk_forward(&z0, &self.trunk, &depth, &trunk_opts)?;
        layers.extend(trunk_report.layers);

        for (k, (conv, r)) in self.upsampler.iter().enumerate() {
            let fs = feat.shape();
            let (t, m) = conv.forward(&feat, None)?;
            layers.push(LayerMacs::new(
                format!("tail.up{k}.conv"),
                count_macs(&conv.spec, fs.plane()),
                m,
            ));
            feat = pixel_shuffle(&t, *r)?;
        }
        let fs = feat.shape();
        let (y, m) = self.out.forward(&feat, None)?;
        layers.push(LayerMacs::new("tail.out", count_macs(&self.out.spec, fs.plane()), m));
        let image = shift_mean(&y, &cfg.rgb_mean, 1.0);

        let report = EfficiencyReport {
            layers,
            average_depth: depth.average(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        Ok(ForwardOutput { image, depth, report })
    }

    /// Output shape for an `h x w` input.
    pub fn output_shape(&self, h: usize, w: usize) -> Shape {
        Shape::new(1, 3, h * self.config.scale, w * self.config.scale)
    }
}

/// Adds `sign * mean[c]` to channel `c`.
pub(crate) fn shift_mean(x: &Tensor, mean: &[f32; 3], sign: f32) -> Tensor {
    let mut out = x.clone();
    for (c, &m) in mean.iter().enumerate() {
        out.plane_mut(0, c).iter_mut().for_each(|v| *v += sign * m);
    }
    out
}
