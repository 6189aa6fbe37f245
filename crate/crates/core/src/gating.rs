//! Depth-map gating of residual blocks.
//!
//! Block `l` (1-based) at a position with depth `d` is weighted by
//! `G_l(d) = clamp(d - (l - 1), 0, 1)`. Positions with a zero weight skip the
//! block entirely; the residual connection carries the features through.

use crate::attention::{channel_attention_apply, CaWeights, Pooling};
use crate::conv::{count_macs, Support};
use crate::error::{Error, Result};
use crate::layers::ConvParams;
use crate::report::LayerMacs;
use crate::tensor::{activation, Activation, Tensor};

/// Per-group depth predictions, `groups x h x w` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    groups: usize,
    h: usize,
    w: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(groups: usize, h: usize, w: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != groups * h * w {
            return Err(Error::shape(format!(
                "{} depth values for {groups}x{h}x{w}",
                values.len()
            )));
        }
        Ok(DepthMap {
            groups,
            h,
            w,
            values,
        })
    }

    pub fn uniform(groups: usize, h: usize, w: usize, depth: f32) -> Self {
        DepthMap {
            groups,
            h,
            w,
            values: vec![depth; groups * h * w],
        }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn channel(&self, g: usize) -> &[f32] {
        let n = self.h * self.w;
        &self.values[g * n..(g + 1) * n]
    }

    /// Entries clamped to `[0, max_depth]`; NaN maps to 0.
    pub fn clamped(&self, max_depth: f32) -> DepthMap {
        DepthMap {
            values: self
                .values
                .iter()
                .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(0.0, max_depth) })
                .collect(),
            ..*self
        }
    }

    /// Arithmetic mean over every entry of every group.
    pub fn average(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|&v| v as f64).sum();
        sum / self.values.len() as f64
    }
}

/// Gate weight of block `l` (1-based) at depth `d`.
#[inline]
pub fn gate_coefficient(d: f32, l: usize) -> f32 {
    debug_assert!(l >= 1);
    let lower = (l - 1) as f32;
    if d < lower {
        0.0
    } else if d > l as f32 {
        1.0
    } else {
        d - lower
    }
}

/// Gate coefficients of one block and the positions where they are nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMask {
    pub coefficients: Vec<f32>,
    pub support: Support,
}

impl BlockMask {
    pub fn from_coefficients(h: usize, w: usize, coefficients: Vec<f32>) -> Result<Self> {
        let support = Support::from_mask(h, w, &coefficients)?;
        Ok(BlockMask {
            coefficients,
            support,
        })
    }

    pub fn uniform(h: usize, w: usize, value: f32) -> Self {
        Self::from_coefficients(h, w, vec![value; h * w]).expect("uniform mask")
    }

    pub fn height(&self) -> usize {
        self.support.height()
    }

    pub fn width(&self) -> usize {
        self.support.width()
    }
}

/// One mask per block for a single depth channel of size `h x w`.
pub fn masks_from_depth(depth: &[f32], h: usize, w: usize, blocks: usize) -> Result<Vec<BlockMask>> {
    if depth.len() != h * w {
        return Err(Error::shape(format!(
            "{} depth values for a {h}x{w} map",
            depth.len()
        )));
    }
    let max = blocks as f32;
    if let Some(bad) = depth.iter().find(|&&d| !(0.0..=max).contains(&d)) {
        return Err(Error::range(format!("depth {bad} outside [0, {blocks}]")));
    }
    (1..=blocks)
        .map(|l| {
            let coeffs = depth.iter().map(|&d| gate_coefficient(d, l)).collect();
            BlockMask::from_coefficients(h, w, coeffs)
        })
        .collect()
}

/// Grows `support` by a Chebyshev ball of `radius`, clipped at the borders.
pub fn dilate_support(support: &Support, radius: usize) -> Support {
    if radius == 0 {
        return support.clone();
    }
    let (h, w) = (support.height(), support.width());
    // separable: horizontal then vertical pass
    let mut rows = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if support.get(y, x) {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(w - 1);
                rows[y * w + lo..=y * w + hi].fill(true);
            }
        }
    }
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if rows[y * w + x] {
                let lo = y.saturating_sub(radius);
                let hi = (y + radius).min(h - 1);
                for yy in lo..=hi {
                    out[yy * w + x] = true;
                }
            }
        }
    }
    Support::new(h, w, out).expect("same size")
}

/// How the gated convolutions are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ExecMode {
    /// Compute every block everywhere, then weight by the gate.
    Dense,
    /// Compute only where needed so that the result equals `Dense`.
    #[default]
    SparseExact,
    /// Restrict both block convolutions to the gate support.
    SparseFast,
}

impl ExecMode {
    pub const ALL: [ExecMode; 3] = [ExecMode::Dense, ExecMode::SparseExact, ExecMode::SparseFast];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExecMode::Dense => "dense",
            ExecMode::SparseExact => "sparse-exact",
            ExecMode::SparseFast => "sparse-fast",
        }
    }
}

impl std::str::FromStr for ExecMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(ExecMode::Dense),
            "sparse-exact" => Ok(ExecMode::SparseExact),
            "sparse-fast" => Ok(ExecMode::SparseFast),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for ExecMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pooling region for channel attention inside gated blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CaPool {
    /// Pool over the whole map. Exact, but the second conv must run densely.
    #[default]
    Full,
    /// Pool over the gate support only. Keeps sparsity, approximates `Full`.
    Support,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights {
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    pub ca: Option<CaWeights>,
}

impl BlockWeights {
    pub fn channels(&self) -> usize {
        self.conv1.spec.in_channels
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockOptions {
    pub mode: ExecMode,
    pub ca_pool: CaPool,
    /// Multiplier on the block body before gating.
    pub res_scale: f32,
}

impl Default for BlockOptions {
    fn default() -> Self {
        BlockOptions {
            mode: ExecMode::Dense,
            ca_pool: CaPool::Full,
            res_scale: 1.0,
        }
    }
}

/// Multiplications actually performed by one gated block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlockWork {
    pub conv1_macs: u64,
    pub conv2_macs: u64,
    pub ca_macs: u64,
    pub support: usize,
}

/// `z + m ∘ F(z)` for one residual block.
pub fn gated_residual_block(
    z: &Tensor,
    weights: &BlockWeights,
    mask: &BlockMask,
    opts: &BlockOptions,
) -> Result<(Tensor, BlockWork)> {
    let s = z.shape();
    if s.n != 1 || mask.height() != s.h || mask.width() != s.w {
        return Err(Error::shape(format!(
            "{}x{} mask for features {}",
            mask.height(),
            mask.width(),
            s
        )));
    }
    let support = &mask.support;
    let mut work = BlockWork {
        support: support.count(),
        ..Default::default()
    };
    if opts.mode != ExecMode::Dense && support.is_empty() {
        return Ok((z.clone(), work));
    }

    let full_ca = weights.ca.is_some() && opts.ca_pool == CaPool::Full;
    let (mask1, mask2) = match opts.mode {
        ExecMode::Dense => (None, None),
        _ if full_ca => (None, None),
        ExecMode::SparseExact => {
            let radius = weights.conv2.spec.kernel.0.max(weights.conv2.spec.kernel.1) / 2;
            (Some(dilate_support(support, radius)), Some(support.clone()))
        }
        ExecMode::SparseFast => (Some(support.clone()), Some(support.clone())),
    };

    let (t, m1) = weights.conv1.forward(z, mask1.as_ref())?;
    let t = activation(&t, &Activation::Relu)?;
    let (mut body, m2) = weights.conv2.forward(&t, mask2.as_ref())?;
    work.conv1_macs = m1;
    work.conv2_macs = m2;
    if opts.res_scale != 1.0 {
        body.data_mut().iter_mut().for_each(|v| *v *= opts.res_scale);
    }
    if let Some(ca) = &weights.ca {
        let pool = match (opts.mode, opts.ca_pool) {
            (ExecMode::Dense, _) | (_, CaPool::Full) => Pooling::Full,
            (_, CaPool::Support) => Pooling::Support(support),
        };
        let (scaled, m) = channel_attention_apply(&body, ca, pool)?;
        body = scaled;
        work.ca_macs = m;
    }

    let mut out = z.clone();
    let plane = s.plane();
    let dense = opts.mode == ExecMode::Dense;
    for c in 0..s.c {
        let dst = out.plane_mut(0, c);
        let src = body.plane(0, c);
        for p in 0..plane {
            if dense || support.bits()[p] {
                dst[p] += mask.coefficients[p] * src[p];
            }
        }
    }
    Ok((out, work))
}

/// Weights of one residual group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupWeights {
    pub blocks: Vec<BlockWeights>,
    /// Conv after the group's blocks.
    pub tail: Option<ConvParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrunkWeights {
    pub groups: Vec<GroupWeights>,
    /// Conv after all groups, before the long skip.
    pub tail: Option<ConvParams>,
}

impl TrunkWeights {
    pub fn blocks_per_group(&self) -> usize {
        self.groups.first().map_or(0, |g| g.blocks.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrunkOptions {
    pub block: BlockOptions,
    /// Add each group's input to its output.
    pub group_skip: bool,
}

/// Per-layer MACs and per-block support sizes of one trunk evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrunkReport {
    pub layers: Vec<LayerMacs>,
    /// `block_support[g][b]` is the number of gated positions of block `b`.
    pub block_support: Vec<Vec<usize>>,
}

impl TrunkReport {
    pub fn nonempty_blocks(&self) -> usize {
        self.block_support.iter().flatten().filter(|&&n| n > 0).count()
    }
}

/// Runs the gated trunk: for each group, its blocks gated by that group's
/// depth channel, the optional group tail and group skip; then the optional
/// trunk tail and the long skip from `z0`.
pub fn trunk_forward(
    z0: &Tensor,
    weights: &TrunkWeights,
    depth: &DepthMap,
    opts: &TrunkOptions,
) -> Result<(Tensor, TrunkReport)> {
    let s = z0.shape();
    if depth.groups() != weights.groups.len() {
        return Err(Error::param(format!(
            "depth map has {} groups, trunk has {}",
            depth.groups(),
            weights.groups.len()
        )));
    }
    if depth.height() != s.h || depth.width() != s.w {
        return Err(Error::shape(format!(
            "depth map is {}x{}, features are {}x{}",
            depth.height(),
            depth.width(),
            s.h,
            s.w
        )));
    }
    let blocks = weights.blocks_per_group();
    if weights.groups.iter().any(|g| g.blocks.len() != blocks) {
        return Err(Error::param("groups have unequal block counts"));
    }
    let depth = depth.clamped(blocks as f32);
    let positions = s.plane();
    let mut report = TrunkReport::default();

    let mut x = z0.clone();
    for (g, group) in weights.groups.iter().enumerate() {
        let masks = masks_from_depth(depth.channel(g), s.h, s.w, blocks)?;
        let group_in = x.clone();
        let mut supports = Vec::with_capacity(blocks);
        for (b, (bw, mask)) in group.blocks.iter().zip(&masks).enumerate() {
            let (next, work) = gated_residual_block(&x, bw, mask, &opts.block)?;
            x = next;
            supports.push(work.support);
            let name = format!("body.g{g}.b{b}");
            report.layers.push(LayerMacs::new(
                format!("{name}.conv1"),
                count_macs(&bw.conv1.spec, positions),
                work.conv1_macs,
            ));
            report.layers.push(LayerMacs::new(
                format!("{name}.conv2"),
                count_macs(&bw.conv2.spec, positions),
                work.conv2_macs,
            ));
            if let Some(ca) = &bw.ca {
                report
                    .layers
                    .push(LayerMacs::new(format!("{name}.ca"), ca.macs(), work.ca_macs));
            }
        }
        report.block_support.push(supports);
        if let Some(tail) = &group.tail {
            let (t, m) = tail.forward(&x, None)?;
            report.layers.push(LayerMacs::new(
                format!("body.g{g}.tail"),
                count_macs(&tail.spec, positions),
                m,
            ));
            x = t;
        }
        if opts.group_skip {
            x = x.add(&group_in)?;
        }
    }
    if let Some(tail) = &weights.tail {
        let (t, m) = tail.forward(&x, None)?;
        report.layers.push(LayerMacs::new(
            "body.tail",
            count_macs(&tail.spec, positions),
            m,
        ));
        x = t;
    }
    Ok((x.add(z0)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::ConvSpec;
    use crate::tensor::Shape;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv(rng: &mut ChaCha8Rng, spec: ConvSpec, scale: f32) -> ConvParams {
        let w = Tensor::from_fn(spec.weight_shape(), |_, _, _, _| rng.gen_range(-scale..scale));
        let b = (0..spec.out_channels).map(|_| rng.gen_range(-scale..scale)).collect();
        ConvParams::new(spec, w, Some(b)).unwrap()
    }

    fn block(rng: &mut ChaCha8Rng, c: usize) -> BlockWeights {
        BlockWeights {
            conv1: conv(rng, ConvSpec::same3x3(c, c), 0.2),
            conv2: conv(rng, ConvSpec::same3x3(c, c), 0.2),
            ca: None,
        }
    }

    fn features(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_fn(Shape::new(1, c, h, w), |_, _, _, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn gate_values() {
        assert_eq!(gate_coefficient(2.5, 3), 0.5);
        assert_eq!(gate_coefficient(32.0, 5), 1.0);
        assert_eq!(gate_coefficient(4.0, 5), 0.0);
        assert_eq!(gate_coefficient(0.0, 1), 0.0);
        assert_eq!(gate_coefficient(5.0, 5), 1.0);
    }

    #[test]
    fn mask_generation() {
        let masks = masks_from_depth(&[2.5; 4], 2, 2, 4).unwrap();
        let firsts: Vec<f32> = masks.iter().map(|m| m.coefficients[0]).collect();
        assert_eq!(firsts, vec![1.0, 1.0, 0.5, 0.0]);
        assert!(masks[3].support.is_empty());
        assert!(masks[2].support.is_full());

        let masks = masks_from_depth(&[4.0; 3], 1, 3, 4).unwrap();
        assert!(masks.iter().all(|m| m.coefficients.iter().all(|&c| c == 1.0)));

        let masks = masks_from_depth(&[0.0, 4.0], 1, 2, 4).unwrap();
        assert_eq!(masks[0].coefficients, vec![0.0, 1.0]);
        assert_eq!(masks[3].coefficients, vec![0.0, 1.0]);

        assert!(matches!(
            masks_from_depth(&[4.5], 1, 1, 4),
            Err(Error::Range(_))
        ));
        assert!(masks_from_depth(&[-0.1], 1, 1, 4).is_err());
    }

    #[test]
    fn blocks_beyond_ceiling_are_skipped() {
        let depth = [0.0, 0.3, 1.0, 2.7, 3.0, 5.5, 8.0];
        let masks = masks_from_depth(&depth, 1, depth.len(), 8).unwrap();
        for (p, &d) in depth.iter().enumerate() {
            let ceil = d.ceil() as usize;
            for (l, m) in masks.iter().enumerate() {
                if l + 1 > ceil {
                    assert_eq!(m.coefficients[p], 0.0, "d={d} l={}", l + 1);
                }
            }
        }
    }

    #[test]
    fn dilation() {
        let mut bits = vec![false; 25];
        bits[12] = true;
        let s = Support::new(5, 5, bits).unwrap();
        let d = dilate_support(&s, 1);
        assert_eq!(d.count(), 9);
        for y in 1..4 {
            for x in 1..4 {
                assert!(d.get(y, x));
            }
        }
        assert_eq!(dilate_support(&s, 0), s);

        let corner = Support::new(3, 3, (0..9).map(|k| k == 0).collect()).unwrap();
        assert_eq!(dilate_support(&corner, 1).count(), 4);

        let full = Support::full(4, 6);
        assert_eq!(dilate_support(&full, 2), full);
    }

    #[test]
    fn zero_and_unit_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bw = block(&mut rng, 4);
        let z = features(&mut rng, 4, 6, 6);
        for mode in ExecMode::ALL {
            let opts = BlockOptions {
                mode,
                ..Default::default()
            };
            let (o, _) = gated_residual_block(&z, &bw, &BlockMask::uniform(6, 6, 0.0), &opts).unwrap();
            assert_eq!(o, z);
        }

        let t = bw.conv1.forward_direct(&z).unwrap().map(|v| v.max(0.0));
        let f = bw.conv2.forward_direct(&t).unwrap();
        let expect = z.add(&f).unwrap();
        for mode in ExecMode::ALL {
            let opts = BlockOptions {
                mode,
                ..Default::default()
            };
            let (o, _) = gated_residual_block(&z, &bw, &BlockMask::uniform(6, 6, 1.0), &opts).unwrap();
            assert!(o.max_abs_diff(&expect).unwrap() <= 1e-5, "{mode}");
        }
    }

    #[test]
    fn half_gate_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bw = block(&mut rng, 6);
        let z = features(&mut rng, 6, 9, 7);
        let t = bw.conv1.forward_direct(&z).unwrap().map(|v| v.max(0.0));
        let f = bw.conv2.forward_direct(&t).unwrap();
        let expect = z.add(&f.map(|v| 0.5 * v)).unwrap();
        for mode in ExecMode::ALL {
            let opts = BlockOptions {
                mode,
                ..Default::default()
            };
            let (o, _) = gated_residual_block(&z, &bw, &BlockMask::uniform(9, 7, 0.5), &opts).unwrap();
            assert!(o.max_abs_diff(&expect).unwrap() <= 1e-5, "{mode}");
        }
    }

    #[test]
    fn sparse_exact_matches_dense_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = 5;
        let bw = block(&mut rng, c);
        let z = features(&mut rng, c, 12, 10);
        let depth: Vec<f32> = (0..120).map(|_| rng.gen_range(0.0..2.0)).collect();
        let masks = masks_from_depth(&depth, 12, 10, 2).unwrap();
        for mask in &masks {
            let dense = gated_residual_block(&z, &bw, mask, &BlockOptions::default()).unwrap().0;
            let opts = BlockOptions {
                mode: ExecMode::SparseExact,
                ..Default::default()
            };
            let (sparse, work) = gated_residual_block(&z, &bw, mask, &opts).unwrap();
            assert!(sparse.max_abs_diff(&dense).unwrap() <= 1e-5);
            let dil = dilate_support(&mask.support, 1).count();
            assert_eq!(work.conv1_macs, count_macs(&bw.conv1.spec, dil));
            assert_eq!(work.conv2_macs, count_macs(&bw.conv2.spec, mask.support.count()));
        }
    }

    #[test]
    fn block_rejects_mismatched_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bw = block(&mut rng, 2);
        let z = features(&mut rng, 2, 4, 4);
        let err = gated_residual_block(&z, &bw, &BlockMask::uniform(4, 5, 1.0), &BlockOptions::default());
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    fn toy_trunk(rng: &mut ChaCha8Rng, groups: usize, blocks: usize, c: usize) -> TrunkWeights {
        TrunkWeights {
            groups: (0..groups)
                .map(|_| GroupWeights {
                    blocks: (0..blocks).map(|_| block(rng, c)).collect(),
                    tail: None,
                })
                .collect(),
            tail: Some(conv(rng, ConvSpec::same3x3(c, c), 0.2)),
        }
    }

    #[test]
    fn trunk_degenerate_depths() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (b, c) = (4, 4);
        let tw = toy_trunk(&mut rng, 1, b, c);
        let z0 = features(&mut rng, c, 8, 8);
        let opts = TrunkOptions {
            block: BlockOptions::default(),
            group_skip: false,
        };

        // ungated oracle through the direct path
        let mut x = z0.clone();
        for bw in &tw.groups[0].blocks {
            let t = bw.conv1.forward_direct(&x).unwrap().map(|v| v.max(0.0));
            x = x.add(&bw.conv2.forward_direct(&t).unwrap()).unwrap();
        }
        let ungated = tw.tail.as_ref().unwrap().forward_direct(&x).unwrap().add(&z0).unwrap();
        let (full, _) = trunk_forward(&z0, &tw, &DepthMap::uniform(1, 8, 8, b as f32), &opts).unwrap();
        assert!(full.max_abs_diff(&ungated).unwrap() <= 1e-5);

        let (zero, rep) = trunk_forward(&z0, &tw, &DepthMap::uniform(1, 8, 8, 0.0), &opts).unwrap();
        let expect = tw.tail.as_ref().unwrap().forward_direct(&z0).unwrap().add(&z0).unwrap();
        assert!(zero.max_abs_diff(&expect).unwrap() <= 1e-5);
        assert_eq!(rep.nonempty_blocks(), 0);

        let (_, rep) = trunk_forward(&z0, &tw, &DepthMap::uniform(1, 8, 8, (b / 2) as f32), &opts).unwrap();
        assert_eq!(rep.nonempty_blocks(), b / 2);
    }

    #[test]
    fn trunk_rejects_group_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tw = toy_trunk(&mut rng, 2, 1, 2);
        let z0 = features(&mut rng, 2, 4, 4);
        let opts = TrunkOptions {
            block: BlockOptions::default(),
            group_skip: true,
        };
        assert!(matches!(
            trunk_forward(&z0, &tw, &DepthMap::uniform(1, 4, 4, 1.0), &opts),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn telescoping_sum() {
        let big_d = 32;
        for i in 0..=3200 {
            let d = (i as f64 * 0.01) as f32;
            let sum: f32 = (1..=big_d).map(|l| gate_coefficient(d, l)).sum();
            assert!((sum - d).abs() <= 1e-6, "d={d} sum={sum}");
        }
    }

    proptest! {
        #[test]
        fn gate_monotone(d in 0.0f32..40.0, e in 0.0f32..40.0, l in 1usize..40) {
            let (lo, hi) = if d <= e { (d, e) } else { (e, d) };
            prop_assert!(gate_coefficient(lo, l) <= gate_coefficient(hi, l));
            prop_assert!(gate_coefficient(d, l + 1) <= gate_coefficient(d, l));
            let g = gate_coefficient(d, l);
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn dilation_matches_definition(
            h in 1usize..9, w in 1usize..9, r in 0usize..3,
            bits in proptest::collection::vec(proptest::bool::weighted(0.15), 81),
        ) {
            let s = Support::new(h, w, bits[..h * w].to_vec()).unwrap();
            let d = dilate_support(&s, r);
            for y in 0..h {
                for x in 0..w {
                    let expect = (0..h).any(|yy| (0..w).any(|xx| {
                        s.get(yy, xx) && yy.abs_diff(y) <= r && xx.abs_diff(x) <= r
                    }));
                    prop_assert_eq!(d.get(y, x), expect);
                }
            }
        }
    }
}
