//! Randomized equivalence of the lowered (dense and row-skipping) paths with
//! the direct convolution.

mod common;

use depthgate_core::conv::conv_lowered_counted;
use depthgate_core::{count_macs, direct_conv, ConvSpec, PadMode, Shape, Support};
use rand::Rng;

#[test]
fn masked_lowering_matches_direct_over_random_trials() {
    let mut rng = common::rng(2024);
    for trial in 0..200 {
        let ci = rng.gen_range(1..=16);
        let co = rng.gen_range(1..=16);
        let h = rng.gen_range(1..=16);
        let w = rng.gen_range(1..=16);
        let k = [1, 3][rng.gen_range(0..2)];
        let spec = ConvSpec {
            in_channels: ci,
            out_channels: co,
            kernel: (k, k),
            stride: 1,
            padding: k / 2,
            pad_mode: PadMode::Zeros,
            has_bias: rng.gen_bool(0.5),
        };
        let f = common::random_tensor(&mut rng, Shape::new(1, ci, h, w), 1.0);
        let wt = common::random_tensor(&mut rng, spec.weight_shape(), 1.0);
        let bias: Option<Vec<f32>> = spec
            .has_bias
            .then(|| (0..co).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let density = rng.gen_range(0.0..1.0);
        let mask = Support::new(h, w, (0..h * w).map(|_| rng.gen_bool(density)).collect()).unwrap();

        let reference = direct_conv(&f, &wt, bias.as_deref(), &spec).unwrap();
        let (sparse, macs) = conv_lowered_counted(&f, &wt, bias.as_deref(), &spec, Some(&mask), 0.0).unwrap();
        assert_eq!(macs, count_macs(&spec, mask.count()), "trial {trial}");
        for c in 0..co {
            for y in 0..h {
                for x in 0..w {
                    let v = sparse.at(0, c, y, x);
                    if mask.get(y, x) {
                        let d = (v - reference.at(0, c, y, x)).abs();
                        assert!(d <= 1e-5, "trial {trial}: diff {d}");
                    } else {
                        assert_eq!(v, 0.0, "trial {trial}: skipped position written");
                    }
                }
            }
        }
    }
}

#[test]
fn retained_rows_track_positive_mask_entries() {
    let mut rng = common::rng(5);
    let spec = ConvSpec::same3x3(4, 6);
    let f = common::random_tensor(&mut rng, Shape::new(1, 4, 10, 10), 1.0);
    let wt = common::random_tensor(&mut rng, spec.weight_shape(), 1.0);
    let b = vec![0.0; 6];
    let mut bits = vec![false; 100];
    let mut prev = 0;
    for step in 0..10 {
        for k in step * 10..(step + 1) * 10 {
            bits[k] = true;
        }
        let mask = Support::new(10, 10, bits.clone()).unwrap();
        let lowered = depthgate_core::im2col(&f, &spec, Some(&mask)).unwrap();
        assert_eq!(lowered.rows, mask.count());
        let (_, macs) = conv_lowered_counted(&f, &wt, Some(&b), &spec, Some(&mask), 0.0).unwrap();
        assert_eq!(macs - prev, count_macs(&spec, 10));
        prev = macs;
    }
}
