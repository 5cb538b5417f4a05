mod common;

use proptest::prelude::*;

use sdrcnn_core::io::{decode_raster, encode_raster, Dtype, RunConfig};
use sdrcnn_core::metrics::{self, Metric, MetricReport, Q_BLOCK};
use sdrcnn_core::model::{enumerate_param_count, param_count, SdrcnnConfig, Variant};
use sdrcnn_core::train::smooth_loss;
use sdrcnn_core::wald::{mtf_blur, split, Normalization};
use sdrcnn_core::Raster;

fn raster_strategy(values: impl Strategy<Value = f64> + Clone) -> impl Strategy<Value = Raster> {
    (1usize..5, 1usize..12, 1usize..12).prop_flat_map(move |(b, h, w)| {
        proptest::collection::vec(values.clone(), b * h * w).prop_map(move |d| Raster::from_vec(b, h, w, d).unwrap())
    })
}

fn bits(r: &Raster) -> Vec<u64> {
    r.data().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn f64_raster_bytes_round_trip(r in raster_strategy(any::<f64>())) {
        let bytes = encode_raster(&r, Dtype::F64).unwrap();
        let (back, dtype, used) = decode_raster(&bytes, "mem".as_ref()).unwrap();
        prop_assert_eq!(dtype, Dtype::F64);
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(back.dims(), r.dims());
        prop_assert_eq!(bits(&back), bits(&r));
    }

    #[test]
    fn f32_raster_bytes_round_trip(r in raster_strategy(any::<f32>().prop_map(f64::from))) {
        let bytes = encode_raster(&r, Dtype::F32).unwrap();
        let (back, _, _) = decode_raster(&bytes, "mem".as_ref()).unwrap();
        prop_assert_eq!(bits(&back), bits(&r));
    }

    #[test]
    fn truncated_raster_is_rejected(r in raster_strategy(-1.0f64..1.0), cut in 1usize..16) {
        let bytes = encode_raster(&r, Dtype::F64).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode_raster(&bytes[..keep], "mem".as_ref()).is_err());
    }

    #[test]
    fn split_is_a_partition_with_rounded_sizes(n in 0usize..400, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("{i}")).collect();
        let s = split(&ids, seed);
        prop_assert_eq!(s.train.len(), (0.7 * n as f64).round() as usize);
        prop_assert_eq!(s.val.len(), ((0.2 * n as f64).round() as usize).min(n - s.train.len()));
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        all.sort();
        let mut want = ids.clone();
        want.sort();
        prop_assert_eq!(all, want);
        prop_assert_eq!(split(&ids, seed), s);
    }

    #[test]
    fn param_formula_matches_enumeration(
        bands in 1usize..10, width in 1usize..40, expansion in 1usize..7,
        blocks in 1usize..5, k in 0usize..4, flags in 0u8..8,
    ) {
        let cfg = SdrcnnConfig {
            bands,
            width,
            expansion,
            n_residual_blocks: blocks,
            kernel: 2 * k + 1,
            upsample_factor: 4,
            variant: Variant {
                spectral_mapping: flags & 1 == 0,
                batch_norm: flags & 2 != 0,
                extra_relu: flags & 4 != 0,
            },
        };
        prop_assert_eq!(param_count(&cfg).unwrap(), enumerate_param_count(&cfg).unwrap());
    }

    #[test]
    fn smoothing_preserves_length_and_bounds(
        raw in proptest::collection::vec(0.0f64..10.0, 0..300), window in 1usize..120,
    ) {
        let s = smooth_loss(&raw, window);
        prop_assert_eq!(s.len(), raw.len());
        prop_assert_eq!(&s, &common::smooth(&raw, window));
        for (i, v) in s.iter().enumerate() {
            let lo = i.saturating_sub(window - 1);
            let (mn, mx) = raw[lo..=i].iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
            prop_assert!(*v >= mn - 1e-12 && *v <= mx + 1e-12);
        }
        prop_assert_eq!(smooth_loss(&raw, 1), raw);
    }

    #[test]
    fn metrics_stay_in_range(seed in any::<u64>(), h in 4usize..24, w in 4usize..24) {
        let mut r = common::rng(seed);
        let x = common::random_raster(&mut r, 4, h, w, 0.01, 1.0);
        let y = common::random_raster(&mut r, 4, h, w, 0.01, 1.0);
        let sam = metrics::sam(&x, &y).unwrap();
        prop_assert!((0.0..=180.0).contains(&sam));
        prop_assert!(metrics::ergas(&x, &y, 4.0).unwrap() > 0.0);
        let scc = metrics::scc(&x, &y).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&scc));
        let q = metrics::q2n(&x, &y, Q_BLOCK, Q_BLOCK).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&q));
        let swapped = metrics::q2n(&y, &x, Q_BLOCK, Q_BLOCK).unwrap();
        prop_assert!((q - swapped).abs() < 1e-12);
        // SAM ignores per-pixel scaling by a power of two
        prop_assert_eq!(metrics::sam(&x.map(|v| v * 4.0), &y).unwrap(), sam);
    }

    #[test]
    fn blur_preserves_constants(c in -5.0f64..5.0, g in 0.05f64..0.95, size in 1usize..24) {
        let flat = Raster::filled(1, size, size, c);
        let out = mtf_blur(&flat, g, 4).unwrap();
        prop_assert!(out.data().iter().all(|v| (v - c).abs() <= 1e-12 * c.abs().max(1.0)));
    }

    #[test]
    fn normalization_inverts(r in raster_strategy(-100.0f64..100.0)) {
        let n = Normalization::fit(&r);
        let back = n.invert(&n.apply(&r));
        prop_assert!(common::max_abs_diff(back.data(), r.data()) < 1e-9);
    }

    #[test]
    fn report_csv_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
        let mut rep = MetricReport::new("m");
        for (i, v) in values.iter().enumerate() {
            rep.push(format!("s{i}"), Metric::Sam, *v);
            rep.push(format!("s{i}"), Metric::Q2n, -v);
        }
        let back = MetricReport::from_csv(&rep.to_csv().unwrap()).unwrap();
        prop_assert_eq!(back, rep);
    }

    #[test]
    fn config_text_round_trips(seed in any::<u64>(), width in 1usize..80, lr in 1e-6f64..1e-1) {
        let mut cfg = RunConfig::default();
        cfg.set_seed(seed);
        cfg.set("model.width", &width.to_string()).unwrap();
        cfg.set("train.lr", &format!("{lr:?}")).unwrap();
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
