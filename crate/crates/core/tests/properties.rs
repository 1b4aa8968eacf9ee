use deotsu_core::de::{run_de, segment_de_otsu, DeConfig};
use deotsu_core::imaging::{decode_pgm, encode_pgm, GrayImage, GREY_LEVELS};
use deotsu_core::meta::repair;
use deotsu_core::metrics::{mse, psnr, ssim};
use deotsu_core::objectives::{
    between_class_variance, exhaustive_best_thresholds, kapur_entropy, ObjectiveKind, ObjectiveTable, ProbDist,
    ThresholdVector, DEFAULT_EXHAUSTIVE_BUDGET,
};
use deotsu_core::otsu::{cluster_model, multilevel_thresholds_tbd};
use proptest::prelude::*;

fn image_strategy(max: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

fn dist_strategy() -> impl Strategy<Value = ProbDist> {
    prop::collection::vec(0u32..50, GREY_LEVELS)
        .prop_filter("non-empty", |v| v.iter().any(|&c| c > 0))
        .prop_map(|v| {
            let mut counts = [0u64; GREY_LEVELS];
            for (c, x) in counts.iter_mut().zip(v) {
                *c = x as u64;
            }
            ProbDist::from_counts(&counts).unwrap()
        })
}

fn cuts_strategy() -> impl Strategy<Value = ThresholdVector> {
    prop::collection::btree_set(1u8..=255, 1..6).prop_map(|s| ThresholdVector::new(s.into_iter().collect()).unwrap())
}

/// Straight-from-definition between-class variance for a cut vector.
fn variance_by_hand(p: &ProbDist, cuts: &[u8]) -> f64 {
    let mut edges = vec![0usize];
    edges.extend(cuts.iter().map(|&c| c as usize));
    edges.push(GREY_LEVELS);
    let mu: f64 = (0..GREY_LEVELS).map(|i| i as f64 * p.get(i)).sum();
    edges
        .windows(2)
        .map(|e| {
            let w: f64 = (e[0]..e[1]).map(|i| p.get(i)).sum();
            if w == 0.0 {
                return 0.0;
            }
            let m = (e[0]..e[1]).map(|i| i as f64 * p.get(i)).sum::<f64>() / w;
            w * (m - mu) * (m - mu)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_round_trip(img in image_strategy(24)) {
        prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn histogram_counts_every_pixel(img in image_strategy(24)) {
        let h = img.histogram();
        prop_assert_eq!(h.total(), img.pixel_count() as u64);
        prop_assert_eq!(h.bins().iter().sum::<u64>(), h.total());
        for &v in img.pixels() {
            prop_assert!(h.count(v) > 0);
        }
    }

    #[test]
    fn table_matches_definitions(p in dist_strategy(), t in cuts_strategy()) {
        let by_hand = variance_by_hand(&p, t.as_slice());
        prop_assert!((between_class_variance(&p, &t) - by_hand).abs() <= 1e-9 * by_hand.max(1.0));
        let table = ObjectiveTable::new(&p, ObjectiveKind::BetweenClassVariance).unwrap();
        prop_assert!((table.evaluate(t.as_slice()) - by_hand).abs() <= 1e-9 * by_hand.max(1.0));
        let kapur = ObjectiveTable::new(&p, ObjectiveKind::KapurEntropy).unwrap();
        prop_assert!((kapur.evaluate(t.as_slice()) - kapur_entropy(&p, &t)).abs() <= 1e-9);
    }

    #[test]
    fn tbd_cuts_are_valid(p in dist_strategy(), k in 1usize..5) {
        match multilevel_thresholds_tbd(&p, k, 32) {
            Ok(t) => prop_assert_eq!(t.len(), k),
            Err(_) => prop_assert!(p.occupied_levels() < k + 1),
        }
    }

    #[test]
    fn repair_always_valid(raw in prop::collection::vec(-50.0f64..400.0, 1..12)) {
        let cuts = repair(&raw);
        prop_assert_eq!(cuts.len(), raw.len());
        prop_assert!(ThresholdVector::new(cuts).is_ok());
    }

    #[test]
    fn metrics_symmetric(a in image_strategy(12), seed in any::<u64>()) {
        let b = GrayImage::from_fn(a.width(), a.height(), |x, y| {
            (a.get(x, y) as u64 ^ seed.rotate_left((x * 7 + y) as u32)) as u8
        }).unwrap();
        prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        if a.width() >= 8 && a.height() >= 8 {
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-12);
            let s = ssim(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn psnr_falls_as_error_grows(img in image_strategy(16), d1 in 1u8..60, extra in 1u8..60) {
        let shift = |d: u8| GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let v = img.get(x, y);
            if v < 128 { v + d } else { v - d }
        }).unwrap();
        let near = shift(d1);
        let far = shift(d1 + extra);
        prop_assert!(psnr(&img, &near).unwrap() > psnr(&img, &far).unwrap());
    }
}

#[test]
fn exhaustive_matches_brute_force_on_sparse_histograms() {
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for _ in 0..30 {
        let mut counts = [0u64; GREY_LEVELS];
        for _ in 0..16 {
            counts[(next() % 256) as usize] += 1 + next() % 100;
        }
        let p = ProbDist::from_counts(&counts).unwrap();
        let mut best = (-1.0f64, (0u8, 0u8));
        for a in 1..=254u8 {
            for b in a + 1..=255u8 {
                let v = variance_by_hand(&p, &[a, b]);
                if v > best.0 + 1e-12 * best.0.abs() {
                    best = (v, (a, b));
                }
            }
        }
        let t = exhaustive_best_thresholds(&p, 2, ObjectiveKind::BetweenClassVariance, DEFAULT_EXHAUSTIVE_BUDGET)
            .unwrap();
        let got = variance_by_hand(&p, t.as_slice());
        assert!((got - best.0).abs() <= 1e-9 * best.0, "{t} vs {:?}", best.1);
    }
}

#[test]
fn de_runs_repeat_bit_for_bit() {
    let img = deotsu_core::synthetic::three_regions(40, 40, 10.0, 8);
    let cfg = DeConfig {
        seed: 77,
        ..DeConfig::default()
    };
    let a = segment_de_otsu(&img, 3, &cfg).unwrap();
    let b = segment_de_otsu(&img, 3, &cfg).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.best_fitness_per_generation, b.best_fitness_per_generation);
    assert!(a.best_fitness_per_generation.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn constant_image_is_reproduced() {
    let img = GrayImage::filled(16, 16, 100).unwrap();
    for levels in 2..=5 {
        let result = segment_de_otsu(&img, levels, &DeConfig::default()).unwrap();
        assert_eq!(result.image, img, "levels {levels}");
    }
    let t = ThresholdVector::new(vec![100, 101]).unwrap();
    assert_eq!(run_de(&img, &DeConfig::default(), &t).unwrap().image, img);
}

#[test]
fn noiseless_regions_map_to_their_values() {
    let img = deotsu_core::synthetic::three_regions(60, 20, 0.0, 0);
    let result = segment_de_otsu(&img, 2, &DeConfig::default()).unwrap();
    let model = cluster_model(&img, &result.thresholds);
    assert_eq!(model.centers(), &[40.0, 128.0, 220.0]);
    // ten generations leave residual spread around each center
    for (&got, &want) in result.image.pixels().iter().zip(img.pixels()) {
        assert!(got.abs_diff(want) <= 40, "{got} vs {want}");
    }
    let long = DeConfig {
        generations: 300,
        ..DeConfig::default()
    };
    assert_eq!(segment_de_otsu(&img, 2, &long).unwrap().image, img);
}
