mod common;

use candle_core::{DType, Device, Tensor};
use exprgen::data::{assign_action_coefficients, convex_hull, mouth_mask, FrameImage, LandmarkSet};
use exprgen::evaluation::{continuity_curve_points, smoothness_stats, spearman};
use exprgen::model::{aggregate_features, ActionVector, FeatureHierarchy};
use exprgen::objectives::{
    generator_objective, landmark_distance, recon_l1, temporal_neighbors, temporal_reg, LossTerms, LossWeights,
    TemporalRegConfig,
};
use exprgen::synthesis::{linear_schedule, transfer_schedule, unimodal_schedule, ActionSchedule};
use exprgen::train::{discriminator_losses, generator_losses, Ablations, Batch, GeneratorForward};
use proptest::prelude::*;

fn points(n: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| [x, y]), n)
}

fn degree() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn frame(size: usize) -> impl Strategy<Value = FrameImage> {
    prop::collection::vec(0.0..=1.0f32, size * size * 3).prop_map(move |p| FrameImage::new(size, size, p).unwrap())
}

fn terms() -> impl Strategy<Value = LossTerms> {
    (0.0..10.0f64, 0.0..10.0f64, 0.0..1.0f64, 0.0..100.0f64, 0.0..1.0f64).prop_map(|(g, l, r, m, t)| LossTerms {
        adv_global: g,
        adv_local: l,
        recon: r,
        landmark: m,
        temporal: t,
    })
}

fn weights() -> impl Strategy<Value = LossWeights> {
    prop::array::uniform5(0.0..100.0f64).prop_map(|w| LossWeights {
        w_global: w[0],
        w_local: w[1],
        w_recon: w[2],
        w_landmark: w[3],
        w_temporal: w[4],
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Inside-or-on-boundary test against a counter-clockwise hull.
fn in_convex(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    (0..hull.len()).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-9
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn landmark_distance_is_a_metric(a in points(68), b in points(68), c in points(68)) {
        let d = |x: &[[f64; 2]], y: &[[f64; 2]]| landmark_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert!(close(d(&a, &b), d(&b, &a)));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    #[test]
    fn recon_l1_is_nonnegative_and_symmetric(a in frame(4), b in frame(4)) {
        let ab = recon_l1(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!(close(ab, recon_l1(&b, &a).unwrap()));
        prop_assert_eq!(recon_l1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn temporal_reg_is_nonnegative(values in prop::collection::vec(degree(), 1..4), delta in 0.01..=1.0f64) {
        let a = ActionVector::new(values).unwrap();
        // Any deterministic map from action vectors to frames.
        let render = |v: &ActionVector| {
            let s: f64 = v.values().iter().enumerate().map(|(i, x)| x * (i + 1) as f64).sum();
            Ok(FrameImage::filled(2, 2, [(s / 4.0).min(1.0) as f32, 0.5, (1.0 - s / 8.0).max(0.0) as f32]))
        };
        let r = temporal_reg(render, &a, &TemporalRegConfig { delta_a: delta }).unwrap();
        prop_assert!(r >= 0.0);
        // A generator that ignores the action is perfectly smooth.
        let flat = |_: &ActionVector| Ok(FrameImage::filled(2, 2, [0.3, 0.3, 0.3]));
        prop_assert_eq!(temporal_reg(flat, &a, &TemporalRegConfig { delta_a: delta }).unwrap(), 0.0);
    }

    #[test]
    fn temporal_neighbors_stay_in_range(values in prop::collection::vec(degree(), 1..5), delta in 0.01..=1.0f64) {
        let a = ActionVector::new(values).unwrap();
        let (lo, hi) = temporal_neighbors(&a, delta).unwrap();
        for ((x, l), h) in a.values().iter().zip(lo.values()).zip(hi.values()) {
            prop_assert!((0.0..=1.0).contains(l) && (0.0..=1.0).contains(h));
            prop_assert!(l <= x && x <= h);
        }
    }

    #[test]
    fn objective_is_linear_in_weights(t in terms(), w1 in weights(), w2 in weights(), s in 0.0..10.0f64) {
        let sum = LossWeights {
            w_global: w1.w_global + s * w2.w_global,
            w_local: w1.w_local + s * w2.w_local,
            w_recon: w1.w_recon + s * w2.w_recon,
            w_landmark: w1.w_landmark + s * w2.w_landmark,
            w_temporal: w1.w_temporal + s * w2.w_temporal,
        };
        let lhs = generator_objective(&t, &sum).unwrap();
        let rhs = generator_objective(&t, &w1).unwrap() + s * generator_objective(&t, &w2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn coefficients_are_monotone_from_zero_to_one(t in 2usize..200) {
        let c = assign_action_coefficients(t).unwrap();
        prop_assert_eq!(c.len(), t);
        prop_assert_eq!(c[0], 0.0);
        prop_assert_eq!(c[t - 1], 1.0);
        prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn schedules_are_valid(count in 3usize..40, n in 2usize..6, e in 0usize..6, f in 0usize..6) {
        let emotions = common::emotions(n);
        let names = emotions.names();
        let (e, f) = (&names[e % n], &names[f % n]);
        let lin = linear_schedule(&emotions, e, count).unwrap();
        prop_assert_eq!(lin.len(), count);
        let col = lin.column(emotions.get(e).unwrap().index - 1);
        prop_assert!(col.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(col[count - 1], 1.0);

        let uni = unimodal_schedule(&emotions, e, count).unwrap();
        let col = uni.column(emotions.get(e).unwrap().index - 1);
        prop_assert_eq!(col[0], 0.0);
        prop_assert_eq!(col[count - 1], 0.0);
        prop_assert!(close(col.iter().copied().fold(0.0, f64::max), 1.0));
        for i in 0..count {
            prop_assert_eq!(col[i], col[count - 1 - i]);
        }

        if e != f {
            let tr = transfer_schedule(&emotions, e, f, count).unwrap();
            for step in tr.steps() {
                prop_assert!(close(step.values().iter().sum::<f64>(), 1.0));
            }
        } else {
            prop_assert!(transfer_schedule(&emotions, e, f, count).is_err());
        }

        for s in [&lin, &uni] {
            for step in s.steps() {
                prop_assert_eq!(step.len(), n);
                prop_assert!(step.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn schedule_text_round_trips(rows in prop::collection::vec(prop::collection::vec(degree(), 3), 1..12)) {
        let s = ActionSchedule::from_rows(rows.clone()).unwrap();
        let back = ActionSchedule::parse(&s.to_text()).unwrap();
        let got: Vec<Vec<f64>> = back.steps().iter().map(|a| a.values().to_vec()).collect();
        prop_assert_eq!(got, rows);
    }

    #[test]
    fn out_of_range_degrees_are_rejected(bad in prop_oneof![-10.0..-1e-9f64, 1.0 + 1e-9..10.0f64]) {
        prop_assert!(ActionVector::new(vec![0.5, bad]).is_err());
    }

    #[test]
    fn mask_matches_hull_membership(mouth in points(20), h in 4usize..40, w in 4usize..40) {
        let mut pts = vec![[0.0, 0.0]; 48];
        pts.extend(mouth.iter().map(|[x, y]| [x.abs() % w as f64, y.abs() % h as f64]));
        let lm = LandmarkSet::new(pts.clone()).unwrap();
        let hull = convex_hull(&pts[48..]);
        prop_assume!(hull.len() >= 3);
        let mask = mouth_mask(&lm, h, w).unwrap();
        for y in 0..h {
            for x in 0..w {
                prop_assert_eq!(mask.get(y, x), in_convex(&hull, [x as f64, y as f64]), "pixel ({}, {})", x, y);
            }
        }
    }

    #[test]
    fn continuity_curve_starts_at_zero(seq in prop::collection::vec(points(68), 2..8)) {
        let refs: Vec<&[[f64; 2]]> = seq.iter().map(|p| p.as_slice()).collect();
        let curve = continuity_curve_points(&refs).unwrap();
        prop_assert_eq!(curve.distances[0], 0.0);
        prop_assert!(curve.distances.iter().all(|d| *d >= 0.0));
        let stats = smoothness_stats(&curve).unwrap();
        prop_assert!(stats.max_decrease <= stats.max_jump);
        if let Some(r) = stats.rank_corr {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn spearman_of_increasing_map_is_one(xs in prop::collection::hash_set(-1000i32..1000, 3..30)) {
        let x: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        prop_assert!(close(spearman(&x, &y).unwrap(), 1.0));
    }
}

fn hierarchy(seed: u64, shapes: &[(usize, usize)]) -> FeatureHierarchy {
    FeatureHierarchy::new(
        shapes
            .iter()
            .enumerate()
            .map(|(i, &(c, s))| Tensor::randn(0.0f64, 1.0, (1, c, s, s), &Device::Cpu).unwrap() * (seed + i as u64 + 1) as f64)
            .map(|t| t.unwrap())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregation_is_affine_in_each_degree(a in prop::collection::vec(degree(), 3), t in degree(), k in 0usize..3) {
        let shapes = [(4, 8), (8, 4), (8, 2)];
        let base = hierarchy(0, &shapes);
        let residuals: Vec<_> = (1..=3).map(|i| hierarchy(i, &shapes)).collect();
        let with = |v: f64| {
            let mut a = a.clone();
            a[k] = v;
            aggregate_features(&base, &residuals, &ActionVector::new(a).unwrap()).unwrap()
        };
        let (ft, f0, f1) = (with(t), with(0.0), with(1.0));
        for l in 0..shapes.len() {
            let mix = ((&f0.levels[l] * (1.0 - t)).unwrap() + (&f1.levels[l] * t).unwrap()).unwrap();
            let diff = (&ft.levels[l] - &mix).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
            prop_assert!(diff < 1e-12, "level {} differs by {}", l, diff);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn local_terms_ignore_pixels_outside_mask(seed in 0u64..1000, cx in 4.0..12.0f64, cy in 4.0..12.0f64) {
        let discs = common::toy_discriminators(1, DType::F32, seed);
        let mut pts = vec![[1.0, 1.0]; 48];
        pts.extend((0..20).map(|i| {
            let t = i as f64 / 20.0 * std::f64::consts::TAU;
            [cx + 3.0 * t.cos(), cy + 2.0 * t.sin()]
        }));
        let mask = mouth_mask(&LandmarkSet::new(pts).unwrap(), 16, 16).unwrap();
        let mask_t = Tensor::from_vec(
            mask.values().iter().map(|&v| v as f32).collect::<Vec<_>>(),
            (1, 1, 16, 16),
            &Device::Cpu,
        )
        .unwrap();
        let outside = mask_t.affine(-1.0, 1.0).unwrap();
        let batch = |targets: Tensor| Batch {
            inputs: targets.clone(),
            targets,
            masks: mask_t.clone(),
            landmarks: Tensor::zeros((1, 68, 2), DType::F32, &Device::Cpu).unwrap(),
            degrees: vec![None],
            minus: vec![None],
            plus: vec![None],
        };
        let real = common::random_tensor(16, seed + 1, DType::F32);
        let fake = common::random_tensor(16, seed + 2, DType::F32);
        // Replace everything outside the mouth with fresh noise.
        let scramble = |t: &Tensor, s: u64| {
            let noise = common::random_tensor(16, s, DType::F32);
            (t.broadcast_mul(&mask_t).unwrap() + noise.broadcast_mul(&outside).unwrap()).unwrap()
        };
        let (real2, fake2) = (scramble(&real, seed + 3), scramble(&fake, seed + 4));

        let local = |fake: &Tensor, real: Tensor| {
            common::values(&discriminator_losses(&discs, fake, &batch(real), true).unwrap().1.unwrap())[0]
        };
        prop_assert_eq!(local(&fake, real.clone()), local(&fake2, real2.clone()));

        let gen_local = |fake: &Tensor, real: Tensor| {
            let fwd = GeneratorForward {
                frames: fake.clone(),
                landmarks: Tensor::zeros((1, 68, 2), DType::F32, &Device::Cpu).unwrap(),
                neighbors: None,
            };
            let l = generator_losses(&discs, &fwd, &batch(real), &Ablations::default()).unwrap();
            common::values(&l.adv_local.unwrap())[0]
        };
        prop_assert_eq!(gen_local(&fake, real.clone()), gen_local(&fake2, real2));
    }
}
