//! Property tests for structural invariants of the processing stages.

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semloc::bow::{build_dictionary, kmeans, DictionaryParams, KMeansParams};
use semloc::classify::{Distance, KnnModel, LabeledDataset};
use semloc::cloud::{estimate_normals, Point3, PointCloud, Rgb};
use semloc::features::{
    compute_cshot, compute_fpfh, compute_pfh, compute_pfhrgb, compute_shot, FeatureKind, FeatureSet,
};
use semloc::keypoints::{harris3d, uniform_sampling, HarrisConfig, KeypointSet, DEFAULT_US_RADIUS};
use semloc::pipeline::SceneSpec;

/// Surface of an axis-aligned box, snapped to a 2^-10 grid so that shifting
/// by a multiple of 1/4 is exact in floating point.
fn box_surface(seed: u64, half: [f64; 3], n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snap = |v: f64| (v * 1024.0).round() / 1024.0;
    let pts = (0..n)
        .map(|_| {
            let axis = rng.random_range(0..3);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut p = [0.0; 3];
            for (d, h) in half.iter().enumerate() {
                p[d] = if d == axis { sign * h } else { rng.random_range(-h..*h) };
            }
            Point3::with_color(snap(p[0]), snap(p[1]), snap(p[2]), Rgb::new(rng.random(), rng.random(), rng.random()))
        })
        .collect();
    PointCloud::new(pts).with_viewpoint(Point3::new(0.0, -1.0, 0.75))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normals_are_unit_and_face_the_viewpoint(
        seed in any::<u64>(),
        tilt in -1.2f64..1.2,
        noise in 0.0f64..0.004,
        vp in (-2.0f64..2.0, -2.0f64..2.0, 0.5f64..3.0),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..600)
            .map(|_| {
                let (x, y): (f64, f64) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
                Point3::new(x, y, tilt * x + rng.random_range(-noise..=noise))
            })
            .collect();
        let cloud = PointCloud::new(pts).with_viewpoint(Point3::new(vp.0, vp.1, vp.2));
        let with = estimate_normals(&cloud, 0.05).unwrap();
        let normals = with.normals.as_ref().unwrap();
        prop_assert_eq!(normals.len(), cloud.len());
        for (p, n) in with.points.iter().zip(normals) {
            if !n.is_valid() {
                continue;
            }
            prop_assert!((n.vector().norm() - 1.0).abs() < 1e-9);
            prop_assert!(n.vector().dot(&(with.viewpoint.coords() - p.coords())) >= 0.0);
        }
    }

    #[test]
    fn harris_keypoints_are_suppressed_and_move_with_the_cloud(
        seed in any::<u64>(),
        half in (0.08f64..0.25, 0.08f64..0.25, 0.08f64..0.25),
        shift in (-8i32..8, -8i32..8, -8i32..8),
    ) {
        let config = HarrisConfig::default();
        let cloud = box_surface(seed, [half.0, half.1, half.2], 2500);
        let offset = Vector3::new(f64::from(shift.0), f64::from(shift.1), f64::from(shift.2)) * 0.25;
        let moved = cloud.transformed(&nalgebra::Rotation3::identity(), &offset);
        let a = harris3d(&estimate_normals(&cloud, 0.04).unwrap(), &config).unwrap();
        let b = harris3d(&estimate_normals(&moved, 0.04).unwrap(), &config).unwrap();

        for (i, p) in a.keypoints.iter().enumerate() {
            prop_assert!(p.response.unwrap() > 0.0);
            for q in &a.keypoints[i + 1..] {
                prop_assert!(p.position.distance(&q.position) >= config.nms_radius);
            }
        }
        let sources = |s: &KeypointSet| {
            let mut v: Vec<usize> = s.keypoints.iter().map(|k| k.source.unwrap()).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(sources(&a), sources(&b));
        for ka in &a.keypoints {
            let kb = b.keypoints.iter().find(|k| k.source == ka.source).unwrap();
            let (ra, rb) = (ka.response.unwrap(), kb.response.unwrap());
            prop_assert!((ra - rb).abs() <= 1e-6 * ra.abs().max(1e-12), "{} vs {}", ra, rb);
        }
    }

    #[test]
    fn kept_plus_dropped_equals_keypoints(seed in any::<u64>(), n in 40usize..400, picks in 1usize..60) {
        // sparse enough that some supports hold a single point
        let cloud = box_surface(seed, [0.3, 0.3, 0.3], n);
        let cloud = estimate_normals(&cloud, 0.08).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let indices: Vec<usize> = (0..picks).map(|_| rng.random_range(0..cloud.len())).collect();
        let kps = KeypointSet::from_indices(&cloud, indices).unwrap();
        let sets: Vec<FeatureSet> = vec![
            compute_pfh(&cloud, &kps, 0.05).unwrap(),
            compute_pfhrgb(&cloud, &kps, 0.05).unwrap(),
            compute_fpfh(&cloud, &kps, 0.05).unwrap(),
            compute_shot(&cloud, &kps, 0.08).unwrap(),
            compute_cshot(&cloud, &kps, 0.08).unwrap(),
        ];
        for s in &sets {
            prop_assert_eq!(s.kept() + s.dropped, kps.len(), "{}", s.kind);
            prop_assert!(s.rows().all(|r| r.len() == s.kind.dimension() && r.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn knn_prediction_ignores_training_order(seed in any::<u64>(), n in 3usize..40, k in 1usize..10, chi in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let distance = if chi { Distance::ChiSquare } else { Distance::Euclidean };
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let model = KnnModel::new(LabeledDataset::new(classes.clone(), rows.clone(), labels.clone()).unwrap(), k, distance).unwrap();
        let shuffled = KnnModel::new(
            LabeledDataset::new(classes, order.iter().map(|&i| rows[i].clone()).collect(), order.iter().map(|&i| labels[i]).collect()).unwrap(),
            k,
            distance,
        )
        .unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            // continuous draws make exact distance ties a measure-zero event
            prop_assert_eq!(model.classify(&q).unwrap(), shuffled.classify(&q).unwrap());
        }
    }

    #[test]
    fn kmeans_separable_pairs_reach_the_enumerated_optimum(seed in any::<u64>(), n in 3usize..=10, gap in 4.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n)
            .flat_map(|i| {
                let c = if i % 2 == 0 { 0.0 } else { gap };
                [c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
            })
            .collect();
        let r = kmeans(&data, 2, &KMeansParams { tol: 0.0, max_iters: 1000, ..KMeansParams::new(2, seed) }).unwrap();
        for mask in 1u32..(1 << (n - 1)) {
            let start = partition_of(mask << 1, n);
            let after = lloyd_step(&data, &start);
            if after.iter().any(|&s| s != after[0]) {
                let inertia = partition_inertia(&data, &after);
                prop_assert!(r.inertia() <= inertia + 1e-9, "start {:?}: k-means {} > {}", start, r.inertia(), inertia);
            }
        }
    }

    #[test]
    fn kmeans_stops_at_a_lloyd_fixed_point(seed in any::<u64>(), n in 3usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = kmeans(&data, 2, &KMeansParams { tol: 0.0, max_iters: 1000, ..KMeansParams::new(2, seed) }).unwrap();
        prop_assert!(r.converged);
        let after = lloyd_step(&data, &r.assignments);
        prop_assert!(partition_inertia(&data, &after) >= r.inertia() - 1e-9);
        prop_assert!((partition_inertia(&data, &r.assignments) - r.inertia()).abs() < 1e-9);
    }
}

fn partition_of(mask: u32, n: usize) -> Vec<usize> {
    (0..n).map(|i| ((mask >> i) & 1) as usize).collect()
}

/// Per-side means of a 2-D, two-way partition; an empty side gets `None`.
fn side_means(data: &[f64], sides: &[usize]) -> [Option<[f64; 2]>; 2] {
    let mut out = [None; 2];
    for (s, slot) in out.iter_mut().enumerate() {
        let members: Vec<usize> = (0..sides.len()).filter(|&i| sides[i] == s).collect();
        if !members.is_empty() {
            let m = members.len() as f64;
            *slot = Some([
                members.iter().map(|&i| data[2 * i]).sum::<f64>() / m,
                members.iter().map(|&i| data[2 * i + 1]).sum::<f64>() / m,
            ]);
        }
    }
    out
}

fn partition_inertia(data: &[f64], sides: &[usize]) -> f64 {
    let means = side_means(data, sides);
    (0..sides.len())
        .map(|i| {
            let c = means[sides[i]].unwrap();
            (data[2 * i] - c[0]).powi(2) + (data[2 * i + 1] - c[1]).powi(2)
        })
        .sum()
}

/// Reassigns every point to the nearer of the two side means.
fn lloyd_step(data: &[f64], sides: &[usize]) -> Vec<usize> {
    let means = side_means(data, sides);
    let d2 = |i: usize, c: Option<[f64; 2]>| {
        c.map_or(f64::INFINITY, |c| (data[2 * i] - c[0]).powi(2) + (data[2 * i + 1] - c[1]).powi(2))
    };
    (0..sides.len()).map(|i| usize::from(d2(i, means[1]) < d2(i, means[0]))).collect()
}

#[test]
fn dictionary_is_independent_of_thread_count() {
    let spec = SceneSpec { points_per_cloud: 1500, ..SceneSpec::desk(17) };
    let sets: Vec<FeatureSet> = (0..spec.categories.len())
        .map(|c| {
            let cloud = estimate_normals(&spec.generate_cloud(c, 0), 0.05).unwrap();
            let kps = uniform_sampling(&cloud, DEFAULT_US_RADIUS).unwrap();
            compute_fpfh(&cloud, &kps, 0.06).unwrap()
        })
        .collect();
    let build = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| build_dictionary(&sets, &DictionaryParams::new(25, 99)).unwrap())
    };
    let one = build(1);
    assert_eq!(one, build(3));
    assert_eq!(one.to_bytes(), build(4).to_bytes());
    assert_eq!(one.kind, FeatureKind::Fpfh);
}

#[test]
fn uniform_sampling_yields_more_keypoints_than_harris() {
    let spec = SceneSpec::desk(23);
    for c in 0..spec.categories.len() {
        for i in 0..3 {
            let cloud = estimate_normals(&spec.generate_cloud(c, i), 0.05).unwrap();
            let us = uniform_sampling(&cloud, DEFAULT_US_RADIUS).unwrap().len();
            let harris = harris3d(&cloud, &HarrisConfig::default()).unwrap().len();
            assert!(us >= harris, "category {c} cloud {i}: {us} uniform vs {harris} Harris keypoints");
        }
    }
}
