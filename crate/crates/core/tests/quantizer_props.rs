mod common;

use facebn::features::BlockFeatureVector;
use facebn::quantizer::{kmeans_fit, Codebook, KMeansParams, Point, QuantizerError};
use proptest::prelude::*;
use rand::Rng;

fn blobs(seed: u64, count: usize) -> Vec<Point> {
    let mut r = common::rng(seed);
    let centers: Vec<Point> = (0..6).map(|_| std::array::from_fn(|_| r.gen_range(0.0..200.0))).collect();
    (0..count)
        .map(|_| {
            let c = centers[r.gen_range(0..centers.len())];
            std::array::from_fn(|f| c[f] + r.gen_range(-5.0..5.0))
        })
        .collect()
}

fn point() -> impl Strategy<Value = Point> {
    proptest::array::uniform6(-100.0f64..100.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inertia_never_rises(points in proptest::collection::vec(point(), 12..120), k in 2usize..6, seed in 0u64..1000) {
        let fit = kmeans_fit(&points, &KMeansParams { k, seed, ..KMeansParams::default() }).unwrap();
        for w in fit.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        prop_assert_eq!(fit.codebook.k(), k);
    }

    #[test]
    fn same_seed_same_codebook(seed in 0u64..1000) {
        let points = blobs(seed, 200);
        let params = KMeansParams { k: 5, seed, ..KMeansParams::default() };
        prop_assert_eq!(kmeans_fit(&points, &params).unwrap(), kmeans_fit(&points, &params).unwrap());
    }
}

#[test]
fn assignment_matches_exhaustive_scan() {
    let train = blobs(1, 400);
    let fit = kmeans_fit(&train, &KMeansParams { k: 8, seed: 3, ..KMeansParams::default() }).unwrap();
    let cb = &fit.codebook;
    let st = &cb.standardization;
    let probe = blobs(2, 1000);
    for p in &probe {
        let z: Point = std::array::from_fn(|f| (p[f] - st.mean[f]) / st.std[f]);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in cb.centroids.iter().enumerate() {
            let d: f64 = (0..6).map(|f| (z[f] - c[f]).powi(2)).sum();
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        assert_eq!(cb.assign(p), best);
    }
}

#[test]
fn centroids_land_on_well_separated_blobs() {
    let mut r = common::rng(4);
    let centers = [[0.0; 6], [100.0; 6], [-100.0; 6]];
    let points: Vec<Point> = (0..300)
        .map(|i| std::array::from_fn(|f| centers[i % 3][f] + r.gen_range(-1.0..1.0)))
        .collect();
    let fit = kmeans_fit(&points, &KMeansParams { k: 3, ..KMeansParams::default() }).unwrap();
    assert!(fit.converged);
    let labels: Vec<usize> = points.iter().map(|p| fit.codebook.assign(p)).collect();
    for i in 0..300 {
        assert_eq!(labels[i], labels[i % 3], "point {i}");
    }
    assert_ne!(labels[0], labels[1]);
    assert_ne!(labels[1], labels[2]);
}

#[test]
fn too_few_distinct_points() {
    let points = vec![[1.0; 6]; 50];
    assert_eq!(
        kmeans_fit(&points, &KMeansParams { k: 2, ..KMeansParams::default() }),
        Err(QuantizerError::Data { needed: 2, found: 1 })
    );
}

#[test]
fn codebook_text_round_trip_and_labels() {
    let fit = kmeans_fit(&blobs(5, 150), &KMeansParams { k: 4, ..KMeansParams::default() }).unwrap();
    let back = Codebook::from_text(&fit.codebook.to_text()).unwrap();
    assert_eq!(back, fit.codebook);
    let descs: Vec<BlockFeatureVector> = blobs(6, 9).into_iter().map(BlockFeatureVector::from_array).collect();
    let lv = back.labelize(&descs).unwrap();
    assert!(lv.0.iter().all(|&l| (l as usize) < 4));
    assert_eq!(back.labelize(&descs[..8]), Err(QuantizerError::Length(8)));
}
