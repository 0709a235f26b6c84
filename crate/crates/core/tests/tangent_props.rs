mod common;

use facebn::imaging::GrayImage;
use facebn::tangent::{
    augment_image, augmentation_alphas, tangent_augment, tangent_basis, tangent_fit, TangentBasis,
    TransformKind, TransformSet,
};
use proptest::prelude::*;

fn image(min: u8, max: u8) -> impl Strategy<Value = GrayImage> {
    (6usize..14, 6usize..14).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(min..=max, w * h).prop_map(move |px| GrayImage::new(w, h, px).unwrap())
    })
}

fn image_pair() -> impl Strategy<Value = (GrayImage, GrayImage)> {
    (6usize..14, 6usize..14).prop_flat_map(|(w, h)| {
        let px = || proptest::collection::vec(any::<u8>(), w * h);
        (px(), px()).prop_map(move |(a, b)| {
            (GrayImage::new(w, h, a).unwrap(), GrayImage::new(w, h, b).unwrap())
        })
    })
}

fn euclid(a: &GrayImage, b: &GrayImage) -> f64 {
    a.to_f64()
        .iter()
        .zip(b.to_f64())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn never_exceeds_euclidean((x, mu) in image_pair()) {
        let basis = tangent_basis(&x, &TransformSet::default()).unwrap();
        let fit = tangent_fit(&x, &mu, &basis).unwrap();
        prop_assert!(fit.distance >= 0.0);
        prop_assert!(fit.distance <= euclid(&x, &mu) + 1e-6);
    }

    #[test]
    fn basis_order_is_irrelevant((x, mu) in image_pair(), rot in 0usize..4) {
        let basis = tangent_basis(&x, &TransformSet::default()).unwrap();
        let mut vs = basis.vectors().to_vec();
        vs.rotate_left(rot);
        vs.swap(0, 3);
        let (w, h) = x.dims();
        let shuffled = TangentBasis::from_vectors(w, h, vs).unwrap();
        let a = tangent_fit(&x, &mu, &basis).unwrap().distance;
        let b = tangent_fit(&x, &mu, &shuffled).unwrap().distance;
        prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a), "{a} vs {b}");
    }

    #[test]
    fn larger_basis_never_hurts((x, mu) in image_pair()) {
        let small = TransformSet::parse("translate-x,rotate", "1,0.02").unwrap();
        let d_small = tangent_fit(&x, &mu, &tangent_basis(&x, &small).unwrap()).unwrap().distance;
        let d_full = tangent_fit(&x, &mu, &tangent_basis(&x, &TransformSet::default()).unwrap()).unwrap().distance;
        prop_assert!(d_full <= d_small + 1e-4, "{d_full} > {d_small}");
    }

    #[test]
    fn plus_then_minus_alpha_is_reversible(x in image(0, 255), axis in 0usize..4, m in 0.1f64..3.0) {
        let set = TransformSet::default();
        let basis = tangent_basis(&x, &set).unwrap();
        let mut alpha = vec![0.0; 4];
        alpha[axis] = m * set.steps()[axis];
        let neg: Vec<f64> = alpha.iter().map(|a| -a).collect();
        let fwd = tangent_augment(&x, &basis, &[alpha]).unwrap().remove(0);
        let back = tangent_augment(&fwd, &basis, &[neg]).unwrap().remove(0);
        for ((a, f), b) in x.pixels().iter().zip(fwd.pixels()).zip(back.pixels()) {
            if *f == 0 || *f == 255 {
                continue;
            }
            prop_assert!(a.abs_diff(*b) <= 1, "{a} -> {f} -> {b}");
        }
    }

    #[test]
    fn zero_alpha_is_identity(x in image(0, 255)) {
        let basis = tangent_basis(&x, &TransformSet::default()).unwrap();
        let out = tangent_augment(&x, &basis, &[vec![0.0; 4]]).unwrap();
        prop_assert_eq!(&out[0], &x);
    }

    #[test]
    fn self_distance_is_zero(x in image(0, 255)) {
        let basis = tangent_basis(&x, &TransformSet::default()).unwrap();
        prop_assert!(tangent_fit(&x, &x, &basis).unwrap().distance <= 1e-9);
    }
}

#[test]
fn augmentation_grid_counts_and_signs() {
    let set = TransformSet::default();
    let alphas = augmentation_alphas(&set, &[1.0, 2.0]).unwrap();
    assert_eq!(alphas.len(), 4 * 2 * 2);
    for a in &alphas {
        assert_eq!(a.iter().filter(|v| **v != 0.0).count(), 1);
    }
    assert_eq!(alphas[0], vec![1.0, 0.0, 0.0, 0.0]);
    assert_eq!(alphas[1], vec![-1.0, 0.0, 0.0, 0.0]);
    assert!((alphas[12][3] - 0.02).abs() < 1e-15);
    assert!((alphas[15][3] + 0.04).abs() < 1e-15);
    assert!(augmentation_alphas(&set, &[3.5]).is_err());
}

#[test]
fn translated_face_is_closer_in_tangent_distance() {
    // a smooth image shifted by one pixel is well explained by the
    // translation tangent
    let mut r = common::rng(11);
    let (w, h) = (20, 20);
    let base = common::smooth_pixels(w + 1, h, &mut r);
    let crop = |dx: usize| {
        GrayImage::from_fn(w, h, |x, y| base[y * (w + 1) + x + dx]).unwrap()
    };
    let (x, mu) = (crop(0), crop(1));
    let set = TransformSet::new(vec![(TransformKind::TranslateX, 1.0)]).unwrap();
    let td = tangent_fit(&x, &mu, &tangent_basis(&x, &set).unwrap()).unwrap().distance;
    assert!(td < 0.5 * euclid(&x, &mu), "td {td}, l2 {}", euclid(&x, &mu));
}

#[test]
fn augment_image_produces_the_grid() {
    let x = GrayImage::from_fn(8, 8, |x, y| (x * 20 + y * 5) as u8).unwrap();
    let out = augment_image(&x, &TransformSet::default(), &[1.0]).unwrap();
    assert_eq!(out.len(), 8);
    assert!(out.iter().all(|v| v.dims() == x.dims()));
}
