use super::*;
use crate::association::canonicalize;
use proptest::prelude::*;

fn iso(sensor: SensorId, p: [f64; 2], sigma: f64) -> Track {
    Track::isotropic(sensor, p, sigma).unwrap()
}

fn sensors(n: u32) -> Vec<SensorInfo> {
    (1..=n).map(|i| SensorInfo::new(i, [0.0, 0.0])).collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// 2-D normal density written out from its definition.
fn normal_pdf(x: [f64; 2], mean: [f64; 2], var: f64) -> f64 {
    let d2 = (x[0] - mean[0]).powi(2) + (x[1] - mean[1]).powi(2);
    (-(d2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
}

/// Trapezoid quadrature of `int N(x_t; x, s_t I) N(x; c, s_c I) dx` over a wide square.
fn marginal_by_quadrature(x_t: [f64; 2], s_t: f64, c: [f64; 2], s_c: f64) -> f64 {
    let sd = s_c.sqrt();
    let half = 14.0 * sd;
    let n = 400;
    let h = 2.0 * half / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            let x = [c[0] - half + i as f64 * h, c[1] - half + j as f64 * h];
            let w =
                if i == 0 || i == n { 0.5 } else { 1.0 } * if j == 0 || j == n { 0.5 } else { 1.0 };
            acc += w * normal_pdf(x_t, x, s_t) * normal_pdf(x, c, s_c);
        }
    }
    acc * h * h
}

#[test]
fn fuse_singleton_is_identity() {
    let t = iso(1, [1.0, 2.0], 1.0);
    let (m, p) = fuse_cluster(&[&t]).unwrap();
    assert_eq!(m.as_slice(), &[1.0, 2.0]);
    assert_eq!(p, DMatrix::identity(2, 2));
}

#[test]
fn fuse_symmetric_pair() {
    let a = iso(1, [0.0, 0.0], 1.0);
    let b = iso(2, [2.0, 0.0], 1.0);
    let (m, p) = fuse_cluster(&[&a, &b]).unwrap();
    assert!((m[0] - 1.0).abs() < 1e-12 && m[1].abs() < 1e-12);
    assert!((p - DMatrix::identity(2, 2) * 0.5).amax() < 1e-12);
}

#[test]
fn fuse_unequal_covariances() {
    let a = iso(1, [0.0, 0.0], 1.0);
    let b = iso(2, [3.0, 0.0], 3f64.sqrt());
    let (m, p) = fuse_cluster(&[&a, &b]).unwrap();
    // 1/(1 + 1/3) = 0.75 ; mean = 0.75 * (0 + 3/3)
    assert!((p - DMatrix::identity(2, 2) * 0.75).amax() < 1e-12);
    assert!((m[0] - 0.75).abs() < 1e-12 && m[1].abs() < 1e-12);
}

#[test]
fn fuse_rejects_mixed_dimensions() {
    let a = iso(1, [0.0, 0.0], 1.0);
    let b = Track::new(2, DVector::zeros(5), DMatrix::identity(5, 5)).unwrap();
    assert!(matches!(
        fuse_cluster(&[&a, &b]),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(fuse_cluster(&[]), Err(Error::Empty(_))));
}

#[test]
fn singleton_proposed_spatial() {
    for sigma in [0.5, 1.0, 2.0] {
        let t = iso(1, [3.0, -1.0], sigma);
        let got = log_spatial_lik(&[&t], SpatialKind::Proposed);
        let want = (1.0 / (4.0 * std::f64::consts::PI * sigma * sigma)).ln();
        assert!(close(got, want, 1e-12), "{got} vs {want}");
        assert!(close(got, singleton_log_density(sigma), 1e-12));
        // generalized drops the center uncertainty: N(x; x, sigma^2 I)
        let gen = log_spatial_lik(&[&t], SpatialKind::Generalized);
        let want = (1.0 / (2.0 * std::f64::consts::PI * sigma * sigma)).ln();
        assert!(close(gen, want, 1e-12));
    }
    assert!((0.079577f64.ln() - singleton_log_density(1.0)).abs() < 1e-5);
}

#[test]
fn pair_proposed_spatial() {
    let a = iso(1, [0.0, 0.0], 1.0);
    let b = iso(2, [2.0, 0.0], 1.0);
    let got = log_spatial_lik(&[&a, &b], SpatialKind::Proposed);
    let oracle =
        (normal_pdf([0.0, 0.0], [1.0, 0.0], 1.5) * normal_pdf([2.0, 0.0], [1.0, 0.0], 1.5)).ln();
    assert!(close(got, oracle, 1e-12));
    assert!((got.exp() - 0.0057800).abs() < 5e-8);
}

#[test]
fn euclidean_coincident_is_zero() {
    let a = iso(1, [4.0, 4.0], 1.0);
    let b = iso(2, [4.0, 4.0], 2.0);
    assert_eq!(log_spatial_lik(&[&a, &b], SpatialKind::Euclidean), 0.0);
    let c = iso(3, [7.0, 8.0], 2.0);
    assert!(close(
        log_spatial_lik(&[&a, &c], SpatialKind::Euclidean),
        -5.0,
        1e-12
    ));
}

#[test]
fn equal_covariance_reduction_matches_quadrature() {
    let sigma = 1.3;
    let s2 = sigma * sigma;
    let pts = [[0.0, 0.0], [1.2, -0.4], [0.3, 0.9], [-0.5, 0.2]];
    for n in 1..=pts.len() {
        let tracks: Vec<Track> = pts[..n]
            .iter()
            .enumerate()
            .map(|(i, p)| iso(i as u32, *p, sigma))
            .collect();
        let refs: Vec<&Track> = tracks.iter().collect();
        let got = log_spatial_lik(&refs, SpatialKind::Proposed);

        let c = [
            pts[..n].iter().map(|p| p[0]).sum::<f64>() / n as f64,
            pts[..n].iter().map(|p| p[1]).sum::<f64>() / n as f64,
        ];
        let quad: f64 = pts[..n]
            .iter()
            .map(|p| marginal_by_quadrature(*p, s2, c, s2 / n as f64).ln())
            .sum();
        assert!(close(got, quad, 1e-9), "n={n}: {got} vs {quad}");

        // closed form: each member ~ N(x_c, sigma^2 (1 + 1/n) I)
        let v = s2 * (1.0 + 1.0 / n as f64);
        let ss: f64 = pts[..n]
            .iter()
            .map(|p| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
            .sum();
        let closed = -(n as f64) * (2.0 * std::f64::consts::PI * v).ln() - ss / (2.0 * v);
        assert!(close(got, closed, 1e-12));
    }
}

#[test]
fn cardinality_examples() {
    let x = Vector2::zeros();
    let got = log_cardinality_lik(
        &[1, 2, 3],
        &sensors(5),
        &x,
        &DetectionModel::fixed(0.8),
        None,
    )
    .unwrap();
    assert!(close(got, 0.02048f64.ln(), 1e-12));

    let got =
        log_cardinality_lik(&[1], &sensors(2), &x, &DetectionModel::fixed(1.0), None).unwrap();
    assert!(close(got, (0.97f64 * 0.03).ln(), 1e-12));

    let got =
        log_cardinality_lik(&[1], &sensors(1), &x, &DetectionModel::fixed(0.5), None).unwrap();
    assert!(close(got, 0.5f64.ln(), 1e-12));
}

#[test]
fn cluster_lik_composition() {
    let p_d = 0.7;
    let tracks = vec![
        iso(1, [1.0, 1.0], 1.0),
        iso(1, [5.0, 1.0], 1.0),
        iso(2, [1.5, 1.0], 1.0),
    ];
    let sens = sensors(4);
    let model = LikelihoodModel::new(DetectionModel::fixed(p_d), SpatialKind::Proposed);
    let scene = Scene::new(&tracks, &sens, &model).unwrap();

    let want = p_d.ln() + 3.0 * (1.0 - p_d).ln() + singleton_log_density(1.0);
    assert!(close(scene.log_cluster_lik(&[0]), want, 1e-12));

    assert_eq!(scene.log_cluster_lik(&[0, 1]), f64::NEG_INFINITY);

    let pair = scene.log_cluster_lik(&[0, 2]);
    let spatial = log_spatial_lik(&[&tracks[0], &tracks[2]], SpatialKind::Proposed);
    assert!(close(
        pair,
        2.0 * p_d.ln() + 2.0 * (1.0 - p_d).ln() + spatial,
        1e-12
    ));
}

#[test]
fn full_sensor_cluster_has_no_miss_factor() {
    let tracks = vec![iso(1, [0.0, 0.0], 1.0), iso(2, [0.0, 0.0], 1.0)];
    let sens = sensors(2);
    let model = LikelihoodModel::new(DetectionModel::fixed(0.6), SpatialKind::Generalized);
    let scene = Scene::new(&tracks, &sens, &model).unwrap();
    let spatial = log_spatial_lik(&[&tracks[0], &tracks[1]], SpatialKind::Generalized);
    assert!(close(
        scene.log_cluster_lik(&[0, 1]),
        2.0 * 0.6f64.ln() + spatial,
        1e-12
    ));
}

#[test]
fn euclidean_cluster_omits_cardinality() {
    let tracks = vec![iso(1, [0.0, 0.0], 1.0), iso(2, [2.0, 0.0], 1.0)];
    let sens = sensors(3);
    let model = LikelihoodModel::new(DetectionModel::fixed(0.6), SpatialKind::Euclidean);
    let scene = Scene::new(&tracks, &sens, &model).unwrap();
    assert!(close(scene.log_cluster_lik(&[0, 1]), -2.0, 1e-12));
    assert!(close(scene.pairwise_cost(0, 1), 2.0, 1e-12));
}

#[test]
fn joint_decomposes_over_clusters() {
    let tracks = vec![
        iso(1, [0.0, 0.0], 1.0),
        iso(2, [9.0, 0.0], 1.0),
        iso(3, [0.4, 0.2], 1.0),
    ];
    let sens = sensors(3);
    let model = LikelihoodModel::new(DetectionModel::fixed(0.8), SpatialKind::Proposed);
    let scene = Scene::new(&tracks, &sens, &model).unwrap();
    let a = JointAssociation::from_raw(vec![1, 2, 1]);
    let want = scene.log_cluster_lik(&[0, 2]) + scene.log_cluster_lik(&[1]);
    assert_eq!(scene.log_joint_lik(&a), want);
    let singles = JointAssociation::singletons(3);
    let want: f64 = (0..3).map(|t| scene.log_cluster_lik(&[t])).sum();
    assert_eq!(scene.log_joint_lik(&singles), want);
    assert_eq!(
        log_joint_lik(&a, &tracks, &sens, &model).unwrap(),
        scene.log_joint_lik(&a)
    );
}

#[test]
fn capped_detection_keeps_partial_clusters_finite() {
    let tracks = vec![iso(1, [0.0, 0.0], 1.0)];
    let sens = sensors(6);
    let model = LikelihoodModel::new(DetectionModel::fixed(1.0), SpatialKind::Proposed);
    let scene = Scene::new(&tracks, &sens, &model).unwrap();
    assert!(scene.log_cluster_lik(&[0]).is_finite());
}

#[test]
fn distance_based_cardinality_uses_fused_center() {
    let tracks = vec![iso(1, [0.0, 0.0], 1.0)];
    let sens = vec![
        SensorInfo::new(1, [0.0, 0.0]).with_range(85.0).unwrap(),
        SensorInfo::new(2, [200.0, 0.0]).with_range(85.0).unwrap(),
    ];
    let model = LikelihoodModel::new(
        DetectionModel::collective_perception_default(),
        SpatialKind::Proposed,
    );
    let scene = Scene::new(&tracks, &sens, &model).unwrap();
    let want = 0.97f64.ln() + (1.0 - 0.15f64).ln() + singleton_log_density(1.0);
    assert!(close(scene.log_cluster_lik(&[0]), want, 1e-12));
    let direct =
        log_cardinality_lik(&[1], &sens, &Vector2::zeros(), &model.detection, None).unwrap();
    assert!(close(direct, 0.97f64.ln() + 0.85f64.ln(), 1e-12));
}

#[test]
fn scene_rejects_unknown_sensor() {
    let tracks = vec![iso(9, [0.0, 0.0], 1.0)];
    let sens = sensors(2);
    let model = LikelihoodModel::new(DetectionModel::fixed(0.5), SpatialKind::Proposed);
    assert!(matches!(
        Scene::new(&tracks, &sens, &model),
        Err(Error::UnknownSensor {
            track: 0,
            sensor: 9
        })
    ));
}

#[test]
fn singular_sum_gives_neg_inf() {
    let zero = Matrix2::zeros();
    assert_eq!(
        log_gauss2(&Vector2::zeros(), &Vector2::zeros(), &zero),
        f64::NEG_INFINITY
    );
}

proptest! {
    #[test]
    fn joint_lik_label_invariant(
        labels in prop::collection::vec(1u32..4, 5),
        shift in 1u32..20,
        coords in prop::collection::vec(-5.0f64..5.0, 10),
    ) {
        let tracks: Vec<Track> = (0..5).map(|i| iso(i as u32 + 1, [coords[2 * i], coords[2 * i + 1]], 1.0)).collect();
        let sens = sensors(5);
        let model = LikelihoodModel::new(DetectionModel::fixed(0.7), SpatialKind::Proposed);
        let scene = Scene::new(&tracks, &sens, &model).unwrap();
        let raw = JointAssociation::from_raw(labels.clone());
        let relabelled = JointAssociation::from_raw(labels.iter().map(|l| (l * 7 + shift) % 101 + 1).collect());
        let canon = canonicalize(&labels);
        let a = scene.log_joint_lik(&raw);
        prop_assert!((a - scene.log_joint_lik(&canon)).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!((a - scene.log_joint_lik(&relabelled)).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn fused_cov_is_tighter_than_members(
        s1 in 0.5f64..3.0, s2 in 0.5f64..3.0,
        x in -4.0f64..4.0,
    ) {
        let a = iso(1, [0.0, 0.0], s1);
        let b = iso(2, [x, 1.0], s2);
        let (m, p) = fuse_cluster(&[&a, &b]).unwrap();
        prop_assert!(p[(0, 0)] <= s1 * s1 && p[(0, 0)] <= s2 * s2);
        prop_assert!(m[0] >= x.min(0.0) - 1e-12 && m[0] <= x.max(0.0) + 1e-12);
    }
}
