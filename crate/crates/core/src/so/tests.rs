use super::*;
use crate::association::association_is_valid;
use crate::likelihood::{DetectionModel, SpatialKind};
use rand::Rng;

fn iso(sensor: u32, p: [f64; 2]) -> Track {
    Track::isotropic(sensor, p, 1.0).unwrap()
}

fn sensors(n: u32) -> Vec<SensorInfo> {
    (1..=n).map(|i| SensorInfo::new(i, [0.0, 0.0])).collect()
}

fn model(p: f64) -> LikelihoodModel {
    LikelihoodModel::new(DetectionModel::fixed(p), SpatialKind::Proposed)
}

fn random_instance(rng: &mut SoRng, max_tracks: usize, n_sensors: u32) -> Vec<Track> {
    let n = rng.random_range(1..=max_tracks);
    (0..n)
        .map(|_| {
            let s = rng.random_range(1..=n_sensors);
            iso(s, [rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)])
        })
        .collect()
}

#[test]
fn remain_is_one_and_singleton_cannot_split() {
    let tracks = vec![iso(1, [0.0, 0.0]), iso(2, [1.0, 0.0])];
    let sens = sensors(2);
    let m = model(0.8);
    let scene = Scene::new(&tracks, &sens, &m).unwrap();
    let mut st = SoState::new(&scene, &JointAssociation::singletons(2), f64::INFINITY).unwrap();
    let w = st.action_weights(0);
    assert_eq!(w.actions[0], Action::Remain);
    assert_eq!(w.log_weights[0], 0.0);
    assert_eq!(w.weight(0), 1.0);
    assert_eq!(w.actions[1], Action::Split);
    assert_eq!(w.weight(1), 0.0);
}

#[test]
fn same_sensor_pair_only_remains() {
    let tracks = vec![iso(1, [0.0, 0.0]), iso(1, [0.5, 0.0])];
    let sens = sensors(1);
    let m = model(0.9);
    let scene = Scene::new(&tracks, &sens, &m).unwrap();
    let mut st = SoState::new(&scene, &JointAssociation::singletons(2), f64::INFINITY).unwrap();
    let w = st.action_weights(0);
    let p = w.probabilities();
    assert_eq!(p[0], 1.0);
    assert!(p[1..].iter().all(|&v| v == 0.0));
    let mut rng = SoRng::seed_from_u64(3);
    for _ in 0..20 {
        assert_eq!(w.sample(&mut rng), Action::Remain);
    }
}

#[test]
fn single_track_records_only_singleton() {
    let tracks = vec![iso(1, [0.0, 0.0])];
    let cfg = SoConfig::new(7, f64::INFINITY, 1, model(0.5));
    let h = run(&tracks, &sensors(3), &cfg).unwrap();
    assert_eq!(h.len(), 7);
    assert!(h.samples().iter().all(|s| s.association.labels() == [1]));
}

#[test]
fn far_apart_same_sensor_stays_split() {
    let tracks = vec![iso(1, [0.0, 0.0]), iso(1, [100.0, 0.0])];
    let cfg = SoConfig::new(20, f64::INFINITY, 5, model(0.7));
    let h = run(&tracks, &sensors(2), &cfg).unwrap();
    assert!(h.samples().iter().all(|s| s.association.labels() == [1, 2]));
}

#[test]
fn empty_input_gives_empty_set() {
    let cfg = SoConfig::new(3, 6.0, 1, model(0.5));
    assert!(run(&[], &sensors(2), &cfg).unwrap().is_empty());
}

#[test]
fn rejects_bad_config() {
    let tracks = vec![iso(1, [0.0, 0.0])];
    let mut cfg = SoConfig::new(0, 6.0, 1, model(0.5));
    assert!(run(&tracks, &sensors(1), &cfg).is_err());
    cfg.sweeps = 2;
    cfg.gate = 0.0;
    assert!(run(&tracks, &sensors(1), &cfg).is_err());
    cfg.gate = 6.0;
    cfg.likelihood.spatial = SpatialKind::Euclidean;
    assert!(matches!(
        run(&tracks, &sensors(1), &cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn fixed_seed_is_deterministic() {
    let mut rng = SoRng::seed_from_u64(11);
    let tracks = random_instance(&mut rng, 9, 4);
    let cfg = SoConfig::new(30, 6.0, 99, model(0.7));
    let a = run(&tracks, &sensors(4), &cfg).unwrap();
    let b = run(&tracks, &sensors(4), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gating_excludes_far_clusters() {
    let tracks = vec![iso(1, [0.0, 0.0]), iso(2, [10.0, 0.0]), iso(3, [0.5, 0.0])];
    let sens = sensors(3);
    let m = model(0.8);
    let scene = Scene::new(&tracks, &sens, &m).unwrap();
    let mut st = SoState::new(&scene, &JointAssociation::singletons(3), 6.0).unwrap();
    let w = st.action_weights(0);
    let idx = |a: Action| w.actions.iter().position(|&x| x == a).unwrap();
    assert_eq!(w.weight(idx(Action::Move(2))), 0.0);
    assert_eq!(w.weight(idx(Action::Merge(2))), 0.0);
    assert!(w.weight(idx(Action::Move(3))) > 0.0);
    // own cluster never a move/merge target
    assert_eq!(w.weight(idx(Action::Move(1))), 0.0);
    assert_eq!(w.weight(idx(Action::Merge(1))), 0.0);
}

#[test]
fn action_ratios_match_joint_likelihood_difference() {
    let mut rng = SoRng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..60 {
        let tracks = random_instance(&mut rng, 8, 4);
        let sens = sensors(4);
        let m = model(rng.random_range(0.2..1.0));
        let scene = Scene::new(&tracks, &sens, &m).unwrap();
        let mut st = SoState::new(
            &scene,
            &JointAssociation::singletons(tracks.len()),
            f64::INFINITY,
        )
        .unwrap();
        for _ in 0..20 {
            let t = rng.random_range(0..tracks.len());
            let w = st.action_weights(t);
            let before = scene.log_joint_lik(&JointAssociation::from_raw(st.labels().to_vec()));
            for (i, a) in w.actions.iter().enumerate() {
                if w.log_weights[i] == f64::NEG_INFINITY || *a == Action::Remain {
                    continue;
                }
                let mut probe = st.clone();
                probe.apply(t, *a);
                let after =
                    scene.log_joint_lik(&JointAssociation::from_raw(probe.labels().to_vec()));
                assert!(((after - before) - w.log_weights[i]).abs() <= 1e-9, "{a:?}");
                assert!((probe.log_joint_lik() - after).abs() <= 1e-9);
                checked += 1;
            }
            let a = w.sample(&mut rng);
            st.apply(t, a);
        }
    }
    assert!(checked > 1000);
}

#[test]
fn recorded_samples_are_canonical_and_valid() {
    let mut rng = SoRng::seed_from_u64(7);
    for trial in 0..20 {
        let tracks = random_instance(&mut rng, 10, 4);
        let cfg = SoConfig::new(15, 6.0, trial, model(0.8));
        let h = run(&tracks, &sensors(4), &cfg).unwrap();
        assert_eq!(h.len(), 15 * tracks.len());
        for s in h.samples() {
            assert!(s.association.is_canonical());
            assert!(association_is_valid(&s.association, &tracks));
            assert!(s.log_lik.is_finite());
        }
    }
}

#[test]
fn coincident_tracks_prefer_one_cluster() {
    for p_d in [0.5, 0.7, 0.9, 1.0] {
        let tracks: Vec<Track> = (1..=4).map(|s| iso(s, [2.0, 2.0])).collect();
        let cfg = SoConfig::new(200, f64::INFINITY, 17, model(p_d));
        let h = run(&tracks, &sensors(4), &cfg).unwrap();
        let modal = h.modal().unwrap();
        assert_eq!(modal.association.labels(), &[1, 1, 1, 1], "p_D = {p_d}");
    }
}

#[test]
fn warm_start_is_used() {
    let tracks = vec![iso(1, [0.0, 0.0]), iso(2, [0.1, 0.0])];
    let mut cfg = SoConfig::new(1, f64::INFINITY, 0, model(0.9));
    cfg.initial = Some(JointAssociation::from_raw(vec![4, 4]));
    let s = sensors(2);
    let scene = Scene::new(&tracks, &s, &cfg.likelihood).unwrap();
    let st = SoState::new(&scene, cfg.initial.as_ref().unwrap(), cfg.gate).unwrap();
    assert_eq!(st.n_clusters(), 1);
    assert!(run(&tracks, &sensors(2), &cfg).is_ok());

    cfg.initial = Some(JointAssociation::from_raw(vec![1, 1, 1]));
    assert!(run(&tracks, &sensors(2), &cfg).is_err());
}
