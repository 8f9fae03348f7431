use nalgebra::Vector3;

use super::*;
use crate::ik::is_balanced;
use crate::model::{load_robot, Aabb};

fn biped() -> RobotModel {
    load_robot(format!(
        "{}/../../models/biped17.robot",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

fn empty_scene(roi: Aabb) -> Scene {
    Scene {
        obstacles: vec![],
        voxel_grid: None,
        region_of_interest: roi,
    }
}

fn default_roi() -> Aabb {
    // Front-right of the zero-pose robot (pelvis at the origin).
    Aabb {
        min: Vector3::new(0.1, -0.4, -0.1),
        max: Vector3::new(0.4, 0.0, 0.4),
    }
}

fn stance(model: &RobotModel) -> BalanceSpec {
    BalanceSpec::from_configuration(
        model,
        &Configuration::zeros(model.dim()),
        &["l_foot".into(), "r_foot".into()],
        0.0,
    )
    .unwrap()
}

fn cspace<'a>(model: &'a RobotModel, scene: &'a Scene, seed: u64) -> SpaceInstance<'a> {
    SpaceInstance::new(
        model,
        scene,
        stance(model),
        SpaceSetup::config_space(),
        &Configuration::zeros(model.dim()),
        IkSolver::default(),
        RelaxationSchedule::default(),
        seed,
        f64::INFINITY,
    )
}

fn eespace<'a>(model: &'a RobotModel, scene: &'a Scene, seed: u64) -> SpaceInstance<'a> {
    SpaceInstance::new(
        model,
        scene,
        stance(model),
        SpaceSetup::end_effector_space(vec!["right_hand".into()]),
        &Configuration::zeros(model.dim()),
        IkSolver::default(),
        RelaxationSchedule::default(),
        seed,
        f64::INFINITY,
    )
}

#[test]
fn cspace_samples_are_balanced() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 1);
    let spec = space.balance.clone();
    for _ in 0..40 {
        let s = space.sample_uniform().unwrap();
        assert!(is_balanced(&model, &s.config, &spec));
        assert!(s.ee_poses.is_none());
    }
    assert!(space.metrics.n_ik_calls >= 40);
    assert!(space.metrics.ik_time > 0.0);
}

#[test]
fn cspace_sampling_deterministic_by_seed() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut a = cspace(&model, &scene, 42);
    let mut b = cspace(&model, &scene, 42);
    for _ in 0..5 {
        let sa = a.sample_uniform().unwrap();
        let sb = b.sample_uniform().unwrap();
        assert_eq!(sa.config, sb.config);
    }
    let sa = a.sample_near(&a.state_from_config(Configuration::zeros(model.dim())), 0.3);
    let sb = b.sample_near(&b.state_from_config(Configuration::zeros(model.dim())), 0.3);
    assert_eq!(sa.unwrap().config, sb.unwrap().config);
}

#[test]
fn cspace_near_samples_stay_within_distance() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 7);
    let near = space.state_from_config(Configuration::zeros(model.dim()));
    let spec = space.balance.clone();
    let d = 0.3;
    for _ in 0..30 {
        let s = space.sample_near(&near, d).unwrap();
        assert!(space.distance(&s, &near) <= d + 1e-12);
        assert!(is_balanced(&model, &s.config, &spec));
    }
}

#[test]
fn cspace_near_limit_returns_near_state() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 3);
    let near = space.state_from_config(Configuration::zeros(model.dim()));
    let s = space.sample_near(&near, 1e-9).unwrap();
    assert!(space.distance(&s, &near) <= 1e-6);
}

#[test]
fn cspace_interpolation_endpoints_exact_and_midpoints_balanced() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 11);
    let spec = space.balance.clone();
    let a = space.sample_uniform().unwrap();
    let b = space.sample_uniform().unwrap();
    let s0 = space.interpolate(&a, &b, 0.0).unwrap();
    let s1 = space.interpolate(&a, &b, 1.0).unwrap();
    assert_eq!(s0.config, a.config);
    assert_eq!(s1.config, b.config);
    for d in [0.25, 0.5, 0.75] {
        let mid = space.interpolate(&a, &b, d).unwrap();
        assert!(is_balanced(&model, &mid.config, &spec));
    }
}

#[test]
fn cspace_interpolant_matches_chord_when_chord_is_balanced() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 13);
    let spec = space.balance.clone();
    let a = space.sample_uniform().unwrap();
    // A nearby second state: chord midpoints stay близко to the manifold.
    let b = space.sample_near(&a, 0.2).unwrap();
    let d = 0.5;
    let mut chord = a.config.clone();
    for i in 0..model.dim() {
        chord.0[i] += d * (b.config.0[i] - a.config.0[i]);
    }
    let mid = space.interpolate(&a, &b, d).unwrap();
    if is_balanced(&model, &chord, &spec) {
        // Chord already balanced: projection must keep it (proximity pins).
        let dev: f64 = (&mid.config.0 - &chord.0).norm();
        assert!(dev <= 1e-9, "deviation {dev}");
    }
}

#[test]
fn degenerate_bounds_return_the_single_point() {
    let mut model = biped();
    // Pin every joint at zero; collapse the base box.
    for joint in &mut model.joints {
        joint.lower_bound = 0.0;
        joint.upper_bound = 0.0;
    }
    let scene = empty_scene(default_roi());
    let spec = stance(&model);
    let mut setup = SpaceSetup::config_space();
    setup.base_box_translation = 0.0;
    setup.base_box_rotation = 0.0;
    let mut space = SpaceInstance::new(
        &model,
        &scene,
        spec,
        setup,
        &Configuration::zeros(model.dim()),
        IkSolver::default(),
        RelaxationSchedule::default(),
        5,
        f64::INFINITY,
    );
    let s = space.sample_uniform().unwrap();
    assert_eq!(s.config, Configuration::zeros(model.dim()));
    assert_eq!(space.metrics.n_ik_calls, 1);
}

#[test]
fn eespace_association_and_balance() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = eespace(&model, &scene, 17);
    let spec = space.balance.clone();
    for _ in 0..5 {
        let s = space.sample_uniform().unwrap();
        let poses = s.ee_poses.as_ref().unwrap();
        assert_eq!(poses.len(), 1);
        let fk = kinematics::fk(&model, &s.config, "right_hand").unwrap();
        assert!((fk.translation - poses[0].translation).norm() < 1e-6);
        assert!(
            crate::kinematics::rotation_angle(&fk.rotation, &poses[0].rotation) < 1e-6
        );
        assert!(is_balanced(&model, &s.config, &spec));
        // Samples land inside the region of interest (within solver slack).
        let roi = &scene.region_of_interest;
        for k in 0..3 {
            assert!(poses[0].translation[k] >= roi.min[k] - 1e-3);
            assert!(poses[0].translation[k] <= roi.max[k] + 1e-3);
        }
    }
}

#[test]
fn eespace_near_and_interpolate() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = eespace(&model, &scene, 23);
    let spec = space.balance.clone();
    let a = space.sample_uniform().unwrap();
    let d = 0.25;
    let n = space.sample_near(&a, d).unwrap();
    assert!(space.distance(&n, &a) <= d + 1e-12);
    assert!(is_balanced(&model, &n.config, &spec));

    let b = space.sample_near(&a, 0.2).unwrap();
    let s0 = space.interpolate(&a, &b, 0.0).unwrap();
    assert_eq!(s0.config, a.config);
    let mid = space.interpolate(&a, &b, 0.5).unwrap();
    assert!(is_balanced(&model, &mid.config, &spec));
    // The interpolant's pose sits near the SE(3) midpoint within the
    // relaxed tolerance budget.
    let target = se3_interpolate(&a.ee_poses.as_ref().unwrap()[0], &b.ee_poses.as_ref().unwrap()[0], 0.5);
    let achieved = &mid.ee_poses.as_ref().unwrap()[0];
    let pos_err = (achieved.translation - target.translation).norm();
    assert!(pos_err < 0.05, "pose error {pos_err}");
}

#[test]
fn eespace_collapsed_roi_pins_position() {
    let model = biped();
    let hand = kinematics::fk(&model, &Configuration::zeros(model.dim()), "right_hand").unwrap();
    let target = hand.translation + Vector3::new(0.12, 0.05, 0.1);
    let eps = 1e-9;
    let scene = empty_scene(Aabb {
        min: target - Vector3::from_element(eps),
        max: target + Vector3::from_element(eps),
    });
    let mut setup = SpaceSetup::end_effector_space(vec!["right_hand".into()]);
    setup.position_only = true;
    let mut space = SpaceInstance::new(
        &model,
        &scene,
        stance(&model),
        setup,
        &Configuration::zeros(model.dim()),
        IkSolver::default(),
        RelaxationSchedule::default(),
        29,
        f64::INFINITY,
    );
    let a = space.sample_uniform().unwrap();
    let b = space.sample_uniform().unwrap();
    for s in [&a, &b] {
        let p = s.ee_poses.as_ref().unwrap()[0].translation;
        assert!((p - target).norm() < 1e-3);
    }
}

#[test]
fn metric_axioms_hold() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 31);
    let states: Vec<SpaceState> = (0..6).map(|_| space.sample_uniform().unwrap()).collect();
    for a in &states {
        assert_eq!(space.distance(a, a), 0.0);
        for b in &states {
            let dab = space.distance(a, b);
            let dba = space.distance(b, a);
            assert!((dab - dba).abs() < 1e-12);
            assert!(dab >= 0.0);
            for c in &states {
                assert!(space.distance(a, c) <= dab + space.distance(b, c) + 1e-12);
            }
        }
    }
}

#[test]
fn check_motion_counts_and_zero_length() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 37);
    let a = space.state_from_config(Configuration::zeros(model.dim()));
    let before = space.metrics.n_evaluations;
    assert!(space.check_motion(&a, &a));
    assert_eq!(space.metrics.n_evaluations, before + 1);

    let b = space.sample_near(&a, 0.4).unwrap();
    let before = space.metrics.n_evaluations;
    let length = space.distance(&a, &b);
    let ok = space.check_motion(&a, &b);
    let evals = space.metrics.n_evaluations - before;
    assert!(ok);
    let expected = (length / space.setup.resolution).ceil() as u64 + 1;
    assert_eq!(evals, expected);
}

#[test]
fn clock_advances_and_budget_expires() {
    let model = biped();
    let scene = empty_scene(default_roi());
    let mut space = cspace(&model, &scene, 41);
    space.clock.budget = 1e-9;
    let _ = space.sample_uniform().unwrap();
    assert!(space.clock.expired());
    assert!(space.metrics.ik_time <= space.clock.elapsed + 1e-15);
}
