//! Forward kinematics, centre of mass, and Jacobians for the floating-base
//! tree, plus SE(3) transform utilities.

mod transform;

pub use transform::{
    rotation_angle, se3_distance, se3_interpolate, skew, so3_left_jacobian, wrap_rotvec,
    Transform, SE3_LAMBDA,
};

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

use crate::model::{Configuration, JointType, RobotModel};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("unknown frame '{0}'")]
    UnknownFrame(String),
    #[error("model has zero total mass")]
    ZeroMass,
}

/// Per-configuration forward kinematics results: world pose of every link,
/// world axis/anchor of every joint, and the mass-weighted centre of mass.
#[derive(Debug, Clone)]
pub struct KinematicsCache {
    pub link_world: Vec<Transform>,
    pub joint_axis_world: Vec<Vector3<f64>>,
    pub joint_anchor_world: Vec<Vector3<f64>>,
    pub link_com_world: Vec<Vector3<f64>>,
    pub com: Vector3<f64>,
    pub total_mass: f64,
}

impl KinematicsCache {
    pub fn compute(model: &RobotModel, q: &Configuration) -> KinematicsCache {
        debug_assert_eq!(q.dim(), model.dim());
        let n_links = model.links.len();
        let mut link_world = vec![Transform::identity(); n_links];
        let mut joint_axis_world = vec![Vector3::zeros(); model.joints.len()];
        let mut joint_anchor_world = vec![Vector3::zeros(); model.joints.len()];

        link_world[model.root_link()] = q.base_pose();
        for &j in model.topo_joints() {
            let spec = &model.joints[j];
            let parent = model.link_index(&spec.parent_link).unwrap();
            let child = model.link_index(&spec.child_link).unwrap();
            let joint_frame = link_world[parent].compose(&spec.origin);
            joint_axis_world[j] = joint_frame.rotation * spec.axis;
            joint_anchor_world[j] = joint_frame.translation;
            let motion = match spec.joint_type {
                JointType::Fixed => Transform::identity(),
                JointType::Revolute => {
                    let value = q.0[model.joint_q_index(j).unwrap()];
                    Transform::from_parts(Vector3::zeros(), spec.axis * value)
                }
                JointType::Prismatic => {
                    let value = q.0[model.joint_q_index(j).unwrap()];
                    Transform::from_translation(spec.axis * value)
                }
            };
            link_world[child] = joint_frame.compose(&motion);
        }

        let mut com = Vector3::zeros();
        let mut total_mass = 0.0;
        let mut link_com_world = vec![Vector3::zeros(); n_links];
        for (i, link) in model.links.iter().enumerate() {
            let p = link_world[i].transform_point(&link.com_offset);
            link_com_world[i] = p;
            com += link.mass * p;
            total_mass += link.mass;
        }
        if total_mass > 0.0 {
            com /= total_mass;
        }

        KinematicsCache {
            link_world,
            joint_axis_world,
            joint_anchor_world,
            link_com_world,
            com,
            total_mass,
        }
    }
}

/// Resolve a frame name to its owning link and fixed offset. Links resolve
/// with an identity offset; end-effector and foot frames use their declared
/// offsets.
pub fn resolve_frame(model: &RobotModel, frame: &str) -> Result<(usize, Transform), KinematicsError> {
    if let Some(link) = model.link_index(frame) {
        return Ok((link, Transform::identity()));
    }
    if let Some(ee) = model.end_effector(frame) {
        return Ok((model.link_index(&ee.link).unwrap(), ee.offset.clone()));
    }
    if let Some(foot) = model.foot(frame) {
        return Ok((
            model.link_index(&foot.frame.link).unwrap(),
            foot.frame.offset.clone(),
        ));
    }
    Err(KinematicsError::UnknownFrame(frame.to_string()))
}

/// World pose of a named frame.
pub fn fk(model: &RobotModel, q: &Configuration, frame: &str) -> Result<Transform, KinematicsError> {
    let cache = KinematicsCache::compute(model, q);
    fk_cached(model, &cache, frame)
}

pub fn fk_cached(
    model: &RobotModel,
    cache: &KinematicsCache,
    frame: &str,
) -> Result<Transform, KinematicsError> {
    let (link, offset) = resolve_frame(model, frame)?;
    Ok(cache.link_world[link].compose(&offset))
}

/// Mass-weighted mean of link CoM points in the world frame.
pub fn com(model: &RobotModel, q: &Configuration) -> Result<Vector3<f64>, KinematicsError> {
    let cache = KinematicsCache::compute(model, q);
    if cache.total_mass <= 0.0 {
        return Err(KinematicsError::ZeroMass);
    }
    Ok(cache.com)
}

/// Geometric Jacobian of a frame: 6 x (N+6), linear part in rows 0..3 and
/// angular part in rows 3..6, both in the world frame. Columns for joints
/// off the frame's chain are zero.
pub fn jacobian(
    model: &RobotModel,
    q: &Configuration,
    frame: &str,
) -> Result<DMatrix<f64>, KinematicsError> {
    let cache = KinematicsCache::compute(model, q);
    jacobian_cached(model, q, &cache, frame)
}

pub fn jacobian_cached(
    model: &RobotModel,
    q: &Configuration,
    cache: &KinematicsCache,
    frame: &str,
) -> Result<DMatrix<f64>, KinematicsError> {
    let (link, offset) = resolve_frame(model, frame)?;
    let p = cache.link_world[link].compose(&offset).translation;
    let mut jac = DMatrix::zeros(6, model.dim());
    fill_point_jacobian(model, q, cache, link, &p, &mut jac, 0, true);
    Ok(jac)
}

/// Jacobian of the centre of mass: 3 x (N+6).
pub fn com_jacobian(model: &RobotModel, q: &Configuration) -> Result<DMatrix<f64>, KinematicsError> {
    let cache = KinematicsCache::compute(model, q);
    com_jacobian_cached(model, q, &cache)
}

pub fn com_jacobian_cached(
    model: &RobotModel,
    q: &Configuration,
    cache: &KinematicsCache,
) -> Result<DMatrix<f64>, KinematicsError> {
    if cache.total_mass <= 0.0 {
        return Err(KinematicsError::ZeroMass);
    }
    let mut jac = DMatrix::zeros(3, model.dim());
    let inv_mass = 1.0 / cache.total_mass;
    for (i, link) in model.links.iter().enumerate() {
        if link.mass == 0.0 {
            continue;
        }
        let weight = link.mass * inv_mass;
        let p = cache.link_com_world[i];
        let mut point_jac = DMatrix::zeros(3, model.dim());
        fill_point_jacobian(model, q, cache, i, &p, &mut point_jac, 0, false);
        jac += point_jac * weight;
    }
    Ok(jac)
}

/// Fill the linear (and optionally angular) Jacobian of a world point `p`
/// rigidly attached to `link`.
fn fill_point_jacobian(
    model: &RobotModel,
    q: &Configuration,
    cache: &KinematicsCache,
    link: usize,
    p: &Vector3<f64>,
    jac: &mut DMatrix<f64>,
    row0: usize,
    with_angular: bool,
) {
    let base_pos = q.base_position();
    // Base translation: the point moves one-for-one.
    for k in 0..3 {
        jac[(row0 + k, k)] = 1.0;
    }
    // Base orientation (exponential coordinates): world angular velocity per
    // coordinate rate is the SO(3) left Jacobian column.
    let jl = so3_left_jacobian(&q.base_orientation());
    for j in 0..3 {
        let omega = Vector3::new(jl[(0, j)], jl[(1, j)], jl[(2, j)]);
        let lin = omega.cross(&(p - base_pos));
        for k in 0..3 {
            jac[(row0 + k, 3 + j)] = lin[k];
        }
        if with_angular {
            for k in 0..3 {
                jac[(row0 + 3 + k, 3 + j)] = omega[k];
            }
        }
    }
    for &j in model.chain_joints(link) {
        let qi = model.joint_q_index(j).unwrap();
        let axis = cache.joint_axis_world[j];
        match model.joints[j].joint_type {
            JointType::Revolute => {
                let lin = axis.cross(&(p - cache.joint_anchor_world[j]));
                for k in 0..3 {
                    jac[(row0 + k, qi)] = lin[k];
                }
                if with_angular {
                    for k in 0..3 {
                        jac[(row0 + 3 + k, qi)] = axis[k];
                    }
                }
            }
            JointType::Prismatic => {
                for k in 0..3 {
                    jac[(row0 + k, qi)] = axis[k];
                }
            }
            JointType::Fixed => unreachable!("fixed joints have no q index"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JointGroup, JointSpec, LinkSpec, RobotModel};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_link_arm() -> RobotModel {
        let links = vec![
            LinkSpec {
                name: "base".into(),
                mass: 1.0,
                com_offset: Vector3::zeros(),
                collision: vec![],
            },
            LinkSpec {
                name: "upper".into(),
                mass: 1.0,
                com_offset: Vector3::new(0.0, 0.0, 0.25),
                collision: vec![],
            },
            LinkSpec {
                name: "lower".into(),
                mass: 0.5,
                com_offset: Vector3::new(0.0, 0.0, 0.2),
                collision: vec![],
            },
        ];
        let joints = vec![
            JointSpec {
                name: "shoulder".into(),
                parent_link: "base".into(),
                child_link: "upper".into(),
                axis: Vector3::y(),
                joint_type: JointType::Revolute,
                lower_bound: -2.0,
                upper_bound: 2.0,
                origin: Transform::from_translation(Vector3::new(0.1, 0.0, 0.2)),
                group: JointGroup::Arm,
            },
            JointSpec {
                name: "slider".into(),
                parent_link: "upper".into(),
                child_link: "lower".into(),
                axis: Vector3::z(),
                joint_type: JointType::Prismatic,
                lower_bound: -0.5,
                upper_bound: 0.5,
                origin: Transform::from_translation(Vector3::new(0.0, 0.0, 0.5)),
                group: JointGroup::Arm,
            },
        ];
        RobotModel::assemble("arm".into(), links, joints, vec![], vec![], vec![]).unwrap()
    }

    fn random_config(model: &RobotModel, rng: &mut ChaCha8Rng) -> Configuration {
        let mut v = DVector::zeros(model.dim());
        for i in 0..3 {
            v[i] = rng.gen_range(-1.0..1.0);
        }
        for i in 3..6 {
            v[i] = rng.gen_range(-0.9..0.9);
        }
        let (lo, hi) = model.joint_bounds();
        for i in 6..model.dim() {
            v[i] = rng.gen_range(lo[i - 6]..hi[i - 6]);
        }
        Configuration(v)
    }

    #[test]
    fn zero_configuration_base_at_origin() {
        let model = two_link_arm();
        let pose = fk(&model, &Configuration::zeros(model.dim()), "base").unwrap();
        assert!(pose.translation.norm() < 1e-15);
        assert!(pose.rotation.angle() < 1e-15);
    }

    #[test]
    fn base_translation_shifts_every_frame() {
        let model = two_link_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q = random_config(&model, &mut rng);
            let mut q2 = q.clone();
            q2.0[0] += 1.0;
            for frame in ["base", "upper", "lower"] {
                let a = fk(&model, &q, frame).unwrap();
                let b = fk(&model, &q2, frame).unwrap();
                assert!((b.translation - a.translation - Vector3::x()).norm() < 1e-12);
                assert!(rotation_angle(&a.rotation, &b.rotation) < 1e-12);
            }
        }
    }

    #[test]
    fn fk_equivariant_under_base_motion() {
        let model = two_link_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let q = random_config(&model, &mut rng);
            let lhs = Transform::from_parts(
                Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.3),
                Vector3::new(0.2, rng.gen_range(-1.0..1.0), -0.1),
            );
            let new_base = lhs.compose(&q.base_pose());
            let mut q2 = q.clone();
            for k in 0..3 {
                q2.0[k] = new_base.translation[k];
            }
            let rot = new_base.rotation.scaled_axis();
            for k in 0..3 {
                q2.0[3 + k] = rot[k];
            }
            for frame in ["upper", "lower"] {
                let moved = fk(&model, &q2, frame).unwrap();
                let expected = lhs.compose(&fk(&model, &q, frame).unwrap());
                assert!((moved.translation - expected.translation).norm() < 1e-10);
                assert!(rotation_angle(&moved.rotation, &expected.rotation) < 1e-10);
            }
        }
    }

    #[test]
    fn com_of_symmetric_point_masses() {
        let links = vec![
            LinkSpec {
                name: "a".into(),
                mass: 1.0,
                com_offset: Vector3::zeros(),
                collision: vec![],
            },
            LinkSpec {
                name: "b".into(),
                mass: 1.0,
                com_offset: Vector3::zeros(),
                collision: vec![],
            },
        ];
        let joints = vec![JointSpec {
            name: "j".into(),
            parent_link: "a".into(),
            child_link: "b".into(),
            axis: Vector3::z(),
            joint_type: JointType::Fixed,
            lower_bound: 0.0,
            upper_bound: 0.0,
            origin: Transform::from_translation(Vector3::new(0.0, 0.0, 1.0)),
            group: JointGroup::Torso,
        }];
        let model = RobotModel::assemble("m".into(), links, joints, vec![], vec![], vec![]).unwrap();
        let c = com(&model, &Configuration::zeros(6)).unwrap();
        assert!((c - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn single_body_com_follows_offset() {
        let links = vec![LinkSpec {
            name: "only".into(),
            mass: 1.0,
            com_offset: Vector3::new(0.0, 0.0, 0.5),
            collision: vec![],
        }];
        let model = RobotModel::assemble("m".into(), links, vec![], vec![], vec![], vec![]).unwrap();
        let c = com(&model, &Configuration::zeros(6)).unwrap();
        assert!((c - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-15);
        // Base-translation block of the CoM Jacobian is the identity.
        let jac = com_jacobian(&model, &Configuration::zeros(6)).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expected = if r == c { 1.0 } else { 0.0 };
                assert!((jac[(r, c)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prismatic_column_is_world_axis() {
        let model = two_link_arm();
        let mut q = Configuration::zeros(model.dim());
        q.0[6] = 0.7; // rotate shoulder about y
        let jac = jacobian(&model, &q, "lower").unwrap();
        let axis_world = fk(&model, &q, "upper").unwrap().rotation * Vector3::z();
        for k in 0..3 {
            assert!((jac[(k, 7)] - axis_world[k]).abs() < 1e-12);
            assert!(jac[(3 + k, 7)].abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let model = two_link_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..100 {
            let q = random_config(&model, &mut rng);
            let jac = jacobian(&model, &q, "lower").unwrap();
            let mut delta = DVector::zeros(model.dim());
            for v in delta.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let mut qp = q.clone();
            qp.0 += &delta * h;
            let mut qm = q.clone();
            qm.0 -= &delta * h;
            let fp = fk(&model, &qp, "lower").unwrap();
            let fm = fk(&model, &qm, "lower").unwrap();
            let lin_fd = (fp.translation - fm.translation) / (2.0 * h);
            let ang_fd = (fp.rotation * fm.rotation.inverse()).scaled_axis() / (2.0 * h);
            let jd = &jac * &delta;
            for k in 0..3 {
                assert!((jd[k] - lin_fd[k]).abs() < 1e-5, "linear row {k}");
                assert!((jd[3 + k] - ang_fd[k]).abs() < 1e-5, "angular row {k}");
            }
        }
    }

    #[test]
    fn com_jacobian_matches_finite_differences() {
        let model = two_link_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..100 {
            let q = random_config(&model, &mut rng);
            let jac = com_jacobian(&model, &q).unwrap();
            let mut delta = DVector::zeros(model.dim());
            for v in delta.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let mut qp = q.clone();
            qp.0 += &delta * h;
            let mut qm = q.clone();
            qm.0 -= &delta * h;
            let fd = (com(&model, &qp).unwrap() - com(&model, &qm).unwrap()) / (2.0 * h);
            let jd = &jac * &delta;
            for k in 0..3 {
                assert!((jd[k] - fd[k]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn unknown_frame_is_an_error() {
        let model = two_link_arm();
        assert!(fk(&model, &Configuration::zeros(model.dim()), "nope").is_err());
    }

    #[test]
    fn com_inside_hull_of_link_coms() {
        let model = two_link_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let q = random_config(&model, &mut rng);
            let cache = KinematicsCache::compute(&model, &q);
            // CoM is a convex combination, so it stays inside the bounding
            // box of the link CoM points.
            for k in 0..3 {
                let lo = cache
                    .link_com_world
                    .iter()
                    .map(|p| p[k])
                    .fold(f64::INFINITY, f64::min);
                let hi = cache
                    .link_com_world
                    .iter()
                    .map(|p| p[k])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(cache.com[k] >= lo - 1e-12 && cache.com[k] <= hi + 1e-12);
            }
        }
    }
}
