//! Validity checking: self collision, robot-obstacle and robot-voxel
//! collision, and the composed state / motion validity predicates.

mod narrow;

pub use narrow::{
    aabb_overlap, box_box_signed, point_box_signed, segment_box_signed,
    segment_segment_distance, signed_distance, WorldShape,
};

use nalgebra::{Matrix3, Vector3};

use crate::ik::{is_balanced, BalanceSpec};
use crate::kinematics::KinematicsCache;
use crate::model::{Configuration, RobotModel, Scene};

#[derive(Debug, Clone)]
pub struct Contact {
    pub names: (String, String),
    pub penetration: f64,
}

#[derive(Debug, Clone)]
pub struct CollisionReport {
    pub in_collision: bool,
    pub first_contact: Option<Contact>,
}

impl CollisionReport {
    fn clear() -> Self {
        CollisionReport {
            in_collision: false,
            first_contact: None,
        }
    }

    fn contact(a: &str, b: &str, penetration: f64) -> Self {
        CollisionReport {
            in_collision: true,
            first_contact: Some(Contact {
                names: (a.to_string(), b.to_string()),
                penetration,
            }),
        }
    }
}

/// Tests declared self-collision pairs, then robot links against scene
/// obstacles, then robot links against occupied voxels. Returns on the
/// first contact found; pair order follows declaration order, so the result
/// is deterministic.
pub fn check_collision(model: &RobotModel, scene: &Scene, q: &Configuration) -> CollisionReport {
    let cache = KinematicsCache::compute(model, q);
    check_collision_cached(model, scene, &cache)
}

pub fn check_collision_cached(
    model: &RobotModel,
    scene: &Scene,
    cache: &KinematicsCache,
) -> CollisionReport {
    // Resolve the world shape of every link primitive once.
    let mut link_shapes: Vec<Vec<(WorldShape, (Vector3<f64>, Vector3<f64>))>> =
        Vec::with_capacity(model.links.len());
    for (i, link) in model.links.iter().enumerate() {
        let mut shapes = Vec::with_capacity(link.collision.len());
        for shape in &link.collision {
            let world = WorldShape::from_shape(shape, &cache.link_world[i]);
            let aabb = world.aabb();
            shapes.push((world, aabb));
        }
        link_shapes.push(shapes);
    }

    for &(ia, ib) in &model.self_collision_pairs {
        for (sa, ba) in &link_shapes[ia] {
            for (sb, bb) in &link_shapes[ib] {
                if !aabb_overlap(ba, bb) {
                    continue;
                }
                let sd = signed_distance(sa, sb);
                if sd <= 0.0 {
                    return CollisionReport::contact(
                        &model.links[ia].name,
                        &model.links[ib].name,
                        -sd,
                    );
                }
            }
        }
    }

    let obstacle_shapes: Vec<(WorldShape, (Vector3<f64>, Vector3<f64>))> = scene
        .obstacles
        .iter()
        .map(|o| {
            let world = WorldShape::from_shape(
                &crate::model::CollisionShape {
                    kind: o.kind.clone(),
                    pose: crate::kinematics::Transform::identity(),
                },
                &o.pose(),
            );
            let aabb = world.aabb();
            (world, aabb)
        })
        .collect();

    for (i, link) in model.links.iter().enumerate() {
        for (sa, ba) in &link_shapes[i] {
            for (obs, (so, bo)) in scene.obstacles.iter().zip(&obstacle_shapes) {
                if !aabb_overlap(ba, bo) {
                    continue;
                }
                let sd = signed_distance(sa, so);
                if sd <= 0.0 {
                    return CollisionReport::contact(&link.name, &obs.name, -sd);
                }
            }
        }
    }

    if let Some(grid) = &scene.voxel_grid {
        let half = Vector3::from_element(grid.resolution * 0.5);
        let rot = Matrix3::identity();
        for (i, link) in model.links.iter().enumerate() {
            for (sa, ba) in &link_shapes[i] {
                // Candidate cell range under the shape's AABB.
                let lo = (ba.0 - grid.origin) / grid.resolution;
                let hi = (ba.1 - grid.origin) / grid.resolution;
                let lo = [
                    lo.x.floor() as i64,
                    lo.y.floor() as i64,
                    lo.z.floor() as i64,
                ];
                let hi = [hi.x.ceil() as i64, hi.y.ceil() as i64, hi.z.ceil() as i64];
                let range_count = ((hi[0] - lo[0] + 1).max(0) as u128)
                    .saturating_mul((hi[1] - lo[1] + 1).max(0) as u128)
                    .saturating_mul((hi[2] - lo[2] + 1).max(0) as u128);
                let mut hit: Option<(i64, i64, i64)> = None;
                if range_count <= grid.cells.len() as u128 {
                    'outer: for ci in lo[0]..=hi[0] {
                        for cj in lo[1]..=hi[1] {
                            for ck in lo[2]..=hi[2] {
                                if grid.cells.contains(&(ci, cj, ck)) {
                                    let center = cell_center(grid, (ci, cj, ck));
                                    let cube = WorldShape::Box {
                                        center,
                                        rot,
                                        half,
                                    };
                                    if signed_distance(sa, &cube) <= 0.0 {
                                        hit = Some((ci, cj, ck));
                                        break 'outer;
                                    }
                                }
                            }
                        }
                    }
                } else {
                    for &(ci, cj, ck) in grid.cells.iter() {
                        if ci < lo[0] || ci > hi[0] || cj < lo[1] || cj > hi[1] || ck < lo[2] || ck > hi[2]
                        {
                            continue;
                        }
                        let center = cell_center(grid, (ci, cj, ck));
                        let cube = WorldShape::Box { center, rot, half };
                        if signed_distance(sa, &cube) <= 0.0 {
                            hit = Some((ci, cj, ck));
                            break;
                        }
                    }
                }
                if let Some(cell) = hit {
                    let center = cell_center(grid, cell);
                    let cube = WorldShape::Box { center, rot, half };
                    let sd = signed_distance(sa, &cube);
                    return CollisionReport::contact(
                        &link.name,
                        &format!("voxel({},{},{})", cell.0, cell.1, cell.2),
                        -sd,
                    );
                }
            }
        }
    }

    CollisionReport::clear()
}

fn cell_center(grid: &crate::model::VoxelGrid, cell: (i64, i64, i64)) -> Vector3<f64> {
    grid.origin
        + Vector3::new(
            (cell.0 as f64 + 0.5) * grid.resolution,
            (cell.1 as f64 + 0.5) * grid.resolution,
            (cell.2 as f64 + 0.5) * grid.resolution,
        )
}

/// Joint bounds hold, no collision, and the balance predicate holds.
/// Evaluation counting is owned by the calling planner run (the spaces
/// module wraps this and ticks its metrics).
pub fn is_state_valid(
    model: &RobotModel,
    scene: &Scene,
    q: &Configuration,
    balance: &BalanceSpec,
) -> bool {
    if q.dim() != model.dim() || !q.is_finite() {
        return false;
    }
    let (lo, hi) = model.joint_bounds();
    for i in 0..model.n_joints() {
        let v = q.0[6 + i];
        if v < lo[i] || v > hi[i] {
            return false;
        }
    }
    if !is_balanced(model, q, balance) {
        return false;
    }
    !check_collision(model, scene, q).in_collision
}

/// Walk a motion at steps of at most `resolution` in the space metric,
/// checking validity at every interpolated state, endpoints included.
/// `state_at` produces the interpolated state at a fraction (an Err means
/// the projection failed and the motion is invalid); `valid` is the state
/// validity predicate, called once per evaluated state.
pub fn check_motion_with<S, E>(
    length: f64,
    resolution: f64,
    mut state_at: impl FnMut(f64) -> Result<S, E>,
    mut valid: impl FnMut(&S) -> bool,
) -> bool {
    assert!(resolution > 0.0, "motion resolution must be positive");
    let segments = if length <= 0.0 {
        0
    } else {
        (length / resolution).ceil() as usize
    };
    if segments == 0 {
        return match state_at(0.0) {
            Ok(s) => valid(&s),
            Err(_) => false,
        };
    }
    for i in 0..=segments {
        let t = i as f64 / segments as f64;
        match state_at(t) {
            Ok(s) => {
                if !valid(&s) {
                    return false;
                }
            }
            Err(_) => return false,
        }
    }
    true
}
