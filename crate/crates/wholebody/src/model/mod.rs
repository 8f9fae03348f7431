//! Robot and scene data model plus the structured text file formats.

mod files;
mod parse;

pub use files::{
    load_robot, load_scene, load_trajectory, save_robot, save_scene, save_trajectory,
};
pub use parse::{Document, Section};

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::kinematics::Transform;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
    Fixed,
}

/// Relaxation group a joint belongs to; drives the order in which the
/// configuration-proximity tolerance is enlarged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointGroup {
    LowerBody,
    Torso,
    Arm,
}

#[derive(Debug, Clone)]
pub struct JointSpec {
    pub name: String,
    pub parent_link: String,
    pub child_link: String,
    pub axis: Vector3<f64>,
    pub joint_type: JointType,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub origin: Transform,
    pub group: JointGroup,
}

/// Collision geometry, posed within its owning frame (a link, or the world
/// for scene obstacles).
#[derive(Debug, Clone)]
pub enum ShapeKind {
    Sphere { radius: f64 },
    Capsule { p0: Vector3<f64>, p1: Vector3<f64>, radius: f64 },
    Cuboid { half_extents: Vector3<f64> },
}

#[derive(Debug, Clone)]
pub struct CollisionShape {
    pub kind: ShapeKind,
    pub pose: Transform,
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    pub com_offset: Vector3<f64>,
    pub collision: Vec<CollisionShape>,
}

/// A named frame rigidly attached to a link.
#[derive(Debug, Clone)]
pub struct FrameSpec {
    pub name: String,
    pub link: String,
    pub offset: Transform,
}

#[derive(Debug, Clone)]
pub struct FootSpec {
    pub frame: FrameSpec,
    /// Convex 2D contour of the sole in the foot frame, metres.
    pub corners: Vec<[f64; 2]>,
}

/// Immutable kinematic tree with masses, limits, collision primitives, and
/// named end-effector / foot frames. Built once by [`load_robot`] and shared
/// read-only across planner runs.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub end_effectors: Vec<FrameSpec>,
    pub feet: Vec<FootSpec>,
    pub self_collision_pairs: Vec<(usize, usize)>,

    root_link: usize,
    link_index: HashMap<String, usize>,
    /// Joint indices in parent-before-child order.
    topo_joints: Vec<usize>,
    /// For each link, the joint whose child it is (None for the root).
    parent_joint: Vec<Option<usize>>,
    /// Configuration index of each non-fixed joint (6-based), None for fixed.
    q_index: Vec<Option<usize>>,
    /// For each link, the moving joints on its chain to the root.
    chain_joints: Vec<Vec<usize>>,
    n_moving: usize,
}

/// Base pose (3 translation + 3 exponential-coordinate rotation) followed by
/// the articulated joint values: a flat point in R^(N+6).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration(pub DVector<f64>);

impl Configuration {
    pub fn zeros(dim: usize) -> Self {
        Configuration(DVector::zeros(dim))
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Configuration(DVector::from_vec(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn base_position(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn base_orientation(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn base_pose(&self) -> Transform {
        Transform::from_parts(self.base_position(), self.base_orientation())
    }

    pub fn joint_values(&self) -> &[f64] {
        &self.0.as_slice()[6..]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl RobotModel {
    /// Number of articulated (non-fixed) joints.
    pub fn n_joints(&self) -> usize {
        self.n_moving
    }

    /// Configuration dimension N+6.
    pub fn dim(&self) -> usize {
        self.n_moving + 6
    }

    pub fn root_link(&self) -> usize {
        self.root_link
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn topo_joints(&self) -> &[usize] {
        &self.topo_joints
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    /// Configuration index (6-based) of a joint; None for fixed joints.
    pub fn joint_q_index(&self, joint: usize) -> Option<usize> {
        self.q_index[joint]
    }

    /// Moving joints on the chain from the root to `link`.
    pub fn chain_joints(&self, link: usize) -> &[usize] {
        &self.chain_joints[link]
    }

    pub fn end_effector(&self, name: &str) -> Option<&FrameSpec> {
        self.end_effectors.iter().find(|e| e.name == name)
    }

    pub fn foot(&self, name: &str) -> Option<&FootSpec> {
        self.feet.iter().find(|f| f.frame.name == name)
    }

    /// Lower/upper per-dimension bounds for the articulated joints only.
    pub fn joint_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lower = DVector::zeros(self.n_moving);
        let mut upper = DVector::zeros(self.n_moving);
        for &j in &self.topo_joints {
            if let Some(qi) = self.q_index[j] {
                lower[qi - 6] = self.joints[j].lower_bound;
                upper[qi - 6] = self.joints[j].upper_bound;
            }
        }
        (lower, upper)
    }

    /// Configuration indices belonging to a relaxation group. The floating
    /// base occupies indices 0..6 and is its own group.
    pub fn group_indices(&self, group: JointGroup) -> Vec<usize> {
        let mut out = Vec::new();
        for (j, spec) in self.joints.iter().enumerate() {
            if spec.group == group {
                if let Some(qi) = self.q_index[j] {
                    out.push(qi);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    /// Build a model from raw parts, checking every structural invariant.
    pub fn assemble(
        name: String,
        links: Vec<LinkSpec>,
        joints: Vec<JointSpec>,
        end_effectors: Vec<FrameSpec>,
        feet: Vec<FootSpec>,
        self_collision_names: Vec<(String, String)>,
    ) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Validation("model has no links".into()));
        }
        let mut link_index = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.name.clone(), i).is_some() {
                return Err(ModelError::Validation(format!("duplicate link '{}'", l.name)));
            }
            if l.mass < 0.0 {
                return Err(ModelError::Validation(format!(
                    "link '{}' has negative mass",
                    l.name
                )));
            }
        }
        if !links.iter().any(|l| l.mass > 0.0) {
            return Err(ModelError::Validation("no link has positive mass".into()));
        }

        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        for (j, spec) in joints.iter().enumerate() {
            if spec.lower_bound > spec.upper_bound {
                return Err(ModelError::Validation(format!(
                    "joint '{}' has lower_bound > upper_bound",
                    spec.name
                )));
            }
            if spec.joint_type != JointType::Fixed && (spec.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(ModelError::Validation(format!(
                    "joint '{}' axis is not unit length",
                    spec.name
                )));
            }
            let child = *link_index.get(&spec.child_link).ok_or_else(|| {
                ModelError::Validation(format!(
                    "joint '{}' references unknown child link '{}'",
                    spec.name, spec.child_link
                ))
            })?;
            link_index.get(&spec.parent_link).ok_or_else(|| {
                ModelError::Validation(format!(
                    "joint '{}' references unknown parent link '{}'",
                    spec.name, spec.parent_link
                ))
            })?;
            if parent_joint[child].is_some() {
                return Err(ModelError::Validation(format!(
                    "link '{}' has more than one parent joint",
                    spec.child_link
                )));
            }
            parent_joint[child] = Some(j);
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(ModelError::Validation(format!(
                "joint graph must have exactly one root link, found {}",
                roots.len()
            )));
        }
        let root_link = roots[0];

        // Walk from the root; a tree visits every link exactly once.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (j, spec) in joints.iter().enumerate() {
            children[link_index[&spec.parent_link]].push(j);
        }
        let mut topo_joints = Vec::with_capacity(joints.len());
        let mut visited = vec![false; links.len()];
        visited[root_link] = true;
        let mut stack = vec![root_link];
        while let Some(link) = stack.pop() {
            let mut js = children[link].clone();
            js.sort_unstable();
            for &j in js.iter().rev() {
                stack.push(link_index[&joints[j].child_link]);
            }
            for &j in &js {
                let child = link_index[&joints[j].child_link];
                if visited[child] {
                    return Err(ModelError::Validation(format!(
                        "cycle through link '{}'",
                        joints[j].child_link
                    )));
                }
                visited[child] = true;
                topo_joints.push(j);
            }
        }
        if visited.iter().any(|v| !v) {
            let orphan = links[visited.iter().position(|v| !v).unwrap()].name.clone();
            return Err(ModelError::Validation(format!(
                "link '{orphan}' is not connected to the root"
            )));
        }

        // Configuration layout follows joint declaration order so that
        // trajectory columns are predictable from the robot file.
        let mut q_index = vec![None; joints.len()];
        let mut n_moving = 0;
        for (j, spec) in joints.iter().enumerate() {
            if spec.joint_type != JointType::Fixed {
                q_index[j] = Some(6 + n_moving);
                n_moving += 1;
            }
        }

        let mut chain_joints: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for &j in &topo_joints {
            let parent = link_index[&joints[j].parent_link];
            let child = link_index[&joints[j].child_link];
            let mut chain = chain_joints[parent].clone();
            if q_index[j].is_some() {
                chain.push(j);
            }
            chain_joints[child] = chain;
        }

        for frame in end_effectors.iter().chain(feet.iter().map(|f| &f.frame)) {
            if !link_index.contains_key(&frame.link) {
                return Err(ModelError::Validation(format!(
                    "frame '{}' references unknown link '{}'",
                    frame.name, frame.link
                )));
            }
        }
        for foot in &feet {
            if foot.corners.len() < 3 {
                return Err(ModelError::Validation(format!(
                    "foot '{}' needs at least 3 polygon corners",
                    foot.frame.name
                )));
            }
        }

        let mut self_collision_pairs = Vec::new();
        for (a, b) in self_collision_names {
            let ia = *link_index.get(&a).ok_or_else(|| {
                ModelError::Validation(format!("self-collision pair references unknown link '{a}'"))
            })?;
            let ib = *link_index.get(&b).ok_or_else(|| {
                ModelError::Validation(format!("self-collision pair references unknown link '{b}'"))
            })?;
            self_collision_pairs.push((ia, ib));
        }

        Ok(RobotModel {
            name,
            links,
            joints,
            end_effectors,
            feet,
            self_collision_pairs,
            root_link,
            link_index,
            topo_joints,
            parent_joint,
            q_index,
            chain_joints,
            n_moving,
        })
    }
}

/// Axis-aligned box, used for the SE(3) sampling region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn volume(&self) -> f64 {
        let d = self.max - self.min;
        d.x.max(0.0) * d.y.max(0.0) * d.z.max(0.0)
    }
}

/// A collision primitive posed in the world frame. The pose is kept in its
/// serialized form (translation + rotation vector) so that re-serialization
/// reproduces the file values exactly.
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub name: String,
    pub kind: ShapeKind,
    pub translation: Vector3<f64>,
    pub rotvec: Vector3<f64>,
}

impl Obstacle {
    pub fn pose(&self) -> Transform {
        Transform::from_parts(self.translation, self.rotvec)
    }
}

#[derive(Debug, Clone, Default)]
pub struct VoxelGrid {
    pub origin: Vector3<f64>,
    pub resolution: f64,
    pub cells: BTreeSet<(i64, i64, i64)>,
}

/// World geometry an experiment plans against: primitive obstacles, an
/// optional occupancy voxel grid, and the sampling region of interest.
#[derive(Debug, Clone)]
pub struct Scene {
    pub obstacles: Vec<Obstacle>,
    pub voxel_grid: Option<VoxelGrid>,
    pub region_of_interest: Aabb,
}

impl Scene {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(grid) = &self.voxel_grid {
            if grid.resolution <= 0.0 {
                return Err(ModelError::Validation("voxel resolution must be positive".into()));
            }
        }
        if self.region_of_interest.volume() <= 0.0 {
            return Err(ModelError::Validation(
                "region of interest must have positive volume".into(),
            ));
        }
        Ok(())
    }
}
