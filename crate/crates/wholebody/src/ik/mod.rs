//! Whole-body inverse kinematics: a declarative constraint set solved as a
//! nonlinear least-squares projection, plus the quasi-static balance
//! predicate and the support polygon it tests against.

mod geometry;
mod solver;

pub use geometry::{convex_hull, ConvexPolygon, DegenerateHull, HalfPlane};
pub use solver::{solve, IkSolver, SolverParams, IK_CALL_SETUP_S, IK_ITER_S};

use nalgebra::{DVector, Vector2};
use thiserror::Error;

use crate::kinematics::{self, rotation_angle, KinematicsCache, Transform};
use crate::model::{Configuration, JointGroup, RobotModel};

#[derive(Debug, Error)]
pub enum IkError {
    #[error("problem dimension {got} does not match model dimension {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown frame '{0}'")]
    UnknownFrame(String),
    #[error("balance spec has no stance feet")]
    NoStanceFeet,
    #[error("support polygon is degenerate: {0}")]
    DegenerateSupport(#[from] DegenerateHull),
}

/// A stance foot pinned at a fixed world pose.
#[derive(Debug, Clone)]
pub struct StanceFoot {
    pub foot: String,
    pub target: Transform,
}

/// Quasi-static balance: every stance foot within tolerance of its target
/// pose and the CoM ground projection inside the margin-shrunk support
/// polygon.
#[derive(Debug, Clone)]
pub struct BalanceSpec {
    pub stance_feet: Vec<StanceFoot>,
    /// Inward shrink of the support polygon, metres.
    pub com_margin: f64,
    pub feet_pos_tol: f64,
    pub feet_rot_tol: f64,
}

pub const DEFAULT_FEET_POS_TOL: f64 = 1e-3;
pub const DEFAULT_FEET_ROT_TOL: f64 = 1e-2;

impl BalanceSpec {
    /// Stance targets taken from the feet poses of `q`.
    pub fn from_configuration(
        model: &RobotModel,
        q: &Configuration,
        feet: &[String],
        com_margin: f64,
    ) -> Result<BalanceSpec, IkError> {
        if feet.is_empty() {
            return Err(IkError::NoStanceFeet);
        }
        let cache = KinematicsCache::compute(model, q);
        let mut stance_feet = Vec::with_capacity(feet.len());
        for name in feet {
            let target = kinematics::fk_cached(model, &cache, name)
                .map_err(|_| IkError::UnknownFrame(name.clone()))?;
            stance_feet.push(StanceFoot {
                foot: name.clone(),
                target,
            });
        }
        Ok(BalanceSpec {
            stance_feet,
            com_margin,
            feet_pos_tol: DEFAULT_FEET_POS_TOL,
            feet_rot_tol: DEFAULT_FEET_ROT_TOL,
        })
    }
}

/// Convex hull of all stance-foot corner points projected to the ground
/// plane, vertices counterclockwise.
pub fn support_polygon(model: &RobotModel, spec: &BalanceSpec) -> Result<ConvexPolygon, IkError> {
    if spec.stance_feet.is_empty() {
        return Err(IkError::NoStanceFeet);
    }
    let mut points = Vec::new();
    for stance in &spec.stance_feet {
        let foot = model
            .foot(&stance.foot)
            .ok_or_else(|| IkError::UnknownFrame(stance.foot.clone()))?;
        for corner in &foot.corners {
            let p = stance
                .target
                .transform_point(&nalgebra::Vector3::new(corner[0], corner[1], 0.0));
            points.push(Vector2::new(p.x, p.y));
        }
    }
    Ok(convex_hull(&points)?)
}

/// Position and rotation error of a stance foot at `cache`'s configuration.
pub(crate) fn foot_errors(
    model: &RobotModel,
    cache: &KinematicsCache,
    stance: &StanceFoot,
) -> (f64, f64) {
    let pose = kinematics::fk_cached(model, cache, &stance.foot).expect("stance foot exists");
    let pos = (pose.translation - stance.target.translation).norm();
    let rot = rotation_angle(&pose.rotation, &stance.target.rotation);
    (pos, rot)
}

/// True iff every stance foot is within tolerance of its target and the CoM
/// ground projection lies inside the margin-shrunk support polygon.
pub fn is_balanced(model: &RobotModel, q: &Configuration, spec: &BalanceSpec) -> bool {
    let polygon = match support_polygon(model, spec) {
        Ok(p) => p,
        Err(_) => return false,
    };
    let cache = KinematicsCache::compute(model, q);
    for stance in &spec.stance_feet {
        if model.foot(&stance.foot).is_none() {
            return false;
        }
        let (pos, rot) = foot_errors(model, &cache, stance);
        if pos > spec.feet_pos_tol || rot > spec.feet_rot_tol {
            return false;
        }
    }
    let com_xy = Vector2::new(cache.com.x, cache.com.y);
    polygon.contains_with_margin(&com_xy, spec.com_margin)
}

/// One declarative constraint of an [`IkProblem`].
#[derive(Debug, Clone)]
pub enum Constraint {
    /// Per-dimension bounds over the full configuration (base box plus joint
    /// limits). Enforced exactly by projection.
    JointBounds {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    Balance(BalanceSpec),
    /// Drive a frame to a world pose within a per-component tolerance
    /// `B = [x, y, z, roll, pitch, yaw]`. Position components are world
    /// axes; rotation components are the rotation-vector error expressed in
    /// the target frame. An infinite entry leaves that component free.
    PoseTarget {
        frame: String,
        target: Transform,
        tolerance: [f64; 6],
    },
    /// Keep configuration entries within `tolerance` of `center`,
    /// elementwise. A zero entry pins the dimension to the center exactly.
    /// `weights` scale the reported violation per dimension.
    ConfigProximity {
        center: Configuration,
        tolerance: DVector<f64>,
        weights: DVector<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct IkProblem {
    pub seed: Configuration,
    pub nominal: Configuration,
    pub constraints: Vec<Constraint>,
    /// Diagonal of the objective weight on `q - nominal`.
    pub weight_q: DVector<f64>,
}

impl IkProblem {
    pub fn new(model: &RobotModel, seed: Configuration, nominal: Configuration) -> IkProblem {
        IkProblem {
            seed,
            nominal,
            constraints: Vec::new(),
            weight_q: DVector::from_element(model.dim(), 1.0),
        }
    }

    pub fn with_constraint(mut self, c: Constraint) -> IkProblem {
        self.constraints.push(c);
        self
    }
}

#[derive(Debug, Clone)]
pub struct IkResult {
    pub q_star: Configuration,
    pub converged: bool,
    pub iterations: usize,
    pub max_violation: f64,
    /// Deterministic modeled solve time, seconds (see the timing notes in
    /// [`solver`]).
    pub solve_time: f64,
}

/// Tolerance-relaxation plan used by [`relax_and_solve`].
#[derive(Debug, Clone)]
pub struct RelaxationSchedule {
    /// First nonzero proximity tolerance per group, then doubled.
    pub proximity_start: f64,
    pub proximity_factor: f64,
    pub proximity_rounds_per_group: usize,
    /// Per-round pose tolerance increments, radians and metres.
    pub pose_rot_step: f64,
    pub pose_pos_step: f64,
    pub pose_rounds: usize,
}

impl Default for RelaxationSchedule {
    fn default() -> Self {
        RelaxationSchedule {
            proximity_start: 0.1,
            proximity_factor: 2.0,
            proximity_rounds_per_group: 4,
            pose_rot_step: 0.05,
            pose_pos_step: 0.01,
            pose_rounds: 10,
        }
    }
}

/// Relaxation group order for configuration-proximity constraints: lower
/// body first, then the floating base, torso, and arms.
pub fn proximity_groups(model: &RobotModel) -> Vec<Vec<usize>> {
    let lower = model.group_indices(JointGroup::LowerBody);
    let base = (0..6).collect();
    let torso = model.group_indices(JointGroup::Torso);
    let arms = model.group_indices(JointGroup::Arm);
    vec![lower, base, torso, arms]
}

/// Outcome of a relaxation ladder: the final solver result plus the number
/// of IK invocations and their total modeled time.
#[derive(Debug, Clone)]
pub struct RelaxStats {
    pub calls: usize,
    pub total_time: f64,
}

/// Solve with the relaxable constraint's tolerance initially as declared
/// (normally zero); on failure enlarge it following the schedule and retry.
/// Returns the first converged result, or the last attempt non-converged.
///
/// Proximity relaxation visits [`proximity_groups`] in order, raising each
/// group's entries to `proximity_start` and doubling per round while earlier
/// groups stay at their final value. Pose relaxation increments one
/// component per round, cycling roll, pitch, yaw, z, y, x.
pub fn relax_and_solve(
    model: &RobotModel,
    solver: &IkSolver,
    problem: &IkProblem,
    relaxable: usize,
    schedule: &RelaxationSchedule,
) -> Result<(IkResult, RelaxStats), IkError> {
    relax_and_solve_multi(model, solver, problem, &[relaxable], schedule)
}

/// [`relax_and_solve`] over several relaxable constraints at once: every
/// listed constraint receives the same schedule tolerance each round (the
/// meta end-effector space relaxes all K pose targets together).
pub fn relax_and_solve_multi(
    model: &RobotModel,
    solver: &IkSolver,
    problem: &IkProblem,
    relaxable: &[usize],
    schedule: &RelaxationSchedule,
) -> Result<(IkResult, RelaxStats), IkError> {
    let mut attempt = problem.clone();
    let mut result = solver.solve(model, &attempt)?;
    let mut stats = RelaxStats {
        calls: 1,
        total_time: result.solve_time,
    };
    if result.converged || relaxable.is_empty() {
        return Ok((result, stats));
    }

    let is_proximity = matches!(
        problem.constraints.get(relaxable[0]),
        Some(Constraint::ConfigProximity { .. })
    );
    if is_proximity {
        let base_tols: Vec<DVector<f64>> = relaxable
            .iter()
            .filter_map(|&idx| match problem.constraints.get(idx) {
                Some(Constraint::ConfigProximity { tolerance, .. }) => Some(tolerance.clone()),
                _ => None,
            })
            .collect();
        let groups = proximity_groups(model);
        let final_tol = schedule.proximity_start
            * schedule
                .proximity_factor
                .powi(schedule.proximity_rounds_per_group.saturating_sub(1) as i32);
        for g in 0..groups.len() {
            let mut step = schedule.proximity_start;
            for _ in 0..schedule.proximity_rounds_per_group {
                for (slot, &idx) in relaxable.iter().enumerate() {
                    if let Some(Constraint::ConfigProximity { tolerance, .. }) =
                        attempt.constraints.get_mut(idx)
                    {
                        // Earlier groups keep their final (largest) value.
                        for group in groups.iter().take(g) {
                            for &i in group {
                                tolerance[i] = base_tols[slot][i] + final_tol;
                            }
                        }
                        for &i in &groups[g] {
                            tolerance[i] = base_tols[slot][i] + step;
                        }
                    }
                }
                result = solver.solve(model, &attempt)?;
                stats.calls += 1;
                stats.total_time += result.solve_time;
                if result.converged {
                    return Ok((result, stats));
                }
                step *= schedule.proximity_factor;
            }
        }
        return Ok((result, stats));
    }

    let base_tols: Vec<[f64; 6]> = relaxable
        .iter()
        .filter_map(|&idx| match problem.constraints.get(idx) {
            Some(Constraint::PoseTarget { tolerance, .. }) => Some(*tolerance),
            _ => None,
        })
        .collect();
    if base_tols.len() != relaxable.len() {
        return Ok((result, stats));
    }
    // component order: roll, pitch, yaw, z, y, x
    let order = [3usize, 4, 5, 2, 1, 0];
    let mut extra = [0.0f64; 6];
    for round in 0..schedule.pose_rounds {
        let comp = order[round % order.len()];
        extra[comp] += if comp >= 3 {
            schedule.pose_rot_step
        } else {
            schedule.pose_pos_step
        };
        for (slot, &idx) in relaxable.iter().enumerate() {
            if let Some(Constraint::PoseTarget { tolerance, .. }) =
                attempt.constraints.get_mut(idx)
            {
                for k in 0..6 {
                    tolerance[k] = base_tols[slot][k] + extra[k];
                }
            }
        }
        result = solver.solve(model, &attempt)?;
        stats.calls += 1;
        stats.total_time += result.solve_time;
        if result.converged {
            return Ok((result, stats));
        }
    }
    Ok((result, stats))
}
