//! Sampling-based planners running unmodified over the balance-projecting
//! state spaces: the spaces supply sampling, interpolation, and validity;
//! the planners only orchestrate.

mod est;
mod prm;
mod rrt;
mod rrt_connect;
mod sbl;

pub use est::est;
pub use prm::prm;
pub use rrt::rrt;
pub use rrt_connect::rrt_connect;
pub use sbl::sbl;

use nalgebra::Vector3;

use crate::kinematics::{self, rotation_angle, Transform};
use crate::model::{Configuration, RobotModel};
use crate::spaces::{SpaceInstance, SpaceMetrics, SpaceState, PLANNER_ITER_COST_S};

/// Pose-based success test: every listed end-effector within tolerance of
/// its target.
#[derive(Debug, Clone)]
pub struct GoalRegion {
    pub targets: Vec<(String, Transform)>,
    pub pos_tol: f64,
    pub rot_tol: f64,
}

impl GoalRegion {
    pub fn satisfied(&self, model: &RobotModel, config: &Configuration) -> bool {
        self.targets.iter().all(|(frame, target)| {
            match kinematics::fk(model, config, frame) {
                Ok(pose) => {
                    (pose.translation - target.translation).norm() <= self.pos_tol
                        && rotation_angle(&pose.rotation, &target.rotation) <= self.rot_tol
                }
                Err(_) => false,
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct PlannerParams {
    /// Extension step in the space metric.
    pub range: f64,
    pub goal_bias: f64,
    /// PRM: neighbours considered per new node.
    pub prm_k: usize,
    /// PRM: samples added per growth round.
    pub prm_batch: usize,
    /// EST/SBL: neighbourhood radius for the density estimate.
    pub density_radius: f64,
    /// SBL: maximum bridge length attempted between the trees.
    pub connect_radius: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            range: 0.5,
            goal_bias: 0.05,
            prm_k: 10,
            prm_batch: 8,
            density_radius: 1.0,
            connect_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerQuery {
    pub start: SpaceState,
    /// Concrete goal state; required by the bidirectional planners and PRM,
    /// used for goal biasing by the unidirectional ones.
    pub goal_state: Option<SpaceState>,
    /// Pose goal region; when absent, reaching the goal state exactly is
    /// the success condition.
    pub goal_region: Option<GoalRegion>,
    /// Budget on the modeled clock, seconds.
    pub time_budget: f64,
    pub params: PlannerParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Solved,
    Timeout,
    InvalidStart,
    InvalidGoal,
}

impl PlanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::Solved => "solved",
            PlanStatus::Timeout => "timeout",
            PlanStatus::InvalidStart => "invalid_start",
            PlanStatus::InvalidGoal => "invalid_goal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanMetrics {
    pub planning_time: f64,
    pub ik_time: f64,
    pub n_ik_calls: u64,
    pub n_evaluations: u64,
    pub c_cost: f64,
    pub w_cost: f64,
    pub com_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub path: Vec<SpaceState>,
    pub metrics: PlanMetrics,
}

/// Trajectory costs: configuration-space length (unit weights), summed
/// end-effector traverse distance, and CoM traverse distance.
pub fn compute_costs(
    model: &RobotModel,
    path: &[Configuration],
    ee_names: &[String],
) -> (f64, f64, f64) {
    let mut c_cost = 0.0;
    let mut w_cost = 0.0;
    let mut com_cost = 0.0;
    for pair in path.windows(2) {
        c_cost += (&pair[1].0 - &pair[0].0).norm();
        for name in ee_names {
            let a = kinematics::fk(model, &pair[0], name).expect("known frame");
            let b = kinematics::fk(model, &pair[1], name).expect("known frame");
            w_cost += (b.translation - a.translation).norm();
        }
        let ca = kinematics::com(model, &pair[0]).expect("positive mass");
        let cb = kinematics::com(model, &pair[1]).expect("positive mass");
        com_cost += (cb - ca).norm();
    }
    (c_cost, w_cost, com_cost)
}

pub(crate) fn finish(
    space: &SpaceInstance<'_>,
    status: PlanStatus,
    path: Vec<SpaceState>,
    ee_names: &[String],
) -> PlanResult {
    let configs: Vec<Configuration> = path.iter().map(|s| s.config.clone()).collect();
    let (c_cost, w_cost, com_cost) = if path.len() >= 2 {
        compute_costs(space.model, &configs, ee_names)
    } else {
        (0.0, 0.0, 0.0)
    };
    let SpaceMetrics {
        n_ik_calls,
        ik_time,
        n_evaluations,
    } = space.metrics.clone();
    PlanResult {
        status,
        path,
        metrics: PlanMetrics {
            planning_time: space.clock.elapsed,
            ik_time,
            n_ik_calls,
            n_evaluations,
            c_cost,
            w_cost,
            com_cost,
        },
    }
}

/// Whether a state meets the query's success condition.
pub(crate) fn goal_satisfied(
    space: &SpaceInstance<'_>,
    query: &PlannerQuery,
    state: &SpaceState,
) -> bool {
    if let Some(region) = &query.goal_region {
        region.satisfied(space.model, &state.config)
    } else if let Some(goal) = &query.goal_state {
        space.distance(state, goal) <= 1e-9
    } else {
        false
    }
}

pub(crate) fn nearest_index(
    space: &SpaceInstance<'_>,
    states: impl Iterator<Item = (usize, SpaceState)>,
    target: &SpaceState,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, state) in states {
        let d = space.distance(&state, target);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((idx, d)),
        }
    }
    best
}

/// Inverse-density node selection weights: 1 / (1 + local neighbour count).
pub fn inverse_density_weights(
    space: &SpaceInstance<'_>,
    states: &[SpaceState],
    alive: impl Fn(usize) -> bool,
    radius: f64,
) -> Vec<f64> {
    let n = states.len();
    let mut counts = vec![0usize; n];
    for i in 0..n {
        if !alive(i) {
            continue;
        }
        for j in (i + 1)..n {
            if !alive(j) {
                continue;
            }
            if space.distance(&states[i], &states[j]) <= radius {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
    (0..n)
        .map(|i| {
            if alive(i) {
                1.0 / (1.0 + counts[i] as f64)
            } else {
                0.0
            }
        })
        .collect()
}

/// Pick an index proportionally to `weights` using one RNG draw.
pub(crate) fn weighted_pick(space: &mut SpaceInstance<'_>, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = space.rand_f64() * total;
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x <= 0.0 {
            return Some(i);
        }
    }
    weights.iter().rposition(|w| *w > 0.0)
}

pub(crate) fn tick_iteration(space: &mut SpaceInstance<'_>) {
    space.clock.tick(PLANNER_ITER_COST_S);
}

/// Validate the query endpoints; returns an early result when they fail.
pub(crate) fn validate_endpoints(
    space: &mut SpaceInstance<'_>,
    query: &PlannerQuery,
    require_goal_state: bool,
    ee_names: &[String],
) -> Option<PlanResult> {
    if !space.is_state_valid(&query.start) {
        return Some(finish(space, PlanStatus::InvalidStart, vec![], ee_names));
    }
    if require_goal_state {
        match &query.goal_state {
            Some(goal) => {
                if !space.is_state_valid(goal) {
                    return Some(finish(space, PlanStatus::InvalidGoal, vec![], ee_names));
                }
            }
            None => {
                return Some(finish(space, PlanStatus::InvalidGoal, vec![], ee_names));
            }
        }
    } else if let Some(goal) = &query.goal_state {
        if !space.is_state_valid(goal) {
            return Some(finish(space, PlanStatus::InvalidGoal, vec![], ee_names));
        }
    }
    if goal_satisfied(space, query, &query.start) {
        let path = vec![query.start.clone()];
        return Some(finish(space, PlanStatus::Solved, path, ee_names));
    }
    None
}

#[cfg(test)]
mod tests;
