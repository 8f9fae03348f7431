//! Planner-facing state spaces whose sampling and interpolation primitives
//! always return statically balanced states.
//!
//! Both spaces project candidate states onto the balance manifold with the
//! whole-body IK solver: the configuration space draws raw configurations
//! and projects them; the end-effector space draws SE(3) poses inside the
//! scene's region of interest and solves for an associated configuration
//! that reaches the pose while balanced. A space instance owns one RNG
//! stream, one metrics counter, and one deterministic clock, and serves
//! exactly one planner run.

use nalgebra::{DVector, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::collision;
use crate::ik::{
    relax_and_solve_multi, BalanceSpec, Constraint, IkProblem, IkResult, IkSolver,
    RelaxationSchedule,
};
use crate::ik::RelaxStats;
use crate::kinematics::{self, se3_distance, se3_interpolate, wrap_rotvec, Transform, SE3_LAMBDA};
use crate::model::{Configuration, RobotModel, Scene};

/// Modeled cost of one state-validity evaluation, seconds.
pub const EVAL_COST_S: f64 = 2.0e-5;
/// Modeled bookkeeping cost of one planner loop iteration, seconds.
pub const PLANNER_ITER_COST_S: f64 = 5.0e-6;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("sampling retry budget exhausted after {attempts} draws")]
    RetryBudget { attempts: usize },
    #[error("interpolation projection failed (max violation {max_violation:.3e})")]
    Interpolation { max_violation: f64 },
    #[error(transparent)]
    Ik(#[from] crate::ik::IkError),
}

/// Planner-visible state: a configuration, paired with the end-effector
/// poses it realizes when the space is an end-effector space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceState {
    pub config: Configuration,
    pub ee_poses: Option<Vec<Transform>>,
}

impl SpaceState {
    pub fn config_only(config: Configuration) -> SpaceState {
        SpaceState {
            config,
            ee_poses: None,
        }
    }
}

/// Per-run counters mirrored into benchmark records.
#[derive(Debug, Clone, Default)]
pub struct SpaceMetrics {
    pub n_ik_calls: u64,
    /// Accumulated modeled IK time, seconds.
    pub ik_time: f64,
    pub n_evaluations: u64,
}

/// Deterministic run clock: advances by modeled operation costs, never by
/// wall time, so identical seeds reproduce identical budget decisions and
/// identical reported times.
#[derive(Debug, Clone)]
pub struct RunClock {
    pub elapsed: f64,
    pub budget: f64,
}

impl RunClock {
    pub fn new(budget: f64) -> RunClock {
        RunClock {
            elapsed: 0.0,
            budget,
        }
    }

    pub fn tick(&mut self, cost: f64) {
        self.elapsed += cost;
    }

    pub fn expired(&self) -> bool {
        self.elapsed >= self.budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Config,
    EndEffector,
}

/// Construction parameters for a space instance.
#[derive(Debug, Clone)]
pub struct SpaceSetup {
    pub kind: SpaceKind,
    /// End-effector frames (one for the plain end-effector space, several
    /// for the meta space). Ignored by the configuration space.
    pub ee_names: Vec<String>,
    /// Half-width of the allowed base translation box around the start
    /// base position, metres.
    pub base_box_translation: f64,
    /// Half-width of the allowed base orientation box (exponential
    /// coordinates), radians.
    pub base_box_rotation: f64,
    pub retry_budget: usize,
    /// Configuration-space metric weights (unit if absent).
    pub metric_weights: Option<Vec<f64>>,
    pub se3_lambda: f64,
    /// Constrain end-effector position only, leaving orientation free.
    pub position_only: bool,
    /// Motion-validation resolution in the space metric.
    pub resolution: f64,
}

impl SpaceSetup {
    pub fn config_space() -> SpaceSetup {
        SpaceSetup {
            kind: SpaceKind::Config,
            ee_names: Vec::new(),
            base_box_translation: 0.5,
            base_box_rotation: 0.5,
            retry_budget: 100,
            metric_weights: None,
            se3_lambda: SE3_LAMBDA,
            position_only: false,
            resolution: 0.05,
        }
    }

    pub fn end_effector_space(ee_names: Vec<String>) -> SpaceSetup {
        SpaceSetup {
            kind: SpaceKind::EndEffector,
            ee_names,
            ..SpaceSetup::config_space()
        }
    }
}

/// One planner run's sampling space: immutable model/scene plus the run's
/// RNG, metrics, and clock.
pub struct SpaceInstance<'a> {
    pub model: &'a RobotModel,
    pub scene: &'a Scene,
    pub balance: BalanceSpec,
    pub setup: SpaceSetup,
    solver: IkSolver,
    schedule: RelaxationSchedule,
    bounds_lower: DVector<f64>,
    bounds_upper: DVector<f64>,
    metric_weights: DVector<f64>,
    start: Configuration,
    last_ee_seed: Option<Configuration>,
    rng: ChaCha8Rng,
    pub metrics: SpaceMetrics,
    pub clock: RunClock,
}

impl<'a> SpaceInstance<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &'a RobotModel,
        scene: &'a Scene,
        balance: BalanceSpec,
        setup: SpaceSetup,
        start: &Configuration,
        solver: IkSolver,
        schedule: RelaxationSchedule,
        rng_seed: u64,
        budget: f64,
    ) -> SpaceInstance<'a> {
        let dim = model.dim();
        let (jl, ju) = model.joint_bounds();
        let mut lower = DVector::zeros(dim);
        let mut upper = DVector::zeros(dim);
        for i in 0..3 {
            lower[i] = start.0[i] - setup.base_box_translation;
            upper[i] = start.0[i] + setup.base_box_translation;
        }
        for i in 3..6 {
            lower[i] = start.0[i] - setup.base_box_rotation;
            upper[i] = start.0[i] + setup.base_box_rotation;
        }
        for i in 0..model.n_joints() {
            lower[6 + i] = jl[i];
            upper[6 + i] = ju[i];
        }
        let metric_weights = match &setup.metric_weights {
            Some(w) => DVector::from_vec(w.clone()),
            None => DVector::from_element(dim, 1.0),
        };
        SpaceInstance {
            model,
            scene,
            balance,
            setup,
            solver,
            schedule,
            bounds_lower: lower,
            bounds_upper: upper,
            metric_weights,
            start: start.clone(),
            last_ee_seed: None,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            metrics: SpaceMetrics::default(),
            clock: RunClock::new(budget),
        }
    }

    pub fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.bounds_lower, &self.bounds_upper)
    }

    fn bounds_constraint(&self) -> Constraint {
        Constraint::JointBounds {
            lower: self.bounds_lower.clone(),
            upper: self.bounds_upper.clone(),
        }
    }

    /// Run one IK solve, keeping the run counters and clock in sync.
    fn run_solve(&mut self, problem: &IkProblem) -> Result<IkResult, SpaceError> {
        let result = self.solver.solve(self.model, problem)?;
        self.metrics.n_ik_calls += 1;
        self.metrics.ik_time += result.solve_time;
        self.clock.tick(result.solve_time);
        Ok(result)
    }

    fn run_relax(
        &mut self,
        problem: &IkProblem,
        relaxable: &[usize],
    ) -> Result<IkResult, SpaceError> {
        let (result, stats): (IkResult, RelaxStats) = relax_and_solve_multi(
            self.model,
            &self.solver,
            problem,
            relaxable,
            &self.schedule,
        )?;
        self.metrics.n_ik_calls += stats.calls as u64;
        self.metrics.ik_time += stats.total_time;
        self.clock.tick(stats.total_time);
        Ok(result)
    }

    /// Weighted Euclidean metric in configuration space; summed SE(3)
    /// metric in end-effector space.
    pub fn distance(&self, a: &SpaceState, b: &SpaceState) -> f64 {
        match self.setup.kind {
            SpaceKind::Config => {
                let mut sum = 0.0;
                for i in 0..a.config.dim() {
                    let d = a.config.0[i] - b.config.0[i];
                    sum += self.metric_weights[i] * d * d;
                }
                sum.sqrt()
            }
            SpaceKind::EndEffector => {
                let pa = a.ee_poses.as_ref().expect("end-effector state");
                let pb = b.ee_poses.as_ref().expect("end-effector state");
                pa.iter()
                    .zip(pb)
                    .map(|(x, y)| se3_distance(x, y, self.setup.se3_lambda))
                    .sum()
            }
        }
    }

    /// Build the planner state for a configuration (attaching end-effector
    /// poses in end-effector spaces).
    pub fn state_from_config(&self, config: Configuration) -> SpaceState {
        match self.setup.kind {
            SpaceKind::Config => SpaceState::config_only(config),
            SpaceKind::EndEffector => {
                let poses = self
                    .setup
                    .ee_names
                    .iter()
                    .map(|n| kinematics::fk(self.model, &config, n).expect("known frame"))
                    .collect();
                SpaceState {
                    config,
                    ee_poses: Some(poses),
                }
            }
        }
    }

    pub fn sample_uniform(&mut self) -> Result<SpaceState, SpaceError> {
        match self.setup.kind {
            SpaceKind::Config => self.cspace_sample_uniform(),
            SpaceKind::EndEffector => self.eespace_sample_uniform(),
        }
    }

    pub fn sample_near(&mut self, near: &SpaceState, d: f64) -> Result<SpaceState, SpaceError> {
        match self.setup.kind {
            SpaceKind::Config => self.cspace_sample_near(near, d),
            SpaceKind::EndEffector => self.eespace_sample_near(near, d),
        }
    }

    /// Balanced state approximately `d` of the way from `a` to `b`. The
    /// endpoints come back exactly: they are feasible at zero tolerance.
    pub fn interpolate(
        &mut self,
        a: &SpaceState,
        b: &SpaceState,
        d: f64,
    ) -> Result<SpaceState, SpaceError> {
        if d <= 0.0 {
            return Ok(a.clone());
        }
        if d >= 1.0 {
            return Ok(b.clone());
        }
        match self.setup.kind {
            SpaceKind::Config => self.cspace_interpolate(a, b, d),
            SpaceKind::EndEffector => self.eespace_interpolate(a, b, d),
        }
    }

    /// State validity (joint bounds, collision, balance); one evaluation.
    pub fn is_state_valid(&mut self, state: &SpaceState) -> bool {
        self.metrics.n_evaluations += 1;
        self.clock.tick(EVAL_COST_S);
        collision::is_state_valid(self.model, self.scene, &state.config, &self.balance)
    }

    /// Validate the straight motion between two states at the configured
    /// resolution (endpoints included). Interpolation failures make the
    /// motion invalid.
    pub fn check_motion(&mut self, a: &SpaceState, b: &SpaceState) -> bool {
        let length = self.distance(a, b);
        let segments = if length <= 0.0 {
            0
        } else {
            (length / self.setup.resolution).ceil() as usize
        };
        if segments == 0 {
            return self.is_state_valid(a);
        }
        for i in 0..=segments {
            let t = i as f64 / segments as f64;
            match self.interpolate(a, b, t) {
                Ok(state) => {
                    if !self.is_state_valid(&state) {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        true
    }

    // ---- configuration space ----

    fn cspace_sample_uniform(&mut self) -> Result<SpaceState, SpaceError> {
        let dim = self.model.dim();
        for attempt in 0..self.setup.retry_budget {
            let mut v = DVector::zeros(dim);
            for i in 0..dim {
                v[i] = self.rng.gen_range(self.bounds_lower[i]..=self.bounds_upper[i]);
            }
            let draw = Configuration(v);
            // Seed and nominal are both the raw draw: the projection stays
            // as close to the uniform sample as balance allows, which keeps
            // exploring the task null space.
            let problem = IkProblem::new(self.model, draw.clone(), draw)
                .with_constraint(self.bounds_constraint())
                .with_constraint(Constraint::Balance(self.balance.clone()));
            let result = self.run_solve(&problem)?;
            if result.converged {
                let _ = attempt;
                return Ok(self.state_from_config(self.wrap_base(result.q_star)));
            }
        }
        Err(SpaceError::RetryBudget {
            attempts: self.setup.retry_budget,
        })
    }

    fn cspace_sample_near(&mut self, near: &SpaceState, d: f64) -> Result<SpaceState, SpaceError> {
        let dim = self.model.dim();
        for _ in 0..self.setup.retry_budget {
            // Uniform draw in the metric ball of radius d around the near
            // state (Gaussian direction, radius by the d-ball law), clamped
            // into bounds.
            let mut dir = DVector::zeros(dim);
            let mut norm2 = 0.0;
            for i in 0..dim {
                let g = self.gaussian();
                dir[i] = g;
                norm2 += g * g;
            }
            let norm = norm2.sqrt().max(1e-12);
            let radius = self.rng.gen::<f64>().powf(1.0 / dim as f64);
            let mut v = near.config.0.clone();
            for i in 0..dim {
                let w = self.metric_weights[i].max(1e-12).sqrt();
                v[i] = (v[i] + d * radius * dir[i] / (norm * w))
                    .clamp(self.bounds_lower[i], self.bounds_upper[i]);
            }
            let draw = Configuration(v);
            let problem = IkProblem::new(self.model, draw.clone(), near.config.clone())
                .with_constraint(self.bounds_constraint())
                .with_constraint(Constraint::Balance(self.balance.clone()))
                .with_constraint(Constraint::ConfigProximity {
                    center: draw,
                    tolerance: DVector::zeros(dim),
                    weights: DVector::from_element(dim, 1.0),
                });
            let result = self.run_relax(&problem, &[2])?;
            if !result.converged {
                continue;
            }
            let state = self.state_from_config(self.wrap_base(result.q_star));
            if self.distance(&state, near) <= d {
                return Ok(state);
            }
        }
        Err(SpaceError::RetryBudget {
            attempts: self.setup.retry_budget,
        })
    }

    fn cspace_interpolate(
        &mut self,
        a: &SpaceState,
        b: &SpaceState,
        d: f64,
    ) -> Result<SpaceState, SpaceError> {
        let dim = self.model.dim();
        let mut v = DVector::zeros(dim);
        for i in 0..dim {
            v[i] = a.config.0[i] + d * (b.config.0[i] - a.config.0[i]);
        }
        let center = Configuration(v);
        let problem = IkProblem::new(self.model, center.clone(), a.config.clone())
            .with_constraint(self.bounds_constraint())
            .with_constraint(Constraint::Balance(self.balance.clone()))
            .with_constraint(Constraint::ConfigProximity {
                center,
                tolerance: DVector::zeros(dim),
                weights: DVector::from_element(dim, 1.0),
            });
        let result = self.run_relax(&problem, &[2])?;
        if result.converged {
            Ok(self.state_from_config(self.wrap_base(result.q_star)))
        } else {
            Err(SpaceError::Interpolation {
                max_violation: result.max_violation,
            })
        }
    }

    // ---- end-effector space ----

    fn pose_tolerance(&self) -> [f64; 6] {
        if self.setup.position_only {
            [
                0.0,
                0.0,
                0.0,
                f64::INFINITY,
                f64::INFINITY,
                f64::INFINITY,
            ]
        } else {
            [0.0; 6]
        }
    }

    fn uniform_quaternion(&mut self) -> UnitQuaternion<f64> {
        // Shoemake's subgroup algorithm: uniform over SO(3).
        let u1: f64 = self.rng.gen();
        let u2: f64 = self.rng.gen_range(0.0..std::f64::consts::TAU);
        let u3: f64 = self.rng.gen_range(0.0..std::f64::consts::TAU);
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        UnitQuaternion::from_quaternion(Quaternion::new(
            a * u2.sin(),
            a * u2.cos(),
            b * u3.sin(),
            b * u3.cos(),
        ))
    }

    fn draw_roi_pose(&mut self) -> Transform {
        let roi = &self.scene.region_of_interest;
        let p = Vector3::new(
            self.rng.gen_range(roi.min.x..=roi.max.x),
            self.rng.gen_range(roi.min.y..=roi.max.y),
            self.rng.gen_range(roi.min.z..=roi.max.z),
        );
        let rot = self.uniform_quaternion();
        Transform::new(p, rot)
    }

    fn ee_problem(&self, seed: &Configuration, nominal: &Configuration, targets: &[Transform]) -> IkProblem {
        let mut problem = IkProblem::new(self.model, seed.clone(), nominal.clone())
            .with_constraint(self.bounds_constraint())
            .with_constraint(Constraint::Balance(self.balance.clone()));
        for (name, target) in self.setup.ee_names.iter().zip(targets) {
            problem = problem.with_constraint(Constraint::PoseTarget {
                frame: name.clone(),
                target: target.clone(),
                tolerance: self.pose_tolerance(),
            });
        }
        problem
    }

    /// Indices of the pose-target constraints inside [`Self::ee_problem`]'s
    /// constraint list.
    fn ee_constraint_indices(&self) -> Vec<usize> {
        (0..self.setup.ee_names.len()).map(|k| 2 + k).collect()
    }

    fn eespace_sample_uniform(&mut self) -> Result<SpaceState, SpaceError> {
        for _ in 0..self.setup.retry_budget {
            let targets: Vec<Transform> =
                (0..self.setup.ee_names.len()).map(|_| self.draw_roi_pose()).collect();
            let seed = self.last_ee_seed.clone().unwrap_or_else(|| self.start.clone());
            let problem = self.ee_problem(&seed, &seed, &targets);
            let result = self.run_solve(&problem)?;
            if result.converged {
                let config = self.wrap_base(result.q_star);
                self.last_ee_seed = Some(config.clone());
                return Ok(self.state_from_config(config));
            }
        }
        Err(SpaceError::RetryBudget {
            attempts: self.setup.retry_budget,
        })
    }

    fn draw_near_pose(&mut self, near: &Transform, budget: f64) -> Transform {
        let lambda = self.setup.se3_lambda;
        let split: f64 = self.rng.gen();
        let trans_budget = split * budget;
        let angle_budget = (budget - trans_budget) / lambda;
        let dir = loop {
            let v = Vector3::new(
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-6 && n <= 1.0 {
                break v / n;
            }
        };
        let radius: f64 = self.rng.gen::<f64>().cbrt() * trans_budget;
        let axis = loop {
            let v = Vector3::new(
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-6 && n <= 1.0 {
                break v / n;
            }
        };
        let angle: f64 = self.rng.gen::<f64>() * angle_budget;
        Transform {
            translation: near.translation + dir * radius,
            rotation: UnitQuaternion::from_scaled_axis(axis * angle) * near.rotation,
        }
    }

    fn eespace_sample_near(&mut self, near: &SpaceState, d: f64) -> Result<SpaceState, SpaceError> {
        let near_poses = near.ee_poses.as_ref().expect("end-effector state");
        let k = self.setup.ee_names.len();
        for _ in 0..self.setup.retry_budget {
            let per_ee = d / k as f64;
            let targets: Vec<Transform> = near_poses
                .iter()
                .map(|p| {
                    let pose = p.clone();
                    self.draw_near_pose(&pose, per_ee * 0.98)
                })
                .collect();
            let problem = self.ee_problem(&near.config, &near.config, &targets);
            let result = self.run_solve(&problem)?;
            if !result.converged {
                continue;
            }
            let state = self.state_from_config(self.wrap_base(result.q_star));
            if self.distance(&state, near) <= d {
                return Ok(state);
            }
        }
        Err(SpaceError::RetryBudget {
            attempts: self.setup.retry_budget,
        })
    }

    fn eespace_interpolate(
        &mut self,
        a: &SpaceState,
        b: &SpaceState,
        d: f64,
    ) -> Result<SpaceState, SpaceError> {
        let pa = a.ee_poses.as_ref().expect("end-effector state");
        let pb = b.ee_poses.as_ref().expect("end-effector state");
        let targets: Vec<Transform> = pa
            .iter()
            .zip(pb)
            .map(|(x, y)| se3_interpolate(x, y, d))
            .collect();
        let problem = self.ee_problem(&a.config, &a.config, &targets);
        let indices = self.ee_constraint_indices();
        let result = self.run_relax(&problem, &indices)?;
        if result.converged {
            Ok(self.state_from_config(self.wrap_base(result.q_star)))
        } else {
            Err(SpaceError::Interpolation {
                max_violation: result.max_violation,
            })
        }
    }

    /// Standard normal via Box-Muller (keeps the dependency surface small
    /// and the draw count per sample fixed).
    fn gaussian(&mut self) -> f64 {
        let u1: f64 = self.rng.sample(rand::distributions::Open01);
        let u2: f64 = self.rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn wrap_base(&self, mut q: Configuration) -> Configuration {
        let wrapped = wrap_rotvec(&q.base_orientation());
        q.0[3] = wrapped.x;
        q.0[4] = wrapped.y;
        q.0[5] = wrapped.z;
        q
    }
}

#[cfg(test)]
mod tests;
