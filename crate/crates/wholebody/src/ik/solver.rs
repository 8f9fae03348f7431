//! Sequential linearization solver for the whole-body IK problem.
//!
//! Each iterate linearizes the task residuals through the analytic
//! Jacobians and solves a damped least-squares step; a backtracking line
//! search on the matching sum-of-squares merit accepts it. Tolerances act
//! as residual deadbands, so a task inside its tolerance contributes a zero
//! residual but keeps its rows, which holds already-satisfied constraints
//! in place while the remaining ones converge. Bounds and
//! configuration-proximity boxes are enforced exactly by projection.
//!
//! Reported solve times use a deterministic cost model (a fixed price per
//! call and per iteration) rather than a wall clock, so benchmark records
//! are bit-reproducible across runs. The constants approximate measured
//! per-iteration cost on commodity hardware.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::kinematics::{self, KinematicsCache};
use crate::model::{Configuration, RobotModel};

use super::{
    foot_errors, support_polygon, Constraint, ConvexPolygon, HalfPlane, IkError, IkProblem,
    IkResult,
};

/// Modeled fixed cost of one IK invocation, seconds.
pub const IK_CALL_SETUP_S: f64 = 3.0e-5;
/// Modeled cost of one solver iteration, seconds.
pub const IK_ITER_S: f64 = 3.0e-5;

#[derive(Debug, Clone)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Convergence tolerance on constraint violation (metres / radians).
    pub tol_c: f64,
    pub step_tol: f64,
    /// Trust-region cap on the raw step norm.
    pub max_step: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iterations: 100,
            tol_c: 1e-4,
            step_tol: 1e-8,
            max_step: 0.6,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IkSolver {
    pub params: SolverParams,
}

/// One-off convenience wrapper around [`IkSolver::solve`].
pub fn solve(model: &RobotModel, problem: &IkProblem) -> Result<IkResult, IkError> {
    IkSolver::default().solve(model, problem)
}

struct FootTask {
    frame: String,
    target: crate::kinematics::Transform,
    /// Feasibility thresholds (tightened from the public balance
    /// tolerances).
    pos_tol: f64,
    rot_tol: f64,
    /// Residual deadbands, strictly inside the feasibility thresholds.
    pos_inner: f64,
    rot_inner: f64,
}

struct PoseTask {
    frame: String,
    target: crate::kinematics::Transform,
    tolerance: [f64; 6],
    inner: [f64; 6],
}

struct ComTask {
    planes: Vec<HalfPlane>,
    margin: f64,
    /// Clearance the residual drives toward; feasibility needs `tol_c`.
    activation: f64,
}

struct CompiledProblem {
    lower: DVector<f64>,
    upper: DVector<f64>,
    feet: Vec<FootTask>,
    com: Option<ComTask>,
    poses: Vec<PoseTask>,
    proximity: Vec<(usize, f64, f64, f64)>,
}

struct Residuals {
    /// Deadband-shrunk task residual (merit = weighted SSE of this).
    values: Vec<f64>,
    weights: Vec<f64>,
    /// Violation of every scalar constraint beyond its feasibility
    /// threshold; `converged` requires the max to be at most `tol_c`.
    excess: Vec<f64>,
}

const FOOT_WEIGHT: f64 = 400.0;
const COM_WEIGHT: f64 = 400.0;
const POSE_WEIGHT: f64 = 100.0;

impl IkSolver {
    pub fn solve(&self, model: &RobotModel, problem: &IkProblem) -> Result<IkResult, IkError> {
        let dim = model.dim();
        if problem.seed.dim() != dim || problem.nominal.dim() != dim {
            return Err(IkError::Dimension {
                got: problem.seed.dim(),
                expected: dim,
            });
        }
        if !problem.seed.is_finite() || !problem.nominal.is_finite() {
            return Err(IkError::NonFinite("seed or nominal configuration"));
        }

        let compiled = self.compile(model, problem)?;

        let mut q = problem.seed.clone();
        clamp_in_place(&mut q.0, &compiled.lower, &compiled.upper);

        let free: Vec<bool> = (0..dim)
            .map(|i| compiled.upper[i] - compiled.lower[i] > 1e-12)
            .collect();

        let mut lambda = 1e-6;
        // Multiplier on the task weights, escalated whenever progress stalls
        // with constraints still violated: the soft-penalty equilibrium is
        // pushed below the convergence tolerance.
        let mut boost = 1.0;
        let mut iterations = 0;
        let mut converged = false;

        let mut res = self.residuals(model, &compiled, &q);
        let mut merit = self.merit(problem, &q, &res, boost);

        for iter in 0..self.params.max_iterations {
            iterations = iter;
            let feasible = max_excess(&res.excess) <= self.params.tol_c;

            if feasible {
                // Stationary on the free dimensions: typically the
                // seed-equals-nominal case or the re-projection of an
                // already feasible state.
                let grad_free: f64 = (0..dim)
                    .filter(|&i| free[i])
                    .map(|i| (problem.weight_q[i] * (q.0[i] - problem.nominal.0[i])).abs())
                    .fold(0.0, f64::max);
                if grad_free < 1e-10 || res.values.iter().all(|v| *v == 0.0) && iter > 0 {
                    converged = true;
                    break;
                }
            }

            let (jac, target, weights) = self.assemble(model, &compiled, problem, &q, boost);
            let mut step = damped_least_squares(&jac, &target, &weights, &free, lambda);
            let norm = step.norm();
            if feasible && norm < self.params.step_tol {
                converged = true;
                break;
            }
            if norm > self.params.max_step {
                step *= self.params.max_step / norm;
            }

            let mut accepted = false;
            let mut t = 1.0;
            for _ in 0..8 {
                let mut q_try = q.clone();
                q_try.0 += &step * t;
                clamp_in_place(&mut q_try.0, &compiled.lower, &compiled.upper);
                let res_try = self.residuals(model, &compiled, &q_try);
                let merit_try = self.merit(problem, &q_try, &res_try, boost);
                if merit_try < merit * (1.0 - 1e-4 * t) + 1e-16 {
                    q = q_try;
                    res = res_try;
                    merit = merit_try;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }

            if std::env::var_os("WB_IK_DEBUG").is_some() {
                eprintln!(
                    "iter {iter}: merit {merit:.6e} excess {:.3e} step {:.3e} accepted {accepted} lambda {lambda:.1e} boost {boost:.0e}",
                    max_excess(&res.excess),
                    step.norm()
                );
            }
            if accepted {
                lambda = (lambda * 0.5).max(1e-9);
            } else if max_excess(&res.excess) > self.params.tol_c && boost < 1e8 {
                boost *= 10.0;
                lambda = 1e-6;
                merit = self.merit(problem, &q, &res, boost);
            } else {
                lambda *= 10.0;
                if lambda > 1e6 {
                    converged = max_excess(&res.excess) <= self.params.tol_c;
                    break;
                }
            }
        }

        if !converged && iterations + 1 >= self.params.max_iterations {
            // Cap reached; accept if the final iterate is feasible.
            converged = max_excess(&res.excess) <= self.params.tol_c;
        }
        let max_violation = max_excess(&res.excess);

        Ok(IkResult {
            q_star: q,
            converged,
            iterations,
            max_violation,
            solve_time: IK_CALL_SETUP_S + iterations as f64 * IK_ITER_S,
        })
    }

    fn compile(&self, model: &RobotModel, problem: &IkProblem) -> Result<CompiledProblem, IkError> {
        let dim = model.dim();
        let tol_c = self.params.tol_c;
        let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(dim, f64::INFINITY);
        let mut feet = Vec::new();
        let mut com = None;
        let mut poses = Vec::new();
        let mut proximity = Vec::new();

        for constraint in &problem.constraints {
            match constraint {
                Constraint::JointBounds { lower: lo, upper: hi } => {
                    if lo.len() != dim || hi.len() != dim {
                        return Err(IkError::Dimension {
                            got: lo.len(),
                            expected: dim,
                        });
                    }
                    for i in 0..dim {
                        lower[i] = lower[i].max(lo[i]);
                        upper[i] = upper[i].min(hi[i]);
                    }
                }
                Constraint::Balance(spec) => {
                    if spec.stance_feet.is_empty() {
                        return Err(IkError::NoStanceFeet);
                    }
                    let polygon = support_polygon(model, spec)?;
                    for stance in &spec.stance_feet {
                        if model.foot(&stance.foot).is_none() {
                            return Err(IkError::UnknownFrame(stance.foot.clone()));
                        }
                        // Feasibility thresholds sit two convergence
                        // tolerances inside the public ones, so converged
                        // results pass `is_balanced` strictly and previously
                        // converged states re-check as feasible.
                        let pos_tol = (spec.feet_pos_tol - 2.0 * tol_c).max(1e-6);
                        let rot_tol = (spec.feet_rot_tol - 2.0 * tol_c).max(1e-6);
                        feet.push(FootTask {
                            frame: stance.foot.clone(),
                            target: stance.target.clone(),
                            pos_tol,
                            rot_tol,
                            pos_inner: 0.25 * pos_tol,
                            rot_inner: 0.25 * rot_tol,
                        });
                    }
                    com = Some(ComTask {
                        planes: polygon.half_planes(),
                        margin: spec.com_margin,
                        activation: 6.0 * tol_c,
                    });
                }
                Constraint::PoseTarget { frame, target, tolerance } => {
                    kinematics::resolve_frame(model, frame)
                        .map_err(|_| IkError::UnknownFrame(frame.clone()))?;
                    if !target.translation.iter().all(|v| v.is_finite()) {
                        return Err(IkError::NonFinite("pose target"));
                    }
                    let mut inner = [0.0f64; 6];
                    for k in 0..6 {
                        inner[k] = if tolerance[k].is_finite() {
                            (tolerance[k] - tol_c).max(0.0)
                        } else {
                            f64::INFINITY
                        };
                    }
                    poses.push(PoseTask {
                        frame: frame.clone(),
                        target: target.clone(),
                        tolerance: *tolerance,
                        inner,
                    });
                }
                Constraint::ConfigProximity { center, tolerance, weights } => {
                    if center.dim() != dim || tolerance.len() != dim {
                        return Err(IkError::Dimension {
                            got: center.dim(),
                            expected: dim,
                        });
                    }
                    if !center.is_finite() {
                        return Err(IkError::NonFinite("proximity center"));
                    }
                    for i in 0..dim {
                        let w = if weights.len() == dim { weights[i] } else { 1.0 };
                        lower[i] = lower[i].max(center.0[i] - tolerance[i]);
                        upper[i] = upper[i].min(center.0[i] + tolerance[i]);
                        proximity.push((i, center.0[i], tolerance[i], w));
                    }
                }
            }
        }

        // An over-tight proximity box can contradict the bounds; keep the
        // box nonempty by collapsing to its midpoint.
        for i in 0..dim {
            if lower[i] > upper[i] {
                let mid = 0.5 * (lower[i] + upper[i]);
                lower[i] = mid;
                upper[i] = mid;
            }
        }

        Ok(CompiledProblem {
            lower,
            upper,
            feet,
            com,
            poses,
            proximity,
        })
    }

    /// Deadband residuals (for the merit and Gauss-Newton rows) plus
    /// feasibility violations.
    fn residuals(&self, model: &RobotModel, compiled: &CompiledProblem, q: &Configuration) -> Residuals {
        let cache = KinematicsCache::compute(model, q);
        let mut values = Vec::new();
        let mut weights = Vec::new();
        let mut excess = Vec::new();

        for foot in &compiled.feet {
            let stance = super::StanceFoot {
                foot: foot.frame.clone(),
                target: foot.target.clone(),
            };
            let (pos, rot) = foot_errors(model, &cache, &stance);
            excess.push((pos - foot.pos_tol).max(0.0));
            excess.push((rot - foot.rot_tol).max(0.0));
            let pose = kinematics::fk_cached(model, &cache, &foot.frame).unwrap();
            let e_pos = pose.translation - foot.target.translation;
            let shrink_p = if pos > foot.pos_inner { (pos - foot.pos_inner) / pos } else { 0.0 };
            let e_rot = (foot.target.rotation.inverse() * pose.rotation).scaled_axis();
            let rn = e_rot.norm();
            let shrink_r = if rn > foot.rot_inner { (rn - foot.rot_inner) / rn } else { 0.0 };
            for k in 0..3 {
                values.push(e_pos[k] * shrink_p);
                weights.push(FOOT_WEIGHT);
            }
            for k in 0..3 {
                values.push(e_rot[k] * shrink_r);
                weights.push(FOOT_WEIGHT);
            }
        }

        if let Some(task) = &compiled.com {
            let com_xy = Vector2::new(cache.com.x, cache.com.y);
            for plane in &task.planes {
                let clearance = plane.offset - plane.normal.dot(&com_xy) - task.margin;
                excess.push((2.0 * self.params.tol_c - clearance).max(0.0));
                values.push((task.activation - clearance).max(0.0));
                weights.push(COM_WEIGHT);
            }
        }

        for pose_task in &compiled.poses {
            let actual = kinematics::fk_cached(model, &cache, &pose_task.frame).unwrap();
            let e_pos = actual.translation - pose_task.target.translation;
            let e_rot = (pose_task.target.rotation.inverse() * actual.rotation).scaled_axis();
            let e = [e_pos[0], e_pos[1], e_pos[2], e_rot[0], e_rot[1], e_rot[2]];
            for k in 0..6 {
                if !pose_task.tolerance[k].is_finite() {
                    continue;
                }
                excess.push((e[k].abs() - pose_task.tolerance[k]).max(0.0));
                let inner = pose_task.inner[k];
                let shrunk = (e[k].abs() - inner).max(0.0) * e[k].signum();
                values.push(shrunk);
                weights.push(POSE_WEIGHT);
            }
        }

        for &(i, center, tol, w) in &compiled.proximity {
            excess.push(w * ((q.0[i] - center).abs() - tol).max(0.0));
        }

        Residuals {
            values,
            weights,
            excess,
        }
    }

    fn merit(&self, problem: &IkProblem, q: &Configuration, res: &Residuals, boost: f64) -> f64 {
        let mut m = 0.0;
        for i in 0..q.dim() {
            let d = q.0[i] - problem.nominal.0[i];
            m += 0.5 * problem.weight_q[i] * d * d;
        }
        for (v, w) in res.values.iter().zip(&res.weights) {
            m += 0.5 * boost * w * v * v;
        }
        m
    }

    /// Gauss-Newton rows of the deadband residual system plus the objective.
    #[allow(clippy::type_complexity)]
    fn assemble(
        &self,
        model: &RobotModel,
        compiled: &CompiledProblem,
        problem: &IkProblem,
        q: &Configuration,
        boost: f64,
    ) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let dim = model.dim();
        let cache = KinematicsCache::compute(model, q);
        let mut rows: Vec<(DVector<f64>, f64, f64)> = Vec::new();

        for foot in &compiled.feet {
            let pose = kinematics::fk_cached(model, &cache, &foot.frame).unwrap();
            let jac = kinematics::jacobian_cached(model, q, &cache, &foot.frame).unwrap();
            let e_pos = pose.translation - foot.target.translation;
            let pn = e_pos.norm();
            let shrink_p = if pn > foot.pos_inner { (pn - foot.pos_inner) / pn } else { 0.0 };
            for k in 0..3 {
                rows.push((
                    jac.row(k).transpose(),
                    -e_pos[k] * shrink_p,
                    (boost * FOOT_WEIGHT).sqrt(),
                ));
            }
            let e_rot = (foot.target.rotation.inverse() * pose.rotation).scaled_axis();
            let rn = e_rot.norm();
            let shrink_r = if rn > foot.rot_inner { (rn - foot.rot_inner) / rn } else { 0.0 };
            let r_t_inv = foot.target.rotation.to_rotation_matrix().inverse();
            for k in 0..3 {
                let mut row = DVector::zeros(dim);
                for c in 0..dim {
                    let omega = Vector3::new(jac[(3, c)], jac[(4, c)], jac[(5, c)]);
                    row[c] = (r_t_inv * omega)[k];
                }
                rows.push((row, -e_rot[k] * shrink_r, (boost * FOOT_WEIGHT).sqrt()));
            }
        }

        if let Some(task) = &compiled.com {
            let com_xy = Vector2::new(cache.com.x, cache.com.y);
            let com_jac = kinematics::com_jacobian_cached(model, q, &cache).unwrap();
            for plane in &task.planes {
                let clearance = plane.offset - plane.normal.dot(&com_xy) - task.margin;
                let r = (task.activation - clearance).max(0.0);
                if r > 0.0 {
                    // d(clearance) = -n . d(com); want clearance to grow by r
                    let mut row = DVector::zeros(dim);
                    for c in 0..dim {
                        row[c] =
                            plane.normal.x * com_jac[(0, c)] + plane.normal.y * com_jac[(1, c)];
                    }
                    rows.push((row, -r, (boost * COM_WEIGHT).sqrt()));
                }
            }
        }

        for pose_task in &compiled.poses {
            let pose = kinematics::fk_cached(model, &cache, &pose_task.frame).unwrap();
            let jac = kinematics::jacobian_cached(model, q, &cache, &pose_task.frame).unwrap();
            let e_pos = pose.translation - pose_task.target.translation;
            let e_rot = (pose_task.target.rotation.inverse() * pose.rotation).scaled_axis();
            let r_t_inv = pose_task.target.rotation.to_rotation_matrix().inverse();
            let e = [e_pos[0], e_pos[1], e_pos[2], e_rot[0], e_rot[1], e_rot[2]];
            for k in 0..6 {
                if !pose_task.tolerance[k].is_finite() {
                    continue;
                }
                let inner = pose_task.inner[k];
                let shrunk = (e[k].abs() - inner).max(0.0) * e[k].signum();
                let row = if k < 3 {
                    jac.row(k).transpose()
                } else {
                    let mut row = DVector::zeros(dim);
                    for c in 0..dim {
                        let omega = Vector3::new(jac[(3, c)], jac[(4, c)], jac[(5, c)]);
                        row[c] = (r_t_inv * omega)[k - 3];
                    }
                    row
                };
                rows.push((row, -shrunk, (boost * POSE_WEIGHT).sqrt()));
            }
        }

        for i in 0..dim {
            if problem.weight_q[i] > 0.0 {
                let mut row = DVector::zeros(dim);
                row[i] = 1.0;
                rows.push((
                    row,
                    problem.nominal.0[i] - q.0[i],
                    problem.weight_q[i].sqrt(),
                ));
            }
        }

        let n = rows.len();
        let mut jac = DMatrix::zeros(n, dim);
        let mut target = DVector::zeros(n);
        let mut weight = DVector::zeros(n);
        for (r, (row, t, w)) in rows.into_iter().enumerate() {
            jac.set_row(r, &row.transpose());
            target[r] = t;
            weight[r] = w;
        }
        (jac, target, weight)
    }
}

fn max_excess(excess: &[f64]) -> f64 {
    excess.iter().fold(0.0, |a, &b| a.max(b))
}

fn clamp_in_place(q: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) {
    for i in 0..q.len() {
        q[i] = q[i].clamp(lower[i], upper[i]);
    }
}

/// delta = (J^T W J + lambda I)^-1 J^T W e over the free dimensions.
fn damped_least_squares(
    jac: &DMatrix<f64>,
    target: &DVector<f64>,
    weight: &DVector<f64>,
    free: &[bool],
    lambda: f64,
) -> DVector<f64> {
    let dim = jac.ncols();
    let mut jtj = DMatrix::zeros(dim, dim);
    let mut jte = DVector::zeros(dim);
    for r in 0..jac.nrows() {
        let w = weight[r] * weight[r];
        for a in 0..dim {
            let ja = jac[(r, a)];
            if ja == 0.0 {
                continue;
            }
            jte[a] += w * ja * target[r];
            for b in a..dim {
                jtj[(a, b)] += w * ja * jac[(r, b)];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
        jtj[(a, a)] += lambda;
    }
    for (i, &is_free) in free.iter().enumerate() {
        if !is_free {
            for k in 0..dim {
                jtj[(i, k)] = 0.0;
                jtj[(k, i)] = 0.0;
            }
            jtj[(i, i)] = 1.0;
            jte[i] = 0.0;
        }
    }
    match jtj.cholesky() {
        Some(chol) => chol.solve(&jte),
        None => DVector::zeros(dim),
    }
}
