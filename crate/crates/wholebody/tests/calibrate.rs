use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use wholebody_plan::ik::*;
use wholebody_plan::kinematics;
use wholebody_plan::model::{load_robot, Configuration};

#[test]
#[ignore]
fn calibrate_solver() {
    let model = load_robot(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/biped17.robot")).unwrap();
    let spec = BalanceSpec::from_configuration(
        &model,
        &Configuration::zeros(model.dim()),
        &["l_foot".into(), "r_foot".into()],
        0.0,
    )
    .unwrap();
    let (jl, ju) = model.joint_bounds();
    let dim = model.dim();
    let mut lower = DVector::from_element(dim, -0.5);
    let mut upper = DVector::from_element(dim, 0.5);
    for i in 0..model.n_joints() {
        lower[6 + i] = jl[i];
        upper[6 + i] = ju[i];
    }
    let bounds = Constraint::JointBounds { lower: lower.clone(), upper: upper.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trials = 300;
    let mut conv = 0;
    let mut total_iters = 0usize;
    let t0 = Instant::now();
    for _ in 0..trials {
        let mut v = DVector::zeros(dim);
        for i in 0..dim {
            v[i] = rng.gen_range(lower[i].max(-0.5)..upper[i].min(0.5));
        }
        let q = Configuration(v);
        let problem = IkProblem::new(&model, q.clone(), q.clone())
            .with_constraint(bounds.clone())
            .with_constraint(Constraint::Balance(spec.clone()));
        let r = solve(&model, &problem).unwrap();
        total_iters += r.iterations;
        if r.converged {
            conv += 1;
            assert!(is_balanced(&model, &r.q_star, &spec));
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    println!(
        "balance-projection: {}/{} converged, {:.1} iters avg, {:.1} us/solve, {:.2} us/iter",
        conv, trials,
        total_iters as f64 / trials as f64,
        1e6 * elapsed / trials as f64,
        1e6 * elapsed / total_iters as f64
    );

    // pose-target solve: hand reaching
    let q0 = Configuration::zeros(dim);
    let hand0 = kinematics::fk(&model, &q0, "right_hand").unwrap();
    let mut conv2 = 0;
    let mut iters2 = 0usize;
    let t1 = Instant::now();
    let trials2 = 200;
    for _ in 0..trials2 {
        let target = kinematics::Transform::from_parts(
            hand0.translation
                + nalgebra::Vector3::new(
                    rng.gen_range(0.0..0.45),
                    rng.gen_range(-0.15..0.3),
                    rng.gen_range(0.1..0.8),
                ),
            nalgebra::Vector3::new(
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
            ),
        );
        let problem = IkProblem::new(&model, q0.clone(), q0.clone())
            .with_constraint(bounds.clone())
            .with_constraint(Constraint::Balance(spec.clone()))
            .with_constraint(Constraint::PoseTarget {
                frame: "right_hand".into(),
                target,
                tolerance: [0.0; 6],
            });
        let r = solve(&model, &problem).unwrap();
        iters2 += r.iterations;
        if r.converged {
            conv2 += 1;
        }
    }
    let el2 = t1.elapsed().as_secs_f64();
    println!(
        "pose+balance: {}/{} converged, {:.1} iters avg, {:.1} us/solve, {:.2} us/iter",
        conv2, trials2,
        iters2 as f64 / trials2 as f64,
        1e6 * el2 / trials2 as f64,
        1e6 * el2 / iters2 as f64
    );
}
