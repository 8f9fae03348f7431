use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wholebody_plan::ik::*;
use wholebody_plan::kinematics;
use wholebody_plan::model::{load_robot, Configuration};

#[test]
#[ignore]
fn dbg_reachable_pose() {
    let model = load_robot(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/biped17.robot")).unwrap();
    let spec = BalanceSpec::from_configuration(
        &model, &Configuration::zeros(model.dim()),
        &["l_foot".into(), "r_foot".into()], 0.0,
    ).unwrap();
    let (jl, ju) = model.joint_bounds();
    let dim = model.dim();
    let mut lower = DVector::from_element(dim, -0.5);
    let mut upper = DVector::from_element(dim, 0.5);
    for i in 0..model.n_joints() {
        lower[6 + i] = jl[i];
        upper[6 + i] = ju[i];
    }
    let bounds = Constraint::JointBounds { lower: lower.clone(), upper: upper.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut conv = 0;
    let mut viols = vec![];
    for _ in 0..50 {
        // First make a random balanced configuration...
        let mut v = DVector::zeros(dim);
        for i in 0..dim {
            v[i] = rng.gen_range(lower[i].max(-0.4)..upper[i].min(0.4));
        }
        let q = Configuration(v);
        let p1 = IkProblem::new(&model, q.clone(), q.clone())
            .with_constraint(bounds.clone())
            .with_constraint(Constraint::Balance(spec.clone()));
        let r1 = solve(&model, &p1).unwrap();
        if !r1.converged { continue; }
        // ...then ask the solver to reach exactly that hand pose from zero.
        let target = kinematics::fk(&model, &r1.q_star, "right_hand").unwrap();
        let q0 = Configuration::zeros(dim);
        let p2 = IkProblem::new(&model, q0.clone(), q0.clone())
            .with_constraint(bounds.clone())
            .with_constraint(Constraint::Balance(spec.clone()))
            .with_constraint(Constraint::PoseTarget {
                frame: "right_hand".into(), target, tolerance: [0.0; 6],
            });
        let r2 = solve(&model, &p2).unwrap();
        if r2.converged { conv += 1; } else { viols.push((r2.max_violation, r2.iterations)); }
    }
    println!("reachable targets: {conv}/50-ish converged");
    println!("failures (max_violation, iters): {:?}", &viols[..viols.len().min(10)]);
}
