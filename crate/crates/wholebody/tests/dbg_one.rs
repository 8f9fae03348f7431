use nalgebra::DVector;
use wholebody_plan::ik::*;
use wholebody_plan::model::{load_robot, Configuration};

#[test]
#[ignore]
fn dbg_single_solve() {
    let model = load_robot(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/biped17.robot")).unwrap();
    let spec = BalanceSpec::from_configuration(
        &model, &Configuration::zeros(model.dim()),
        &["l_foot".into(), "r_foot".into()], 0.0,
    ).unwrap();
    let dim = model.dim();
    let (jl, ju) = model.joint_bounds();
    let mut lower = DVector::from_element(dim, -0.5);
    let mut upper = DVector::from_element(dim, 0.5);
    for i in 0..model.n_joints() {
        lower[6 + i] = jl[i];
        upper[6 + i] = ju[i];
    }
    let mut v = DVector::zeros(dim);
    v[0] = 0.2; v[6] = 0.3; v[9] = 0.8; v[14] = -0.6;
    let q = Configuration(v);
    let problem = IkProblem::new(&model, q.clone(), q.clone())
        .with_constraint(Constraint::JointBounds { lower, upper })
        .with_constraint(Constraint::Balance(spec.clone()));
    let r = solve(&model, &problem).unwrap();
    eprintln!("converged {} viol {:.3e} iters {}", r.converged, r.max_violation, r.iterations);
}
