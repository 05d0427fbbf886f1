//! Forward kinematics of the default arm and a round trip through both IK
//! solvers.
//!
//! `cargo run --release --example fk_ik`
use dexcatch::kinematics::{forward_kinematics, ik_solve_lm, ik_solve_qp, ArmModel, IkParams};

fn main() -> dexcatch::Result<()> {
    let arm = ArmModel::default();
    let goal_q = [0.4, 0.6, 1.3, -0.5, -0.8, 0.7];
    let goal = forward_kinematics(&arm, &goal_q);
    println!("target palm position {:.4?}, roll {:.4?}", goal.position.as_slice(), goal.roll());

    let start = arm.center();
    let params = IkParams::default();
    for (name, sol) in [
        ("lm", ik_solve_lm(&arm, &start, &goal, &params)?),
        ("qp", ik_solve_qp(&arm, &start, &goal, &params)?),
    ] {
        let reached = forward_kinematics(&arm, &sol.q);
        println!(
            "{name}: converged {} in {:>2} iterations, residual {:.2e} m / {:.2e} rad, limit clearance {:.3} rad",
            sol.converged,
            sol.iterations,
            (reached.position - goal.position).norm(),
            sol.orientation_residual,
            arm.min_limit_distance(&sol.q)
        );
        println!("    q = {:.3?}", sol.q);
    }
    Ok(())
}
