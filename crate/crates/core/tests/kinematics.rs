use approx::assert_abs_diff_eq;
use dexcatch::kinematics::{
    base_step, check_joint_limits, forward_kinematics, ik_solve_lm_task, ik_solve_qp_task, ArmModel, BasePose,
    IkParams, IkSolution, IkTarget, JointVector, ARM_DOF,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    version: u32,
    case: Vec<GoldenCase>,
}

#[derive(Deserialize)]
struct GoldenCase {
    name: String,
    q: JointVector,
    position: [f64; 3],
    rotation: [f64; 9],
}

fn golden() -> Golden {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/fk_golden.toml");
    toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn random_q(model: &ArmModel, rng: &mut impl Rng, margin: f64) -> JointVector {
    let (lo, hi) = (model.lower(), model.upper());
    std::array::from_fn(|i| rng.random_range(lo[i] + margin..=hi[i] - margin))
}

fn in_limits(model: &ArmModel, s: &IkSolution) -> bool {
    !check_joint_limits(model, &s.q).iter().any(|v| *v)
}

#[test]
fn golden_forward_kinematics() {
    let g = golden();
    assert_eq!(g.version, 1);
    assert!(g.case.len() >= 10);
    let model = ArmModel::default();
    for c in &g.case {
        let pose = forward_kinematics(&model, &c.q);
        for k in 0..3 {
            assert_abs_diff_eq!(pose.position[k], c.position[k], epsilon = 1e-12);
        }
        let r = pose.rotation.matrix();
        for row in 0..3 {
            for col in 0..3 {
                assert!(
                    (r[(row, col)] - c.rotation[3 * row + col]).abs() < 1e-12,
                    "{}: rotation ({row},{col})",
                    c.name
                );
            }
        }
    }
}

#[test]
fn bundled_arm_file_is_the_default_model() {
    let model = ArmModel::load(&dexcatch::default_config_dir().join("arm.toml")).unwrap();
    assert_eq!(model, ArmModel::default());
}

#[test]
fn round_trip_over_a_thousand_targets() {
    let model = ArmModel::default();
    let params = IkParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1000;
    let (mut lm_ok, mut qp_ok) = (0, 0);
    for _ in 0..n {
        let q_star = random_q(&model, &mut rng, 0.0);
        let target = IkTarget::from(&forward_kinematics(&model, &q_star));
        let start: JointVector = std::array::from_fn(|i| q_star[i] + rng.random_range(-0.3..0.3));
        let start = model.clamp(&start);
        for (solver, hits) in [
            (ik_solve_lm_task as fn(_, _, _, _) -> _, &mut lm_ok),
            (ik_solve_qp_task, &mut qp_ok),
        ] {
            let s: IkSolution = solver(&model, &start, &target, &params).unwrap();
            assert!(in_limits(&model, &s));
            let reached = forward_kinematics(&model, &s.q).position;
            if (reached - target.position).norm() <= params.position_tolerance {
                *hits += 1;
            }
        }
    }
    assert!(lm_ok * 100 >= 99 * n, "LM recovered {lm_ok}/{n}");
    assert!(qp_ok * 100 >= 99 * n, "QP recovered {qp_ok}/{n}");
}

#[test]
fn qp_keeps_more_clearance_than_lm() {
    let model = ArmModel::default();
    let params = IkParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200;
    let mut wins = 0;
    for _ in 0..n {
        let q_star = random_q(&model, &mut rng, 0.3);
        let target = IkTarget::from(&forward_kinematics(&model, &q_star));
        let start = model.clamp(&std::array::from_fn(|i| q_star[i] + rng.random_range(-0.3..0.3)));
        let lm = ik_solve_lm_task(&model, &start, &target, &params).unwrap();
        let qp = ik_solve_qp_task(&model, &start, &target, &params).unwrap();
        if model.min_limit_distance(&qp.q) >= model.min_limit_distance(&lm.q) - 1e-12 {
            wins += 1;
        }
    }
    assert!(wins * 100 >= 80 * n, "QP kept more clearance in {wins}/{n}");
}

fn joint_vector() -> impl Strategy<Value = JointVector> {
    proptest::array::uniform6(-4.0f64..4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn solutions_respect_limits(start in joint_vector(), x in -1.2f64..1.2, y in -1.2f64..1.2, z in -0.5f64..1.8, roll in proptest::option::of(-3.0f64..3.0)) {
        let model = ArmModel::default();
        let target = IkTarget { position: nalgebra::Vector3::new(x, y, z), roll };
        for s in [
            ik_solve_lm_task(&model, &start, &target, &IkParams::default()).unwrap(),
            ik_solve_qp_task(&model, &start, &target, &IkParams::default()).unwrap(),
        ] {
            prop_assert!(in_limits(&model, &s));
            prop_assert!(s.q.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn solvers_are_deterministic(seed in any::<u64>()) {
        let model = ArmModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = IkTarget::from(&forward_kinematics(&model, &random_q(&model, &mut rng, 0.0)));
        let start = random_q(&model, &mut rng, 0.0);
        let p = IkParams::default();
        let a = ik_solve_qp_task(&model, &start, &target, &p).unwrap();
        let b = ik_solve_qp_task(&model, &start, &target, &p).unwrap();
        prop_assert_eq!(a.q.map(f64::to_bits), b.q.map(f64::to_bits));
        let a = ik_solve_lm_task(&model, &start, &target, &p).unwrap();
        let b = ik_solve_lm_task(&model, &start, &target, &p).unwrap();
        prop_assert_eq!(a.q.map(f64::to_bits), b.q.map(f64::to_bits));
    }

    #[test]
    fn base_steps_compose(x in -5.0f64..5.0, y in -5.0f64..5.0, yaw in -3.0f64..3.0, vx in -1.0f64..1.0, vy in -1.0f64..1.0, dt in 0.001f64..0.1) {
        let p = BasePose::at(x, y, yaw);
        let twice = base_step(&base_step(&p, [vx, vy], dt), [vx, vy], dt);
        let once = base_step(&p, [vx, vy], 2.0 * dt);
        prop_assert!((twice.x - once.x).abs() < 1e-12);
        prop_assert!((twice.y - once.y).abs() < 1e-12);
        prop_assert_eq!(twice.yaw, once.yaw);
    }

    #[test]
    fn forward_kinematics_rotation_is_proper(q in joint_vector()) {
        let r = *forward_kinematics(&ArmModel::default(), &q).rotation.matrix();
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        prop_assert_eq!(ARM_DOF, q.len());
    }
}
