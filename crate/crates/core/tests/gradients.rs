mod common;

use common::*;
use layoutsim::diffsim::NormalForce;

#[test]
fn end_to_end_gradients_match_differences() {
    for (name, scene) in gradient_scenes() {
        let (err, loss) = end_to_end_gradient_error(&scene, 1e-6).unwrap();
        assert!(loss > 0.0);
        assert!(err < 1e-2, "{name}: {err}");
    }
}

#[test]
fn step_jacobian_matches_the_forward_step() {
    for (name, scene) in gradient_scenes() {
        for seed in 0..4 {
            let err = step_jacobian_error(&scene, seed, 1e-7, NormalForce::Differentiated).unwrap();
            assert!(err < 1e-3, "{name}: {err}");
        }
    }
}

#[test]
fn step_jacobian_is_exact_for_lagged_friction() {
    for (name, scene) in gradient_scenes() {
        for seed in 0..3 {
            let err = step_jacobian_error(&scene, seed, 1e-7, NormalForce::Lagged).unwrap();
            assert!(err < 1e-5, "{name}: {err}");
        }
    }
}

#[test]
fn energy_gradients_match_differences() {
    for (name, scene) in gradient_scenes() {
        for seed in 0..3 {
            let errs = energy_gradient_errors(&scene, seed).unwrap();
            assert!(errs.iter().all(|e| *e < 1e-4), "{name}: {errs:?}");
        }
    }
}
