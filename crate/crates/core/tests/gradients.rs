use hogrl::model::ForwardMode;
use hogrl::training::gradcheck::{gradcheck, GradcheckProblem, GradcheckSize, DEFAULT_STEP, DEFAULT_TOLERANCE};

#[test]
fn small_instances_match_finite_differences() {
    for seed in 0..5 {
        for mode in [ForwardMode::Eval, ForwardMode::Train { seed: 40 + seed }] {
            let mut problem = GradcheckProblem::generate(GradcheckSize::Small, seed).unwrap();
            problem.mode = mode;
            let report = gradcheck(&problem, DEFAULT_STEP).unwrap();
            assert!(report.passes(DEFAULT_TOLERANCE), "seed {seed} {mode:?}: {report:?}");
        }
    }
}

#[test]
fn medium_instance_matches_finite_differences() {
    let problem = GradcheckProblem::generate(GradcheckSize::Medium, 3).unwrap();
    let report = gradcheck(&problem, DEFAULT_STEP).unwrap();
    assert!(report.passes(DEFAULT_TOLERANCE), "{report:?}");
    assert_eq!(report.checked, problem.params.num_scalars());
}

#[test]
fn subset_loss_and_gamma_zero_match_finite_differences() {
    let mut problem = GradcheckProblem::generate(GradcheckSize::Small, 11).unwrap();
    problem.nodes = vec![1, 4, 6];
    problem.targets = vec![1, 0, 1];
    assert!(gradcheck(&problem, DEFAULT_STEP).unwrap().passes(DEFAULT_TOLERANCE));
    problem.config.gamma = 0.0;
    assert!(gradcheck(&problem, DEFAULT_STEP).unwrap().passes(DEFAULT_TOLERANCE));
}
