use ftp_core::gradcheck::{end_to_end_cross_entropy, end_to_end_info_nce, op_suite};

const TOL: f64 = 1e-3;

#[test]
fn every_op_matches_finite_differences() {
    for seed in [1, 2] {
        for (name, err) in op_suite(seed).unwrap() {
            assert!(err < TOL, "{name} (seed {seed}): relative error {err:e}");
        }
    }
}

#[test]
fn contrastive_stage_gradient() {
    for seed in [1, 2, 3] {
        let err = end_to_end_info_nce(seed).unwrap();
        assert!(err < TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn classification_stage_gradient() {
    for seed in [1, 2, 3] {
        let err = end_to_end_cross_entropy(seed).unwrap();
        assert!(err < TOL, "seed {seed}: relative error {err:e}");
    }
}

