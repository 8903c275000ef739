mod common;

use common::gradops;
use common::*;
use tfnet_core::nnkernel::GradCheckReport;
use tfnet_core::objective::LossToggles;

const SEEDS: std::ops::Range<u64> = 0..10;

fn assert_ok(reports: Vec<GradCheckReport>, what: &str) {
    for report in reports {
        assert!(report.checked > 0, "{what}: nothing checked");
        assert!(
            report.max_rel_err < GRAD_TOL,
            "{what}: rel err {} at {:?} {:?}",
            report.max_rel_err,
            report.worst,
            report.worst_values
        );
    }
}

fn check_all_seeds(check: gradops::OpCheck, what: &str) {
    for seed in SEEDS {
        assert_ok(check(seed), what);
    }
}

#[test]
fn linear() {
    check_all_seeds(gradops::linear, "linear");
}

#[test]
fn conv1d_with_stride_and_padding() {
    check_all_seeds(gradops::conv1d, "conv1d");
}

#[test]
fn conv2d_relu_pool() {
    check_all_seeds(gradops::conv2d_relu_pool, "conv2d");
}

#[test]
fn maxpool() {
    check_all_seeds(gradops::maxpool, "maxpool");
}

#[test]
fn add() {
    check_all_seeds(gradops::add, "add");
}

#[test]
fn bilstm() {
    check_all_seeds(gradops::bilstm, "bilstm");
}

#[test]
fn dft_magnitude_op() {
    check_all_seeds(gradops::dft, "dft");
}

#[test]
fn full_model_all_losses() {
    check_all_seeds(gradops::full_model, "tfnet");
}

#[test]
fn full_model_ablations() {
    let mut cfg = toy_config();
    cfg.frequency_branch = false;
    assert_ok(vec![check_model(&cfg, LossToggles::default(), 3)], "temporal only");
    let mut cfg = toy_config();
    cfg.temporal_branch = false;
    assert_ok(vec![check_model(&cfg, LossToggles::default(), 4)], "frequency only");
    let off = LossToggles {
        vae_t: false,
        vae_f: false,
    };
    assert_ok(vec![check_model(&toy_config(), off, 5)], "ctc only");
}
