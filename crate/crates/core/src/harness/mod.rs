//! Verification sweeps: configuration, the pinned function bank, the checks
//! themselves and report emission.

mod bank;
mod checks;
mod config;
mod kernel_bound;
mod report;

pub use bank::{bank_checksum, function_bank, BankProfile, BANK_CHECKSUM};
pub use checks::{
    run_decay_holder_checks, run_determinism_check, run_getoor_chain, run_kernel_exactness, run_mc_checks,
    run_operator_bound_sweep, run_roundtrip_and_residual, run_sharpness_demo,
};
pub use config::{CheckId, ParamGrid, Resolution, SweepConfig, Thresholds};
pub use kernel_bound::{
    check_gamma_hypothesis, kernel_integral_lhs, kernel_integral_rhs, run_kernel_bound_sweep, KernelCase,
};
pub use report::{emit_report, Case, CaseFlag, Criterion, Report, ReportFormat};

use crate::error::Result;

/// Runs the check selected by `id` with the overrides in `cfg`.
pub fn run_check(id: CheckId, cfg: &SweepConfig) -> Result<Report> {
    cfg.validate()?;
    match id {
        CheckId::KernelExactness => run_kernel_exactness(cfg),
        CheckId::Getoor => run_getoor_chain(cfg),
        CheckId::Roundtrip => run_roundtrip_and_residual(cfg),
        CheckId::Sharpness => run_sharpness_demo(cfg),
        CheckId::OperatorBound => run_operator_bound_sweep(cfg),
        CheckId::KernelBound => run_kernel_bound_sweep(cfg),
        CheckId::Mc => run_mc_checks(cfg),
        CheckId::DecayHolder => run_decay_holder_checks(cfg),
        CheckId::Determinism => run_determinism_check(cfg),
    }
}
