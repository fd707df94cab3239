//! Trajectory verification, hitting times and scaling fits, and the random
//! walk and sequence machinery behind the single-step bounds.

mod chain_check;
mod hitting;
mod sequences;
mod sweep;
mod tricky;
mod walk;

pub use chain_check::{verify_chain_divergence, VerificationReport, TRAJECTORY_TOLERANCE};
pub use hitting::{
    adagrad_eta_threshold, closed_form_lower_bound, coordinate_eta_threshold, fit_scaling_exponent,
    hinge_slow_bound, hinge_slow_bound_in_params, measure_hitting_time, HittingTime, HittingTimeResult,
    ScalingFit,
};
pub use sequences::{
    escalation_sequences, exp_seq_count, exp_seq_count_checked, exp_seq_count_iterated, Escalation,
    SeqParams, ITERATION_CHECK_LIMIT,
};
pub use sweep::{hinge_sweep, run_parallel, EtaRule, HingeSweep, SweepOutcome, SweepRow};
pub use tricky::{check_tricky_pair, ConditionOutcome, TrickyPairReport};
pub use walk::{
    critical_lambda, gamma_constants, gamma_walk_p, h_lambda, h_lambda_root, h_lambda_slope, lambda0,
    mc_bisect_tolerance, walk_hit_probability, zeta, GammaConstants, Lambda0Estimate, Lambda0Method,
    RootHistory, WalkEstimate, DEFAULT_BARRIER, DEFAULT_HORIZON,
};
