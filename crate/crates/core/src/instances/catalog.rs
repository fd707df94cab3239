use crate::error::Result;
use crate::optimizers::StepSizeFn;

use super::{
    chain_objective, chain_schedule, coordwise_exp_objective, drori_objective, dyadic_period,
    hinge_objective, max_admissible_gamma, periodic_exp_objective, psi_inverse_slope, psi_objective,
    quad_bump_objective, slope_cap, tricky_linear_objective, ProblemInstance, ProblemParams,
};

/// One reference configuration of every instance family, at the parameters
/// the acceptance runs use.
pub fn reference_instances() -> Result<Vec<(&'static str, ProblemInstance)>> {
    let unit = ProblemParams::default();
    let gmax = max_admissible_gamma(&unit, 1.0);
    let chain = chain_schedule(&unit, 1.0, 0.5 * gmax, 64)?;

    let drori_p = ProblemParams {
        sigma: 1.0,
        epsilon: 0.07,
        ..unit
    };
    let coord_p = ProblemParams {
        sigma: 1.0,
        epsilon: 0.1,
        ..unit
    };
    let hinge_p = ProblemParams {
        delta: 10.0,
        epsilon: 0.025,
        ..unit
    };
    let tricky_p = ProblemParams {
        delta: 10.0,
        sigma1: 1.0,
        sigma2: 4.0,
        epsilon: 0.1,
        ..unit
    };
    let g = slope_cap(&tricky_p);
    let periodic_p = ProblemParams {
        sigma1: 1.0,
        sigma2: 2.0,
        epsilon: 0.1,
        ..unit
    };
    let period = dyadic_period(psi_inverse_slope(1.0, 1.0, 1.0));
    let quad_p = ProblemParams {
        delta: 2.0,
        sigma1: 1.0,
        sigma2: 1.0,
        epsilon: 0.1,
        ..unit
    };

    Ok(vec![
        ("psi", psi_objective(&unit)?),
        ("chain", chain_objective(&chain, &unit)?),
        ("drori", drori_objective(&drori_p, 1.0, 1.0, 1000, 1001)?),
        ("coordwise_exp", coordwise_exp_objective(&coord_p, 1001)?),
        ("hinge", hinge_objective(&hinge_p)?),
        (
            "tricky_linear",
            tricky_linear_objective(
                &[-0.3 * g],
                &[0.95 * g],
                2.0 / 3.0,
                &StepSizeFn::Normalized { c: 0.5 },
                &tricky_p,
            )?,
        ),
        ("periodic_exp", periodic_exp_objective(&[2.0, 0.0], period / 2.0, &periodic_p)?),
        ("periodic_exp_uphill", periodic_exp_objective(&[2.0], -0.5, &periodic_p)?),
        (
            "quad_bump",
            quad_bump_objective(&StepSizeFn::Clip { eta: 0.5, c: 0.5 }, &quad_p, 200, 201)?,
        ),
    ])
}
