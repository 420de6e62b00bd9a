//! Naive variational mean field, kept as a baseline for Low-RAMP.
//!
//! Same loop as Low-RAMP but without the Onsager reaction term, and with
//! `A_i = (1/N) sum_k (S_ki^2 - R_ki)(x_k x_k^T + sigma_k)`.

use std::mem;

use crate::instance::{empirical_mse, ProblemInstance};
use crate::priors::PriorSpec;
use crate::{Error, Result};

use super::kernels::{symmetric_sums, Sums};
use super::{
    change_and_max_norm, check_finite, damp, default_symmetry, initial_estimates, to_diverged, update_sites,
    AmpConfig, AmpOutcome, AmpState, Damping, TraceRow,
};

/// One mean-field iteration with damping `lambda`.
pub fn mean_field_step(
    instance: &ProblemInstance,
    prior: &PriorSpec,
    state: &mut AmpState,
    lambda: f64,
) -> Result<()> {
    let y = instance.symmetric_y()?;
    let (n, r) = (state.n, state.rank);
    if y.n() != n {
        return Err(Error::ShapeMismatch(format!("state has {n} nodes, instance has {}", y.n())));
    }
    let rr = r * r;
    let nf = n as f64;
    let width = Sums::MeanField.width(r);
    let sums = symmetric_sums(y, instance.score_map(), Sums::MeanField, r, &state.x_hat, &state.sigma);
    let mut b_new = vec![0.0; n * r];
    let mut a_new = vec![0.0; n * rr];
    for i in 0..n {
        let row = &sums[i * width..(i + 1) * width];
        for p in 0..r {
            b_new[i * r + p] = row[p] / nf.sqrt();
        }
        for (dst, v) in a_new[i * rr..(i + 1) * rr].iter_mut().zip(&row[r..]) {
            *dst = v / nf;
        }
    }
    damp(&mut b_new, &state.b, lambda);
    damp(&mut a_new, &state.a, lambda);
    state.b_old = mem::replace(&mut state.b, b_new);
    state.a_old = mem::replace(&mut state.a, a_new);
    state.t += 1;
    state.x_hat_old.copy_from_slice(&state.x_hat);
    update_sites(prior, r, &state.a, &state.b, &mut state.x_hat, &mut state.sigma, &mut state.log_z)
        .map_err(|e| to_diverged(state.t, e))?;
    let (conv, max_norm) = change_and_max_norm(&state.x_hat, &state.x_hat_old, r);
    state.conv = conv;
    check_finite(state.t, &state.x_hat, max_norm)
}

/// Runs the mean-field iteration with the loop control of Low-RAMP.
pub fn mean_field_run(instance: &ProblemInstance, prior: &PriorSpec, config: &AmpConfig) -> Result<AmpOutcome> {
    config.validate()?;
    prior.validate()?;
    instance.symmetric_y()?;
    let r = prior.rank();
    let x_init = initial_estimates(config.init, instance.n, r, instance.x0(), config.seed)?;
    let mut state = AmpState::new(&x_init);
    let planted = instance.x0().filter(|x0| x0.shape() == (instance.n, r));
    let symmetry = default_symmetry(prior);
    let mut damping = Damping::new(config.damping, config.adaptive_damping);
    let mut trace = Vec::new();
    while state.conv * damping.current > config.tol && state.t < config.max_iters {
        mean_field_step(instance, prior, &mut state, damping.current)?;
        damping.observe(state.conv);
        let mse = match planted {
            Some(x0) => Some(empirical_mse(&state.x_hat_matrix(), x0, symmetry)?),
            None => None,
        };
        trace.push(TraceRow { t: state.t, conv: state.conv, mse, free_energy: None });
    }
    let converged = state.conv * damping.current <= config.tol;
    Ok(AmpOutcome { state, converged, trace })
}
