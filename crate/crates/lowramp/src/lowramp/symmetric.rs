use std::mem;

use crate::instance::{empirical_mse, Generator, ProblemInstance};
use crate::priors::PriorSpec;
use crate::{Error, Result};

use super::bethe::{bethe_free_energy, BetheMode};
use super::kernels::{second_moments, subtract_shared_onsager, symmetric_sums, Sums};
use super::{
    change_and_max_norm, check_finite, damp, default_symmetry, initial_estimates, to_diverged, update_sites,
    AmpConfig, AmpState, Damping, TraceRow, Variant,
};

/// Result of a symmetric run.
#[derive(Debug, Clone)]
pub struct AmpOutcome {
    pub state: AmpState,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Noise constants used by the shared-field variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SharedNoise {
    pub inv_delta: f64,
    pub r_bar: f64,
}

pub(crate) fn shared_noise(instance: &ProblemInstance, variant: Variant) -> Result<Option<SharedNoise>> {
    match variant {
        Variant::Full => Ok(None),
        Variant::SelfAveraged => {
            let (inv_delta, r_bar) = instance.empirical_noise();
            Ok(Some(SharedNoise { inv_delta, r_bar }))
        }
        Variant::Bayes => match &instance.generator {
            Generator::Planted { channel } => {
                let delta = channel.generating.fisher_delta()?;
                Ok(Some(SharedNoise { inv_delta: 1.0 / delta, r_bar: 0.0 }))
            }
            Generator::Quenched { .. } => Err(Error::Config(
                "the bayes variant needs a planted instance with a generative channel".into(),
            )),
        },
    }
}

pub(crate) fn bethe_mode(noise: Option<SharedNoise>) -> BetheMode {
    match noise {
        None => BetheMode::Exact,
        Some(SharedNoise { inv_delta, r_bar }) => BetheMode::SelfAveraged { inv_delta, r_bar },
    }
}

/// One Low-RAMP iteration on a symmetric instance with damping `lambda`.
///
/// Computes `B` and `A` from the current means, damps them against the
/// previous fields and refreshes the means; the Onsager term multiplies
/// `x_hat_old`, the means of the previous iteration.
pub fn symmetric_step(
    instance: &ProblemInstance,
    prior: &PriorSpec,
    state: &mut AmpState,
    variant: Variant,
    lambda: f64,
) -> Result<()> {
    let noise = shared_noise(instance, variant)?;
    step_with(instance, prior, state, noise, lambda)
}

pub(crate) fn step_with(
    instance: &ProblemInstance,
    prior: &PriorSpec,
    state: &mut AmpState,
    noise: Option<SharedNoise>,
    lambda: f64,
) -> Result<()> {
    let y = instance.symmetric_y()?;
    let (n, r) = (state.n, state.rank);
    if y.n() != n {
        return Err(Error::ShapeMismatch(format!("state has {n} nodes, instance has {}", y.n())));
    }
    let rr = r * r;
    let nf = n as f64;
    let inv_sqrt_n = 1.0 / nf.sqrt();
    let map = instance.score_map();
    let mut b_new = vec![0.0; n * r];
    let mut a_new = vec![0.0; n * rr];
    match noise {
        None => {
            let width = Sums::Full.width(r);
            let sums = symmetric_sums(y, map, Sums::Full, r, &state.x_hat, &state.sigma);
            for i in 0..n {
                let row = &sums[i * width..(i + 1) * width];
                let ons = &row[r..r + rr];
                let acc = &row[r + rr..];
                for a in 0..r {
                    let mut corr = 0.0;
                    for c in 0..r {
                        corr += ons[a * r + c] * state.x_hat_old[i * r + c];
                    }
                    b_new[i * r + a] = row[a] * inv_sqrt_n - corr / nf;
                }
                for (dst, v) in a_new[i * rr..(i + 1) * rr].iter_mut().zip(acc) {
                    *dst = v / nf;
                }
            }
        }
        Some(SharedNoise { inv_delta, r_bar }) => {
            let bs = symmetric_sums(y, map, Sums::Matvec, r, &state.x_hat, &state.sigma);
            for (dst, v) in b_new.iter_mut().zip(&bs) {
                *dst = v * inv_sqrt_n;
            }
            let (xx, ss) = second_moments(r, &state.x_hat, &state.sigma);
            let ons: Vec<f64> = ss.iter().map(|v| v * inv_delta / nf).collect();
            subtract_shared_onsager(&mut b_new, &ons, &state.x_hat_old, r);
            let shared: Vec<f64> = xx
                .iter()
                .zip(&ss)
                .map(|(x, s)| (inv_delta * x - r_bar * (x + s)) / nf)
                .collect();
            for i in 0..n {
                a_new[i * rr..(i + 1) * rr].copy_from_slice(&shared);
            }
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

/// Runs Low-RAMP on a symmetric instance until `conv * lambda <= tol` or
/// `max_iters` iterations.
pub fn run_symmetric(instance: &ProblemInstance, prior: &PriorSpec, config: &AmpConfig) -> Result<AmpOutcome> {
    config.validate()?;
    prior.validate()?;
    instance.symmetric_y()?;
    let r = prior.rank();
    let x_init = initial_estimates(config.init, instance.n, r, instance.x0(), config.seed)?;
    let mut state = AmpState::new(&x_init);
    let noise = shared_noise(instance, config.variant)?;
    let mode = bethe_mode(noise);
    let planted = instance.x0().filter(|x0| x0.shape() == (instance.n, r));
    let symmetry = default_symmetry(prior);
    let mut damping = Damping::new(config.damping, config.adaptive_damping);
    let mut trace = Vec::new();
    while state.conv * damping.current > config.tol && state.t < config.max_iters {
        step_with(instance, prior, &mut state, noise, damping.current)?;
        damping.observe(state.conv);
        let mse = match planted {
            Some(x0) => Some(empirical_mse(&state.x_hat_matrix(), x0, symmetry)?),
            None => None,
        };
        let free_energy = if config.track_free_energy {
            let f = bethe_free_energy(instance, &state, mode)?;
            state.free_energy_trace.push(f);
            Some(f)
        } else {
            None
        };
        trace.push(TraceRow { t: state.t, conv: state.conv, mse, free_energy });
    }
    let converged = state.conv * damping.current <= config.tol;
    Ok(AmpOutcome { state, converged, trace })
}
