use std::mem;

use crate::instance::{derive_seed, empirical_mse, DenseRect, Generator, ProblemInstance};
use crate::priors::PriorSpec;
use crate::{Error, Result};

use super::bethe::bethe_free_energy_bipartite;
use super::kernels::{column_sums, row_sums, second_moments, subtract_shared_onsager, Sums};
use super::symmetric::SharedNoise;
use super::{
    change_and_max_norm, check_finite, damp, default_symmetry, initial_estimates, to_diverged, update_sites,
    AmpConfig, AmpState, Damping, TraceRow, Variant,
};

/// Estimates of both factors.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    pub u: AmpState,
    pub v: AmpState,
    pub t: usize,
    pub conv: f64,
}

#[derive(Debug, Clone)]
pub struct BipartiteOutcome {
    pub state: BipartiteState,
    pub converged: bool,
    /// The `mse` column reports the `U` factor.
    pub trace: Vec<TraceRow>,
    pub mse_u: Option<f64>,
    pub mse_v: Option<f64>,
}

fn shared_noise(instance: &ProblemInstance, variant: Variant) -> Result<Option<SharedNoise>> {
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

/// New fields for one side from sums over the other side.
///
/// `sums` holds `width`-sized rows as produced by the kernels, `other` is
/// the state of the factor being summed over and `onsager_x` the means
/// multiplying the reaction term.
fn fields_from_sums(
    sums: &[f64],
    r: usize,
    count: usize,
    other: &AmpState,
    onsager_x: &[f64],
    noise: Option<SharedNoise>,
    nf: f64,
) -> (Vec<f64>, Vec<f64>) {
    let rr = r * r;
    let inv_sqrt_n = 1.0 / nf.sqrt();
    let mut b = vec![0.0; count * r];
    let mut a = vec![0.0; count * rr];
    match noise {
        None => {
            let width = Sums::Full.width(r);
            for i in 0..count {
                let row = &sums[i * width..(i + 1) * width];
                let ons = &row[r..r + rr];
                for p in 0..r {
                    let mut corr = 0.0;
                    for q in 0..r {
                        corr += ons[p * r + q] * onsager_x[i * r + q];
                    }
                    b[i * r + p] = row[p] * inv_sqrt_n - corr / nf;
                }
                for (dst, v) in a[i * rr..(i + 1) * rr].iter_mut().zip(&row[r + rr..]) {
                    *dst = v / nf;
                }
            }
        }
        Some(SharedNoise { inv_delta, r_bar }) => {
            for (dst, v) in b.iter_mut().zip(sums) {
                *dst = v * inv_sqrt_n;
            }
            let (xx, ss) = second_moments(r, &other.x_hat, &other.sigma);
            let ons: Vec<f64> = ss.iter().map(|v| v * inv_delta / nf).collect();
            subtract_shared_onsager(&mut b, &ons, onsager_x, r);
            let shared: Vec<f64> =
                xx.iter().zip(&ss).map(|(x, s)| (inv_delta * x - r_bar * (x + s)) / nf).collect();
            for i in 0..count {
                a[i * rr..(i + 1) * rr].copy_from_slice(&shared);
            }
        }
    }
    (b, a)
}

fn commit(
    side: &mut AmpState,
    prior: &PriorSpec,
    mut b: Vec<f64>,
    mut a: Vec<f64>,
    lambda: f64,
    t: usize,
) -> Result<f64> {
    damp(&mut b, &side.b, lambda);
    damp(&mut a, &side.a, lambda);
    side.b_old = mem::replace(&mut side.b, b);
    side.a_old = mem::replace(&mut side.a, a);
    side.x_hat_old.copy_from_slice(&side.x_hat);
    side.t = t;
    update_sites(prior, side.rank, &side.a, &side.b, &mut side.x_hat, &mut side.sigma, &mut side.log_z)
        .map_err(|e| to_diverged(t, e))?;
    let (conv, max_norm) = change_and_max_norm(&side.x_hat, &side.x_hat_old, side.rank);
    side.conv = conv;
    check_finite(t, &side.x_hat, max_norm)?;
    Ok(conv)
}

fn step_with(
    y: &DenseRect,
    instance: &ProblemInstance,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    state: &mut BipartiteState,
    noise: Option<SharedNoise>,
    lambda: f64,
) -> Result<()> {
    let r = state.u.rank;
    let (n, m) = y.shape();
    let nf = n as f64;
    let map = instance.score_map();
    let kind = if noise.is_none() { Sums::Full } else { Sums::Matvec };
    let t = state.t + 1;

    let sums_u = row_sums(y, map, kind, r, &state.v.x_hat, &state.v.sigma);
    let (b_u, a_u) = fields_from_sums(&sums_u, r, n, &state.v, &state.u.x_hat_old, noise, nf);
    let conv_u = commit(&mut state.u, prior_u, b_u, a_u, lambda, t)?;

    let sums_v = column_sums(y, map, kind, r, &state.u.x_hat, &state.u.sigma);
    let (b_v, a_v) = fields_from_sums(&sums_v, r, m, &state.u, &state.v.x_hat, noise, nf);
    let conv_v = commit(&mut state.v, prior_v, b_v, a_v, lambda, t)?;

    state.t = t;
    state.conv = conv_u + conv_v;
    Ok(())
}

/// One bipartite iteration: `U` from the current `V`, then `V` from the new `U`.
pub fn bipartite_step(
    instance: &ProblemInstance,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    state: &mut BipartiteState,
    variant: Variant,
    lambda: f64,
) -> Result<()> {
    let y = instance.bipartite_y()?;
    let noise = shared_noise(instance, variant)?;
    step_with(y, instance, prior_u, prior_v, state, noise, lambda)
}

/// Runs bipartite Low-RAMP.
pub fn run_bipartite(
    instance: &ProblemInstance,
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    config: &AmpConfig,
) -> Result<BipartiteOutcome> {
    config.validate()?;
    prior_u.validate()?;
    prior_v.validate()?;
    let y = instance.bipartite_y()?;
    let r = prior_u.rank();
    if prior_v.rank() != r {
        return Err(Error::ShapeMismatch("priors of U and V must have equal rank".into()));
    }
    let (n, m) = y.shape();
    let (u0, v0) = match instance.uv0() {
        Some((u0, v0)) => (Some(u0), Some(v0)),
        None => (None, None),
    };
    let u_init = initial_estimates(config.init, n, r, u0, derive_seed(config.seed, 1))?;
    let v_init = initial_estimates(config.init, m, r, v0, derive_seed(config.seed, 2))?;
    let mut state = BipartiteState { u: AmpState::new(&u_init), v: AmpState::new(&v_init), t: 0, conv: f64::INFINITY };
    let noise = shared_noise(instance, config.variant)?;
    let planted_u = u0.filter(|x| x.shape() == (n, r));
    let planted_v = v0.filter(|x| x.shape() == (m, r));
    let (sym_u, sym_v) = (default_symmetry(prior_u), default_symmetry(prior_v));
    let mut damping = Damping::new(config.damping, config.adaptive_damping);
    let mut trace = Vec::new();
    while state.conv * damping.current > config.tol && state.t < config.max_iters {
        step_with(y, instance, prior_u, prior_v, &mut state, noise, damping.current)?;
        damping.observe(state.conv);
        let mse = match planted_u {
            Some(x0) => Some(empirical_mse(&state.u.x_hat_matrix(), x0, sym_u)?),
            None => None,
        };
        let free_energy = if config.track_free_energy {
            let f = bethe_free_energy_bipartite(instance, &state)?;
            state.u.free_energy_trace.push(f);
            Some(f)
        } else {
            None
        };
        trace.push(TraceRow { t: state.t, conv: state.conv, mse, free_energy });
    }
    let converged = state.conv * damping.current <= config.tol;
    let mse_u = match planted_u {
        Some(x0) => Some(empirical_mse(&state.u.x_hat_matrix(), x0, sym_u)?),
        None => None,
    };
    let mse_v = match planted_v {
        Some(x0) => Some(empirical_mse(&state.v.x_hat_matrix(), x0, sym_v)?),
        None => None,
    };
    Ok(BipartiteOutcome { state, converged, trace, mse_u, mse_v })
}
