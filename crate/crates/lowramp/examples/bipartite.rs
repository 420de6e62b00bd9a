//! Bipartite `U V^T` estimation: Gaussian `U`, sparse `V`, with the
//! state-evolution prediction for comparison.

use lowramp::channels::ChannelSpec;
use lowramp::instance::generate_bipartite;
use lowramp::lowramp::{run_bipartite, AmpConfig, Variant};
use lowramp::priors::PriorSpec;
use nalgebra::DMatrix;

use lowramp::state_evolution::{iterate_bipartite, BipartiteSEModel, FixedPointOptions, SEOrderParams};

fn main() -> lowramp::Result<()> {
    let (n, m) = (2000, 1000);
    let pu = PriorSpec::gaussian_isotropic(1, 1.0);
    let pv = PriorSpec::RademacherBernoulli { rho: 0.3 };
    let delta = 0.08;
    let instance = generate_bipartite(&pu, &pv, &ChannelSpec::gaussian(delta), n, m, 5)?;
    let config = AmpConfig { variant: Variant::SelfAveraged, track_free_energy: false, ..AmpConfig::default() };
    let out = run_bipartite(&instance, &pu, &pv, &config)?;
    println!(
        "Low-RAMP: converged = {} in {} iterations, mse_u = {:.4}, mse_v = {:.4}",
        out.converged,
        out.state.t,
        out.mse_u.unwrap_or(f64::NAN),
        out.mse_v.unwrap_or(f64::NAN)
    );

    // Start both factors from a small overlap on the Nishimori manifold.
    let (su, sv) = (pu.moments().1, pv.moments().1);
    let start = |s: &DMatrix<f64>| SEOrderParams::bayes(DMatrix::identity(1, 1) * 1e-4, s);
    let model = BipartiteSEModel::bayes(pu, pv, delta, m as f64 / n as f64);
    let fp = iterate_bipartite(&model, &start(&su), &start(&sv), &FixedPointOptions::default())?;
    let (u, v) = &fp.params;
    println!("state evolution: mse_u = {:.4}, mse_v = {:.4}", u.mse(&su), v.mse(&sv));
    Ok(())
}
