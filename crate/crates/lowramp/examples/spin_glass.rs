//! Sherrington-Kirkpatrick model: replica-symmetric overlap from state
//! evolution and a TAP (Low-RAMP) run on a quenched instance.

use lowramp::channels::{ChannelFamily, Disorder};
use lowramp::instance::generate_quenched;
use lowramp::lowramp::{run_symmetric, AmpConfig, Variant};
use lowramp::priors::PriorSpec;
use lowramp::quadrature::IntegrationConfig;
use lowramp::state_evolution::sk_state_evolution;

fn main() -> lowramp::Result<()> {
    let cfg = IntegrationConfig::default();
    for j in [0.5, 0.9, 1.1, 1.5, 2.0] {
        let s = sk_state_evolution(j, 0.5, &cfg);
        println!("J = {j}: q = {:.5}", s.q);
    }

    let j = 0.5;
    let instance = generate_quenched(&Disorder::Gaussian { j }, &ChannelFamily::Conventional { beta: 1.0 }, 2000, None, 11)?;
    let prior = PriorSpec::Ising { rho: 0.5 };
    let config = AmpConfig { variant: Variant::Full, init: lowramp::lowramp::Init::Random { scale: 0.5 }, ..AmpConfig::default() };
    let out = run_symmetric(&instance, &prior, &config)?;
    let m: f64 = out.state.x_hat.iter().sum::<f64>() / out.state.x_hat.len() as f64;
    println!("TAP at J = {j}: converged = {}, iterations = {}, mean magnetisation = {m:.4}", out.converged, out.state.t);
    Ok(())
}
