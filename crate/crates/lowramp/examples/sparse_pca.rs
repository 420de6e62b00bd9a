//! Sparse PCA with a Gauss-Bernoulli prior: Low-RAMP from a random and from
//! the planted start, against the state-evolution prediction.
//!
//! `cargo run --release --example sparse_pca -- [N]`

use lowramp::channels::ChannelSpec;
use lowramp::instance::{empirical_mse, generate_symmetric, Symmetry};
use lowramp::lowramp::{run_symmetric, AmpConfig, Init, Variant};
use lowramp::priors::PriorSpec;
use lowramp::quadrature::IntegrationConfig;
use lowramp::state_evolution::{iterate_scalar, FixedPointOptions, ScalarModel};

fn main() -> lowramp::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let prior = PriorSpec::GaussBernoulliJoint { rho: 0.1, rank: 1 };
    let model = ScalarModel::from_prior(&prior)?;
    let cfg = IntegrationConfig::default();
    let opts = FixedPointOptions::default();

    println!("delta    amp(random)  amp(planted)  se(low)   se(high)");
    for (k, delta) in [0.006, 0.012, 0.02].into_iter().enumerate() {
        let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(delta), n, k as u64)?;
        let x0 = instance.x0().expect("planted instance");
        let mut mse = [0.0; 2];
        for (slot, init) in [Init::Random { scale: 1e-3 }, Init::Planted].into_iter().enumerate() {
            let config = AmpConfig { init, variant: Variant::SelfAveraged, track_free_energy: false, ..AmpConfig::default() };
            let out = run_symmetric(&instance, &prior, &config)?;
            mse[slot] = empirical_mse(&out.state.x_hat_matrix(), x0, Symmetry::None)?;
        }
        let low = iterate_scalar(&model, delta, 1e-6, &opts, &cfg).mse;
        let high = iterate_scalar(&model, delta, model.m_max(), &opts, &cfg).mse;
        println!("{delta:<8} {:<12.5} {:<13.5} {low:<9.5} {high:.5}", mse[0], mse[1]);
    }
    Ok(())
}
