//! The parametric fixed-point curve of Gauss-Bernoulli sparse PCA and the
//! Bethe free energy of Low-RAMP fixed points on one instance.

use lowramp::channels::ChannelSpec;
use lowramp::instance::generate_symmetric;
use lowramp::lowramp::{bethe_free_energy, run_symmetric, AmpConfig, BetheMode, Init, Variant};
use lowramp::priors::PriorSpec;
use lowramp::quadrature::IntegrationConfig;
use lowramp::state_evolution::{fixed_point_curve, thresholds, ScalarModel};

fn main() -> lowramp::Result<()> {
    let cfg = IntegrationConfig::default();
    let model = ScalarModel::GaussBernoulli { rho: 0.1 };
    let grid = model.default_grid();
    let t = thresholds(&model, &grid, &cfg)?;
    println!("thresholds: {t:?}");
    let curve = fixed_point_curve(&model, &grid, &cfg)?;
    for p in curve.iter().step_by(curve.len() / 12) {
        println!("x = {:<10.4e} delta = {:<10.4e} m = {:.4} stable = {:<5} gap = {:.3e}", p.x, p.delta, p.m, p.stable, p.free_energy_gap);
    }

    // Inside the hard phase two fixed points coexist; the Bethe free energy
    // ranks them.
    let prior = PriorSpec::GaussBernoulliJoint { rho: 0.1, rank: 1 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.014), 2000, 9)?;
    let (inv_delta, r_bar) = instance.empirical_noise();
    let mode = BetheMode::SelfAveraged { inv_delta, r_bar };
    for init in [Init::Random { scale: 1e-3 }, Init::Planted] {
        let config = AmpConfig { init, variant: Variant::SelfAveraged, ..AmpConfig::default() };
        let out = run_symmetric(&instance, &prior, &config)?;
        let f = bethe_free_energy(&instance, &out.state, mode)?;
        println!("{init:?}: converged = {}, Bethe free energy = {f:.4}", out.converged);
    }
    Ok(())
}
