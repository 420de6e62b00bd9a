//! Spinodals and information-theoretic threshold of Rademacher-Bernoulli
//! sparse PCA across densities, plus the tri-critical point where the
//! first-order window closes.

use lowramp::quadrature::IntegrationConfig;
use lowramp::state_evolution::{thresholds, transition_boundary, ScalarModel};

fn main() -> lowramp::Result<()> {
    let cfg = IntegrationConfig::default();
    println!("rho      delta_c     delta_alg   delta_it    delta_dyn");
    for rho in [0.02, 0.04, 0.06, 0.08, 0.1, 0.12] {
        let model = ScalarModel::RademacherBernoulli { rho };
        let t = thresholds(&model, &model.default_grid(), &cfg)?;
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{rho:<8} {:<11} {:<11} {:<11} {}",
            show(t.delta_c),
            show(t.delta_alg),
            show(t.delta_it),
            show(t.delta_dyn)
        );
    }

    let family = |rho: f64| Ok(ScalarModel::RademacherBernoulli { rho });
    let grid = ScalarModel::RademacherBernoulli { rho: 0.05 }.default_grid();
    let tri = transition_boundary(family, 0.05, 0.2, &grid, &cfg, 1e-5)?;
    println!("tri-critical point: rho = {:.5}, delta = {:.6}", tri.rho, tri.delta);
    Ok(())
}
