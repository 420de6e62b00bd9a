//! Generating, storing and reloading instances, with a mismatched channel
//! whose assumed noise level differs from the true one.

use lowramp::channels::{ChannelFamily, ChannelSpec};
use lowramp::instance::{generate_symmetric, FileFormat, ProblemInstance};
use lowramp::priors::PriorSpec;
use lowramp::quadrature::IntegrationConfig;

fn main() -> lowramp::Result<()> {
    let dir = std::env::temp_dir().join("lowramp-instances-example");
    let prior = PriorSpec::TwoBalanced { rho: 0.3 };
    let channel = ChannelSpec::mismatched(
        ChannelFamily::Gaussian { delta: 0.3 },
        ChannelFamily::Gaussian { delta: 0.2 },
    );
    let instance = generate_symmetric(&prior, &channel, 500, 42)?;
    instance.save(&dir, FileFormat::Binary)?;
    let back = ProblemInstance::load(&dir)?;
    assert_eq!(back, instance);

    let noise = channel.noise_params(&IntegrationConfig::default())?;
    let (inv_delta, r_bar) = back.empirical_noise();
    println!("stored in {}", dir.display());
    println!("theory:    1/delta_tilde = {:.4}, r_bar = {:.4}", 1.0 / noise.delta_tilde, noise.r_bar);
    println!("empirical: 1/delta_tilde = {inv_delta:.4}, r_bar = {r_bar:.4}");
    Ok(())
}
