//! Spectral estimation through a non-Gaussian channel: with exponential
//! noise the score matrix reveals the spike well before the raw data do.
//! The signal is Gaussian with variance `v`; the spike leaves the bulk of
//! `S` for `v > 1` and that of `Y` only for `v > sqrt(2)`.

use lowramp::channels::{ChannelFamily, ChannelSpec};
use lowramp::instance::generate_symmetric;
use lowramp::priors::PriorSpec;
use lowramp::spectral::{top_components, LanczosOptions, SpectralSource};

fn main() -> lowramp::Result<()> {
    let n = 2000;
    let channel = ChannelSpec::bayes(ChannelFamily::Exponential);
    let opts = LanczosOptions::default();
    println!("v      overlap2(S)  overlap2(Y)");
    for v in [0.8, 1.2, 1.4, 1.6, 2.0, 2.5] {
        let prior = PriorSpec::gaussian_isotropic(1, v);
        let instance = generate_symmetric(&prior, &channel, n, 1)?;
        let x0 = instance.x0().expect("planted instance");
        let s = top_components(&instance, 1, SpectralSource::Score, &opts)?.overlaps(x0)?[0];
        let y = top_components(&instance, 1, SpectralSource::Data, &opts)?.overlaps(x0)?[0];
        println!("{v:<6} {s:<12.4} {y:.4}");
    }
    Ok(())
}
