//! Bodies of the subcommands. Each returns the table it prints, except
//! `gen`, whose product is the instance directory.

use rayon::prelude::*;

use super::{
    AmpArgs, AmpFlags, CompareArgs, GenArgs, GridArgs, InitTag, PhaseScanArgs, Rescale, SeArgs,
    SeInit, SourceTag, SpectralArgs, Storage, Table, VariantTag,
};
use crate::channels::{noise_params, noise_params_quenched, ChannelFamily, ChannelSpec, NoiseParams};
use crate::instance::{
    derive_seed, empirical_mse, fmt_f64, generate_bipartite, generate_quenched, generate_symmetric,
    write_f64_bin, write_matrix_bin, FileFormat, Generator, Observations, ProblemInstance,
};
use crate::lowramp::{default_symmetry, mean_field_run, run_bipartite, run_symmetric, AmpConfig, Init, Variant};
use crate::quadrature::{log_grid, IntegrationConfig};
use crate::spectral::{top_components, LanczosOptions, SpectralSource};
use crate::state_evolution::{
    fixed_point_curve, free_energy_gap, iterate_scalar, pca_analysis, pca_mse, sk_free_energy,
    sk_state_evolution, thresholds, FixedPointOptions, ScalarModel,
};
use crate::{Error, Result};

/// Starting overlap of the uninformative state-evolution branch.
const SE_UNINFORMATIVE: f64 = 1e-6;

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let bipartite = a.m.is_some() || a.prior_v.prior_v.is_some();
    let instance = match a.disorder {
        Some(tag) => {
            let assumed = a
                .channel
                .assumed()?
                .ok_or_else(|| Error::Config("quenched instances need --assumed".into()))?;
            let m = if bipartite { Some(a.m.unwrap_or(a.n)) } else { None };
            generate_quenched(&tag.build(a.j), &assumed, a.n, m, a.seed)?
        }
        None => {
            let prior = super::need(a.prior.build()?, "prior", "a planted instance")?;
            let channel = a.channel.spec()?;
            if bipartite {
                let prior_v = a.prior_v.build(a.prior.rank)?.unwrap_or_else(|| prior.clone());
                generate_bipartite(&prior, &prior_v, &channel, a.n, a.m.unwrap_or(a.n), a.seed)?
            } else {
                generate_symmetric(&prior, &channel, a.n, a.seed)?
            }
        }
    };
    let file_format = match a.storage {
        Storage::Binary => FileFormat::Binary,
        Storage::Csv => FileFormat::Csv,
    };
    instance.save(&a.out, file_format)?;
    eprintln!("wrote {:?} instance (N = {}, M = {}) to {}", instance.kind, instance.n, instance.m, a.out.display());
    Ok(())
}

fn amp_config(f: &AmpFlags, n: usize, seed: u64) -> AmpConfig {
    AmpConfig {
        damping: f.damping,
        tol: f.tol,
        max_iters: f.max_iters,
        init: match f.init {
            InitTag::Random => Init::Random { scale: f.init_scale },
            InitTag::Planted => Init::Planted,
        },
        variant: match f.variant {
            Some(VariantTag::Full) => Variant::Full,
            Some(VariantTag::SelfAveraged) => Variant::SelfAveraged,
            Some(VariantTag::Bayes) => Variant::Bayes,
            None => AmpConfig::default_variant(n),
        },
        adaptive_damping: f.adaptive_damping,
        track_free_energy: !f.no_free_energy,
        seed,
    }
}

fn trace_table(trace: &[crate::lowramp::TraceRow]) -> Table {
    let mut table = Table::new(&["t", "conv", "mse", "free_energy"]);
    for row in trace {
        table.push(vec![row.t.into(), row.conv.into(), row.mse.into(), row.free_energy.into()]);
    }
    table
}

pub fn cmd_amp(a: &AmpArgs) -> Result<Table> {
    let instance = ProblemInstance::load(&a.instance)?;
    let prior = match a.prior.build()? {
        Some(p) => p,
        None => instance
            .priors
            .first()
            .cloned()
            .ok_or_else(|| Error::Config("instance has no planted prior; pass --prior".into()))?,
    };
    let config = amp_config(&a.amp, instance.n, a.seed);
    let dir = &a.instance;
    if instance.uv0().is_some() || matches!(instance.y, Observations::Bipartite(_)) {
        let prior_v = match a.prior_v.build(a.prior.rank)? {
            Some(p) => p,
            None => instance.priors.get(1).cloned().unwrap_or_else(|| prior.clone()),
        };
        let out = run_bipartite(&instance, &prior, &prior_v, &config)?;
        let (u, v) = (&out.state.u, &out.state.v);
        write_matrix_bin(&dir.join("u_hat.bin"), &u.x_hat_matrix())?;
        write_matrix_bin(&dir.join("v_hat.bin"), &v.x_hat_matrix())?;
        write_f64_bin(&dir.join("sigma_u.bin"), &u.sigma)?;
        write_f64_bin(&dir.join("sigma_v.bin"), &v.sigma)?;
        eprintln!(
            "converged: {} after {} iterations; mse_u = {}, mse_v = {}",
            out.converged,
            out.state.t,
            out.mse_u.map_or("n/a".into(), fmt_f64),
            out.mse_v.map_or("n/a".into(), fmt_f64),
        );
        return Ok(trace_table(&out.trace));
    }
    let out = if a.mean_field {
        mean_field_run(&instance, &prior, &config)?
    } else {
        run_symmetric(&instance, &prior, &config)?
    };
    write_matrix_bin(&dir.join("x_hat.bin"), &out.state.x_hat_matrix())?;
    write_f64_bin(&dir.join("sigma.bin"), &out.state.sigma)?;
    let last = out.trace.last().and_then(|r| r.mse);
    eprintln!(
        "converged: {} after {} iterations; mse = {}",
        out.converged,
        out.state.t,
        last.map_or("n/a".into(), fmt_f64)
    );
    Ok(trace_table(&out.trace))
}

fn grid_from(args: &GridArgs, model: &ScalarModel) -> Result<Vec<f64>> {
    match (args.x_min, args.x_max, args.x_points) {
        (None, None, None) => Ok(model.default_grid()),
        (lo, hi, n) => {
            let lo = lo.unwrap_or(1e-6);
            let hi = hi.unwrap_or(1e4);
            let n = n.unwrap_or(2000);
            if !(lo > 0.0 && hi > lo && n >= 2) {
                return Err(Error::Config(format!(
                    "the x grid needs 0 < x-min < x-max and x-points >= 2, got [{lo}, {hi}] with {n} points"
                )));
            }
            Ok(log_grid(lo, hi, n))
        }
    }
}

pub fn cmd_se(a: &SeArgs) -> Result<Table> {
    let cfg = IntegrationConfig::default();
    if a.model == "sk" {
        if a.j.is_empty() {
            return Err(Error::Config("model `sk` needs --j".into()));
        }
        let rows: Vec<_> = a
            .j
            .par_iter()
            .map(|&j| {
                let s = sk_state_evolution(j, a.q0, &cfg);
                (j, s, sk_free_energy(j, s.q, &cfg))
            })
            .collect();
        let mut table = Table::new(&["j", "q", "free_energy", "iterations", "converged"]);
        for (j, s, f) in rows {
            table.push(vec![j.into(), s.q.into(), f.into(), s.iterations.into(), s.converged.into()]);
        }
        return Ok(table);
    }
    let model = ScalarModel::from_tag(&a.model, a.rho, a.rank)?;
    if a.curve {
        let grid = grid_from(&a.grid, &model)?;
        let mut table = Table::new(&["x", "delta", "m", "stable", "free_energy_gap"]);
        for p in fixed_point_curve(&model, &grid, &cfg)? {
            table.push(vec![p.x.into(), p.delta.into(), p.m.into(), p.stable.into(), p.free_energy_gap.into()]);
        }
        return Ok(table);
    }
    if a.delta.is_empty() {
        return Err(Error::Config("state evolution needs --delta (or --curve)".into()));
    }
    if let Some(d) = a.delta.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::Config(format!("delta values must be positive, got {d}")));
    }
    let inits: Vec<(&str, f64)> = match a.init {
        SeInit::Informative => vec![("informative", model.m_max())],
        SeInit::Uninformative => vec![("uninformative", SE_UNINFORMATIVE)],
        SeInit::Both => vec![("uninformative", SE_UNINFORMATIVE), ("informative", model.m_max())],
    };
    let jobs: Vec<(f64, &str, f64)> =
        a.delta.iter().flat_map(|&d| inits.iter().map(move |&(name, m0)| (d, name, m0))).collect();
    let opts = FixedPointOptions::default();
    let rows: Vec<_> = jobs
        .par_iter()
        .map(|&(delta, name, m0)| {
            let fp = iterate_scalar(&model, delta, m0, &opts, &cfg);
            let gap = free_energy_gap(&model, fp.m / delta, &cfg);
            (delta, name, fp, gap)
        })
        .collect();
    let mut table =
        Table::new(&["delta", "init", "m", "mse", "free_energy_gap", "iterations", "converged"]);
    for (delta, name, fp, gap) in rows {
        table.push(vec![
            delta.into(),
            name.into(),
            fp.m.into(),
            fp.mse.into(),
            gap.into(),
            fp.iterations.into(),
            fp.converged.into(),
        ]);
    }
    Ok(table)
}

pub fn cmd_phase_scan(a: &PhaseScanArgs) -> Result<Table> {
    let rhos = a.range.values(&a.rho, "rho")?;
    let base = ScalarModel::from_tag(&a.model, Some(rhos[0]), a.rank)?;
    if base.rho().is_none() {
        return Err(Error::Config(format!("model `{}` has no density to scan", a.model)));
    }
    let cfg = IntegrationConfig::default();
    let rows: Vec<Result<_>> = rhos
        .par_iter()
        .map(|&rho| {
            let model = base.with_rho(rho)?;
            let grid = grid_from(&a.grid, &model)?;
            Ok((rho, thresholds(&model, &grid, &cfg)?))
        })
        .collect();
    let mut table = Table::new(&["rho", "delta_c", "delta_alg", "delta_it", "delta_dyn"]);
    for row in rows {
        let (rho, t) = row?;
        let scale = match a.rescale {
            Rescale::None => 1.0,
            Rescale::Rho2 => 1.0 / (rho * rho),
        };
        let s = |v: Option<f64>| v.map(|v| v * scale);
        table.push(vec![
            rho.into(),
            s(t.delta_c).into(),
            s(t.delta_alg).into(),
            s(t.delta_it).into(),
            s(t.delta_dyn).into(),
        ]);
    }
    Ok(table)
}

/// Noise parameters governing the spectral method on this instance.
fn spectral_noise(instance: &ProblemInstance, source: SpectralSource, cfg: &IntegrationConfig) -> Result<NoiseParams> {
    // The raw data behave like the score of a unit Gaussian channel.
    let data_channel = ChannelFamily::Gaussian { delta: 1.0 };
    match (&instance.generator, source) {
        (Generator::Planted { channel }, SpectralSource::Score) => channel.noise_params(cfg),
        (Generator::Planted { channel }, SpectralSource::Data) => noise_params(&channel.generating, &data_channel, cfg),
        (Generator::Quenched { disorder, assumed }, SpectralSource::Score) => {
            noise_params_quenched(disorder, assumed, cfg)
        }
        (Generator::Quenched { disorder, .. }, SpectralSource::Data) => {
            noise_params_quenched(disorder, &data_channel, cfg)
        }
    }
}

pub fn cmd_spectral(a: &SpectralArgs) -> Result<Table> {
    let instance = ProblemInstance::load(&a.instance)?;
    let source = match a.source {
        SourceTag::Score => SpectralSource::Score,
        SourceTag::Data => SpectralSource::Data,
    };
    let planted = instance.x0().or_else(|| instance.uv0().map(|(u, _)| u));
    let k = match a.k {
        Some(k) => k,
        None => planted.map_or(1, |p| p.ncols()),
    };
    let opts = LanczosOptions { tol: a.lanczos_tol, max_dim: a.max_dim, seed: a.seed };
    let result = top_components(&instance, k, source, &opts)?;
    if !result.converged {
        eprintln!("warning: Lanczos stopped at dimension {} before reaching the tolerance", result.iterations);
    }
    let overlaps = match planted {
        Some(p) => result.overlaps(p)?.into_iter().map(Some).collect(),
        None => vec![None; k],
    };
    // Only the symmetric rank-one theory is available.
    let cfg = IntegrationConfig::default();
    let theory = match (instance.x0(), instance.priors.first()) {
        (Some(_), Some(prior)) => match spectral_noise(&instance, source, &cfg).and_then(|n| pca_analysis(prior, &n, &cfg)) {
            Ok(fp) => Some(fp.overlap2),
            Err(Error::NoInformativeFixedPoint) => Some(0.0),
            Err(_) => None,
        },
        _ => None,
    };
    let mut table = Table::new(&["k", "value", "overlap2", "overlap2_theory"]);
    for (c, (value, overlap)) in result.values.iter().zip(overlaps).enumerate() {
        let t = if c == 0 { theory } else { None };
        table.push(vec![(c + 1).into(), (*value).into(), overlap.into(), t.into()]);
    }
    Ok(table)
}

pub fn cmd_compare(a: &CompareArgs) -> Result<Table> {
    let prior = super::need(a.prior.build()?, "prior", "compare")?;
    let deltas = a.range.values(&a.delta, "delta")?;
    let model = ScalarModel::from_prior(&prior)?;
    let cfg = IntegrationConfig::default();
    let symmetry = default_symmetry(&prior);
    let rows: Vec<Result<[Option<f64>; 5]>> = deltas
        .par_iter()
        .enumerate()
        .map(|(k, &delta)| {
            let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(delta), a.n, derive_seed(a.seed, k as u64))?;
            let x0 = instance.x0().ok_or_else(|| Error::Config("compare needs a planted instance".into()))?;
            let amp = |init: Init| -> Result<Option<f64>> {
                let mut config = amp_config(&a.amp, a.n, derive_seed(a.seed, k as u64));
                config.init = init;
                config.track_free_energy = false;
                match run_symmetric(&instance, &prior, &config) {
                    Ok(out) => Ok(Some(empirical_mse(&out.state.x_hat_matrix(), x0, symmetry)?)),
                    Err(e @ Error::DivergedEstimates { .. }) => {
                        eprintln!("warning: delta = {delta}: {e}");
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            };
            let random = amp(Init::Random { scale: a.amp.init_scale })?;
            let planted = amp(Init::Planted)?;
            let opts = FixedPointOptions::default();
            let se_lo = iterate_scalar(&model, delta, SE_UNINFORMATIVE, &opts, &cfg).mse;
            let se_hi = iterate_scalar(&model, delta, model.m_max(), &opts, &cfg).mse;
            let pca = match pca_mse(&prior, &NoiseParams::bayes(delta), &cfg) {
                Ok(v) => Some(v),
                Err(Error::RankUnsupported(_)) => None,
                Err(e) => return Err(e),
            };
            Ok([random, planted, Some(se_lo), Some(se_hi), pca])
        })
        .collect();
    let mut table = Table::new(&[
        "delta",
        "mse_amp_uninformative",
        "mse_amp_informative",
        "mse_se_uninformative",
        "mse_se_informative",
        "mse_pca",
    ]);
    for (delta, row) in deltas.iter().zip(rows) {
        let row = row?;
        let mut cells = vec![(*delta).into()];
        cells.extend(row.iter().map(|v| (*v).into()));
        table.push(cells);
    }
    Ok(table)
}
