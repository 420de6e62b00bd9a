use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lowramp::channels::{ChannelFamily, ChannelSpec};
use lowramp::instance::{empirical_mse, generate_bipartite, generate_symmetric, ProblemInstance, Symmetry};
use lowramp::lowramp::{
    bethe_free_energy, bethe_site_gradient, mean_field_run, run_bipartite, run_symmetric, symmetric_step,
    AmpConfig, AmpState, BetheMode, Init, Variant,
};
use lowramp::priors::PriorSpec;
use lowramp::Error;

/// A state with random means, covariances and previous means.
fn random_state(n: usize, r: usize, seed: u64) -> AmpState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
    let mut state = AmpState::new(&x);
    for v in state.x_hat_old.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    for i in 0..n {
        let l = DMatrix::from_fn(r, r, |_, _| rng.random_range(-0.5..0.5));
        let s = &l * l.transpose() + DMatrix::identity(r, r) * 0.1;
        state.sigma[i * r * r..(i + 1) * r * r].copy_from_slice(s.as_slice());
    }
    state
}

/// Fields of one Low-RAMP step computed from dense `S` and `R`.
fn dense_fields(instance: &ProblemInstance, state: &AmpState) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
    let (s, rm) = instance.score_matrices();
    let (n, r) = (state.n, state.rank);
    let nf = n as f64;
    let x = |j: usize| DVector::from_column_slice(&state.x_hat[j * r..(j + 1) * r]);
    let old = |j: usize| DVector::from_column_slice(&state.x_hat_old[j * r..(j + 1) * r]);
    let mut bs = Vec::new();
    let mut as_ = Vec::new();
    for i in 0..n {
        let mut b = DVector::zeros(r);
        let mut ons = DMatrix::zeros(r, r);
        let mut a = DMatrix::zeros(r, r);
        for j in 0..n {
            if j == i {
                continue;
            }
            let (sij, rij) = (s[(i, j)], rm[(i, j)]);
            let xx = x(j) * x(j).transpose();
            let sig = state.sigma_of(j);
            b += x(j) * (sij / nf.sqrt());
            ons += &sig * (sij * sij / nf);
            a += (&xx * (sij * sij) - (&xx + &sig) * rij) / nf;
        }
        bs.push(b - ons * old(i));
        as_.push(a);
    }
    (bs, as_)
}

fn check_step(prior: &PriorSpec, channel: ChannelSpec, n: usize, seed: u64) {
    let instance = generate_symmetric(prior, &channel, n, seed).unwrap();
    let r = prior.rank();
    let mut state = random_state(n, r, seed + 100);
    let (bs, as_) = dense_fields(&instance, &state);
    let before = state.x_hat.clone();
    symmetric_step(&instance, prior, &mut state, Variant::Full, 1.0).unwrap();
    assert_eq!(state.x_hat_old, before);
    for i in 0..n {
        assert!((state.b_of(i) - &bs[i]).amax() < 1e-10, "B mismatch at node {i}");
        assert!((state.a_of(i) - &as_[i]).amax() < 1e-10, "A mismatch at node {i}");
        let expected = prior.f_in(&as_[i], &bs[i]).unwrap();
        let got = DVector::from_column_slice(&state.x_hat[i * r..(i + 1) * r]);
        assert!((got - expected.mean).amax() < 1e-9);
    }
}

#[test]
fn full_step_matches_dense_oracle_gaussian_channel() {
    check_step(&PriorSpec::RademacherBernoulli { rho: 0.3 }, ChannelSpec::gaussian(0.5), 40, 1);
    check_step(&PriorSpec::gaussian_isotropic(2, 1.0), ChannelSpec::gaussian(0.7), 30, 2);
}

#[test]
fn full_step_matches_dense_oracle_non_gaussian_channels() {
    check_step(
        &PriorSpec::TwoBalanced { rho: 0.4 },
        ChannelSpec::bayes(ChannelFamily::Sbm { p_out: 0.3, mu: 0.2 }),
        40,
        3,
    );
    check_step(&PriorSpec::gaussian_isotropic(1, 1.5), ChannelSpec::bayes(ChannelFamily::Exponential), 40, 4);
    check_step(
        &PriorSpec::Bernoulli { rho: 0.2 },
        ChannelSpec::mismatched(ChannelFamily::Gaussian { delta: 0.4 }, ChannelFamily::Gaussian { delta: 0.6 }),
        40,
        5,
    );
}

#[test]
fn onsager_term_uses_previous_means() {
    // Two states that differ only in `x_hat_old` must differ in `B` by
    // exactly the Onsager coefficient times the difference.
    let prior = PriorSpec::RademacherBernoulli { rho: 0.5 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.3), 30, 9).unwrap();
    let mut s1 = random_state(30, 1, 7);
    let mut s2 = s1.clone();
    s2.x_hat_old.iter_mut().for_each(|v| *v += 1.0);
    let (s, _) = instance.score_matrices();
    let coef: Vec<f64> = (0..30)
        .map(|i| (0..30).filter(|j| *j != i).map(|j| s[(i, j)].powi(2) * s1.sigma[j]).sum::<f64>() / 30.0)
        .collect();
    symmetric_step(&instance, &prior, &mut s1, Variant::Full, 1.0).unwrap();
    symmetric_step(&instance, &prior, &mut s2, Variant::Full, 1.0).unwrap();
    for i in 0..30 {
        assert!((s1.b[i] - s2.b[i] - coef[i]).abs() < 1e-10);
    }
}

#[test]
fn self_averaged_step_uses_empirical_noise() {
    let prior = PriorSpec::gaussian_isotropic(2, 1.0);
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.4), 50, 3).unwrap();
    let mut state = random_state(50, 2, 8);
    let (inv_delta, r_bar) = instance.empirical_noise();
    let (s, _) = instance.score_matrices();
    let x = state.x_hat_matrix();
    let mut xx = DMatrix::zeros(2, 2);
    let mut ss = DMatrix::zeros(2, 2);
    for j in 0..50 {
        xx += x.row(j).transpose() * x.row(j);
        ss += state.sigma_of(j);
    }
    let old = DMatrix::from_row_slice(50, 2, &state.x_hat_old);
    let nf = 50.0f64;
    let b_expected = (&s * &x) / nf.sqrt() - &old * (&ss * (inv_delta / nf)).transpose();
    let a_expected = (&xx * inv_delta - (&xx + &ss) * r_bar) / nf;
    symmetric_step(&instance, &prior, &mut state, Variant::SelfAveraged, 1.0).unwrap();
    for i in 0..50 {
        assert!((state.b_of(i) - b_expected.row(i).transpose()).amax() < 1e-10);
        assert!((state.a_of(i) - &a_expected).amax() < 1e-10);
    }
}

#[test]
fn damping_mixes_fields() {
    let prior = PriorSpec::RademacherBernoulli { rho: 0.5 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.3), 25, 2).unwrap();
    let mut full = random_state(25, 1, 3);
    full.b.iter_mut().for_each(|v| *v = 0.25);
    let mut half = full.clone();
    symmetric_step(&instance, &prior, &mut full, Variant::Full, 1.0).unwrap();
    symmetric_step(&instance, &prior, &mut half, Variant::Full, 0.5).unwrap();
    for i in 0..25 {
        assert!((half.b[i] - (0.5 * full.b[i] + 0.5 * 0.25)).abs() < 1e-12);
    }
}

#[test]
fn amp_recovers_sparse_signal_and_is_deterministic() {
    let prior = PriorSpec::GaussBernoulliJoint { rho: 0.1, rank: 1 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.004), 1500, 11).unwrap();
    let config = AmpConfig { variant: Variant::SelfAveraged, seed: 4, ..AmpConfig::default() };
    let a = run_symmetric(&instance, &prior, &config).unwrap();
    let b = run_symmetric(&instance, &prior, &config).unwrap();
    assert!(a.converged);
    assert_eq!(a.state.x_hat, b.state.x_hat);
    assert_eq!(a.trace, b.trace);
    let mse = a.trace.last().unwrap().mse.unwrap();
    assert!(mse < 0.02, "mse {mse}");
    // The Bethe free energy is reported at every iteration.
    assert!(a.trace.iter().all(|row| row.free_energy.is_some()));
}

#[test]
fn trace_mse_matches_empirical_mse() {
    let prior = PriorSpec::RademacherBernoulli { rho: 0.2 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.01), 800, 5).unwrap();
    let out = run_symmetric(&instance, &prior, &AmpConfig::default()).unwrap();
    let direct = empirical_mse(&out.state.x_hat_matrix(), instance.x0().unwrap(), Symmetry::Sign).unwrap();
    assert!((out.trace.last().unwrap().mse.unwrap() - direct).abs() < 1e-12);
}

#[test]
fn mean_field_is_no_better_than_amp() {
    let prior = PriorSpec::RademacherBernoulli { rho: 0.3 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.03), 1000, 21).unwrap();
    let config = AmpConfig { damping: 0.5, variant: Variant::SelfAveraged, max_iters: 2000, ..AmpConfig::default() };
    let amp = run_symmetric(&instance, &prior, &config).unwrap();
    let mf = mean_field_run(&instance, &prior, &config).unwrap();
    assert!(mf.converged);
    let (e_amp, e_mf) = (amp.trace.last().unwrap().mse.unwrap(), mf.trace.last().unwrap().mse.unwrap());
    assert!(e_mf >= e_amp - 5e-3, "mean field {e_mf} vs amp {e_amp}");
}

#[test]
fn bipartite_run_recovers_factors() {
    let pu = PriorSpec::gaussian_isotropic(1, 1.0);
    let pv = PriorSpec::RademacherBernoulli { rho: 0.5 };
    let instance = generate_bipartite(&pu, &pv, &ChannelSpec::gaussian(0.05), 1200, 600, 3).unwrap();
    let config = AmpConfig { variant: Variant::SelfAveraged, track_free_energy: false, ..AmpConfig::default() };
    let a = run_bipartite(&instance, &pu, &pv, &config).unwrap();
    let b = run_bipartite(&instance, &pu, &pv, &config).unwrap();
    assert!(a.converged);
    assert_eq!(a.state.u.x_hat, b.state.u.x_hat);
    assert!(a.mse_u.unwrap() < 0.3 && a.mse_v.unwrap() < 0.1, "{:?} {:?}", a.mse_u, a.mse_v);
}

#[test]
fn bethe_gradient_vanishes_at_fixed_point() {
    let prior = PriorSpec::RademacherBernoulli { rho: 0.5 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.1), 200, 13).unwrap();
    let config = AmpConfig { variant: Variant::Full, damping: 0.5, tol: 1e-12, max_iters: 5000, ..AmpConfig::default() };
    let out = run_symmetric(&instance, &prior, &config).unwrap();
    assert!(out.converged);
    for i in [0, 57, 199] {
        let (gb, ga) = bethe_site_gradient(&instance, &prior, &out.state, i, 1e-5).unwrap();
        let worst = gb.iter().chain(&ga).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-5, "node {i}: gradient {worst}");
    }
    let f = bethe_free_energy(&instance, &out.state, BetheMode::Exact).unwrap();
    assert!(f.is_finite());
}

#[test]
fn invalid_configuration_is_rejected() {
    let prior = PriorSpec::RademacherBernoulli { rho: 0.5 };
    let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.3), 20, 1).unwrap();
    let zero_damping = AmpConfig { damping: 0.0, ..AmpConfig::default() };
    assert!(matches!(run_symmetric(&instance, &prior, &zero_damping), Err(Error::Config(_))));
    let zero_start = AmpConfig { init: Init::Random { scale: 0.0 }, ..AmpConfig::default() };
    assert!(matches!(run_symmetric(&instance, &prior, &zero_start), Err(Error::Config(_))));
    let wrong_rank = PriorSpec::gaussian_isotropic(2, 1.0);
    let planted = AmpConfig { init: Init::Planted, ..AmpConfig::default() };
    assert!(matches!(run_symmetric(&instance, &wrong_rank, &planted), Err(Error::ShapeMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_seed_deterministic(seed in 0u64..1000, rho in 0.2f64..0.9) {
        let prior = PriorSpec::RademacherBernoulli { rho };
        let instance = generate_symmetric(&prior, &ChannelSpec::gaussian(0.2), 60, seed).unwrap();
        let config = AmpConfig { seed, damping: 0.7, max_iters: 50, ..AmpConfig::default() };
        let a = run_symmetric(&instance, &prior, &config);
        let b = run_symmetric(&instance, &prior, &config);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.state.x_hat, b.state.x_hat);
                prop_assert_eq!(a.trace, b.trace);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "one run failed and the other did not"),
        }
    }
}
