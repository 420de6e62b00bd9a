use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use lowramp::priors::PriorSpec;
use lowramp::Error;

/// Mean, variance and `ln Z` of `w(x) exp(b x - a x^2 / 2)` over weighted atoms.
fn atoms_oracle(atoms: &[(f64, f64)], a: f64, b: f64) -> (f64, f64, f64) {
    let mut z = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for &(w, x) in atoms {
        let e = w * (b * x - 0.5 * a * x * x).exp();
        z += e;
        m1 += e * x;
        m2 += e * x * x;
    }
    let m = m1 / z;
    (m, m2 / z - m * m, z.ln())
}

/// Same for `(1 - rho) delta_0 + rho N(mu, v)`, by a fine trapezoid rule.
fn spike_slab_oracle(rho: f64, mu: f64, v: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let n = 200_000;
    let (lo, hi) = (-40.0, 40.0);
    let h = (hi - lo) / n as f64;
    let (mut z, mut m1, mut m2) = (1.0 - rho, 0.0, 0.0);
    for k in 0..=n {
        let x = lo + k as f64 * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let dens = (-(x - mu) * (x - mu) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let e = w * h * rho * dens * (b * x - 0.5 * a * x * x).exp();
        z += e;
        m1 += e * x;
        m2 += e * x * x;
    }
    let m = m1 / z;
    (m, m2 / z - m * m, z.ln())
}

fn assert_scalar(prior: &PriorSpec, a: f64, b: f64, oracle: (f64, f64, f64), tol: f64) {
    let got = prior.f_in_scalar(a, b).unwrap();
    let (m, v, lz) = oracle;
    assert!((got.mean - m).abs() < tol, "{prior:?} a={a} b={b}: mean {} vs {m}", got.mean);
    assert!((got.var - v).abs() < tol, "{prior:?} a={a} b={b}: var {} vs {v}", got.var);
    assert!((got.log_z - lz).abs() < tol, "{prior:?} a={a} b={b}: log Z {} vs {lz}", got.log_z);
}

#[test]
fn discrete_priors_match_atom_sums() {
    for &(a, b) in &[(0.0, 0.0), (1.5, -0.7), (4.0, 2.5), (0.2, 8.0)] {
        for rho in [0.05, 0.3, 0.8] {
            assert_scalar(
                &PriorSpec::Ising { rho },
                a,
                b,
                atoms_oracle(&[(rho, 1.0), (1.0 - rho, -1.0)], a, b),
                1e-12,
            );
            assert_scalar(
                &PriorSpec::Bernoulli { rho },
                a,
                b,
                atoms_oracle(&[(rho, 1.0), (1.0 - rho, 0.0)], a, b),
                1e-12,
            );
            assert_scalar(
                &PriorSpec::RademacherBernoulli { rho },
                a,
                b,
                atoms_oracle(&[(rho / 2.0, 1.0), (rho / 2.0, -1.0), (1.0 - rho, 0.0)], a, b),
                1e-12,
            );
            // Zero mean and unit variance fix the two atoms.
            let hi = ((1.0 - rho) / rho).sqrt();
            let lo = -(rho / (1.0 - rho)).sqrt();
            assert_scalar(
                &PriorSpec::TwoBalanced { rho },
                a,
                b,
                atoms_oracle(&[(rho, hi), (1.0 - rho, lo)], a, b),
                1e-11,
            );
        }
    }
}

#[test]
fn continuous_priors_match_quadrature() {
    for &(a, b) in &[(0.0, 0.0), (1.5, -0.7), (4.0, 2.5), (0.5, 3.0)] {
        for rho in [0.05, 0.3, 1.0] {
            assert_scalar(
                &PriorSpec::GaussBernoulliJoint { rho, rank: 1 },
                a,
                b,
                spike_slab_oracle(rho, 0.0, 1.0, a, b),
                1e-8,
            );
        }
        assert_scalar(&PriorSpec::Spherical { rank: 1 }, a, b, spike_slab_oracle(1.0, 0.0, 1.0, a, b), 1e-8);
        let gauss = PriorSpec::Gaussian { mean: vec![0.4], cov: vec![2.0] };
        assert_scalar(&gauss, a, b, spike_slab_oracle(1.0, 0.4, 2.0, a, b), 1e-8);
    }
}

/// `E[x]`, `Cov[x]` and `ln Z` over a finite list of rank-`r` atoms.
fn vector_atoms_oracle(atoms: &[(f64, DVector<f64>)], a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, f64) {
    let r = b.len();
    let mut z = 0.0;
    let mut m1 = DVector::zeros(r);
    let mut m2 = DMatrix::zeros(r, r);
    for (w, x) in atoms {
        let e = w * (b.dot(x) - 0.5 * (x.transpose() * a * x)[0]).exp();
        z += e;
        m1 += x * e;
        m2 += x * x.transpose() * e;
    }
    let m = m1 / z;
    let cov = m2 / z - &m * m.transpose();
    (m, cov, z.ln())
}

#[test]
fn community_prior_matches_basis_sum() {
    let r = 4;
    let a = DMatrix::from_fn(r, r, |i, j| if i == j { 1.0 + i as f64 * 0.3 } else { 0.2 });
    let b = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.0]);
    let atoms: Vec<_> = (0..r).map(|k| (1.0 / r as f64, DVector::from_fn(r, |i, _| if i == k { 1.0 } else { 0.0 }))).collect();
    let (m, cov, lz) = vector_atoms_oracle(&atoms, &a, &b);
    let got = PriorSpec::Community { rank: r }.f_in(&a, &b).unwrap();
    assert!((got.mean - m).amax() < 1e-12);
    assert!((got.covariance - cov).amax() < 1e-12);
    assert!((got.log_z - lz).abs() < 1e-12);
}

#[test]
fn independent_gauss_bernoulli_factorises_for_diagonal_fields() {
    let rho = 0.2;
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0, 1.0]));
    let b = DVector::from_vec(vec![1.0, -0.3, 2.0]);
    let got = PriorSpec::GaussBernoulliIndependent { rho, rank: 3 }.f_in(&a, &b).unwrap();
    let scalar = PriorSpec::GaussBernoulliJoint { rho, rank: 1 };
    let mut lz = 0.0;
    for k in 0..3 {
        let s = scalar.f_in_scalar(a[(k, k)], b[k]).unwrap();
        assert!((got.mean[k] - s.mean).abs() < 1e-12);
        assert!((got.covariance[(k, k)] - s.var).abs() < 1e-12);
        lz += s.log_z;
    }
    assert!((got.log_z - lz).abs() < 1e-12);
    assert!(got.covariance[(0, 1)].abs() < 1e-12);
}

#[test]
fn joint_gauss_bernoulli_matches_closed_form() {
    // With probability rho the vector is N(0, I): the slab posterior is
    // N((I + A)^{-1} B, (I + A)^{-1}) with evidence det(I + A)^{-1/2} exp(B'(I+A)^{-1}B / 2).
    let rho = 0.3f64;
    let a = DMatrix::from_row_slice(2, 2, &[1.0f64, 0.4, 0.4, 0.5]);
    let b = DVector::from_vec(vec![0.8f64, -1.2]);
    let q = DMatrix::identity(2, 2) + &a;
    let qi = q.clone().try_inverse().unwrap();
    let mu = &qi * &b;
    let slab: f64 = rho * (0.5 * b.dot(&mu)).exp() / q.determinant().sqrt();
    let z = slab + (1.0 - rho);
    let p = slab / z;
    let mean = &mu * p;
    let second = (&qi + &mu * mu.transpose()) * p;
    let cov = second - &mean * mean.transpose();
    let got = PriorSpec::GaussBernoulliJoint { rho, rank: 2 }.f_in(&a, &b).unwrap();
    assert!((got.mean - mean).amax() < 1e-12);
    assert!((got.covariance - cov).amax() < 1e-12);
    assert!((got.log_z - z.ln()).abs() < 1e-12);
}

#[test]
fn rank_one_vector_and_scalar_paths_agree() {
    let priors = [
        PriorSpec::Ising { rho: 0.3 },
        PriorSpec::Bernoulli { rho: 0.1 },
        PriorSpec::RademacherBernoulli { rho: 0.2 },
        PriorSpec::TwoBalanced { rho: 0.25 },
        PriorSpec::GaussBernoulliJoint { rho: 0.1, rank: 1 },
        PriorSpec::gaussian_isotropic(1, 2.0),
    ];
    for p in &priors {
        let s = p.f_in_scalar(0.7, 1.3).unwrap();
        let v = p.f_in(&DMatrix::from_element(1, 1, 0.7), &DVector::from_element(1, 1.3)).unwrap();
        assert!((s.mean - v.mean[0]).abs() < 1e-12, "{p:?}");
        assert!((s.var - v.covariance[(0, 0)]).abs() < 1e-12, "{p:?}");
        assert!((s.log_z - v.log_z).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn moments_match_samples() {
    let priors = [
        PriorSpec::Ising { rho: 0.3 },
        PriorSpec::Bernoulli { rho: 0.1 },
        PriorSpec::RademacherBernoulli { rho: 0.2 },
        PriorSpec::TwoBalanced { rho: 0.25 },
        PriorSpec::GaussBernoulliJoint { rho: 0.1, rank: 2 },
        PriorSpec::GaussBernoulliIndependent { rho: 0.4, rank: 2 },
        PriorSpec::Community { rank: 3 },
        PriorSpec::Spherical { rank: 2 },
        PriorSpec::Gaussian { mean: vec![1.0, -0.5], cov: vec![1.0, 0.3, 0.3, 0.5] },
    ];
    let n = 200_000;
    for p in &priors {
        let x = p.sample(n, 17);
        let (mean, second) = p.moments();
        let r = p.rank();
        for k in 0..r {
            let m = x.column(k).sum() / n as f64;
            assert!((m - mean[k]).abs() < 0.02, "{p:?} mean[{k}] {m} vs {}", mean[k]);
            for l in 0..r {
                let s = x.column(k).dot(&x.column(l)) / n as f64;
                assert!((s - second[(k, l)]).abs() < 0.03, "{p:?} second[{k},{l}] {s} vs {}", second[(k, l)]);
            }
        }
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let p = PriorSpec::GaussBernoulliJoint { rho: 0.3, rank: 3 };
    assert_eq!(p.sample(100, 5), p.sample(100, 5));
    assert_ne!(p.sample(100, 5), p.sample(100, 6));
}

#[test]
fn third_moment_matches_atoms() {
    for p in [PriorSpec::Ising { rho: 0.3 }, PriorSpec::Bernoulli { rho: 0.2 }, PriorSpec::TwoBalanced { rho: 0.1 }] {
        let atoms = p.scalar_atoms().unwrap();
        let m3: f64 = atoms.iter().map(|(w, x)| w * x * x * x).sum();
        assert!((p.third_moment_scalar().unwrap() - m3).abs() < 1e-12);
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    for p in [
        PriorSpec::Bernoulli { rho: 0.0 },
        PriorSpec::RademacherBernoulli { rho: 1.5 },
        PriorSpec::GaussBernoulliJoint { rho: 0.1, rank: 0 },
        PriorSpec::Gaussian { mean: vec![0.0], cov: vec![-1.0] },
        PriorSpec::Community { rank: 1 },
    ] {
        assert!(matches!(p.validate(), Err(Error::InvalidPrior(_))), "{p:?}");
    }
    let p = PriorSpec::Community { rank: 3 };
    assert!(matches!(p.f_in(&DMatrix::zeros(2, 2), &DVector::zeros(2)), Err(Error::ShapeMismatch(_))));
}

/// Central differences: mean is `d ln Z / dB`, covariance is `d mean / dB`
/// and `d ln Z / dA_kk = -<x_k^2> / 2`.
fn check_gradients(p: &PriorSpec, a: &DMatrix<f64>, b: &DVector<f64>) -> std::result::Result<(), TestCaseError> {
    let r = b.len();
    let h = 1e-5;
    let base = p.f_in(a, b).unwrap();
    for k in 0..r {
        let mut bp = b.clone();
        let mut bm = b.clone();
        bp[k] += h;
        bm[k] -= h;
        let (fp, fm) = (p.f_in(a, &bp).unwrap(), p.f_in(a, &bm).unwrap());
        let dlz = (fp.log_z - fm.log_z) / (2.0 * h);
        prop_assert!((dlz - base.mean[k]).abs() < 1e-6 * (1.0 + base.mean[k].abs()), "dlogZ/dB {dlz} vs {}", base.mean[k]);
        for l in 0..r {
            let dm = (fp.mean[l] - fm.mean[l]) / (2.0 * h);
            let c = base.covariance[(l, k)];
            prop_assert!((dm - c).abs() < 1e-5 * (1.0 + c.abs()), "dmean/dB {dm} vs {c}");
        }
        let mut ap = a.clone();
        let mut am = a.clone();
        ap[(k, k)] += h;
        am[(k, k)] -= h;
        let dla = (p.f_in(&ap, b).unwrap().log_z - p.f_in(&am, b).unwrap().log_z) / (2.0 * h);
        let second = base.covariance[(k, k)] + base.mean[k] * base.mean[k];
        prop_assert!((dla + 0.5 * second).abs() < 1e-6 * (1.0 + second), "dlogZ/dA {dla} vs {}", -0.5 * second);
    }
    Ok(())
}

fn prior_strategy() -> impl Strategy<Value = PriorSpec> {
    let rho = 0.02f64..0.98;
    prop_oneof![
        rho.clone().prop_map(|rho| PriorSpec::Ising { rho }),
        rho.clone().prop_map(|rho| PriorSpec::Bernoulli { rho }),
        rho.clone().prop_map(|rho| PriorSpec::RademacherBernoulli { rho }),
        (0.05f64..0.95).prop_map(|rho| PriorSpec::TwoBalanced { rho }),
        (rho.clone(), 1usize..4).prop_map(|(rho, rank)| PriorSpec::GaussBernoulliJoint { rho, rank }),
        (rho, 1usize..4).prop_map(|(rho, rank)| PriorSpec::GaussBernoulliIndependent { rho, rank }),
        (2usize..5).prop_map(|rank| PriorSpec::Community { rank }),
        (1usize..4).prop_map(|rank| PriorSpec::Spherical { rank }),
    ]
}

proptest! {
    #[test]
    fn f_in_is_the_gradient_of_log_z(
        p in prior_strategy(),
        diag in prop::collection::vec(0.0f64..3.0, 4),
        off in -0.3f64..0.3,
        bs in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let r = p.rank();
        let a = DMatrix::from_fn(r, r, |i, j| if i == j { diag[i] } else { off / r as f64 });
        let b = DVector::from_fn(r, |i, _| bs[i]);
        check_gradients(&p, &a, &b)?;
    }

    #[test]
    fn covariance_is_positive_semidefinite(p in prior_strategy(), scale in 0.0f64..5.0, b0 in -4.0f64..4.0) {
        let r = p.rank();
        let a = DMatrix::identity(r, r) * scale;
        let b = DVector::from_fn(r, |i, _| b0 * (i as f64 + 1.0) / r as f64);
        let out = p.f_in(&a, &b).unwrap();
        let min = out.covariance.symmetric_eigen().eigenvalues.min();
        prop_assert!(min > -1e-10, "smallest eigenvalue {min}");
    }
}
