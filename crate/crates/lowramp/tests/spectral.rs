use nalgebra::{DMatrix, SymmetricEigen};

use lowramp::channels::{noise_params, ChannelFamily, ChannelSpec};
use lowramp::instance::{generate_bipartite, generate_symmetric};
use lowramp::priors::PriorSpec;
use lowramp::quadrature::IntegrationConfig;
use lowramp::spectral::{dense_matrix, lanczos, overlaps, top_components, LanczosOptions, SpectralSource};
use lowramp::state_evolution::pca_analysis;

fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|a, b| e.eigenvalues[*b].total_cmp(&e.eigenvalues[*a]));
    let vals = idx.iter().map(|i| e.eigenvalues[*i]).collect();
    let vecs = DMatrix::from_columns(&idx.iter().map(|i| e.eigenvectors.column(*i)).collect::<Vec<_>>());
    (vals, vecs)
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    let prior = PriorSpec::gaussian_isotropic(2, 1.0);
    let inst = generate_symmetric(&prior, &ChannelSpec::gaussian(0.3), 300, 3).unwrap();
    for source in [SpectralSource::Score, SpectralSource::Data] {
        let dense = dense_matrix(&inst, source) / (300f64).sqrt();
        let (vals, vecs) = sorted_eigen(&dense);
        let res = top_components(&inst, 3, source, &LanczosOptions::default()).unwrap();
        assert!(res.converged);
        for k in 0..3 {
            assert!((res.values[k] - vals[k]).abs() < 1e-8 * vals[0].abs(), "{source:?} value {k}");
            let dot = res.vectors.column(k).dot(&vecs.column(k)).abs();
            assert!((dot - 1.0).abs() < 1e-6, "{source:?} vector {k}: |<u, v>| = {dot}");
        }
    }
}

#[test]
fn lanczos_on_a_known_operator() {
    // diag(1..=n) has top eigenvalues n, n - 1, ... with unit vectors.
    let n = 200;
    let op = |v: &[f64]| v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).collect::<Vec<_>>();
    let (vals, vecs, _, converged) = lanczos(n, 2, op, &LanczosOptions::default()).unwrap();
    assert!(converged);
    assert!((vals[0] - n as f64).abs() < 1e-8 && (vals[1] - (n - 1) as f64).abs() < 1e-8);
    assert!((vecs[(n - 1, 0)].abs() - 1.0).abs() < 1e-6);
}

#[test]
fn bipartite_singular_values_match_dense_svd() {
    let pu = PriorSpec::gaussian_isotropic(1, 1.0);
    let pv = PriorSpec::RademacherBernoulli { rho: 0.5 };
    let inst = generate_bipartite(&pu, &pv, &ChannelSpec::gaussian(0.5), 150, 90, 7).unwrap();
    let dense = dense_matrix(&inst, SpectralSource::Score) / (150f64).sqrt();
    let svd = dense.clone().svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let res = top_components(&inst, 2, SpectralSource::Score, &LanczosOptions::default()).unwrap();
    for k in 0..2 {
        assert!((res.values[k] - sv[k]).abs() < 1e-7 * sv[0], "singular value {k}: {} vs {}", res.values[k], sv[k]);
    }
    let u = res.vectors.column(0);
    let v = res.right_vectors.as_ref().unwrap().column(0);
    let rayleigh = (u.transpose() * &dense * v)[(0, 0)].abs();
    assert!((rayleigh - sv[0]).abs() < 1e-6 * sv[0]);
}

#[test]
fn overlap_is_invariant_to_sign_and_basis() {
    let planted = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    let v = DMatrix::from_column_slice(4, 1, &[-2.0, -1.0, -3.0, 0.0]);
    let o = overlaps(&v, &planted).unwrap()[0];
    assert!((o - 1.0).abs() < 1e-12);
    let mixed = DMatrix::from_columns(&[planted.column(0) + planted.column(1), planted.column(0) - planted.column(1)]);
    assert!((overlaps(&v, &mixed).unwrap()[0] - 1.0).abs() < 1e-12);
    let orth = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, 5.0]);
    assert!(overlaps(&orth, &planted).unwrap()[0].abs() < 1e-15);
    assert!(overlaps(&DMatrix::zeros(3, 1), &planted).is_err());
}

#[test]
fn spiked_wigner_overlap_follows_theory() {
    // Gaussian signal, Gaussian noise: overlap^2 -> 1 - Delta above the
    // transition at Delta = 1.
    let prior = PriorSpec::gaussian_isotropic(1, 1.0);
    let cfg = IntegrationConfig::default();
    for delta in [0.25, 0.5] {
        let inst = generate_symmetric(&prior, &ChannelSpec::gaussian(delta), 2000, 1).unwrap();
        let o = top_components(&inst, 1, SpectralSource::Score, &LanczosOptions::default())
            .unwrap()
            .overlaps(inst.x0().unwrap())
            .unwrap()[0];
        let noise = noise_params(&ChannelFamily::Gaussian { delta }, &ChannelFamily::Gaussian { delta }, &cfg).unwrap();
        let theory = pca_analysis(&prior, &noise, &cfg).unwrap().overlap2;
        assert!((o - theory).abs() < 0.05, "delta = {delta}: {o} vs {theory}");
        // Y / sqrt(N) has its outlier at 1 + Delta, and S = Y / Delta.
        let top = top_components(&inst, 1, SpectralSource::Score, &LanczosOptions::default()).unwrap().values[0];
        let want = (1.0 + delta) / delta;
        assert!((top - want).abs() < 0.05 * want, "delta = {delta}: top {top} vs {want}");
    }
}

#[test]
fn spectral_runs_are_deterministic() {
    let prior = PriorSpec::RademacherBernoulli { rho: 0.3 };
    let inst = generate_symmetric(&prior, &ChannelSpec::gaussian(0.05), 400, 2).unwrap();
    let opts = LanczosOptions::default();
    let a = top_components(&inst, 2, SpectralSource::Score, &opts).unwrap();
    let b = top_components(&inst, 2, SpectralSource::Score, &opts).unwrap();
    assert_eq!(a, b);
}
