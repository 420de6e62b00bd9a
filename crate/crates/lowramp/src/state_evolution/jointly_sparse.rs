//! Bayes-optimal state evolution of the jointly sparse (rank-`r` Gauss-Bernoulli)
//! prior, where a whole row is either zero or standard normal.
//!
//! With `M = m I_r` and `x = m / Delta`, conditioning on the row being
//! non-zero makes `B ~ N(0, (x^2 + x) I_r)` and `E[x0 | B] = B / (1 + x)`, so
//! `m' = rho x / ((1 + x) r) E[u^2 rho_hat(x u^2)]` with `u ~ chi_r` and
//! `rho_hat` the posterior probability that the row is non-zero.

use statrs::function::gamma::ln_gamma;

/// `m^{t+1}` as a function of `x = m^t / Delta`.
pub fn se_jointly_sparse(rho: f64, r: usize, x: f64) -> f64 {
    assert!(r >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    let rf = r as f64;
    let logit0 = if rho >= 1.0 { f64::INFINITY } else { (rho / (1.0 - rho)).ln() } - 0.5 * rf * x.ln_1p();
    let log_norm = (0.5 * rf - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * rf);
    let centre = (rf - 1.0).max(0.0).sqrt();
    let lo = (centre - 12.0).max(0.0);
    let hi = centre + 12.0;
    let h = 0.004;
    let n = ((hi - lo) / h).ceil() as usize;
    let mut acc = 0.0;
    for k in 0..=n {
        let u = lo + k as f64 * h;
        if u <= 0.0 && r > 1 {
            continue;
        }
        let log_density = (rf - 1.0) * if u > 0.0 { u.ln() } else { 0.0 } - 0.5 * u * u - log_norm;
        let post = sigmoid(logit0 + 0.5 * x * u * u);
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * u * u * post * log_density.exp();
    }
    rho * x / ((1.0 + x) * rf) * acc * h
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
