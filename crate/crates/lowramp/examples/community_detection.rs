//! Community detection in the dense stochastic block model.
//!
//! The state-evolution map for `r` groups is followed from a tiny overlap
//! just below `Delta_c = 1 / r^2`: up to four groups the overlap stays
//! near zero, from five on it jumps to a large value.

use lowramp::state_evolution::se_community;

fn main() {
    for r in [2usize, 3, 4, 5, 6, 8] {
        let delta_c = 1.0 / (r * r) as f64;
        let delta = 0.999 * delta_c;
        let mut b = 1e-4;
        for _ in 0..20_000 {
            let next = se_community(r, b, delta);
            if (next - b).abs() < 1e-13 {
                break;
            }
            b = next;
        }
        println!("r = {r}: delta_c = {delta_c:.5}, overlap just below delta_c = {b:.4}");
    }
}
