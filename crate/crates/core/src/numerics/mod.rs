//! Generic numerical kernels: adaptive ODE integration with dense output,
//! bracketed root finding, and finite-difference derivative oracles.
//!
//! All routines are pure given their inputs and safe to call concurrently.

mod fd;
mod ode;
mod root;

pub use fd::fd_derivative;
pub use ode::{integrate_ode, Node, Trajectory};
pub(crate) use ode::integrate_ode_until;
pub use root::find_root_bracketed;

/// Log-spaced grid of `n` points from `lo` to `hi` (inclusive endpoints).
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "log_grid needs 0 < lo < hi and n >= 2");
    let (la, lb) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    // pin endpoints exactly
    g[0] = lo;
    g[n - 1] = hi;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_grid_shape() {
        let g = log_grid(1e-3, 1e6, 128);
        assert_eq!(g.len(), 128);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[127], 1e6);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    #[should_panic]
    fn log_grid_rejects_bad_range() {
        log_grid(1.0, 1.0, 8);
    }

    proptest! {
        #[test]
        fn log_grid_always_monotone(
            lo in 1e-6f64..1.0,
            span in 1.5f64..1e9,
            n in 2usize..200,
        ) {
            let g = log_grid(lo, lo * span, n);
            prop_assert_eq!(g.len(), n);
            prop_assert_eq!(g[0], lo);
            prop_assert_eq!(g[n - 1], lo * span);
            prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
