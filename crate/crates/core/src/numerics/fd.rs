//! Central finite-difference derivative oracle, used throughout the crate to
//! audit analytic derivative formulas.

/// Central-difference estimate of the `order`-th derivative of `f` at `s`
/// with step `h`. Error is O(h^2) for smooth `f`. `order` must be 1 or 2.
pub fn fd_derivative<F>(f: F, s: f64, order: u8, h: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    assert!(h > 0.0, "fd_derivative requires h > 0");
    match order {
        1 => (f(s + h) - f(s - h)) / (2.0 * h),
        2 => (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h),
        _ => panic!("fd_derivative supports orders 1 and 2, got {order}"),
    }
}
