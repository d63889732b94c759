//! Quadrature weights for uniformly sampled data on [0, 1].

use alloc::vec;
use alloc::vec::Vec;

/// Trapezoid weights for `n` uniform samples spanning [0, 1].
pub(crate) fn trapezoid_weights(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Composite Simpson weights on [0, 1] for odd `n`, trapezoid otherwise.
#[allow(dead_code)]
pub(crate) fn simpson_weights(n: usize) -> Vec<f64> {
    if n < 3 || n.is_multiple_of(2) {
        return trapezoid_weights(n);
    }
    let h = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let n = 11;
        let w = simpson_weights(n);
        let s: f64 = (0..n)
            .map(|i| {
                let x = i as f64 / (n - 1) as f64;
                w[i] * x * x * x
            })
            .sum();
        assert!((s - 0.25).abs() < 1e-15);
    }
}
