//! Gauss–Legendre rules.

use crate::scalar::Scalar;

/// Gauss–Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre_unit<S: Scalar>(n: usize) -> (Vec<S>, Vec<S>) {
    assert!(n > 0, "quadrature needs at least one node");
    let mut nodes = vec![S::zero(); n];
    let mut weights = vec![S::zero(); n];
    let two = S::lit(2.0);
    let half = S::lit(0.5);
    let nf = S::uz(n);
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (S::pi() * (S::uz(i) + S::lit(0.75)) / (nf + half)).cos();
        let mut dp = S::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= S::default_epsilon() * S::lit(4.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = two / ((S::one() - x * x) * dp * dp);
        // map from [-1, 1] to [0, 1]
        nodes[i] = (S::one() - x) * half;
        nodes[n - 1 - i] = (S::one() + x) * half;
        weights[i] = w * half;
        weights[n - 1 - i] = w * half;
    }
    (nodes, weights)
}

fn legendre_with_derivative<S: Scalar>(n: usize, x: S) -> (S, S) {
    let mut p0 = S::one();
    let mut p1 = x;
    if n == 0 {
        return (S::one(), S::zero());
    }
    for k in 2..=n {
        let kf = S::uz(k);
        let p2 = ((S::lit(2.0) * kf - S::one()) * x * p1 - (kf - S::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = S::uz(n);
    let d = nf * (x * p1 - p0) / (x * x - S::one());
    (p1, d)
}
