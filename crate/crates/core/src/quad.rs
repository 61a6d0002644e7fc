//! Gauss-Legendre quadrature utilities.
//!
//! All rules use fixed nodes and a fixed summation order, so every integral
//! in the crate is bitwise reproducible.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Computed once by Newton iteration on the Legendre recurrence; accurate
/// to a few ulps for the orders used here.
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    // Orders used by the crate; anything else falls back to a fresh leak.
    static CACHE: OnceLock<std::sync::Mutex<std::collections::HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(std::collections::HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Box::leak(Box::new(compute_gauss_legendre(n))))
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by the Bonnet recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrates `f` over `[a, b]` with `panels` uniform panels of the
/// `order`-point Gauss-Legendre rule.
pub fn composite_gl<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, order: usize, mut f: F) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let half = 0.5 * h;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// Same as [`composite_gl`] but also returns the sum of `|f|` contributions
/// (used for roundoff-floor estimates).
pub fn composite_gl_with_abs<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    mut f: F,
) -> (f64, f64) {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let half = 0.5 * h;
    let mut total = 0.0;
    let mut total_abs = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut acc = 0.0;
        let mut acc_abs = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let v = f(mid + half * x);
            acc += w * v;
            acc_abs += w * v.abs();
        }
        total += acc * half;
        total_abs += acc_abs * half;
    }
    (total, total_abs)
}

/// The quadrature points `(x_i, w_i)` of a composite GL rule, materialized.
pub fn composite_gl_points(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let half = 0.5 * h;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(weights) {
            out.push((mid + half * x, w * half));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // n-point GL is exact through degree 2n-1.
        for n in [2, 4, 8, 16] {
            let (nodes, weights) = gauss_legendre(n);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                let got: f64 = nodes
                    .iter()
                    .zip(weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                assert!(
                    (got - exact).abs() < 1e-13,
                    "n={n} deg={deg}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [3, 5, 12, 24] {
            let (_, weights) = gauss_legendre(n);
            let s: f64 = weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn composite_matches_known_integrals() {
        let v = composite_gl(0.0, std::f64::consts::PI, 8, 8, f64::sin);
        assert!((v - 2.0).abs() < 1e-12);
        let v = composite_gl(0.0, 1.0, 4, 8, |x| (-x).exp());
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn points_reproduce_composite() {
        // Same nodes, different summation order: equal to rounding.
        let pts = composite_gl_points(0.0, 2.0, 3, 4);
        let direct = composite_gl(0.0, 2.0, 3, 4, |x| x * x * x);
        let via_pts: f64 = pts.iter().map(|(x, w)| w * x * x * x).sum();
        assert!((direct - via_pts).abs() < 1e-14);
        assert!((via_pts - 4.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand_resolved() {
        // cos(20 x) over [0, 10]: resolved once panels are fine enough.
        let exact = (20.0f64 * 10.0).sin() / 20.0;
        let v = composite_gl(0.0, 10.0, 40, 16, |x| (20.0 * x).cos());
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }
}
