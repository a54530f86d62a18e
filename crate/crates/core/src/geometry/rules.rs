//! Reference quadrature rules.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[0, 1]` with `n` points.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points per direction that integrates degree `order` exactly.
pub fn points_for_order(order: usize) -> usize {
    order / 2 + 1
}

/// Point/weight rules on the reference segment, triangle and square, built once
/// for a given polynomial order.
#[derive(Clone, Debug)]
pub struct ReferenceRules {
    pub order: usize,
    /// Rule on `[0, 1]`.
    pub line: Vec<(f64, f64)>,
    /// Rule on the triangle `(0,0), (1,0), (0,1)`; weights sum to 1/2.
    pub triangle: Vec<([f64; 2], f64)>,
    /// Tensor rule on `[0, 1]^2`; weights sum to 1.
    pub square: Vec<([f64; 2], f64)>,
}

impl ReferenceRules {
    pub fn new(order: usize) -> Self {
        let line = gauss_legendre(points_for_order(order));
        // collapsed rule: the Duffy Jacobian adds one degree in the collapsed direction
        let tri_line = gauss_legendre(points_for_order(order + 1));
        let mut triangle = Vec::with_capacity(tri_line.len() * tri_line.len());
        for &(u, wu) in &tri_line {
            for &(v, wv) in &tri_line {
                triangle.push(([u, v * (1.0 - u)], wu * wv * (1.0 - u)));
            }
        }
        let mut square = Vec::with_capacity(line.len() * line.len());
        for &(u, wu) in &line {
            for &(v, wv) in &line {
                square.push(([u, v], wu * wv));
            }
        }
        ReferenceRules {
            order,
            line,
            triangle,
            square,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..=8 {
            let rule = gauss_legendre(n);
            for k in 0..2 * n {
                let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
                assert_relative_eq!(s, 1.0 / (k as f64 + 1.0), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn triangle_rule_is_exact_to_order() {
        // ∫_T x^a y^b = a! b! / (a+b+2)!
        for order in 0..=8 {
            let r = ReferenceRules::new(order);
            for a in 0..=order {
                for b in 0..=order - a {
                    let s: f64 = r
                        .triangle
                        .iter()
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert_relative_eq!(s, exact, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn square_rule_is_exact_per_direction() {
        let r = ReferenceRules::new(6);
        let s: f64 = r
            .square
            .iter()
            .map(|(p, w)| w * p[0].powi(6) * p[1].powi(5))
            .sum();
        assert_relative_eq!(s, 1.0 / 42.0, epsilon = 1e-14);
    }

    #[test]
    fn weights_are_positive() {
        let r = ReferenceRules::new(8);
        assert!(r.line.iter().all(|&(_, w)| w > 0.0));
        assert!(r.triangle.iter().all(|&(_, w)| w > 0.0));
    }
}
