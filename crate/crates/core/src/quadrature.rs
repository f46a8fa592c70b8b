//! Adaptive 15-point Gauss–Kronrod quadrature.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Tolerances and subdivision limit for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadBudget {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadBudget {
    fn default() -> Self {
        QuadBudget { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Piece { a, b, value: k * h, error: ((k - g) * h).abs() }
}

/// Integrate `f` over the finite interval [a, b].
///
/// Fails with [`Error::Quadrature`] when the error estimate is still above
/// the requested tolerance after `budget.max_intervals` subdivisions.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, budget: &QuadBudget) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    let first = kronrod(&f, a, b);
    let mut total = first.value;
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        let requested = budget.abs_tol.max(budget.rel_tol * total.abs());
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature { achieved: err, requested });
        }
        if err <= requested {
            return Ok(Quad { value: total, error: err });
        }
        if heap.len() >= budget.max_intervals {
            return Err(Error::Quadrature { achieved: err, requested });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::Quadrature { achieved: err, requested });
        }
        let left = kronrod(&f, worst.a, m);
        let right = kronrod(&f, m, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // resum occasionally to stop drift in the running totals
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Integrate `g(r)` over [a, b] ⊂ (0, ∞) after substituting r = e^u, which
/// suits integrands spread over many decades.
pub fn integrate_log<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, budget: &QuadBudget) -> Result<Quad> {
    if !(a > 0.0) || b < a {
        return Err(Error::InvalidArgument(format!("log-scale integration needs 0 < a <= b, got [{a}, {b}]")));
    }
    integrate(
        |u| {
            let r = u.exp();
            let v = g(r) * r;
            if v.is_nan() { 0.0 } else { v }
        },
        a.ln(),
        b.ln(),
        budget,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &QuadBudget::default()).unwrap();
        assert!((q.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let q = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, &QuadBudget { abs_tol: 1e-13, ..QuadBudget::default() }).unwrap();
        assert!(q.value.abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_in_log_scale() {
        // ∫_0^1 x^{-1/2} dx = 2, truncated at 1e-40
        let q = integrate_log(|x| x.powf(-0.5), 1e-40, 1.0, &QuadBudget::default()).unwrap();
        assert!((q.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let tight = QuadBudget { abs_tol: 0.0, rel_tol: 1e-15, max_intervals: 3 };
        let err = integrate(|x| (1.0 / x).sin(), 1e-3, 1.0, &tight).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
