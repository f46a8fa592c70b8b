//! Bracketed Newton iteration with bisection fallback.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub residual: f64,
}

/// Find a zero of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` have
/// opposite signs (or one of them is zero). `f` returns the value and the
/// derivative. Iteration stops once `done(residual, x)` holds or the bracket
/// shrinks to a few ulps; the best point seen is returned in both cases.
pub(crate) fn newton_bracketed<F, D>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x0: Option<f64>,
    done: D,
    max_iter: usize,
) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
    D: Fn(f64, f64) -> bool,
{
    let (f_lo, _) = f(lo);
    if f_lo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0 });
    }
    let (f_hi, _) = f(hi);
    if f_hi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0 });
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() && !f_hi.is_finite() {
        return Err(Error::NonConvergence { iterations: 0, residual: f_lo.abs().min(f_hi.abs()) });
    }
    let lo_negative = f_lo < 0.0;

    let mut x = match x0 {
        Some(g) if g > lo && g < hi => g,
        _ => split(lo, hi),
    };
    let mut best = Root { x, residual: f64::INFINITY };
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx.is_finite() && fx.abs() < best.residual.abs() {
            best = Root { x, residual: fx };
        }
        if fx == 0.0 || done(fx, x) {
            return Ok(Root { x, residual: fx });
        }
        if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) || hi - lo <= f64::MIN_POSITIVE {
            return Ok(best);
        }
        let step = x - fx / dfx;
        x = if step.is_finite() && step > lo && step < hi { step } else { split(lo, hi) };
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: best.residual.abs() })
}

// Geometric midpoint for wide positive brackets so that ranges spanning many
// decades are halved in log scale.
fn split(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 4.0 * lo {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}
