//! Complete and upper incomplete gamma functions, and the constants of the
//! stable mechanism ψ(λ) = λ^γ.

use crate::error::{Error, Result};
use crate::roots::newton_bracketed;
use serde::Serialize;

// Taylor coefficients of 1/Γ(z) around 0, starting at z^1.
const RGAMMA_COEF: [f64; 30] = [
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
    -2.2987456844353702066e-19,
    1.7144063219273374334e-20,
];

const NEAR_INTEGER: f64 = 1e-8;
const CF_MAX_ITER: usize = 10_000;

/// Γ(1+z) − 1 for z ∈ [−0.5, 1], without cancellation near z = 0.
pub fn gam1pm1(z: f64) -> f64 {
    // 1/Γ(1+z) = Σ_{k≥1} c_k z^{k−1} = 1 + z·q(z)
    let mut q = 0.0;
    for &c in RGAMMA_COEF[1..].iter().rev() {
        q = q * z + c;
    }
    let inv = 1.0 + z * q;
    -z * q / inv
}

/// Complete gamma function for 0 < x ≤ 171. Returns NaN outside that range.
pub fn gamma(x: f64) -> f64 {
    if !(x > 0.0 && x <= 171.0) {
        return f64::NAN;
    }
    let mut y = x;
    let mut scale = 1.0;
    while y > 1.5 {
        y -= 1.0;
        scale *= y;
    }
    while y < 0.5 {
        scale /= y;
        y += 1.0;
    }
    scale * (1.0 + gam1pm1(y - 1.0))
}

/// Upper incomplete gamma function Γ(s, x) = ∫_x^∞ t^{s−1} e^{−t} dt for
/// s ∈ (−3, 1] and x > 0.
///
/// Values of s within 1e−8 of 0, −1 or −2 are rejected. For very large x the
/// result underflows to 0.
pub fn upper_gamma(s: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::InvalidArgument(format!("upper_gamma needs x > 0, got {x}")));
    }
    if !(s > -3.0 && s <= 1.0) {
        return Err(Error::InvalidArgument(format!("upper_gamma needs s in (-3, 1], got {s}")));
    }
    if s <= NEAR_INTEGER && (s - s.round()).abs() < NEAR_INTEGER {
        return Err(Error::NearIntegerParameter(s));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x > 1.0 {
        continued_fraction(s, x)
    } else {
        Ok(series_with_recurrence(s, x))
    }
}

fn continued_fraction(s: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=CF_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            return Ok((-x + s * x.ln()).exp() * h);
        }
    }
    Err(Error::NonConvergence { iterations: CF_MAX_ITER, residual: f64::NAN })
}

// x ≤ 1: series at a shifted parameter s0 ∈ (−0.5, 1], then
// Γ(s−1, x) = (Γ(s, x) − x^{s−1} e^{−x}) / (s − 1) down to s.
fn series_with_recurrence(s: f64, x: f64) -> f64 {
    let mut s0 = s;
    let mut n = 0;
    while s0 <= -0.5 {
        s0 += 1.0;
        n += 1;
    }
    let lx = x.ln();
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / (s0 + k as f64);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    let mut g = (gam1pm1(s0) - (s0 * lx).exp_m1()) / s0 - (s0 * lx).exp() * sum;
    let ex = (-x).exp();
    let mut sc = s0;
    for _ in 0..n {
        sc -= 1.0;
        g = (g - (sc * lx).exp() * ex) / sc;
    }
    g
}

/// a_γ = γ(γ−1)/Γ(2−γ), the density constant of the Lévy measure a_γ r^{−1−γ}
/// whose mechanism is exactly λ^γ.
pub fn a_gamma(gamma_: f64) -> Result<f64> {
    check_index(gamma_)?;
    Ok(gamma_ * (gamma_ - 1.0) / gamma(2.0 - gamma_))
}

fn check_index(gamma_: f64) -> Result<()> {
    if gamma_ > 1.0 && gamma_ < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("stable index must lie in (1, 2), got {gamma_}")))
    }
}

/// The unique c > 0 with Γ(−γ, c) = 1/a_γ.
pub fn solve_c_gamma(gamma_: f64) -> Result<f64> {
    let a = a_gamma(gamma_)?;
    let target = 1.0 / a;
    let f = |x: f64| upper_gamma(-gamma_, x).map(|g| g - target);
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(lo)? <= 0.0 {
        lo /= 4.0;
    }
    while f(hi)? >= 0.0 {
        hi *= 4.0;
    }
    let root = newton_bracketed(
        |x| {
            let v = upper_gamma(-gamma_, x).map(|g| g - target).unwrap_or(f64::NAN);
            (v, -(-x - (gamma_ + 1.0) * x.ln()).exp())
        },
        lo,
        hi,
        None,
        |res, _| res.abs() <= 1e-14 * target,
        500,
    )?;
    if root.residual.abs() > 1e-10 * target {
        return Err(Error::NonConvergence { iterations: 500, residual: root.residual.abs() });
    }
    Ok(root.x)
}

/// The unique positive root x of x^γ(a_γ Γ(−γ, x) − 1) = a_γ e^{−λ}/γ.
///
/// Returns 0 at λ = 0 and c_γ for λ = ∞.
pub fn solve_c_gamma_lambda(gamma_: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let a = a_gamma(gamma_)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let c = solve_c_gamma(gamma_)?;
    if lambda.is_infinite() {
        return Ok(c);
    }
    let rhs = a * (-lambda).exp() / gamma_;
    let scale = a / gamma_;
    // g(x) = x^γ(aΓ(−γ,x) − 1) − rhs decreases from a/γ − rhs to −rhs on (0, c].
    let g = |x: f64| -> (f64, f64) {
        let ug = upper_gamma(-gamma_, x).unwrap_or(f64::NAN);
        let xg = x.powf(gamma_);
        let v = xg * (a * ug - 1.0) - rhs;
        // d/dx: γx^{γ−1}(aΓ−1) − a x^γ x^{−γ−1} e^{−x}
        let d = gamma_ * xg / x * (a * ug - 1.0) - a * (-x).exp() / x;
        (v, d)
    };
    if g(c).0 >= 0.0 {
        // e^{−λ} is below the resolution of g at c
        return Ok(c);
    }
    let root = newton_bracketed(g, f64::MIN_POSITIVE.sqrt(), c, None, |res, _| res.abs() <= 1e-15 * scale, 500)?;
    if root.residual.abs() > 1e-12 * scale {
        return Err(Error::NonConvergence { iterations: 500, residual: root.residual.abs() });
    }
    Ok(root.x)
}

/// Stable-case constants for one index γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableConstants {
    pub gamma: f64,
    pub a_gamma: f64,
    pub c_gamma: f64,
}

impl StableConstants {
    pub fn new(gamma_: f64) -> Result<Self> {
        Ok(StableConstants { gamma: gamma_, a_gamma: a_gamma(gamma_)?, c_gamma: solve_c_gamma(gamma_)? })
    }

    /// δ·N[Δ > δ].
    pub fn tail_coeff(&self) -> f64 {
        self.c_gamma
    }

    /// δ·N[Z₀ = 1] = (c/γ)e^c.
    pub fn z0_coeff(&self) -> f64 {
        self.c_gamma / self.gamma * self.c_gamma.exp()
    }

    /// δ·N[W = 1] = c^{γ+1}e^c/a_γ.
    pub fn w1_coeff(&self) -> f64 {
        self.c_gamma.powf(self.gamma + 1.0) * self.c_gamma.exp() / self.a_gamma
    }

    /// Laplace transform E[e^{−λξ}] of the offspring law, the same for every δ.
    pub fn offspring_laplace(&self, lambda: f64) -> Result<f64> {
        let cl = solve_c_gamma_lambda(self.gamma, lambda)?;
        Ok((-lambda).exp() + self.gamma / self.a_gamma * cl.powf(self.gamma))
    }
}

// Integrals of the stable density a r^{−1−γ} after the substitution t = λr.

/// K(z) = ∫_0^z (e^{−t} − 1 + t) t^{−1−γ} dt; K(∞) = 1/a_γ.
pub(crate) fn stable_head(gamma_: f64, a: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z.is_infinite() {
        return 1.0 / a;
    }
    if z <= 2.0 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        let mut zp = z; // z^k
        for k in 1..80 {
            fact *= k as f64;
            if k == 1 {
                continue;
            }
            zp *= z;
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let add = sign * zp / (fact * (kf - gamma_));
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum * z.powf(-gamma_)
    } else {
        let ug = upper_gamma(-gamma_, z).unwrap_or(0.0);
        1.0 / a - (ug - z.powf(-gamma_) / gamma_ + z.powf(1.0 - gamma_) / (gamma_ - 1.0))
    }
}

/// K₁(z) = ∫_0^z (1 − e^{−t}) t^{−γ} dt; K₁(∞) = γ/a_γ.
pub(crate) fn stable_head_prime(gamma_: f64, a: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z.is_infinite() {
        return gamma_ / a;
    }
    if z <= 2.0 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        let mut zp = 1.0;
        for k in 1..80 {
            let kf = k as f64;
            fact *= kf;
            zp *= z;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let add = sign * zp / (fact * (kf + 1.0 - gamma_));
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum * z.powf(1.0 - gamma_)
    } else {
        let ug = upper_gamma(1.0 - gamma_, z).unwrap_or(0.0);
        gamma_ / a - z.powf(1.0 - gamma_) / (gamma_ - 1.0) + ug
    }
}

/// M(z) = ∫_z^∞ (1 − e^{−t}) t^{−1−γ} dt.
pub(crate) fn stable_tail(gamma_: f64, z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    let ug = upper_gamma(1.0 - gamma_, z).unwrap_or(0.0);
    ((-z).exp_m1().abs() * z.powf(-gamma_) + ug) / gamma_
}
