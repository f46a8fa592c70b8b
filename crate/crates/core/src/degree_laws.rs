//! Closed-form laws of the maximal degree Δ and of the big-node forest.
//!
//! Quantities under the excursion measure N are σ-finite masses and are
//! returned unnormalized; divide by [`degree_tail`] to condition.

use crate::error::{Error, Result};
use crate::mechanism::{BranchingMechanism, Side};
use serde::Serialize;

/// Which event on Δ a joint transform is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// {Δ ≤ δ}, through ψ_δ.
    NonStrict,
    /// {Δ < δ}, through ψ_{δ−}.
    Strict,
}

impl Strictness {
    fn side(self) -> Side {
        match self {
            Strictness::NonStrict => Side::Open,
            Strictness::Strict => Side::Closed,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")))
    }
}

/// N[Δ > δ] = ψ_δ^{−1}(π̄(δ)) (open) or N[Δ ≥ δ] = ψ_{δ−}^{−1}(π[δ,∞)) (closed).
pub fn degree_tail(m: &BranchingMechanism, delta: f64, side: Side) -> Result<f64> {
    check_delta(delta)?;
    let tail = m.pi().tail_side(delta, side)?;
    m.truncated_at(delta, side).invert(tail)
}

/// N[1 − e^{−λσ} 1{Δ ≤ δ}] (non-strict) or N[1 − e^{−λσ} 1{Δ < δ}] (strict).
pub fn joint_sigma_degree_laplace(m: &BranchingMechanism, delta: f64, lambda: f64, strictness: Strictness) -> Result<f64> {
    check_delta(delta)?;
    check_lambda(lambda)?;
    let side = strictness.side();
    let tail = m.pi().tail_side(delta, side)?;
    m.truncated_at(delta, side).invert(tail + lambda)
}

/// N[1 − e^{−λσ} 1{Δ = 0}] = ψ_0^{−1}(⟨π,1⟩ + λ).
pub fn degree_zero_sigma_laplace(m: &BranchingMechanism, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mass = m.pi().total_mass()?;
    if !mass.is_finite() {
        return Err(Error::InfiniteMass);
    }
    m.truncated_at(0.0, Side::Open).invert(mass + lambda)
}

/// F_r(Δ ≤ δ) for the forest started from a root of mass r. The root counts
/// as a node, so the probability vanishes when r > δ.
pub fn forest_degree_cdf(m: &BranchingMechanism, r: f64, delta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("r must be > 0, got {r}")));
    }
    check_delta(delta)?;
    if r > delta {
        return Ok(0.0);
    }
    Ok((-r * degree_tail(m, delta, Side::Open)?).exp())
}

/// w(δ) = 1/ψ_{δ−}′(N[Δ ≥ δ]); ∞ when the derivative vanishes.
pub fn w(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    let n = degree_tail(m, delta, Side::Closed)?;
    Ok(1.0 / m.truncated_at(delta, Side::Closed).psi_prime(n)?)
}

/// w₊(δ) = 1/ψ_δ′(N[Δ > δ]).
pub fn w_plus(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    Ok(1.0 / mrca_height_rate(m, delta)?)
}

/// 𝔤(δ) = π({δ}) e^{−δ N[Δ > δ]}.
pub fn g_atom(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let atom = m.pi().atom_mass(delta);
    if atom == 0.0 {
        return Ok(0.0);
    }
    Ok(atom * (-delta * degree_tail(m, delta, Side::Open)?).exp())
}

/// Rate ψ_δ′(N[Δ > δ]) of the exponential height of the most recent common
/// ancestor of the nodes with mass above δ.
pub fn mrca_height_rate(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    let n = degree_tail(m, delta, Side::Open)?;
    m.truncated_at(delta, Side::Open).psi_prime(n)
}

/// Mean of the exponential law of H_Δ given Δ = δ; only for diffuse π.
pub fn h_delta_mean(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    if !m.pi().is_diffuse() {
        return Err(Error::AtomicPi);
    }
    w(m, delta)
}

fn nonzero_tail(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let tail = m.pi().tail(delta)?;
    if tail == 0.0 {
        return Err(Error::ZeroTail(delta));
    }
    Ok(tail)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")))
    }
}

/// N[1 − e^{−λ Z₀}] = ψ_δ^{−1}((1 − e^{−λ}) π̄(δ)).
pub fn z0_laplace(m: &BranchingMechanism, delta: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let tail = nonzero_tail(m, delta)?;
    m.truncated_at(delta, Side::Open).invert(-(-lambda).exp_m1() * tail)
}

/// E[e^{−λξ}] for the offspring law ξ of the big-node forest.
pub fn xi_laplace(m: &BranchingMechanism, delta: f64, lambda: f64) -> Result<f64> {
    let tail = nonzero_tail(m, delta)?;
    let v = z0_laplace(m, delta, lambda)?;
    Ok(m.pi().tail_laplace(delta, v)? / tail)
}

/// E[ξ] = ∫_{(δ,∞)} r π(dr) / (α + ∫_{(δ,∞)} r π(dr)); exactly 1 when α = 0.
pub fn xi_mean(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    nonzero_tail(m, delta)?;
    let m1 = m.pi().partial_first_moment(delta, Side::Open)?;
    Ok(m1 / (m.alpha() + m1))
}

/// N[Z₀ = 1] = π̄(δ)/ψ_δ′(N[Δ > δ]).
pub fn prob_z0_eq_1(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let tail = m.pi().tail(delta)?;
    if tail == 0.0 {
        return Ok(0.0);
    }
    Ok(tail / mrca_height_rate(m, delta)?)
}

/// N[W = 1] = ∫_{(δ,∞)} e^{−r N[Δ>δ]} π(dr) / ψ_δ′(N[Δ > δ]).
pub fn prob_w_eq_1(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if m.pi().tail(delta)? == 0.0 {
        return Ok(0.0);
    }
    let n = degree_tail(m, delta, Side::Open)?;
    let lap = m.pi().tail_laplace(delta, n)?;
    Ok(lap / m.truncated_at(delta, Side::Open).psi_prime(n)?)
}

/// N[L^h_σ 1{Δ < δ}] = e^{−h/w(δ)}.
pub fn local_time_mean(m: &BranchingMechanism, delta: f64, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::InvalidArgument(format!("h must be >= 0, got {h}")));
    }
    Ok((-h / w(m, delta)?).exp())
}

/// π({δ}) / (w(δ) π̄(δ) ∫_{[δ,∞)} r π(dr)).
pub fn small_atom_ratio(m: &BranchingMechanism, delta: f64) -> Result<f64> {
    let tail = nonzero_tail(m, delta)?;
    let atom = m.pi().atom_mass(delta);
    if atom == 0.0 {
        return Ok(0.0);
    }
    let moment = m.pi().partial_first_moment(delta, Side::Closed)?;
    Ok(atom / (w(m, delta)? * tail * moment))
}

/// All scalar laws at one δ. A column whose law fails is `None`; the
/// reason is kept in `errors`.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeLawReport {
    pub delta: f64,
    pub tail_open: Option<f64>,
    pub tail_closed: Option<f64>,
    pub atom_mass: Option<f64>,
    pub w: Option<f64>,
    pub w_plus: Option<f64>,
    pub g: Option<f64>,
    pub mrca_rate: Option<f64>,
    pub h_delta_mean: Option<f64>,
    pub xi_mean: Option<f64>,
    pub p_z0_eq_1: Option<f64>,
    pub p_w_eq_1: Option<f64>,
    pub small_atom_ratio: Option<f64>,
    #[serde(skip)]
    pub errors: Vec<(&'static str, Error)>,
}

impl DegreeLawReport {
    pub const COLUMNS: [&'static str; 13] = [
        "delta",
        "tail_open",
        "tail_closed",
        "atom_mass",
        "w",
        "w_plus",
        "g",
        "mrca_rate",
        "h_delta_mean",
        "xi_mean",
        "p_z0_eq_1",
        "p_w_eq_1",
        "small_atom_ratio",
    ];

    pub fn evaluate(m: &BranchingMechanism, delta: f64) -> DegreeLawReport {
        let mut errors = Vec::new();
        let mut col = |name: &'static str, v: Result<f64>| match v {
            Ok(x) => Some(x),
            Err(e) => {
                errors.push((name, e));
                None
            }
        };
        let tail_open = col("tail_open", degree_tail(m, delta, Side::Open));
        let tail_closed = col("tail_closed", degree_tail(m, delta, Side::Closed));
        let atom_mass = match (tail_open, tail_closed) {
            (Some(o), Some(c)) => Some((c - o).max(0.0)),
            _ => None,
        };
        let w_ = col("w", w(m, delta));
        let w_plus_ = col("w_plus", w_plus(m, delta));
        let g = col("g", g_atom(m, delta));
        let mrca_rate = col("mrca_rate", mrca_height_rate(m, delta));
        let h_delta_mean_ = col("h_delta_mean", h_delta_mean(m, delta));
        let xi_mean_ = col("xi_mean", xi_mean(m, delta));
        let p_z0_eq_1 = col("p_z0_eq_1", prob_z0_eq_1(m, delta));
        let p_w_eq_1 = col("p_w_eq_1", prob_w_eq_1(m, delta));
        let small_atom_ratio_ = col("small_atom_ratio", small_atom_ratio(m, delta));
        DegreeLawReport {
            delta,
            tail_open,
            tail_closed,
            atom_mass,
            w: w_,
            w_plus: w_plus_,
            g,
            mrca_rate,
            h_delta_mean: h_delta_mean_,
            xi_mean: xi_mean_,
            p_z0_eq_1,
            p_w_eq_1,
            small_atom_ratio: small_atom_ratio_,
            errors,
        }
    }

    /// Values in `COLUMNS` order.
    pub fn values(&self) -> [Option<f64>; 13] {
        [
            Some(self.delta),
            self.tail_open,
            self.tail_closed,
            self.atom_mass,
            self.w,
            self.w_plus,
            self.g,
            self.mrca_rate,
            self.h_delta_mean,
            self.xi_mean,
            self.p_z0_eq_1,
            self.p_w_eq_1,
            self.small_atom_ratio,
        ]
    }
}
