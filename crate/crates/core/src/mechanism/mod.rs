//! Branching mechanisms ψ(λ) = αλ + βλ² + ∫(e^{−λr} − 1 + λr) π(dr), their
//! truncations ψ_δ and ψ_{δ−}, and numeric inversion.

mod measure;
mod spec;

pub use measure::{loglog_density, Density, JumpSampler, LevyMeasure, MeasureKind, Side};
pub use spec::{MechanismSpec, PiSpec};

pub(crate) use measure::{Span, Weight};

use crate::error::{Error, Result};
use crate::roots::newton_bracketed;
use std::cell::RefCell;

#[derive(Debug, Clone)]
pub struct BranchingMechanism {
    alpha: f64,
    beta: f64,
    pi: LevyMeasure,
}

/// Which jumps are removed from the base mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    None,
    /// `Open` gives ψ_δ (jumps > δ removed), `Closed` gives ψ_{δ−} (jumps ≥ δ removed).
    AtDelta(f64, Side),
}

#[derive(Debug, Clone, Copy)]
pub struct MechanismVariant<'a> {
    pub base: &'a BranchingMechanism,
    pub truncation: Truncation,
}

pub const INVERT_ABS_TOL: f64 = 1e-12;
pub const INVERT_REL_TOL: f64 = 1e-10;
const INVERT_MAX_ITER: usize = 400;

impl BranchingMechanism {
    pub fn new(alpha: f64, beta: f64, pi: LevyMeasure) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidMechanism(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidMechanism(format!("beta must be finite and >= 0, got {beta}")));
        }
        if beta == 0.0 && !pi.has_infinite_variation() {
            return Err(Error::InvalidMechanism("need beta > 0 or a Lévy measure with infinite variation".into()));
        }
        Ok(BranchingMechanism { alpha, beta, pi })
    }

    /// ψ(λ) = λ^γ.
    pub fn stable(gamma: f64) -> Result<Self> {
        BranchingMechanism::new(0.0, 0.0, LevyMeasure::stable(gamma)?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn pi(&self) -> &LevyMeasure {
        &self.pi
    }

    pub fn is_critical(&self) -> bool {
        self.alpha == 0.0
    }

    pub fn base(&self) -> MechanismVariant<'_> {
        self.variant(Truncation::None)
    }

    pub fn variant(&self, truncation: Truncation) -> MechanismVariant<'_> {
        MechanismVariant { base: self, truncation }
    }

    /// ψ_δ (open) or ψ_{δ−} (closed).
    pub fn truncated_at(&self, delta: f64, side: Side) -> MechanismVariant<'_> {
        self.variant(Truncation::AtDelta(delta, side))
    }

    pub fn psi(&self, lambda: f64) -> Result<f64> {
        self.base().psi(lambda)
    }

    /// φ(λ) = ψ(λ)/λ − α, with φ(0) = 0.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let comp = self.pi.integral(Span::all(), Weight::Compensated(lambda))?;
        Ok(self.beta * lambda + comp / lambda)
    }

    /// ψ_0(λ) = (α + ∫ r π(dr))λ + βλ², defined when ⟨π, 1⟩ < ∞.
    pub fn psi_zero(&self, lambda: f64) -> Result<f64> {
        if !self.pi.total_mass()?.is_finite() {
            return Err(Error::InfiniteMass);
        }
        self.truncated_at(0.0, Side::Open).psi(lambda)
    }

    /// Mechanism with the jumps above δ folded into the drift:
    /// α' = α + ∫_{(δ,∞)} r π(dr), same β, π restricted to (0, δ].
    pub fn truncated_mechanism(&self, delta: f64) -> Result<BranchingMechanism> {
        let extra = self.pi.partial_first_moment(delta, Side::Open)?;
        Ok(BranchingMechanism { alpha: self.alpha + extra, beta: self.beta, pi: self.pi.restricted(delta) })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")))
    }
}

impl MechanismVariant<'_> {
    // (drift, kept jumps)
    fn parts(&self) -> Result<(f64, Span)> {
        match self.truncation {
            Truncation::None => Ok((self.base.alpha, Span::all())),
            Truncation::AtDelta(delta, side) => {
                if !(delta >= 0.0) {
                    return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
                }
                let m1 = self.base.pi.partial_first_moment(delta, side)?;
                Ok((self.base.alpha + m1, Span::head(delta, side)))
            }
        }
    }

    /// ψ_variant(λ).
    pub fn psi(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let (drift, head) = self.parts()?;
        if !drift.is_finite() {
            return Err(Error::InfiniteMass);
        }
        let comp = self.base.pi.integral(head, Weight::Compensated(lambda))?;
        Ok(drift * lambda + self.base.beta * lambda * lambda + comp)
    }

    /// dψ_variant/dλ; at λ = 0 this is α plus the first moment of the removed jumps.
    pub fn psi_prime(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let (drift, head) = self.parts()?;
        let comp = self.base.pi.integral(head, Weight::CompensatedPrime(lambda))?;
        Ok(drift + 2.0 * self.base.beta * lambda + comp)
    }

    /// The unique λ ≥ 0 with ψ_variant(λ) = target.
    pub fn invert(&self, target: f64) -> Result<f64> {
        if !(target >= 0.0) {
            return Err(Error::InvalidArgument(format!("inversion target must be >= 0, got {target}")));
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        if target.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.psi(hi)? < target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::NonConvergence { iterations: 0, residual: target });
            }
        }
        let failure = RefCell::new(None);
        let f = |x: f64| {
            let v = self.psi(x).and_then(|p| Ok((p - target, self.psi_prime(x)?)));
            match v {
                Ok(pair) => pair,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    (f64::NAN, f64::NAN)
                }
            }
        };
        let done_tol = INVERT_ABS_TOL.min(1e-2 * INVERT_REL_TOL * target);
        let root = newton_bracketed(f, lo, hi, None, |res, _| res.abs() <= done_tol, INVERT_MAX_ITER);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let root = root?;
        let allowed = INVERT_ABS_TOL.max(INVERT_REL_TOL * target);
        if !(root.residual.abs() <= allowed) {
            return Err(Error::NonConvergence { iterations: INVERT_MAX_ITER, residual: root.residual.abs() });
        }
        Ok(root.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_log, QuadBudget};
    use crate::special::{a_gamma, solve_c_gamma, upper_gamma};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn stable15() -> BranchingMechanism {
        BranchingMechanism::stable(1.5).unwrap()
    }

    fn atomic() -> BranchingMechanism {
        BranchingMechanism::new(0.0, 1.0, LevyMeasure::atoms(vec![(2.0, 0.5)]).unwrap()).unwrap()
    }

    #[test]
    fn stable_psi_is_power() {
        let m = stable15();
        for &l in &[1e-6, 0.01, 0.3, 1.0, 2.5, 40.0, 1e5] {
            assert!(rel(m.psi(l).unwrap(), f64::powf(l, 1.5)) < 1e-12, "λ={l}");
            assert!(rel(m.base().psi_prime(l).unwrap(), 1.5 * f64::powf(l, 0.5)) < 1e-12);
        }
        assert_eq!(m.psi(0.0).unwrap(), 0.0);
        assert_eq!(m.base().psi_prime(0.0).unwrap(), 0.0);
    }

    #[test]
    fn stable_truncated_closed_form() {
        let m = stable15();
        let a = a_gamma(1.5).unwrap();
        for &d in &[0.5, 2.0, 10.0] {
            let v = m.truncated_at(d, Side::Open);
            for &l in &[0.05, 0.7, 3.0, 50.0] {
                let want = f64::powf(l, 1.5) * (1.0 - a * upper_gamma(-1.5, l * d).unwrap()) + a / 1.5 * f64::powf(d, -1.5);
                assert!(rel(v.psi(l).unwrap(), want) < 1e-11, "δ={d} λ={l}");
            }
        }
        assert!(rel(m.truncated_at(1.0, Side::Open).psi_prime(0.0).unwrap(), 2.0 * a) < 1e-15);
    }

    #[test]
    fn psi_zero_on_atoms() {
        let m = atomic();
        assert_eq!(m.psi_zero(1.0).unwrap(), 2.0);
        assert_eq!(m.psi_zero(0.0).unwrap(), 0.0);
        assert!(matches!(stable15().psi_zero(1.0), Err(Error::InfiniteMass)));
    }

    #[test]
    fn phi_values() {
        let m = stable15();
        assert!(rel(m.phi(2.0).unwrap(), 2f64.sqrt()) < 1e-12);
        assert_eq!(m.phi(0.0).unwrap(), 0.0);
        assert!(m.phi(1e-12).unwrap() < 1e-5);
        // β = 1 plus atoms: φ(λ) = λ + ∫(1 − e^{−λr}) π̄(r) dr, π̄ = 0.5 on (0, 2)
        let a = atomic();
        let l: f64 = 0.8;
        let jump = 0.5 * (2.0 - (1.0 - (-2.0 * l).exp()) / l);
        assert!(rel(a.phi(l).unwrap(), l + jump) < 1e-14);
    }

    #[test]
    fn constructor_validation() {
        let atoms = LevyMeasure::atoms(vec![(1.0, 1.0)]).unwrap();
        assert!(BranchingMechanism::new(0.0, 0.0, atoms.clone()).is_err());
        assert!(BranchingMechanism::new(-1.0, 1.0, atoms.clone()).is_err());
        assert!(BranchingMechanism::new(0.0, f64::NAN, atoms).is_err());
        assert!(stable15().is_critical());
    }

    #[test]
    fn invert_examples() {
        let m = stable15();
        assert_eq!(m.base().invert(0.0).unwrap(), 0.0);
        assert!(rel(m.base().invert(8.0).unwrap(), 4.0) < 1e-12);
        assert!(m.base().invert(-1.0).is_err());
        let c = solve_c_gamma(1.5).unwrap();
        let v = m.truncated_at(2.0, Side::Open);
        let tail = m.pi().tail(2.0).unwrap();
        assert!(rel(v.invert(tail).unwrap(), c / 2.0) < 1e-10);
    }

    #[test]
    fn variant_without_tail_equals_base() {
        let m = BranchingMechanism::new(0.0, 1.0, LevyMeasure::atoms(vec![(2.0, 0.5)]).unwrap()).unwrap();
        let v = m.truncated_at(3.0, Side::Open);
        for &l in &[0.1, 1.0, 10.0] {
            assert_eq!(v.psi(l).unwrap(), m.psi(l).unwrap());
        }
    }

    #[test]
    fn truncated_mechanism_matches_variant() {
        let m = stable15();
        for &d in &[0.5, 2.0] {
            let t = m.truncated_mechanism(d).unwrap();
            assert!(t.alpha() >= m.alpha());
            for i in 0..25 {
                let l = 1e-3 * 1e6f64.powf(i as f64 / 24.0);
                let want = m.truncated_at(d, Side::Open).psi(l).unwrap();
                assert!(rel(t.psi(l).unwrap(), want) < 1e-10);
            }
        }
        let far = m.truncated_mechanism(1e300).unwrap();
        assert!(rel(far.psi(3.0).unwrap(), m.psi(3.0).unwrap()) < 1e-12);
    }

    #[test]
    fn tabulated_phi_against_quadrature() {
        let a = a_gamma(1.5).unwrap();
        let d: Density = Arc::new(move |r: f64| a * r.powf(-2.5));
        let m = BranchingMechanism::new(0.0, 1.0, LevyMeasure::tabulated(d.clone(), 0.0, 50.0, QuadBudget::default()).unwrap()).unwrap();
        let l = 1.7;
        // β λ + ∫(1 − e^{−λr}) π̄(r) dr with π̄(r) = ∫_r^{50} d
        let pibar = |r: f64| if r >= 50.0 { 0.0 } else { a / 1.5 * (r.powf(-1.5) - 50f64.powf(-1.5)) };
        let q = integrate_log(|r| -(-l * r).exp_m1() * pibar(r), 1e-100, 50.0, &QuadBudget::default()).unwrap();
        assert!(rel(m.phi(l).unwrap(), l + q.value) < 1e-8);
    }

    fn mechanisms() -> Vec<BranchingMechanism> {
        vec![
            stable15(),
            BranchingMechanism::new(1.0, 0.0, LevyMeasure::stable(1.5).unwrap()).unwrap(),
            BranchingMechanism::stable(1.1).unwrap(),
            BranchingMechanism::stable(1.9).unwrap(),
            BranchingMechanism::new(0.3, 1.0, LevyMeasure::atoms(vec![(0.5, 2.0), (2.0, 0.5), (7.0, 0.01)]).unwrap()).unwrap(),
        ]
    }

    fn truncations() -> Vec<Truncation> {
        vec![Truncation::None, Truncation::AtDelta(0.5, Side::Open), Truncation::AtDelta(2.0, Side::Closed), Truncation::AtDelta(2.0, Side::Open)]
    }

    proptest! {
        #[test]
        fn monotone_and_convex(mi in 0usize..5, ti in 0usize..4, l1 in -6.0f64..6.0, dl in 0.01f64..3.0) {
            let ms = mechanisms();
            let v = ms[mi].variant(truncations()[ti]);
            let (a, b) = (10f64.powf(l1), 10f64.powf(l1 + dl));
            let (pa, pb) = (v.psi(a).unwrap(), v.psi(b).unwrap());
            prop_assert!(pa < pb);
            let mid = v.psi(0.5 * (a + b)).unwrap();
            prop_assert!(mid <= 0.5 * (pa + pb) * (1.0 + 1e-12));
        }

        #[test]
        fn round_trip(mi in 0usize..5, ti in 0usize..4, lx in -8.0f64..8.0) {
            let ms = mechanisms();
            let v = ms[mi].variant(truncations()[ti]);
            let x = 10f64.powf(lx);
            let l = v.invert(x).unwrap();
            prop_assert!(rel(v.psi(l).unwrap(), x) <= 1e-10);
        }

        #[test]
        fn ordering_against_base(mi in 0usize..5, d in 0.1f64..10.0, l in 0.0f64..50.0) {
            let ms = mechanisms();
            let m = &ms[mi];
            let base = m.psi(l).unwrap();
            let open = m.truncated_at(d, Side::Open).psi(l).unwrap();
            let closed = m.truncated_at(d, Side::Closed).psi(l).unwrap();
            let tail = m.pi().tail(d).unwrap();
            let scale = 1e-12 * (1.0 + base.abs());
            prop_assert!(base <= open + scale && base <= closed + scale);
            let gap = m.pi().integral(Span::tail(d, Side::Open), Weight::OneMinusExp(l)).unwrap();
            prop_assert!((open - base - gap).abs() <= 1e-9 * (1.0 + open.abs()));
            prop_assert!(open - base <= tail * (1.0 + 1e-12) + scale);
        }

        #[test]
        fn derivative_vs_finite_difference(mi in 0usize..5, ti in 0usize..4, lx in -2.0f64..3.0) {
            let ms = mechanisms();
            let v = ms[mi].variant(truncations()[ti]);
            let l = 10f64.powf(lx);
            let h = 1e-4 * l;
            let fd = (v.psi(l + h).unwrap() - v.psi(l - h).unwrap()) / (2.0 * h);
            let d = v.psi_prime(l).unwrap();
            prop_assert!(rel(d, fd) <= 1e-6, "ψ'={} fd={}", d, fd);
        }
    }

    #[test]
    fn large_delta_limit() {
        let m = stable15();
        // π̄(δ) < 1e−12 needs δ ≳ 1e8
        let d = 1e9;
        assert!(m.pi().tail(d).unwrap() < 1e-12);
        for &l in &[0.1, 1.0, 10.0] {
            assert!((m.truncated_at(d, Side::Open).psi(l).unwrap() - m.psi(l).unwrap()).abs() < 1e-11);
        }
    }
}
