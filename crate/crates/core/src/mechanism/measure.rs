use crate::error::{Error, Result};
use crate::quadrature::{integrate_log, QuadBudget};
use crate::special::{a_gamma, stable_head, stable_head_prime, stable_tail, upper_gamma};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Density of a tabulated Lévy measure.
pub type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

// Tabulated integrals that start at 0 are cut at this point.
const LOG_FLOOR: f64 = 1e-100;

/// Whether the boundary point δ belongs to a tail set: `Open` is (δ, ∞),
/// `Closed` is [δ, ∞). Only matters when π has an atom at δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Open,
    Closed,
}

#[derive(Clone)]
pub struct Tabulated {
    density: Density,
    lower: f64,
    upper: f64,
    budget: QuadBudget,
    finite_mass: bool,
    infinite_variation: bool,
}

impl fmt::Debug for Tabulated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tabulated")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("budget", &self.budget)
            .field("finite_mass", &self.finite_mass)
            .field("infinite_variation", &self.infinite_variation)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum MeasureKind {
    /// a_γ r^{−1−γ} dr, whose mechanism is λ^γ.
    Stable { gamma: f64, a: f64 },
    /// Σ p_i δ_{r_i}, sorted by location.
    Atoms(Vec<(f64, f64)>),
    Tabulated(Tabulated),
}

/// A Lévy measure on (0, ∞), optionally restricted to (0, cap].
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    kind: MeasureKind,
    cap: f64,
}

// Integrands h(r) against π(dr).
#[derive(Debug, Clone, Copy)]
pub(crate) enum Weight {
    Mass,
    Moment1,
    Moment2,
    /// e^{−λr}
    Laplace(f64),
    /// 1 − e^{−λr}
    #[cfg_attr(not(test), allow(dead_code))]
    OneMinusExp(f64),
    /// e^{−λr} − 1 + λr
    Compensated(f64),
    /// r(1 − e^{−λr})
    CompensatedPrime(f64),
}

impl Weight {
    fn eval(self, r: f64) -> f64 {
        match self {
            Weight::Mass => 1.0,
            Weight::Moment1 => r,
            Weight::Moment2 => r * r,
            Weight::Laplace(l) => (-l * r).exp(),
            Weight::OneMinusExp(l) => -(-l * r).exp_m1(),
            Weight::Compensated(l) => compensated_exp(l * r),
            Weight::CompensatedPrime(l) => -r * (-l * r).exp_m1(),
        }
    }
}

/// e^{−x} − 1 + x without cancellation for small x.
pub(crate) fn compensated_exp(x: f64) -> f64 {
    if x < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-17 * sum {
            k += 1.0;
            term *= -x / k;
            sum += term;
        }
        sum
    } else {
        (-x).exp() - 1.0 + x
    }
}

// An interval with optionally included endpoints.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Span {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Span {
    pub fn tail(delta: f64, side: Side) -> Span {
        Span { lo: delta, lo_closed: side == Side::Closed, hi: f64::INFINITY, hi_closed: false }
    }

    /// Complement of `tail(delta, side)` in (0, ∞).
    pub fn head(delta: f64, side: Side) -> Span {
        Span { lo: 0.0, lo_closed: false, hi: delta, hi_closed: side == Side::Open }
    }

    pub fn all() -> Span {
        Span { lo: 0.0, lo_closed: false, hi: f64::INFINITY, hi_closed: false }
    }

    fn contains(&self, r: f64) -> bool {
        (r > self.lo || self.lo_closed && r == self.lo) && (r < self.hi || self.hi_closed && r == self.hi)
    }
}

impl LevyMeasure {
    /// The stable measure a_γ r^{−1−γ} dr, γ ∈ (1, 2).
    pub fn stable(gamma: f64) -> Result<Self> {
        let a = a_gamma(gamma).map_err(|_| Error::InvalidMechanism(format!("stable index must lie in (1, 2), got {gamma}")))?;
        Ok(LevyMeasure { kind: MeasureKind::Stable { gamma, a }, cap: f64::INFINITY })
    }

    /// A finite mixture of atoms (location, mass), both strictly positive.
    pub fn atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(r, p) in &atoms {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidMechanism(format!("atom location must be positive and finite, got {r}")));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidMechanism(format!("atom mass must be positive and finite, got {p}")));
            }
        }
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        // merge repeated locations
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (r, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += p,
                _ => merged.push((r, p)),
            }
        }
        Ok(LevyMeasure { kind: MeasureKind::Atoms(merged), cap: f64::INFINITY })
    }

    /// A measure with density on [lower, upper]. `lower` may be 0, in which
    /// case integrability of r ∧ r² at the origin is probed numerically.
    pub fn tabulated(density: Density, lower: f64, upper: f64, budget: QuadBudget) -> Result<Self> {
        if !(lower >= 0.0 && upper > lower && upper.is_finite()) {
            return Err(Error::InvalidMechanism(format!("tabulated support must satisfy 0 <= lower < upper < inf, got [{lower}, {upper}]")));
        }
        let mut t = Tabulated { density, lower, upper, budget, finite_mass: true, infinite_variation: false };
        if lower == 0.0 {
            let d = t.density.clone();
            let top = upper.min(1.0);
            if diverges(|r| r * r * d(r), top, &budget)? {
                return Err(Error::InvalidMechanism("tabulated density is not integrable against r^2 at the origin".into()));
            }
            t.infinite_variation = diverges(|r| r * d(r), top, &budget)?;
            t.finite_mass = !diverges(|r| d(r), top, &budget)?;
        }
        Ok(LevyMeasure { kind: MeasureKind::Tabulated(t), cap: f64::INFINITY })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// Upper end of the support restriction, ∞ when unrestricted.
    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// The same measure restricted to (0, delta].
    pub fn restricted(&self, delta: f64) -> LevyMeasure {
        LevyMeasure { kind: self.kind.clone(), cap: self.cap.min(delta) }
    }

    pub fn is_diffuse(&self) -> bool {
        !matches!(self.kind, MeasureKind::Atoms(_))
    }

    /// ∫_{(0,1)} r π(dr) = ∞.
    pub fn has_infinite_variation(&self) -> bool {
        match &self.kind {
            MeasureKind::Stable { .. } => true,
            MeasureKind::Atoms(_) => false,
            MeasureKind::Tabulated(t) => t.infinite_variation,
        }
    }

    /// π((δ, ∞)).
    pub fn tail(&self, delta: f64) -> Result<f64> {
        self.tail_side(delta, Side::Open)
    }

    /// π((δ, ∞)) or π([δ, ∞)).
    pub fn tail_side(&self, delta: f64, side: Side) -> Result<f64> {
        check_delta(delta)?;
        self.integral(Span::tail(delta, side), Weight::Mass)
    }

    /// π({δ}).
    pub fn atom_mass(&self, delta: f64) -> f64 {
        match &self.kind {
            MeasureKind::Atoms(atoms) if delta <= self.cap => atoms.iter().filter(|a| a.0 == delta).map(|a| a.1).sum(),
            _ => 0.0,
        }
    }

    /// ∫_{(δ,∞)} r π(dr) or ∫_{[δ,∞)} r π(dr).
    pub fn partial_first_moment(&self, delta: f64, side: Side) -> Result<f64> {
        check_delta(delta)?;
        self.integral(Span::tail(delta, side), Weight::Moment1)
    }

    /// ⟨π, 1⟩.
    pub fn total_mass(&self) -> Result<f64> {
        self.integral(Span::all(), Weight::Mass)
    }

    /// ∫_{(δ,∞)} e^{−λr} π(dr).
    pub fn tail_laplace(&self, delta: f64, lambda: f64) -> Result<f64> {
        self.integral(Span::tail(delta, Side::Open), Weight::Laplace(lambda))
    }

    /// ∫_{(0,ε]} r² π(dr).
    pub fn head_second_moment(&self, eps: f64) -> Result<f64> {
        self.integral(Span::head(eps, Side::Open), Weight::Moment2)
    }

    pub(crate) fn integral(&self, span: Span, w: Weight) -> Result<f64> {
        let mut span = span;
        if self.cap < span.hi || self.cap == span.hi && !span.hi_closed {
            span.hi = self.cap;
            span.hi_closed = true;
        }
        if span.lo > span.hi || span.lo == span.hi && !(span.lo_closed && span.hi_closed) {
            return Ok(0.0);
        }
        match &self.kind {
            MeasureKind::Atoms(atoms) => Ok(atoms.iter().filter(|a| span.contains(a.0)).map(|&(r, p)| p * w.eval(r)).sum()),
            MeasureKind::Stable { gamma, a } => Ok(stable_integral(*gamma, *a, span.lo, span.hi, w)),
            MeasureKind::Tabulated(t) => t.integral(span.lo, span.hi, w),
        }
    }

    /// Draw from π restricted to (δ, ∞), normalized.
    pub fn sample_restricted<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> Result<f64> {
        Ok(JumpSampler::new(self, delta)?.sample(rng))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")))
    }
}

// Ratio test on three consecutive blocks of ten decades below `top`.
fn diverges<F: Fn(f64) -> f64>(f: F, top: f64, budget: &QuadBudget) -> Result<bool> {
    let probe = QuadBudget { rel_tol: budget.rel_tol.max(1e-8), ..*budget };
    let block = |k: i32| integrate_log(&f, top * 1e-10f64.powi(k + 1), top * 1e-10f64.powi(k), &probe).map(|q| q.value);
    let (b1, b2) = (block(1)?, block(2)?);
    Ok(b2 > 0.0 && b2 >= 0.9 * b1)
}

impl Tabulated {
    fn integral(&self, lo: f64, hi: f64, w: Weight) -> Result<f64> {
        let a = lo.max(self.lower);
        let b = hi.min(self.upper);
        if a >= b {
            return Ok(0.0);
        }
        if a == 0.0 {
            let divergent = match w {
                Weight::Mass | Weight::Laplace(_) => !self.finite_mass,
                Weight::Moment1 => self.infinite_variation,
                Weight::OneMinusExp(l) => l > 0.0 && self.infinite_variation,
                _ => false,
            };
            if divergent {
                return Ok(f64::INFINITY);
            }
        }
        let d = &self.density;
        integrate_log(|r| w.eval(r) * d(r), a.max(LOG_FLOOR), b, &self.budget).map(|q| q.value)
    }
}

fn stable_integral(g: f64, a: f64, lo: f64, hi: f64, w: Weight) -> f64 {
    let pw = |x: f64, e: f64| if x.is_infinite() { if e < 0.0 { 0.0 } else { f64::INFINITY } } else { x.powf(e) };
    let ug = |s: f64, x: f64| {
        if x == 0.0 {
            f64::INFINITY
        } else {
            upper_gamma(s, x).unwrap_or(0.0)
        }
    };
    match w {
        Weight::Mass => a / g * (pw(lo, -g) - pw(hi, -g)),
        Weight::Moment1 => a / (g - 1.0) * (pw(lo, 1.0 - g) - pw(hi, 1.0 - g)),
        Weight::Moment2 => a / (2.0 - g) * (pw(hi, 2.0 - g) - pw(lo, 2.0 - g)),
        Weight::Laplace(l) if l == 0.0 => stable_integral(g, a, lo, hi, Weight::Mass),
        Weight::Laplace(l) => {
            if lo == 0.0 {
                return f64::INFINITY;
            }
            a * l.powf(g) * (ug(-g, l * lo) - ug(-g, l * hi))
        }
        Weight::OneMinusExp(l) if l == 0.0 => 0.0,
        Weight::OneMinusExp(l) => {
            if lo == 0.0 {
                return f64::INFINITY;
            }
            let m = |z: f64| if z.is_infinite() { 0.0 } else { stable_tail(g, z) };
            a * l.powf(g) * (m(l * lo) - m(l * hi))
        }
        Weight::Compensated(l) if l == 0.0 => 0.0,
        Weight::Compensated(l) => a * l.powf(g) * (stable_head(g, a, l * hi) - stable_head(g, a, l * lo)),
        Weight::CompensatedPrime(l) if l == 0.0 => 0.0,
        Weight::CompensatedPrime(l) => a * l.powf(g - 1.0) * (stable_head_prime(g, a, l * hi) - stable_head_prime(g, a, l * lo)),
    }
}

/// Repeated sampling from π restricted to (lo, cap], normalized.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    rate: f64,
    inner: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Empty,
    // r = (lo^{−γ} − U·width)^{−1/γ}
    Pareto { lo_pow: f64, width: f64, inv_neg_gamma: f64, lo: f64, untruncated: bool },
    Discrete { locs: Vec<f64>, cum: Vec<f64> },
    // piecewise power-law cells fitted to the density
    Cells { edges: Vec<f64>, cum: Vec<f64>, expo: Vec<f64> },
}

const SAMPLER_CELLS: usize = 600;

impl JumpSampler {
    pub fn new(pi: &LevyMeasure, lo: f64) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::InvalidArgument(format!("jump sampling needs a positive lower cut, got {lo}")));
        }
        let rate = pi.tail(lo)?;
        if !rate.is_finite() {
            return Err(Error::InfiniteMass);
        }
        if rate == 0.0 {
            return Ok(JumpSampler { rate, inner: SamplerKind::Empty });
        }
        let inner = match pi.kind() {
            MeasureKind::Stable { gamma, .. } => {
                let lo_pow = lo.powf(-gamma);
                let width = lo_pow - if pi.cap.is_finite() { pi.cap.powf(-gamma) } else { 0.0 };
                SamplerKind::Pareto { lo_pow, width, inv_neg_gamma: -1.0 / gamma, lo, untruncated: pi.cap.is_infinite() }
            }
            MeasureKind::Atoms(atoms) => {
                let mut locs = Vec::new();
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for &(r, p) in atoms.iter().filter(|x| x.0 > lo && x.0 <= pi.cap) {
                    acc += p;
                    locs.push(r);
                    cum.push(acc);
                }
                SamplerKind::Discrete { locs, cum }
            }
            MeasureKind::Tabulated(t) => {
                let a = lo.max(t.lower);
                let b = pi.cap.min(t.upper);
                let mut edges = Vec::with_capacity(SAMPLER_CELLS + 1);
                for i in 0..=SAMPLER_CELLS {
                    edges.push(a * (b / a).powf(i as f64 / SAMPLER_CELLS as f64));
                }
                edges[SAMPLER_CELLS] = b;
                let mut cum = Vec::with_capacity(SAMPLER_CELLS);
                let mut expo = Vec::with_capacity(SAMPLER_CELLS);
                let mut acc = 0.0;
                for w in edges.windows(2) {
                    acc += t.integral(w[0], w[1], Weight::Mass)?;
                    cum.push(acc);
                    let (da, db) = ((t.density)(w[0]), (t.density)(w[1]));
                    expo.push(if da > 0.0 && db > 0.0 { (db / da).ln() / (w[1] / w[0]).ln() } else { 0.0 });
                }
                SamplerKind::Cells { edges, cum, expo }
            }
        };
        Ok(JumpSampler { rate, inner })
    }

    /// π((lo, cap]), the jump rate of the sampled part.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.inner {
            SamplerKind::Empty => f64::NAN,
            SamplerKind::Pareto { lo_pow, width, inv_neg_gamma, lo, untruncated } => {
                let u: f64 = rng.random();
                if *untruncated {
                    // 1 − u ∈ (0, 1]
                    lo * (1.0 - u).powf(*inv_neg_gamma)
                } else {
                    (lo_pow - u * width).powf(*inv_neg_gamma)
                }
            }
            SamplerKind::Discrete { locs, cum } => {
                let u = rng.random::<f64>() * cum[cum.len() - 1];
                let i = cum.partition_point(|&c| c <= u).min(locs.len() - 1);
                locs[i]
            }
            SamplerKind::Cells { edges, cum, expo } => {
                let u = rng.random::<f64>() * cum[cum.len() - 1];
                let i = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                let (a, b, s) = (edges[i], edges[i + 1], expo[i]);
                let v: f64 = rng.random();
                if (s + 1.0).abs() < 1e-9 {
                    a * (b / a).powf(v)
                } else {
                    let e = s + 1.0;
                    let (pa, pb) = (a.powf(e), b.powf(e));
                    (pa + v * (pb - pa)).powf(1.0 / e).clamp(a, b)
                }
            }
        }
    }
}

/// Log-log interpolation through `points` (r, density), zero outside the
/// knots except, when `extend_to_zero` holds, a power law continued below
/// the first knot.
pub fn loglog_density(points: &[(f64, f64)], extend_to_zero: bool) -> Result<Density> {
    if points.len() < 2 {
        return Err(Error::InvalidMechanism("tabulated density needs at least two points".into()));
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::InvalidMechanism("tabulated points must have strictly increasing locations".into()));
        }
    }
    if points.iter().any(|&(r, d)| !(r > 0.0 && r.is_finite() && d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidMechanism("tabulated points need positive finite locations and densities".into()));
    }
    let lr: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ld: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let first_slope = (ld[1] - ld[0]) / (lr[1] - lr[0]);
    Ok(Arc::new(move |r: f64| {
        let x = r.ln();
        let n = lr.len();
        if x < lr[0] {
            return if extend_to_zero { (ld[0] + first_slope * (x - lr[0])).exp() } else { 0.0 };
        }
        if x > lr[n - 1] {
            return 0.0;
        }
        let i = lr.partition_point(|&v| v <= x).clamp(1, n - 1);
        let t = (x - lr[i - 1]) / (lr[i] - lr[i - 1]);
        (ld[i - 1] + t * (ld[i] - ld[i - 1])).exp()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn stable_tabulated(g: f64, upper: f64) -> LevyMeasure {
        let a = a_gamma(g).unwrap();
        LevyMeasure::tabulated(Arc::new(move |r: f64| a * r.powf(-1.0 - g)), 0.0, upper, QuadBudget::default()).unwrap()
    }

    #[test]
    fn stable_tail_closed_form() {
        let pi = LevyMeasure::stable(1.5).unwrap();
        let a = a_gamma(1.5).unwrap();
        assert!(rel(pi.tail(1.0).unwrap(), a / 1.5) < 1e-15);
        assert_eq!(pi.tail(0.0).unwrap(), f64::INFINITY);
        assert_eq!(pi.tail_side(2.0, Side::Closed).unwrap(), pi.tail(2.0).unwrap());
        assert_eq!(pi.atom_mass(2.0), 0.0);
    }

    #[test]
    fn atoms_tail_and_moments() {
        let pi = LevyMeasure::atoms(vec![(5.0, 0.1), (2.0, 0.5)]).unwrap();
        assert_eq!(pi.tail(3.0).unwrap(), 0.1);
        assert_eq!(pi.tail(2.0).unwrap(), 0.1);
        assert_eq!(pi.tail_side(2.0, Side::Closed).unwrap(), 0.6);
        assert_eq!(pi.atom_mass(2.0), 0.5);
        assert!((pi.partial_first_moment(3.0, Side::Open).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pi.partial_first_moment(6.0, Side::Open).unwrap(), 0.0);
        let single = LevyMeasure::atoms(vec![(2.0, 0.5)]).unwrap();
        assert_eq!(single.tail(3.0).unwrap(), 0.0);
    }

    #[test]
    fn atoms_reject_bad_input() {
        assert!(LevyMeasure::atoms(vec![(0.0, 1.0)]).is_err());
        assert!(LevyMeasure::atoms(vec![(1.0, -1.0)]).is_err());
    }

    #[test]
    fn tabulated_matches_stable_tail() {
        let tab = stable_tabulated(1.5, 100.0);
        let a = a_gamma(1.5).unwrap();
        let want = a / 1.5 * (1.0 - 100f64.powf(-1.5));
        assert!(rel(tab.tail(1.0).unwrap(), want) < 1e-8);
        assert!(tab.has_infinite_variation());
        assert_eq!(tab.total_mass().unwrap(), f64::INFINITY);
    }

    #[test]
    fn tabulated_divergence_probe() {
        // r^{-1.5}: finite variation, infinite mass
        let d: Density = Arc::new(|r: f64| r.powf(-1.5));
        let t = LevyMeasure::tabulated(d, 0.0, 10.0, QuadBudget::default()).unwrap();
        assert!(!t.has_infinite_variation());
        // r^{-3.2}: r^2 not integrable
        let d: Density = Arc::new(|r: f64| r.powf(-3.2));
        assert!(LevyMeasure::tabulated(d, 0.0, 10.0, QuadBudget::default()).is_err());
    }

    #[test]
    fn partial_first_moment_stable() {
        let pi = LevyMeasure::stable(1.3).unwrap();
        let a = a_gamma(1.3).unwrap();
        for &d in &[0.1, 1.0, 7.0] {
            let want = a * f64::powf(d, -0.3) / 0.3;
            assert!(rel(pi.partial_first_moment(d, Side::Open).unwrap(), want) < 1e-14);
            let tab = stable_tabulated(1.3, 1e7);
            let t = tab.partial_first_moment(d, Side::Open).unwrap();
            let cut = a * 1e7f64.powf(-0.3) / 0.3;
            assert!(rel(t + cut, want) < 1e-8);
        }
    }

    #[test]
    fn restriction_caps_support() {
        let pi = LevyMeasure::stable(1.5).unwrap().restricted(2.0);
        assert_eq!(pi.tail(2.0).unwrap(), 0.0);
        assert_eq!(pi.tail(3.0).unwrap(), 0.0);
        let full = LevyMeasure::stable(1.5).unwrap();
        let want = full.tail(1.0).unwrap() - full.tail(2.0).unwrap();
        assert!(rel(pi.tail(1.0).unwrap(), want) < 1e-14);
    }

    #[test]
    fn compensated_exp_is_accurate() {
        for &x in &[1e-12f64, 1e-6, 1e-3, 0.1, 0.49, 0.51, 3.0] {
            let series: f64 = (2..40).map(|k| (-x).powi(k) / (1..=k).map(|j| j as f64).product::<f64>()).sum();
            assert!(rel(compensated_exp(x), series) < 1e-14, "x={x}");
        }
    }

    #[test]
    fn stable_sampler_respects_support() {
        let pi = LevyMeasure::stable(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert!(pi.sample_restricted(0.7, &mut rng).unwrap() > 0.7);
        }
        let capped = pi.restricted(2.0);
        let s = JumpSampler::new(&capped, 0.5).unwrap();
        for _ in 0..10_000 {
            let r = s.sample(&mut rng);
            assert!(r > 0.5 && r <= 2.0);
        }
    }

    #[test]
    fn pareto_mean() {
        let pi = LevyMeasure::stable(1.5).unwrap();
        let s = JumpSampler::new(&pi, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // mean 3 but infinite variance; check the median 2^{2/3} instead of
        // relying on a CLT for the mean
        let mut v: Vec<f64> = (0..200_001).map(|_| s.sample(&mut rng)).collect();
        v.sort_by(f64::total_cmp);
        assert!(rel(v[100_000], 2f64.powf(2.0 / 3.0)) < 0.01);
    }

    #[test]
    fn atom_sampler() {
        let pi = LevyMeasure::atoms(vec![(2.0, 0.5), (5.0, 0.1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(pi.sample_restricted(3.0, &mut rng).unwrap(), 5.0);
        }
        assert!(matches!(JumpSampler::new(&pi, 6.0).map(|s| s.rate()), Ok(r) if r == 0.0));
    }

    #[test]
    fn tabulated_sampler_matches_tail() {
        let tab = stable_tabulated(1.5, 100.0);
        let s = JumpSampler::new(&tab, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let above = (0..n).filter(|_| s.sample(&mut rng) > 4.0).count() as f64 / n as f64;
        let want = tab.tail(4.0).unwrap() / tab.tail(1.0).unwrap();
        assert!((above - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt());
    }

    #[test]
    fn loglog_interpolation() {
        let d = loglog_density(&[(1.0, 1.0), (10.0, 0.01)], true).unwrap();
        assert!(rel(d(3.0), 3f64.powf(-2.0)) < 1e-14);
        assert!(rel(d(0.1), 100.0) < 1e-12);
        assert_eq!(d(11.0), 0.0);
        let d = loglog_density(&[(1.0, 1.0), (10.0, 0.01)], false).unwrap();
        assert_eq!(d(0.5), 0.0);
        assert!(loglog_density(&[(1.0, 1.0)], false).is_err());
    }
}
