use super::estimate::{MCEstimate, Summary};
use crate::degree_laws::{
    degree_tail, forest_degree_cdf, joint_sigma_degree_laplace, prob_w_eq_1, prob_z0_eq_1, xi_laplace, xi_mean, z0_laplace,
    Strictness,
};
use crate::error::{Error, Result};
use crate::mechanism::{BranchingMechanism, MeasureKind, Side};
use crate::samplers::{extract_big_node_forest, replica_rng, GwSampler, PathSimConfig, PathSimulator};
use crate::special::StableConstants;
use rayon::prelude::*;
use serde::Serialize;

/// Support cap of the (Z₀, W) histogram: cells 0..=10 are exact, 11 holds the rest.
pub const HIST_CAP: usize = 11;
const CHUNKS_PER_WAVE: u64 = 16;

/// Sample size and acceptance rule of one Monte Carlo check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub n: u64,
    pub sim: PathSimConfig,
    /// Paths per replica stream.
    pub chunk: u64,
    pub k: f64,
    pub bias_budget: f64,
}

impl McConfig {
    pub fn new(n: u64, sim: PathSimConfig) -> Self {
        McConfig { n, sim, chunk: 1000, k: 3.0, bias_budget: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub analytic_value: Option<f64>,
    pub estimate: Option<MCEstimate>,
    pub z_score: Option<f64>,
    /// Test statistic for checks that are not a mean comparison.
    pub statistic: Option<f64>,
    pub status: CheckStatus,
    pub pass: bool,
    pub tolerance_spec: String,
    pub notes: Vec<String>,
}

impl CheckResult {
    /// Pass iff |mean − analytic| ≤ k·stderr + bias_budget.
    pub fn compare(name: &str, analytic: f64, estimate: Option<MCEstimate>, k: f64) -> CheckResult {
        let Some(e) = estimate else {
            return CheckResult::skipped(name, "no samples for the estimator");
        };
        let diff = e.mean - analytic;
        let z = if e.stderr > 0.0 {
            diff / e.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let pass = diff.abs() <= k * e.stderr + e.bias_budget;
        CheckResult {
            name: name.to_string(),
            analytic_value: Some(analytic),
            estimate: Some(e),
            z_score: Some(z),
            statistic: None,
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            pass,
            tolerance_spec: format!("|mean - analytic| <= {k}*stderr + {}", e.bias_budget),
            notes: Vec::new(),
        }
    }

    /// Pass iff statistic ≤ tol.
    pub fn bound(name: &str, statistic: f64, tol: f64, tolerance_spec: String) -> CheckResult {
        let pass = statistic <= tol;
        CheckResult {
            name: name.to_string(),
            analytic_value: None,
            estimate: None,
            z_score: None,
            statistic: Some(statistic),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            pass,
            tolerance_spec,
            notes: Vec::new(),
        }
    }

    pub fn skipped(name: &str, why: &str) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            analytic_value: None,
            estimate: None,
            z_score: None,
            statistic: None,
            status: CheckStatus::Skipped,
            pass: false,
            tolerance_spec: String::new(),
            notes: vec![why.to_string()],
        }
    }

    fn note(mut self, s: String) -> Self {
        self.notes.push(s);
        self
    }
}

/// Counts of (min(Z₀, 11), min(W, 11)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hist(pub [[u64; HIST_CAP + 1]; HIST_CAP + 1]);

impl Default for Hist {
    fn default() -> Self {
        Hist([[0; HIST_CAP + 1]; HIST_CAP + 1])
    }
}

impl Hist {
    pub fn add(&mut self, z0: u64, w: u64) {
        self.0[(z0 as usize).min(HIST_CAP)][(w as usize).min(HIST_CAP)] += 1;
    }

    pub fn merge(&mut self, other: &Hist) {
        for (a, b) in self.0.iter_mut().flatten().zip(other.0.iter().flatten()) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn total_variation(&self, other: &Hist) -> f64 {
        let (n, m) = (self.total() as f64, other.total() as f64);
        let s: f64 = self.0.iter().flatten().zip(other.0.iter().flatten()).map(|(&a, &b)| (a as f64 / n - b as f64 / m).abs()).sum();
        0.5 * s
    }
}

/// Per-path statistics of a batch of forests F_r, mergeable across replicas.
#[derive(Debug, Clone, Default)]
pub struct PathTally {
    pub paths: u64,
    pub truncated: u64,
    /// Truncated paths with no jump above δ yet: Δ ≤ δ cannot be decided.
    pub undetermined: u64,
    pub degree_cdf: Summary,
    pub sigma_laplace: Summary,
    pub joint_laplace: Summary,
    pub z0_pgf: Summary,
    pub z0_eq_1: Summary,
    pub w_eq_1: Summary,
    /// Offspring counts of roots whose subtree was fully observed.
    pub root_offspring: Summary,
    pub open_roots: u64,
    pub nonempty: u64,
    pub hist: Hist,
}

impl PathTally {
    pub fn merge(&mut self, o: &PathTally) {
        self.paths += o.paths;
        self.truncated += o.truncated;
        self.undetermined += o.undetermined;
        self.degree_cdf.merge(&o.degree_cdf);
        self.sigma_laplace.merge(&o.sigma_laplace);
        self.joint_laplace.merge(&o.joint_laplace);
        self.z0_pgf.merge(&o.z0_pgf);
        self.z0_eq_1.merge(&o.z0_eq_1);
        self.w_eq_1.merge(&o.w_eq_1);
        self.root_offspring.merge(&o.root_offspring);
        self.open_roots += o.open_roots;
        self.nonempty += o.nonempty;
        self.hist.merge(&o.hist);
    }
}

/// Runs `n` items in chunks of `chunk`, one replica stream per chunk, in waves
/// of fixed size; stops after the first wave where `stop` holds. Waves do not
/// depend on the thread count, so the result is reproducible.
fn run_waves<T, F, S>(n: u64, chunk: u64, f: F, stop: S) -> Result<T>
where
    T: Default + Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
    S: Fn(&T) -> bool,
    T: Mergeable,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let mut total = T::default();
    let mut next = 0;
    while next < chunks {
        let end = (next + CHUNKS_PER_WAVE).min(chunks);
        let parts: Vec<Result<T>> =
            (next..end).into_par_iter().map(|c| f(c, chunk.min(n - c * chunk))).collect();
        for p in parts {
            total.merge_from(&p?);
        }
        next = end;
        if stop(&total) {
            break;
        }
    }
    Ok(total)
}

trait Mergeable {
    fn merge_from(&mut self, other: &Self);
}

impl Mergeable for PathTally {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
}

impl Mergeable for Hist {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
}

/// Simulate up to `mc.n` forests F_r and tally every statistic the checks use;
/// stops early once `stop` holds at a wave boundary.
pub fn run_path_tally<S: Fn(&PathTally) -> bool>(
    m: &BranchingMechanism,
    r: f64,
    delta: f64,
    lambda: f64,
    mc: &McConfig,
    stop: S,
) -> Result<PathTally> {
    let sim = PathSimulator::new(m, &mc.sim)?;
    let with_forest = r <= delta;
    run_waves(
        mc.n,
        mc.chunk,
        |c, count| {
            let mut rng = replica_rng(mc.sim.seed, mc.sim.replica_index + c);
            let mut t = PathTally::default();
            for _ in 0..count {
                let p = sim.run(r, delta, &mut rng)?;
                t.paths += 1;
                let small = p.forest_degree() <= delta;
                if p.truncated {
                    t.truncated += 1;
                    if small {
                        t.undetermined += 1;
                    } else {
                        t.degree_cdf.add(0.0);
                    }
                    // e^{−λσ} ≤ e^{−λT} is counted as 0; the gap enters the bias budget
                    t.sigma_laplace.add(0.0);
                    t.joint_laplace.add(0.0);
                } else {
                    t.degree_cdf.add(if small { 1.0 } else { 0.0 });
                    let e = (-lambda * p.sigma_hat).exp();
                    t.sigma_laplace.add(e);
                    t.joint_laplace.add(if small { e } else { 0.0 });
                }
                if with_forest {
                    let f = extract_big_node_forest(&p, delta)?;
                    t.z0_pgf.add((-lambda * f.z0 as f64).exp());
                    t.z0_eq_1.add(if f.z0 == 1 { 1.0 } else { 0.0 });
                    t.w_eq_1.add(if f.w_total == 1 { 1.0 } else { 0.0 });
                    t.hist.add(f.z0, f.w_total);
                    if !f.is_empty() {
                        t.nonempty += 1;
                    }
                    for i in f.roots() {
                        if f.open[i] {
                            t.open_roots += 1;
                        } else {
                            t.root_offspring.add(f.offspring_counts[i] as f64);
                        }
                    }
                }
            }
            Ok(t)
        },
        stop,
    )
}

/// Histogram of (Z₀, W) over `mc.n` forests from the Galton–Watson sampler.
pub fn run_gw_hist(m: &BranchingMechanism, r: f64, delta: f64, mc: &McConfig) -> Result<Hist> {
    let gw = GwSampler::new(m, delta, &mc.sim)?;
    run_waves(
        mc.n,
        mc.chunk,
        |c, count| {
            let mut rng = replica_rng(mc.sim.seed, mc.sim.replica_index + c);
            let mut h = Hist::default();
            for _ in 0..count {
                let f = gw.sample(r, HIST_CAP, &mut rng)?;
                h.add(f.z0, f.w_total);
            }
            Ok(h)
        },
        |_| false,
    )
}

fn truncation_note(t: &PathTally) -> String {
    format!("{} of {} paths truncated", t.truncated, t.paths)
}

/// Bias budget plus the largest possible error from scoring truncated paths
/// as e^{−λσ} = 0.
fn laplace_budget(t: &PathTally, lambda: f64, mc: &McConfig) -> f64 {
    let frac = if t.paths > 0 { t.truncated as f64 / t.paths as f64 } else { 0.0 };
    mc.bias_budget + frac * (-lambda * mc.sim.max_time).exp()
}

pub fn forest_degree_cdf_result(m: &BranchingMechanism, r: f64, delta: f64, t: &PathTally, mc: &McConfig) -> Result<CheckResult> {
    let analytic = forest_degree_cdf(m, r, delta)?;
    Ok(CheckResult::compare("forest_degree_cdf", analytic, t.degree_cdf.estimate(mc.bias_budget), mc.k)
        .note(truncation_note(t))
        .note(format!("{} truncated paths without a jump above delta excluded", t.undetermined)))
}

pub fn sigma_laplace_result(m: &BranchingMechanism, r: f64, lambda: f64, t: &PathTally, mc: &McConfig) -> Result<CheckResult> {
    let analytic = (-r * m.base().invert(lambda)?).exp();
    let est = t.sigma_laplace.estimate(laplace_budget(t, lambda, mc));
    Ok(CheckResult::compare("sigma_laplace", analytic, est, mc.k).note(truncation_note(t)))
}

pub fn joint_laplace_result(
    m: &BranchingMechanism,
    r: f64,
    delta: f64,
    lambda: f64,
    t: &PathTally,
    mc: &McConfig,
) -> Result<CheckResult> {
    let analytic = if r > delta {
        0.0
    } else {
        (-r * joint_sigma_degree_laplace(m, delta, lambda, Strictness::NonStrict)?).exp()
    };
    let est = t.joint_laplace.estimate(laplace_budget(t, lambda, mc));
    Ok(CheckResult::compare("joint_laplace", analytic, est, mc.k).note(truncation_note(t)))
}

fn need_forest(r: f64, delta: f64) -> Result<()> {
    if r > delta {
        Err(Error::RootAboveDelta { r, delta })
    } else {
        Ok(())
    }
}

pub fn z0_law_result(m: &BranchingMechanism, r: f64, delta: f64, lambda: f64, t: &PathTally, mc: &McConfig) -> Result<CheckResult> {
    need_forest(r, delta)?;
    let analytic = if m.pi().tail(delta)? == 0.0 { 1.0 } else { (-r * z0_laplace(m, delta, lambda)?).exp() };
    Ok(CheckResult::compare("z0_law", analytic, t.z0_pgf.estimate(mc.bias_budget), mc.k)
        .note(truncation_note(t))
        .note("truncated paths contribute the roots observed so far".into()))
}

pub fn offspring_mean_result(m: &BranchingMechanism, delta: f64, t: &PathTally, mc: &McConfig) -> Result<CheckResult> {
    if t.root_offspring.n == 0 {
        return Ok(CheckResult::skipped("offspring_mean", "no closed root in any extracted forest"));
    }
    let analytic = xi_mean(m, delta)?;
    Ok(CheckResult::compare("offspring_mean", analytic, t.root_offspring.estimate(mc.bias_budget), mc.k)
        .note(format!("{} non-empty forests, {} roots pooled, {} open roots excluded", t.nonempty, t.root_offspring.n, t.open_roots)))
}

/// P_{F_r}(Z₀ = 1) and P_{F_r}(W = 1) against r·N[·=1]·e^{−r N[Δ>δ]}.
pub fn single_node_results(m: &BranchingMechanism, r: f64, delta: f64, t: &PathTally, mc: &McConfig) -> Result<Vec<CheckResult>> {
    need_forest(r, delta)?;
    let keep = (-r * degree_tail(m, delta, Side::Open)?).exp();
    Ok(vec![
        CheckResult::compare("p_z0_eq_1", r * prob_z0_eq_1(m, delta)? * keep, t.z0_eq_1.estimate(mc.bias_budget), mc.k),
        CheckResult::compare("p_w_eq_1", r * prob_w_eq_1(m, delta)? * keep, t.w_eq_1.estimate(mc.bias_budget), mc.k),
    ])
}

pub fn check_forest_degree_cdf(m: &BranchingMechanism, r: f64, delta: f64, mc: &McConfig) -> Result<CheckResult> {
    let t = run_path_tally(m, r, delta, 1.0, mc, |_| false)?;
    forest_degree_cdf_result(m, r, delta, &t, mc)
}

pub fn check_sigma_laplace(m: &BranchingMechanism, r: f64, lambda: f64, mc: &McConfig) -> Result<CheckResult> {
    let t = run_path_tally(m, r, f64::INFINITY, lambda, mc, |_| false)?;
    sigma_laplace_result(m, r, lambda, &t, mc)
}

pub fn check_joint_laplace(m: &BranchingMechanism, r: f64, delta: f64, lambda: f64, mc: &McConfig) -> Result<CheckResult> {
    let t = run_path_tally(m, r, delta, lambda, mc, |_| false)?;
    joint_laplace_result(m, r, delta, lambda, &t, mc)
}

pub fn check_z0_law(m: &BranchingMechanism, r: f64, delta: f64, lambda: f64, mc: &McConfig) -> Result<CheckResult> {
    need_forest(r, delta)?;
    let t = run_path_tally(m, r, delta, lambda, mc, |_| false)?;
    z0_law_result(m, r, delta, lambda, &t, mc)
}

/// Pools root offspring counts; simulation stops once `min_nonempty`
/// non-empty forests are in (or after `mc.n` paths).
pub fn check_offspring_mean(m: &BranchingMechanism, r: f64, delta: f64, min_nonempty: u64, mc: &McConfig) -> Result<CheckResult> {
    need_forest(r, delta)?;
    let t = run_path_tally(m, r, delta, 1.0, mc, |t| t.nonempty >= min_nonempty)?;
    let res = offspring_mean_result(m, delta, &t, mc)?;
    if res.status == CheckStatus::Pass && t.nonempty < min_nonempty {
        let mut res = res;
        res.status = CheckStatus::Fail;
        res.pass = false;
        return Ok(res.note(format!("only {} non-empty forests, {min_nonempty} required", t.nonempty)));
    }
    Ok(res)
}

pub fn cross_validate_gw(m: &BranchingMechanism, r: f64, delta: f64, tol: f64, mc: &McConfig) -> Result<CheckResult> {
    need_forest(r, delta)?;
    let path = run_path_tally(m, r, delta, 1.0, mc, |_| false)?;
    let gw_mc = McConfig { sim: PathSimConfig { replica_index: mc.sim.replica_index + (1 << 32), ..mc.sim }, ..*mc };
    let gw = run_gw_hist(m, r, delta, &gw_mc)?;
    let tv = path.hist.total_variation(&gw);
    Ok(CheckResult::bound(
        "gw_cross_validation",
        tv,
        tol,
        format!("TV over (min(Z0,{HIST_CAP}), min(W,{HIST_CAP})) <= {tol}"),
    )
    .note(format!("{} path forests, {} GW forests; {}", path.hist.total(), gw.total(), truncation_note(&path))))
}

/// Largest deviation of the offspring transform at each δ from the
/// δ-free stable form e^{−λ} + (γ/a_γ)c_γ(λ)^γ.
pub fn check_stable_invariance(gamma: f64, deltas: &[f64], lambdas: &[f64], tol: f64) -> Result<CheckResult> {
    if deltas.is_empty() || lambdas.is_empty() {
        return Err(Error::InvalidArgument("stable invariance needs non-empty delta and lambda grids".into()));
    }
    let m = BranchingMechanism::stable(gamma)?;
    let k = StableConstants::new(gamma)?;
    let mut worst = 0.0f64;
    let mut spread = 0.0f64;
    for &l in lambdas {
        let target = k.offspring_laplace(l)?;
        let vals: Vec<f64> = deltas.iter().map(|&d| xi_laplace(&m, d, l)).collect::<Result<_>>()?;
        for v in &vals {
            worst = worst.max((v - target).abs());
            spread = spread.max((v - vals[0]).abs());
        }
    }
    Ok(CheckResult::bound(
        "stable_invariance",
        worst,
        tol,
        format!("max |xi_laplace(delta, lambda) - (exp(-lambda) + (gamma/a)*c(lambda)^gamma)| <= {tol}"),
    )
    .note(format!("largest spread across delta: {spread:e}")))
}

pub(crate) fn stable_index(m: &BranchingMechanism) -> Option<f64> {
    match m.pi().kind() {
        MeasureKind::Stable { gamma, .. } if m.alpha() == 0.0 && m.beta() == 0.0 && m.pi().cap().is_infinite() => Some(*gamma),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::LevyMeasure;

    fn quick(n: u64) -> McConfig {
        McConfig { bias_budget: 0.01, ..McConfig::new(n, PathSimConfig { eps: 1e-2, dt: 1e-2, max_time: 50.0, ..PathSimConfig::default() }) }
    }

    #[test]
    fn self_consistency() {
        let m = BranchingMechanism::stable(1.5).unwrap();
        let mc = quick(500);
        let t = run_path_tally(&m, 1.0, 2.0, 1.0, &mc, |_| false).unwrap();
        let e = t.degree_cdf.estimate(0.0).unwrap();
        let r = CheckResult::compare("self", e.mean, Some(e), 3.0);
        assert!(r.pass && r.z_score == Some(0.0));
    }

    #[test]
    fn tally_is_reproducible_and_chunking_is_exact() {
        let m = BranchingMechanism::stable(1.5).unwrap();
        let a = run_path_tally(&m, 1.0, 2.0, 1.0, &quick(300), |_| false).unwrap();
        let b = run_path_tally(&m, 1.0, 2.0, 1.0, &quick(300), |_| false).unwrap();
        assert_eq!(a.degree_cdf, b.degree_cdf);
        assert_eq!(a.hist, b.hist);
        assert_eq!(a.paths, 300);
        let c = run_path_tally(&m, 1.0, 2.0, 1.0, &McConfig { chunk: 7, ..quick(300) }, |_| false).unwrap();
        assert_eq!(c.paths, 300);
        assert_eq!(c.hist.total(), 300);
    }

    #[test]
    fn early_stop_counts_waves() {
        let m = BranchingMechanism::stable(1.5).unwrap();
        let mc = McConfig { chunk: 10, ..quick(10_000) };
        let t = run_path_tally(&m, 1.0, 2.0, 1.0, &mc, |t| t.paths >= 1).unwrap();
        assert_eq!(t.paths, 10 * CHUNKS_PER_WAVE);
    }

    #[test]
    fn degenerate_cases() {
        let m = BranchingMechanism::new(0.0, 1.0, LevyMeasure::atoms(vec![(2.0, 0.5)]).unwrap()).unwrap();
        let mc = quick(200);
        let cv = cross_validate_gw(&m, 1.0, 3.0, 0.03, &mc).unwrap();
        assert!(cv.pass);
        assert_eq!(cv.statistic, Some(0.0));
        let off = check_offspring_mean(&m, 1.0, 3.0, 1, &mc).unwrap();
        assert_eq!(off.status, CheckStatus::Skipped);
        assert!(matches!(check_z0_law(&m, 4.0, 3.0, 1.0, &mc), Err(Error::RootAboveDelta { .. })));
    }

    #[test]
    fn huge_delta_cdf_is_one() {
        let m = BranchingMechanism::stable(1.5).unwrap();
        let r = check_forest_degree_cdf(&m, 1.0, 1e9, &quick(200)).unwrap();
        assert!(r.analytic_value.unwrap() > 1.0 - 1e-6);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn stable_invariance_holds_for_the_corrected_form() {
        let r = check_stable_invariance(1.5, &[1.0, 5.0, 20.0], &[0.0, 0.5, 1.0, 3.0], 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(check_stable_invariance(1.5, &[], &[1.0], 1e-6).is_err());
    }

    #[test]
    fn hist_tv() {
        let mut a = Hist::default();
        let mut b = Hist::default();
        a.add(0, 0);
        a.add(1, 20);
        b.add(0, 0);
        b.add(1, 11);
        assert_eq!(a.total_variation(&b), 0.0);
        b.add(2, 2);
        assert!((a.total_variation(&b) - (1.0 / 3.0)).abs() < 1e-15);
    }
}
