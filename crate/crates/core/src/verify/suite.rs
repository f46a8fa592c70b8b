use super::checks::*;
use crate::error::{Error, Result};
use crate::mechanism::MechanismSpec;
use crate::samplers::PathSimConfig;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const CHECK_NAMES: [&str; 8] = [
    "forest_degree_cdf",
    "sigma_laplace",
    "joint_laplace",
    "z0_law",
    "offspring_mean",
    "gw_cross_validation",
    "stable_invariance",
    "single_node",
];

const DEGREE_CHECKS: [&str; 3] = ["forest_degree_cdf", "sigma_laplace", "joint_laplace"];
const FOREST_CHECKS: [&str; 3] = ["z0_law", "offspring_mean", "single_node"];

/// Expand a comma-separated list of suite names ("default", "degree",
/// "forest", "analytic") and check names, keeping first occurrences.
pub fn resolve_checks(selector: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for token in selector.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let names: Vec<&str> = match token {
            "default" | "all" => CHECK_NAMES.to_vec(),
            "degree" => DEGREE_CHECKS.to_vec(),
            "forest" => vec!["z0_law", "offspring_mean", "gw_cross_validation", "single_node"],
            "analytic" => vec!["stable_invariance"],
            name if CHECK_NAMES.contains(&name) => vec![name],
            other => return Err(Error::UnknownCheck(other.to_string())),
        };
        for n in names {
            if !out.iter().any(|o| o == n) {
                out.push(n.to_string());
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty check list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub eps: f64,
    pub dt: f64,
    pub max_time: f64,
}

impl SimSettings {
    fn config(&self, seed: u64, replica_index: u64) -> PathSimConfig {
        PathSimConfig { eps: self.eps, dt: self.dt, max_steps: u64::MAX, max_time: self.max_time, seed, replica_index }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub name: String,
    pub checks: Vec<String>,
    pub r: f64,
    pub delta: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Paths for the degree and lifetime checks.
    pub degree_paths: u64,
    pub degree_sim: SimSettings,
    /// Upper limit on paths for the forest checks.
    pub forest_paths: u64,
    pub min_nonempty: u64,
    pub forest_sim: SimSettings,
    /// Forests per route in the cross-validation.
    pub gw_samples: u64,
    pub k: f64,
    pub bias_budget: f64,
    pub tv_tol: f64,
    pub invariance_deltas: Vec<f64>,
    pub invariance_lambdas: Vec<f64>,
    pub invariance_tol: f64,
}

impl SuiteSpec {
    pub fn new(selector: &str) -> Result<SuiteSpec> {
        Ok(SuiteSpec {
            name: selector.to_string(),
            checks: resolve_checks(selector)?,
            r: 1.0,
            delta: 2.0,
            lambda: 1.0,
            seed: 2024,
            degree_paths: 100_000,
            degree_sim: SimSettings { eps: 1e-3, dt: 1e-3, max_time: 40.0 },
            forest_paths: 200_000,
            min_nonempty: 10_000,
            forest_sim: SimSettings { eps: 1e-2, dt: 1e-2, max_time: 1e5 },
            gw_samples: 10_000,
            k: 3.0,
            bias_budget: 0.005,
            tv_tol: 0.03,
            invariance_deltas: vec![1.0, 5.0, 20.0],
            invariance_lambdas: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            invariance_tol: 1e-6,
        })
    }

    /// Half the samples, doubled bias budgets and a TV bound widened by √2.
    pub fn quick(mut self) -> SuiteSpec {
        self.degree_paths = (self.degree_paths / 2).max(1);
        self.forest_paths = (self.forest_paths / 2).max(1);
        self.min_nonempty /= 2;
        self.gw_samples = (self.gw_samples / 2).max(1);
        self.bias_budget *= 2.0;
        self.tv_tol *= std::f64::consts::SQRT_2;
        self
    }

    /// Same sample size for every Monte Carlo check.
    pub fn with_n(mut self, n: u64) -> SuiteSpec {
        self.degree_paths = n;
        self.forest_paths = n;
        self.gw_samples = n;
        self.min_nonempty = self.min_nonempty.min(n);
        self
    }

    fn validate(&self) -> Result<()> {
        for c in &self.checks {
            if !CHECK_NAMES.contains(&c.as_str()) {
                return Err(Error::UnknownCheck(c.clone()));
            }
        }
        if !(self.r > 0.0 && self.delta > 0.0 && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need r > 0, delta > 0, lambda >= 0 (got {}, {}, {})",
                self.r, self.delta, self.lambda
            )));
        }
        Ok(())
    }

    fn wants(&self, names: &[&str]) -> bool {
        self.checks.iter().any(|c| names.contains(&c.as_str()))
    }

    fn mc(&self, n: u64, sim: &SimSettings, replica_base: u64, bias_budget: f64) -> McConfig {
        McConfig { k: self.k, bias_budget, ..McConfig::new(n, sim.config(self.seed, replica_base)) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub mechanism_spec: MechanismSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism_sha256: Option<String>,
    pub checks: Vec<CheckResult>,
    pub seed: u64,
    pub wall_time: f64,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl SuiteReport {
    /// 0 when nothing failed, 1 on a statistical failure.
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 {
            1
        } else {
            0
        }
    }
}

/// Run the checks of `spec` on the mechanism. Errors are configuration
/// problems; statistical failures are reported inside the report.
pub fn run_suite(spec: &SuiteSpec, mechanism: &MechanismSpec) -> Result<SuiteReport> {
    let start = Instant::now();
    spec.validate()?;
    let m = mechanism.build()?;
    let (r, delta, lambda) = (spec.r, spec.delta, spec.lambda);
    if (spec.wants(&FOREST_CHECKS) || spec.wants(&["gw_cross_validation"])) && r > delta {
        return Err(Error::RootAboveDelta { r, delta });
    }
    let mut results: Vec<CheckResult> = Vec::new();

    if spec.wants(&DEGREE_CHECKS) {
        let mc = spec.mc(spec.degree_paths, &spec.degree_sim, 0, spec.bias_budget);
        let t = run_path_tally(&m, r, delta, lambda, &mc, |_| false)?;
        for c in &spec.checks {
            match c.as_str() {
                "forest_degree_cdf" => results.push(forest_degree_cdf_result(&m, r, delta, &t, &mc)?),
                "sigma_laplace" => results.push(sigma_laplace_result(&m, r, lambda, &t, &mc)?),
                "joint_laplace" => results.push(joint_laplace_result(&m, r, delta, lambda, &t, &mc)?),
                _ => {}
            }
        }
    }

    if spec.wants(&FOREST_CHECKS) {
        let mc = spec.mc(spec.forest_paths, &spec.forest_sim, 1 << 40, spec.bias_budget);
        let need = if spec.wants(&["offspring_mean"]) { spec.min_nonempty } else { u64::MAX };
        let t = run_path_tally(&m, r, delta, lambda, &mc, |t| t.nonempty >= need)?;
        for c in &spec.checks {
            match c.as_str() {
                "z0_law" => results.push(z0_law_result(&m, r, delta, lambda, &t, &mc)?),
                "offspring_mean" => {
                    let exact = McConfig { bias_budget: 0.0, ..mc };
                    let mut res = offspring_mean_result(&m, delta, &t, &exact)?;
                    if res.pass && t.nonempty < spec.min_nonempty {
                        res.pass = false;
                        res.status = CheckStatus::Fail;
                        res.notes.push(format!("only {} non-empty forests, {} required", t.nonempty, spec.min_nonempty));
                    }
                    results.push(res);
                }
                "single_node" => results.extend(single_node_results(&m, r, delta, &t, &mc)?),
                _ => {}
            }
        }
    }

    if spec.wants(&["gw_cross_validation"]) {
        let mc = spec.mc(spec.gw_samples, &spec.forest_sim, 2 << 40, spec.bias_budget);
        results.push(cross_validate_gw(&m, r, delta, spec.tv_tol, &mc)?);
    }

    if spec.wants(&["stable_invariance"]) {
        results.push(match stable_index(&m) {
            Some(g) => check_stable_invariance(g, &spec.invariance_deltas, &spec.invariance_lambdas, spec.invariance_tol)?,
            None => CheckResult::skipped("stable_invariance", "mechanism is not a pure stable one"),
        });
    }

    let count = |s: CheckStatus| results.iter().filter(|c| c.status == s).count();
    Ok(SuiteReport {
        suite: spec.name.clone(),
        mechanism_spec: mechanism.clone(),
        mechanism_sha256: None,
        passed: count(CheckStatus::Pass),
        failed: count(CheckStatus::Fail),
        skipped: count(CheckStatus::Skipped),
        checks: results,
        seed: spec.seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::PiSpec;

    fn stable_spec() -> MechanismSpec {
        MechanismSpec { alpha: 0.0, beta: 0.0, pi: PiSpec::Stable { gamma: 1.5 } }
    }

    #[test]
    fn selectors() {
        assert_eq!(resolve_checks("default").unwrap().len(), CHECK_NAMES.len());
        assert_eq!(resolve_checks("z0_law, sigma_laplace").unwrap(), vec!["z0_law", "sigma_laplace"]);
        assert!(matches!(resolve_checks("bogus"), Err(Error::UnknownCheck(_))));
        assert!(resolve_checks(" , ").is_err());
        assert_eq!(resolve_checks("degree,sigma_laplace,analytic").unwrap().len(), 4);
    }

    #[test]
    fn analytic_suite_passes() {
        let rep = run_suite(&SuiteSpec::new("analytic").unwrap(), &stable_spec()).unwrap();
        assert_eq!((rep.passed, rep.failed), (1, 0));
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn non_stable_mechanism_skips_invariance() {
        let spec = MechanismSpec { alpha: 0.0, beta: 1.0, pi: PiSpec::Atoms { atoms: vec![(2.0, 0.5)] } };
        let rep = run_suite(&SuiteSpec::new("stable_invariance").unwrap(), &spec).unwrap();
        assert_eq!(rep.skipped, 1);
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn small_mc_suite_is_reproducible() {
        let mut spec = SuiteSpec::new("degree,z0_law").unwrap().with_n(400);
        spec.degree_sim = SimSettings { eps: 1e-2, dt: 1e-2, max_time: 40.0 };
        spec.forest_sim = SimSettings { eps: 1e-2, dt: 1e-2, max_time: 100.0 };
        let a = run_suite(&spec, &stable_spec()).unwrap();
        let b = run_suite(&spec, &stable_spec()).unwrap();
        assert_eq!(a.checks.len(), 4);
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.estimate, y.estimate);
        }
    }

    #[test]
    fn root_above_delta_is_a_configuration_error() {
        let mut spec = SuiteSpec::new("z0_law").unwrap();
        spec.r = 3.0;
        assert!(matches!(run_suite(&spec, &stable_spec()), Err(Error::RootAboveDelta { .. })));
    }
}
