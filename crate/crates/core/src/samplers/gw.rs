use super::forest::BigNodeForest;
use super::path::{PathSimConfig, PathSimulator};
use crate::error::Result;
use crate::mechanism::{BranchingMechanism, JumpSampler};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::VecDeque;

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Samples τ_δ directly: under the pruned mechanism ψ_δ, big nodes arrive at
/// rate π̄(δ) per unit of pruned lifetime, with masses drawn from π on (δ, ∞).
#[derive(Debug, Clone)]
pub struct GwSampler {
    pruned: Option<PathSimulator>,
    masses: JumpSampler,
    rate: f64,
}

impl GwSampler {
    pub fn new(m: &BranchingMechanism, delta: f64, cfg: &PathSimConfig) -> Result<Self> {
        let rate = m.pi().tail(delta)?;
        let masses = JumpSampler::new(m.pi(), delta)?;
        let pruned = if rate > 0.0 { Some(PathSimulator::new(&m.truncated_mechanism(delta)?, cfg)?) } else { None };
        Ok(GwSampler { pruned, masses, rate })
    }

    fn offspring<R: Rng + ?Sized>(&self, sim: &PathSimulator, mass: f64, rng: &mut R) -> Result<(u64, bool)> {
        let (sigma, truncated) = sim.passage_time(mass, rng)?;
        let mean = self.rate * sigma;
        let k = if mean > 0.0 { Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0) } else { 0 };
        Ok((k, truncated))
    }

    /// One forest from initial mass r, breadth first; at most `node_cap` nodes
    /// are created, and hitting the cap sets the truncation flag.
    pub fn sample<R: Rng + ?Sized>(&self, r: f64, node_cap: usize, rng: &mut R) -> Result<BigNodeForest> {
        let mut forest = BigNodeForest::default();
        let Some(sim) = &self.pruned else {
            return Ok(forest);
        };
        let mut queue = VecDeque::new();
        let (k0, tr) = self.offspring(sim, r, rng)?;
        forest.truncated |= tr;
        for _ in 0..k0 {
            if forest.nodes.len() >= node_cap {
                forest.truncated = true;
                break;
            }
            queue.push_back(forest.push(self.masses.sample(rng), None));
        }
        while let Some(v) = queue.pop_front() {
            if forest.truncated && forest.nodes.len() >= node_cap {
                forest.open[v] = true;
                continue;
            }
            let (k, tr) = self.offspring(sim, forest.nodes[v].mass, rng)?;
            forest.truncated |= tr;
            for _ in 0..k {
                if forest.nodes.len() >= node_cap {
                    forest.truncated = true;
                    forest.open[v] = true;
                    break;
                }
                queue.push_back(forest.push(self.masses.sample(rng), Some(v)));
            }
        }
        Ok(forest)
    }
}

pub fn sample_gw_forest<R: Rng + ?Sized>(
    m: &BranchingMechanism,
    r: f64,
    delta: f64,
    cfg: &PathSimConfig,
    node_cap: usize,
    rng: &mut R,
) -> Result<BigNodeForest> {
    GwSampler::new(m, delta, cfg)?.sample(r, node_cap, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree_laws::xi_mean;
    use crate::mechanism::LevyMeasure;
    use crate::samplers::replica_rng;

    fn cfg() -> PathSimConfig {
        PathSimConfig { eps: 1e-2, dt: 1e-2, max_time: 1e4, ..PathSimConfig::default() }
    }

    #[test]
    fn empty_when_no_mass_above_delta() {
        let m = BranchingMechanism::new(0.0, 1.0, LevyMeasure::atoms(vec![(2.0, 0.5)]).unwrap()).unwrap();
        let mut rng = replica_rng(0, 0);
        for _ in 0..20 {
            assert!(sample_gw_forest(&m, 1.0, 3.0, &cfg(), 100, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn cap_is_respected() {
        let m = BranchingMechanism::stable(1.5).unwrap();
        let s = GwSampler::new(&m, 0.5, &cfg()).unwrap();
        let mut rng = replica_rng(2, 0);
        let mut hit = false;
        for _ in 0..200 {
            let f = s.sample(0.5, 5, &mut rng).unwrap();
            assert!(f.w_total <= 5);
            f.check_invariants().unwrap();
            hit |= f.truncated;
        }
        assert!(hit);
    }

    #[test]
    fn subcritical_offspring_mean() {
        let m = BranchingMechanism::new(1.0, 0.0, LevyMeasure::stable(1.5).unwrap()).unwrap();
        let delta = 1.0;
        let s = GwSampler::new(&m, delta, &cfg()).unwrap();
        let mut rng = replica_rng(9, 0);
        let mut xs = Vec::new();
        while xs.len() < 3000 {
            let f = s.sample(1.0, 10_000, &mut rng).unwrap();
            for i in f.roots() {
                xs.push(f.offspring_counts[i] as f64);
            }
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let want = xi_mean(&m, delta).unwrap();
        assert!((mean - want).abs() < 3.0 * se + 0.01, "mean {mean} want {want} se {se}");
    }
}
