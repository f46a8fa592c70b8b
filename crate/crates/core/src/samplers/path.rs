use crate::error::{Error, Result};
use crate::mechanism::{BranchingMechanism, JumpSampler, Side};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// Discretization and stopping parameters of the path simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSimConfig {
    /// Jumps at most this large are replaced by a Gaussian term.
    pub eps: f64,
    /// Longest gap between two evaluations of the path.
    pub dt: f64,
    pub max_steps: u64,
    /// Simulated time after which the path is abandoned.
    pub max_time: f64,
    pub seed: u64,
    pub replica_index: u64,
}

impl Default for PathSimConfig {
    fn default() -> Self {
        PathSimConfig { eps: 1e-3, dt: 1e-3, max_steps: u64::MAX, max_time: 1e4, seed: 0, replica_index: 0 }
    }
}

impl PathSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.dt > 0.0 && self.max_time > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "eps, dt, max_time and max_steps must be positive (eps={}, dt={}, max_time={}, max_steps={})",
                self.eps, self.dt, self.max_time, self.max_steps
            )));
        }
        Ok(())
    }
}

/// A recorded jump larger than the recording threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigJump {
    pub time: f64,
    pub size: f64,
    /// X_{s−}.
    pub pre_level: f64,
    /// Lowest observed level from this jump up to and including the pre-jump
    /// level of the next recorded jump (or the end of the path).
    pub min_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub r: f64,
    pub delta_record: f64,
    /// First-passage time below 0; the abandon time when truncated.
    pub sigma_hat: f64,
    /// Largest jump of the path, 0 if there was none above eps.
    pub max_jump: f64,
    pub t_first_big: Option<f64>,
    pub big_jumps: Vec<BigJump>,
    pub steps: u64,
    /// Set when the path hit max_steps or max_time before passage.
    pub truncated: bool,
}

impl PathRecord {
    /// Degree of the forest, counting the initial mass r as a node.
    pub fn forest_degree(&self) -> f64 {
        self.r.max(self.max_jump)
    }
}

const GAUSS_MARGIN: f64 = 8.0;

/// Precomputed jump-diffusion approximation of the ψ-Lévy path.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    drift: f64,
    sd: f64,
    jumps: JumpSampler,
    cfg: PathSimConfig,
}

impl PathSimulator {
    pub fn new(m: &BranchingMechanism, cfg: &PathSimConfig) -> Result<Self> {
        cfg.validate()?;
        let pi = m.pi();
        let drift = -(m.alpha() + pi.partial_first_moment(cfg.eps, Side::Open)?);
        let var = 2.0 * m.beta() + pi.head_second_moment(cfg.eps)?;
        let jumps = JumpSampler::new(pi, cfg.eps)?;
        Ok(PathSimulator { drift, sd: var.sqrt(), jumps, cfg: *cfg })
    }

    pub fn config(&self) -> &PathSimConfig {
        &self.cfg
    }

    /// Run one path from level r, recording jumps larger than delta_record.
    pub fn run<R: Rng + ?Sized>(&self, r: f64, delta_record: f64, rng: &mut R) -> Result<PathRecord> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("start level must be > 0, got {r}")));
        }
        if !(delta_record > self.cfg.eps) {
            return Err(Error::InvalidArgument(format!(
                "recording threshold {delta_record} must exceed eps {}",
                self.cfg.eps
            )));
        }
        let rate = self.jumps.rate();
        let dt = self.cfg.dt;
        let mut next_jump = self.next_gap(rate, rng);
        let (mut t, mut x) = (0.0f64, r);
        // Gaussian time not yet drawn into x; only deferred while no recorded
        // jump is open and x stays GAUSS_MARGIN sds clear of 0
        let mut pending = 0.0f64;
        let mut steps = 0u64;
        let mut max_jump = 0.0f64;
        let mut big_jumps: Vec<BigJump> = Vec::new();
        let mut t_first_big = None;
        loop {
            // with the Gaussian deferred there is nothing to evaluate at grid
            // points, so skip straight to the next jump when it is safe
            let far = big_jumps.is_empty() && next_jump > t + dt && next_jump.is_finite() && {
                let h = next_jump - t;
                x + self.drift * h > GAUSS_MARGIN * self.sd * (pending + h).sqrt()
            };
            let at_jump = far || next_jump <= t + dt;
            let t_next = if at_jump { next_jump } else { t + dt };
            let h = t_next - t;
            let mut x_new = x + self.drift * h;
            if self.sd > 0.0 {
                let ahead = pending + h;
                if big_jumps.is_empty() && x_new > GAUSS_MARGIN * self.sd * ahead.sqrt() {
                    pending = ahead;
                } else {
                    if pending > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        x += self.sd * pending.sqrt() * z;
                        x_new = x + self.drift * h;
                        pending = 0.0;
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    x_new += self.sd * h.sqrt() * z;
                }
            }
            if let Some(last) = big_jumps.last_mut() {
                last.min_after = last.min_after.min(x_new);
            }
            steps += 1;
            if x_new <= 0.0 {
                let sigma_hat = t + h * x / (x - x_new);
                return Ok(PathRecord { r, delta_record, sigma_hat, max_jump, t_first_big, big_jumps, steps, truncated: false });
            }
            t = t_next;
            x = x_new;
            if at_jump {
                let s = self.jumps.sample(rng);
                max_jump = max_jump.max(s);
                if s > delta_record {
                    if pending > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        x += self.sd * pending.sqrt() * z;
                        pending = 0.0;
                    }
                    t_first_big.get_or_insert(t);
                    big_jumps.push(BigJump { time: t, size: s, pre_level: x, min_after: x + s });
                }
                x += s;
                next_jump = t + self.next_gap(rate, rng);
            }
            if steps >= self.cfg.max_steps || t >= self.cfg.max_time {
                return Ok(PathRecord { r, delta_record, sigma_hat: t, max_jump, t_first_big, big_jumps, steps, truncated: true });
            }
        }
    }

    /// First-passage time from r, ignoring the genealogy; the flag marks truncation.
    pub fn passage_time<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> Result<(f64, bool)> {
        let rec = self.run(r, f64::INFINITY, rng)?;
        Ok((rec.sigma_hat, rec.truncated))
    }

    fn next_gap<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> f64 {
        if rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / rate
        } else {
            f64::INFINITY
        }
    }
}

/// Simulate X from r until it first goes below 0: drift, Gaussian stand-in
/// for jumps ≤ eps, compound Poisson jumps > eps.
pub fn simulate_first_passage<R: Rng + ?Sized>(
    m: &BranchingMechanism,
    r: f64,
    delta_record: f64,
    cfg: &PathSimConfig,
    rng: &mut R,
) -> Result<PathRecord> {
    PathSimulator::new(m, cfg)?.run(r, delta_record, rng)
}
