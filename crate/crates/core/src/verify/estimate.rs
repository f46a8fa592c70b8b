use serde::{Deserialize, Serialize};

/// Monte Carlo mean with its standard error and the systematic error allowed
/// on top of k standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub bias_budget: f64,
}

const SCALE: f64 = (1u64 << 48) as f64;

fn fixed(x: f64) -> i128 {
    (x * SCALE).round() as i128
}

/// Running sums in 2^-48 fixed point. Integer addition makes merging exact,
/// so per-replica summaries combine to the same result in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub n: u64,
    sum: i128,
    sumsq: i128,
}

impl Summary {
    pub fn add(&mut self, x: f64) {
        let q = fixed(x);
        let xq = q as f64 / SCALE;
        self.n += 1;
        self.sum += q;
        self.sumsq += fixed(xq * xq);
    }

    pub fn merge(&mut self, other: &Summary) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum as f64 / SCALE / self.n as f64)
    }

    /// `None` when empty. With one sample the standard error is reported as 0.
    pub fn estimate(&self, bias_budget: f64) -> Option<MCEstimate> {
        let mean = self.mean()?;
        let n = self.n as f64;
        let stderr = if self.n > 1 {
            let ss = self.sumsq as f64 / SCALE - n * mean * mean;
            (ss.max(0.0) / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Some(MCEstimate { mean, stderr, n: self.n, bias_budget })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_textbook_formulas() {
        let xs = [0.25, 1.0, 0.5, 0.0, 2.0];
        let mut s = Summary::default();
        xs.iter().for_each(|&x| s.add(x));
        let e = s.estimate(0.0).unwrap();
        let mean = 3.75 / 5.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((e.mean - mean).abs() < 1e-14);
        assert!((e.stderr - (var / 5.0).sqrt()).abs() < 1e-12);
        assert!(Summary::default().estimate(0.0).is_none());
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(xs in prop::collection::vec(0.0f64..1e3, 1..200), cut1 in 0usize..200, cut2 in 0usize..200) {
            let (a, b) = (cut1.min(xs.len()), cut2.min(xs.len()));
            let (lo, hi) = (a.min(b), a.max(b));
            let part = |s: &[f64]| { let mut t = Summary::default(); s.iter().for_each(|&x| t.add(x)); t };
            let (p, q, r) = (part(&xs[..lo]), part(&xs[lo..hi]), part(&xs[hi..]));
            let mut left = p; left.merge(&q); left.merge(&r);
            let mut right = r; right.merge(&p); right.merge(&q);
            prop_assert_eq!(left, right);
            prop_assert_eq!(left, part(&xs));
            prop_assert_eq!(left.estimate(0.1), part(&xs).estimate(0.1));
        }
    }
}
