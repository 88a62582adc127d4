//! Skorohod embedding of the random walk into a Brownian path.
//!
//! Pairing the signs `eps_k` with exit times `tau_k` gives the skeleton
//! `B_{tau_k} = sqrt(h) (eps_1 + ... + eps_k)`, which is the walk value
//! `B^n_{t_k}` itself. Values of `B` at deterministic times are drawn from
//! the plain Brownian bridge between the bracketing skeleton points. The
//! bridge is not conditioned to stay inside the `+-sqrt(h)` corridor.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::exit_time::TauSequence;
use crate::lattice::RademacherPath;

#[derive(Debug, Clone, PartialEq)]
pub struct SkorohodPath {
    taus: TauSequence,
    /// `B_{tau_0} = 0, B_{tau_1}, ..., B_{tau_n}`.
    skeleton: Vec<f64>,
}

/// Where a time falls relative to the skeleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// `t = tau_j`.
    Node(usize),
    /// `tau_j < t < tau_{j+1}`.
    Inside(usize),
    /// `t > tau_n`.
    Beyond,
}

pub fn couple(path: &RademacherPath, taus: TauSequence) -> Result<SkorohodPath> {
    if path.len() != taus.len() {
        return Err(Error::LengthMismatch {
            signs: path.len(),
            taus: taus.len(),
        });
    }
    let skeleton = path.walk_values(taus.h().sqrt());
    Ok(SkorohodPath { taus, skeleton })
}

impl SkorohodPath {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.taus.h()
    }

    pub fn taus(&self) -> &TauSequence {
        &self.taus
    }

    pub fn skeleton(&self) -> &[f64] {
        &self.skeleton
    }

    /// `tau_j` with `tau_0 = 0`.
    pub fn tau(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.taus.as_slice()[j - 1]
        }
    }

    pub fn bracket(&self, t: f64) -> Bracket {
        let taus = self.taus.as_slice();
        // number of tau_1..tau_n that are <= t
        let j = taus.partition_point(|&s| s <= t);
        if j > 0 && taus[j - 1] == t {
            return Bracket::Node(j);
        }
        if t == 0.0 {
            return Bracket::Node(0);
        }
        if j == taus.len() {
            Bracket::Beyond
        } else {
            Bracket::Inside(j)
        }
    }

    /// Conditional mean and variance of `B_t` given the skeleton.
    pub fn bridge_moments(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        Ok(match self.bracket(t) {
            Bracket::Node(j) => (self.skeleton[j], 0.0),
            Bracket::Inside(j) => {
                let (a, b) = (self.tau(j), self.tau(j + 1));
                let (xa, xb) = (self.skeleton[j], self.skeleton[j + 1]);
                let w = (t - a) / (b - a);
                (xa + w * (xb - xa), (t - a) * (b - t) / (b - a))
            }
            Bracket::Beyond => {
                let n = self.len();
                (self.skeleton[n], t - self.tau(n))
            }
        })
    }

    /// One draw of `B_t`. Exact skeleton times consume no randomness.
    pub fn bridge_sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        let (mean, var) = self.bridge_moments(t)?;
        if var == 0.0 {
            return Ok(mean);
        }
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + var.sqrt() * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exit_time::ExitTimeCdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_step(h: f64) -> SkorohodPath {
        let path = RademacherPath::new(vec![1, -1]).unwrap();
        let taus = TauSequence::new(vec![0.8 * h, 2.1 * h], h).unwrap();
        couple(&path, taus).unwrap()
    }

    #[test]
    fn skeleton_of_two_steps() {
        let s = two_step(0.04);
        assert_eq!(s.skeleton(), &[0.0, 0.2, 0.0]);
    }

    #[test]
    fn skeleton_is_walk() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cdf = ExitTimeCdf::for_step(0.01).unwrap();
        let path = RademacherPath::random(100, &mut rng);
        let s = couple(&path, cdf.sample_taus(100, &mut rng)).unwrap();
        assert_eq!(s.skeleton(), path.walk_values(0.1).as_slice());
    }

    #[test]
    fn length_mismatch() {
        let path = RademacherPath::new(vec![1, 1, -1]).unwrap();
        let taus = TauSequence::new(vec![0.1, 0.2], 0.1).unwrap();
        assert!(matches!(
            couple(&path, taus),
            Err(Error::LengthMismatch { signs: 3, taus: 2 })
        ));
    }

    #[test]
    fn bridge_at_nodes_is_deterministic() {
        let s = two_step(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let before: u64 = rng.clone().random();
        assert_eq!(s.bridge_sample(0.8, &mut rng).unwrap(), 1.0);
        assert_eq!(s.bridge_sample(2.1, &mut rng).unwrap(), 0.0);
        assert_eq!(s.bridge_sample(0.0, &mut rng).unwrap(), 0.0);
        // no randomness consumed
        assert_eq!(rng.random::<u64>(), before);
        assert!(s.bridge_sample(-0.1, &mut rng).is_err());
    }

    #[test]
    fn bridge_midpoint_formulas() {
        let s = two_step(1.0);
        let (mean, var) = s.bridge_moments(0.5 * (0.8 + 2.1)).unwrap();
        assert!((mean - 0.5).abs() < 1e-15);
        assert!((var - (2.1 - 0.8) / 4.0).abs() < 1e-15);
        let (mean, var) = s.bridge_moments(0.4).unwrap();
        assert!((mean - 0.5).abs() < 1e-15);
        assert!((var - 0.4 * 0.4 / 0.8).abs() < 1e-15);
        let (mean, var) = s.bridge_moments(3.0).unwrap();
        assert_eq!(mean, 0.0);
        assert!((var - 0.9).abs() < 1e-15);
    }

    #[test]
    fn bridge_uses_only_bracketing_points() {
        let h = 0.25;
        let taus = TauSequence::new(vec![0.2, 0.5, 0.9, 1.3], h).unwrap();
        let a = couple(
            &RademacherPath::new(vec![1, -1, 1, 1]).unwrap(),
            taus.clone(),
        )
        .unwrap();
        let b = couple(&RademacherPath::new(vec![-1, 1, 1, -1]).unwrap(), taus).unwrap();
        // skeletons agree at tau_2 = 0.5 and tau_3 = 0.9 and nowhere else
        assert_ne!(a.skeleton()[1], b.skeleton()[1]);
        assert_ne!(a.skeleton()[4], b.skeleton()[4]);
        assert_eq!(a.skeleton()[2], b.skeleton()[2]);
        assert_eq!(a.skeleton()[3], b.skeleton()[3]);
        assert_eq!(
            a.bridge_moments(0.7).unwrap(),
            b.bridge_moments(0.7).unwrap()
        );
    }

    #[test]
    fn bridge_sample_statistics() {
        let s = two_step(1.0);
        let t = 1.2;
        let (mean, var) = s.bridge_moments(t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| s.bridge_sample(t, &mut rng).unwrap())
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt());
        // Var of the sample variance for Gaussian data: 2 var^2 / (n - 1)
        assert!((v - var).abs() < 4.0 * (2.0 * var * var / (n - 1) as f64).sqrt());
    }

    #[test]
    fn embedding_distance_stays_bounded() {
        let n = 100;
        let h = 1.0 / n as f64;
        let cdf = ExitTimeCdf::for_step(h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let reps = 4000;
        let ks = [n / 4, n / 2, n];
        let mut acc = [0.0; 3];
        for _ in 0..reps {
            let path = RademacherPath::random(n, &mut rng);
            let s = couple(&path, cdf.sample_taus(n, &mut rng)).unwrap();
            for (slot, &k) in acc.iter_mut().zip(&ks) {
                let b = s.bridge_sample(k as f64 * h, &mut rng).unwrap();
                *slot += (s.skeleton()[k] - b).powi(2);
            }
        }
        for (sum, &k) in acc.iter().zip(&ks) {
            let t_k = k as f64 * h;
            let ratio = sum / reps as f64 / (t_k * h).sqrt();
            assert!(ratio <= 5.0, "k={k}: ratio {ratio}");
        }
    }
}
