//! Scaled Rademacher walk and the geometry of its recombining tree.
//!
//! Node `(k, i)` is the state after `k` steps of which `i` went up, so it
//! sits at `(2i - k) * sqrt(h)`. Level `k` holds `k + 1` nodes.

use rand::Rng;

use crate::error::{invalid, require_positive, Error, Result};

/// Largest `n` for which [`enumerate_paths`] agrees to walk all `2^n` paths.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGeometry {
    steps: usize,
    h: f64,
    sqrt_h: f64,
}

impl LatticeGeometry {
    /// Geometry with `steps` steps over `[0, horizon]`, so `h = horizon / steps`.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        require_positive("horizon", horizon)?;
        if steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        Self::from_step(steps, horizon / steps as f64)
    }

    /// Geometry from a step size; the horizon is then `steps * h`.
    pub fn from_step(steps: usize, h: f64) -> Result<Self> {
        require_positive("h", h)?;
        if steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        Ok(Self {
            steps,
            h,
            sqrt_h: h.sqrt(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn sqrt_h(&self) -> f64 {
        self.sqrt_h
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.h
    }

    /// `t_k = k * h`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn node_coordinate(&self, k: usize, i: usize) -> Result<f64> {
        if k > self.steps || i > k {
            return Err(Error::IndexOutOfRange(format!(
                "node ({k}, {i}) outside a lattice of {} steps",
                self.steps
            )));
        }
        Ok(self.coord(k, i))
    }

    #[inline]
    pub(crate) fn coord(&self, k: usize, i: usize) -> f64 {
        (2 * i as i64 - k as i64) as f64 * self.sqrt_h
    }
}

/// A sign sequence `eps_1..eps_n`, each exactly `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RademacherPath {
    signs: Vec<i8>,
}

impl RademacherPath {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(pos) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(invalid(
                "signs",
                format!("entry {pos} is {}, expected +1 or -1", signs[pos]),
            ));
        }
        Ok(Self { signs })
    }

    /// Bit `j` of `bits` set means step `j + 1` goes up.
    pub fn from_bits(bits: u64, steps: usize) -> Self {
        debug_assert!(steps <= 64);
        let signs = (0..steps)
            .map(|j| if bits >> j & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { signs }
    }

    pub fn random<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> Self {
        let signs = (0..steps)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self { signs }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Number of up-moves among the first `k` steps, i.e. the node index at level `k`.
    pub fn up_count(&self, k: usize) -> usize {
        self.signs[..k].iter().filter(|&&s| s == 1).count()
    }

    /// `sqrt(h) * (eps_1 + ... + eps_k)` for `k = 0..=n`.
    pub fn walk_values(&self, sqrt_h: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.signs.len() + 1);
        let mut net: i64 = 0;
        out.push(0.0);
        for &s in &self.signs {
            net += i64::from(s);
            out.push(net as f64 * sqrt_h);
        }
        out
    }
}

/// Exhaustive iterator over the `2^n` sign sequences of length `n`.
#[derive(Debug, Clone)]
pub struct PathEnumerator {
    steps: usize,
    next: u64,
    end: u64,
}

impl Iterator for PathEnumerator {
    type Item = RademacherPath;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next == self.end {
            return None;
        }
        let path = RademacherPath::from_bits(self.next, self.steps);
        self.next += 1;
        Some(path)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = (self.end - self.next) as usize;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for PathEnumerator {}

pub fn enumerate_paths(steps: usize) -> Result<PathEnumerator> {
    enumerate_paths_capped(steps, ENUMERATION_CAP)
}

pub fn enumerate_paths_capped(steps: usize, cap: usize) -> Result<PathEnumerator> {
    if steps > cap || steps >= 64 {
        return Err(Error::EnumerationCap { steps, cap });
    }
    Ok(PathEnumerator {
        steps,
        next: 0,
        end: 1u64 << steps,
    })
}
