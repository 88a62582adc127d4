//! Gauss–Hermite rules for the weight `exp(-x^2)`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=512).contains(&order) {
            return Err(invalid(
                "order",
                format!("must lie in [1, 512], got {order}"),
            ));
        }
        let n = order;
        let m = n.div_ceil(2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            // initial guesses for the largest roots, then extrapolation
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (pim4, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int exp(-x^2) f(x) dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `E f(mu + sigma Z)` for standard normal `Z`.
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, mu: f64, sigma: f64, f: F) -> f64 {
        let s = std::f64::consts::SQRT_2 * sigma;
        self.integrate(|x| f(mu + s * x)) / PI.sqrt()
    }

    /// `int f(x) dx` over the real line as `c sum w_i exp(x_i^2) f(c x_i)`.
    /// Suitable for integrands decaying at least like a Gaussian of scale `c`.
    pub fn integrate_line<F: Fn(f64) -> f64>(&self, scale: f64, f: F) -> f64 {
        scale
            * self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| {
                    let v = f(scale * x);
                    if v == 0.0 {
                        0.0
                    } else {
                        (w.ln() + x * x).exp() * v
                    }
                })
                .sum::<f64>()
    }
}
