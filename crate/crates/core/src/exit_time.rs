//! Law of the first exit time `sigma = inf{t > 0 : |B_t| = sqrt(h)}`.
//!
//! The Laplace transform is `E exp(-lambda sigma) = 1 / cosh(sqrt(2 lambda h))`.
//! The CDF is available three ways:
//!
//! * [`cdf_series`], the eigenfunction expansion, a truncated alternating sum;
//! * [`exit_cdf`], the production evaluator, which switches to the
//!   method-of-images expansion for `t <= h` where the eigenfunction sum
//!   converges slowly;
//! * [`cdf_laplace_inversion`], fixed-Talbot inversion of `F^(s) = 1 / (s cosh sqrt(2 s h))`.
//!
//! [`ExitTimeCdf`] tabulates one of them and samples by inverse lookup.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;

use crate::error::{invalid, require_positive, Error, Result};

/// Default contour order for [`TalbotInverter`].
pub const DEFAULT_TALBOT_ORDER: usize = 24;
/// Orders above this lose more to cancellation than they gain in truncation.
pub const MAX_TALBOT_ORDER: usize = 64;

pub const DEFAULT_GRID_SIZE: usize = 4096;
/// Default table range in units of `h`.
pub const DEFAULT_T_MIN: f64 = 1e-4;
pub const DEFAULT_T_MAX: f64 = 30.0;

pub const MAX_TAIL_MASS: f64 = 1e-10;
pub const MAX_HEAD_MASS: f64 = 1e-12;

/// Start of the uniform part of the grid, in units of `h`.
const GRID_KNEE: f64 = 0.05;
/// End of the fine uniform part, in units of `h`.
const GRID_BULK_END: f64 = 4.0;

pub fn laplace_transform(lambda: f64, h: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(
            "lambda",
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    require_positive("h", h)?;
    Ok(1.0 / (2.0 * lambda * h).sqrt().cosh())
}

/// `1 - (4/pi) sum_{k<terms} (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 t / (8h))`,
/// clamped to `[0, 1]`. The truncation error is below the first omitted term.
pub fn cdf_series(t: f64, h: f64, terms: usize) -> f64 {
    let scaled = PI * PI * t / (8.0 * h);
    let mut sum = 0.0;
    for k in 0..terms {
        let odd = (2 * k + 1) as f64;
        let term = (-odd * odd * scaled).exp() / odd;
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    (1.0 - 4.0 / PI * sum).clamp(0.0, 1.0)
}

/// First omitted term of [`cdf_series`].
pub fn cdf_series_bound(t: f64, h: f64, terms: usize) -> f64 {
    let odd = (2 * terms + 1) as f64;
    4.0 / PI * (-odd * odd * PI * PI * t / (8.0 * h)).exp() / odd
}

/// Method of images: `2 sum_k (-1)^k erfc((2k+1) sqrt(h) / sqrt(2t))`.
pub fn cdf_images(t: f64, h: f64, terms: usize) -> f64 {
    let scale = (h / (2.0 * t)).sqrt();
    let mut sum = 0.0;
    for k in 0..terms {
        let term = libm::erfc((2 * k + 1) as f64 * scale);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Production CDF: images for `t <= h`, eigenfunctions beyond. Both sums
/// are converged to double precision on their side of the switch.
pub fn exit_cdf(t: f64, h: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= h {
        cdf_images(t, h, 12)
    } else {
        cdf_series(t, h, 12)
    }
}

/// Density `F'(t)`, eigenfunction form; valid for `t >= h / 4`.
fn exit_density_series(t: f64, h: f64) -> f64 {
    let scaled = PI * PI / (8.0 * h);
    let mut sum = 0.0;
    for k in 0..40 {
        let odd = (2 * k + 1) as f64;
        let term = odd * (-odd * odd * scaled * t).exp();
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    4.0 / PI * scaled * sum
}

/// Fixed-Talbot numerical Laplace inversion (Abate–Valkó contour).
///
/// Accuracy is roughly `0.6 * order` significant digits until double
/// precision cancellation takes over around order 30.
#[derive(Debug, Clone, Copy)]
pub struct TalbotInverter {
    order: usize,
}

impl Default for TalbotInverter {
    fn default() -> Self {
        Self {
            order: DEFAULT_TALBOT_ORDER,
        }
    }
}

impl TalbotInverter {
    pub fn new(order: usize) -> Result<Self> {
        if !(4..=MAX_TALBOT_ORDER).contains(&order) {
            return Err(Error::InversionUnstable(format!(
                "Talbot order {order} outside [4, {MAX_TALBOT_ORDER}] for double precision"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn invert<F>(&self, transform: F, t: f64) -> Result<f64>
    where
        F: Fn(Complex64) -> Complex64,
    {
        require_positive("t", t)?;
        let m = self.order as f64;
        let r = 2.0 * m / (5.0 * t);
        let mut acc = 0.5 * (transform(Complex64::new(r, 0.0)) * (r * t).exp()).re;
        for k in 1..self.order {
            let theta = k as f64 * PI / m;
            let cot = theta.cos() / theta.sin();
            let s = Complex64::new(r * theta * cot, r * theta);
            let sigma = theta + (theta * cot - 1.0) * cot;
            let term = (s * t).exp() * transform(s) * Complex64::new(1.0, sigma);
            acc += term.re;
        }
        let value = r / m * acc;
        if !value.is_finite() {
            return Err(Error::InversionUnstable(format!(
                "non-finite result at t = {t} with order {}",
                self.order
            )));
        }
        Ok(value)
    }
}

/// `1 / cosh(w)` for `Re w >= 0` without overflow.
fn sech(w: Complex64) -> Complex64 {
    let e = (-w).exp();
    2.0 * e / (1.0 + e * e)
}

/// Laplace transform of the CDF, `F^(s) = 1 / (s cosh(sqrt(2 s h)))`.
pub fn cdf_transform(s: Complex64, h: f64) -> Complex64 {
    sech((2.0 * h * s).sqrt()) / s
}

pub fn cdf_laplace_inversion(t: f64, h: f64) -> Result<f64> {
    cdf_laplace_inversion_with(TalbotInverter::default(), t, h)
}

/// Values leaving `[-tol, 1 + tol]` are reported as instability, not clamped.
pub fn cdf_laplace_inversion_with(inverter: TalbotInverter, t: f64, h: f64) -> Result<f64> {
    require_positive("h", h)?;
    let v = inverter.invert(|s| cdf_transform(s, h), t)?;
    const SLACK: f64 = 1e-6;
    if !(-SLACK..=1.0 + SLACK).contains(&v) {
        return Err(Error::InversionUnstable(format!(
            "F({t}) = {v} is not a probability (order {})",
            inverter.order()
        )));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CdfMethod {
    #[default]
    Series,
    LaplaceInversion,
}

/// Tabulated CDF of `sigma` with a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitTimeCdf {
    h: f64,
    grid: Vec<f64>,
    values: Vec<f64>,
    tail_mass: f64,
}

/// Grid in units of `h`: geometric on `[t_min, knee)`, uniform on `[knee, t_max]`.
fn unit_grid(size: usize, t_min: f64, t_max: f64) -> Vec<f64> {
    // geometric head up to the knee, fine uniform bulk, geometric tail
    let knee = GRID_KNEE.clamp(t_min, t_max);
    let bulk_end = GRID_BULK_END.clamp(knee, t_max);
    let n_geo = if knee > t_min { size / 4 } else { 0 };
    let n_tail = if t_max > bulk_end { size / 4 } else { 0 };
    let n_uni = size - n_geo - n_tail;
    let mut grid = Vec::with_capacity(size);
    let ratio = (knee / t_min).ln();
    for j in 0..n_geo {
        grid.push(t_min * (ratio * j as f64 / n_geo as f64).exp());
    }
    let start = if n_geo == 0 { t_min } else { knee };
    let end = if n_tail == 0 { t_max } else { bulk_end };
    let step = (end - start) / (n_uni - 1).max(1) as f64;
    for j in 0..n_uni {
        grid.push(if j + 1 == n_uni {
            end
        } else {
            start + step * j as f64
        });
    }
    let ratio = (t_max / bulk_end).ln();
    for j in 1..=n_tail {
        let t = bulk_end * (ratio * j as f64 / n_tail as f64).exp();
        grid.push(if j == n_tail { t_max } else { t });
    }
    grid
}

impl ExitTimeCdf {
    /// Table with the default resolution for step `h`.
    pub fn for_step(h: f64) -> Result<Self> {
        Self::tabulate(h, DEFAULT_GRID_SIZE, DEFAULT_T_MIN * h, DEFAULT_T_MAX * h)
    }

    pub fn tabulate(h: f64, grid_size: usize, t_min: f64, t_max: f64) -> Result<Self> {
        Self::tabulate_with(h, grid_size, t_min, t_max, CdfMethod::Series)
    }

    pub fn tabulate_with(
        h: f64,
        grid_size: usize,
        t_min: f64,
        t_max: f64,
        method: CdfMethod,
    ) -> Result<Self> {
        require_positive("h", h)?;
        require_positive("t_min", t_min)?;
        if grid_size < 2 {
            return Err(invalid(
                "grid_size",
                format!("need at least 2 points, got {grid_size}"),
            ));
        }
        if !(t_max > t_min) || !t_max.is_finite() {
            return Err(invalid(
                "t_max",
                format!("must exceed t_min = {t_min}, got {t_max}"),
            ));
        }
        let unit = unit_grid(grid_size, t_min / h, t_max / h);
        let mut values = match method {
            CdfMethod::Series => unit.iter().map(|&u| exit_cdf(u, 1.0)).collect::<Vec<_>>(),
            CdfMethod::LaplaceInversion => {
                let inv = TalbotInverter::default();
                unit.iter()
                    .map(|&u| cdf_laplace_inversion_with(inv, u * h, h).map(|v| v.clamp(0.0, 1.0)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        // rounding can leave one-ulp dips in the flat regions
        for j in 1..values.len() {
            if values[j] < values[j - 1] {
                values[j] = values[j - 1];
            }
        }
        if values[0] > MAX_HEAD_MASS {
            return Err(invalid(
                "t_min",
                format!(
                    "F(t_min) = {:e} exceeds {MAX_HEAD_MASS:e}; start the grid earlier",
                    values[0]
                ),
            ));
        }
        let tail_mass = 1.0 - values[values.len() - 1];
        if tail_mass > MAX_TAIL_MASS {
            return Err(Error::TailMass {
                tail_mass,
                threshold: MAX_TAIL_MASS,
            });
        }
        let grid = unit.iter().map(|&u| u * h).collect();
        Ok(Self {
            h,
            grid,
            values,
            tail_mass,
        })
    }

    /// Same table for step `h` by Brownian scaling of the time axis.
    pub fn rescaled(&self, h: f64) -> Result<Self> {
        require_positive("h", h)?;
        let factor = h / self.h;
        Ok(Self {
            h,
            grid: self.grid.iter().map(|&t| t * factor).collect(),
            values: self.values.clone(),
            tail_mass: self.tail_mass,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `F^{-1}(u)`, linear in `(t, F)` between grid points and anchored at
    /// `(0, 0)`. Mass beyond the last grid point is returned as `t_max`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid(
                "u",
                format!("must lie strictly inside (0, 1), got {u}"),
            ));
        }
        Ok(self.sample_unchecked(u))
    }

    #[inline]
    pub(crate) fn sample_unchecked(&self, u: f64) -> f64 {
        let j = self.values.partition_point(|&v| v < u);
        if j == self.values.len() {
            return self.grid[j - 1];
        }
        let (t1, f1) = (self.grid[j], self.values[j]);
        if f1 == u {
            return t1;
        }
        let (t0, f0) = if j == 0 {
            (0.0, 0.0)
        } else {
            (self.grid[j - 1], self.values[j - 1])
        };
        t0 + (u - f0) / (f1 - f0) * (t1 - t0)
    }

    /// `E sigma^p` under the law [`sample`](Self::sample) draws from.
    pub fn moment(&self, p: i32) -> f64 {
        let q = f64::from(p + 1);
        let mut acc = 0.0;
        let (mut t0, mut f0) = (0.0f64, 0.0f64);
        for (&t1, &f1) in self.grid.iter().zip(&self.values) {
            let df = f1 - f0;
            if df > 0.0 {
                acc += df * (t1.powf(q) - t0.powf(q)) / (q * (t1 - t0));
            }
            t0 = t1;
            f0 = f1;
        }
        acc + self.tail_mass * t0.powi(p)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `int_0^inf exp(-lambda t) dF(t)` by the trapezoid rule on
    /// `lambda * int exp(-lambda t) F(t) dt` over the table.
    pub fn laplace_from_table(&self, lambda: f64) -> f64 {
        let g = |t: f64, f: f64| (-lambda * t).exp() * f;
        let mut acc = 0.0;
        let (mut t0, mut v0) = (0.0f64, 0.0f64);
        for (&t1, &f1) in self.grid.iter().zip(&self.values) {
            let v1 = g(t1, f1);
            acc += 0.5 * (v0 + v1) * (t1 - t0);
            t0 = t1;
            v0 = v1;
        }
        // beyond the table F = 1 up to the tail mass
        lambda * acc + (-lambda * t0).exp() * (1.0 - self.tail_mass)
    }

    pub fn sample_taus<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> TauSequence {
        let mut taus = Vec::with_capacity(n);
        let mut acc = 0.0;
        for _ in 0..n {
            let u: f64 = rng.sample(Open01);
            acc += self.sample_unchecked(u);
            taus.push(acc);
        }
        TauSequence { taus, h: self.h }
    }

    /// CSV `t,F`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "F"])?;
        for (t, v) in self.grid.iter().zip(&self.values) {
            w.write_record([format!("{t:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `(t, F)` pairs written by [`ExitTimeCdf::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "F"] {
            return Err(Error::Parse(format!("unexpected header {headers:?}")));
        }
        reader
            .records()
            .map(|r| {
                let r = r?;
                let parse = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
                };
                Ok((parse(&r[0])?, parse(&r[1])?))
            })
            .collect()
    }
}

/// Exit times `tau_1 < ... < tau_n`; `tau_0 = 0` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSequence {
    taus: Vec<f64>,
    h: f64,
}

impl TauSequence {
    pub fn new(taus: Vec<f64>, h: f64) -> Result<Self> {
        require_positive("h", h)?;
        let mut prev = 0.0;
        for (k, &t) in taus.iter().enumerate() {
            if !(t > prev) || !t.is_finite() {
                return Err(invalid(
                    "taus",
                    format!("tau_{} = {t} does not exceed tau_{} = {prev}", k + 1, k),
                ));
            }
            prev = t;
        }
        Ok(Self { taus, h })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.taus
    }

    /// `sigma_k = tau_k - tau_{k-1}`.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.taus
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }
}

/// `p`-quantile of `sigma` for step `h`, by bisection on [`exit_cdf`].
pub fn exit_quantile(p: f64, h: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(
            "p",
            format!("must lie strictly inside (0, 1), got {p}"),
        ));
    }
    require_positive("h", h)?;
    let (mut lo, mut hi) = (0.0, DEFAULT_T_MAX * h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if exit_cdf(mid, h) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Density of `sigma`, used for diagnostics; images form below `h / 4`.
pub fn exit_density(t: f64, h: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 0.25 * h {
        return exit_density_series(t, h);
    }
    // d/dt of 2 sum (-1)^k erfc(c_k / sqrt(t)), c_k = (2k+1) sqrt(h/2)
    let mut sum = 0.0;
    for k in 0..12 {
        let c = (2 * k + 1) as f64 * (h / 2.0).sqrt();
        let term = c * (-c * c / t).exp();
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    2.0 / PI.sqrt() * sum * t.powf(-1.5)
}
