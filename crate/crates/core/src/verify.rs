//! Fast self-check of the oracle identities, run by `rwbsde verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::{terminal_grid, terminal_tolerance, verify_terminal, BenchmarkCase};
use crate::coupling::couple;
use crate::exit_time::{cdf_laplace_inversion, cdf_series, ExitTimeCdf};
use crate::lattice::{enumerate_paths, RademacherPath};
use crate::solver::{solve_explicit, z_by_representation, BsdeProblem};
use crate::Result;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, tol: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= tol,
        detail: format!("max deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn enumeration_average() -> Result<CheckOutcome> {
    let g = |x: f64| 0.3 * x.powi(4) - x.powi(3) + 2.0 * x + (x.abs() + 1.0).ln();
    let mut worst = 0.0f64;
    for n in 1..=12 {
        let p = BsdeProblem::new(1.0, n, g, |_, _, _, _| 0.0)?;
        let y0 = solve_explicit(&p).root().0;
        let sqrt_h = p.geometry().sqrt_h();
        let avg = enumerate_paths(n)?
            .map(|path| g(*path.walk_values(sqrt_h).last().unwrap()))
            .sum::<f64>()
            / (1u64 << n) as f64;
        worst = worst.max((y0 - avg).abs());
    }
    Ok(outcome("enumeration oracle (f = 0)", worst, 1e-12))
}

fn z_representation() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for n in [4, 8, 10] {
        let p = BsdeProblem::new(1.0, n, |x| x * x, |_, x: f64, y, z| x.sin() + y - z)?;
        let s = solve_explicit(&p);
        for k in [0, n / 2] {
            for i in 0..=k {
                worst = worst.max((z_by_representation(&p, &s, k, i)? - s.z(k, i)).abs());
            }
        }
    }
    Ok(outcome("Z representation identity", worst, 1e-10))
}

fn exit_time_inversion() -> Result<CheckOutcome> {
    let h = 1.0;
    let mut worst = 0.0f64;
    for j in 0..50 {
        let t = h / 100.0 + (20.0 * h - h / 100.0) * j as f64 / 49.0;
        worst = worst.max((cdf_laplace_inversion(t, h)? - cdf_series(t, h, 50)).abs());
    }
    Ok(outcome(
        "exit-time Laplace inversion vs series",
        worst,
        1e-6,
    ))
}

fn exit_time_mean() -> Result<CheckOutcome> {
    let table = ExitTimeCdf::for_step(1.0)?;
    Ok(outcome(
        "exit-time table mean E sigma = h",
        (table.mean() - 1.0).abs(),
        1e-6,
    ))
}

fn coupling_exact() -> Result<CheckOutcome> {
    let n = 200;
    let h = 1.0 / n as f64;
    let table = ExitTimeCdf::for_step(h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sqrt_h = h.sqrt();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let path = RademacherPath::random(n, &mut rng);
        let s = couple(&path, table.sample_taus(n, &mut rng))?;
        // every skeleton value is an integer multiple of sqrt(h), bit for bit,
        // and consecutive multiples differ by exactly one
        let levels: Vec<f64> = s.skeleton().iter().map(|&b| (b / sqrt_h).round()).collect();
        for (&b, &l) in s.skeleton().iter().zip(&levels) {
            worst = worst.max((b - l * sqrt_h).abs());
        }
        for w in levels.windows(2) {
            worst = worst.max(((w[1] - w[0]).abs() - 1.0).abs());
        }
        let k = rng.random_range(0..=n);
        worst = worst.max((s.skeleton()[k] - path.walk_values(sqrt_h)[k]).abs());
    }
    Ok(outcome("Skorohod skeleton increments", worst, 0.0))
}

fn terminal_consistency() -> Result<Vec<CheckOutcome>> {
    BenchmarkCase::ALL
        .iter()
        .map(|&c| {
            let sol = c.exact(1.0)?;
            let err = verify_terminal(&sol, c.terminal(1.0), &terminal_grid(1.0));
            let name = match c {
                BenchmarkCase::Exp => "terminal consistency (exp)",
                BenchmarkCase::Square => "terminal consistency (square)",
                BenchmarkCase::Sqrt => "terminal consistency (sqrt)",
            };
            Ok(outcome(name, err, terminal_tolerance(c)))
        })
        .collect()
}

pub fn run_all() -> Result<Vec<CheckOutcome>> {
    let mut out = vec![
        enumeration_average()?,
        z_representation()?,
        exit_time_inversion()?,
        exit_time_mean()?,
        coupling_exact()?,
    ];
    out.extend(terminal_consistency()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
