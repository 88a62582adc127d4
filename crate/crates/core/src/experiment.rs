//! Monte Carlo measurement of the L2 errors `E|Y^n_{t_k} - Y_{t_k}|^2` and
//! `E|Z^n_{t_k} - Z_{t_k}|^2`, and their empirical decay rate in `n`.
//!
//! Per step count `n` the lattice is solved once. Each replication then
//! draws signs and exit times, couples them into a Brownian skeleton, reads
//! `(Y^n, Z^n)` along the signs, bridge-samples `B_{t_k}` and compares with
//! the exact solution at `(t_k, B_{t_k})`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::benchmarks::BenchmarkCase;
use crate::coupling::couple;
use crate::error::{invalid, require_positive, Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::exit_time::ExitTimeCdf;
use crate::lattice::RademacherPath;
use crate::rng;
use crate::solver::{evaluate_along_path, solve_with, Scheme};

pub const DEFAULT_N_LIST: [usize; 5] = [50, 100, 200, 400, 800];
pub const DEFAULT_REPLICATIONS: usize = 20_000;
pub const DEFAULT_SEED: u64 = 20_190_527;
/// A fitted Y slope above `-alpha/2 + RATE_FLAG_MARGIN` is flagged in reports.
pub const RATE_FLAG_MARGIN: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemeChoice {
    #[default]
    Explicit,
    Implicit,
}

impl SchemeChoice {
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeChoice::Explicit => Scheme::Explicit,
            SchemeChoice::Implicit => Scheme::DEFAULT_IMPLICIT,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SchemeChoice::Explicit => "explicit",
            SchemeChoice::Implicit => "implicit",
        }
    }
}

impl std::str::FromStr for SchemeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(SchemeChoice::Explicit),
            "implicit" => Ok(SchemeChoice::Implicit),
            other => Err(invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: BenchmarkCase,
    pub horizon: f64,
    /// Evaluation time; the harness uses `t_k` with `k = floor(t_eval / h)`.
    pub t_eval: f64,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub scheme: SchemeChoice,
}

impl ExperimentConfig {
    pub fn new(case: BenchmarkCase) -> Self {
        Self {
            case,
            horizon: 1.0,
            t_eval: 0.5,
            n_list: DEFAULT_N_LIST.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            seed: DEFAULT_SEED,
            scheme: SchemeChoice::Explicit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("horizon", self.horizon)?;
        if !(self.t_eval >= 0.0 && self.t_eval < self.horizon) {
            return Err(invalid(
                "t_eval",
                format!("must lie in [0, {}), got {}", self.horizon, self.t_eval),
            ));
        }
        if self.n_list.is_empty() {
            return Err(invalid("n_list", "is empty"));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(invalid("n_list", format!("every n must be >= 2, got {n}")));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_list", "must be strictly increasing"));
        }
        if self.n_list.len() > u32::MAX as usize {
            return Err(invalid("n_list", "too long"));
        }
        if self.replications == 0 || self.replications > u32::MAX as usize {
            return Err(invalid(
                "M",
                format!("must lie in [1, {}], got {}", u32::MAX, self.replications),
            ));
        }
        Ok(())
    }
}

/// Level index `k` with `t_k <= t_eval < t_{k+1}`, tolerant to the rounding
/// of `t_eval / h` at exact grid times.
pub fn eval_level(t_eval: f64, h: f64, steps: usize) -> usize {
    let k = (t_eval / h * (1.0 + 1e-12)).floor() as usize;
    k.min(steps - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub e_y: f64,
    pub se_y: f64,
    pub e_z: Option<f64>,
    pub se_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorSeries {
    pub rows: Vec<ErrorRow>,
}

/// Instrumentation from one harness run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub lattice_solves: usize,
    pub replications: usize,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = pairwise_sum(xs) / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (m - 1.0);
    (mean, (var / m).sqrt())
}

pub fn run_mc(config: &ExperimentConfig) -> Result<ErrorSeries> {
    run_mc_with(config, Execution::default()).map(|(series, _)| series)
}

pub fn run_mc_with(config: &ExperimentConfig, exec: Execution) -> Result<(ErrorSeries, RunStats)> {
    config.validate()?;
    let exact = config.case.exact(config.horizon)?;
    let unit_cdf = ExitTimeCdf::for_step(1.0)?;
    let mut stats = RunStats::default();
    let mut rows = Vec::with_capacity(config.n_list.len());

    for (block, &n) in config.n_list.iter().enumerate() {
        let problem = config.case.problem(config.horizon, n)?;
        let lattice = solve_with(&problem, config.scheme.scheme(), exec)?;
        stats.lattice_solves += 1;

        let geom = *problem.geometry();
        let h = geom.h();
        let k = eval_level(config.t_eval, h, n);
        let t_k = geom.time(k);
        let cdf = unit_cdf.rescaled(h)?;

        let samples: Vec<Result<(f64, Option<f64>)>> = exec.map_indexed(config.replications, |m| {
            let mut rng = rng::stream(config.seed, block as u32, m as u32);
            let path = RademacherPath::random(n, &mut rng);
            let taus = cdf.sample_taus(n, &mut rng);
            let spath = couple(&path, taus)?;
            let (y_n, z_n) = evaluate_along_path(&lattice, &path, k)?;
            let b = spath.bridge_sample(t_k, &mut rng)?;
            let dy = (y_n - exact.y(t_k, b)).powi(2);
            let dz = exact.z(t_k, b).map(|z| (z_n - z).powi(2));
            Ok((dy, dz))
        });
        stats.replications += samples.len();

        let mut dys = Vec::with_capacity(samples.len());
        let mut dzs = Vec::with_capacity(samples.len());
        for s in samples {
            let (dy, dz) = s?;
            dys.push(dy);
            if let Some(dz) = dz {
                dzs.push(dz);
            }
        }
        let (e_y, se_y) = mean_and_se(&dys);
        let (e_z, se_z) = if exact.has_z() {
            let (e, se) = mean_and_se(&dzs);
            (Some(e), Some(se))
        } else {
            (None, None)
        };
        rows.push(ErrorRow {
            n,
            e_y,
            se_y,
            e_z,
            se_z,
        });
    }
    Ok((ErrorSeries { rows }, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorField {
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> RegressionResult {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    RegressionResult {
        slope,
        intercept,
        r_squared,
    }
}

/// Fit `log E = intercept + slope * log n`.
pub fn regress_loglog(series: &ErrorSeries, field: ErrorField) -> Result<RegressionResult> {
    if series.rows.len() < 3 {
        return Err(invalid(
            "series",
            format!("need at least 3 rows, got {}", series.rows.len()),
        ));
    }
    let mut xs = Vec::with_capacity(series.rows.len());
    let mut ys = Vec::with_capacity(series.rows.len());
    for row in &series.rows {
        let e = match field {
            ErrorField::Y => row.e_y,
            ErrorField::Z => row
                .e_z
                .ok_or_else(|| invalid("series", format!("no Z error at n = {}", row.n)))?,
        };
        if !(e > 0.0) {
            return Err(Error::NonPositiveError { n: row.n, value: e });
        }
        xs.push((row.n as f64).ln());
        ys.push(e.ln());
    }
    Ok(least_squares(&xs, &ys))
}

/// Fitted slopes next to the theoretical reference `-alpha/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSummary {
    pub y: Option<RegressionResult>,
    pub z: Option<RegressionResult>,
    pub reference_slope: f64,
}

impl ConvergenceSummary {
    pub fn from_series(series: &ErrorSeries, alpha: f64) -> Self {
        let has_z = series.rows.iter().all(|r| r.e_z.is_some());
        Self {
            y: regress_loglog(series, ErrorField::Y).ok(),
            z: has_z
                .then(|| regress_loglog(series, ErrorField::Z).ok())
                .flatten(),
            reference_slope: -alpha / 2.0,
        }
    }

    /// The Y rate is markedly slower than the theoretical one.
    pub fn y_flagged(&self) -> bool {
        self.y
            .is_some_and(|r| r.slope > self.reference_slope + RATE_FLAG_MARGIN)
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn write_report<W: Write>(
    mut out: W,
    series: &ErrorSeries,
    summary: &ConvergenceSummary,
    config: Option<&ExperimentConfig>,
) -> Result<()> {
    let mut text = String::new();
    if let Some(c) = config {
        let ns: Vec<String> = c.n_list.iter().map(usize::to_string).collect();
        let _ = writeln!(text, "# case={}", c.case);
        let _ = writeln!(text, "# T={}", c.horizon);
        let _ = writeln!(text, "# t_eval={}", c.t_eval);
        let _ = writeln!(text, "# n={}", ns.join(","));
        let _ = writeln!(text, "# M={}", c.replications);
        let _ = writeln!(text, "# seed={}", c.seed);
        let _ = writeln!(text, "# scheme={}", c.scheme.label());
    }
    text.push_str("n,E_Y,SE_Y,E_Z,SE_Z\n");
    for r in &series.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.n,
            fmt17(r.e_y),
            fmt17(r.se_y),
            fmt_opt(r.e_z),
            fmt_opt(r.se_z)
        );
    }
    for (name, fit) in [("Y", summary.y), ("Z", summary.z)] {
        if let Some(f) = fit {
            let _ = writeln!(text, "# slope_{name}={}", fmt17(f.slope));
            let _ = writeln!(text, "# intercept_{name}={}", fmt17(f.intercept));
            let _ = writeln!(text, "# r2_{name}={}", fmt17(f.r_squared));
        }
    }
    let _ = writeln!(text, "# reference_slope={}", fmt17(summary.reference_slope));
    let verdict = if summary.y_flagged() {
        "above_reference"
    } else {
        "ok"
    };
    let _ = writeln!(text, "# rate_flag_Y={verdict}");
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn emit_csv(
    series: &ErrorSeries,
    summary: &ConvergenceSummary,
    path: &Path,
    config: Option<&ExperimentConfig>,
) -> Result<()> {
    write_report(BufWriter::new(File::create(path)?), series, summary, config)
}

fn parse_field(raw: &str, column: &str) -> Result<Option<f64>> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::Parse(format!("{column} = `{raw}`: {e}")))
}

/// Reads the rows of a report; comment lines are skipped.
pub fn read_report<R: Read>(input: R) -> Result<ErrorSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["n", "E_Y", "SE_Y", "E_Z", "SE_Z"] {
        return Err(Error::Parse(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let n = record[0]
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("n = `{}`: {e}", &record[0])))?;
        let need = |v: Option<f64>, column: &str| {
            v.ok_or_else(|| Error::Parse(format!("missing {column} at n = {n}")))
        };
        rows.push(ErrorRow {
            n,
            e_y: need(parse_field(&record[1], "E_Y")?, "E_Y")?,
            se_y: need(parse_field(&record[2], "SE_Y")?, "SE_Y")?,
            e_z: parse_field(&record[3], "E_Z")?,
            se_z: parse_field(&record[4], "SE_Z")?,
        });
    }
    Ok(ErrorSeries { rows })
}

pub fn parse_csv(path: &Path) -> Result<ErrorSeries> {
    read_report(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> ErrorSeries {
        ErrorSeries {
            rows: DEFAULT_N_LIST
                .iter()
                .map(|&n| ErrorRow {
                    n,
                    e_y: f(n as f64),
                    se_y: 0.0,
                    e_z: None,
                    se_z: None,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_power_law() {
        let r = regress_loglog(&synthetic(|n| 7.0 * n.powf(-0.5)), ErrorField::Y).unwrap();
        assert!((r.slope + 0.5).abs() < 1e-12);
        assert!((r.intercept - 7f64.ln()).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_errors_have_zero_slope() {
        let r = regress_loglog(&synthetic(|_| 0.3), ErrorField::Y).unwrap();
        assert!(r.slope.abs() < 1e-12);
    }

    #[test]
    fn regression_errors() {
        let mut s = synthetic(|n| 1.0 / n);
        assert!(regress_loglog(&s, ErrorField::Z).is_err());
        s.rows[2].e_y = 0.0;
        assert!(matches!(
            regress_loglog(&s, ErrorField::Y),
            Err(Error::NonPositiveError { n: 200, .. })
        ));
        s.rows.truncate(2);
        assert!(regress_loglog(&s, ErrorField::Y).is_err());
    }

    #[test]
    fn eval_level_at_grid_times() {
        for n in [50, 100, 200, 400, 800, 3, 7] {
            let h = 1.0 / n as f64;
            let k = eval_level(0.5, h, n);
            assert_eq!(k, n / 2);
        }
        assert_eq!(eval_level(0.0, 0.1, 10), 0);
        assert_eq!(eval_level(0.999, 0.1, 10), 9);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(BenchmarkCase::Square);
        assert!(c.validate().is_ok());
        c.t_eval = 1.0;
        assert!(c.validate().is_err());
        c.t_eval = 0.5;
        c.n_list = vec![50, 1];
        assert!(c.validate().is_err());
        c.n_list = vec![100, 50, 200];
        assert!(c.validate().is_err());
        c.n_list = vec![50];
        c.replications = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn report_format() {
        let mut s = synthetic(|n| 2.0 / n.sqrt());
        s.rows[0].e_z = Some(0.25);
        s.rows[0].se_z = Some(0.01);
        let summary = ConvergenceSummary::from_series(&s, 1.0);
        assert!(summary.z.is_none());
        let mut buf = Vec::new();
        let cfg = ExperimentConfig::new(BenchmarkCase::Square);
        write_report(&mut buf, &s, &summary, Some(&cfg)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\nn,E_Y,SE_Y,E_Z,SE_Z\n"));
        assert!(text.contains("# slope_Y="));
        assert!(text.contains("# reference_slope=-5.0000000000000000e-1"));
        assert!(text.contains("# rate_flag_Y=ok"));
        assert!(text.contains("# case=square"));
        // absent Z is an empty field
        assert!(text.contains(&format!("100,{},{},,\n", fmt17(0.2), fmt17(0.0))));
        assert_eq!(read_report(text.as_bytes()).unwrap(), s);
    }

    #[test]
    fn flag_on_slow_rate() {
        let s = synthetic(|n| n.powf(-0.2));
        let summary = ConvergenceSummary::from_series(&s, 1.0);
        assert!(summary.y_flagged());
        let mut buf = Vec::new();
        write_report(&mut buf, &s, &summary, None).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .contains("# rate_flag_Y=above_reference"));
    }

    #[test]
    fn malformed_reports() {
        assert!(read_report("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_report("n,E_Y,SE_Y,E_Z,SE_Z\n10,x,1,,\n".as_bytes()).is_err());
        assert!(read_report("n,E_Y,SE_Y,E_Z,SE_Z\n10,,1,,\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn report_roundtrip(
            rows in proptest::collection::vec(
                (2usize..10_000, 1e-300f64..1e300, 0.0f64..1e3, proptest::option::of(0.0f64..1e6)),
                0..8,
            )
        ) {
            let series = ErrorSeries {
                rows: rows
                    .into_iter()
                    .map(|(n, e, se, z)| ErrorRow { n, e_y: e, se_y: se, e_z: z, se_z: z.map(|v| v / 7.0) })
                    .collect(),
            };
            let summary = ConvergenceSummary::from_series(&series, 0.5);
            let mut buf = Vec::new();
            write_report(&mut buf, &series, &summary, None).unwrap();
            prop_assert_eq!(read_report(buf.as_slice()).unwrap(), series);
        }
    }
}
