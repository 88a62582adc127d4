//! Exact solutions of the three reference problems, all with driver
//! `f(y, z) = y + z`. The associated PDE is `u_t + u_xx / 2 + u + u_x = 0`
//! with `Y_t = u(t, B_t)` and `Z_t = u_x(t, B_t)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, require_positive, Error, Result};
use crate::quadrature::GaussHermite;
use crate::solver::BsdeProblem;

pub const DEFAULT_QUAD_ORDER: usize = 64;
pub const MIN_QUAD_ORDER: usize = 16;

type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkCase {
    /// `g(x) = exp(T + x)`
    Exp,
    /// `g(x) = x^2`
    Square,
    /// `g(x) = sqrt(|x|)`
    Sqrt,
}

impl BenchmarkCase {
    pub const ALL: [BenchmarkCase; 3] = [
        BenchmarkCase::Exp,
        BenchmarkCase::Square,
        BenchmarkCase::Sqrt,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BenchmarkCase::Exp => "exp",
            BenchmarkCase::Square => "square",
            BenchmarkCase::Sqrt => "sqrt",
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            BenchmarkCase::Exp | BenchmarkCase::Square => 1.0,
            BenchmarkCase::Sqrt => 0.5,
        }
    }

    pub fn terminal(self, horizon: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone + 'static {
        move |x: f64| match self {
            BenchmarkCase::Exp => (horizon + x).exp(),
            BenchmarkCase::Square => x * x,
            BenchmarkCase::Sqrt => x.abs().sqrt(),
        }
    }

    pub fn problem(self, horizon: f64, steps: usize) -> Result<BsdeProblem> {
        let p = BsdeProblem::new(horizon, steps, self.terminal(horizon), linear_driver)?
            .with_holder(self.alpha())?
            .with_lipschitz(1.0)?;
        match self {
            BenchmarkCase::Exp => Ok(p),
            BenchmarkCase::Square => p.with_growth_order(1.0),
            BenchmarkCase::Sqrt => p.with_growth_order(0.0),
        }
    }

    pub fn exact(self, horizon: f64) -> Result<ExactSolution> {
        match self {
            BenchmarkCase::Exp => exact_case_exp(horizon),
            BenchmarkCase::Square => exact_case_square(horizon),
            BenchmarkCase::Sqrt => exact_case_sqrt(horizon, DEFAULT_QUAD_ORDER),
        }
    }
}

impl fmt::Display for BenchmarkCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BenchmarkCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(BenchmarkCase::Exp),
            "square" => Ok(BenchmarkCase::Square),
            "sqrt" => Ok(BenchmarkCase::Sqrt),
            other => Err(invalid(
                "case",
                format!("unknown case `{other}`; expected exp, square or sqrt"),
            )),
        }
    }
}

pub fn linear_driver(_t: f64, _x: f64, y: f64, z: f64) -> f64 {
    y + z
}

#[derive(Clone)]
pub struct ExactSolution {
    case: BenchmarkCase,
    horizon: f64,
    y_fn: Field,
    z_fn: Option<Field>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("case", &self.case)
            .field("horizon", &self.horizon)
            .field("has_z", &self.z_fn.is_some())
            .finish()
    }
}

impl ExactSolution {
    pub fn case(&self) -> BenchmarkCase {
        self.case
    }

    pub fn label(&self) -> &'static str {
        self.case.label()
    }

    pub fn alpha(&self) -> f64 {
        self.case.alpha()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `exp(T + x)` grows too fast for the polynomial-growth Hölder
    /// assumption; it is only locally Lipschitz.
    pub fn out_of_hypothesis(&self) -> bool {
        self.case == BenchmarkCase::Exp
    }

    pub fn has_z(&self) -> bool {
        self.z_fn.is_some()
    }

    pub fn y(&self, t: f64, b: f64) -> f64 {
        (self.y_fn)(t, b)
    }

    pub fn z(&self, t: f64, b: f64) -> Option<f64> {
        self.z_fn.as_ref().map(|z| z(t, b))
    }
}

/// `Y_t = exp(T + B_t + 5/2 (T - t))`, `Z_t = Y_t`.
pub fn exact_case_exp(horizon: f64) -> Result<ExactSolution> {
    require_positive("horizon", horizon)?;
    let y: Field = Arc::new(move |t, b| (horizon + b + 2.5 * (horizon - t)).exp());
    Ok(ExactSolution {
        case: BenchmarkCase::Exp,
        horizon,
        z_fn: Some(y.clone()),
        y_fn: y,
    })
}

/// `Y_t = e^s ((B_t + s)^2 + s)`, `Z_t = 2 e^s (B_t + s)` with `s = T - t`.
pub fn exact_case_square(horizon: f64) -> Result<ExactSolution> {
    require_positive("horizon", horizon)?;
    Ok(ExactSolution {
        case: BenchmarkCase::Square,
        horizon,
        y_fn: Arc::new(move |t, b| {
            let s = horizon - t;
            s.exp() * ((b + s).powi(2) + s)
        }),
        z_fn: Some(Arc::new(move |t, b| {
            let s = horizon - t;
            2.0 * s.exp() * (b + s)
        })),
    })
}

/// Standardised kink distances beyond which the plain rule is already exact
/// to ~1e-10 and the substituted integrand becomes too narrow.
const KINK_SWITCH: f64 = 5.75;
/// Scale of the whole-line rule in the substituted variable.
const SUBST_SCALE: f64 = 0.5;

/// `E sqrt|mu + sigma Z|` for standard normal `Z`.
///
/// The kink at `z0 = -mu / sigma` ruins the polynomial accuracy of a plain
/// Gauss–Hermite rule. Folding the integral at the kink and substituting
/// `u = w^2` gives
/// `sqrt(sigma / 2 pi) int w^2 (exp(-(w^2 - z0)^2 / 2) + exp(-(w^2 + z0)^2 / 2)) dw`,
/// whose integrand is entire.
pub fn expected_sqrt_abs(rule: &GaussHermite, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.abs().sqrt();
    }
    let z0 = -mu / sigma;
    if z0.abs() > KINK_SWITCH {
        return rule.expect_normal(mu, sigma, |x| x.abs().sqrt());
    }
    let integral = rule.integrate_line(SUBST_SCALE, |w| {
        let w2 = w * w;
        w2 * ((-0.5 * (w2 - z0).powi(2)).exp() + (-0.5 * (w2 + z0).powi(2)).exp())
    });
    (sigma / (2.0 * std::f64::consts::PI)).sqrt() * integral
}

/// `Y_t = e^{s/2} E[sqrt|B_t + W| e^W]` with `W ~ N(0, s)`, `s = T - t`.
///
/// The exponential tilt turns this into `e^s E sqrt|B_t + s + W|`, evaluated
/// by [`expected_sqrt_abs`]. No closed form for `Z` is used.
pub fn exact_case_sqrt(horizon: f64, quad_order: usize) -> Result<ExactSolution> {
    require_positive("horizon", horizon)?;
    if quad_order < MIN_QUAD_ORDER {
        return Err(invalid(
            "quad_order",
            format!("must be at least {MIN_QUAD_ORDER}, got {quad_order}"),
        ));
    }
    let rule = GaussHermite::new(quad_order)?;
    Ok(ExactSolution {
        case: BenchmarkCase::Sqrt,
        horizon,
        y_fn: Arc::new(move |t, b| {
            let s = horizon - t;
            if s <= 0.0 {
                return b.abs().sqrt();
            }
            s.exp() * expected_sqrt_abs(&rule, b + s, s.sqrt())
        }),
        z_fn: None,
    })
}

/// `max |Y(T, b) - g(b)|` over `grid`.
pub fn verify_terminal<G: Fn(f64) -> f64>(solution: &ExactSolution, g: G, grid: &[f64]) -> f64 {
    let t = solution.horizon();
    grid.iter()
        .map(|&b| (solution.y(t, b) - g(b)).abs())
        .fold(0.0, f64::max)
}

/// Tolerance applied to [`verify_terminal`].
pub fn terminal_tolerance(case: BenchmarkCase) -> f64 {
    match case {
        BenchmarkCase::Sqrt => 1e-7,
        _ => 1e-10,
    }
}

/// 33 points evenly spread over `[-3 sqrt(T), 3 sqrt(T)]`.
pub fn terminal_grid(horizon: f64) -> Vec<f64> {
    let r = 3.0 * horizon.sqrt();
    (0..33).map(|j| -r + 2.0 * r * j as f64 / 32.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
        (f(x + step) - f(x - step)) / (2.0 * step)
    }

    #[test]
    fn parse_and_display() {
        for c in BenchmarkCase::ALL {
            assert_eq!(c.label().parse::<BenchmarkCase>().unwrap(), c);
        }
        assert!("cube".parse::<BenchmarkCase>().is_err());
    }

    #[test]
    fn terminal_consistency() {
        for c in BenchmarkCase::ALL {
            for horizon in [0.5, 1.0, 2.0] {
                let sol = c.exact(horizon).unwrap();
                let err = verify_terminal(&sol, c.terminal(horizon), &terminal_grid(horizon));
                assert!(err <= terminal_tolerance(c), "{c} T={horizon}: {err}");
            }
        }
    }

    #[test]
    fn root_values() {
        let e = exact_case_exp(1.0).unwrap();
        assert!((e.y(0.0, 0.0) - 3.5f64.exp()).abs() < 1e-12);
        assert!((e.y(0.0, 0.0) - 33.115_451_958_692_31).abs() < 1e-9);
        let s = exact_case_square(1.0).unwrap();
        assert!((s.y(0.0, 0.0) - 2.0 * std::f64::consts::E).abs() < 1e-12);
        assert!(exact_case_exp(0.0).is_err());
        assert!(exact_case_sqrt(1.0, 8).is_err());
        assert!(!exact_case_sqrt(1.0, 16).unwrap().has_z());
        assert!(e.out_of_hypothesis() && !s.out_of_hypothesis());
    }

    #[test]
    fn z_is_space_derivative() {
        for c in [BenchmarkCase::Exp, BenchmarkCase::Square] {
            let sol = c.exact(1.0).unwrap();
            for &t in &[0.0, 0.3, 0.9] {
                for &b in &[-1.5, -0.2, 0.0, 0.7, 2.0] {
                    let fd = central_diff(|x| sol.y(t, x), b, 1e-5);
                    let z = sol.z(t, b).unwrap();
                    assert!(
                        ((fd - z) / z.abs().max(1.0)).abs() <= 1e-8,
                        "{c} ({t}, {b}): {fd} vs {z}"
                    );
                }
            }
        }
    }

    #[test]
    fn square_case_solves_pde() {
        let sol = exact_case_square(1.0).unwrap();
        let d = 1e-4;
        for &t in &[0.1, 0.5, 0.8] {
            for &b in &[-1.0, 0.0, 0.4, 1.5] {
                let u = |t: f64, x: f64| sol.y(t, x);
                let u_t = (u(t + d, b) - u(t - d, b)) / (2.0 * d);
                let u_x = (u(t, b + d) - u(t, b - d)) / (2.0 * d);
                let u_xx = (u(t, b + d) - 2.0 * u(t, b) + u(t, b - d)) / (d * d);
                let residual = u_t + 0.5 * u_xx + u(t, b) + u_x;
                assert!(residual.abs() <= 1e-4, "({t}, {b}): {residual}");
            }
        }
    }

    #[test]
    fn sqrt_case_self_convergence() {
        let a = exact_case_sqrt(1.0, 64).unwrap();
        let b = exact_case_sqrt(1.0, 128).unwrap();
        assert!((a.y(0.0, 0.0) - b.y(0.0, 0.0)).abs() <= 1e-8);
        for &t in &[0.0, 0.5, 0.99, 0.999_999] {
            for &x in &[-3.0, -1.2, -0.5, 0.0, 0.1, 2.0, 4.0] {
                let (ya, yb) = (a.y(t, x), b.y(t, x));
                assert!(
                    (ya - yb).abs() <= 1e-8 * yb.max(1.0),
                    "({t}, {x}): {ya} vs {yb}"
                );
            }
        }
    }

    #[test]
    fn sqrt_kernel_closed_form_at_zero_mean() {
        // E|Z|^{1/2} = 2^{1/4} Gamma(3/4) / sqrt(pi)
        let rule = GaussHermite::new(64).unwrap();
        let want = 2f64.powf(0.25) * 1.225_416_702_465_177_6 / std::f64::consts::PI.sqrt();
        assert!((expected_sqrt_abs(&rule, 0.0, 1.0) - want).abs() < 1e-14);
        assert!((expected_sqrt_abs(&rule, 0.0, 4.0) - 2.0 * want).abs() < 1e-14);
        assert_eq!(expected_sqrt_abs(&rule, -9.0, 0.0), 3.0);
    }

    #[test]
    fn sqrt_kernel_continuous_across_switch() {
        let rule = GaussHermite::new(64).unwrap();
        let below = expected_sqrt_abs(&rule, KINK_SWITCH - 1e-9, 1.0);
        let above = expected_sqrt_abs(&rule, KINK_SWITCH + 1e-9, 1.0);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn problems_carry_metadata() {
        let p = BenchmarkCase::Sqrt.problem(1.0, 10).unwrap();
        assert_eq!(p.alpha(), 0.5);
        assert_eq!(p.lipschitz(), Some(1.0));
        assert_eq!(p.terminal(-4.0), 2.0);
        assert_eq!(p.generator(0.0, 0.0, 2.0, 3.0), 5.0);
    }
}
