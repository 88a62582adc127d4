//! Backward induction for `(Y^n, Z^n)` on the recombining lattice.
//!
//! Two schemes are provided. The explicit scheme evaluates the generator at
//! the successor values `Y^n_{t_{k+1}}` and is what the Monte Carlo harness
//! uses. The implicit scheme evaluates it at `Y^n_{t_k}` itself and solves
//! the resulting scalar fixed point per node by Picard iteration.
//!
//! In both, the generator is called as `f(t_{k+1}, x_k, y, z_k)`: time of the
//! next level, state of the current node.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, require_positive, Error, Result};
use crate::exec::Execution;
use crate::lattice::{LatticeGeometry, RademacherPath, ENUMERATION_CAP};

pub type TerminalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `f(t, x, y, z)`.
pub type GeneratorFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

/// Levels at least this wide are swept with the configured [`Execution`].
const PARALLEL_LEVEL_MIN: usize = 4096;

#[derive(Clone)]
pub struct BsdeProblem {
    geom: LatticeGeometry,
    horizon: f64,
    terminal: TerminalFn,
    generator: GeneratorFn,
    alpha: f64,
    growth_order: f64,
    lipschitz: Option<f64>,
}

impl fmt::Debug for BsdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BsdeProblem")
            .field("horizon", &self.horizon)
            .field("steps", &self.geom.steps())
            .field("alpha", &self.alpha)
            .field("growth_order", &self.growth_order)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl BsdeProblem {
    /// A problem with Hölder exponent 1, growth order 0 and no declared
    /// Lipschitz constant; refine with the `with_*` builders.
    pub fn new<G, F>(horizon: f64, steps: usize, terminal: G, generator: F) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        F: Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Ok(Self {
            geom: LatticeGeometry::new(horizon, steps)?,
            horizon,
            terminal: Arc::new(terminal),
            generator: Arc::new(generator),
            alpha: 1.0,
            growth_order: 0.0,
            lipschitz: None,
        })
    }

    pub fn with_holder(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_growth_order(mut self, p0: f64) -> Result<Self> {
        if !(p0 >= 0.0 && p0.is_finite()) {
            return Err(invalid("p0", format!("must be finite and >= 0, got {p0}")));
        }
        self.growth_order = p0;
        Ok(self)
    }

    pub fn with_lipschitz(mut self, lip_f: f64) -> Result<Self> {
        if !(lip_f >= 0.0 && lip_f.is_finite()) {
            return Err(invalid(
                "lip_f",
                format!("must be finite and >= 0, got {lip_f}"),
            ));
        }
        self.lipschitz = Some(lip_f);
        Ok(self)
    }

    /// Same problem on a lattice with `steps` steps.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let mut out = self.clone();
        out.geom = LatticeGeometry::new(self.horizon, steps)?;
        Ok(out)
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geom
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.geom.steps()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn growth_order(&self) -> f64 {
        self.growth_order
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    #[inline]
    pub fn terminal(&self, x: f64) -> f64 {
        (self.terminal)(x)
    }

    #[inline]
    pub fn generator(&self, t: f64, x: f64, y: f64, z: f64) -> f64 {
        (self.generator)(t, x, y, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Explicit,
    Implicit { tol: f64, max_iter: usize },
}

impl Scheme {
    pub const DEFAULT_IMPLICIT: Scheme = Scheme::Implicit {
        tol: 1e-14,
        max_iter: 200,
    };
}

/// `y[k]` holds the `k + 1` values of level `k` for `k = 0..=n`; `z[k]` the
/// same for `k = 0..n`.
#[derive(Debug, Clone)]
pub struct SolutionLattice {
    geom: LatticeGeometry,
    scheme: Scheme,
    y: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

impl SolutionLattice {
    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geom
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn y(&self, k: usize, i: usize) -> f64 {
        self.y[k][i]
    }

    pub fn z(&self, k: usize, i: usize) -> f64 {
        self.z[k][i]
    }

    pub fn y_level(&self, k: usize) -> &[f64] {
        &self.y[k]
    }

    pub fn z_level(&self, k: usize) -> &[f64] {
        &self.z[k]
    }

    /// `(y[0][0], z[0][0])`.
    pub fn root(&self) -> (f64, f64) {
        (self.y[0][0], self.z[0][0])
    }
}

#[inline]
fn explicit_node(p: &BsdeProblem, k: usize, i: usize, up: f64, down: f64) -> (f64, f64) {
    let g = &p.geom;
    let x = g.coord(k, i);
    let t_next = g.time(k + 1);
    let h = g.h();
    let z = (up - down) / (2.0 * g.sqrt_h());
    let drift = 0.5 * (p.generator(t_next, x, up, z) + p.generator(t_next, x, down, z));
    (0.5 * (up + down) + h * drift, z)
}

/// Picard iteration for `y = (up + down) / 2 + h f(t_{k+1}, x, y, z)`, stopped
/// once successive iterates differ by at most `tol * max(1, |y|)`.
/// On failure returns the number of iterations spent.
#[inline]
fn implicit_node(
    p: &BsdeProblem,
    k: usize,
    i: usize,
    up: f64,
    down: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(f64, f64), usize> {
    let g = &p.geom;
    let x = g.coord(k, i);
    let t_next = g.time(k + 1);
    let h = g.h();
    let z = (up - down) / (2.0 * g.sqrt_h());
    let mean = 0.5 * (up + down);
    let mut y = mean;
    for _ in 0..max_iter {
        let next = mean + h * p.generator(t_next, x, y, z);
        if !next.is_finite() {
            break;
        }
        if (next - y).abs() <= tol * next.abs().max(1.0) {
            return Ok((next, z));
        }
        y = next;
    }
    Err(max_iter)
}

fn check_implicit(p: &BsdeProblem, tol: f64) -> Result<()> {
    require_positive("tol", tol)?;
    if let Some(l) = p.lipschitz {
        let q = p.geom.h() * l;
        if q >= 1.0 {
            return Err(Error::NotContractive(q));
        }
    }
    Ok(())
}

fn terminal_level(p: &BsdeProblem) -> Vec<f64> {
    let n = p.steps();
    (0..=n).map(|i| p.terminal(p.geom.coord(n, i))).collect()
}

/// One backward step from `next` (level `k + 1`) to the `(y, z)` values of level `k`.
fn sweep_level(
    p: &BsdeProblem,
    scheme: Scheme,
    exec: Execution,
    k: usize,
    next: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let width = k + 1;
    let exec = if width >= PARALLEL_LEVEL_MIN {
        exec
    } else {
        Execution::Sequential
    };
    match scheme {
        Scheme::Explicit => {
            let nodes = exec.map_indexed(width, |i| explicit_node(p, k, i, next[i + 1], next[i]));
            Ok(nodes.into_iter().unzip())
        }
        Scheme::Implicit { tol, max_iter } => {
            let nodes = exec.map_indexed(width, |i| {
                implicit_node(p, k, i, next[i + 1], next[i], tol, max_iter)
            });
            let mut ys = Vec::with_capacity(width);
            let mut zs = Vec::with_capacity(width);
            for (i, node) in nodes.into_iter().enumerate() {
                match node {
                    Ok((y, z)) => {
                        ys.push(y);
                        zs.push(z);
                    }
                    Err(iterations) => {
                        return Err(Error::NoConvergence {
                            level: k,
                            node: i,
                            iterations,
                        })
                    }
                }
            }
            Ok((ys, zs))
        }
    }
}

pub fn solve_with(
    problem: &BsdeProblem,
    scheme: Scheme,
    exec: Execution,
) -> Result<SolutionLattice> {
    if let Scheme::Implicit { tol, .. } = scheme {
        check_implicit(problem, tol)?;
    }
    let n = problem.steps();
    let mut y = vec![Vec::new(); n + 1];
    let mut z = vec![Vec::new(); n];
    y[n] = terminal_level(problem);
    for k in (0..n).rev() {
        let (yk, zk) = sweep_level(problem, scheme, exec, k, &y[k + 1])?;
        y[k] = yk;
        z[k] = zk;
    }
    Ok(SolutionLattice {
        geom: problem.geom,
        scheme,
        y,
        z,
    })
}

pub fn solve(problem: &BsdeProblem, scheme: Scheme) -> Result<SolutionLattice> {
    solve_with(problem, scheme, Execution::default())
}

pub fn solve_explicit(problem: &BsdeProblem) -> SolutionLattice {
    solve(problem, Scheme::Explicit).expect("explicit sweep has no failure mode")
}

pub fn solve_implicit(problem: &BsdeProblem, tol: f64, max_iter: usize) -> Result<SolutionLattice> {
    solve(problem, Scheme::Implicit { tol, max_iter })
}

/// `(y[0][0], z[0][0])` keeping only two levels in memory.
pub fn solve_root(problem: &BsdeProblem, scheme: Scheme) -> Result<(f64, f64)> {
    if let Scheme::Implicit { tol, .. } = scheme {
        check_implicit(problem, tol)?;
    }
    let n = problem.steps();
    let mut level = terminal_level(problem);
    let mut z_root = f64::NAN;
    for k in (0..n).rev() {
        let (yk, zk) = sweep_level(problem, scheme, Execution::default(), k, &level)?;
        level = yk;
        if k == 0 {
            z_root = zk[0];
        }
    }
    Ok((level[0], z_root))
}

/// `(Y^n_{t_k}, Z^n_{t_k})` at the node reached by the first `k` steps of `path`.
pub fn evaluate_along_path(
    solution: &SolutionLattice,
    path: &RademacherPath,
    k: usize,
) -> Result<(f64, f64)> {
    let n = solution.geom.steps();
    if k >= n {
        return Err(Error::IndexOutOfRange(format!(
            "level {k} has no Z value on a lattice of {n} steps"
        )));
    }
    if path.len() < k {
        return Err(Error::IndexOutOfRange(format!(
            "path of {} steps cannot reach level {k}",
            path.len()
        )));
    }
    let i = path.up_count(k);
    Ok((solution.y[k][i], solution.z[k][i]))
}

/// `Z^n` at node `(k, i)` from the discrete Malliavin-weight representation,
/// by exhaustive enumeration of the `2^(n-k)` continuations:
///
/// `E_k[g(B_T) (B_T - B_k)/(T - t_k)] + h Σ_{m>k} E_k[f_m (B_m - B_k)/(t_m - t_k)]`
///
/// where `f_m` is the generator term the solution's scheme used at level `m`.
/// For the explicit scheme that is `f(t_{m+1}, x_m, Y_{m+1}, Z_m)`, for the
/// implicit one `f(t_{m+1}, x_m, Y_m, Z_m)`.
pub fn z_by_representation(
    problem: &BsdeProblem,
    solution: &SolutionLattice,
    k: usize,
    i: usize,
) -> Result<f64> {
    let geom = solution.geom;
    let n = geom.steps();
    if problem.steps() != n {
        return Err(invalid(
            "solution",
            format!("lattice has {n} steps, problem has {}", problem.steps()),
        ));
    }
    if k >= n || i > k {
        return Err(Error::IndexOutOfRange(format!(
            "node ({k}, {i}) has no Z value on a lattice of {n} steps"
        )));
    }
    let rest = n - k;
    let h = geom.h();
    let explicit = matches!(solution.scheme, Scheme::Explicit);
    let x_k = geom.coord(k, i);

    let mut total = 0.0;
    for tail in crate::lattice::enumerate_paths_capped(rest, ENUMERATION_CAP)? {
        let mut node = i;
        let mut acc = 0.0;
        for (j, &s) in tail.signs().iter().enumerate() {
            let m = k + j;
            if m > k {
                let x_m = geom.coord(m, node);
                let y = if explicit {
                    solution.y[m + 1][node + usize::from(s == 1)]
                } else {
                    solution.y[m][node]
                };
                let f = problem.generator(geom.time(m + 1), x_m, y, solution.z[m][node]);
                acc += h * f * (x_m - x_k) / ((m - k) as f64 * h);
            }
            if s == 1 {
                node += 1;
            }
        }
        let x_n = geom.coord(n, node);
        acc += problem.terminal(x_n) * (x_n - x_k) / (rest as f64 * h);
        total += acc;
    }
    Ok(total / (1u64 << rest) as f64)
}
