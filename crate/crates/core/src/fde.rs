//! One-dimensional fractional diffusion on [0, 1]: linear finite elements in
//! space, Prony recursion or Gao (L1) weights in time.
//!
//! The benchmark problem is D_t^α u − u_xx = f with the manufactured solution
//! u = (x − 1)⁴(e^{−x}t^{3+α} + x⁴).

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::caputo::{gamma, UniformGrid};
use crate::cumulative::gao_weights;
use crate::error::{invalid, Error, Result};
use crate::prony::{consolidated_gamma, init_state, PronySeries};
use crate::quad::gauss_legendre;

/// Source term f(x, t; α).
pub type SourceFn = fn(f64, f64, f64) -> f64;
/// Boundary value g(t; α).
pub type BoundaryFn = fn(f64, f64) -> f64;
/// Initial value u₀(x).
pub type InitialFn = fn(f64) -> f64;
/// Exact solution u(x, t; α).
pub type ExactFn = fn(f64, f64, f64) -> f64;

/// A fractional diffusion problem on [0, 1] over t ∈ [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct FdeProblem {
    pub alpha: f64,
    pub nx: usize,
    pub grid: UniformGrid,
    pub source: SourceFn,
    pub left: BoundaryFn,
    pub right: BoundaryFn,
    pub initial: InitialFn,
    /// Known solution; when present solves report the max nodal error.
    pub exact: Option<ExactFn>,
}

/// f = D_t^α u − u_xx for the manufactured solution.
pub fn benchmark_source(x: f64, t: f64, a: f64) -> f64 {
    let xm = x - 1.0;
    xm * xm * (-x).exp() * t.powi(3) * (gamma(4.0 + a) * xm * xm / 6.0 - (21.0 - 10.0 * x + x * x) * t.powf(a))
        - 4.0 * x * x * xm * xm * (14.0 * x * x - 14.0 * x + 3.0)
}

fn benchmark_left(t: f64, a: f64) -> f64 {
    t.powf(3.0 + a)
}

pub fn zero_boundary(_: f64, _: f64) -> f64 {
    0.0
}

fn benchmark_initial(x: f64) -> f64 {
    (x * (x - 1.0)).powi(4)
}

/// u = (x − 1)⁴(e^{−x}t^{3+α} + x⁴).
pub fn analytic_solution(x: f64, t: f64, alpha: f64) -> f64 {
    (x - 1.0).powi(4) * ((-x).exp() * t.powf(3.0 + alpha) + x.powi(4))
}

impl FdeProblem {
    /// The manufactured-solution benchmark with `nx` elements and `nt` steps on [0, 1].
    pub fn benchmark(alpha: f64, nx: usize, nt: usize) -> Result<Self> {
        let mut p = Self::with_data(alpha, nx, nt, benchmark_source, benchmark_left, zero_boundary, benchmark_initial)?;
        p.exact = Some(analytic_solution);
        Ok(p)
    }

    pub fn with_data(
        alpha: f64,
        nx: usize,
        nt: usize,
        source: SourceFn,
        left: BoundaryFn,
        right: BoundaryFn,
        initial: InitialFn,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        if nx < 2 {
            return invalid("need at least two elements");
        }
        if nt == 0 {
            return invalid("need at least one time step");
        }
        let grid = UniformGrid::new(1.0 / nt as f64, nt)?;
        Ok(Self { alpha, nx, grid, source, left, right, initial, exact: None })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.nx).map(|i| i as f64 * self.h()).collect()
    }

    /// Load vector ∫f(·, t)φ_i by two-point Gauss per element.
    fn load(&self, t: f64, out: &mut [f64]) {
        let h = self.h();
        let g = 0.5 / 3f64.sqrt();
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in 0..self.nx {
            let x0 = e as f64 * h;
            for xi in [0.5 - g, 0.5 + g] {
                let w = 0.5 * h * (self.source)(x0 + xi * h, t, self.alpha);
                out[e] += w * (1.0 - xi);
                out[e + 1] += w * xi;
            }
        }
    }
}

/// Tridiagonal matrix; row i reads lower[i]·u_{i−1} + diag[i]·u_i + upper[i]·u_{i+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let lin = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(x, y)| a * x + b * y).collect();
        Self { lower: lin(&self.lower, &other.lower), diag: lin(&self.diag, &other.diag), upper: lin(&self.upper, &other.upper) }
    }

    /// Replaces the given rows by identity rows.
    pub fn pin_rows(&mut self, rows: &[usize]) {
        for &i in rows {
            self.lower[i] = 0.0;
            self.upper[i] = 0.0;
            self.diag[i] = 1.0;
        }
    }

    /// Thomas-algorithm factorization (no pivoting).
    pub fn factor(&self) -> Result<ThomasFactor> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut inv = vec![0.0; n];
        for i in 0..n {
            let d = self.diag[i] - if i > 0 { self.lower[i] * c[i - 1] } else { 0.0 };
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Singular(i));
            }
            inv[i] = 1.0 / d;
            c[i] = self.upper[i] * inv[i];
        }
        Ok(ThomasFactor { lower: self.lower.clone(), c, inv })
    }
}

#[derive(Debug, Clone)]
pub struct ThomasFactor {
    lower: Vec<f64>,
    c: Vec<f64>,
    inv: Vec<f64>,
}

impl ThomasFactor {
    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] *= self.inv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c[i] * rhs[i + 1];
        }
    }
}

/// Consistent mass (h/6)[1, 4, 1] and stiffness (1/h)[−1, 2, −1] on `nx` uniform elements.
pub fn assemble_fe(nx: usize) -> Result<(Tridiagonal, Tridiagonal)> {
    if nx < 2 {
        return invalid("need at least two elements");
    }
    let n = nx + 1;
    let h = 1.0 / nx as f64;
    let band = |off: f64, mid: f64, end: f64| {
        let mut diag = vec![mid; n];
        diag[0] = end;
        diag[n - 1] = end;
        let mut lower = vec![off; n];
        lower[0] = 0.0;
        let mut upper = vec![off; n];
        upper[n - 1] = 0.0;
        Tridiagonal { lower, diag, upper }
    };
    Ok((band(h / 6.0, 4.0 * h / 6.0, 2.0 * h / 6.0), band(-1.0 / h, 2.0 / h, 1.0 / h)))
}

/// Outcome of one solve.
#[derive(Debug, Clone)]
pub struct FdeSolution {
    /// Nodal values at the final time.
    pub u: Vec<f64>,
    /// Max over nodes and time levels of |u − exact|, when an exact solution is known.
    pub error: f64,
    /// Max over time levels of the L²(0, 1) norm of the FE solution minus the exact one.
    pub error_l2: f64,
    /// Reals held for the time history (Prony memory or Gao history).
    pub history_len: usize,
    pub seconds: f64,
}

/// ‖u_h − exact‖ on [0, 1] for the piecewise-linear u_h, by Gauss rule per element.
fn l2_error(u: &[f64], h: f64, exact: impl Fn(f64) -> f64, gauss: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut s = 0.0;
    for e in 0..u.len() - 1 {
        let x0 = e as f64 * h;
        for (xi, w) in gauss.0.iter().zip(&gauss.1) {
            let r = 0.5 * (xi + 1.0);
            let d = u[e] + r * (u[e + 1] - u[e]) - exact(x0 + r * h);
            s += 0.5 * h * w * d * d;
        }
    }
    s.sqrt()
}

enum Stepper {
    Prony { gamma: f64, state: crate::prony::PronyState },
    Gao { c: f64, a: Vec<f64>, history: Vec<Vec<f64>> },
}

fn solve(problem: &FdeProblem, mut stepper: Stepper) -> Result<FdeSolution> {
    let start = Instant::now();
    let (mass, stiff) = assemble_fe(problem.nx)?;
    let n = problem.nx + 1;
    let coef = match &stepper {
        Stepper::Prony { gamma, .. } => *gamma,
        Stepper::Gao { c, .. } => *c,
    };
    let mut system = mass.combine(coef, &stiff, 1.0);
    system.pin_rows(&[0, n - 1]);
    let lu = system.factor()?;
    let x = problem.nodes();
    let a = problem.alpha;
    let mut u: Vec<f64> = x.iter().map(|&x| (problem.initial)(x)).collect();
    if let Stepper::Prony { state, .. } = &mut stepper {
        state.seed(&u)?;
    }
    if let Stepper::Gao { history, .. } = &mut stepper {
        history.push(u.clone());
    }
    let mut load = vec![0.0; n];
    let mut mem = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut error = 0.0f64;
    let mut error_l2 = 0.0f64;
    let gauss = gauss_legendre(4);
    for step in 1..=problem.grid.steps {
        let t = problem.grid.t(step);
        problem.load(t, &mut load);
        match &mut stepper {
            Stepper::Prony { gamma, state } => {
                // γuⁿ⁻¹ − Σ e_k²q_k
                let kk = state.e.len();
                for i in 0..n {
                    let mut s = *gamma * u[i];
                    for k in 0..kk {
                        s -= state.e[k] * state.e[k] * state.q[k * n + i];
                    }
                    mem[i] = s;
                }
            }
            Stepper::Gao { c, a: w, history } => {
                // c[a_{n−1}u⁰ + Σ_{i=1}^{n−1}(a_{n−i−1} − a_{n−i})uⁱ]
                let m = history.len();
                for (i, v) in mem.iter_mut().enumerate() {
                    *v = w[m - 1] * history[0][i];
                }
                for (i, hist) in history.iter().enumerate().skip(1) {
                    let wi = w[m - i - 1] - w[m - i];
                    for (v, h) in mem.iter_mut().zip(hist) {
                        *v += wi * h;
                    }
                }
                mem.iter_mut().for_each(|v| *v *= *c);
            }
        }
        mass.mul(&mem, &mut scratch);
        for i in 0..n {
            rhs[i] = load[i] + scratch[i];
        }
        rhs[0] = (problem.left)(t, a);
        rhs[n - 1] = (problem.right)(t, a);
        lu.solve(&mut rhs);
        std::mem::swap(&mut u, &mut rhs);
        match &mut stepper {
            Stepper::Prony { state, .. } => state.advance_into(&u, &mut scratch)?,
            Stepper::Gao { history, .. } => history.push(u.clone()),
        }
        if let Some(ex) = problem.exact {
            for (xi, ui) in x.iter().zip(&u) {
                error = error.max((ui - ex(*xi, t, a)).abs());
            }
            error_l2 = error_l2.max(l2_error(&u, problem.h(), |x| ex(x, t, a), &gauss));
        }
    }
    let history_len = match &stepper {
        Stepper::Prony { state, .. } => state.storage_len(),
        Stepper::Gao { history, .. } => history.len() * n,
    };
    Ok(FdeSolution { u, error, error_l2, history_len, seconds: start.elapsed().as_secs_f64() })
}

/// Time stepping with the Prony recursion applied to the FE coefficient vector:
/// (γM + K)uⁿ = Fⁿ + M(γuⁿ⁻¹ − Σ e_k²q_kⁿ⁻¹).
///
/// A normalized series is first scaled to the unit time horizon.
pub fn solve_fde_prony(problem: &FdeProblem, series: &PronySeries) -> Result<FdeSolution> {
    if (series.alpha - problem.alpha).abs() > 1e-12 {
        return invalid(format!("series fitted for alpha {} but problem has {}", series.alpha, problem.alpha));
    }
    let physical = if series.normalized { series.denormalize(problem.grid.horizon())? } else { series.clone() };
    let dt = problem.grid.dt;
    let stepper = Stepper::Prony { gamma: consolidated_gamma(&physical, dt)?, state: init_state(&physical, problem.nx + 1, dt)? };
    solve(problem, stepper)
}

/// Time stepping with the Gao (L1) weights over the full history:
/// (cM + K)uⁿ = Fⁿ + cM[a_{n−1}u⁰ + Σ_{i=1}^{n−1}(a_{n−i−1} − a_{n−i})uⁱ], c = Δt^{−α}/Γ(2−α).
pub fn solve_fde_gao(problem: &FdeProblem) -> Result<FdeSolution> {
    let a = problem.alpha;
    let c = problem.grid.dt.powf(-a) / gamma(2.0 - a);
    let stepper = Stepper::Gao { c, a: gao_weights(a, problem.grid.steps), history: Vec::with_capacity(problem.grid.steps + 1) };
    solve(problem, stepper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Time,
    Space,
}

/// Error measure reported by a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// max over nodes and time levels
    Nodal,
    /// max over time levels of the L²(0, 1) norm
    L2,
}

impl Norm {
    /// Nodal max for time refinement; L² for space refinement, where
    /// nodal values of 1D linear elements are superconvergent.
    pub fn for_axis(axis: Axis) -> Self {
        match axis {
            Axis::Time => Norm::Nodal,
            Axis::Space => Norm::L2,
        }
    }

    pub fn pick(self, s: &FdeSolution) -> f64 {
        match self {
            Norm::Nodal => s.error,
            Norm::L2 => s.error_l2,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FdeMethod {
    Gao,
    Prony(PronySeries),
}

impl FdeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FdeMethod::Gao => "gao",
            FdeMethod::Prony(_) => "prony",
        }
    }

    pub fn terms(&self) -> usize {
        match self {
            FdeMethod::Gao => 0,
            FdeMethod::Prony(s) => s.n_terms,
        }
    }

    pub fn solve(&self, problem: &FdeProblem) -> Result<FdeSolution> {
        match self {
            FdeMethod::Gao => solve_fde_gao(problem),
            FdeMethod::Prony(s) => solve_fde_prony(problem, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub nt: usize,
    pub error: f64,
    /// log₂(E_i/E_{i+1}); absent on the last row.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub alpha: f64,
    pub axis: Axis,
    pub norm: Norm,
    pub method: String,
    pub terms: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }
}

/// log₂ ratios of successive errors, `None` on the last entry.
pub fn log2_rates(errors: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len()).map(|i| errors.get(i + 1).map(|next| (errors[i] / next).log2())).collect()
}

/// Refines `nt` (time axis) or `nx` (space axis) over `refinements`, holding
/// the other resolution at `fixed_other`. Cells run in parallel.
pub fn convergence_study(
    axis: Axis,
    method: &FdeMethod,
    alpha: f64,
    refinements: &[usize],
    fixed_other: usize,
    norm: Norm,
) -> Result<ConvergenceTable> {
    if refinements.len() < 2 {
        return invalid("need at least two refinement levels");
    }
    let cells: Vec<(usize, usize)> = refinements
        .iter()
        .map(|&r| match axis {
            Axis::Time => (fixed_other, r),
            Axis::Space => (r, fixed_other),
        })
        .collect();
    let errors = cells
        .par_iter()
        .map(|&(nx, nt)| method.solve(&FdeProblem::benchmark(alpha, nx, nt)?).map(|s| norm.pick(&s)))
        .collect::<Result<Vec<_>>>()?;
    let rows = cells
        .iter()
        .zip(&errors)
        .zip(log2_rates(&errors))
        .map(|((&(nx, nt), &error), rate)| ConvergenceRow { nx, nt, error, rate })
        .collect();
    Ok(ConvergenceTable { alpha, axis, norm, method: method.name().into(), terms: method.terms(), rows })
}
