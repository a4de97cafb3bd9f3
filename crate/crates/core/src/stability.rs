//! Energy stability of the Prony time stepping on a 1D linear
//! fractional-viscoelastic bar, Σ = E Du + η D^α(Du), fixed at both ends.
//!
//! Backward Euler in velocity with uⁿ = uⁿ⁻¹ + Δt vⁿ and the memory update
//! Q_kⁿ = e_k²Q_kⁿ⁻¹ + β_k e_k Δt Dvⁿ. With zero forcing,
//!
//! ϱ‖vⁿ‖² + E‖Duⁿ‖² + ηβ₀ Σ_m Δt‖Dv^m‖² + Σ_k η/(β_k e_k)‖Q_kⁿ‖² ≤ ϱ‖v⁰‖² + E‖Du⁰‖²
//!
//! must hold at every step for any Δt.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::caputo::UniformGrid;
use crate::error::{invalid, Result};
use crate::fde::{assemble_fe, Tridiagonal};
use crate::prony::PronySeries;

/// Body force b(x, t).
pub type ForceFn = fn(f64, f64) -> f64;

#[derive(Debug, Clone)]
pub struct LinearViscoParams {
    pub rho: f64,
    pub e: f64,
    pub eta: f64,
    /// Physical (denormalized) series.
    pub series: PronySeries,
    pub nx: usize,
    pub grid: UniformGrid,
}

impl LinearViscoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.e > 0.0 && self.eta > 0.0) {
            return invalid("rho, E and eta must be positive");
        }
        if self.series.normalized {
            return invalid("series must be in physical units");
        }
        self.series.validate()?;
        if self.nx < 2 {
            return invalid("need at least two elements");
        }
        Ok(())
    }
}

/// Per-step groups of the energy inequality; index 0 is the initial state.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub kinetic: Vec<f64>,
    pub elastic: Vec<f64>,
    /// Cumulative ηβ₀ Σ_m Δt‖Dv^m‖².
    pub dissipation: Vec<f64>,
    pub memory: Vec<f64>,
    /// Initial energy plus accumulated forcing bound.
    pub rhs: Vec<f64>,
    /// Whether the forcing bound used a computed Poincaré constant.
    pub estimated: bool,
}

impl EnergyLedger {
    pub fn lhs(&self, n: usize) -> f64 {
        self.kinetic[n] + self.elastic[n] + self.dissipation[n] + self.memory[n]
    }

    pub fn steps(&self) -> usize {
        self.kinetic.len() - 1
    }

    /// Stored energy ϱ‖v‖² + E‖Du‖² + Σ η/(β_k e_k)‖Q_k‖².
    pub fn stored(&self, n: usize) -> f64 {
        self.kinetic[n] + self.elastic[n] + self.memory[n]
    }

    /// Per-step balance before summation: stored(n−1) + forcing bound of step n
    /// − stored(n) − ηβ₀Δt‖Dvⁿ‖². Non-negative for the scheme.
    pub fn step_defects(&self) -> Vec<f64> {
        (1..=self.steps())
            .map(|n| {
                let forcing = self.rhs[n] - self.rhs[n - 1];
                let diss = self.dissipation[n] - self.dissipation[n - 1];
                self.stored(n - 1) + forcing - self.stored(n) - diss
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LinearRun {
    pub ledger: EnergyLedger,
    /// Interior nodal displacement and velocity at the final step.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

fn interior(t: &Tridiagonal) -> Tridiagonal {
    let n = t.len();
    let mut s = Tridiagonal { lower: t.lower[1..n - 1].to_vec(), diag: t.diag[1..n - 1].to_vec(), upper: t.upper[1..n - 1].to_vec() };
    s.lower[0] = 0.0;
    let m = s.len();
    s.upper[m - 1] = 0.0;
    s
}

fn quad_form(a: &Tridiagonal, v: &[f64], scratch: &mut [f64]) -> f64 {
    a.mul(v, scratch);
    v.iter().zip(scratch.iter()).map(|(x, y)| x * y).sum()
}

/// 1/λ_min of K w = λ M w on the interior space, so that ‖w‖₀² ≤ C²‖Dw‖₀²
/// for every discrete w. Inverse iteration.
pub fn poincare_constant_sq(nx: usize) -> Result<f64> {
    let (m, k) = assemble_fe(nx)?;
    let (m, k) = (interior(&m), interior(&k));
    let lu = k.factor()?;
    let n = m.len();
    let mut w: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i % 3) as f64).collect();
    let mut scratch = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        m.mul(&w, &mut scratch);
        lu.solve(&mut scratch);
        let norm = quad_form(&m, &scratch, &mut vec![0.0; n]).sqrt();
        w.iter_mut().zip(&scratch).for_each(|(a, b)| *a = b / norm);
        let num = quad_form(&k, &w, &mut vec![0.0; n]);
        let next = num / quad_form(&m, &w, &mut vec![0.0; n]);
        if (next - lambda).abs() <= 1e-14 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Ok(1.0 / lambda)
}

/// Runs the scheme from u⁰ = `u0`, v⁰ = `v0` (both zero at x = 0, 1) with
/// Q_k⁰ = 0 for `params.grid.steps` steps.
pub fn run_linear(
    params: &LinearViscoParams,
    u0: impl Fn(f64) -> f64,
    v0: impl Fn(f64) -> f64,
    forcing: Option<ForceFn>,
) -> Result<LinearRun> {
    params.validate()?;
    if [u0(0.0), u0(1.0), v0(0.0), v0(1.0)].iter().any(|x| x.abs() > 1e-12) {
        return invalid("initial data must vanish at both ends");
    }
    let nx = params.nx;
    let h = 1.0 / nx as f64;
    let dt = params.grid.dt;
    let s = &params.series;
    let e = s.decay_factors(dt);
    let (rho, stiff, eta) = (params.rho, params.e, params.eta);
    let (m_full, k_full) = assemble_fe(nx)?;
    let (mass, k) = (interior(&m_full), interior(&k_full));
    let n = mass.len();
    let memory_gain: f64 = s.beta.iter().zip(&e).map(|(b, e)| b * e).sum::<f64>() * dt;
    let a = mass.combine(rho / dt, &k, stiff * dt + eta * s.beta0 + eta * memory_gain);
    let lu = a.factor()?;
    let nodes: Vec<f64> = (1..nx).map(|i| i as f64 * h).collect();
    let mut u: Vec<f64> = nodes.iter().map(|&x| u0(x)).collect();
    let mut v: Vec<f64> = nodes.iter().map(|&x| v0(x)).collect();
    let nk = s.n_terms;
    // Q_k at two Gauss points per element: index (k·nx + elem)·2 + g
    let mut q = vec![0.0; nk * nx * 2];
    let c2 = match forcing {
        Some(_) => poincare_constant_sq(nx)?,
        None => 0.0,
    };
    let mut scratch = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut ledger = EnergyLedger { estimated: forcing.is_some(), ..Default::default() };
    let e0 = rho * quad_form(&mass, &v, &mut scratch) + stiff * quad_form(&k, &u, &mut scratch);
    ledger.kinetic.push(rho * quad_form(&mass, &v, &mut scratch));
    ledger.elastic.push(stiff * quad_form(&k, &u, &mut scratch));
    ledger.dissipation.push(0.0);
    ledger.memory.push(0.0);
    ledger.rhs.push(e0);
    let node = |w: &[f64], i: usize| if i == 0 || i == nx { 0.0 } else { w[i - 1] };
    let mut bvec = vec![0.0; n];
    for step in 1..=params.grid.steps {
        let t = params.grid.t(step);
        // ϱMvⁿ⁻¹/Δt − EKuⁿ⁻¹ − η Σ e_k² BᵀQ_kⁿ⁻¹ + (b, ·)
        mass.mul(&v, &mut rhs);
        rhs.iter_mut().for_each(|r| *r *= rho / dt);
        k.mul(&u, &mut scratch);
        rhs.iter_mut().zip(&scratch).for_each(|(r, s)| *r -= stiff * s);
        for el in 0..nx {
            let mut sq = 0.0;
            for kk in 0..nk {
                let base = (kk * nx + el) * 2;
                sq += e[kk] * e[kk] * 0.5 * h * (q[base] + q[base + 1]);
            }
            // Dφ = ∓1/h on the element's left/right node
            let flux = eta * sq / h;
            if el >= 1 {
                rhs[el - 1] += flux;
            }
            if el < n {
                rhs[el] -= flux;
            }
        }
        let mut b_norm_sq = 0.0;
        if let Some(b) = forcing {
            bvec.iter_mut().zip(&nodes).for_each(|(v, &x)| *v = b(x, t));
            mass.mul(&bvec, &mut scratch);
            rhs.iter_mut().zip(&scratch).for_each(|(r, s)| *r += s);
            b_norm_sq = quad_form(&mass, &bvec, &mut scratch);
        }
        lu.solve(&mut rhs);
        std::mem::swap(&mut v, &mut rhs);
        u.iter_mut().zip(&v).for_each(|(u, v)| *u += dt * v);
        let mut mem = 0.0;
        for el in 0..nx {
            let dv = (node(&v, el + 1) - node(&v, el)) / h;
            for kk in 0..nk {
                let base = (kk * nx + el) * 2;
                for g in 0..2 {
                    let qv = &mut q[base + g];
                    *qv = e[kk] * e[kk] * *qv + s.beta[kk] * e[kk] * dt * dv;
                    mem += eta / (s.beta[kk] * e[kk]) * 0.5 * h * *qv * *qv;
                }
            }
        }
        let kin = rho * quad_form(&mass, &v, &mut scratch);
        let ela = stiff * quad_form(&k, &u, &mut scratch);
        let diss = eta * s.beta0 * dt * quad_form(&k, &v, &mut scratch);
        ledger.kinetic.push(kin);
        ledger.elastic.push(ela);
        ledger.dissipation.push(ledger.dissipation[step - 1] + diss);
        ledger.memory.push(mem);
        let forcing_bound = if forcing.is_some() { dt * c2 * b_norm_sq / (eta * s.beta0) } else { 0.0 };
        ledger.rhs.push(ledger.rhs[step - 1] + forcing_bound);
    }
    Ok(LinearRun { ledger, u, v })
}

/// Relative round-off allowance when comparing the two sides.
pub const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    /// Inequality holds at step n (index 0 is the initial state).
    pub holds: Vec<bool>,
    /// min over steps n ≥ 1 of (rhs − lhs)/rhs; negative means violation.
    pub worst_margin: f64,
    pub violations: usize,
    pub estimated: bool,
}

pub fn check_lemma3(ledger: &EnergyLedger) -> InequalityReport {
    let mut worst = f64::INFINITY;
    let holds: Vec<bool> = (0..=ledger.steps())
        .map(|n| {
            let (l, r) = (ledger.lhs(n), ledger.rhs[n]);
            if n > 0 && r > 0.0 {
                worst = worst.min((r - l) / r);
            }
            l <= r * (1.0 + ROUNDOFF) + f64::MIN_POSITIVE
        })
        .collect();
    let violations = holds.iter().filter(|h| !**h).count();
    if !worst.is_finite() {
        worst = 0.0;
    }
    InequalityReport { holds, worst_margin: worst, violations, estimated: ledger.estimated }
}

/// One randomized stability trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub rho: f64,
    pub e: f64,
    pub eta: f64,
    pub alpha: f64,
    pub dt: f64,
    pub terms: usize,
    pub ledger: EnergyLedger,
    pub report: InequalityReport,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub trials: usize,
    pub seed: u64,
    pub steps: usize,
    pub nx: usize,
    /// Extra trials at Δt = 10 with E = 10.
    pub stiff_probes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { trials: 100, seed: 42, steps: 200, nx: 32, stiff_probes: 5 }
    }
}

/// Smooth initial data Σ_j c_j sin(jπx), drawn per trial.
#[derive(Debug, Clone, Copy)]
struct Modes([f64; 4]);

impl Modes {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut c = [0.0; 4];
        for (j, c) in c.iter_mut().enumerate() {
            *c = rng.gen_range(-1.0..1.0) / (j + 1) as f64;
        }
        Self(c)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * x).sin()).sum()
    }
}

/// Randomized sweep: ϱ, E, η log-uniform in [0.1, 10], α in [0.05, 0.95],
/// Δt log-uniform in [1e-4, 1e-1], N ∈ {3, 6, 9}, random smooth u⁰ and v⁰,
/// no forcing; then `stiff_probes` trials at Δt = 10, E = 10. `series_for`
/// supplies a normalized series for (α, N). Trials run in parallel.
pub fn randomized_sweep<F>(cfg: &SweepConfig, series_for: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(f64, usize) -> Result<PronySeries> + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    let draws: Vec<_> = (0..cfg.trials + cfg.stiff_probes)
        .map(|i| {
            let stiff = i >= cfg.trials;
            let rho = log_uniform(&mut rng, 0.1, 10.0);
            let e = if stiff { 10.0 } else { log_uniform(&mut rng, 0.1, 10.0) };
            let eta = log_uniform(&mut rng, 0.1, 10.0);
            let alpha = rng.gen_range(0.05..0.95);
            let dt = if stiff { 10.0 } else { log_uniform(&mut rng, 1e-4, 1e-1) };
            let terms = [3, 6, 9][rng.gen_range(0..3)];
            (i, rho, e, eta, alpha, dt, terms, Modes::draw(&mut rng), Modes::draw(&mut rng))
        })
        .collect();
    draws
        .par_iter()
        .map(|&(trial, rho, e, eta, alpha, dt, terms, um, vm)| {
            let grid = UniformGrid::new(dt, cfg.steps)?;
            let series = series_for(alpha, terms)?.denormalize(grid.horizon())?;
            let params = LinearViscoParams { rho, e, eta, series, nx: cfg.nx, grid };
            let ledger = run_linear(&params, |x| um.eval(x), |x| vm.eval(x), None)?.ledger;
            let report = check_lemma3(&ledger);
            Ok(TrialOutcome { trial, rho, e, eta, alpha, dt, terms, ledger, report })
        })
        .collect()
}
