//! Fitting Prony parameters to the fractional symbol (iω)^α.
//!
//! With harmonics ω_k = kω* and hatted (ω*-normalized) unknowns, matching
//! H(iω_k)/ω_k^α to e^{iπα/2} gives two residuals per harmonic:
//!
//! ```text
//! re_k = k^{-α} Σ β̂_m (kτ̂_m)²/((kτ̂_m)²+1)               − cos(πα/2)
//! im_k = β̂₀ k^{1-α} + k^{-α} Σ β̂_m kτ̂_m/((kτ̂_m)²+1)   − sin(πα/2)
//! ```
//!
//! The fit runs Levenberg–Marquardt on the logarithms of (β̂₀, β̂, τ̂), seeded
//! by a non-negative least-squares solve for the weights on a log-spaced set
//! of time constants.

use crate::error::{invalid, Error, Result};
use crate::prony::PronySeries;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

pub const FIT_VERSION: u32 = 1;
const LOG_MIN: f64 = -40.0;
const LOG_MAX: f64 = 15.0;
/// Largest change of any log-parameter in one step (a factor of e).
const MAX_LOG_STEP: f64 = 1.0;
/// A run is stationary once the RMS residual improves by less than
/// STALL_GAIN (relative) over STALL_WINDOW accepted steps.
const STALL_WINDOW: usize = 50;
const STALL_GAIN: f64 = 1e-6;
/// Terms whose weight falls below this fraction of the largest weight are
/// treated as collapsed, and the next seed is tried.
const DEAD_TERM: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub alpha: f64,
    pub n_terms: usize,
    /// Harmonic count M.
    pub n_modes: usize,
    /// Fitting-horizon multiplier s, T_fit = s·T_problem.
    pub scale: f64,
    pub max_iter: usize,
    /// RMS residual below which a stationary fit counts as converged.
    pub tol: f64,
    /// Recorded for reproducibility; the fit itself draws no random numbers.
    pub seed: u64,
}

impl FitConfig {
    /// Defaults: M = 100·N, s = 10.
    pub fn new(alpha: f64, n_terms: usize) -> Self {
        Self { alpha, n_terms, n_modes: 100 * n_terms, scale: 10.0, max_iter: 3000, tol: 0.05, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        crate::caputo::FractionalOrder::new(self.alpha)?;
        if !(3..=15).contains(&self.n_terms) {
            return invalid(format!("N must lie in [3, 15], got {}", self.n_terms));
        }
        if self.n_modes < 10 * self.n_terms {
            return invalid(format!("need M >= 10N, got M = {} for N = {}", self.n_modes, self.n_terms));
        }
        if !(self.scale >= 1.0) {
            return invalid(format!("scale must be >= 1, got {}", self.scale));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return invalid("max_iter and tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Normalized (hatted) parameters; see [`PronySeries::denormalize`].
    pub series: PronySeries,
    pub residual_rms: f64,
    /// Largest relative complex mismatch over the fitted harmonics.
    pub spectral_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// RMS residual after each accepted step, starting from the seed.
    pub history: Vec<f64>,
}

/// Harmonic indices used by the fit: 1..=M, or 256 log-uniform picks above 2000.
pub fn mode_set(n_modes: usize) -> Vec<f64> {
    if n_modes <= 2000 {
        return (1..=n_modes).map(|k| k as f64).collect();
    }
    let top = (n_modes as f64).ln();
    let mut ks: Vec<f64> = (0..256).map(|i| (top * i as f64 / 255.0).exp().round()).collect();
    ks.dedup();
    ks
}

struct Problem {
    alpha: f64,
    n: usize,
    ks: Vec<f64>,
    cos: f64,
    sin: f64,
}

impl Problem {
    fn new(cfg: &FitConfig) -> Self {
        let a = cfg.alpha;
        Self { alpha: a, n: cfg.n_terms, ks: mode_set(cfg.n_modes), cos: (0.5 * PI * a).cos(), sin: (0.5 * PI * a).sin() }
    }

    fn rows(&self) -> usize {
        2 * self.ks.len()
    }

    /// Residuals in plain (not log) parameters.
    fn residual_plain(&self, b0: f64, beta: &[f64], tau: &[f64], r: &mut [f64]) {
        let m = self.ks.len();
        for (j, &k) in self.ks.iter().enumerate() {
            let ka = k.powf(-self.alpha);
            let (mut re, mut im) = (0.0, 0.0);
            for (b, t) in beta.iter().zip(tau) {
                let x = k * t;
                let d = b / (x * x + 1.0);
                re += d * x * x;
                im += d * x;
            }
            r[j] = ka * re - self.cos;
            r[m + j] = b0 * k * ka + ka * im - self.sin;
        }
    }

    fn split(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.n;
        (x[0].exp(), x[1..=n].iter().map(|v| v.exp()).collect(), x[n + 1..].iter().map(|v| v.exp()).collect())
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) {
        let (b0, beta, tau) = self.split(x);
        self.residual_plain(b0, &beta, &tau, r);
    }

    /// Jacobian with respect to the log-parameters, row-major rows × (2N+1).
    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let (b0, beta, tau) = self.split(x);
        let m = self.ks.len();
        let n = self.n;
        jac.fill(0.0);
        for (j, &k) in self.ks.iter().enumerate() {
            let ka = k.powf(-self.alpha);
            jac[(m + j, 0)] = b0 * k * ka;
            for i in 0..n {
                let xv = k * tau[i];
                let x2 = xv * xv;
                let d = 1.0 / (x2 + 1.0);
                let bk = ka * beta[i];
                jac[(j, 1 + i)] = bk * x2 * d;
                jac[(m + j, 1 + i)] = bk * xv * d;
                jac[(j, 1 + n + i)] = bk * 2.0 * x2 * d * d;
                jac[(m + j, 1 + n + i)] = bk * xv * (1.0 - x2) * d * d;
            }
        }
    }
}

/// Lawson–Hanson non-negative least squares, min ‖Ax − b‖ subject to x ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm().max(1.0);
    let mut iter = 0;
    loop {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match pick {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => return x,
        }
        loop {
            iter += 1;
            if iter > max_iter {
                return x;
            }
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&idx);
            let s_p = match sub.clone().svd(true, true).solve(b, 1e-14) {
                Ok(s) => s,
                Err(_) => return x,
            };
            let mut s = DVector::zeros(n);
            for (p, &j) in idx.iter().enumerate() {
                s[j] = s_p[p];
            }
            if idx.iter().all(|&j| s[j] > 0.0) {
                x = s;
                break;
            }
            let mut step = f64::INFINITY;
            for &j in &idx {
                if s[j] <= 0.0 {
                    step = step.min(x[j] / (x[j] - s[j]));
                }
            }
            x += (s - &x) * step;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
}

/// Upper ends of the log-spaced τ̂ seeds, tried in order until a fit converges.
const SEED_TAU_TOP: [f64; 3] = [1.0, 10.0, 0.3];

/// Initial log-parameters: τ̂ log-spaced over [1/M, top], weights by NNLS.
fn seed_parameters(p: &Problem, n_modes: usize, top: f64) -> Vec<f64> {
    let n = p.n;
    let lo = (1.0 / n_modes as f64).ln();
    let hi = top.ln();
    let tau: Vec<f64> = (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect();
    let m = p.ks.len();
    let mut a = DMatrix::zeros(2 * m, n + 1);
    let mut rhs = DVector::zeros(2 * m);
    for (j, &k) in p.ks.iter().enumerate() {
        let ka = k.powf(-p.alpha);
        for i in 0..n {
            let x = k * tau[i];
            a[(j, i)] = ka * x * x / (x * x + 1.0);
            a[(m + j, i)] = ka * x / (x * x + 1.0);
        }
        a[(m + j, n)] = k * ka;
        rhs[j] = p.cos;
        rhs[m + j] = p.sin;
    }
    let sol = nnls(&a, &rhs, 30 * (n + 1));
    let mut x = Vec::with_capacity(2 * n + 1);
    x.push(sol[n].max(1e-8).ln());
    x.extend((0..n).map(|i| sol[i].max(1e-6).ln()));
    x.extend(tau.iter().map(|t| t.ln()));
    x
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
}

fn clamp_box(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(LOG_MIN, LOG_MAX));
}

/// Levenberg–Marquardt with Marquardt diagonal scaling and box projection.
fn levenberg_marquardt(p: &Problem, mut x: Vec<f64>, max_iter: usize) -> (Vec<f64>, Vec<f64>, usize, bool) {
    let np = x.len();
    let rows = p.rows();
    let mut r = vec![0.0; rows];
    let mut r_new = vec![0.0; rows];
    let mut jac = DMatrix::zeros(rows, np);
    clamp_box(&mut x);
    p.residual(&x, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut history = vec![rms(&r)];
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut stationary = false;
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        p.jacobian(&x, &mut jac);
        let rv = DVector::from_column_slice(&r);
        let g = jac.tr_mul(&rv);
        let jtj = jac.tr_mul(&jac);
        if g.amax() <= 1e-15 * cost.max(1e-300).sqrt() {
            stationary = true;
            break;
        }
        let diag: Vec<f64> = (0..np).map(|i| jtj[(i, i)].max(1e-12)).collect();
        let mut accepted = false;
        while !accepted {
            let mut sys = jtj.clone();
            for i in 0..np {
                sys[(i, i)] += lambda * diag[i];
            }
            let step = match sys.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let shrink = (MAX_LOG_STEP / step.amax()).min(1.0);
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + shrink * b).collect();
            clamp_box(&mut xn);
            p.residual(&xn, &mut r_new);
            let cost_new: f64 = r_new.iter().map(|v| v * v).sum();
            if cost_new.is_finite() && cost_new < cost {
                let d = DVector::from_iterator(np, xn.iter().zip(&x).map(|(a, b)| a - b));
                let predicted = -2.0 * g.dot(&d) - d.dot(&(&jtj * &d));
                let ratio = if predicted > 0.0 { (cost - cost_new) / predicted } else { 0.0 };
                lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * ratio - 1.0).powi(3));
                nu = 2.0;
                x = xn;
                std::mem::swap(&mut r, &mut r_new);
                cost = cost_new;
                history.push(rms(&r));
                accepted = true;
                let h = history.len();
                if h > STALL_WINDOW && history[h - 1] > (1.0 - STALL_GAIN) * history[h - 1 - STALL_WINDOW] {
                    stationary = true;
                }
            } else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e20 {
                    stationary = true;
                    break;
                }
            }
        }
        if stationary {
            break;
        }
    }
    (x, history, iters, stationary)
}

/// Runs the seeded fits for one term count and keeps the best.
fn fit_fresh(p: &Problem, n_modes: usize, max_iter: usize) -> (Vec<f64>, Vec<f64>, usize, bool) {
    let mut best: Option<(Vec<f64>, Vec<f64>, usize, bool)> = None;
    let mut iterations = 0;
    for top in SEED_TAU_TOP {
        let run = levenberg_marquardt(p, seed_parameters(p, n_modes, top), max_iter);
        iterations += run.2;
        let (_, w, _) = p.split(&run.0);
        let wmax = w.iter().cloned().fold(0.0, f64::max);
        let done = run.3 && w.iter().all(|b| *b > DEAD_TERM * wmax);
        if best.as_ref().is_none_or(|b| run.1.last() < b.1.last()) {
            best = Some(run);
        }
        if done {
            break;
        }
    }
    let mut best = best.expect("at least one seed is tried");
    best.2 = iterations;
    best
}

/// Log-parameters for N+1 terms from an N-term solution: a new term goes in
/// the middle of the widest gap between neighbouring ln τ̂ (the ends count
/// as gaps one mean spacing wide), with a small weight.
fn extend_by_one(prev: &[f64], n: usize) -> Vec<f64> {
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (prev[1 + n + i], prev[1 + i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = if n > 1 { (pairs[n - 1].0 - pairs[0].0) / (n - 1) as f64 } else { 1.0 };
    let mut cands = vec![(span, pairs[0].0 - 0.5 * span), (span, pairs[n - 1].0 + 0.5 * span)];
    for w in pairs.windows(2) {
        cands.push((w[1].0 - w[0].0, 0.5 * (w[0].0 + w[1].0)));
    }
    let (_, ln_tau) = cands.into_iter().fold((f64::NEG_INFINITY, 0.0), |a, c| if c.0 > a.0 { c } else { a });
    let ln_w = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64 - 3.0;
    pairs.push((ln_tau, ln_w));
    let mut x = vec![prev[0]];
    x.extend(pairs.iter().map(|p| p.1));
    x.extend(pairs.iter().map(|p| p.0));
    x
}

fn report(cfg: &FitConfig, p: &Problem, run: (Vec<f64>, Vec<f64>, usize, bool)) -> Result<FitReport> {
    let (x, history, iterations, stationary) = run;
    let (b0, beta, tau) = p.split(&x);
    let mut pairs: Vec<(f64, f64)> = tau.into_iter().zip(beta).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (tau, beta): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mut r = vec![0.0; p.rows()];
    p.residual_plain(b0, &beta, &tau, &mut r);
    let residual_rms = rms(&r);
    let m = p.ks.len();
    let spectral_error = (0..m).map(|j| r[j].hypot(r[m + j])).fold(0.0, f64::max);
    let series = PronySeries::new(cfg.alpha, b0, beta, tau, 2.0 * PI / cfg.scale, cfg.scale, true)?;
    Ok(FitReport { series, residual_rms, spectral_error, iterations, converged: stationary && residual_rms <= cfg.tol, history })
}

/// Fits every term count from 3 up to `cfg.n_terms`; entry i holds N = 3 + i.
///
/// Each N is fitted from the NNLS seeds and, continuing from N − 1, from the
/// previous solution with one term inserted; the lower residual wins. The
/// harmonic count scales with N as M·N_i/N.
pub fn optimize_chain(cfg: &FitConfig) -> Result<Vec<FitReport>> {
    cfg.validate()?;
    let mut out: Vec<FitReport> = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for n in 3..=cfg.n_terms {
        let sub = FitConfig { n_terms: n, n_modes: (cfg.n_modes * n).div_ceil(cfg.n_terms).max(10 * n), ..cfg.clone() };
        let p = Problem::new(&sub);
        let mut best = fit_fresh(&p, sub.n_modes, sub.max_iter);
        if let Some(x) = &prev {
            let run = levenberg_marquardt(&p, extend_by_one(x, n - 1), sub.max_iter);
            best.2 += run.2;
            if run.1.last() < best.1.last() {
                let iterations = best.2;
                best = run;
                best.2 = iterations;
            }
        }
        prev = Some(best.0.clone());
        out.push(report(&sub, &p, best)?);
    }
    Ok(out)
}

/// Fits normalized Prony parameters for `cfg` (see [`optimize_chain`]).
///
/// Terms are returned sorted by increasing τ̂ so that series for
/// neighbouring α line up component by component.
pub fn optimize(cfg: &FitConfig) -> Result<FitReport> {
    Ok(optimize_chain(cfg)?.pop().expect("chain covers N >= 3"))
}

/// Residual vector (2M entries: real parts, then imaginary parts) for given
/// hatted parameters.
pub fn assemble_constraints(cfg: &FitConfig, beta0: f64, beta: &[f64], tau: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != tau.len() {
        return invalid("weights and time constants differ in length");
    }
    if beta0 < 0.0 || beta.iter().chain(tau).any(|v| !(*v > 0.0)) {
        return invalid("candidate parameters must be positive");
    }
    let p = Problem { n: beta.len(), ..Problem::new(cfg) };
    let mut r = vec![0.0; p.rows()];
    p.residual_plain(beta0, beta, tau, &mut r);
    Ok(r)
}

/// Relative complex mismatch of a normalized series over the central band
/// k ∈ [2, M/2] of harmonics.
pub fn central_band_error(series: &PronySeries, n_modes: usize) -> f64 {
    let ks = mode_set(n_modes);
    let hi = n_modes as f64 / 2.0;
    series.spectral_error(ks.into_iter().filter(|k| *k >= 2.0 && *k <= hi))
}

/// Fits with scale `s` and returns physical parameters for a problem of
/// length `t_problem` (base frequency 2π/(s·t_problem)).
pub fn rescale_timescale(alpha: f64, n_terms: usize, t_problem: f64, s: f64) -> Result<PronySeries> {
    let cfg = FitConfig { scale: s, ..FitConfig::new(alpha, n_terms) };
    optimize(&cfg)?.series.denormalize(t_problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub alpha_grid: Vec<f64>,
    #[serde(rename = "N_range")]
    pub n_range: [usize; 2],
    pub scale: f64,
    pub fit_version: u32,
}

/// Persisted grid of normalized fits over α and N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterTable {
    pub header: TableHeader,
    pub series: Vec<PronySeries>,
}

impl ParameterTable {
    /// Fits every (α, N) cell. Each α column is one [`optimize_chain`] run;
    /// columns run in parallel.
    pub fn build(alphas: &[f64], n_range: [usize; 2], scale: f64) -> Result<Self> {
        if alphas.is_empty() || alphas.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("alpha grid must be non-empty and strictly increasing");
        }
        if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return invalid("alpha grid must lie in (0, 1)");
        }
        if n_range[0] > n_range[1] {
            return invalid("empty N range");
        }
        if n_range[0] < 3 || n_range[1] > 15 {
            return invalid("N range must lie within [3, 15]");
        }
        let columns = alphas
            .par_iter()
            .map(|&a| optimize_chain(&FitConfig { scale, ..FitConfig::new(a, n_range[1]) }))
            .collect::<Result<Vec<_>>>()?;
        let series = columns
            .into_iter()
            .flat_map(|chain| chain.into_iter().skip(n_range[0] - 3).map(|r| r.series))
            .collect();
        Ok(Self { header: TableHeader { alpha_grid: alphas.to_vec(), n_range, scale, fit_version: FIT_VERSION }, series })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))?;
        for s in &t.series {
            s.validate()?;
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    /// The series stored at exactly this grid α and N.
    pub fn stored(&self, alpha: f64, n: usize) -> Option<&PronySeries> {
        self.series.iter().find(|s| s.alpha == alpha && s.n_terms == n)
    }

    /// Stored series at a grid α, else componentwise monotone-cubic
    /// interpolation across the α grid for fixed N.
    ///
    /// The interpolated components are ln β̂₀, ln τ̂_k and the reduced weights
    /// ln β̂_k + α ln τ̂_k − ln sin(πα). Exponential-sum fits of the power-law
    /// kernel carry weights close to sin(πα)·τ̂^{−α}/π times the node spacing,
    /// so the reduced weights vary slowly in α.
    pub fn lookup(&self, alpha: f64, n: usize) -> Result<PronySeries> {
        let grid = &self.header.alpha_grid;
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        if !(alpha >= lo && alpha <= hi) {
            return Err(Error::Lookup(format!("alpha {alpha} outside table range [{lo}, {hi}]")));
        }
        if n < self.header.n_range[0] || n > self.header.n_range[1] {
            return Err(Error::Lookup(format!("N = {n} not in table")));
        }
        if let Some(s) = self.stored(alpha, n) {
            return Ok(s.clone());
        }
        let column: Vec<&PronySeries> =
            grid.iter().map(|&a| self.stored(a, n).ok_or_else(|| Error::Lookup(format!("missing cell alpha={a} N={n}")))).collect::<Result<_>>()?;
        let interp = |get: &dyn Fn(&PronySeries) -> f64| {
            let ys: Vec<f64> = column.iter().map(|s| get(s)).collect();
            pchip(grid, &ys, alpha)
        };
        let reduced = |a: f64, beta: f64, tau: f64| beta.ln() + a * tau.ln() - (PI * a).sin().ln();
        let beta0 = interp(&|s| s.beta0.ln()).exp();
        let ln_tau: Vec<f64> = (0..n).map(|k| interp(&|s| s.tau[k].ln())).collect();
        let beta = (0..n)
            .map(|k| {
                let g = interp(&|s| reduced(s.alpha, s.beta[k], s.tau[k]));
                (g - alpha * ln_tau[k] + (PI * alpha).sin().ln()).exp()
            })
            .collect();
        let tau = ln_tau.iter().map(|l| l.exp()).collect();
        PronySeries::new(alpha, beta0, beta, tau, column[0].omega_star, self.header.scale, true)
    }
}

/// Fritsch–Carlson monotone piecewise-cubic Hermite interpolation.
pub fn pchip(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m = vec![d[0], d[0]];
    } else {
        for i in 1..n - 1 {
            if d[i - 1] * d[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s * d0 <= 0.0 {
                0.0
            } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        m[0] = end(h[0], h[1], d[0], d[1]);
        m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    }
    let i = match xs.iter().position(|&v| v > x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => n - 2,
    };
    let t = (x - xs[i]) / h[i];
    let (t2, t3) = (t * t, t * t * t);
    ys[i] * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m[i] * h[i] * (t3 - 2.0 * t2 + t)
        + ys[i + 1] * (-2.0 * t3 + 3.0 * t2)
        + m[i + 1] * h[i] * (t3 - t2)
}

/// Writes via a sibling temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Serde(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Serde(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
