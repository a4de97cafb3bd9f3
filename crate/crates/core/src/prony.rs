//! Prony-series approximation of the Caputo derivative.
//!
//! The power-law kernel is replaced by a dashpot plus N Maxwell elements,
//! D̂f = β₀f′(t) + Σ_k β_k ∫₀ᵗ e^{−(t−s)/τ_k} f′(s) ds, and each memory
//! integral is advanced by a two-term recursion, so storage stays at N values
//! per channel however long the run.

use crate::caputo::{gamma, FractionalOrder, Polynomial, SampleSeries};
use crate::cumulative::MethodOutput;
use crate::error::{invalid, Error, Result};
use crate::quad;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Dashpot weight β₀ and Maxwell pairs (β_k, τ_k) for one (α, N, scale).
///
/// When `normalized` is set the weights and time constants are the
/// dimensionless hatted values and `omega_star` is the base frequency of a
/// unit-length problem, 2π/scale; [`PronySeries::denormalize`] maps them to
/// physical units for a given horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PronySeries {
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub omega_star: f64,
    pub scale: f64,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    pub normalized: bool,
}

impl PronySeries {
    pub fn new(alpha: f64, beta0: f64, beta: Vec<f64>, tau: Vec<f64>, omega_star: f64, scale: f64, normalized: bool) -> Result<Self> {
        let s = Self { alpha, n_terms: beta.len(), omega_star, scale, beta0, beta, tau, normalized };
        s.validate()?;
        Ok(s)
    }

    /// Checks shape and positivity; the N ∈ [3, 15] range is enforced by the fitter.
    pub fn validate(&self) -> Result<()> {
        FractionalOrder::new(self.alpha)?;
        if self.beta.len() != self.n_terms || self.tau.len() != self.n_terms {
            return invalid(format!(
                "N = {} but {} weights and {} time constants",
                self.n_terms,
                self.beta.len(),
                self.tau.len()
            ));
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return invalid(format!("beta0 must be nonnegative, got {}", self.beta0));
        }
        if self.beta.iter().chain(&self.tau).any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("weights and time constants must be positive and finite");
        }
        if !(self.omega_star > 0.0 && self.scale > 0.0) {
            return invalid("omega_star and scale must be positive");
        }
        Ok(())
    }

    pub fn order(&self) -> FractionalOrder {
        FractionalOrder(self.alpha)
    }

    /// Physical parameters for a problem of length `t_problem`, fitted against
    /// ω* = 2π/(scale·t_problem): β₀ = β̂₀ω*^{α−1}, β_k = β̂_kω*^α, τ_k = τ̂_k/ω*.
    pub fn denormalize(&self, t_problem: f64) -> Result<Self> {
        if !self.normalized {
            return invalid("series is already in physical units");
        }
        if !(t_problem > 0.0) {
            return invalid("problem horizon must be positive");
        }
        let w = 2.0 * PI / (self.scale * t_problem);
        let a = self.alpha;
        Ok(Self {
            alpha: a,
            n_terms: self.n_terms,
            omega_star: w,
            scale: self.scale,
            beta0: self.beta0 * w.powf(a - 1.0),
            beta: self.beta.iter().map(|b| b * w.powf(a)).collect(),
            tau: self.tau.iter().map(|t| t / w).collect(),
            normalized: false,
        })
    }

    /// Transfer function H(iω) = β₀iω + Σ β_kτ_kω(τ_kω + i)/((τ_kω)² + 1).
    pub fn transfer(&self, omega: f64) -> Complex64 {
        let mut h = Complex64::new(0.0, self.beta0 * omega);
        for (b, t) in self.beta.iter().zip(&self.tau) {
            let x = t * omega;
            h += Complex64::new(x * x, x) * (b / (x * x + 1.0));
        }
        h
    }

    /// Largest relative complex mismatch |H(iω) − (iω)^α|/ω^α over `omegas`.
    pub fn spectral_error(&self, omegas: impl IntoIterator<Item = f64>) -> f64 {
        let a = self.alpha;
        let sym = Complex64::from_polar(1.0, 0.5 * PI * a);
        omegas
            .into_iter()
            .map(|w| (self.transfer(w) / w.powf(a) - sym).norm())
            .fold(0.0, f64::max)
    }

    /// Decay factors e_k = exp(−Δt/(2τ_k)).
    pub fn decay_factors(&self, dt: f64) -> Vec<f64> {
        self.tau.iter().map(|t| (-dt / (2.0 * t)).exp()).collect()
    }
}

/// γ = β₀/Δt + Σ β_k e_k, the coefficient of the current increment.
pub fn consolidated_gamma(series: &PronySeries, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let e = series.decay_factors(dt);
    Ok(series.beta0 / dt + series.beta.iter().zip(&e).map(|(b, e)| b * e).sum::<f64>())
}

/// Truncation error ε(z) = z^{1−α}/Γ(2−α) − β₀ + Σ β_kτ_k(e^{−z/τ_k} − 1).
pub fn truncation_error(series: &PronySeries, z: f64) -> f64 {
    let a = series.alpha;
    let mut e = z.powf(1.0 - a) / gamma(2.0 - a) - series.beta0;
    for (b, t) in series.beta.iter().zip(&series.tau) {
        e += b * t * (-z / t).exp_m1();
    }
    e
}

/// Dense samples of ε on [0, T] and its sup and L² norms.
#[derive(Debug, Clone)]
pub struct TruncationProfile {
    pub horizon: f64,
    pub z: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_inf: f64,
    pub eps_l2: f64,
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.max(f2)
}

/// Samples ε on a uniform grid of `n_samples` intervals over [0, T], refining
/// every local maximum of |ε| by golden-section search. L² by trapezoid.
pub fn truncation_profile(series: &PronySeries, horizon: f64, n_samples: usize) -> Result<TruncationProfile> {
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    if n_samples < 1000 {
        return invalid(format!("need at least 1000 samples, got {n_samples}"));
    }
    let h = horizon / n_samples as f64;
    let z: Vec<f64> = (0..=n_samples).map(|i| i as f64 * h).collect();
    let eps: Vec<f64> = z.iter().map(|&z| truncation_error(series, z)).collect();
    let abs = |z: f64| truncation_error(series, z).abs();
    let mut eps_inf = eps.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    for i in 1..n_samples {
        let (l, c, r) = (eps[i - 1].abs(), eps[i].abs(), eps[i + 1].abs());
        if c >= l && c >= r {
            eps_inf = eps_inf.max(golden_max(abs, z[i - 1], z[i + 1]));
        }
    }
    let eps_l2 = crate::caputo::l2_trapezoid(&eps, h);
    Ok(TruncationProfile { horizon, z, eps, eps_inf, eps_l2 })
}

/// (‖ε‖_{L∞(0,T)}, ‖ε‖_{L²(0,T)}).
pub fn truncation_norms(series: &PronySeries, horizon: f64, n_samples: usize) -> Result<(f64, f64)> {
    let p = truncation_profile(series, horizon, n_samples)?;
    Ok((p.eps_inf, p.eps_l2))
}

/// Ingredients of the a-priori bound on |D̂ⁿf − D^αf(t_n)|.
#[derive(Debug, Clone)]
pub struct ErrorBound {
    pub eps_inf: f64,
    pub beta0: f64,
    beta: Vec<f64>,
    tau: Vec<f64>,
}

impl ErrorBound {
    /// Bound ingredients for a series on the horizon (0, T).
    pub fn new(series: &PronySeries, horizon: f64) -> Result<Self> {
        let (eps_inf, _) = truncation_norms(series, horizon, 20_000)?;
        Ok(Self { eps_inf, beta0: series.beta0, beta: series.beta.clone(), tau: series.tau.clone() })
    }

    /// C(β, τ) = Σ_k (β_k/24)·max{τ_k⁻², τ_k⁻¹, 1 + e_k}.
    pub fn c_btau(&self, dt: f64) -> f64 {
        self.beta
            .iter()
            .zip(&self.tau)
            .map(|(b, t)| {
                let e = (-dt / (2.0 * t)).exp();
                b / 24.0 * (t.powi(-2)).max(1.0 / t).max(1.0 + e)
            })
            .sum()
    }

    pub fn bound(&self, dt: f64, fprime0: f64, f2_l1: f64, f_w3inf: f64) -> f64 {
        theorem1_bound(self, dt, fprime0, f2_l1, f_w3inf)
    }
}

/// ‖ε‖∞(|f′(0)| + ‖f″‖_{L¹}) + Δt(β₀/2 + C(β,τ)Δt)‖f‖_{W^{3,∞}}.
pub fn theorem1_bound(bound: &ErrorBound, dt: f64, fprime0: f64, f2_l1: f64, f_w3inf: f64) -> f64 {
    let truncation = bound.eps_inf * (fprime0.abs() + f2_l1);
    if dt == 0.0 {
        return truncation;
    }
    truncation + dt * (0.5 * bound.beta0 + bound.c_btau(dt) * dt) * f_w3inf
}

/// Per-channel memory of the recursion.
#[derive(Debug, Clone)]
pub struct PronyState {
    /// q_k per channel, row k holds channels 0..C.
    pub q: Vec<f64>,
    pub prev: Option<Vec<f64>>,
    pub e: Vec<f64>,
    pub dt: f64,
    channels: usize,
    beta0: f64,
    /// e_k·β_k, the weight of the current increment in q_k.
    eb: Vec<f64>,
    e2: Vec<f64>,
    pub ops: u64,
}

pub fn init_state(series: &PronySeries, channels: usize, dt: f64) -> Result<PronyState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    if channels == 0 {
        return invalid("need at least one channel");
    }
    let e = series.decay_factors(dt);
    let eb = e.iter().zip(&series.beta).map(|(e, b)| e * b).collect();
    let e2 = e.iter().map(|e| e * e).collect();
    Ok(PronyState {
        q: vec![0.0; series.n_terms * channels],
        prev: None,
        e,
        dt,
        channels,
        beta0: series.beta0,
        eb,
        e2,
        ops: 0,
    })
}

impl PronyState {
    /// Registers f⁰; must precede the first advance.
    pub fn seed(&mut self, f0: &[f64]) -> Result<()> {
        self.check(f0.len())?;
        self.prev = Some(f0.to_vec());
        Ok(())
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.channels {
            return Err(Error::ChannelMismatch { expected: self.channels, got });
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of stored reals (memory plus previous sample), independent of step count.
    pub fn storage_len(&self) -> usize {
        self.q.len() + self.channels
    }

    /// One step: q_kⁿ = e_k²q_kⁿ⁻¹ + e_kβ_k(fⁿ − fⁿ⁻¹), returns (β₀/Δt)(fⁿ − fⁿ⁻¹) + Σ q_kⁿ.
    pub fn advance_into(&mut self, f_n: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(f_n.len())?;
        self.check(out.len())?;
        let c = self.channels;
        let prev = self.prev.as_mut().ok_or(Error::Unseeded)?;
        let dash = self.beta0 / self.dt;
        for ch in 0..c {
            let d = f_n[ch] - prev[ch];
            let mut acc = dash * d;
            for k in 0..self.e.len() {
                let q = &mut self.q[k * c + ch];
                *q = self.e2[k] * *q + self.eb[k] * d;
                acc += *q;
            }
            out[ch] = acc;
            prev[ch] = f_n[ch];
        }
        self.ops += ((self.e.len() + 1) * c) as u64;
        Ok(())
    }

    pub fn advance(&mut self, f_n: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.advance_into(f_n, &mut out)?;
        Ok(out)
    }
}

/// Runs the recursion over a whole series (value 0 at t₀).
pub fn prony_derivative(f: &SampleSeries, series: &PronySeries) -> Result<MethodOutput> {
    let start = Instant::now();
    let mut st = init_state(series, f.channels, f.grid.dt)?;
    st.seed(f.row(0))?;
    let mut out = SampleSeries::zeros(f.grid, f.channels);
    let mut buf = vec![0.0; f.channels];
    for n in 1..=f.grid.steps {
        st.advance_into(f.row(n), &mut buf)?;
        out.row_mut(n).copy_from_slice(&buf);
    }
    Ok(MethodOutput { series: out, cost: start.elapsed().as_secs_f64(), ops: st.ops, first_valid: 0 })
}

/// The time-continuous Prony operator β₀f′(t) + Σ β_k∫₀ᵗ e^{−(t−s)/τ_k}f′(s) ds,
/// by adaptive quadrature.
pub fn continuous_prony<F: Fn(f64) -> f64>(series: &PronySeries, fprime: F, t: f64, tol: f64) -> Result<f64> {
    let mut v = series.beta0 * fprime(t);
    if t == 0.0 {
        return Ok(v);
    }
    for (b, tau) in series.beta.iter().zip(&series.tau) {
        let i = quad::integrate(|s| (-(t - s) / tau).exp() * fprime(s), 0.0, t, tol / (b * series.n_terms as f64), 20_000)?;
        v += b * i;
    }
    Ok(v)
}

/// L²(0, T) norm of the Δt → 0 error D^αp − D̂p for a polynomial, i.e. the
/// error representation ε(t)p′(0) + ∫₀ᵗ ε(z)p″(t−z) dz.
///
/// 8-point Gauss on `n_cells` uniform cells, the first one split
/// geometrically toward t = 0 where the error has a layer as thin as the
/// smallest τ_k.
pub fn plateau_error_l2(series: &PronySeries, p: &Polynomial, horizon: f64, n_cells: usize) -> Result<f64> {
    if !(horizon > 0.0) || n_cells == 0 {
        return invalid("need a positive horizon and at least one cell");
    }
    let a = series.order();
    let dp = p.derivative();
    let (x, w) = quad::gauss_legendre(8);
    let cell = |lo: f64, hi: f64| -> Result<f64> {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut sum = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let t = c + h * xi;
            let e = p.caputo(a, t)? - continuous_prony(series, |s| dp.eval(s), t, 1e-11)?;
            sum += wi * e * e;
        }
        Ok(sum * h)
    };
    let h = horizon / n_cells as f64;
    let mut sum = 0.0;
    let mut hi = h;
    for _ in 0..48 {
        sum += cell(0.5 * hi, hi)?;
        hi *= 0.5;
    }
    sum += cell(0.0, hi)?;
    for i in 1..n_cells {
        sum += cell(i as f64 * h, (i + 1) as f64 * h)?;
    }
    Ok(sum.sqrt())
}
