//! History-summing Caputo discretizations: midpoint, Grünwald–Letnikov,
//! Diethelm trapezoidal and Gao (L1) weights. Each step revisits the whole
//! history, so work grows as O(N_T²).

use crate::caputo::{gamma, FractionalOrder, SampleSeries};
use crate::error::{invalid, Result};
use std::time::Instant;

/// Result of applying a discretization to a series.
#[derive(Debug, Clone)]
pub struct MethodOutput {
    /// One approximation per grid point and channel.
    pub series: SampleSeries,
    /// Wall time of the evaluation, seconds.
    pub cost: f64,
    /// Kernel multiply-adds performed.
    pub ops: u64,
    /// First row at which the approximation is defined (1 for GL, else 0).
    pub first_valid: usize,
}

/// Convolves increments or samples with a weight array: out[n] = Σ_j w[j]·x[n−j].
fn history_sum(out: &mut SampleSeries, steps: usize, mut term: impl FnMut(usize, usize, &mut [f64]) -> u64) -> u64 {
    let mut ops = 0;
    for n in 1..=steps {
        ops += term(n, out.channels, out.row_mut(n));
    }
    ops
}

/// Midpoint rule: (1/Γ(1−α)) Σ_{i=1}^{n} (t_n − (i−½)Δt)^{−α} (f_i − f_{i−1}), zero at t₀.
pub fn midpoint_derivative(f: &SampleSeries, alpha: FractionalOrder) -> MethodOutput {
    let start = Instant::now();
    let a = alpha.value();
    let steps = f.grid.steps;
    let dt = f.grid.dt;
    let g = gamma(1.0 - a);
    let w: Vec<f64> = (0..steps).map(|j| ((j as f64 + 0.5) * dt).powf(-a) / g).collect();
    let c = f.channels;
    let inc: Vec<f64> = (0..steps * c).map(|k| f.values[k + c] - f.values[k]).collect();
    let mut out = SampleSeries::zeros(f.grid, c);
    let ops = history_sum(&mut out, steps, |n, c, row| {
        for i in 1..=n {
            let wi = w[n - i];
            let d = &inc[(i - 1) * c..i * c];
            for (r, d) in row.iter_mut().zip(d) {
                *r += wi * d;
            }
        }
        (n * c) as u64
    });
    MethodOutput { series: out, cost: start.elapsed().as_secs_f64(), ops, first_valid: 0 }
}

/// Midpoint rule reported with a one-step lag: the value at t_n is the
/// standard midpoint value at t_{n−1} (history through t_{n−1}), zero at t₀
/// and t₁. The polynomial refinement study reports midpoint errors this way.
pub fn midpoint_derivative_lagged(f: &SampleSeries, alpha: FractionalOrder) -> MethodOutput {
    let mut out = midpoint_derivative(f, alpha);
    let c = f.channels;
    let v = &mut out.series.values;
    let len = v.len();
    v.copy_within(0..len - c, c);
    v[..c].iter_mut().for_each(|x| *x = 0.0);
    out
}

/// Grünwald–Letnikov weights g_m of (1 − z)^α: g₀ = 1, g_m = g_{m−1}(1 − (α+1)/m).
pub fn grunwald_weights(alpha: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    for m in 1..=n {
        g.push(g[m - 1] * (1.0 - (alpha + 1.0) / m as f64));
    }
    g
}

/// Grünwald–Letnikov with the Caputo correction:
/// Δt^{−α}[f_n − Σ_{m=1}^{n} C_m f_{n−m}] − t_n^{−α} f₀/Γ(1−α), C_m = −g_m.
///
/// Undefined at n = 0; row 0 is left at zero and `first_valid` is 1.
pub fn grunwald_letnikov(f: &SampleSeries, alpha: FractionalOrder) -> MethodOutput {
    let start = Instant::now();
    let a = alpha.value();
    let steps = f.grid.steps;
    let dt = f.grid.dt;
    let g = grunwald_weights(a, steps);
    let scale = dt.powf(-a);
    let corr = 1.0 / gamma(1.0 - a);
    let c = f.channels;
    let f0: Vec<f64> = f.row(0).to_vec();
    let mut out = SampleSeries::zeros(f.grid, c);
    let ops = history_sum(&mut out, steps, |n, c, row| {
        for m in 0..=n {
            let gm = g[m];
            let src = &f.values[(n - m) * c..(n - m + 1) * c];
            for (r, s) in row.iter_mut().zip(src) {
                *r += gm * s;
            }
        }
        let tc = (n as f64 * dt).powf(-a) * corr;
        for (r, f0) in row.iter_mut().zip(&f0) {
            *r = scale * *r - tc * f0;
        }
        ((n + 1) * c) as u64
    });
    MethodOutput { series: out, cost: start.elapsed().as_secs_f64(), ops, first_valid: 1 }
}

/// Diethelm's product-trapezoidal weight a_{m,n}.
pub fn diethelm_weight(alpha: f64, m: usize, n: usize) -> f64 {
    let p = |k: usize| (k as f64).powf(1.0 - alpha);
    if m == 0 {
        1.0
    } else if m == n {
        (1.0 - alpha) * (n as f64).powf(-alpha) - p(n) + p(n - 1)
    } else {
        p(m + 1) - 2.0 * p(m) + p(m - 1)
    }
}

/// Diethelm trapezoidal rule on f minus its Taylor polynomial at 0:
/// Δt^{−α}/Γ(2−α) Σ_{m=0}^{n} a_{m,n}(f_{n−m} − f(0)).
///
/// `f0_derivs` holds f(0) for every channel (only the zeroth-order Taylor
/// term is needed for 0 < α < 1).
pub fn diethelm_trapezoidal(f: &SampleSeries, alpha: FractionalOrder, f0_derivs: &[f64]) -> Result<MethodOutput> {
    let c = f.channels;
    if f0_derivs.len() != c {
        return invalid(format!("expected {c} initial values (one per channel), got {}", f0_derivs.len()));
    }
    let start = Instant::now();
    let a = alpha.value();
    let steps = f.grid.steps;
    let scale = f.grid.dt.powf(-a) / gamma(2.0 - a);
    let interior: Vec<f64> = (0..=steps).map(|m| if m == 0 { 1.0 } else { diethelm_weight(a, m, m + 1) }).collect();
    let mut out = SampleSeries::zeros(f.grid, c);
    let ops = history_sum(&mut out, steps, |n, c, row| {
        for m in 0..=n {
            let w = if m == n { diethelm_weight(a, n, n) } else { interior[m] };
            let src = &f.values[(n - m) * c..(n - m + 1) * c];
            for ((r, s), f0) in row.iter_mut().zip(src).zip(f0_derivs) {
                *r += w * (s - f0);
            }
        }
        row.iter_mut().for_each(|r| *r *= scale);
        ((n + 1) * c) as u64
    });
    Ok(MethodOutput { series: out, cost: start.elapsed().as_secs_f64(), ops, first_valid: 0 })
}

/// L1 weights a_i = (i+1)^{1−α} − i^{1−α}, i = 0..n.
pub fn gao_weights(alpha: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| ((i + 1) as f64).powf(1.0 - alpha) - (i as f64).powf(1.0 - alpha)).collect()
}

/// Gao (L1) weights: Δt^{−α}/Γ(2−α)[a₀f_n − Σ_{i=1}^{n−1}(a_{n−i−1} − a_{n−i})f_i − a_{n−1}f₀].
///
/// Evaluated in the summation-by-parts form Σ_{j=0}^{n−1} a_j(f_{n−j} − f_{n−j−1}),
/// which is algebraically identical and cancels constants exactly.
pub fn gao_weights_derivative(f: &SampleSeries, alpha: FractionalOrder) -> MethodOutput {
    let start = Instant::now();
    let a = alpha.value();
    let steps = f.grid.steps;
    let scale = f.grid.dt.powf(-a) / gamma(2.0 - a);
    let w = gao_weights(a, steps);
    let c = f.channels;
    let inc: Vec<f64> = (0..steps * c).map(|k| f.values[k + c] - f.values[k]).collect();
    let mut out = SampleSeries::zeros(f.grid, c);
    let ops = history_sum(&mut out, steps, |n, c, row| {
        for j in 0..n {
            let d = &inc[(n - j - 1) * c..(n - j) * c];
            for (r, d) in row.iter_mut().zip(d) {
                *r += w[j] * d;
            }
        }
        row.iter_mut().for_each(|r| *r *= scale);
        (n * c) as u64
    });
    MethodOutput { series: out, cost: start.elapsed().as_secs_f64(), ops, first_valid: 0 }
}
