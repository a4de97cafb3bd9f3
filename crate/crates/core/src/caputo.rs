//! Caputo derivative references: Gamma function, the power rule, a
//! brute-force quadrature oracle, the Fourier symbol and L² error norms.

use crate::error::{invalid, Result};
use crate::quad;
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation with reflection for x < 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Fractional order α, restricted to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(pub(crate) f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("fractional order must lie in (0,1), got {alpha}"));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Uniform time grid t_n = n·dt, n = 0..=steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub dt: f64,
    pub steps: usize,
}

impl UniformGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if steps == 0 {
            return invalid("grid needs at least one step");
        }
        Ok(Self { dt, steps })
    }

    /// Grid covering [0, horizon] with the number of steps rounded from horizon/dt.
    pub fn covering(horizon: f64, dt: f64) -> Result<Self> {
        let steps = (horizon / dt).round();
        if steps < 1.0 {
            return invalid(format!("horizon {horizon} shorter than one step {dt}"));
        }
        Self::new(dt, steps as usize)
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Uniformly sampled values, `grid.len()` rows by `channels` columns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub grid: UniformGrid,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl SampleSeries {
    pub fn new(grid: UniformGrid, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return invalid("series needs at least one channel");
        }
        if values.len() != grid.len() * channels {
            return invalid(format!(
                "expected {} values for {} rows x {} channels, got {}",
                grid.len() * channels,
                grid.len(),
                channels,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("series contains non-finite values");
        }
        Ok(Self { grid, channels, values })
    }

    /// Scalar series sampled from `f` at every grid point.
    pub fn sample<F: Fn(f64) -> f64>(grid: UniformGrid, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|n| f(grid.t(n))).collect();
        Self::new(grid, 1, values)
    }

    pub(crate) fn zeros(grid: UniformGrid, channels: usize) -> Self {
        Self { grid, channels, values: vec![0.0; grid.len() * channels] }
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.channels..(n + 1) * self.channels]
    }

    pub(crate) fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.channels..(n + 1) * self.channels]
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.channels).copied().collect()
    }
}

/// Polynomial Σ coeffs[k]·t^k (coefficient of t^{k} at index k).
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("polynomial needs at least one coefficient");
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("polynomial coefficients must be finite");
        }
        Ok(Self { coeffs })
    }

    /// Coefficients of the convergence-study polynomial, fitted on [0, 0.9].
    pub fn refinement_study() -> Self {
        Self {
            coeffs: vec![2.17, 101.54, -977.47, 3368.61, -5636.44, 4937.49, -2191.59, 398.40],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self { coeffs: vec![0.0] };
        }
        let coeffs = self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        Self { coeffs }
    }

    /// Caputo derivative at `t`; the constant term contributes nothing.
    pub fn caputo(&self, alpha: FractionalOrder, t: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            if *c != 0.0 {
                sum += c * caputo_power_rule(k as f64, alpha, t)?;
            }
        }
        Ok(sum)
    }
}

/// Caputo derivative of t^m: Γ(m+1)/Γ(m+1−α)·t^{m−α}, and 0 for m = 0.
pub fn caputo_power_rule(m: f64, alpha: FractionalOrder, t: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return invalid(format!("exponent must be nonnegative, got {m}"));
    }
    if !(t >= 0.0) {
        return invalid(format!("time must be nonnegative, got {t}"));
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    let a = alpha.value();
    if t == 0.0 {
        return Ok(if m > a { 0.0 } else { f64::INFINITY });
    }
    Ok(gamma(m + 1.0) / gamma(m + 1.0 - a) * t.powf(m - a))
}

pub fn caputo_polynomial(p: &Polynomial, alpha: FractionalOrder, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("time must be nonnegative, got {t}"));
    }
    p.caputo(alpha, t)
}

/// Brute-force Caputo derivative (1/Γ(1−α))∫₀ᵗ f′(s)(t−s)^{−α} ds.
///
/// The last stretch [t−δ, t] is integrated in closed form against the linear
/// interpolant of f′; the rest is mapped to u = ln(t−s), which removes the
/// kernel's growth, and integrated adaptively. Test oracle only.
pub fn caputo_quadrature_oracle<F: Fn(f64) -> f64>(
    fprime: F,
    alpha: FractionalOrder,
    t: f64,
    tol: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("time must be nonnegative, got {t}"));
    }
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let a = alpha.value();
    let g = gamma(1.0 - a);
    let delta = 1e-6 * t;
    let ft = fprime(t);
    let slope = (ft - fprime(t - delta)) / delta;
    let tail = ft * delta.powf(1.0 - a) / (1.0 - a) - slope * delta.powf(2.0 - a) / (2.0 - a);
    let body = quad::integrate(
        |w: f64| {
            let u = w.exp();
            fprime(t - u) * (w * (1.0 - a)).exp()
        },
        delta.ln(),
        t.ln(),
        0.5 * tol * g,
        20_000,
    )?;
    Ok((body + tail) / g)
}

/// The symbol (iω)^α = ω^α(cos(πα/2) + i·sin(πα/2)).
pub fn fourier_symbol(alpha: FractionalOrder, omega: f64) -> Result<Complex64> {
    if !(omega > 0.0) {
        return invalid(format!("frequency must be positive, got {omega}"));
    }
    let a = alpha.value();
    Ok(Complex64::from_polar(omega.powf(a), 0.5 * PI * a))
}

/// L² norm of sampled errors by the trapezoid rule on the sample grid.
pub fn l2_trapezoid(errors: &[f64], dt: f64) -> f64 {
    if errors.len() < 2 {
        return 0.0;
    }
    let n = errors.len() - 1;
    let inner: f64 = errors[1..n].iter().map(|e| e * e).sum();
    (dt * (inner + 0.5 * (errors[0] * errors[0] + errors[n] * errors[n]))).sqrt()
}

/// Continuous L²(0, T) distance between the piecewise-linear interpolant of
/// `values` on `grid` and `exact`.
///
/// Each cell is integrated with 8-point Gauss–Legendre; the first cell is
/// additionally split geometrically toward t = 0, where reference curves of
/// the form t^{1−α} lose smoothness.
pub fn l2_interpolant_error<F: Fn(f64) -> f64>(values: &[f64], grid: &UniformGrid, exact: F) -> f64 {
    assert_eq!(values.len(), grid.len());
    let (x, w) = quad::gauss_legendre(8);
    let dt = grid.dt;
    let cell = |lo: f64, hi: f64, n: usize| -> f64 {
        let (t0, v0, v1) = (grid.t(n), values[n], values[n + 1]);
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let t = c + h * xi;
                let lin = v0 + (v1 - v0) * (t - t0) / dt;
                let e = lin - exact(t);
                wi * e * e
            })
            .sum::<f64>()
            * h
    };
    let mut sum = 0.0;
    let mut hi = dt;
    for _ in 0..48 {
        let lo = 0.5 * hi;
        sum += cell(lo, hi, 0);
        hi = lo;
    }
    sum += cell(0.0, hi, 0);
    for n in 1..grid.steps {
        sum += cell(grid.t(n), grid.t(n + 1), n);
    }
    sum.sqrt()
}
