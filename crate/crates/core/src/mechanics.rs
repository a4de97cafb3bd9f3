//! Rheometer benchmark for a fractional Kelvin–Voigt exponential material:
//! a cylinder compressed by 10 % over one second, then twisted sinusoidally.
//!
//! Kinematics are prescribed in closed form, so stresses follow by direct
//! evaluation; only the fractional derivative of the viscous stress carries
//! history.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::caputo::{FractionalOrder, SampleSeries, UniformGrid};
use crate::cumulative::{grunwald_letnikov, midpoint_derivative};
use crate::error::{invalid, Error, Result};
use crate::optimizer::write_atomic;
use crate::prony::{prony_derivative, PronySeries};
use crate::quad::gauss_legendre;

/// Geometry, loading protocol and material of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiverModel {
    /// Pa
    pub delta: f64,
    pub b: f64,
    pub alpha: f64,
    /// m
    pub radius: f64,
    /// m
    pub height: f64,
    pub compression: f64,
    /// Rim shear strain amplitude γ.
    pub shear_amplitude: f64,
    /// Hz
    pub frequency: f64,
    /// Duration of the compression ramp, s.
    pub ramp_time: f64,
}

impl Default for LiverModel {
    fn default() -> Self {
        Self {
            delta: 126.4,
            b: 1.5,
            alpha: 0.2,
            radius: 0.010,
            height: 0.0027,
            compression: 0.10,
            shear_amplitude: 0.25,
            frequency: 1.0,
            ramp_time: 1.0,
        }
    }
}

impl LiverModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.b >= 0.0 && self.radius > 0.0 && self.height > 0.0) {
            return invalid("need delta > 0, b >= 0 and positive dimensions");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.compression >= 0.0 && self.compression < 1.0 && self.ramp_time > 0.0) {
            return invalid("compression must lie in [0, 1) with a positive ramp time");
        }
        Ok(())
    }

    /// λ(t) = 1 − c·min(t/t_ramp, 1).
    pub fn stretch(&self, t: f64) -> f64 {
        1.0 - self.compression * (t / self.ramp_time).min(1.0)
    }

    /// Time since the end of the ramp, t̂ = max(0, t − t_ramp).
    pub fn shear_time(&self, t: f64) -> f64 {
        (t - self.ramp_time).max(0.0)
    }

    /// Twist per unit reference height ψ = γλ^{3/2} sin(2πf t̂)/R, so the
    /// rim shear F_θ3 equals λγ sin(2πf t̂).
    pub fn twist_rate(&self, t: f64) -> f64 {
        let l = self.stretch(t);
        self.shear_amplitude * l.powf(1.5) * (2.0 * std::f64::consts::PI * self.frequency * self.shear_time(t)).sin() / self.radius
    }

    /// The material point (0, R, H) on the outer edge of the top face, where
    /// the twist shear σ_θz appears as −σ₁₃.
    pub fn rim_point(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.radius, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub u: Vector3<f64>,
    pub f: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub j: f64,
}

/// Placement x(X, t) of the compression–torsion motion.
pub fn placement(x: &Vector3<f64>, t: f64, model: &LiverModel) -> Vector3<f64> {
    let l = model.stretch(t);
    let th = model.twist_rate(t) * x[2];
    let (s, c) = th.sin_cos();
    let r = l.sqrt();
    Vector3::new((x[0] * c - x[1] * s) / r, (x[0] * s + x[1] * c) / r, l * x[2])
}

pub fn deformation(x: &Vector3<f64>, t: f64, model: &LiverModel) -> Result<KinematicState> {
    let tol = 1e-12 * model.radius.max(model.height);
    if x[0].hypot(x[1]) > model.radius + tol || x[2] < -tol || x[2] > model.height + tol {
        return invalid(format!("point ({}, {}, {}) lies outside the reference cylinder", x[0], x[1], x[2]));
    }
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    let l = model.stretch(t);
    let psi = model.twist_rate(t);
    let (s, c) = (psi * x[2]).sin_cos();
    let r = l.sqrt();
    let f = Matrix3::new(
        c / r,
        -s / r,
        psi * (-x[0] * s - x[1] * c) / r,
        s / r,
        c / r,
        psi * (x[0] * c - x[1] * s) / r,
        0.0,
        0.0,
        l,
    );
    let cg = f.transpose() * f;
    Ok(KinematicState { u: placement(x, t, model) - x, f, c: cg, j: f.determinant() })
}

/// Symmetric tensor ↔ 6 channels, ordered 11, 22, 33, 23, 13, 12.
pub fn to_voigt(a: &Matrix3<f64>) -> [f64; 6] {
    [a[(0, 0)], a[(1, 1)], a[(2, 2)], a[(1, 2)], a[(0, 2)], a[(0, 1)]]
}

pub fn from_voigt(v: &[f64]) -> Matrix3<f64> {
    Matrix3::new(v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2])
}

/// S_v = exp[b(C:C − 3)]C.
pub fn viscous_stress(c: &Matrix3<f64>, b: f64) -> Matrix3<f64> {
    c * (b * (c.dot(c) - 3.0)).exp()
}

/// Dev[A] = A − (A:C/3)C⁻¹.
pub fn deviatoric(a: &Matrix3<f64>, c: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let ci = c.try_inverse().ok_or(Error::Singular(0))?;
    Ok(a - ci * (a.dot(c) / 3.0))
}

/// How the fractional derivative of S_v is evaluated.
#[derive(Debug, Clone)]
pub enum Engine {
    Prony(PronySeries),
    Gl,
    Mp,
    /// D̂^α replaced by the identity: the hyperelastic limit α = 0.
    Elastic,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Prony(_) => "prony",
            Engine::Gl => "gl",
            Engine::Mp => "mp",
            Engine::Elastic => "elastic",
        }
    }

    pub fn terms(&self) -> usize {
        match self {
            Engine::Prony(s) => s.n_terms,
            _ => 0,
        }
    }
}

/// Stress histories at one material point; tensors stored as 6 channels.
#[derive(Debug, Clone)]
pub struct StressHistory {
    pub grid: UniformGrid,
    /// Second Piola–Kirchhoff stress without the pressure term.
    pub s: Vec<[f64; 6]>,
    /// Cauchy stress without the pressure term.
    pub sigma: Vec<[f64; 6]>,
    pub seconds: f64,
    pub ops: u64,
}

impl StressHistory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|n| self.grid.t(n)).collect()
    }

    pub fn sigma13(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s[4]).collect()
    }
}

/// Stress at material point `x` over `grid` with the pressure left at zero.
///
/// The material starts from rest at t = 0 with no prior deformation.
pub fn stress_history(x: &Vector3<f64>, model: &LiverModel, engine: &Engine, grid: UniformGrid) -> Result<StressHistory> {
    model.validate()?;
    let start = Instant::now();
    let kin = (0..grid.len()).map(|n| deformation(x, grid.t(n), model)).collect::<Result<Vec<_>>>()?;
    let sv: Vec<f64> = kin.iter().flat_map(|k| to_voigt(&viscous_stress(&k.c, model.b))).collect();
    let sv = SampleSeries::new(grid, 6, sv)?;
    let order = FractionalOrder::new(model.alpha)?;
    let (frac, ops) = match engine {
        Engine::Prony(series) => {
            if (series.alpha - model.alpha).abs() > 1e-12 {
                return invalid(format!("series fitted for alpha {} but model has {}", series.alpha, model.alpha));
            }
            let phys = if series.normalized { series.denormalize(grid.horizon())? } else { series.clone() };
            let out = prony_derivative(&sv, &phys)?;
            (out.series, out.ops)
        }
        Engine::Gl => {
            let out = grunwald_letnikov(&sv, order);
            (out.series, out.ops)
        }
        Engine::Mp => {
            let out = midpoint_derivative(&sv, order);
            (out.series, out.ops)
        }
        Engine::Elastic => (sv, 0),
    };
    let mut s = Vec::with_capacity(grid.len());
    let mut sigma = Vec::with_capacity(grid.len());
    for (n, k) in kin.iter().enumerate() {
        let pk2 = deviatoric(&from_voigt(frac.row(n)), &k.c)? * model.delta;
        s.push(to_voigt(&pk2));
        sigma.push(to_voigt(&(k.f * pk2 * k.f.transpose() / k.j)));
    }
    Ok(StressHistory { grid, s, sigma, seconds: start.elapsed().as_secs_f64(), ops })
}

/// Torque and normal force on the deformed top face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopFaceLoads {
    pub times: Vec<f64>,
    /// Rim-point Cauchy (1,3) and (2,3) components, for reporting.
    pub sigma13: Vec<f64>,
    pub sigma23: Vec<f64>,
    pub torque: Vec<f64>,
    pub normal: Vec<f64>,
}

/// τ = ∫ e₃·[x × σe₃] dΓ and t_N = ∫ e₃·σe₃ dΓ over the deformed top disc,
/// by radial Gauss–Legendre with `n_quad` points times 2π.
///
/// The torsion is axisymmetric, so τ = 2π∫ r²σ_θz dr. The pressure comes
/// from radial equilibrium ∂σ_rr/∂r + (σ_rr − σ_θθ)/r = 0 with a traction-free
/// wall; exchanging the order of integration gives
/// t_N = 2π∫ r[σ̃_zz − (σ̃_rr + σ̃_θθ)/2] dr with σ̃ the pressure-free stress.
pub fn torque_and_normal(model: &LiverModel, engine: &Engine, grid: UniformGrid, n_quad: usize) -> Result<TopFaceLoads> {
    if n_quad < 1 {
        return invalid("need at least one radial quadrature point");
    }
    let (nodes, weights) = gauss_legendre(n_quad);
    let radii: Vec<f64> = nodes.iter().map(|x| 0.5 * model.radius * (x + 1.0)).collect();
    let histories = radii
        .par_iter()
        .map(|&rho| stress_history(&Vector3::new(rho, 0.0, model.height), model, engine, grid))
        .collect::<Result<Vec<_>>>()?;
    let rim = stress_history(&model.rim_point(), model, engine, grid)?;
    let times = rim.times();
    let mut torque = vec![0.0; times.len()];
    let mut normal = vec![0.0; times.len()];
    for (n, &t) in times.iter().enumerate() {
        let l = model.stretch(t);
        let th = model.twist_rate(t) * model.height;
        let (s, c) = th.sin_cos();
        for ((rho, w), h) in radii.iter().zip(&weights).zip(&histories) {
            let sg = from_voigt(&h.sigma[n]);
            let er = Vector3::new(c, s, 0.0);
            let et = Vector3::new(-s, c, 0.0);
            let ez = Vector3::z();
            let r = rho / l.sqrt();
            let dr = 0.5 * model.radius * w / l.sqrt();
            let s_tz = et.dot(&(sg * ez));
            let s_rr = er.dot(&(sg * er));
            let s_tt = et.dot(&(sg * et));
            torque[n] += 2.0 * std::f64::consts::PI * r * r * s_tz * dr;
            normal[n] += 2.0 * std::f64::consts::PI * r * (sg[(2, 2)] - 0.5 * (s_rr + s_tt)) * dr;
        }
    }
    Ok(TopFaceLoads {
        times,
        sigma13: rim.sigma.iter().map(|s| s[4]).collect(),
        sigma23: rim.sigma.iter().map(|s| s[3]).collect(),
        torque,
        normal,
    })
}

/// ‖a − r‖/‖r‖ in L²(0, T) by the trapezoid rule on the coarser grid.
///
/// The reference grid must refine the approximate grid by an integer factor.
pub fn relative_l2_error(approx: &[f64], approx_dt: f64, reference: &[f64], reference_dt: f64) -> Result<f64> {
    let ratio = approx_dt / reference_dt;
    let k = ratio.round() as usize;
    if k == 0 || (ratio - k as f64).abs() > 1e-9 * ratio {
        return invalid(format!("reference step {reference_dt} does not divide {approx_dt}"));
    }
    if (approx.len() - 1) * k > reference.len() - 1 {
        return invalid("reference history is shorter than the approximation");
    }
    let trap = |v: &dyn Fn(usize) -> f64| -> f64 {
        let n = approx.len() - 1;
        (0..=n).map(|i| if i == 0 || i == n { 0.5 * v(i) } else { v(i) }).sum::<f64>()
    };
    let num = trap(&|i| (approx[i] - reference[i * k]).powi(2));
    let den = trap(&|i| reference[i * k].powi(2));
    Ok((num / den).sqrt())
}

/// One cell of the speed comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub engine: String,
    pub terms: usize,
    pub dt: f64,
    pub seconds: f64,
    pub ops: u64,
}

/// Wall time and multiply-add counts of the rim-point stress history over
/// [0, horizon] for every engine and time step, run one after another.
pub fn timing_matrix(model: &LiverModel, engines: &[Engine], dts: &[f64], horizon: f64) -> Result<Vec<TimingRow>> {
    let (lo, hi) = dts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
    if dts.len() < 2 || hi / lo < 100.0 * (1.0 - 1e-9) {
        return invalid("time steps must span at least two decades");
    }
    let mut rows = Vec::new();
    for &dt in dts {
        let grid = UniformGrid::covering(horizon, dt)?;
        for e in engines {
            let h = stress_history(&model.rim_point(), model, e, grid)?;
            rows.push(TimingRow { engine: e.name().into(), terms: e.terms(), dt, seconds: h.seconds, ops: h.ops });
        }
    }
    Ok(rows)
}

fn cache_header(model: &LiverModel, dt: f64, steps: usize) -> String {
    format!("# engine=gl dt={dt:e} alpha={} steps={steps} delta={} b={} point=0,R,H", model.alpha, model.delta, model.b)
}

/// GL Cauchy-stress history at the rim point, read from `path` when the cached
/// file was written for the same engine, step, order and material; otherwise
/// computed and written atomically.
pub fn gl_reference(model: &LiverModel, dt: f64, horizon: f64, path: &Path) -> Result<StressHistory> {
    let grid = UniformGrid::covering(horizon, dt)?;
    let header = cache_header(model, dt, grid.steps);
    if let Ok(text) = std::fs::read_to_string(path) {
        if let Some(h) = parse_cache(&text, &header, grid) {
            return Ok(h);
        }
    }
    let h = stress_history(&model.rim_point(), model, &Engine::Gl, grid)?;
    let mut out = String::with_capacity(grid.len() * 120);
    out.push_str(&header);
    out.push_str("\nt,sigma11,sigma22,sigma33,sigma23,sigma13,sigma12\n");
    for (n, s) in h.sigma.iter().enumerate() {
        let _ = write!(out, "{:e}", grid.t(n));
        for v in s {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())?;
    Ok(h)
}

fn parse_cache(text: &str, header: &str, grid: UniformGrid) -> Option<StressHistory> {
    let mut lines = text.lines();
    if lines.next()? != header {
        return None;
    }
    lines.next()?;
    let mut sigma = Vec::with_capacity(grid.len());
    for line in lines {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().ok()).collect::<Option<_>>()?;
        sigma.push(<[f64; 6]>::try_from(v.as_slice()).ok()?);
    }
    (sigma.len() == grid.len()).then(|| StressHistory { grid, s: Vec::new(), sigma, seconds: 0.0, ops: 0 })
}
