//! Refinement study of the Caputo discretizations on a smooth polynomial over
//! [0, 0.9], errors measured in continuous L² against the power rule.

use rayon::prelude::*;
use serde::Serialize;

use crate::caputo::{l2_interpolant_error, FractionalOrder, Polynomial, SampleSeries, UniformGrid};
use crate::cumulative::{
    diethelm_trapezoidal, gao_weights_derivative, grunwald_letnikov, midpoint_derivative, midpoint_derivative_lagged,
    MethodOutput,
};
use crate::error::{invalid, Result};
use crate::optimizer::{optimize_chain, FitConfig, FitReport};
use crate::prony::{plateau_error_l2, prony_derivative, PronySeries};

pub const POLY_HORIZON: f64 = 0.9;
/// Fit window is this many times the study window.
pub const POLY_FIT_SCALE: f64 = 10.0;

#[derive(Debug, Clone)]
pub enum PolyMethod {
    Mp,
    /// Midpoint reported one step late.
    MpLagged,
    Gl,
    Diethelm,
    Gao,
    /// Physical series for the study window.
    Prony(PronySeries),
}

impl PolyMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mp => "mp",
            Self::MpLagged => "mp-lagged",
            Self::Gl => "gl",
            Self::Diethelm => "diethelm",
            Self::Gao => "gao",
            Self::Prony(_) => "prony",
        }
    }

    pub fn terms(&self) -> usize {
        match self {
            Self::Prony(s) => s.n_terms,
            _ => 0,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "mp" => Self::Mp,
            "mp-lagged" => Self::MpLagged,
            "gl" => Self::Gl,
            "diethelm" => Self::Diethelm,
            "gao" => Self::Gao,
            _ => return invalid(format!("unknown history method {name:?}")),
        })
    }

    pub fn apply(&self, f: &SampleSeries, alpha: FractionalOrder) -> Result<MethodOutput> {
        Ok(match self {
            Self::Mp => midpoint_derivative(f, alpha),
            Self::MpLagged => midpoint_derivative_lagged(f, alpha),
            Self::Gl => grunwald_letnikov(f, alpha),
            Self::Diethelm => diethelm_trapezoidal(f, alpha, &[f.values[0]])?,
            Self::Gao => gao_weights_derivative(f, alpha),
            Self::Prony(s) => {
                if (s.alpha - alpha.value()).abs() > 1e-12 {
                    return invalid(format!("series fitted for alpha {} used at {}", s.alpha, alpha.value()));
                }
                prony_derivative(f, s)?
            }
        })
    }
}

/// One cell; `dt == 0` marks the Δt → 0 limit of a Prony series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyRow {
    pub alpha: f64,
    pub method: String,
    pub terms: usize,
    pub dt: f64,
    pub l2_error: f64,
    pub seconds: f64,
    pub ops: u64,
}

pub fn poly_cell(p: &Polynomial, method: &PolyMethod, alpha: f64, dt: f64, horizon: f64) -> Result<PolyRow> {
    let a = FractionalOrder::new(alpha)?;
    let grid = UniformGrid::covering(horizon, dt)?;
    let f = SampleSeries::sample(grid, |t| p.eval(t))?;
    let out = method.apply(&f, a)?;
    let mut v = out.series.values;
    v[0] = 0.0;
    let l2_error = l2_interpolant_error(&v, &grid, |t| p.caputo(a, t).unwrap_or(f64::NAN));
    Ok(PolyRow { alpha, method: method.name().into(), terms: method.terms(), dt, l2_error, seconds: out.cost, ops: out.ops })
}

pub fn poly_plateau(p: &Polynomial, series: &PronySeries, horizon: f64) -> Result<PolyRow> {
    let l2_error = plateau_error_l2(series, p, horizon, 90)?;
    Ok(PolyRow { alpha: series.alpha, method: "prony".into(), terms: series.n_terms, dt: 0.0, l2_error, seconds: 0.0, ops: 0 })
}

#[derive(Debug, Clone)]
pub struct PolyStudy {
    pub alphas: Vec<f64>,
    pub dts: Vec<f64>,
    /// History methods are skipped below this step (their cost is quadratic).
    pub history_min_dt: f64,
    pub history: Vec<PolyMethod>,
    pub terms: Vec<usize>,
    pub horizon: f64,
    pub fit_scale: f64,
}

impl Default for PolyStudy {
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.4, 0.8],
            dts: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            history_min_dt: 1e-4,
            history: vec![PolyMethod::MpLagged, PolyMethod::Gl],
            terms: vec![3, 6, 9, 12],
            horizon: POLY_HORIZON,
            fit_scale: POLY_FIT_SCALE,
        }
    }
}

impl PolyStudy {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.dts.is_empty() {
            return invalid("study needs at least one alpha and one step");
        }
        for a in &self.alphas {
            FractionalOrder::new(*a)?;
        }
        if self.dts.iter().any(|d| !(*d > 0.0 && *d < self.horizon)) {
            return invalid("steps must lie in (0, horizon)");
        }
        if !(self.horizon > 0.0 && self.fit_scale >= 1.0) {
            return invalid("horizon must be positive and the fit scale at least 1");
        }
        Ok(())
    }

    /// Fits a series per (α, N), then evaluates every cell; Prony rows
    /// include the Δt = 0 plateau.
    pub fn run(&self, p: &Polynomial) -> Result<Vec<PolyRow>> {
        self.validate()?;
        let top = self.terms.iter().copied().max().unwrap_or(3);
        let chains: Vec<Vec<FitReport>> = self
            .alphas
            .par_iter()
            .map(|a| optimize_chain(&FitConfig { scale: self.fit_scale, ..FitConfig::new(*a, top) }))
            .collect::<Result<_>>()?;
        let mut series = Vec::new();
        for chain in &chains {
            for &n in &self.terms {
                match chain.iter().find(|r| r.series.n_terms == n) {
                    Some(r) => series.push(r.series.denormalize(self.horizon)?),
                    None => return invalid(format!("N = {n} outside [3, 15]")),
                }
            }
        }
        self.run_with(p, &series)
    }

    /// As [`run`](Self::run) with caller-supplied physical series.
    pub fn run_with(&self, p: &Polynomial, series: &[PronySeries]) -> Result<Vec<PolyRow>> {
        self.validate()?;
        let mut cells: Vec<(f64, PolyMethod, f64)> = Vec::new();
        for &a in &self.alphas {
            for &dt in &self.dts {
                if dt >= self.history_min_dt {
                    cells.extend(self.history.iter().map(|m| (a, m.clone(), dt)));
                }
                for s in series.iter().filter(|s| (s.alpha - a).abs() < 1e-12) {
                    cells.push((a, PolyMethod::Prony(s.clone()), dt));
                }
            }
        }
        let mut rows: Vec<PolyRow> =
            cells.par_iter().map(|(a, m, dt)| poly_cell(p, m, *a, *dt, self.horizon)).collect::<Result<_>>()?;
        let plateaus: Vec<PolyRow> = series
            .par_iter()
            .filter(|s| self.alphas.iter().any(|a| (s.alpha - a).abs() < 1e-12))
            .map(|s| poly_plateau(p, s, self.horizon))
            .collect::<Result<_>>()?;
        rows.extend(plateaus);
        Ok(rows)
    }
}
