use serde::{Deserialize, Serialize};

use super::dist::{log_density_unchecked, GUMBEL_SHAPE_EPS};
use super::model::{GevParams, TrendModel};
use crate::error::{Error, Result};
use crate::ingest::BlockMaximaSeries;
use crate::optim::{nelder_mead, SimplexOptions};

/// Fewest usable block maxima a fit accepts.
pub const MIN_BLOCK_MAXIMA: usize = 20;

/// During fitting the shape is confined to `[-SHAPE_BOUND, SHAPE_BOUND]` at
/// every in-sample time.
pub const SHAPE_BOUND: f64 = 1.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevFit {
    pub params: GevParams,
    pub model: TrendModel,
    pub neg_log_lik: f64,
    pub converged: bool,
    pub n_blocks: usize,
    /// Calendar year at which the time covariate is zero.
    pub time_origin: f64,
}

impl GevFit {
    pub fn covariate(&self, year: f64) -> f64 {
        year - self.time_origin
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Starting coefficients; moment-based Gumbel values when `None`.
    pub start: Option<GevParams>,
    /// Extra simplex runs from the incumbent optimum, stopping early once a
    /// restart no longer improves the objective.
    pub restarts: usize,
    pub x_tol: f64,
    /// Objective evaluations per simplex run.
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            start: None,
            restarts: 3,
            x_tol: 1e-8,
            max_evals: 5_000,
        }
    }
}

impl FitOptions {
    /// Options for refitting a resampled series: warm start, no restarts.
    pub fn warm(start: GevParams) -> Self {
        FitOptions {
            start: Some(start),
            restarts: 0,
            ..Default::default()
        }
    }
}

/// Sum of negative log densities; `+inf` when any σ_t ≤ 0 or any
/// observation falls outside the support.
pub(crate) fn nll_samples(t: &[f64], y: &[f64], p: &GevParams) -> f64 {
    if p.sigma1 == 0.0 && p.xi1 == 0.0 {
        // constant scale and shape
        let sigma = p.sigma0;
        let xi = p.xi0;
        if !(sigma > 0.0) || !xi.is_finite() {
            return f64::INFINITY;
        }
        let log_sigma = sigma.ln();
        let inv_sigma = 1.0 / sigma;
        let mut acc = 0.0;
        if xi.abs() < GUMBEL_SHAPE_EPS {
            for (&ti, &yi) in t.iter().zip(y) {
                let z = (yi - p.location(ti)) * inv_sigma;
                acc += z + (-z).exp();
            }
        } else {
            let inv_xi = 1.0 / xi;
            for (&ti, &yi) in t.iter().zip(y) {
                let w = xi * (yi - p.location(ti)) * inv_sigma;
                if w <= -1.0 {
                    return f64::INFINITY;
                }
                let lw = w.ln_1p();
                acc += (1.0 + inv_xi) * lw + (-lw * inv_xi).exp();
            }
        }
        let v = acc + log_sigma * y.len() as f64;
        return if v.is_nan() { f64::INFINITY } else { v };
    }
    let mut acc = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        let (mu, sigma, xi) = p.at(ti);
        if !(sigma > 0.0) {
            return f64::INFINITY;
        }
        let ld = log_density_unchecked(yi, mu, sigma, xi);
        if ld == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        acc -= ld;
    }
    if acc.is_nan() {
        f64::INFINITY
    } else {
        acc
    }
}

/// Negative log-likelihood of the usable maxima under `params`, with the
/// time covariate centred on the series' analysis period.
pub fn neg_log_likelihood(
    maxima: &BlockMaximaSeries,
    model: TrendModel,
    params: &GevParams,
) -> Result<f64> {
    if !params.fits_model(model) {
        return Err(Error::invalid(format!("coefficients use terms outside {model}")));
    }
    let (t, y) = maxima.observations();
    if y.is_empty() {
        return Err(Error::invalid("no usable block maxima"));
    }
    Ok(nll_samples(&t, &y, params))
}

/// Which coefficients are free during a fit.
#[derive(Debug, Clone, Copy)]
enum Layout {
    Trend(TrendModel),
    /// M0 with the location slope pinned at zero.
    Stationary,
}

impl Layout {
    fn model(self) -> TrendModel {
        match self {
            Layout::Trend(m) => m,
            Layout::Stationary => TrendModel::M0,
        }
    }

    fn pack(self, p: &GevParams) -> Vec<f64> {
        match self {
            Layout::Trend(m) => m.pack(p),
            Layout::Stationary => vec![p.mu0, p.sigma0, p.xi0],
        }
    }

    fn unpack(self, v: &[f64]) -> GevParams {
        match self {
            Layout::Trend(m) => m.unpack(v),
            Layout::Stationary => GevParams::stationary(v[0], v[1], v[2]),
        }
    }

    fn steps(self, scale: f64, half_span: f64) -> Vec<f64> {
        let s = 0.2 * scale;
        match self {
            Layout::Stationary => vec![s, s, 0.1],
            Layout::Trend(m) => {
                let mut v = vec![s, s / half_span];
                if m.quadratic_location() {
                    v.push(s / (half_span * half_span));
                }
                v.push(s);
                if m.scale_trend() {
                    v.push(0.5 * s / half_span);
                }
                v.push(0.1);
                if m.shape_trend() {
                    v.push(0.1 / half_span);
                }
                v
            }
        }
    }
}

fn moment_start(t: &[f64], y: &[f64], layout: Layout) -> GevParams {
    let n = y.len() as f64;
    let y_bar = y.iter().sum::<f64>() / n;
    let (slope, t_bar) = match layout {
        Layout::Stationary => (0.0, 0.0),
        Layout::Trend(_) => {
            let t_bar = t.iter().sum::<f64>() / n;
            let sxx: f64 = t.iter().map(|ti| (ti - t_bar).powi(2)).sum();
            let sxy: f64 = t.iter().zip(y).map(|(ti, yi)| (ti - t_bar) * (yi - y_bar)).sum();
            (if sxx > 0.0 { sxy / sxx } else { 0.0 }, t_bar)
        }
    };
    let resid_var = t
        .iter()
        .zip(y)
        .map(|(ti, yi)| (yi - y_bar - slope * (ti - t_bar)).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let sigma = resid_var.sqrt() * 6f64.sqrt() / std::f64::consts::PI;
    let mu0 = y_bar - slope * t_bar - EULER_GAMMA * sigma;
    GevParams::linear(mu0, slope, sigma, 0.05)
}

fn fit_samples(
    t: &[f64],
    y: &[f64],
    layout: Layout,
    opts: &FitOptions,
    time_origin: f64,
) -> Result<GevFit> {
    if y.len() < MIN_BLOCK_MAXIMA {
        return Err(Error::InsufficientData {
            needed: MIN_BLOCK_MAXIMA,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite block maximum"));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::DegenerateData(format!("all {} maxima equal {lo}", y.len())));
    }

    let t_min = t.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let objective = |v: &[f64]| {
        let p = layout.unpack(v);
        let xi_a = p.shape(t_min);
        let xi_b = p.shape(t_max);
        if !(xi_a.abs() <= SHAPE_BOUND && xi_b.abs() <= SHAPE_BOUND) {
            return f64::INFINITY;
        }
        nll_samples(t, y, &p)
    };

    let moments = moment_start(t, y, layout);
    let mut start = match opts.start {
        Some(s) => {
            let mut s = layout.pack(&layout.unpack(&layout.pack(&s)));
            if !objective(&s).is_finite() {
                s = layout.pack(&moments);
            }
            s
        }
        None => layout.pack(&moments),
    };
    if !objective(&start).is_finite() {
        // a Gumbel start with a wide scale always has full support
        let mut g = moments;
        g.xi0 = 0.0;
        g.sigma0 = (hi - lo).max(moments.sigma0);
        start = layout.pack(&g);
    }
    if !objective(&start).is_finite() {
        return Err(Error::DegenerateData("no finite starting likelihood".into()));
    }

    let half_span = (0.5 * (t_max - t_min)).max(1.0);
    let base_steps = layout.steps(moments.sigma0.max(1e-3 * hi.abs().max(1.0)), half_span);
    let simplex = |x0: &[f64], flip: bool| {
        let steps = if flip {
            base_steps.iter().map(|s| -s).collect()
        } else {
            base_steps.clone()
        };
        nelder_mead(
            objective,
            x0,
            &SimplexOptions {
                steps,
                x_tol: opts.x_tol,
                max_evals: opts.max_evals,
            },
        )
    };

    let mut best = simplex(&start, false);
    for k in 0..opts.restarts {
        let next = simplex(&best.x, k % 2 == 0);
        let improved = best.f - next.f > 1e-9 * (1.0 + best.f.abs());
        if next.f <= best.f {
            best = next;
        }
        if !improved {
            break;
        }
    }

    Ok(GevFit {
        params: layout.unpack(&best.x),
        model: layout.model(),
        neg_log_lik: best.f,
        converged: best.converged && best.f.is_finite(),
        n_blocks: y.len(),
        time_origin,
    })
}

/// Maximum-likelihood fit of `model` to a station's block maxima.
pub fn fit_gev(maxima: &BlockMaximaSeries, model: TrendModel) -> Result<GevFit> {
    fit_gev_with(maxima, model, &FitOptions::default())
}

pub fn fit_gev_with(
    maxima: &BlockMaximaSeries,
    model: TrendModel,
    opts: &FitOptions,
) -> Result<GevFit> {
    let (t, y) = maxima.observations();
    fit_samples(&t, &y, Layout::Trend(model), opts, maxima.time_origin())
}

/// Fit a time-invariant GEV (M0 with zero slope) to a plain sample.
pub fn fit_stationary(values: &[f64], opts: &FitOptions) -> Result<GevFit> {
    let t = vec![0.0; values.len()];
    fit_samples(&t, values, Layout::Stationary, opts, 0.0)
}
