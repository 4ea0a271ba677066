use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-trend structure of the GEV parameters.
///
/// | label | location  | scale    | shape    | parameters |
/// |-------|-----------|----------|----------|-----------:|
/// | M0    | linear    | constant | constant | 4 |
/// | M1    | quadratic | constant | constant | 5 |
/// | M2    | linear    | linear   | constant | 5 |
/// | M3    | linear    | constant | linear   | 5 |
/// | M4    | linear    | linear   | linear   | 6 |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrendModel {
    M0,
    M1,
    M2,
    M3,
    M4,
}

impl TrendModel {
    pub const ALL: [TrendModel; 5] = [
        TrendModel::M0,
        TrendModel::M1,
        TrendModel::M2,
        TrendModel::M3,
        TrendModel::M4,
    ];

    pub fn n_par(self) -> usize {
        match self {
            TrendModel::M0 => 4,
            TrendModel::M1 | TrendModel::M2 | TrendModel::M3 => 5,
            TrendModel::M4 => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrendModel::M0 => "M0",
            TrendModel::M1 => "M1",
            TrendModel::M2 => "M2",
            TrendModel::M3 => "M3",
            TrendModel::M4 => "M4",
        }
    }

    pub fn quadratic_location(self) -> bool {
        self == TrendModel::M1
    }

    pub fn scale_trend(self) -> bool {
        matches!(self, TrendModel::M2 | TrendModel::M4)
    }

    pub fn shape_trend(self) -> bool {
        matches!(self, TrendModel::M3 | TrendModel::M4)
    }

    /// Free parameters in optimizer order:
    /// `mu0, mu1, [mu2], sigma0, [sigma1], xi0, [xi1]`.
    pub(crate) fn pack(self, p: &GevParams) -> Vec<f64> {
        let mut v = vec![p.mu0, p.mu1];
        if self.quadratic_location() {
            v.push(p.mu2);
        }
        v.push(p.sigma0);
        if self.scale_trend() {
            v.push(p.sigma1);
        }
        v.push(p.xi0);
        if self.shape_trend() {
            v.push(p.xi1);
        }
        v
    }

    pub(crate) fn unpack(self, v: &[f64]) -> GevParams {
        debug_assert_eq!(v.len(), self.n_par());
        let mut it = v.iter().copied();
        let mut next = || it.next().expect("parameter vector length checked");
        let mu0 = next();
        let mu1 = next();
        let mu2 = if self.quadratic_location() { next() } else { 0.0 };
        let sigma0 = next();
        let sigma1 = if self.scale_trend() { next() } else { 0.0 };
        let xi0 = next();
        let xi1 = if self.shape_trend() { next() } else { 0.0 };
        GevParams {
            mu0,
            mu1,
            mu2,
            sigma0,
            sigma1,
            xi0,
            xi1,
        }
    }
}

impl fmt::Display for TrendModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TrendModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M0" => Ok(TrendModel::M0),
            "M1" => Ok(TrendModel::M1),
            "M2" => Ok(TrendModel::M2),
            "M3" => Ok(TrendModel::M3),
            "M4" => Ok(TrendModel::M4),
            other => Err(Error::invalid(format!("unknown trend model {other:?}"))),
        }
    }
}

/// Climatological coefficients of a (possibly time-varying) GEV.
///
/// At time covariate `t`:
/// `μ_t = mu0 + mu1·t + mu2·t²`, `σ_t = sigma0 + sigma1·t`, `ξ_t = xi0 + xi1·t`.
/// Coefficients a model does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GevParams {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub xi0: f64,
    pub xi1: f64,
}

impl GevParams {
    /// Linear-trend (M0) coefficients.
    pub fn linear(mu0: f64, mu1: f64, sigma: f64, xi: f64) -> Self {
        GevParams {
            mu0,
            mu1,
            sigma0: sigma,
            xi0: xi,
            ..Default::default()
        }
    }

    /// Time-invariant coefficients.
    pub fn stationary(mu: f64, sigma: f64, xi: f64) -> Self {
        Self::linear(mu, 0.0, sigma, xi)
    }

    #[inline]
    pub fn location(&self, t: f64) -> f64 {
        self.mu0 + t * (self.mu1 + t * self.mu2)
    }

    #[inline]
    pub fn scale(&self, t: f64) -> f64 {
        self.sigma0 + self.sigma1 * t
    }

    #[inline]
    pub fn shape(&self, t: f64) -> f64 {
        self.xi0 + self.xi1 * t
    }

    /// `(μ_t, σ_t, ξ_t)`.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        (self.location(t), self.scale(t), self.shape(t))
    }

    pub fn is_finite(&self) -> bool {
        [
            self.mu0,
            self.mu1,
            self.mu2,
            self.sigma0,
            self.sigma1,
            self.xi0,
            self.xi1,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// True when the coefficients use only what `model` allows.
    pub fn fits_model(&self, model: TrendModel) -> bool {
        (model.quadratic_location() || self.mu2 == 0.0)
            && (model.scale_trend() || self.sigma1 == 0.0)
            && (model.shape_trend() || self.xi1 == 0.0)
    }
}

/// Exponential-shift trend in which location and scale grow together:
/// `μ_t = mu0·exp(α t / mu0)`, `σ_t = sigma0·exp(α t / mu0)`, shape fixed.
/// The ratio `μ_t/σ_t` is constant in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltTrendParams {
    pub mu0: f64,
    pub alpha: f64,
    pub sigma0: f64,
    pub xi: f64,
}

impl AltTrendParams {
    pub fn new(mu0: f64, alpha: f64, sigma0: f64, xi: f64) -> Result<Self> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(alpha.is_finite() && xi.is_finite()) {
            return Err(Error::invalid("alpha and xi must be finite"));
        }
        Ok(AltTrendParams {
            mu0,
            alpha,
            sigma0,
            xi,
        })
    }

    fn growth(&self, t: f64) -> f64 {
        (self.alpha * t / self.mu0).exp()
    }

    pub fn location(&self, t: f64) -> f64 {
        self.mu0 * self.growth(t)
    }

    pub fn scale(&self, t: f64) -> f64 {
        self.sigma0 * self.growth(t)
    }
}
