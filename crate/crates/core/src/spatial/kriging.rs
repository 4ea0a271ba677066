//! Stationary Matérn (ν = 3/2) Gaussian-process kriging on the sphere.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::grid::{ensure_distinct, Grid, LonLat};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};

/// Fewest stations a kriging model is fitted to.
pub const MIN_KRIGING_STATIONS: usize = 10;

/// The nugget used in any factorization is at least this fraction of the
/// process variance.
pub const NUGGET_FLOOR: f64 = 1e-10;

/// Variance assigned to a field with no spread at all.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Matérn ν = 3/2 correlation at distance `d` for range `range`.
#[inline]
pub fn matern32(d: f64, range: f64) -> f64 {
    let a = 3f64.sqrt() * d / range;
    (1.0 + a) * (-a).exp()
}

/// Fitted covariance `variance·ρ(d; range) + nugget·1{d=0}` with a constant mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingModel {
    pub variance: f64,
    pub range_km: f64,
    pub nugget: f64,
    pub mean: f64,
}

impl KrigingModel {
    /// Nugget-to-variance ratio actually used on the diagonal.
    fn nugget_ratio(&self) -> f64 {
        if self.variance > 0.0 {
            (self.nugget / self.variance).max(NUGGET_FLOOR)
        } else {
            NUGGET_FLOOR
        }
    }

    /// Covariance between two points (the nugget only enters on the diagonal
    /// of a data covariance matrix, never here).
    pub fn covariance(&self, a: &LonLat, b: &LonLat) -> f64 {
        self.variance * matern32(a.distance_km(b), self.range_km)
    }

    /// Data covariance matrix at `coords`, nugget included.
    pub fn covariance_matrix(&self, coords: &[LonLat]) -> DMatrix<f64> {
        let eta = self.nugget_ratio();
        let r = correlation_matrix(&distance_matrix(coords), self.range_km, eta);
        r * self.variance
    }
}

/// Per-location predictions and prediction standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPrediction {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

fn distance_matrix(coords: &[LonLat]) -> DMatrix<f64> {
    let n = coords.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = coords[i].distance_km(&coords[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn correlation_matrix(dist: &DMatrix<f64>, range: f64, eta: f64) -> DMatrix<f64> {
    let n = dist.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + eta
        } else {
            matern32(dist[(i, j)], range)
        }
    })
}

fn factor(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| {
        Error::Numeric("covariance matrix is not positive definite after the nugget floor".into())
    })
}

struct Profile {
    log_lik: f64,
    mean: f64,
    variance: f64,
}

/// Gaussian log-likelihood with mean and variance profiled out.
fn profile(dist: &DMatrix<f64>, y: &DVector<f64>, range: f64, eta: f64) -> Option<Profile> {
    let n = y.len() as f64;
    let chol = Cholesky::new(correlation_matrix(dist, range, eta))?;
    let ones = DVector::from_element(y.len(), 1.0);
    let ki1 = chol.solve(&ones);
    let kiy = chol.solve(y);
    let mean = ones.dot(&kiy) / ones.dot(&ki1);
    let resid = y.map(|v| v - mean);
    let q = resid.dot(&chol.solve(&resid));
    let variance = q / n;
    if !(variance > 0.0) {
        return None;
    }
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_lik = -0.5 * n * variance.ln() - 0.5 * log_det
        - 0.5 * n * (1.0 + (2.0 * std::f64::consts::PI).ln());
    log_lik.is_finite().then_some(Profile {
        log_lik,
        mean,
        variance,
    })
}

fn check_inputs(coords: &[LonLat], values: &[f64]) -> Result<()> {
    if coords.len() != values.len() {
        return Err(Error::invalid(format!(
            "{} coordinates but {} values",
            coords.len(),
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value to krige"));
    }
    ensure_distinct(coords)
}

/// Fit variance, range and nugget by maximum likelihood.
///
/// The mean and variance are profiled out; range and nugget ratio are picked
/// from a coarse log-spaced grid and then refined by simplex search in log
/// space.
pub fn fit_kriging_model(coords: &[LonLat], values: &[f64]) -> Result<KrigingModel> {
    check_inputs(coords, values)?;
    let n = values.len();
    if n < MIN_KRIGING_STATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_KRIGING_STATIONS,
            got: n,
        });
    }
    let dist = distance_matrix(coords);
    let max_d = dist.iter().copied().fold(0.0, f64::max);
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dist[(i, j)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    let typical_nn = nn[n / 2];

    let mean = values.iter().sum::<f64>() / n as f64;
    let spread = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if spread <= VARIANCE_FLOOR * mean.abs().max(1.0).powi(2) {
        let variance = VARIANCE_FLOOR * mean.abs().max(1.0).powi(2);
        return Ok(KrigingModel {
            variance,
            range_km: max_d.max(1.0),
            nugget: NUGGET_FLOOR * variance,
            mean,
        });
    }

    let y = DVector::from_column_slice(values);
    let range_lo = (0.5 * typical_nn).min(0.05 * max_d).max(1e-3);
    let range_hi = 2.0 * max_d;
    const RANGE_STEPS: usize = 14;
    const ETAS: [f64; 9] = [NUGGET_FLOOR, 1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3, 1.0, 3.0];

    let mut best: Option<(f64, f64, f64)> = None;
    for k in 0..RANGE_STEPS {
        let range = range_lo * (range_hi / range_lo).powf(k as f64 / (RANGE_STEPS - 1) as f64);
        for &eta in &ETAS {
            if let Some(p) = profile(&dist, &y, range, eta) {
                if best.is_none_or(|b| p.log_lik > b.0) {
                    best = Some((p.log_lik, range, eta));
                }
            }
        }
    }
    let (_, range0, eta0) = best.ok_or_else(|| {
        Error::Numeric("no admissible covariance parameters on the search grid".into())
    })?;

    let (lr_lo, lr_hi) = ((0.1 * range_lo).ln(), (10.0 * range_hi).ln());
    let (le_lo, le_hi) = (NUGGET_FLOOR.ln(), 10f64.ln());
    let objective = |v: &[f64]| {
        if v[0] < lr_lo || v[0] > lr_hi || v[1] < le_lo || v[1] > le_hi {
            return f64::INFINITY;
        }
        profile(&dist, &y, v[0].exp(), v[1].exp()).map_or(f64::INFINITY, |p| -p.log_lik)
    };
    let refined = nelder_mead(
        objective,
        &[range0.ln(), eta0.ln()],
        &SimplexOptions {
            steps: vec![0.3, 1.0],
            x_tol: 1e-6,
            max_evals: 400,
        },
    );
    let (range, eta) = (refined.x[0].exp(), refined.x[1].exp());
    let p = profile(&dist, &y, range, eta)
        .ok_or_else(|| Error::Numeric("covariance refinement left the admissible region".into()))?;
    Ok(KrigingModel {
        variance: p.variance,
        range_km: range,
        nugget: eta * p.variance,
        mean: p.mean,
    })
}

/// Simple-kriging predictions at the grid cells, using the model's mean.
/// With a zero nugget the predictor interpolates the data.
pub fn krige(
    model: &KrigingModel,
    coords: &[LonLat],
    values: &[f64],
    grid: &Grid,
) -> Result<KrigingPrediction> {
    check_inputs(coords, values)?;
    if grid.is_empty() {
        return Err(Error::invalid("empty prediction grid"));
    }
    if coords.is_empty() || !(model.variance > 0.0) {
        return Ok(KrigingPrediction {
            mean: vec![model.mean; grid.len()],
            sd: vec![0.0; grid.len()],
        });
    }
    // Try the model's own nugget first so a zero nugget interpolates exactly.
    let exact = correlation_matrix(&distance_matrix(coords), model.range_km, (model.nugget / model.variance).max(0.0));
    let chol = match Cholesky::new(exact * model.variance) {
        Some(c) => c,
        None => factor(model.covariance_matrix(coords))?,
    };
    let resid = DVector::from_iterator(values.len(), values.iter().map(|v| v - model.mean));
    let alpha = chol.solve(&resid);
    let mut mean = Vec::with_capacity(grid.len());
    let mut sd = Vec::with_capacity(grid.len());
    for cell in &grid.cells {
        let k = DVector::from_iterator(coords.len(), coords.iter().map(|c| model.covariance(cell, c)));
        mean.push(model.mean + k.dot(&alpha));
        let v = model.variance - k.dot(&chol.solve(&k));
        sd.push(v.max(0.0).sqrt());
    }
    Ok(KrigingPrediction { mean, sd })
}

/// Kriging predictor as a fixed linear map from station values to target
/// values, with the constant mean re-estimated (generalized least squares)
/// from whatever values it is applied to.
///
/// Only the correlation structure (range and nugget ratio) enters the
/// weights, so the map can be reused for any field that shares it. Applied
/// to the values the model was fitted on it reproduces [`krige`].
#[derive(Debug, Clone)]
pub struct KrigingOperator {
    n_sources: usize,
    weights: Vec<f64>,
}

impl KrigingOperator {
    pub fn new(model: &KrigingModel, sources: &[LonLat], targets: &[LonLat]) -> Result<Self> {
        ensure_distinct(sources)?;
        if sources.is_empty() {
            return Err(Error::invalid("kriging operator needs at least one source"));
        }
        let n = sources.len();
        let eta = model.nugget_ratio();
        let chol = factor(correlation_matrix(&distance_matrix(sources), model.range_km, eta))?;
        let ones = DVector::from_element(n, 1.0);
        let ki1 = chol.solve(&ones);
        let gls = &ki1 / ones.dot(&ki1);

        let mut weights = Vec::with_capacity(targets.len() * n);
        for t in targets {
            let k = DVector::from_iterator(n, sources.iter().map(|s| matern32(t.distance_km(s), model.range_km)));
            let w = chol.solve(&k);
            let slack = 1.0 - w.sum();
            weights.extend(w.iter().zip(gls.iter()).map(|(wi, gi)| wi + slack * gi));
        }
        Ok(KrigingOperator {
            n_sources: n,
            weights,
        })
    }

    pub fn n_targets(&self) -> usize {
        self.weights.len() / self.n_sources
    }

    /// Weights of target `i` (they sum to one).
    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_sources..(i + 1) * self.n_sources]
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n_sources, "one value per source");
        self.weights
            .chunks_exact(self.n_sources)
            .map(|w| w.iter().zip(values).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sites(n: usize, seed: u64) -> Vec<LonLat> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| LonLat::new(rng.random_range(-105.0..-85.0), rng.random_range(30.0..45.0)))
            .collect()
    }

    fn smooth_values(coords: &[LonLat]) -> Vec<f64> {
        coords
            .iter()
            .map(|c| 5.0 + (c.lon / 4.0).sin() + 0.5 * (c.lat / 3.0).cos())
            .collect()
    }

    #[test]
    fn constant_field_predicts_constant() {
        let c = sites(15, 1);
        let v = vec![3.25; 15];
        let m = fit_kriging_model(&c, &v).unwrap();
        assert!(m.variance <= VARIANCE_FLOOR * 3.25f64.powi(2) * 1.0001);
        let g = Grid::from_points(sites(7, 2), 0.1).unwrap();
        let p = krige(&m, &c, &v, &g).unwrap();
        assert!(p.mean.iter().all(|x| (x - 3.25).abs() < 1e-12));
        let op = KrigingOperator::new(&m, &c, &g.cells).unwrap();
        assert!(op.apply(&v).iter().all(|x| (x - 3.25).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = sites(5, 1);
        assert!(matches!(
            fit_kriging_model(&c, &[1.0, 2.0, 3.0, 4.0, 5.0]),
            Err(Error::InsufficientData { needed: 10, got: 5 })
        ));
        let mut dup = sites(12, 3);
        dup[4] = dup[7];
        assert!(matches!(fit_kriging_model(&dup, &[0.5; 12]), Err(Error::InvalidArgument(_))));
        let m = KrigingModel {
            variance: 1.0,
            range_km: 100.0,
            nugget: 0.0,
            mean: 0.0,
        };
        let empty = Grid {
            cells: vec![],
            resolution: 1.0,
        };
        assert!(krige(&m, &c, &[0.0; 5], &empty).is_err());
    }

    #[test]
    fn interpolates_without_nugget() {
        let c = sites(30, 4);
        let v = smooth_values(&c);
        let mut m = fit_kriging_model(&c, &v).unwrap();
        m.nugget = 0.0;
        let g = Grid::from_points(c.clone(), 0.01).unwrap();
        let p = krige(&m, &c, &v, &g).unwrap();
        for (a, b) in p.mean.iter().zip(&v) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn far_field_reverts_to_mean() {
        let c = sites(20, 5);
        let v = smooth_values(&c);
        let m = KrigingModel {
            variance: 2.0,
            range_km: 200.0,
            nugget: 0.01,
            mean: 4.0,
        };
        // other side of the globe
        let g = Grid::from_points(vec![LonLat::new(80.0, -40.0)], 1.0).unwrap();
        let p = krige(&m, &c, &v, &g).unwrap();
        assert!((p.mean[0] - 4.0).abs() < 1e-12);
        assert!((p.sd[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn operator_matches_simple_kriging_on_fitted_values() {
        let c = sites(25, 6);
        let v = smooth_values(&c);
        let m = fit_kriging_model(&c, &v).unwrap();
        let g = Grid::from_points(sites(40, 7), 0.1).unwrap();
        let p = krige(&m, &c, &v, &g).unwrap();
        let op = KrigingOperator::new(&m, &c, &g.cells).unwrap();
        for (a, b) in op.apply(&v).iter().zip(&p.mean) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        for i in 0..op.n_targets() {
            assert!((op.weights(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        // a constant residual field predicts nothing beyond the mean
        let shifted: Vec<f64> = vec![m.mean; c.len()];
        let q = krige(&m, &c, &shifted, &g).unwrap();
        assert!(q.mean.iter().all(|x| (x - m.mean).abs() < 1e-10));
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let c = sites(40, 8);
        let m = KrigingModel {
            variance: 1.5,
            range_km: 350.0,
            nugget: 0.0,
            mean: 0.0,
        };
        let k = m.covariance_matrix(&c);
        assert_eq!(k, k.transpose());
        let eig = k.symmetric_eigenvalues();
        let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-8 * max, "min eigenvalue {min}");
    }

    #[test]
    fn prediction_ignores_station_order() {
        let c = sites(20, 9);
        let v = smooth_values(&c);
        let g = Grid::from_points(sites(10, 10), 0.1).unwrap();
        let m1 = fit_kriging_model(&c, &v).unwrap();
        let p1 = krige(&m1, &c, &v, &g).unwrap();
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.reverse();
        idx.swap(3, 11);
        let c2: Vec<LonLat> = idx.iter().map(|&i| c[i]).collect();
        let v2: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
        let m2 = fit_kriging_model(&c2, &v2).unwrap();
        let p2 = krige(&m2, &c2, &v2, &g).unwrap();
        for (a, b) in p1.mean.iter().zip(&p2.mean) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn leave_one_out_beats_variance() {
        let c = sites(60, 11);
        let v = smooth_values(&c);
        let mut sq = 0.0;
        for i in 0..c.len() {
            let (mut cc, mut vv) = (c.clone(), v.clone());
            let held_c = cc.remove(i);
            let held_v = vv.remove(i);
            let m = fit_kriging_model(&cc, &vv).unwrap();
            let p = krige(&m, &cc, &vv, &Grid::from_points(vec![held_c], 0.1).unwrap()).unwrap();
            sq += (p.mean[0] - held_v).powi(2);
        }
        let mse = sq / c.len() as f64;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!(mse < var, "LOO MSE {mse} vs variance {var}");
    }

    #[test]
    fn recovers_simulated_range() {
        let c = sites(200, 12);
        let truth = KrigingModel {
            variance: 1.0,
            range_km: 300.0,
            nugget: 0.0,
            mean: 2.0,
        };
        let chol = Cholesky::new(truth.covariance_matrix(&c)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = DVector::from_fn(c.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let field = chol.l() * z;
        let v: Vec<f64> = field.iter().map(|x| x + 2.0).collect();
        let m = fit_kriging_model(&c, &v).unwrap();
        assert!(
            m.range_km > 150.0 && m.range_km < 600.0,
            "recovered range {} km",
            m.range_km
        );
    }
}
