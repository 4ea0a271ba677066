//! Nelder–Mead simplex minimization.
//!
//! Objectives may return `f64::INFINITY` to reject a point (constraint
//! violations are handled that way throughout the crate). The starting point
//! itself must evaluate to a finite value.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Initial edge length along each coordinate.
    pub steps: Vec<f64>,
    /// Converged once every vertex lies within this (infinity-norm) distance
    /// of the best vertex.
    pub x_tol: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimize `f` from `x0`.
///
/// Besides the diameter test, the search also stops (as converged) when the
/// objective spread across the simplex has fallen to the rounding level of
/// `f`, since no further progress can be resolved in floating point.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(opts.steps.len(), n, "one step per coordinate");

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    vals.push(f(x0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.steps[i];
        let mut fv = f(&v);
        if !fv.is_finite() {
            // try the opposite direction before giving up on this edge
            v[i] = x0[i] - opts.steps[i];
            fv = f(&v);
        }
        verts.push(v);
        vals.push(fv);
    }
    let mut evals = 2 * n + 1;

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut xr = vec![0.0; n];
    let mut xe = vec![0.0; n];
    let mut xc = vec![0.0; n];

    let mut converged = false;
    while evals < opts.max_evals {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let diam = verts
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&verts[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = vals[worst] - vals[best];
        if diam < opts.x_tol
            || (spread.is_finite() && spread <= 16.0 * f64::EPSILON * vals[best].abs())
        {
            converged = true;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&verts[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        for j in 0..n {
            xr[j] = centroid[j] + REFLECT * (centroid[j] - verts[worst][j]);
        }
        let fr = f(&xr);
        evals += 1;

        if fr < vals[best] {
            for j in 0..n {
                xe[j] = centroid[j] + EXPAND * (xr[j] - centroid[j]);
            }
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                verts[worst].copy_from_slice(&xe);
                vals[worst] = fe;
            } else {
                verts[worst].copy_from_slice(&xr);
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            verts[worst].copy_from_slice(&xr);
            vals[worst] = fr;
            continue;
        }

        let outside = fr < vals[worst];
        for j in 0..n {
            xc[j] = if outside {
                centroid[j] + CONTRACT * (xr[j] - centroid[j])
            } else {
                centroid[j] + CONTRACT * (verts[worst][j] - centroid[j])
            };
        }
        let fc = f(&xc);
        evals += 1;
        let accept = if outside { fc <= fr } else { fc < vals[worst] };
        if accept {
            verts[worst].copy_from_slice(&xc);
            vals[worst] = fc;
            continue;
        }

        let anchor = verts[best].clone();
        for &i in &order[1..] {
            for j in 0..n {
                verts[i][j] = anchor[j] + SHRINK * (verts[i][j] - anchor[j]);
            }
            vals[i] = f(&verts[i]);
            evals += 1;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("simplex has at least one vertex");
    SimplexResult {
        x: verts[best].clone(),
        f: vals[best],
        evals,
        converged,
    }
}
