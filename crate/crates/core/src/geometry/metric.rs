use nalgebra::DMatrix;

use super::family::ParametrizedFamily;
use crate::error::{Error, Result};
use crate::operator::CVector;

/// Relative disagreement allowed between the overlap and generator routes.
pub const ROUTE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub alpha: Vec<f64>,
    pub g: DMatrix<f64>,
    /// Value from the overlap route, kept for reporting.
    pub g_overlap: DMatrix<f64>,
    pub route_deviation: f64,
}

/// `v_i = G_i |psi>` with `G_i = (d_i U) U^dagger`, by central differences.
pub fn generator_vectors(family: &ParametrizedFamily, alpha: &[f64], h: f64) -> Vec<CVector> {
    let w = family.apply_raw(alpha, family.base_state(), true);
    (0..family.k())
        .map(|i| family.apply_derivative(alpha, i, h, &w, false))
        .collect()
}

/// `g_ij = -1/2 <{G_i, G_j}> + <G_i><G_j>`; with `G` anti-Hermitian this is
/// `Re <v_i|v_j> - Im<psi|v_i> Im<psi|v_j>`.
pub fn generator_route(family: &ParametrizedFamily, alpha: &[f64], h: f64) -> DMatrix<f64> {
    let v = generator_vectors(family, alpha, h);
    let psi = family.base_state();
    let k = v.len();
    let im: Vec<f64> = v.iter().map(|vi| psi.dotc(vi).im).collect();
    DMatrix::from_fn(k, k, |i, j| v[i].dotc(&v[j]).re - im[i] * im[j])
}

fn infidelity(a: &CVector, b: &CVector) -> f64 {
    // |b - <a|b> a|^2 = 1 - |<a|b>|^2 for unit vectors, without cancellation
    let proj = a.dotc(b);
    (b - a * proj).norm_squared()
}

/// Quadratic fit of `1 - |<psi(alpha)|psi(alpha + delta)>|^2` over the `±h` stencil.
pub fn overlap_route(family: &ParametrizedFamily, alpha: &[f64], h: f64) -> DMatrix<f64> {
    let k = family.k();
    let psi = family.base_state();
    let a = family.apply_raw(alpha, psi, true);
    let f = |delta: &[(usize, f64)]| {
        let mut x = alpha.to_vec();
        for &(i, d) in delta {
            x[i] += d;
        }
        infidelity(&a, &family.apply_raw(&x, psi, true))
    };
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        g[(i, i)] = (f(&[(i, h)]) + f(&[(i, -h)])) / (2.0 * h * h);
        for j in 0..i {
            let pp = f(&[(i, h), (j, h)]) + f(&[(i, -h), (j, -h)]);
            let pm = f(&[(i, h), (j, -h)]) + f(&[(i, -h), (j, h)]);
            let gij = (pp - pm) / (8.0 * h * h);
            g[(i, j)] = gij;
            g[(j, i)] = gij;
        }
    }
    g
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// The metric at `alpha`, computed by both routes and cross-checked.
pub fn fs_metric(family: &ParametrizedFamily, alpha: &[f64]) -> Result<MetricSample> {
    family.check_unitary(alpha)?;
    let h = family.fd_step();
    let g = generator_route(family, alpha, h);
    let g_overlap = overlap_route(family, alpha, h);
    let scale = max_abs(&g).max(f64::MIN_POSITIVE);
    let route_deviation = max_abs(&(&g - &g_overlap)) / scale;
    if !(route_deviation <= ROUTE_TOL) {
        return Err(Error::RouteMismatch {
            deviation: route_deviation,
            alpha: alpha.to_vec(),
        });
    }
    Ok(MetricSample {
        alpha: alpha.to_vec(),
        g,
        g_overlap,
        route_deviation,
    })
}
