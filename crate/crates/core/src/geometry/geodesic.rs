use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::family::{CoordinateTrajectory, ParametrizedFamily};
use super::metric::generator_route;
use crate::diff::{
    cumulative_trapezoid, first_derivative, integrate, is_uniform, second_derivative,
};
use crate::error::{Error, Result};

/// Smallest metric eigenvalue accepted by [`christoffel`].
pub const NONDEGENERATE_MIN_EIG: f64 = 1e-10;

/// Christoffel symbols at a point. `first[h][(i, j)] = Gamma_{hij}` and
/// `second[h][(i, j)] = Gamma^h_{ij}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub g: DMatrix<f64>,
    pub first: Vec<DMatrix<f64>>,
    pub second: Vec<DMatrix<f64>>,
}

fn metric_derivatives(family: &ParametrizedFamily, alpha: &[f64]) -> Vec<DMatrix<f64>> {
    let h = family.christoffel_step();
    let inner = family.fd_step();
    let k = family.k();
    (0..k)
        .map(|m| {
            let mut dg = DMatrix::zeros(k, k);
            for (pt, w) in family.stencil(alpha, m, h) {
                dg += generator_route(family, &pt, inner) * w;
            }
            dg
        })
        .collect()
}

/// `Gamma_{hij} = 1/2 (d_i g_hj + d_j g_ih - d_h g_ij)`.
fn first_kind(dg: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let k = dg.len();
    (0..k)
        .map(|h| {
            DMatrix::from_fn(k, k, |i, j| {
                0.5 * (dg[i][(h, j)] + dg[j][(i, h)] - dg[h][(i, j)])
            })
        })
        .collect()
}

/// Moore-Penrose inverse of a symmetric matrix, dropping eigenvalues below
/// `rel * max eigenvalue`.
pub(crate) fn symmetric_pinv(g: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(g.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let k = g.nrows();
    let mut out = DMatrix::zeros(k, k);
    for (n, &w) in eig.eigenvalues.iter().enumerate() {
        if w.abs() > rel * top && w.abs() > 0.0 {
            let v = eig.eigenvectors.column(n);
            out += (v * v.transpose()) / w;
        }
    }
    out
}

fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Christoffel symbols from central differences of the metric, raised with `g^{-1}`.
pub fn christoffel(family: &ParametrizedFamily, alpha: &[f64]) -> Result<Christoffel> {
    family.check_domain(alpha)?;
    let g = generator_route(family, alpha, family.fd_step());
    let min = min_eigenvalue(&g);
    if !(min > NONDEGENERATE_MIN_EIG) {
        return Err(Error::DegenerateMetric {
            min_eigenvalue: min,
            alpha: alpha.to_vec(),
        });
    }
    let ginv = g.clone().try_inverse().ok_or(Error::DegenerateMetric {
        min_eigenvalue: min,
        alpha: alpha.to_vec(),
    })?;
    let first = first_kind(&metric_derivatives(family, alpha));
    let second = raise(&ginv, &first);
    Ok(Christoffel { g, first, second })
}

fn raise(ginv: &DMatrix<f64>, first: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let k = first.len();
    (0..k)
        .map(|h| {
            let mut m = DMatrix::zeros(k, k);
            for (l, fl) in first.iter().enumerate() {
                m += fl * ginv[(h, l)];
            }
            m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcLength {
    pub total: f64,
    /// Cumulative length at every sample (trapezoid).
    pub cumulative: Vec<f64>,
    /// `L = ds/dl` at every sample.
    pub speed: Vec<f64>,
}

fn speed(g: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    (v.dot(&(g * &v))).max(0.0).sqrt()
}

/// `S = int L dl` with `L = sqrt(g_ij alpha_dot^i alpha_dot^j)`.
pub fn arc_length(traj: &CoordinateTrajectory, family: &ParametrizedFamily) -> Result<ArcLength> {
    if traj.k() != family.k() {
        return Err(Error::DimMismatch {
            left: family.k(),
            right: traj.k(),
        });
    }
    let h = family.fd_step();
    let speed: Vec<f64> = traj
        .samples
        .par_iter()
        .map(|s| speed(&generator_route(family, &s.alpha, h), &s.alpha_dot))
        .collect();
    let l = traj.ls();
    Ok(ArcLength {
        total: integrate(&l, &speed),
        cumulative: cumulative_trapezoid(&l, &speed),
        speed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    /// Samples with `ds/dl` below this fraction of the maximum are dropped.
    pub speed_cut_rel: f64,
    /// Relative eigenvalue cutoff of the pseudo-inverse used to raise indices.
    pub pinv_rel: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            speed_cut_rel: 1e-2,
            pinv_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResidual {
    /// Trajectory indices of the evaluated samples.
    pub index: Vec<usize>,
    pub l: Vec<f64>,
    /// Arc length at each evaluated sample.
    pub s: Vec<f64>,
    pub speed: Vec<f64>,
    /// `d^2 alpha^h/ds^2 + Gamma^h_ij (d alpha^i/ds)(d alpha^j/ds)`.
    pub residual: Vec<Vec<f64>>,
}

impl GeodesicResidual {
    pub fn max_abs(&self) -> f64 {
        self.residual
            .iter()
            .flatten()
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Geodesic-equation residual of a sampled curve in arc-length parametrization.
///
/// Derivatives with respect to `s` come from derivatives in `l` through the
/// chain rule: `alpha' = alpha_dot / L` and
/// `alpha'' = (alpha_ddot - (L_dot / L) alpha_dot) / L^2`. The equation is formed
/// with lowered index and raised with the pseudo-inverse metric, which is the
/// plain inverse whenever the metric is non-degenerate.
pub fn geodesic_residual(
    traj: &CoordinateTrajectory,
    family: &ParametrizedFamily,
    opts: &GeodesicOptions,
) -> Result<GeodesicResidual> {
    let n = traj.len();
    if n < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: n });
    }
    if traj.k() != family.k() {
        return Err(Error::DimMismatch {
            left: family.k(),
            right: traj.k(),
        });
    }
    let k = traj.k();
    let l = traj.ls();
    let h = family.fd_step();
    let metrics: Vec<DMatrix<f64>> = traj
        .samples
        .par_iter()
        .map(|s| generator_route(family, &s.alpha, h))
        .collect();
    let speeds: Vec<f64> = traj
        .samples
        .iter()
        .zip(&metrics)
        .map(|(s, g)| speed(g, &s.alpha_dot))
        .collect();
    let cumulative = cumulative_trapezoid(&l, &speeds);

    // Interior velocities only, so that L_dot never sees one-sided stencils.
    let interior_l = &l[1..n - 1];
    let speed_dot = first_derivative(interior_l, &speeds[1..n - 1]);
    let mut acc = vec![vec![0.0; k]; n];
    for i in 0..k {
        let comp = traj.component(i);
        for (kk, a) in second_derivative(&l, &comp).into_iter().enumerate() {
            if let Some(a) = a {
                acc[kk][i] = a;
            }
        }
    }
    let max_speed = speeds.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(max_speed > 0.0) {
        return Err(Error::StationaryCurve);
    }
    let cut = opts.speed_cut_rel * max_speed;
    // L_dot at k reads velocities at k +- 2, which are five-point only from index 2 on
    let edge = if n >= 9 && is_uniform(&l) { 4 } else { 2 };
    let kept: Vec<usize> = (edge..n - edge)
        .filter(|&kk| speeds[kk] >= cut && family.is_regular(&traj.samples[kk].alpha))
        .collect();
    if kept.is_empty() {
        return Err(Error::StationaryCurve);
    }
    let rows: Vec<Vec<f64>> = kept
        .par_iter()
        .map(|&kk| {
            let s = &traj.samples[kk];
            let g = &metrics[kk];
            let lv = speeds[kk];
            let ldot = speed_dot[kk - 1].unwrap_or(0.0);
            let v = DVector::from_iterator(k, s.alpha_dot.iter().map(|x| x / lv));
            let a = DVector::from_iterator(
                k,
                (0..k).map(|i| (acc[kk][i] - ldot / lv * s.alpha_dot[i]) / (lv * lv)),
            );
            let first = first_kind(&metric_derivatives(family, &s.alpha));
            let mut lowered = g * &a;
            for (hh, gamma) in first.iter().enumerate() {
                lowered[hh] += v.dot(&(gamma * &v));
            }
            (symmetric_pinv(g, opts.pinv_rel) * lowered)
                .iter()
                .copied()
                .collect()
        })
        .collect();
    Ok(GeodesicResidual {
        l: kept.iter().map(|&kk| l[kk]).collect(),
        s: kept.iter().map(|&kk| cumulative[kk]).collect(),
        speed: kept.iter().map(|&kk| speeds[kk]).collect(),
        index: kept,
        residual: rows,
    })
}
