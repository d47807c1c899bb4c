use nalgebra::DVector;
use rayon::prelude::*;

use super::family::{CoordinateTrajectory, ParametrizedFamily};
use super::metric::generator_route;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalOptions {
    /// Node perturbation for the central difference of the discrete length.
    pub h_var: f64,
    /// Samples closer than this many `h_var` (in coordinate norm) to the
    /// previous kept node are skipped; shorter segments turn the perturbation
    /// into a kink.
    pub min_segment_ratio: f64,
    /// Nodes next to a segment whose midpoint and trapezoid lengths differ by
    /// more than this fraction are skipped: the polygon does not resolve the
    /// metric there.
    pub resolution_rel: f64,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        VariationalOptions {
            h_var: 1e-5,
            min_segment_ratio: 300.0,
            resolution_rel: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalGradient {
    pub index: Vec<usize>,
    pub l: Vec<f64>,
    /// `dS/d alpha_j^i` per varied node, divided by the node's share
    /// `(l_{j+1} - l_{j-1}) / 2` of the flow parameter so that it estimates
    /// the functional derivative `delta S / delta alpha^i(l)`.
    pub gradient: Vec<Vec<f64>>,
    /// Discrete length of the unperturbed polygon.
    pub length: f64,
}

impl VariationalGradient {
    pub fn max_abs(&self) -> f64 {
        self.gradient
            .iter()
            .flatten()
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

fn length_at(family: &ParametrizedFamily, at: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d = DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| y - x));
    let g = generator_route(family, at, family.fd_step());
    d.dot(&(g * &d)).max(0.0).sqrt()
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Simpson estimate of the length of the coordinate-straight segment.
fn segment(family: &ParametrizedFamily, a: &[f64], b: &[f64]) -> f64 {
    let mid = length_at(family, &midpoint(a, b), a, b);
    (length_at(family, a, a, b) + 4.0 * mid + length_at(family, b, a, b)) / 6.0
}

fn resolved(family: &ParametrizedFamily, a: &[f64], b: &[f64], rel: f64) -> bool {
    let mid = length_at(family, &midpoint(a, b), a, b);
    let trap = 0.5 * (length_at(family, a, a, b) + length_at(family, b, a, b));
    (mid - trap).abs() <= rel * mid
}

fn coord_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Gradient of the polygonal arc length `S = sum_k int sqrt(g d_k d_k)` (Simpson per segment)
/// with respect to each interior node, endpoints held fixed, normalized to
/// a functional derivative. The polygon runs through a thinned subset of the
/// samples (see [`VariationalOptions::min_segment_ratio`]).
pub fn variational_gradient(
    traj: &CoordinateTrajectory,
    family: &ParametrizedFamily,
    opts: &VariationalOptions,
) -> Result<VariationalGradient> {
    let n = traj.len();
    if n < 7 {
        return Err(Error::TooFewSamples { needed: 7, got: n });
    }
    let all: Vec<&[f64]> = traj.samples.iter().map(|s| s.alpha.as_slice()).collect();
    let min_seg = opts.min_segment_ratio * opts.h_var;
    // thin the polygon so that every segment is long enough to be perturbed
    let mut sel = vec![0usize];
    for j in 1..n {
        if coord_dist(all[*sel.last().unwrap()], all[j]) >= min_seg {
            sel.push(j);
        }
    }
    if sel.len() < 3 {
        return Err(Error::StationaryCurve);
    }
    let pts: Vec<&[f64]> = sel.iter().map(|&j| all[j]).collect();
    let m = pts.len();
    let length: f64 = (0..m - 1)
        .into_par_iter()
        .map(|j| segment(family, pts[j], pts[j + 1]))
        .sum();
    if !(length > 0.0) {
        return Err(Error::StationaryCurve);
    }
    let ok: Vec<bool> = (0..m - 1)
        .into_par_iter()
        .map(|j| resolved(family, pts[j], pts[j + 1], opts.resolution_rel))
        .collect();
    let nodes: Vec<usize> = (1..m - 1)
        .filter(|&j| ok[j - 1] && ok[j] && pts[j - 1..=j + 1].iter().all(|p| family.is_regular(p)))
        .collect();
    if nodes.is_empty() {
        return Err(Error::StationaryCurve);
    }
    let k = traj.k();
    let gradient: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&j| {
            let share = 0.5 * (traj.samples[sel[j + 1]].l - traj.samples[sel[j - 1]].l);
            (0..k)
                .map(|i| {
                    let local = |delta: f64| {
                        let mut x = pts[j].to_vec();
                        x[i] += delta;
                        segment(family, pts[j - 1], &x) + segment(family, &x, pts[j + 1])
                    };
                    (local(opts.h_var) - local(-opts.h_var)) / (2.0 * opts.h_var * share)
                })
                .collect()
        })
        .collect();
    Ok(VariationalGradient {
        l: nodes.iter().map(|&j| traj.samples[sel[j]].l).collect(),
        index: nodes.iter().map(|&j| sel[j]).collect(),
        gradient,
        length,
    })
}
