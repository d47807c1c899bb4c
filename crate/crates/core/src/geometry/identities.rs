use rayon::prelude::*;

use super::family::{CoordinateTrajectory, ParametrizedFamily};
use super::geodesic::arc_length;
use crate::diff::{first_derivative, first_derivative_vec, is_uniform};
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::operator::{CMatrix, CVector, C64};

fn check_aligned(
    traj: &CoordinateTrajectory,
    flow: &FlowTrajectory,
    family: &ParametrizedFamily,
) -> Result<()> {
    if traj.len() != flow.samples.len() {
        return Err(Error::DimMismatch {
            left: traj.len(),
            right: flow.samples.len(),
        });
    }
    if flow.first().h.dim() != family.dim() {
        return Err(Error::DimMismatch {
            left: family.dim(),
            right: flow.first().h.dim(),
        });
    }
    if traj
        .samples
        .iter()
        .zip(&flow.samples)
        .any(|(a, b)| (a.l - b.l).abs() > 1e-12 * (1.0 + b.l.abs()))
    {
        return Err(Error::InvalidInput(
            "coordinate and flow trajectories use different l grids".into(),
        ));
    }
    Ok(())
}

/// Column `n` of `G_i = (d_i U) U^dagger`, i.e. `(d_i U) U^dagger |u_n>`.
/// Row `n` follows from anti-Hermiticity.
fn generator_columns(family: &ParametrizedFamily, alpha: &[f64], n: usize) -> Vec<CVector> {
    let h = family.fd_step();
    let mut e = CVector::zeros(family.dim());
    e[n] = C64::new(1.0, 0.0);
    let w = family.apply_raw(alpha, &e, true);
    (0..family.k())
        .map(|i| family.apply_derivative(alpha, i, h, &w, false))
        .collect()
}

/// `<u_n|A B|u_n>` for anti-Hermitian `A`, `B` given by their `n`-th columns.
fn ah_product_nn(a_col: &[C64], b_col: &[C64]) -> C64 {
    // A_{nk} = -conj(A_{kn})
    -a_col
        .iter()
        .zip(b_col)
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiResidual {
    pub l: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    /// Largest magnitude of either product in the expression over all samples.
    pub scale: f64,
}

impl XiResidual {
    pub fn max_abs(&self) -> f64 {
        self.xi.iter().flatten().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn max_relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs() / self.scale
        } else {
            self.max_abs()
        }
    }
}

/// `X_i = 2 <eta^2> <{eta_dot, G_i}> - <d eta^2/dl> <G_i eta + eta G_i>` in `|u_n>`,
/// with `eta` the generator used by the flow and `G_i` from the family.
pub fn xi_residual(
    family: &ParametrizedFamily,
    traj: &CoordinateTrajectory,
    flow: &FlowTrajectory,
    n: usize,
) -> Result<XiResidual> {
    check_aligned(traj, flow, family)?;
    if n >= family.dim() {
        return Err(Error::IndexOverflow {
            index: n,
            dim: family.dim(),
        });
    }
    let len = traj.len();
    if len < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: len,
        });
    }
    let l = traj.ls();
    let eta_cols: Vec<Vec<C64>> = (0..len)
        .map(|k| {
            flow.generator_at(k)
                .matrix()
                .column(n)
                .iter()
                .copied()
                .collect()
        })
        .collect();
    let eta_sq: Vec<f64> = eta_cols.iter().map(|c| ah_product_nn(c, c).re).collect();
    let eta_dot = first_derivative_vec(&l, &eta_cols);
    let eta_sq_dot = first_derivative(&l, &eta_sq);
    // five-point stencils only, when the grid allows them
    let interior = if len >= 5 && is_uniform(&l) {
        2..len - 2
    } else {
        1..len - 1
    };
    let rows: Vec<Option<(f64, Vec<f64>, f64)>> = interior
        .into_par_iter()
        .map(|k| {
            let (Some(ed), Some(esd)) = (&eta_dot[k], eta_sq_dot[k]) else {
                return None;
            };
            if !family.is_regular(&traj.samples[k].alpha) {
                return None;
            }
            let g_cols = generator_columns(family, &traj.samples[k].alpha, n);
            let mut scale = 0.0f64;
            let xi = g_cols
                .iter()
                .map(|g| {
                    let g: Vec<C64> = g.iter().copied().collect();
                    let anti = (ah_product_nn(ed, &g) + ah_product_nn(&g, ed)).re;
                    let sym =
                        (ah_product_nn(&g, &eta_cols[k]) + ah_product_nn(&eta_cols[k], &g)).re;
                    let t1 = 2.0 * eta_sq[k] * anti;
                    let t2 = esd * sym;
                    scale = scale.max(t1.abs()).max(t2.abs());
                    t1 - t2
                })
                .collect();
            Some((l[k], xi, scale))
        })
        .collect();
    let mut out = XiResidual {
        l: Vec::new(),
        xi: Vec::new(),
        scale: 0.0,
    };
    for (lk, xi, s) in rows.into_iter().flatten() {
        out.l.push(lk);
        out.xi.push(xi);
        out.scale = out.scale.max(s);
    }
    Ok(out)
}

fn windowed_max(m: &CMatrix, window: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for &i in window {
        for &j in window {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// Per-sample `|G_i(alpha(l)) alpha_dot^i - eta_flow(l)|_max` on the family's
/// comparison window, at regular samples where five-point velocities exist.
/// With `column = Some(n)` only the `n`-th column is compared (rows still
/// restricted to the window), which is the state-level form of the check.
pub fn generator_consistency(
    family: &ParametrizedFamily,
    traj: &CoordinateTrajectory,
    flow: &FlowTrajectory,
    column: Option<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_aligned(traj, flow, family)?;
    let len = traj.len();
    if len < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            got: len,
        });
    }
    if let Some(n) = column {
        if n >= family.dim() {
            return Err(Error::IndexOverflow {
                index: n,
                dim: family.dim(),
            });
        }
    }
    let window = family.window();
    let h = family.fd_step();
    let kept: Vec<usize> = (2..len - 2)
        .filter(|&k| family.is_regular(&traj.samples[k].alpha))
        .collect();
    let res: Vec<f64> = kept
        .par_iter()
        .map(|&k| {
            let s = &traj.samples[k];
            let gens = family
                .generators(&s.alpha, h)
                .expect("trajectory arity checked");
            let mut eta = flow.generator_at(k).into_matrix();
            for (g, v) in gens.iter().zip(&s.alpha_dot) {
                eta -= g * C64::new(*v, 0.0);
            }
            match column {
                Some(n) => window
                    .iter()
                    .fold(0.0f64, |a, &i| a.max(eta[(i, n)].norm())),
                None => windowed_max(&eta, &window),
            }
        })
        .collect();
    Ok((kept.iter().map(|&k| traj.samples[k].l).collect(), res))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRelationResidual {
    pub l: Vec<f64>,
    /// Per evaluated sample, one max-norm residual per coordinate.
    pub residual: Vec<Vec<f64>>,
}

impl GeneratorRelationResidual {
    pub fn max_abs(&self) -> f64 {
        self.residual
            .iter()
            .flatten()
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// `|dG_i/dl - alpha_dot^j d_i G_j - [eta, G_i]|_max` with `eta = G_j alpha_dot^j`,
/// evaluated at every `stride`-th interior sample.
///
/// `h` is the coordinate step for both `G` and its coordinate derivative.
pub fn generator_relation_residual(
    family: &ParametrizedFamily,
    traj: &CoordinateTrajectory,
    h: f64,
    stride: usize,
) -> Result<GeneratorRelationResidual> {
    let len = traj.len();
    if len < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            got: len,
        });
    }
    if traj.k() != family.k() {
        return Err(Error::DimMismatch {
            left: family.k(),
            right: traj.k(),
        });
    }
    let k = family.k();
    let window = family.window();
    let w = window.len();
    let pick = |m: &CMatrix| -> Vec<C64> {
        let mut v = Vec::with_capacity(w * w);
        for &i in &window {
            for &j in &window {
                v.push(m[(i, j)]);
            }
        }
        v
    };
    let l = traj.ls();
    let gens: Vec<Vec<CMatrix>> = traj
        .samples
        .par_iter()
        .map(|s| {
            family
                .generators(&s.alpha, h)
                .expect("trajectory arity checked")
        })
        .collect();
    let mut gen_dots: Vec<Vec<Option<Vec<C64>>>> = Vec::with_capacity(k);
    for i in 0..k {
        let series: Vec<Vec<C64>> = gens.iter().map(|g| pick(&g[i])).collect();
        gen_dots.push(first_derivative_vec(&l, &series));
    }
    let stride = stride.max(1);
    let evaluated: Vec<usize> = (2..len - 2).step_by(stride).collect();
    let residual: Vec<Vec<f64>> = evaluated
        .par_iter()
        .map(|&kk| {
            let s = &traj.samples[kk];
            let g_here = &gens[kk];
            let d = family.dim();
            let mut eta = CMatrix::zeros(d, d);
            for (g, v) in g_here.iter().zip(&s.alpha_dot) {
                eta += g * C64::new(*v, 0.0);
            }
            // d_i G_j for all i, j
            let dg: Vec<Vec<CMatrix>> = (0..k)
                .map(|i| {
                    let mut acc = vec![CMatrix::zeros(d, d); k];
                    for (pt, w) in family.stencil(&s.alpha, i, h) {
                        let g = family.generators(&pt, h).expect("arity");
                        for (a, gj) in acc.iter_mut().zip(&g) {
                            *a += gj * C64::new(w, 0.0);
                        }
                    }
                    acc
                })
                .collect();
            (0..k)
                .map(|i| {
                    let mut rhs = &eta * &g_here[i] - &g_here[i] * &eta;
                    for (j, v) in s.alpha_dot.iter().enumerate() {
                        rhs += &dg[i][j] * C64::new(*v, 0.0);
                    }
                    let dot = gen_dots[i][kk].as_ref().expect("interior sample");
                    pick(&rhs)
                        .iter()
                        .zip(dot)
                        .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()))
                })
                .collect()
        })
        .collect();
    Ok(GeneratorRelationResidual {
        l: evaluated.iter().map(|&kk| l[kk]).collect(),
        residual,
    })
}

/// Per-sample relative mismatch between `ds/dl` from the metric and
/// `sqrt(<eta^dagger eta> - |<eta>|^2)` in `|u_n>` with the flow generator,
/// at samples with speed above `speed_cut_rel` of the maximum.
pub fn speed_consistency(
    family: &ParametrizedFamily,
    traj: &CoordinateTrajectory,
    flow: &FlowTrajectory,
    n: usize,
    speed_cut_rel: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_aligned(traj, flow, family)?;
    let arc = arc_length(traj, family)?;
    let max_speed = arc.speed.iter().fold(0.0f64, |a, &b| a.max(b));
    let len = traj.len();
    let mut ls = Vec::new();
    let mut res = Vec::new();
    for k in 2..len.saturating_sub(2) {
        if arc.speed[k] < speed_cut_rel * max_speed
            || arc.speed[k] == 0.0
            || !family.is_regular(&traj.samples[k].alpha)
        {
            continue;
        }
        let col: Vec<C64> = flow
            .generator_at(k)
            .matrix()
            .column(n)
            .iter()
            .copied()
            .collect();
        let second = col.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let first = col[n].norm_sqr();
        let var_speed = (second - first).max(0.0).sqrt();
        ls.push(traj.samples[k].l);
        res.push((arc.speed[k] - var_speed).abs() / arc.speed[k]);
    }
    Ok((ls, res))
}
