use std::f64::consts::PI;

use super::annihilation;
use super::families::{FamilyKind, ModelFamily};
use super::spin::spin_matrices;
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::geometry::{CoordSample, CoordinateTrajectory};
use crate::operator::{CMatrix, CVector, C64};

/// Largest reconstruction residual accepted from a projection.
pub const PROJECTION_TOL: f64 = 1e-6;
/// Angles are undefined where the quantity they are read from is below this.
const ANGLE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub traj: CoordinateTrajectory,
    /// Reconstruction residual per sample (up to a global phase).
    pub residual: Vec<f64>,
}

impl Projection {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Continuous branch of a sequence of angles defined modulo `period`.
/// Undefined entries take the previous value; leading ones the first defined.
fn unwrap(raw: &[Option<f64>], period: f64) -> Vec<f64> {
    let first = raw.iter().flatten().next().copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(raw.len());
    let mut prev = first;
    for r in raw {
        let v = match r {
            Some(x) => x - period * ((x - prev) / period).round(),
            None => prev,
        };
        out.push(v);
        prev = v;
    }
    out
}

fn flow_unitaries(flow: &FlowTrajectory) -> Result<Vec<&CMatrix>> {
    flow.samples
        .iter()
        .map(|s| {
            s.u.as_ref().ok_or_else(|| {
                Error::InvalidInput("projection needs a flow with the unitary tracked".into())
            })
        })
        .collect()
}

/// `max |A - e^{i chi} B|` over the window, with the best `chi`.
fn phase_residual(a: &CMatrix, b: &CMatrix, window: &[usize]) -> f64 {
    let mut overlap = C64::new(0.0, 0.0);
    for &i in window {
        for &j in window {
            overlap += b[(i, j)].conj() * a[(i, j)];
        }
    }
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut worst = 0.0f64;
    for &i in window {
        for &j in window {
            worst = worst.max((a[(i, j)] - b[(i, j)] * phase).norm());
        }
    }
    worst
}

fn state_residual(a: &CVector, b: &CVector) -> f64 {
    let overlap = b.dotc(a);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    (a - b * phase).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Reads family coordinates off every sample of a flow with tracked `U`,
/// so that `U(alpha(l)) = U(l)` up to a global phase.
pub fn coordinate_projection(flow: &FlowTrajectory, mf: &ModelFamily) -> Result<Projection> {
    let us = flow_unitaries(flow)?;
    let fam = &mf.family;
    if flow.first().h.dim() != fam.dim() {
        return Err(Error::DimMismatch {
            left: fam.dim(),
            right: flow.first().h.dim(),
        });
    }
    let alpha: Vec<Vec<f64>> = match mf.kind {
        FamilyKind::Displacement { n_max } => {
            let a = annihilation(n_max);
            us.iter()
                .map(|u| {
                    // U a U^dagger = a - z
                    let z = -(u.row(0) * &a * u.row(0).adjoint())[(0, 0)];
                    vec![z.re * 2f64.sqrt(), z.im * 2f64.sqrt()]
                })
                .collect()
        }
        FamilyKind::Squeeze { n_max, .. } => {
            let a = annihilation(n_max);
            let mut r = Vec::with_capacity(us.len());
            let mut phi = Vec::with_capacity(us.len());
            for u in &us {
                // <1|U a U^dagger|0> = -e^{-2 i phi} sinh r
                let m10 = (u.row(1) * &a * u.row(0).adjoint())[(0, 0)];
                r.push(m10.norm().asinh());
                phi.push((m10.norm() > ANGLE_FLOOR).then(|| -0.5 * (-m10).arg()));
            }
            r.into_iter()
                .zip(unwrap(&phi, PI))
                .map(|(r, p)| vec![r, p])
                .collect()
        }
        FamilyKind::Spin { s, .. } => {
            let sm = spin_matrices(s)?;
            let szz = (&sm.sz * &sm.sz).trace().re;
            let mut theta = Vec::with_capacity(us.len());
            let mut phi = Vec::with_capacity(us.len());
            for u in &us {
                let rot = |op: &CMatrix| ((*u) * op * u.adjoint() * &sm.sz).trace().re / szz;
                let (x, y, z) = (rot(&sm.sx), rot(&sm.sy), rot(&sm.sz));
                theta.push(z.clamp(-1.0, 1.0).acos());
                phi.push((x.hypot(y) > ANGLE_FLOOR).then(|| y.atan2(x)));
            }
            theta
                .into_iter()
                .zip(unwrap(&phi, 2.0 * PI))
                .map(|(t, p)| vec![t, p])
                .collect()
        }
        FamilyKind::Jc { .. } => {
            let w = fam.window();
            let (ie, ig) = (w[0], w[1]);
            let mut amp = Vec::with_capacity(us.len());
            let mut ta = Vec::with_capacity(us.len());
            let mut tg = Vec::with_capacity(us.len());
            for u in &us {
                let beta = u[(ig, ig)];
                let fix = if beta.norm() > 0.0 {
                    beta.conj() / beta.norm()
                } else {
                    C64::new(1.0, 0.0)
                };
                let (al, ga) = (u[(ie, ie)] * fix, u[(ie, ig)] * fix);
                amp.push((0.5 * (al.norm() + beta.norm())).min(1.0));
                ta.push((al.norm() > ANGLE_FLOOR).then(|| al.arg()));
                tg.push((ga.norm() > ANGLE_FLOOR).then(|| ga.arg()));
            }
            let ta = unwrap(&ta, 2.0 * PI);
            let tg = unwrap(&tg, 2.0 * PI);
            (0..us.len()).map(|k| vec![amp[k], ta[k], tg[k]]).collect()
        }
    };

    let residual: Vec<f64> = alpha
        .iter()
        .zip(&us)
        .map(|(a, u)| match mf.kind {
            FamilyKind::Displacement { .. } | FamilyKind::Squeeze { .. } => {
                let psi = fam.base_state();
                state_residual(&fam.apply_raw(a, psi, true), &u.ad_mul(psi))
            }
            FamilyKind::Spin { .. } | FamilyKind::Jc { .. } => {
                phase_residual(&fam.unitary_raw(a), u, &fam.window())
            }
        })
        .collect();
    for (k, r) in residual.iter().enumerate() {
        if !(*r <= PROJECTION_TOL) {
            return Err(Error::NotInFamily {
                family: fam.name().to_string(),
                residual: *r,
                l: flow.samples[k].l,
            });
        }
    }

    let names = fam.coord_names().to_vec();
    let l = flow.ls();
    let traj = if l.len() < 2 {
        CoordinateTrajectory {
            samples: l
                .iter()
                .zip(&alpha)
                .map(|(&l, a)| CoordSample {
                    l,
                    alpha: a.clone(),
                    alpha_dot: vec![0.0; a.len()],
                })
                .collect(),
            names,
        }
    } else {
        CoordinateTrajectory::from_curve(names, l, alpha)?
    };
    Ok(Projection { traj, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_carries_and_backfills() {
        let v = unwrap(
            &[None, Some(0.1), Some(2.0 * PI - 0.1), None, Some(0.2)],
            2.0 * PI,
        );
        assert_eq!(v[0], 0.1);
        assert!((v[2] + 0.1).abs() < 1e-15);
        assert_eq!(v[3], v[2]);
        assert!((v[4] - 0.2).abs() < 1e-15);
    }
}
