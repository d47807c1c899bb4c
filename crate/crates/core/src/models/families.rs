use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::annihilation;
use super::jc::jc_index;
use super::spin::{spin_index, spin_matrices};
use crate::error::{Error, Result};
use crate::expm::PhasedExponential;
use crate::geometry::ParametrizedFamily;
use crate::operator::{AntiHermitianOperator, CMatrix, CVector, C64};

/// Smallest Fock cutoff beyond the base level accepted by the oscillator families.
pub const TRUNCATION_MARGIN: usize = 20;
/// Chart regularity floor for the polar-type coordinates.
pub const REGULAR_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyKind {
    Displacement { n_max: usize },
    Squeeze { n: usize, n_max: usize },
    Spin { s: f64, m: f64 },
    Jc { n_max: usize, n: usize },
}

/// A model family: the coordinate map together with what it came from.
#[derive(Debug, Clone)]
pub struct ModelFamily {
    pub kind: FamilyKind,
    pub family: ParametrizedFamily,
    /// Storage index of the base state.
    pub base_index: usize,
}

fn basis(d: usize, n: usize) -> CVector {
    let mut e = CVector::zeros(d);
    e[n] = C64::new(1.0, 0.0);
    e
}

/// Rows kept for operator comparisons in a truncated Fock space: the levels
/// near the base, never reaching into the top tenth.
fn fock_window(n: usize, n_max: usize) -> Vec<usize> {
    let d = n_max + 1;
    let cap = ((9 * d) / 10).saturating_sub(1);
    (0..=(n + 10).min(cap)).collect()
}

fn phased_family(
    name: &str,
    coords: &[&str],
    base: CVector,
    exp: PhasedExponential,
    map: fn(&[f64]) -> (f64, f64),
) -> Result<ParametrizedFamily> {
    let exp = Arc::new(exp);
    let e2 = Arc::clone(&exp);
    ParametrizedFamily::new(name, coords, base, move |a| {
        let (t, phi) = map(a);
        exp.unitary(t, phi)
    })
    .map(|f| {
        f.with_apply(move |a, x, adjoint| {
            let (t, phi) = map(a);
            e2.apply(t, phi, x, adjoint)
        })
    })
}

/// `D(z) = exp(z a^dag - z* a)` with `z = (x + i p)/sqrt(2)`, base `|0>`.
pub fn displacement_family(n_max: usize) -> Result<ModelFamily> {
    if n_max < TRUNCATION_MARGIN {
        return Err(Error::TruncationTooSmall {
            n_max,
            needed: TRUNCATION_MARGIN,
        });
    }
    let a = annihilation(n_max);
    let k0 = AntiHermitianOperator::symmetrize(a.adjoint() - &a);
    let charges = (0..=n_max).map(|n| n as f64).collect();
    let exp = PhasedExponential::new(&k0, charges)?;
    let map = |a: &[f64]| {
        let z = C64::new(a[0], a[1]) / std::f64::consts::SQRT_2;
        (z.norm(), -z.arg())
    };
    let family = phased_family("displacement", &["x", "p"], basis(n_max + 1, 0), exp, map)?
        .with_window(fock_window(0, n_max));
    Ok(ModelFamily {
        kind: FamilyKind::Displacement { n_max },
        family,
        base_index: 0,
    })
}

/// `exp((xi a^dag^2 - xi* a^2)/2)` with `xi = r e^{-2 i phi}`, base `|n>`.
pub fn squeeze_family(n: usize, n_max: usize) -> Result<ModelFamily> {
    if n_max < n + TRUNCATION_MARGIN {
        return Err(Error::TruncationTooSmall {
            n_max,
            needed: n + TRUNCATION_MARGIN,
        });
    }
    let a = annihilation(n_max);
    let k0 = AntiHermitianOperator::symmetrize(
        (a.adjoint() * a.adjoint() - &a * &a) * C64::new(0.5, 0.0),
    );
    let charges = (0..=n_max).map(|n| n as f64).collect();
    let exp = PhasedExponential::new(&k0, charges)?;
    let family = phased_family("squeeze", &["r", "phi"], basis(n_max + 1, n), exp, |a| {
        (a[0], a[1])
    })?
    .with_domain(|a| a[0] >= 0.0)
    .with_regular(|a| a[0].abs() >= REGULAR_FLOOR)
    .with_window(fock_window(n, n_max));
    Ok(ModelFamily {
        kind: FamilyKind::Squeeze { n, n_max },
        family,
        base_index: n,
    })
}

/// `exp(sigma S_+ - sigma* S_-)` with `sigma = (theta/2) e^{-i phi}`, base `|s, m>`.
pub fn spin_family(s: f64, m: f64) -> Result<ModelFamily> {
    let sm = spin_matrices(s)?;
    let j = spin_index(s, m)?;
    let k0 = AntiHermitianOperator::symmetrize((&sm.splus - &sm.sminus) * C64::new(0.5, 0.0));
    let charges = (0..sm.dim()).map(|j| sm.m(j)).collect();
    let exp = PhasedExponential::new(&k0, charges)?;
    let family = phased_family("spin", &["theta", "phi"], basis(sm.dim(), j), exp, |a| {
        (a[0], a[1])
    })?
    .with_domain(|a| (0.0..=PI).contains(&a[0]))
    .with_regular(|a| a[0].sin() >= REGULAR_FLOOR);
    Ok(ModelFamily {
        kind: FamilyKind::Spin { s, m },
        family,
        base_index: j,
    })
}

/// The 2x2 sector unitary on `(|e,n>, |g,n+1>)` in coordinates `(a, theta_alpha, theta_gamma)`.
pub fn jc_sector_matrix(alpha: &[f64]) -> [[C64; 2]; 2] {
    let (a, ta, tg) = (alpha[0], alpha[1], alpha[2]);
    let b = (1.0 - a * a).max(0.0).sqrt();
    let td = ta - tg - PI;
    [
        [C64::from_polar(a, ta), C64::from_polar(b, tg)],
        [C64::from_polar(b, td), C64::new(a, 0.0)],
    ]
}

/// Sector-`n` unitary embedded in the full product space, identity elsewhere; base `|e,n>`.
pub fn jc_family(n_max: usize, n: usize) -> Result<ModelFamily> {
    if n_max < 2 || n >= n_max {
        return Err(Error::InvalidInput(format!(
            "sector {n} needs n < n_max = {n_max} and n_max >= 2"
        )));
    }
    let d = 2 * (n_max + 1);
    let ie = jc_index(n_max, true, n);
    let ig = jc_index(n_max, false, n + 1);
    let idx = [ie, ig];
    let unitary = move |alpha: &[f64]| {
        let blk = jc_sector_matrix(alpha);
        let mut u = CMatrix::identity(d, d);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                u[(i, j)] = blk[r][c];
            }
        }
        u
    };
    let apply = move |alpha: &[f64], x: &CVector, adjoint: bool| {
        let blk = jc_sector_matrix(alpha);
        let mut y = x.clone();
        for r in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..2 {
                let m = if adjoint { blk[c][r].conj() } else { blk[r][c] };
                acc += m * x[idx[c]];
            }
            y[idx[r]] = acc;
        }
        y
    };
    let in_range = |a: &[f64]| (0.0..=1.0).contains(&a[0]);
    let family = ParametrizedFamily::new(
        "jc",
        &["a", "theta_alpha", "theta_gamma"],
        basis(d, ie),
        unitary,
    )?
    .with_apply(apply)
    .with_domain(in_range)
    .with_extent(in_range)
    .with_regular(|a| a[0] * (1.0 - a[0] * a[0]).max(0.0).sqrt() >= REGULAR_FLOOR)
    .with_window(idx.to_vec());
    Ok(ModelFamily {
        kind: FamilyKind::Jc { n_max, n },
        family,
        base_index: ie,
    })
}

impl ModelFamily {
    /// Closed-form metric of the family at `alpha`, for comparison with the numerics.
    pub fn analytic_metric(&self, alpha: &[f64]) -> nalgebra::DMatrix<f64> {
        use nalgebra::DMatrix;
        match self.kind {
            FamilyKind::Displacement { .. } => DMatrix::identity(2, 2) * 0.5,
            FamilyKind::Squeeze { n, .. } => {
                let n = n as f64;
                let f = 0.5 * (n * n + n + 1.0);
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    f,
                    f * (2.0 * alpha[0]).sinh().powi(2),
                ]))
            }
            FamilyKind::Spin { s, m } => {
                let f = 0.5 * (s * s + s - m * m);
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    f,
                    f * alpha[0].sin().powi(2),
                ]))
            }
            FamilyKind::Jc { .. } => {
                let a2 = alpha[0] * alpha[0];
                let f = a2 * (1.0 - a2);
                DMatrix::from_row_slice(3, 3, &[1.0 / (1.0 - a2), 0.0, 0.0, 0.0, f, -f, 0.0, -f, f])
            }
        }
    }

    /// Coordinates of the identity.
    pub fn origin(&self) -> Vec<f64> {
        match self.kind {
            FamilyKind::Jc { .. } => vec![1.0, 0.0, 0.0],
            _ => vec![0.0, 0.0],
        }
    }
}
