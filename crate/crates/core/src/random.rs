//! Seeded random operators for ensembles and property tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{AntiHermitianOperator, CMatrix, HermitianOperator, C64};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// GUE-like Hermitian matrix with unit-variance entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianOperator {
    let m = CMatrix::from_fn(dim, dim, |_, _| C64::new(normal(rng), normal(rng)));
    let adj = m.adjoint();
    HermitianOperator::symmetrize((m + adj) * C64::new(0.5, 0.0))
}

pub fn random_anti_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> AntiHermitianOperator {
    let m = CMatrix::from_fn(dim, dim, |_, _| C64::new(normal(rng), normal(rng)));
    let adj = m.adjoint();
    AntiHermitianOperator::symmetrize((m - adj) * C64::new(0.5, 0.0))
}

/// `diag(0, 1, ..., d-1) + coupling * V` with `V` a random Hermitian matrix
/// restricted to the listed bands (all bands when `bands` is `None`) and a
/// small random diagonal jitter. A well-separated diagonal keeps the Wegner
/// flow rates away from zero so ensembles converge in bounded `l`.
pub fn random_banded_hermitian<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    coupling: f64,
    bands: Option<&[usize]>,
) -> HermitianOperator {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(i as f64 + 0.1 * normal(rng), 0.0);
        for j in 0..i {
            let offset = i - j;
            let keep = bands.map_or(true, |b| b.contains(&offset));
            if keep {
                let z = C64::new(normal(rng), normal(rng)) * (coupling / std::f64::consts::SQRT_2);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
    }
    HermitianOperator::symmetrize(m)
}
