//! Matrix exponential of anti-Hermitian generators.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{Error, Result};
use crate::operator::{max_abs, AntiHermitianOperator, CMatrix, CVector, C64};

/// `exp(K)` for anti-Hermitian `K`.
///
/// `iK` is Hermitian, so `iK = V diag(w) V^dagger` and `exp(K) = V diag(e^{-i w}) V^dagger`.
/// The result is unitary to the accuracy of the eigenvector basis.
pub fn expm_antihermitian(k: &AntiHermitianOperator) -> Result<CMatrix> {
    let d = k.dim();
    if d == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let ik = k.matrix() * C64::new(0.0, 1.0);
    if ik.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            context: "matrix exponential input",
        });
    }
    let eig = SymmetricEigen::new(ik);
    let v = eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, w) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::new(0.0, -w).exp();
        for i in 0..d {
            scaled[(i, j)] *= phase;
        }
    }
    let u = scaled * v.adjoint();
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            context: "matrix exponential output",
        });
    }
    Ok(u)
}

/// The one-parameter family `exp(t R K0 R^dagger)` with a diagonal phase
/// rotation `R(phi) = diag(e^{-i phi q_j})`.
///
/// `K0` is diagonalized once; every evaluation afterwards costs a matrix
/// product, and applying the unitary to a vector costs two matrix-vector products.
#[derive(Debug, Clone)]
pub struct PhasedExponential {
    v: CMatrix,
    w: Vec<f64>,
    charges: Vec<f64>,
}

impl PhasedExponential {
    pub fn new(k0: &AntiHermitianOperator, charges: Vec<f64>) -> Result<Self> {
        if charges.len() != k0.dim() {
            return Err(Error::DimMismatch {
                left: k0.dim(),
                right: charges.len(),
            });
        }
        let ik = k0.matrix() * C64::new(0.0, 1.0);
        if ik.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                context: "generator",
            });
        }
        let eig = SymmetricEigen::new(ik);
        Ok(PhasedExponential {
            v: eig.eigenvectors,
            w: eig.eigenvalues.iter().copied().collect(),
            charges,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    fn rotated(&self, phi: f64) -> CMatrix {
        let mut m = self.v.clone();
        for (i, q) in self.charges.iter().enumerate() {
            let p = C64::new(0.0, -phi * q).exp();
            for x in m.row_mut(i).iter_mut() {
                *x *= p;
            }
        }
        m
    }

    pub fn unitary(&self, t: f64, phi: f64) -> CMatrix {
        let m = self.rotated(phi);
        let mut scaled = m.clone();
        for (j, w) in self.w.iter().enumerate() {
            let p = C64::new(0.0, -t * w).exp();
            for x in scaled.column_mut(j).iter_mut() {
                *x *= p;
            }
        }
        scaled * m.adjoint()
    }

    /// `U x`, or `U^dagger x` when `adjoint` is set.
    pub fn apply(&self, t: f64, phi: f64, x: &CVector, adjoint: bool) -> CVector {
        let m = self.rotated(phi);
        let mut y = m.ad_mul(x);
        let sign = if adjoint { 1.0 } else { -1.0 };
        for (yj, w) in y.iter_mut().zip(&self.w) {
            *yj *= C64::new(0.0, sign * t * w).exp();
        }
        m * y
    }
}

/// `max |U^dagger U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(d, d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_anti_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_generator_gives_identity() {
        let u = expm_antihermitian(&AntiHermitianOperator::zeros(4)).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn half_pi_sigma_x() {
        // exp(i t sigma_x) = cos t I + i sin t sigma_x; t = pi/2 gives i sigma_x.
        let t = std::f64::consts::FRAC_PI_2;
        let k = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, t),
                C64::new(0.0, t),
                C64::new(0.0, 0.0),
            ],
        );
        let u = expm_antihermitian(&AntiHermitianOperator::new(k, 0.0).unwrap()).unwrap();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        );
        assert!(max_abs(&(u - expected)) < 1e-15);
    }

    #[test]
    fn inverse_and_unitarity_for_large_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [2usize, 5, 12, 30] {
            let k = random_anti_hermitian(&mut rng, d);
            let norm = k.frobenius_norm();
            let k =
                AntiHermitianOperator::new(k.matrix() * C64::new(50.0 / norm, 0.0), 1e-12).unwrap();
            let u = expm_antihermitian(&k).unwrap();
            let neg = AntiHermitianOperator::new(-k.matrix().clone(), 0.0).unwrap();
            let v = expm_antihermitian(&neg).unwrap();
            assert!(
                unitarity_defect(&u) <= 1e-12,
                "d = {d}: {}",
                unitarity_defect(&u)
            );
            assert!(max_abs(&(&u * &v - CMatrix::identity(d, d))) <= 1e-12);
        }
    }

    #[test]
    fn phased_exponential_matches_direct_expm() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k0 = random_anti_hermitian(&mut rng, 6);
        let charges: Vec<f64> = (0..6).map(|j| j as f64 - 1.5).collect();
        let pe = PhasedExponential::new(&k0, charges.clone()).unwrap();
        let (t, phi) = (0.7, 1.1);
        let r = CMatrix::from_diagonal(&CVector::from_iterator(
            6,
            charges.iter().map(|q| C64::new(0.0, -phi * q).exp()),
        ));
        let k =
            AntiHermitianOperator::symmetrize(&r * k0.matrix() * r.adjoint() * C64::new(t, 0.0));
        let direct = expm_antihermitian(&k).unwrap();
        assert!(max_abs(&(pe.unitary(t, phi) - &direct)) < 1e-12);
        let x = CVector::from_fn(6, |i, _| C64::new(i as f64, 1.0));
        assert!((pe.apply(t, phi, &x, false) - &direct * &x).norm() < 1e-12);
        assert!((pe.apply(t, phi, &x, true) - direct.adjoint() * &x).norm() < 1e-12);
    }
}
