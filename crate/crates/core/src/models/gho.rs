use serde::{Deserialize, Serialize};

use super::complex_pair;
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::operator::{validate_hermitian, CMatrix, HermitianOperator, C64};

/// `H = w a^dag a + lambda a^dag^2 + lambda* a^2 + mu a^dag + mu* a + nu` on Fock levels `0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhoSpec {
    pub omega: f64,
    #[serde(with = "complex_pair", default)]
    pub lambda: C64,
    #[serde(with = "complex_pair", default)]
    pub mu: C64,
    #[serde(default)]
    pub nu: f64,
    pub n_max: usize,
}

impl GhoSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega,
            self.lambda.re,
            self.lambda.im,
            self.mu.re,
            self.mu.im,
            self.nu,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::SpecViolation(
                "oscillator coefficients must be finite".into(),
            ));
        }
        if !(self.omega > 0.0) {
            return Err(Error::SpecViolation(format!(
                "omega = {} must be positive",
                self.omega
            )));
        }
        if !(self.omega > 2.0 * self.lambda.norm()) {
            return Err(Error::SpecViolation(format!(
                "omega > 2|lambda| violated: omega = {}, |lambda| = {}",
                self.omega,
                self.lambda.norm()
            )));
        }
        if self.n_max < 4 {
            return Err(Error::SpecViolation(format!(
                "n_max = {} must be at least 4",
                self.n_max
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

pub fn build_gho(spec: &GhoSpec) -> Result<HermitianOperator> {
    spec.validate()?;
    let d = spec.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 0..d {
        m[(n, n)] = C64::new(spec.omega * n as f64 + spec.nu, 0.0);
        if n + 1 < d {
            let e = spec.mu * ((n + 1) as f64).sqrt();
            m[(n + 1, n)] = e;
            m[(n, n + 1)] = e.conj();
        }
        if n + 2 < d {
            let e = spec.lambda * (((n + 1) * (n + 2)) as f64).sqrt();
            m[(n + 2, n)] = e;
            m[(n, n + 2)] = e.conj();
        }
    }
    validate_hermitian(&m, 0.0)
}

/// Solves `w alpha + 2 lambda alpha* - mu = 0`.
pub fn displacement_shift(omega: f64, lambda: C64, mu: C64) -> Result<C64> {
    let det = omega * omega - 4.0 * lambda.norm_sqr();
    if det.abs() <= 1e-14 * omega * omega || !det.is_finite() {
        return Err(Error::SingularShift);
    }
    let alpha = (mu * omega - lambda * mu.conj() * 2.0) / det;
    let residual = (alpha * omega + lambda * alpha.conj() * 2.0 - mu).norm();
    if residual > 1e-12 * (1.0 + mu.norm()) {
        return Err(Error::SingularShift);
    }
    Ok(alpha)
}

/// Removes the linear terms with the displacement `a -> a - alpha`, returning
/// the equivalent `mu = 0` oscillator and the shift.
pub fn reduce_gho(spec: &GhoSpec) -> Result<(GhoSpec, C64)> {
    spec.validate()?;
    if spec.mu == C64::new(0.0, 0.0) {
        return Ok((*spec, C64::new(0.0, 0.0)));
    }
    let alpha = displacement_shift(spec.omega, spec.lambda, spec.mu)?;
    let nu = spec.nu
        + spec.omega * alpha.norm_sqr()
        + 2.0 * (spec.lambda * alpha.conj() * alpha.conj()).re
        - 2.0 * (spec.mu * alpha.conj()).re;
    Ok((
        GhoSpec {
            mu: C64::new(0.0, 0.0),
            nu,
            ..*spec
        },
        alpha,
    ))
}

/// Largest amplitude of the flowed base state `U^dagger |base>` on the top
/// tenth of the Fock levels, over all samples.
pub fn edge_amplitude(traj: &FlowTrajectory, base: usize) -> Option<f64> {
    let d = traj.first().h.dim();
    let top = d - (d / 10).max(1);
    let mut worst = 0.0f64;
    for s in &traj.samples {
        let u = s.u.as_ref()?;
        for i in top..d {
            // (U^dagger)_{i,base} = conj(U_{base,i})
            worst = worst.max(u[(base, i)].norm());
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::band_split;

    fn spec(lambda: C64, mu: C64) -> GhoSpec {
        GhoSpec {
            omega: 1.0,
            lambda,
            mu,
            nu: 0.25,
            n_max: 12,
        }
    }

    #[test]
    fn band_structure_follows_coefficients() {
        let z = C64::new(0.0, 0.0);
        let h = build_gho(&spec(z, z)).unwrap();
        assert!(band_split(&h).present_bands().is_empty());
        assert_eq!(h.diagonal()[3], 3.25);
        let mu = C64::new(0.3, -0.2);
        let bd = band_split(&build_gho(&spec(z, mu)).unwrap());
        assert_eq!(bd.present_bands(), vec![1]);
        assert_eq!(bd.coefficient(1, 3), mu * 3f64.sqrt());
        let bd = band_split(&build_gho(&spec(C64::new(0.2, 0.1), z)).unwrap());
        assert_eq!(bd.present_bands(), vec![2]);
    }

    #[test]
    fn stability_condition_is_enforced() {
        let z = C64::new(0.0, 0.0);
        assert!(matches!(
            build_gho(&spec(C64::new(0.5, 0.0), z)),
            Err(Error::SpecViolation(_))
        ));
    }

    #[test]
    fn shift_solves_the_linear_pair() {
        let mu = C64::new(0.4, -0.3);
        assert!(
            (displacement_shift(2.0, C64::new(0.0, 0.0), mu).unwrap() - mu / 2.0).norm() < 1e-15
        );
        let a = displacement_shift(1.0, C64::new(0.2, 0.0), C64::new(0.6, 0.0)).unwrap();
        assert!((a - C64::new(0.6 / 1.4, 0.0)).norm() < 1e-15);
        let (w, l) = (1.3, C64::new(0.2, 0.35));
        let a = displacement_shift(w, l, mu).unwrap();
        assert!((a * w + l * a.conj() * 2.0 - mu).norm() < 1e-12);
        assert!(matches!(
            displacement_shift(1.0, C64::new(0.5, 0.0), mu),
            Err(Error::SingularShift)
        ));
    }

    #[test]
    fn reduced_oscillator_is_unitarily_equivalent_on_low_levels() {
        // D(alpha) H D(alpha)^dagger with D = exp(alpha a^dag - alpha* a) equals the reduced H.
        let full = GhoSpec {
            omega: 1.0,
            lambda: C64::new(0.1, 0.05),
            mu: C64::new(0.2, -0.1),
            nu: 0.0,
            n_max: 60,
        };
        let (red, alpha) = reduce_gho(&full).unwrap();
        let a = super::super::annihilation(full.n_max);
        let k = crate::operator::AntiHermitianOperator::symmetrize(
            a.adjoint() * alpha - &a * alpha.conj(),
        );
        let dop = crate::expm::expm_antihermitian(&k).unwrap();
        let h = build_gho(&full).unwrap();
        let lhs = &dop * h.matrix() * dop.adjoint();
        let rhs = build_gho(&red).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!(
                    (lhs[(i, j)] - rhs.matrix()[(i, j)]).norm() < 1e-9,
                    "{i} {j}"
                );
            }
        }
    }
}
