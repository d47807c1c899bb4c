use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{commutator, max_abs, validate_hermitian, CMatrix, HermitianOperator, C64};

/// Spin `s` in a constant field, `H = S . B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSpec {
    pub s: f64,
    #[serde(alias = "b")]
    pub b_field: [f64; 3],
}

impl SpinSpec {
    pub fn validate(&self) -> Result<()> {
        let two_s = 2.0 * self.s;
        if !(self.s >= 0.5) || (two_s - two_s.round()).abs() > 1e-12 {
            return Err(Error::SpecViolation(format!(
                "s = {} is not a positive half-integer",
                self.s
            )));
        }
        if self.b_field.iter().any(|b| !b.is_finite()) {
            return Err(Error::SpecViolation(
                "field components must be finite".into(),
            ));
        }
        if !(self.b_field.iter().map(|b| b * b).sum::<f64>() > 0.0) {
            return Err(Error::SpecViolation("|B| must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        (2.0 * self.s).round() as usize + 1
    }
}

/// Spin matrices in the basis `m = s, s-1, ..., -s` (index `j = s - m`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMatrices {
    pub s: f64,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub splus: CMatrix,
    pub sminus: CMatrix,
}

impl SpinMatrices {
    pub fn dim(&self) -> usize {
        self.sz.nrows()
    }

    /// `m` of the basis vector at storage index `j`.
    pub fn m(&self, j: usize) -> f64 {
        self.s - j as f64
    }
}

/// Storage index of the state with projection `m`.
pub fn spin_index(s: f64, m: f64) -> Result<usize> {
    let j = s - m;
    if (j - j.round()).abs() > 1e-12 || j < -1e-12 || j > 2.0 * s + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "m = {m} is not a projection of spin {s}"
        )));
    }
    Ok(j.round() as usize)
}

pub fn spin_matrices(s: f64) -> Result<SpinMatrices> {
    let two_s = 2.0 * s;
    if !(s >= 0.5) || (two_s - two_s.round()).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "s = {s} is not a positive half-integer"
        )));
    }
    let d = two_s.round() as usize + 1;
    let m = |j: usize| s - j as f64;
    let mut sz = CMatrix::zeros(d, d);
    let mut splus = CMatrix::zeros(d, d);
    for j in 0..d {
        sz[(j, j)] = C64::new(m(j), 0.0);
        if j > 0 {
            let mj = m(j);
            splus[(j - 1, j)] = C64::new((s * (s + 1.0) - mj * (mj + 1.0)).sqrt(), 0.0);
        }
    }
    let sminus = splus.adjoint();
    let sx = (&splus + &sminus) * C64::new(0.5, 0.0);
    let sy = (&splus - &sminus) * C64::new(0.0, -0.5);
    Ok(SpinMatrices {
        s,
        sx,
        sy,
        sz,
        splus,
        sminus,
    })
}

fn check_algebra(sm: &SpinMatrices) -> Result<()> {
    let tol = 1e-12 * (1.0 + sm.s * sm.s);
    let checks = [
        commutator(&sm.sz, &sm.splus)? - &sm.splus,
        commutator(&sm.sz, &sm.sminus)? + &sm.sminus,
        commutator(&sm.splus, &sm.sminus)? - &sm.sz * C64::new(2.0, 0.0),
    ];
    for c in &checks {
        let dev = max_abs(c);
        if dev > tol {
            return Err(Error::SpecViolation(format!(
                "spin commutation relations fail by {dev:e}"
            )));
        }
    }
    Ok(())
}

pub fn build_spin(spec: &SpinSpec) -> Result<HermitianOperator> {
    spec.validate()?;
    let sm = spin_matrices(spec.s)?;
    check_algebra(&sm)?;
    let [bx, by, bz] = spec.b_field;
    let h = &sm.sx * C64::new(bx, 0.0) + &sm.sy * C64::new(by, 0.0) + &sm.sz * C64::new(bz, 0.0);
    validate_hermitian(&h, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: &CMatrix) -> Vec<Vec<(f64, f64)>> {
        (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| (m[(i, j)].re, m[(i, j)].im))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn spin_half_examples() {
        let h = build_spin(&SpinSpec {
            s: 0.5,
            b_field: [0.0, 0.0, 1.0],
        })
        .unwrap();
        assert_eq!(
            dense(h.matrix()),
            vec![vec![(0.5, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (-0.5, 0.0)]]
        );
        let h = build_spin(&SpinSpec {
            s: 0.5,
            b_field: [1.0, 0.0, 0.0],
        })
        .unwrap();
        assert_eq!(
            dense(h.matrix()),
            vec![vec![(0.0, 0.0), (0.5, 0.0)], vec![(0.5, 0.0), (0.0, 0.0)]]
        );
    }

    #[test]
    fn spin_one_sz() {
        let h = build_spin(&SpinSpec {
            s: 1.0,
            b_field: [0.0, 0.0, 1.0],
        })
        .unwrap();
        assert_eq!(h.diagonal(), vec![1.0, 0.0, -1.0]);
        assert_eq!(crate::operator::off_diag_norm_sq(&h), 0.0);
    }

    #[test]
    fn casimir_is_scalar() {
        for s in [0.5, 1.0, 1.5, 2.0] {
            let sm = spin_matrices(s).unwrap();
            let c = &sm.sx * &sm.sx + &sm.sy * &sm.sy + &sm.sz * &sm.sz;
            let d = sm.dim();
            assert!(max_abs(&(c - CMatrix::identity(d, d) * C64::new(s * (s + 1.0), 0.0))) < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_spin(&SpinSpec {
            s: 0.7,
            b_field: [0.0, 0.0, 1.0]
        })
        .is_err());
        assert!(build_spin(&SpinSpec {
            s: 1.0,
            b_field: [0.0; 3]
        })
        .is_err());
        assert_eq!(spin_index(1.5, -0.5).unwrap(), 2);
        assert!(spin_index(1.0, 0.5).is_err());
    }
}
