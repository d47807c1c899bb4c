use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::complex_pair;
use super::gho::GhoSpec;
use super::jc::{JcSpec, SectorBlock};
use super::spin::{spin_matrices, SpinSpec};
use crate::error::{Error, Result};
use crate::ode::{Integrator, Stepper};
use crate::operator::{HermitianOperator, C64};
use crate::report::num;

/// Initial data of a reduced coefficient system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ReducedModel {
    /// `H = w a^dag a + lambda a^dag^2 + lambda* a^2 + nu`.
    Squeeze {
        omega: f64,
        #[serde(with = "complex_pair")]
        lambda: C64,
        nu: f64,
    },
    /// `H = beta_z S_z + beta S_+ + beta* S_-`.
    Spin {
        beta_z: f64,
        #[serde(with = "complex_pair")]
        beta: C64,
    },
    /// Sector block `[[A, C], [C, B]]`.
    JcSector { n: usize, a: f64, b: f64, c: f64 },
}

pub type ReducedCoefficients = ReducedModel;

impl ReducedModel {
    /// Requires `mu = 0`; reduce the oscillator first otherwise.
    pub fn from_gho(spec: &GhoSpec) -> Result<Self> {
        spec.validate()?;
        if spec.mu != C64::new(0.0, 0.0) {
            return Err(Error::InvalidInput(
                "linear terms present; apply the displacement shift first".into(),
            ));
        }
        Ok(ReducedModel::Squeeze {
            omega: spec.omega,
            lambda: spec.lambda,
            nu: spec.nu,
        })
    }

    pub fn from_spin(spec: &SpinSpec) -> Result<Self> {
        spec.validate()?;
        let [bx, by, bz] = spec.b_field;
        Ok(ReducedModel::Spin {
            beta_z: bz,
            beta: C64::new(bx, -by) * 0.5,
        })
    }

    pub fn from_jc(spec: &JcSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n >= spec.n_max {
            return Err(Error::InvalidInput(format!(
                "sector {n} needs n < n_max = {}",
                spec.n_max
            )));
        }
        Ok(ReducedModel::JcSector {
            n,
            a: 0.5 * spec.omega0 + spec.omega * n as f64,
            b: -0.5 * spec.omega0 + spec.omega * (n + 1) as f64,
            c: spec.kappa * ((n + 1) as f64).sqrt(),
        })
    }

    /// Reads the same coefficients off a full matrix of the matching model.
    /// Squeeze uses the lowest Fock rows; spin divides out the ladder elements
    /// of the top pair; the JC sector reads its block (the product-basis cutoff
    /// is inferred from the dimension).
    pub fn extract(&self, h: &HermitianOperator) -> Result<Self> {
        let m = h.matrix();
        match *self {
            ReducedModel::Squeeze { .. } => {
                if h.dim() < 3 {
                    return Err(Error::InvalidInput(
                        "need at least three Fock levels".into(),
                    ));
                }
                let nu = m[(0, 0)].re;
                Ok(ReducedModel::Squeeze {
                    omega: m[(1, 1)].re - nu,
                    lambda: m[(2, 0)] / 2f64.sqrt(),
                    nu,
                })
            }
            ReducedModel::Spin { .. } => {
                let s = (h.dim() as f64 - 1.0) / 2.0;
                let sm = spin_matrices(s)?;
                Ok(ReducedModel::Spin {
                    beta_z: m[(0, 0)].re - m[(1, 1)].re,
                    beta: m[(0, 1)] / sm.splus[(0, 1)].re,
                })
            }
            ReducedModel::JcSector { n, .. } => {
                let n_max = h.dim() / 2 - 1;
                let blk = SectorBlock::from_operator(h, n_max, n)?;
                Ok(ReducedModel::JcSector {
                    n,
                    a: blk.a,
                    b: blk.b,
                    c: blk.c.re,
                })
            }
        }
    }

    fn to_state(self) -> DVector<f64> {
        match self {
            ReducedModel::Squeeze { omega, lambda, nu } => {
                DVector::from_vec(vec![omega, lambda.re, lambda.im, nu])
            }
            ReducedModel::Spin { beta_z, beta } => {
                DVector::from_vec(vec![beta_z, beta.re, beta.im])
            }
            ReducedModel::JcSector { a, b, c, .. } => DVector::from_vec(vec![a, b, c]),
        }
    }

    fn with_state(self, y: &DVector<f64>) -> Self {
        match self {
            ReducedModel::Squeeze { .. } => ReducedModel::Squeeze {
                omega: y[0],
                lambda: C64::new(y[1], y[2]),
                nu: y[3],
            },
            ReducedModel::Spin { .. } => ReducedModel::Spin {
                beta_z: y[0],
                beta: C64::new(y[1], y[2]),
            },
            ReducedModel::JcSector { n, .. } => ReducedModel::JcSector {
                n,
                a: y[0],
                b: y[1],
                c: y[2],
            },
        }
    }

    fn rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            ReducedModel::Squeeze { .. } => {
                let (w, l2) = (y[0], y[1] * y[1] + y[2] * y[2]);
                let k = -4.0 * w * w;
                DVector::from_vec(vec![-16.0 * w * l2, k * y[1], k * y[2], -8.0 * w * l2])
            }
            ReducedModel::Spin { .. } => {
                let (bz, b2) = (y[0], y[1] * y[1] + y[2] * y[2]);
                DVector::from_vec(vec![4.0 * bz * b2, -bz * bz * y[1], -bz * bz * y[2]])
            }
            ReducedModel::JcSector { .. } => {
                let (gap, c) = (y[0] - y[1], y[2]);
                let da = 2.0 * c * c * gap;
                DVector::from_vec(vec![da, -da, -gap * gap * c])
            }
        }
    }

    /// The off-diagonal coefficient the flow removes.
    pub fn off_diagonal(&self) -> C64 {
        match *self {
            ReducedModel::Squeeze { lambda, .. } => lambda,
            ReducedModel::Spin { beta, .. } => beta,
            ReducedModel::JcSector { c, .. } => C64::new(c, 0.0),
        }
    }

    fn columns(&self) -> Vec<&'static str> {
        match self {
            ReducedModel::Squeeze { .. } => vec!["omega", "lambda_re", "lambda_im", "nu"],
            ReducedModel::Spin { .. } => vec!["beta_z", "beta_re", "beta_im"],
            ReducedModel::JcSector { .. } => vec!["a", "b", "c"],
        }
    }

    fn model_name(&self) -> &'static str {
        match self {
            ReducedModel::Squeeze { .. } => "squeeze",
            ReducedModel::Spin { .. } => "spin",
            ReducedModel::JcSector { .. } => "jc_sector",
        }
    }
}

/// Reduced coefficients sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSeries {
    pub l: Vec<f64>,
    pub values: Vec<ReducedModel>,
}

impl ReducedSeries {
    pub fn model_name(&self) -> &'static str {
        self.values[0].model_name()
    }

    /// CSV with an `l` column and one column per real coefficient component.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l");
        for c in self.values[0].columns() {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (l, v) in self.l.iter().zip(&self.values) {
            out.push_str(&num(*l));
            for x in v.to_state().iter() {
                out.push(',');
                out.push_str(&num(*x));
            }
            out.push('\n');
        }
        out
    }

    /// Largest drift of `arg` of the off-diagonal coefficient from its first
    /// value, over samples where the coefficient exceeds `floor` in modulus.
    pub fn phase_drift(&self, floor: f64) -> f64 {
        let z0 = self.values[0].off_diagonal();
        if z0.norm() <= floor {
            return 0.0;
        }
        self.values
            .iter()
            .map(|v| v.off_diagonal())
            .filter(|z| z.norm() > floor)
            .map(|z| (z * z0.conj()).arg().abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates the reduced coefficient system and samples it on `l_grid`
/// (non-decreasing, starting at or after 0).
pub fn closed_form_flow(
    model: &ReducedModel,
    l_grid: &[f64],
    integrator: Integrator,
) -> Result<ReducedSeries> {
    integrator.validate()?;
    if l_grid.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if l_grid[0] < 0.0 || l_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(
            "l grid must be non-negative and non-decreasing".into(),
        ));
    }
    let mut stepper = Stepper::new(integrator);
    let mut y = model.to_state();
    let mut t = 0.0;
    let mut f = |_: f64, y: &DVector<f64>| model.rhs(y);
    let mut values = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        y = stepper.advance(&mut f, t, y, l)?;
        t = l;
        values.push(model.with_state(&y));
    }
    Ok(ReducedSeries {
        l: l_grid.to_vec(),
        values,
    })
}
