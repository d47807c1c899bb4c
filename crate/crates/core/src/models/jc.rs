use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{validate_hermitian, CMatrix, HermitianOperator, C64};

/// Two-level atom coupled to one field mode,
/// `H = w0/2 sigma_3 + w a^dag a + kappa (sigma_+ a + sigma_- a^dag)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcSpec {
    pub omega0: f64,
    pub omega: f64,
    pub kappa: f64,
    pub n_max: usize,
}

impl JcSpec {
    pub fn validate(&self) -> Result<()> {
        if ![self.omega0, self.omega, self.kappa]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::SpecViolation("coefficients must be finite".into()));
        }
        if self.n_max < 2 {
            return Err(Error::SpecViolation(format!(
                "n_max = {} must be at least 2",
                self.n_max
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }
}

/// Storage index of `|atom, n>` with `atom = false` for `|g>` and `true` for `|e>`.
pub fn jc_index(n_max: usize, excited: bool, n: usize) -> usize {
    (excited as usize) * (n_max + 1) + n
}

pub fn build_jc(spec: &JcSpec) -> Result<HermitianOperator> {
    spec.validate()?;
    let d = spec.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 0..=spec.n_max {
        let w = spec.omega * n as f64;
        m[(
            jc_index(spec.n_max, false, n),
            jc_index(spec.n_max, false, n),
        )] = C64::new(w - 0.5 * spec.omega0, 0.0);
        m[(jc_index(spec.n_max, true, n), jc_index(spec.n_max, true, n))] =
            C64::new(w + 0.5 * spec.omega0, 0.0);
    }
    for n in 0..spec.n_max {
        let e = jc_index(spec.n_max, true, n);
        let g = jc_index(spec.n_max, false, n + 1);
        let c = C64::new(spec.kappa * ((n + 1) as f64).sqrt(), 0.0);
        m[(e, g)] = c;
        m[(g, e)] = c;
    }
    validate_hermitian(&m, 0.0)
}

/// The 2x2 block on `span{|e,n>, |g,n+1>}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorBlock {
    pub n: usize,
    /// Storage indices of `|e,n>` and `|g,n+1>`.
    pub indices: [usize; 2],
    /// `[[A_n, C_n], [C_n*, B_n]]`.
    pub a: f64,
    pub b: f64,
    pub c: C64,
}

impl SectorBlock {
    /// Reads sector `n` out of a product-basis operator.
    pub fn from_operator(h: &HermitianOperator, n_max: usize, n: usize) -> Result<Self> {
        if h.dim() != 2 * (n_max + 1) {
            return Err(Error::DimMismatch {
                left: 2 * (n_max + 1),
                right: h.dim(),
            });
        }
        if n >= n_max {
            return Err(Error::InvalidInput(format!(
                "sector {n} needs n < n_max = {n_max}"
            )));
        }
        let e = jc_index(n_max, true, n);
        let g = jc_index(n_max, false, n + 1);
        let m = h.matrix();
        Ok(SectorBlock {
            n,
            indices: [e, g],
            a: m[(e, e)].re,
            b: m[(g, g)].re,
            c: m[(e, g)],
        })
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(self.a, 0.0),
                self.c,
                self.c.conj(),
                C64::new(self.b, 0.0),
            ],
        )
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.a + self.b);
        let r = (0.25 * (self.a - self.b).powi(2) + self.c.norm_sqr()).sqrt();
        [mean + r, mean - r]
    }
}

/// The sector decomposition: every coupled pair, the uncoupled `|g,0>`
/// level and the `|e,n_max>` level cut off by the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBlocks {
    pub ground: f64,
    pub blocks: Vec<SectorBlock>,
    pub truncated_top: f64,
}

pub fn sector_blocks(spec: &JcSpec) -> Result<SectorBlocks> {
    let h = build_jc(spec)?;
    let blocks = (0..spec.n_max)
        .map(|n| SectorBlock::from_operator(&h, spec.n_max, n))
        .collect::<Result<Vec<_>>>()?;
    let m = h.matrix();
    let g0 = jc_index(spec.n_max, false, 0);
    let top = jc_index(spec.n_max, true, spec.n_max);
    Ok(SectorBlocks {
        ground: m[(g0, g0)].re,
        blocks,
        truncated_top: m[(top, top)].re,
    })
}
