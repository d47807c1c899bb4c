use std::fmt;
use std::sync::Arc;

use crate::diff::first_derivative_full;
use crate::error::{Error, Result};
use crate::expm::unitarity_defect;
use crate::operator::{CMatrix, CVector, C64};

type UnitaryFn = dyn Fn(&[f64]) -> CMatrix + Send + Sync;
type ApplyFn = dyn Fn(&[f64], &CVector, bool) -> CVector + Send + Sync;
type PredicateFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Unitary deviation tolerated from a family map.
pub const FAMILY_UNITARITY_TOL: f64 = 1e-10;

/// A map `alpha -> U(alpha)` together with the base state `|psi>`; the
/// state on the submanifold is `|psi(alpha)> = U^dagger(alpha)|psi>`.
#[derive(Clone)]
pub struct ParametrizedFamily {
    name: String,
    coord_names: Vec<String>,
    base_state: CVector,
    fd_step: f64,
    christoffel_step: f64,
    unitary: Arc<UnitaryFn>,
    apply: Option<Arc<ApplyFn>>,
    domain: Option<Arc<PredicateFn>>,
    regular: Option<Arc<PredicateFn>>,
    extent: Option<Arc<PredicateFn>>,
    window: Option<Vec<usize>>,
}

impl fmt::Debug for ParametrizedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametrizedFamily")
            .field("name", &self.name)
            .field("coord_names", &self.coord_names)
            .field("dim", &self.dim())
            .field("fd_step", &self.fd_step)
            .finish_non_exhaustive()
    }
}

impl ParametrizedFamily {
    pub fn new<F>(
        name: impl Into<String>,
        coord_names: &[&str],
        base_state: CVector,
        unitary: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> CMatrix + Send + Sync + 'static,
    {
        let norm = base_state.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "base state norm {norm} is not 1"
            )));
        }
        if coord_names.is_empty() {
            return Err(Error::InvalidInput(
                "family needs at least one coordinate".into(),
            ));
        }
        Ok(ParametrizedFamily {
            name: name.into(),
            coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
            base_state,
            fd_step: 1e-4,
            christoffel_step: 1e-3,
            unitary: Arc::new(unitary),
            apply: None,
            domain: None,
            regular: None,
            extent: None,
            window: None,
        })
    }

    /// Fast `U x` / `U^dagger x` without forming `U`.
    pub fn with_apply<F>(mut self, apply: F) -> Self
    where
        F: Fn(&[f64], &CVector, bool) -> CVector + Send + Sync + 'static,
    {
        self.apply = Some(Arc::new(apply));
        self
    }

    pub fn with_domain<F>(mut self, domain: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(domain));
        self
    }

    /// Points where the chart is regular (coordinates are a valid local chart).
    pub fn with_regular<F>(mut self, regular: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.regular = Some(Arc::new(regular));
        self
    }

    /// Points where the map itself can be evaluated. Defaults to everywhere;
    /// derivative stencils that would leave it switch to one-sided form.
    pub fn with_extent<F>(mut self, extent: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.extent = Some(Arc::new(extent));
        self
    }

    /// Basis indices on which operator-level comparisons are meaningful
    /// (excludes truncation edges).
    pub fn with_window(mut self, window: Vec<usize>) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_christoffel_step(mut self, h: f64) -> Self {
        self.christoffel_step = h;
        self
    }

    pub fn with_base_state(mut self, base: CVector) -> Result<Self> {
        if base.len() != self.dim() || (base.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "replacement base state must be normalized and of equal dimension".into(),
            ));
        }
        self.base_state = base;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> usize {
        self.coord_names.len()
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn dim(&self) -> usize {
        self.base_state.len()
    }

    pub fn base_state(&self) -> &CVector {
        &self.base_state
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn christoffel_step(&self) -> f64 {
        self.christoffel_step
    }

    pub fn window(&self) -> Vec<usize> {
        self.window
            .clone()
            .unwrap_or_else(|| (0..self.dim()).collect())
    }

    fn check_arity(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.k() {
            return Err(Error::DimMismatch {
                left: self.k(),
                right: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                context: "family coordinate",
            });
        }
        Ok(())
    }

    pub fn check_domain(&self, alpha: &[f64]) -> Result<()> {
        self.check_arity(alpha)?;
        if let Some(d) = &self.domain {
            if !d(alpha) {
                return Err(Error::CoordinateOutOfDomain {
                    family: self.name.clone(),
                    alpha: alpha.to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn is_regular(&self, alpha: &[f64]) -> bool {
        self.regular.as_ref().map_or(true, |r| r(alpha))
    }

    /// `U(alpha)`; the point itself must lie in the declared domain.
    pub fn unitary_at(&self, alpha: &[f64]) -> Result<CMatrix> {
        self.check_domain(alpha)?;
        Ok((self.unitary)(alpha))
    }

    /// `U(alpha)` without the domain check, for finite-difference stencils
    /// that may step across a coordinate boundary.
    pub(crate) fn unitary_raw(&self, alpha: &[f64]) -> CMatrix {
        (self.unitary)(alpha)
    }

    pub(crate) fn apply_raw(&self, alpha: &[f64], x: &CVector, adjoint: bool) -> CVector {
        match &self.apply {
            Some(f) => f(alpha, x, adjoint),
            None => {
                let u = (self.unitary)(alpha);
                if adjoint {
                    u.ad_mul(x)
                } else {
                    u * x
                }
            }
        }
    }

    /// `|psi(alpha)> = U^dagger(alpha)|psi>`.
    pub fn state_at(&self, alpha: &[f64]) -> Result<CVector> {
        self.check_domain(alpha)?;
        Ok(self.apply_raw(alpha, &self.base_state, true))
    }

    pub fn check_unitary(&self, alpha: &[f64]) -> Result<()> {
        let u = self.unitary_at(alpha)?;
        let deviation = unitarity_defect(&u);
        if deviation > FAMILY_UNITARITY_TOL {
            return Err(Error::NonUnitaryFamily {
                deviation,
                alpha: alpha.to_vec(),
            });
        }
        Ok(())
    }

    fn in_extent(&self, alpha: &[f64]) -> bool {
        self.extent.as_ref().map_or(true, |e| e(alpha))
    }

    /// Points and weights of a second-order first-derivative stencil along
    /// coordinate `i`: central where possible, one-sided at the edge of the extent.
    pub(crate) fn stencil(&self, alpha: &[f64], i: usize, h: f64) -> Vec<(Vec<f64>, f64)> {
        let shifted = |t: f64| {
            let mut x = alpha.to_vec();
            x[i] += t;
            x
        };
        // near the edge of the extent the step shrinks so the stencil keeps its distance
        let mut h = h;
        if self.extent.is_some() {
            let floor = h / 1e4;
            while h > floor
                && !(self.in_extent(&shifted(256.0 * h)) && self.in_extent(&shifted(-256.0 * h)))
            {
                h *= 0.5;
            }
        }
        let (p, m) = (shifted(h), shifted(-h));
        if self.in_extent(&p) && self.in_extent(&m) {
            return vec![(p, 0.5 / h), (m, -0.5 / h)];
        }
        let s = if self.in_extent(&p) { 1.0 } else { -1.0 };
        vec![
            (alpha.to_vec(), -1.5 * s / h),
            (shifted(s * h), 2.0 * s / h),
            (shifted(2.0 * s * h), -0.5 * s / h),
        ]
    }

    /// `d_i (U x)` (or of `U^dagger x`) by the stencil above.
    pub(crate) fn apply_derivative(
        &self,
        alpha: &[f64],
        i: usize,
        h: f64,
        x: &CVector,
        adjoint: bool,
    ) -> CVector {
        let mut out = CVector::zeros(x.len());
        for (pt, w) in self.stencil(alpha, i, h) {
            out += self.apply_raw(&pt, x, adjoint) * C64::new(w, 0.0);
        }
        out
    }

    /// `G_i = (d_i U) U^dagger` by central differences with step `h`.
    pub fn generators(&self, alpha: &[f64], h: f64) -> Result<Vec<CMatrix>> {
        self.check_arity(alpha)?;
        let u = self.unitary_raw(alpha);
        let d = self.dim();
        Ok((0..self.k())
            .map(|i| {
                let mut du = CMatrix::zeros(d, d);
                for (pt, w) in self.stencil(alpha, i, h) {
                    du += self.unitary_raw(&pt) * C64::new(w, 0.0);
                }
                du * u.adjoint()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordSample {
    pub l: f64,
    pub alpha: Vec<f64>,
    pub alpha_dot: Vec<f64>,
}

/// A coordinate curve `alpha(l)` with velocities from finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateTrajectory {
    pub names: Vec<String>,
    pub samples: Vec<CoordSample>,
}

impl CoordinateTrajectory {
    /// Builds the curve and its velocities (fourth-order interior stencils,
    /// second-order one-sided at the ends).
    pub fn from_curve(names: Vec<String>, l: Vec<f64>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        if l.len() != alpha.len() {
            return Err(Error::InvalidInput("grid and curve lengths differ".into()));
        }
        if l.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: l.len(),
            });
        }
        if l.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "flow parameter must be strictly increasing".into(),
            ));
        }
        let k = names.len();
        if alpha.iter().any(|a| a.len() != k) {
            return Err(Error::InvalidInput(
                "coordinate vectors have inconsistent length".into(),
            ));
        }
        let mut dots = vec![vec![0.0; k]; l.len()];
        for i in 0..k {
            let comp: Vec<f64> = alpha.iter().map(|a| a[i]).collect();
            for (row, d) in dots.iter_mut().zip(first_derivative_full(&l, &comp)) {
                row[i] = d;
            }
        }
        let samples = l
            .into_iter()
            .zip(alpha)
            .zip(dots)
            .map(|((l, alpha), alpha_dot)| CoordSample {
                l,
                alpha,
                alpha_dot,
            })
            .collect();
        Ok(CoordinateTrajectory { names, samples })
    }

    /// Builds a curve by sampling `f` on `l`.
    pub fn sample<F: Fn(f64) -> Vec<f64>>(names: &[&str], l: &[f64], f: F) -> Result<Self> {
        Self::from_curve(
            names.iter().map(|s| s.to_string()).collect(),
            l.to_vec(),
            l.iter().map(|&x| f(x)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn ls(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.l).collect()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.alpha[i]).collect()
    }
}
