//! Dense Hermitian and anti-Hermitian operators in a fixed natural basis.
//!
//! Storage is 0-based: basis vector `|u_n>` with `n = index + 1` in 1-based
//! physics notation. The storage basis is always treated as the natural basis,
//! i.e. the eigenbasis of the diagonal part `H_d`.
//!
//! Band `i` collects the entries at offset `±i` from the main diagonal. Its
//! coefficient vector stores the lower-triangle elements
//! `C[m] = <u_m|H|u_{m-i}>` for `m = i .. d-1`, so `C[0]` belongs to row `i`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative Frobenius threshold below which a band counts as absent.
pub const BAND_PRESENCE_REL: f64 = 1e-14;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn check_finite(m: &CMatrix, context: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// `max |M - M^dagger|` element-wise.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `max |M + M^dagger|` element-wise.
pub fn anti_hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] + m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// A dense complex Hermitian matrix, exactly symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    /// Symmetrizes `(m + m^dagger) / 2` without checking the deviation.
    pub(crate) fn symmetrize(m: CMatrix) -> Self {
        let mut out = m;
        let n = out.nrows();
        for i in 0..n {
            out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let v = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        HermitianOperator { mat: out }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut mat = CMatrix::zeros(d, d);
        for (i, &e) in diag.iter().enumerate() {
            mat[(i, i)] = C64::new(e, 0.0);
        }
        HermitianOperator { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Real diagonal `eps[n] = <u_n|H|u_n>`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// `Tr(H^2) = sum |H_mn|^2` for Hermitian `H`.
    pub fn trace_sq(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in ascending order, by direct diagonalization.
    pub fn eigenvalues_sorted(&self) -> Vec<f64> {
        let eig = nalgebra::linalg::SymmetricEigen::new(self.mat.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Diagonal part `H_d`.
    pub fn diagonal_part(&self) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&self.diagonal())
    }

    /// Principal submatrix on the given basis indices (in the given order).
    pub fn restrict(&self, indices: &[usize]) -> HermitianOperator {
        let k = indices.len();
        let mat = CMatrix::from_fn(k, k, |i, j| self.mat[(indices[i], indices[j])]);
        HermitianOperator { mat }
    }
}

/// A dense complex anti-Hermitian matrix (generators `eta`, `G_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct AntiHermitianOperator {
    mat: CMatrix,
}

impl AntiHermitianOperator {
    pub(crate) fn symmetrize(m: CMatrix) -> Self {
        let mut out = m;
        let n = out.nrows();
        for i in 0..n {
            out[(i, i)] = C64::new(0.0, out[(i, i)].im);
            for j in (i + 1)..n {
                let v = (out[(i, j)] - out[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = -v.conj();
            }
        }
        AntiHermitianOperator { mat: out }
    }

    /// Validates `m = -m^dagger` to within `tol`, then symmetrizes exactly.
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m, "anti-Hermitian operator")?;
        let deviation = anti_hermitian_deviation(&m);
        if deviation > tol {
            return Err(Error::NotAntiHermitian { deviation });
        }
        Ok(Self::symmetrize(m))
    }

    pub fn zeros(dim: usize) -> Self {
        AntiHermitianOperator {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn restrict(&self, indices: &[usize]) -> AntiHermitianOperator {
        let k = indices.len();
        let mat = CMatrix::from_fn(k, k, |i, j| self.mat[(indices[i], indices[j])]);
        AntiHermitianOperator { mat }
    }
}

/// Accepts `grid` as Hermitian if `max |grid - grid^dagger| <= tol` and
/// returns `(grid + grid^dagger) / 2`.
pub fn validate_hermitian(grid: &CMatrix, tol: f64) -> Result<HermitianOperator> {
    check_square(grid)?;
    check_finite(grid, "Hermitian operator")?;
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be >= 0, got {tol}"
        )));
    }
    let deviation = hermitian_deviation(grid);
    if deviation > tol {
        return Err(Error::NotHermitian { deviation, tol });
    }
    Ok(HermitianOperator::symmetrize(grid.clone()))
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_square(a)?;
    check_square(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(a * b - b * a)
}

/// `[eta, H]` for anti-Hermitian `eta` and Hermitian `H`, using
/// `(eta H)^dagger = -H eta`, so a single product suffices. The result is
/// Hermitian by construction.
pub fn commutator_ah_h(
    eta: &AntiHermitianOperator,
    h: &HermitianOperator,
) -> Result<HermitianOperator> {
    if eta.dim() != h.dim() {
        return Err(Error::DimMismatch {
            left: eta.dim(),
            right: h.dim(),
        });
    }
    let p = eta.matrix() * h.matrix();
    let adj = p.adjoint();
    Ok(HermitianOperator::symmetrize(p + adj))
}

/// `sum_{m != n} |H_mn|^2`.
pub fn off_diag_norm_sq(h: &HermitianOperator) -> f64 {
    let m = h.matrix();
    let n = h.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc
}

/// Diagonal energies plus per-band lower-triangle coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDecomposition {
    pub eps: Vec<f64>,
    /// Off-diagonality `i` -> `C[m - i] = <u_m|H|u_{m-i}>`, `m = i .. d-1`.
    /// Only bands with at least one exactly nonzero coefficient are stored.
    pub bands: BTreeMap<usize, Vec<C64>>,
}

impl BandDecomposition {
    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let diag: f64 = self.eps.iter().map(|e| e * e).sum();
        let off: f64 = self
            .bands
            .values()
            .map(|c| 2.0 * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        (diag + off).sqrt()
    }

    /// Bands whose largest coefficient exceeds `1e-14 * ||H||_F`.
    pub fn present_bands(&self) -> Vec<usize> {
        let thr = BAND_PRESENCE_REL * self.frobenius_norm();
        self.bands
            .iter()
            .filter(|(_, c)| c.iter().any(|z| z.norm() > thr))
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn is_present(&self, index: usize) -> bool {
        self.present_bands().contains(&index)
    }

    /// Coefficient `<u_row|H|u_{row-i}>` with absent entries reading as zero.
    /// `row` is a 0-based storage index and may lie outside `0..d`.
    pub fn coefficient(&self, index: usize, row: isize) -> C64 {
        let d = self.dim() as isize;
        let i = index as isize;
        if row < i || row >= d {
            return C64::new(0.0, 0.0);
        }
        self.bands
            .get(&index)
            .map(|c| c[(row - i) as usize])
            .unwrap_or_default()
    }

    /// `||H_od^(i)||_F^2 = 2 sum |C|^2`.
    pub fn band_norm_sq(&self, index: usize) -> f64 {
        self.bands
            .get(&index)
            .map(|c| 2.0 * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .unwrap_or(0.0)
    }
}

/// Splits `H` into its diagonal and band coefficients. Lossless.
pub fn band_split(h: &HermitianOperator) -> BandDecomposition {
    let m = h.matrix();
    let d = h.dim();
    let eps = h.diagonal();
    let mut bands = BTreeMap::new();
    for i in 1..d {
        let coeffs: Vec<C64> = (i..d).map(|row| m[(row, row - i)]).collect();
        if coeffs.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            bands.insert(i, coeffs);
        }
    }
    BandDecomposition { eps, bands }
}

/// Rebuilds `H` from a band decomposition.
pub fn band_assemble(bd: &BandDecomposition) -> Result<HermitianOperator> {
    let d = bd.dim();
    let mut mat = CMatrix::zeros(d, d);
    for (n, &e) in bd.eps.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::NonFinite {
                context: "band decomposition",
            });
        }
        mat[(n, n)] = C64::new(e, 0.0);
    }
    for (&i, coeffs) in &bd.bands {
        if i == 0 || i >= d {
            return Err(Error::IndexOverflow { index: i, dim: d });
        }
        if coeffs.len() != d - i {
            return Err(Error::InvalidInput(format!(
                "band {i} has {} coefficients, expected {}",
                coeffs.len(),
                d - i
            )));
        }
        for (k, &c) in coeffs.iter().enumerate() {
            let row = k + i;
            mat[(row, k)] = c;
            mat[(k, row)] = c.conj();
        }
    }
    check_finite(&mat, "band decomposition")?;
    Ok(HermitianOperator { mat })
}

/// On-disk matrix format: `{"dim": d, "entries": [[[re, im], ...], ...]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let entries = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| [m[(i, j)].re, m[(i, j)].im])
                    .collect()
            })
            .collect();
        MatrixJson {
            dim: m.nrows(),
            entries,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let d = self.dim;
        if self.entries.len() != d || self.entries.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput(format!(
                "matrix JSON entries are not {d}x{d}"
            )));
        }
        Ok(CMatrix::from_fn(d, d, |i, j| {
            let [re, im] = self.entries[i][j];
            C64::new(re, im)
        }))
    }

    /// Parses the JSON text and validates Hermiticity with `tol`.
    pub fn read_hermitian(text: &str, tol: f64) -> Result<HermitianOperator> {
        let parsed: MatrixJson = serde_json::from_str(text)?;
        validate_hermitian(&parsed.to_matrix()?, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real(rows: &[&[f64]]) -> CMatrix {
        CMatrix::from_fn(rows.len(), rows.len(), |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn validate_accepts_real_symmetric_unchanged() {
        let m = real(&[&[1.0, 0.5], &[0.5, 0.0]]);
        let h = validate_hermitian(&m, 0.0).unwrap();
        assert_eq!(h.matrix(), &m);
    }

    #[test]
    fn validate_accepts_pauli_y() {
        let m =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        assert!(validate_hermitian(&m, 1e-12).is_ok());
    }

    #[test]
    fn validate_rejects_asymmetric_and_nonfinite() {
        let m = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            validate_hermitian(&m, 1e-12),
            Err(Error::NotHermitian { .. })
        ));
        let mut bad = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        bad[(0, 0)] = c(f64::NAN, 0.0);
        assert!(matches!(
            validate_hermitian(&bad, 1e-12),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn commutator_cases() {
        let sp = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let sm = sp.transpose();
        let k = commutator(&sp, &sm).unwrap();
        assert_eq!(k, real(&[&[1.0, 0.0], &[0.0, -1.0]]));
        assert_eq!(commutator(&sp, &sp).unwrap(), CMatrix::zeros(2, 2));
        let three = CMatrix::zeros(3, 3);
        assert!(matches!(
            commutator(&sp, &three),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn commutator_number_with_raising_squared() {
        // [a^dagger a, a^dagger^2] = 2 a^dagger^2 on rows not touched by truncation.
        let n_max = 10;
        let d = n_max + 1;
        let ad = CMatrix::from_fn(d, d, |i, j| {
            if i == j + 1 {
                c((i as f64).sqrt(), 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let num = &ad * ad.adjoint();
        let ad2 = &ad * &ad;
        let k = commutator(&num, &ad2).unwrap();
        for i in 0..=n_max {
            for j in 0..d {
                if j + 2 <= n_max {
                    assert!((k[(i, j)] - ad2[(i, j)] * 2.0).norm() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn band_split_of_diagonal_has_no_bands() {
        let h = HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let bd = band_split(&h);
        assert_eq!(bd.eps, vec![1.0, 2.0, 3.0]);
        assert!(bd.bands.is_empty());
    }

    #[test]
    fn band_assemble_examples() {
        let bd = BandDecomposition {
            eps: vec![1.0, 2.0],
            bands: BTreeMap::new(),
        };
        assert_eq!(
            band_assemble(&bd).unwrap(),
            HermitianOperator::from_real_diagonal(&[1.0, 2.0])
        );

        let cc = c(0.3, -0.2);
        let mut bands = BTreeMap::new();
        bands.insert(1, vec![cc, cc]);
        let h = band_assemble(&BandDecomposition {
            eps: vec![0.0; 3],
            bands,
        })
        .unwrap();
        let m = h.matrix();
        assert_eq!(m[(1, 0)], cc);
        assert_eq!(m[(2, 1)], cc);
        assert_eq!(m[(0, 1)], cc.conj());
        assert_eq!(m[(2, 0)], c(0.0, 0.0));

        let mut over = BTreeMap::new();
        over.insert(3, vec![]);
        assert!(matches!(
            band_assemble(&BandDecomposition {
                eps: vec![0.0; 3],
                bands: over
            }),
            Err(Error::IndexOverflow { index: 3, dim: 3 })
        ));
    }

    #[test]
    fn off_diag_norm_examples() {
        assert_eq!(
            off_diag_norm_sq(&HermitianOperator::from_real_diagonal(&[1.0, -1.0])),
            0.0
        );
        let h = validate_hermitian(&real(&[&[0.0, 1.0], &[1.0, 0.0]]), 0.0).unwrap();
        assert_eq!(off_diag_norm_sq(&h), 2.0);
    }

    #[test]
    fn tiny_band_is_stored_but_not_present() {
        let mut m = real(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0]]);
        m[(2, 0)] = c(1e-20, 0.0);
        m[(0, 2)] = c(1e-20, 0.0);
        let h = validate_hermitian(&m, 0.0).unwrap();
        let bd = band_split(&h);
        assert!(bd.bands.contains_key(&2));
        assert!(bd.present_bands().is_empty());
        assert_eq!(band_assemble(&bd).unwrap(), h);
    }

    #[test]
    fn matrix_json_roundtrip_and_validation() {
        let text = r#"{"dim": 2, "entries": [[[1,0],[0,1]],[[0,-1],[2,0]]]}"#;
        let h = MatrixJson::read_hermitian(text, 1e-12).unwrap();
        assert_eq!(h.matrix()[(0, 1)], c(0.0, 1.0));
        let back = MatrixJson::from_matrix(h.matrix());
        assert_eq!(back.to_matrix().unwrap(), *h.matrix());
        let bad = r#"{"dim": 2, "entries": [[[1,0],[1,0]],[[0,0],[2,0]]]}"#;
        assert!(MatrixJson::read_hermitian(bad, 1e-12).is_err());
    }
}
