use serde::Serialize;

use crate::diff::{first_derivative, is_uniform};
use crate::error::{Error, Result};
use crate::flow::{FlowTrajectory, GeneratorChoice};
use crate::operator::{band_split, BandDecomposition, C64};

/// `|C| <= ZERO_REL * ||H||_F` counts as a vanishing coefficient.
pub const ZERO_REL: f64 = 1e-12;
/// A second difference of the diagonal below `GAP_ZERO_REL * ||H||_F` counts as zero.
pub const GAP_ZERO_REL: f64 = 1e-10;
/// Samples where `|C| < PHASE_FLOOR_REL * |C(0)|` are skipped when measuring phase drift.
pub const PHASE_FLOOR_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BandCondition {
    pub holds: bool,
    /// `(i_a', m)` with `i_a' = m * i_a`, for the first offending band.
    pub offender: Option<(usize, usize)>,
}

/// True iff no band in `bands` sits at twice or three times `i_a`.
pub fn band_condition(bands: &[usize], i_a: usize) -> Result<BandCondition> {
    if bands.iter().any(|&b| b == 0) {
        return Err(Error::InvalidInput("band indices must be positive".into()));
    }
    if !bands.contains(&i_a) {
        return Err(Error::NoSuchBand { index: i_a });
    }
    let mut sorted = bands.to_vec();
    sorted.sort_unstable();
    for &b in &sorted {
        for m in [2usize, 3] {
            if b == m * i_a {
                return Ok(BandCondition {
                    holds: false,
                    offender: Some((b, m)),
                });
            }
        }
    }
    Ok(BandCondition {
        holds: true,
        offender: None,
    })
}

/// [`band_condition`] with the target given by its 1-based position `a` in the
/// sorted band list.
pub fn band_condition_at(bands: &[usize], a: usize) -> Result<BandCondition> {
    let mut sorted = bands.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let i_a = *sorted
        .get(a.wrapping_sub(1))
        .ok_or(Error::NoSuchBand { index: a })?;
    band_condition(bands, i_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    A,
    B,
    C,
    /// Both coefficients nonzero but the diagonal is not equally spaced.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseVerdict {
    pub label: CaseLabel,
    /// `|eps_{n+i} + eps_{n-i} - 2 eps_n|` when both neighbours exist.
    pub gap: Option<f64>,
    /// `C_n = <u_n|H|u_{n-i}>` (zero when absent).
    #[serde(skip)]
    pub c_lower: C64,
    /// `C_{n+i} = <u_{n+i}|H|u_n>` (zero when absent).
    #[serde(skip)]
    pub c_upper: C64,
}

/// Classifies basis state `n` (0-based) against band `i_a`.
pub fn case_classify(bd: &BandDecomposition, n: usize, i_a: usize) -> Result<CaseVerdict> {
    if !bd.is_present(i_a) {
        return Err(Error::NoSuchBand { index: i_a });
    }
    let d = bd.dim();
    if n >= d {
        return Err(Error::IndexOverflow { index: n, dim: d });
    }
    let scale = bd.frobenius_norm();
    let c_lower = bd.coefficient(i_a, n as isize);
    let c_upper = bd.coefficient(i_a, (n + i_a) as isize);
    let gap = (n >= i_a && n + i_a < d)
        .then(|| (bd.eps[n + i_a] + bd.eps[n - i_a] - 2.0 * bd.eps[n]).abs());
    let zero_lower = c_lower.norm() <= ZERO_REL * scale;
    let zero_upper = c_upper.norm() <= ZERO_REL * scale;
    let label = match (zero_lower, zero_upper) {
        (true, true) => CaseLabel::A,
        (true, false) | (false, true) => CaseLabel::B,
        (false, false) => match gap {
            Some(g) if g <= GAP_ZERO_REL * scale => CaseLabel::C,
            _ => CaseLabel::None,
        },
    };
    Ok(CaseVerdict {
        label,
        gap,
        c_lower,
        c_upper,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichedResidual {
    pub l: Vec<f64>,
    /// `|dC_n/dl + (eps_n - eps_{n-i})^2 C_n|` per interior sample.
    pub residual_lower: Vec<f64>,
    /// `|dC_{n+i}/dl + (eps_{n+i} - eps_n)^2 C_{n+i}|` per interior sample.
    pub residual_upper: Vec<f64>,
    /// Largest `|arg C(l) - arg C(0)|` for each coefficient nonzero at `l = 0`.
    pub phase_drift_lower: Option<f64>,
    pub phase_drift_upper: Option<f64>,
    /// `|C_n|` and `|C_{n+i}|` at every sample.
    pub abs_lower: Vec<f64>,
    pub abs_upper: Vec<f64>,
}

impl SandwichedResidual {
    pub fn max_residual(&self) -> f64 {
        self.residual_lower
            .iter()
            .chain(&self.residual_upper)
            .fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_phase_drift(&self) -> f64 {
        self.phase_drift_lower
            .unwrap_or(0.0)
            .max(self.phase_drift_upper.unwrap_or(0.0))
    }

    /// Largest relative deviation of `|C_{n+i}| / |C_n|` from its initial value.
    pub fn ratio_drift(&self) -> Option<f64> {
        let r0 = self.abs_upper.first()? / self.abs_lower.first()?;
        if !r0.is_finite() || r0 == 0.0 {
            return None;
        }
        let floor = PHASE_FLOOR_REL * self.abs_lower[0];
        Some(
            self.abs_upper
                .iter()
                .zip(&self.abs_lower)
                .filter(|(_, &lo)| lo > floor)
                .map(|(up, lo)| (up / lo / r0 - 1.0).abs())
                .fold(0.0, f64::max),
        )
    }
}

fn wrapped(a: f64) -> f64 {
    let t = a.rem_euclid(std::f64::consts::TAU);
    if t > std::f64::consts::PI {
        t - std::f64::consts::TAU
    } else {
        t
    }
}

fn phase_drift(series: &[C64], zero: f64) -> Option<f64> {
    let c0 = *series.first()?;
    if c0.norm() <= zero {
        return None;
    }
    let floor = PHASE_FLOOR_REL * c0.norm();
    Some(
        series
            .iter()
            .filter(|c| c.norm() > floor)
            .map(|c| wrapped(c.arg() - c0.arg()).abs())
            .fold(0.0, f64::max),
    )
}

/// Checks the sandwiched coefficient equations for basis state `n` against
/// the samples of a band-targeted (or single-band Wegner) flow.
pub fn sandwiched_ode_residual(
    traj: &FlowTrajectory,
    n: usize,
    i_a: usize,
) -> Result<SandwichedResidual> {
    let len = traj.samples.len();
    if len < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: len,
        });
    }
    let d = traj.first().h.dim();
    if n >= d {
        return Err(Error::IndexOverflow { index: n, dim: d });
    }
    let ls = traj.ls();
    let bands = &traj.band_indices;
    let interior = if len >= 5 && is_uniform(&ls) {
        2..len - 2
    } else {
        1..len - 1
    };
    if bands.is_empty() {
        // nothing flows: both equations hold trivially
        return Ok(SandwichedResidual {
            l: ls[interior.clone()].to_vec(),
            residual_lower: vec![0.0; interior.len()],
            residual_upper: vec![0.0; interior.len()],
            phase_drift_lower: None,
            phase_drift_upper: None,
            abs_lower: vec![0.0; len],
            abs_upper: vec![0.0; len],
        });
    }
    match traj.choice {
        GeneratorChoice::Band(b) if b == i_a => {}
        GeneratorChoice::Wegner if bands.as_slice() == [i_a] => {}
        _ => {
            return Err(Error::InvalidInput(format!(
                "sandwiched equations need a flow targeting band {i_a} alone"
            )))
        }
    }
    let verdict = band_condition(bands, i_a)?;
    if let Some((offender, multiple)) = verdict.offender {
        return Err(Error::ConditionViolated {
            index: i_a,
            offender,
            multiple,
        });
    }
    let zero = ZERO_REL * traj.first().h.frobenius_norm();
    let decomp: Vec<BandDecomposition> = traj.samples.iter().map(|s| band_split(&s.h)).collect();
    let lower: Vec<C64> = decomp
        .iter()
        .map(|b| b.coefficient(i_a, n as isize))
        .collect();
    let upper: Vec<C64> = decomp
        .iter()
        .map(|b| b.coefficient(i_a, (n + i_a) as isize))
        .collect();
    let gap = |b: &BandDecomposition, hi: usize, lo: isize| -> f64 {
        if lo < 0 || hi >= d {
            0.0
        } else {
            b.eps[hi] - b.eps[lo as usize]
        }
    };
    let d_lower = first_derivative(&ls, &lower);
    let d_upper = first_derivative(&ls, &upper);
    let mut out = SandwichedResidual {
        l: Vec::new(),
        residual_lower: Vec::new(),
        residual_upper: Vec::new(),
        phase_drift_lower: phase_drift(&lower, zero),
        phase_drift_upper: phase_drift(&upper, zero),
        abs_lower: lower.iter().map(|c| c.norm()).collect(),
        abs_upper: upper.iter().map(|c| c.norm()).collect(),
    };
    for k in interior {
        let (Some(dl), Some(du)) = (d_lower[k], d_upper[k]) else {
            continue;
        };
        let b = &decomp[k];
        let g_lo = gap(b, n, n as isize - i_a as isize);
        let g_up = gap(b, n + i_a, n as isize);
        out.l.push(ls[k]);
        out.residual_lower
            .push((dl + lower[k] * (g_lo * g_lo)).norm());
        out.residual_upper
            .push((du + upper[k] * (g_up * g_up)).norm());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_condition_truth_table() {
        assert!(band_condition(&[1], 1).unwrap().holds);
        let v = band_condition(&[1, 2], 1).unwrap();
        assert!(!v.holds);
        assert_eq!(v.offender, Some((2, 2)));
        assert_eq!(band_condition(&[1, 3], 1).unwrap().offender, Some((3, 3)));
        assert!(band_condition(&[1, 4], 1).unwrap().holds);
        assert!(band_condition(&[1, 4], 4).unwrap().holds);
        assert!(band_condition(&[2, 5], 2).unwrap().holds);
        assert!(matches!(
            band_condition(&[1, 4], 2),
            Err(Error::NoSuchBand { index: 2 })
        ));
        assert!(band_condition_at(&[4, 1], 2).unwrap().holds);
        assert!(!band_condition_at(&[2, 1], 1).unwrap().holds);
    }
}
