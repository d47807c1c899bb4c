//! Report formats: CSV tables and versioned JSON with fixed-precision floats.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::Result;
use crate::flow::FlowTrajectory;
use crate::geometry::MetricSample;

pub const SCHEMA_VERSION: u32 = 1;

/// A float printed with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Serializes as a JSON number with 17 significant digits (`null` if not finite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            RawValue::from_string(num(self.0))
                .map_err(serde::ser::Error::custom)?
                .serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

pub fn f17_vec(v: &[f64]) -> Vec<F17> {
    v.iter().map(|&x| F17(x)).collect()
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_residual: F17,
    pub tolerance: F17,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `max_residual <= tolerance` (NaN fails).
    pub fn at_most(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            max_residual: F17(max_residual),
            tolerance: F17(tolerance),
            pass: max_residual <= tolerance,
            detail: None,
        }
    }

    /// Passes when `value >= threshold`; the threshold is recorded as the tolerance.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            max_residual: F17(value),
            tolerance: F17(threshold),
            pass: value >= threshold,
            detail: None,
        }
    }

    /// An exact yes/no check; the residual is 0 on success and 1 on failure.
    pub fn exact(name: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            max_residual: F17(if pass { 0.0 } else { 1.0 }),
            tolerance: F17(0.0),
            pass,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// `{"schema_version": 1, "checks": [...]}` plus free-form context fields.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict<T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub context: T,
    pub checks: Vec<Check>,
}

impl<T: Serialize> Verdict<T> {
    pub fn new(context: T, checks: Vec<Check>) -> Self {
        Verdict {
            schema_version: SCHEMA_VERSION,
            context,
            checks,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `l, trace_h, trace_h2, offdiag_sq, eps_sq_sum, band_i{a}_sq...`
pub fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut out = String::from("l,trace_h,trace_h2,offdiag_sq,eps_sq_sum");
    for i in &traj.band_indices {
        out.push_str(&format!(",band_i{i}_sq"));
    }
    out.push('\n');
    for s in &traj.samples {
        let mut row = vec![
            num(s.l),
            num(s.trace_h),
            num(s.trace_h2),
            num(s.offdiag_sq),
            num(s.eps_sq_sum),
        ];
        row.extend(s.band_norms_sq.iter().map(|&x| num(x)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Metric samples on a grid: index, coordinates, upper triangle of `g` (row-major).
pub fn metric_csv(coord_names: &[String], samples: &[MetricSample]) -> String {
    let k = coord_names.len();
    let mut head = vec!["index".to_string()];
    head.extend(coord_names.iter().cloned());
    for i in 0..k {
        for j in i..k {
            head.push(format!("g_{i}{j}"));
        }
    }
    head.push("route_deviation".into());
    let mut out = head.join(",");
    out.push('\n');
    for (idx, m) in samples.iter().enumerate() {
        let mut row = vec![idx.to_string()];
        row.extend(m.alpha.iter().map(|&x| num(x)));
        for i in 0..k {
            for j in i..k {
                row.push(num(m.g[(i, j)]));
            }
        }
        row.push(num(m.route_deviation));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Per-sample residual table: `l`, arc length `s`, coordinates and residual components.
pub fn residual_csv(
    coord_names: &[String],
    l: &[f64],
    s: &[f64],
    alpha: &[Vec<f64>],
    residual: &[Vec<f64>],
) -> String {
    let mut head = vec!["l".to_string(), "s".to_string()];
    head.extend(coord_names.iter().cloned());
    head.extend(coord_names.iter().map(|c| format!("residual_{c}")));
    let mut out = head.join(",");
    out.push('\n');
    for k in 0..l.len() {
        let mut row = vec![num(l[k]), num(s[k])];
        row.extend(alpha[k].iter().map(|&x| num(x)));
        row.extend(residual[k].iter().map(|&x| num(x)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Meta<'a> {
    schema_version: u32,
    command: &'a str,
    tool_version: &'a str,
    unix_time_seconds: u64,
}

/// Writes `meta.json` next to the reports; the only file carrying a timestamp.
pub fn write_sidecar(dir: &Path, command: &str) -> Result<()> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        unix_time_seconds: secs,
    };
    fs::write(dir.join("meta.json"), to_json(&meta)?)?;
    Ok(())
}
