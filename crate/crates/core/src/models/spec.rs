use serde::{Deserialize, Serialize};

use super::gho::{build_gho, reduce_gho, GhoSpec};
use super::jc::{build_jc, JcSpec};
use super::spin::{build_spin, SpinSpec};
use crate::error::Result;
use crate::operator::HermitianOperator;

/// `{"model": "gho" | "spin" | "jc", ...fields}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Gho(GhoSpec),
    Spin(SpinSpec),
    Jc(JcSpec),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Gho(s) => s.validate(),
            ModelSpec::Spin(s) => s.validate(),
            ModelSpec::Jc(s) => s.validate(),
        }
    }

    /// The Hamiltonian as specified.
    pub fn build(&self) -> Result<HermitianOperator> {
        match self {
            ModelSpec::Gho(s) => build_gho(s),
            ModelSpec::Spin(s) => build_spin(s),
            ModelSpec::Jc(s) => build_jc(s),
        }
    }

    /// The Hamiltonian that is flowed: an oscillator with both linear and
    /// quadratic terms is first displaced to remove the linear ones.
    pub fn flow_hamiltonian(&self) -> Result<HermitianOperator> {
        match self {
            ModelSpec::Gho(s) if s.lambda.norm() > 0.0 && s.mu.norm() > 0.0 => {
                build_gho(&reduce_gho(s)?.0)
            }
            _ => self.build(),
        }
    }
}
