pub mod diff;
pub mod error;
pub mod expm;
pub mod flow;
pub mod geometry;
pub mod models;
pub mod ode;
pub mod operator;
pub mod pipeline;
pub mod random;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowTrajectory, GeneratorChoice, Sampling, StopReason};
pub use ode::Integrator;
pub use operator::{AntiHermitianOperator, BandDecomposition, CMatrix, HermitianOperator, C64};
