//! The three exactly solvable examples: a generalized harmonic oscillator,
//! a spin in a constant field and the Jaynes-Cummings model.
//!
//! Each model provides a Hamiltonian builder, the unitary families its flow
//! moves along, the reduced coefficient equations, and the projection of a
//! flowed unitary back onto family coordinates.

mod families;
mod gho;
mod jc;
mod projection;
mod reduced;
mod spec;
mod spin;

pub use families::{
    displacement_family, jc_family, spin_family, squeeze_family, FamilyKind, ModelFamily,
};
pub use gho::{build_gho, displacement_shift, edge_amplitude, reduce_gho, GhoSpec};
pub use jc::{build_jc, jc_index, sector_blocks, JcSpec, SectorBlock, SectorBlocks};
pub use projection::{coordinate_projection, Projection, PROJECTION_TOL};
pub use reduced::{closed_form_flow, ReducedCoefficients, ReducedModel, ReducedSeries};
pub use spec::ModelSpec;
pub use spin::{build_spin, spin_index, spin_matrices, SpinMatrices, SpinSpec};

use crate::operator::{CMatrix, C64};

/// Truncated annihilation operator on Fock levels `0..=n_max`.
pub fn annihilation(n_max: usize) -> CMatrix {
    let d = n_max + 1;
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Complex numbers as `[re, im]` in JSON.
pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
