//! Concrete metric spaces and energies.

pub mod hilbert;
pub mod icdf;
pub mod line;
pub mod sphere;
