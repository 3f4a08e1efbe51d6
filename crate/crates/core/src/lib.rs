//! Simulation toolkit for a dissipatively coupled two-qubit system driven out of
//! its nonequilibrium steady state by unitary quenches.
//!
//! * [`qmat`]: dense complex matrices, entropies, partial trace/transpose.
//! * [`model`]: Hamiltonian, bath rates, jump operators, Liouvillian, steady state.
//! * [`dynamics`]: relaxation after a quench, heat currents and entropy bookkeeping.
//! * [`workstats`]: two-point-measurement work statistics and the quench unitaries.
//! * [`tur`]: uncertainty-relation bounds, reports and Haar-random violation scans.
//! * [`entangle`]: concurrence, entanglement criteria, closest separable state.

pub mod error;
pub mod qmat;
pub mod model;
pub mod dynamics;
pub mod workstats;
pub mod tur;
pub mod entangle;
mod ode;

pub use error::{Error, Result};
