pub mod affine;
pub mod banded;
pub mod error;
pub mod forms;
pub mod harness;
pub mod cli;
pub mod hpq;
pub mod io;
pub mod jets;
pub mod lattice;
pub mod maximal;
pub mod reps;
