pub mod cutoffs;
pub mod derivatives;
pub mod error;
pub mod estimates;
pub mod gluing;
pub mod grid;
pub mod jstruct;
pub mod linalg;
pub mod nonlinear;
pub mod norms;
pub mod testmaps;
pub mod harness;
