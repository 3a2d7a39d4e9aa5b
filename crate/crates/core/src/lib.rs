pub mod cli;
pub mod fem;
pub mod geometry;
pub mod indicators;
pub mod linalg;
pub mod mms;
pub mod solver;
