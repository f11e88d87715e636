//! Discrete vector-bundle calculus on graphs with a well.
//!
//! A [`graph::Graph`] carries conductances and a killing well; a
//! [`bundle::Connection`] assigns a unitary to every oriented edge. On top of
//! this the crate builds covariant Laplacians and Green sections
//! ([`calculus`]), continuous-time walks and path measures ([`paths`],
//! [`measures`]), signed coloured loop ensembles ([`coloured`]) and covariant
//! Gaussian free fields ([`fields`]). The [`harness`] module checks the
//! isomorphism identities between these objects, exactly and by seeded
//! Monte Carlo.
//!
//! Sections of the bundle over the proper vertices are flat vectors of length
//! `r * |V|`, block `x` occupying `x*r .. (x+1)*r`, always in complex
//! arithmetic. In the real mode every entry has zero imaginary part.

pub mod bundle;
pub mod calculus;
pub mod coloured;
pub mod error;
pub mod fields;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod mc;
pub mod measures;
pub mod paths;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
