//! Numerical algebraic geometry for real versus complex identifiability of
//! tensor decompositions.
//!
//! The crate enumerates all complex Waring decompositions of a symmetric
//! tensor by parameter homotopies and monodromy loops, classifies them under
//! complex conjugation, and ships the two geometric experiments that go with
//! it: real secant geometry of elliptic normal quartics in ℙ³ and real linear
//! sections of two-factor Segre varieties.
//!
//! Everything here is `no_std` + `alloc`. IO, JSON and the command line live
//! in the companion `realid` crate.

#![no_std]

extern crate alloc;

pub mod elliptic;
pub mod exec;
pub mod homotopy;
pub mod linalg;
pub mod monodromy;
pub mod poly;
pub mod realcert;
pub mod segre;
pub mod waring;

mod util;

pub use num_complex::Complex64 as C64;

pub use exec::{ParallelMap, Sequential};
pub use homotopy::{PathResult, PathStatus, SegmentHomotopy, TrackSettings};
pub use monodromy::{SolutionRegistry, StopPolicy};
pub use poly::{MPoly, PolySystem};
pub use realcert::{ClassifiedSet, DecompositionClass};
pub use waring::{Decomposition, Summand, TensorParams, WaringSpec};
