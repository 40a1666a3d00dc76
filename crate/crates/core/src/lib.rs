//! Numerical toolkit for Dirichlet problems driven by the fractional Laplacian
//! `Δ^{α/2}`, `0 < α < 2`.

pub mod dirichlet;
pub mod domain;
pub mod error;
pub mod fraclap_op;
pub mod harness;
pub mod killed_mc;
pub mod norms;
pub mod quad;
pub mod stable_kernel;

pub use domain::{Domain, Grid, ZetaPartition};
pub use error::{Error, Result};
pub use fraclap_op::{DirichletOperator, GridFunction};
pub use stable_kernel::{Alpha, KernelQuery};
