//! The κ exactness diagnostic and the tests applied to replicate studies.

pub mod gof;
pub mod kappa;
pub mod krippendorff;
pub mod ks;

pub use gof::{fit_chisq_mle, fit_gamma_mle, ChisqFit, GammaFit};
pub use kappa::{kappa, kappa_grid, KappaCell, KappaResult};
pub use krippendorff::{krippendorff_alpha, AlphaResult};
pub use ks::{ks_test_chisq, KsResult};
