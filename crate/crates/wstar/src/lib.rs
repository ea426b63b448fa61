//! Numerical workbench for the continuous-logic axiomatization of σ-finite
//! W*-probability spaces, realized on matrix models `(M_n(C), rho)`.

pub mod error;
pub mod model;
pub mod modular;
pub mod sampling;
pub mod smearing;
pub mod metrics;
pub mod discretization;
pub mod clogic;
pub mod catalog;
pub mod definability;
pub mod lemmas;
pub mod cli;

pub use error::{Error, Result};
pub use model::{Operator, WStarModel, C64};
pub use modular::ModularCalculus;
