//! Continuous-logic layer: terms, conditions, their evaluation in matrix models,
//! the axiom library and an S-expression syntax.

pub mod ast;
pub mod axioms;
pub mod dsl;
pub mod eval;
pub mod report;

pub use ast::{Condition, ConstName, Scalar, TauSpec, Term};
pub use axioms::{axiom_instances, axiom_library, parse_axiom_range, AxiomInstance, AxiomKind, Instantiation};
pub use eval::{eval_condition, eval_term, Assignment, BallSearch, Evaluation, Interpretation, Strategy};
pub use report::{run_suite, AxiomReport, SuiteConfig};
