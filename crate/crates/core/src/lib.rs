//! Reference synthesis for languages whose static semantics are given as
//! constraint rules over scope graphs.
//!
//! A program with locked references is turned into an initial constraint;
//! the solver runs it until it gets stuck on the holes, and the search then
//! expands predicates and queries speculatively until each hole has a
//! reference term that resolves to its target declaration.

pub mod canon;
pub mod constraint;
pub mod graph;
pub mod regex;
pub mod search;
pub mod solver;
pub mod spec;
pub mod synthesis;
pub mod term;

pub use constraint::{Constraint, EqConstraint, Pred, Query, Rule};
pub use graph::{DataFilter, LabelOrder, ResolutionPath, ScopeGraph, ScopeId};
pub use regex::{Label, LabelRegex};
pub use solver::{Configuration, HoleId, HoleState, SolveStatus};
pub use spec::{SpecError, Specification};
pub use term::{SetTerm, SetVar, Substitution, Term, Var};
