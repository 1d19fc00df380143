//! The textual design language.
//!
//! ```text
//! design oats {
//!   treatment {
//!     Variety: fixed 3
//!     Nitrogen: fixed 4
//!     structure: Variety*Nitrogen
//!   }
//!   unit {
//!     Block: random 6
//!     Plot: random 3 in Block
//!     Subplot: random 4 in Plot
//!     response: Subplot
//!   }
//!   randomize {
//!     Variety -> Plot
//!     Nitrogen -> Subplot
//!   }
//!   interactions: none
//! }
//! ```
//!
//! Unit level counts are per parent cell, so `Plot: random 3 in Block` with
//! six blocks gives eighteen plots. A unit factor may sit inside the cells of
//! several crossed unit factors, written `E: random 1 in Row:Column`.
//! `#` starts a comment. Semicolons and commas between items are optional.

mod parser;
mod print;
mod validate;

pub use parser::parse_design;
pub use validate::{validate_spec, Issue, IssueKind, Severity, ValidationReport};

use crate::formula::StructureExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variability {
    Fixed,
    Random,
}

impl Variability {
    pub fn keyword(self) -> &'static str {
        match self {
            Variability::Fixed => "fixed",
            Variability::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeclRole {
    Treatment,
    Unit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorDecl {
    pub name: String,
    pub variability: Variability,
    pub role: DeclRole,
    /// Levels of a treatment factor, or replicates per parent cell for a
    /// nested unit factor.
    pub levels: u64,
    /// Unit factors whose cells contain this one; empty when directly
    /// under the mean.
    pub parents: Vec<String>,
}

impl FactorDecl {
    pub fn treatment(name: impl Into<String>, variability: Variability, levels: u64) -> Self {
        FactorDecl {
            name: name.into(),
            variability,
            role: DeclRole::Treatment,
            levels,
            parents: Vec::new(),
        }
    }

    pub fn unit(
        name: impl Into<String>,
        variability: Variability,
        levels: u64,
        parents: &[&str],
    ) -> Self {
        FactorDecl {
            name: name.into(),
            variability,
            role: DeclRole::Unit,
            levels,
            parents: parents.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Which unit-by-treatment interactions enter the experiment diagram.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum InteractionPolicy {
    /// All assumed negligible.
    #[default]
    None,
    /// Every interaction induced by crossing a unit and a treatment factor.
    All,
    /// Only the listed interactions, each given by its factor names.
    Keep(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpec {
    pub name: String,
    pub treatment_decls: Vec<FactorDecl>,
    pub treatment_expr: StructureExpr,
    pub unit_decls: Vec<FactorDecl>,
    pub response: String,
    /// Treatment factor -> unit factor, in source order.
    pub randomization: Vec<(String, String)>,
    pub interaction_policy: InteractionPolicy,
}

impl DesignSpec {
    pub fn decl(&self, name: &str) -> Option<&FactorDecl> {
        self.treatment_decls
            .iter()
            .chain(self.unit_decls.iter())
            .find(|d| d.name == name)
    }

    pub fn randomized_on(&self, treatment: &str) -> Option<&str> {
        self.randomization
            .iter()
            .find(|(t, _)| t == treatment)
            .map(|(_, u)| u.as_str())
    }
}

pub(crate) const KEYWORDS: &[&str] = &[
    "design",
    "treatment",
    "unit",
    "randomize",
    "interactions",
    "structure",
    "response",
    "fixed",
    "random",
    "in",
    "none",
    "all",
    "M",
    "Error",
];
