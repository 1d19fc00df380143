//! Compiles textual experiment designs into Hasse diagrams of their factors
//! and derives everything that follows from them: degrees of freedom, error
//! strata, F-test denominators, expected mean squares, model formulas,
//! renderings, randomized layouts and balanced ANOVA tables.
//!
//! ```
//! let text = "design crd {
//!     treatment { A: fixed 3 structure: A }
//!     unit { E: random 12 response: E }
//!     randomize { A -> E }
//! }";
//! let compiled = hasse::compile(text, &hasse::CompileOptions::default()).unwrap();
//! let table = hasse::skeleton::skeleton_table(&compiled.diagram).unwrap();
//! assert_eq!(table.row("A").unwrap().df, 2);
//! assert_eq!(table.row("Residual").unwrap().df, 9);
//! ```

pub mod anova;
pub mod dsl;
pub mod error;
pub mod formula;
mod lexer;
pub mod model;
pub mod plan;
pub mod poset;
pub mod render;
pub mod scalar;
pub mod skeleton;

pub use anova::{compute_anova, effect_decomposition, simulate_response};
pub use dsl::{parse_design, validate_spec, DesignSpec, InteractionPolicy, ValidationReport};
pub use error::{Error, Result};
pub use model::{emit_error_stratum_formula, emit_pipe_random_term_formula};
pub use plan::{generate_latin_square, generate_plan, validate_plan, Plan};
pub use poset::{build_experiment, degrees_of_freedom, merge_zero_df, Diagram, Factor, FactorId};
pub use render::{render, RenderFormat, RenderOptions};
pub use scalar::Scalar;
pub use skeleton::{skeleton_table, SkeletonTable};

pub type DataTable = anova::DataTable<f64>;
pub type DataTableF32 = anova::DataTable<f32>;
pub type AnovaTable = anova::AnovaTable<f64>;
pub type AnovaTableF32 = anova::AnovaTable<f32>;
pub type Effects = anova::Effects<f64>;
pub type EffectsF32 = anova::Effects<f32>;
pub type Simulator = anova::Simulator<f64>;
pub type SimulatorF32 = anova::Simulator<f32>;

#[derive(Debug, Clone, Default)]
pub struct CompileOptions {
    /// Replaces the policy written in the design.
    pub interactions: Option<InteractionPolicy>,
    pub merge_zero_df: bool,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub spec: DesignSpec,
    pub report: ValidationReport,
    /// Experiment diagram with degrees of freedom.
    pub diagram: Diagram,
}

/// Parses, validates and builds the experiment diagram. Validation errors
/// are left in the report for the caller to act on; the diagram is only
/// built when there are none.
pub fn compile(text: &str, opts: &CompileOptions) -> std::result::Result<Compiled, CompileFailure> {
    let spec = parse_design(text).map_err(|e| CompileFailure::Error(e.into()))?;
    let report = validate_spec(&spec);
    if report.has_errors() {
        return Err(CompileFailure::Invalid(report));
    }
    let policy = opts
        .interactions
        .clone()
        .unwrap_or_else(|| spec.interaction_policy.clone());
    let mut diagram = poset::build_experiment_with(&spec, &policy)
        .map_err(|e| CompileFailure::Error(e.into()))?;
    if opts.merge_zero_df {
        diagram = merge_zero_df(&diagram).map_err(|e| CompileFailure::Error(e.into()))?;
    }
    Ok(Compiled {
        spec,
        report,
        diagram,
    })
}

#[derive(Debug, Clone)]
pub enum CompileFailure {
    Invalid(ValidationReport),
    Error(Error),
}

impl std::fmt::Display for CompileFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CompileFailure::Invalid(r) => write!(f, "{r}"),
            CompileFailure::Error(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CompileFailure {}
