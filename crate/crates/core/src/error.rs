use std::fmt;

use thiserror::Error;

/// A 1-based line/column location in a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: found {found}, expected {}", expected.join(" or "))]
    Syntax {
        pos: Position,
        found: String,
        expected: Vec<String>,
    },
    #[error("{pos}: factor `{name}` is declared more than once")]
    DuplicateFactor { name: String, pos: Position },
    #[error("{pos}: `{name}` is reserved and cannot name a factor")]
    ReservedName { name: String, pos: Position },
    #[error("{pos}: unknown identifier `{name}`")]
    UnknownIdentifier { name: String, pos: Position },
    #[error("{pos}: `{name}` must be a {expected} factor")]
    WrongKind {
        name: String,
        expected: &'static str,
        pos: Position,
    },
    #[error("{pos}: factor `{name}` must have at least one level")]
    InvalidLevels { name: String, pos: Position },
    #[error("{pos}: treatment factor `{name}` is randomized more than once")]
    DuplicateRandomization { name: String, pos: Position },
    #[error("missing `response:` declaration in the unit block")]
    MissingResponse,
    #[error("missing `randomize` block")]
    MissingRandomize,
    #[error("missing `structure:` expression in the treatment block")]
    MissingStructure,
    #[error("missing `{0}` block")]
    MissingBlock(&'static str),
    #[error("{pos}: `{what}` may appear only once")]
    Repeated { what: &'static str, pos: Position },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PosetError {
    #[error("treatment structure refers to unit factor `{0}`")]
    UnitInTreatmentStructure(String),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("unit nesting forms a cycle through {}", .0.join(", "))]
    NestingCycle(Vec<String>),
    #[error("response `{response}` is not nested in unit factor `{unit}`")]
    ResponseNotMinimum { response: String, unit: String },
    #[error("treatment factor `{0}` is not randomized on any unit factor")]
    NotRandomized(String),
    #[error(
        "treatment factor `{treatment}` is randomized on `{unit}`, which is not a unit factor"
    )]
    RandomizedOnUnknown { treatment: String, unit: String },
    #[error("kept interaction `{term}` combines `{upper}` and `{lower}`, which are nested rather than crossed")]
    InteractionNotCrossed {
        term: String,
        upper: String,
        lower: String,
    },
    #[error("kept interaction `{term}` refers to `{name}`, which is not in the design")]
    InteractionConstituentMissing { term: String, name: String },
    #[error("factor `{factor}` has negative degrees of freedom ({df}); the structure is inconsistent or unbalanced")]
    NegativeDf { factor: String, df: i64 },
    #[error("relation contains a cycle through `{0}`")]
    Cycle(String),
    #[error("designs with more than 64 base factors are not supported")]
    TooManyBaseFactors,
    #[error("an interaction needs at least one constituent")]
    EmptyInteraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("factor `{0}` has no random factor below it to test against")]
    NoDenominator(String),
    #[error(transparent)]
    Poset(#[from] PosetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("random factors {} involve treatment factors and cannot be written as Error() strata; use the mixed-model dialect", .0.join(", "))]
    RequiresMixedModel(Vec<String>),
    #[error("malformed formula: {0}")]
    Malformed(#[from] ParseError),
    #[error("malformed formula: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("cannot balance {combinations} treatment combinations over groups of {group_size} levels of `{unit}`")]
    Unbalanced {
        unit: String,
        group_size: u64,
        combinations: u64,
    },
    #[error("a Latin square needs at least one treatment level")]
    EmptySquare,
    #[error("plan does not match the design: {0}")]
    SchemaMismatch(String),
    #[error("design has no response factor")]
    NoResponse,
    #[error("plan table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnovaError {
    #[error("data are unbalanced for factor `{factor}`: {detail}")]
    Unbalanced { factor: String, detail: String },
    #[error("data table does not match the design: {0}")]
    SchemaMismatch(String),
    #[error("factors `{first}` and `{second}` are not orthogonal; effects cannot be separated by averaging")]
    NotOrthogonal { first: String, second: String },
    #[error("variance component for `{0}` is missing")]
    MissingVariance(String),
    #[error("variance component for `{0}` is negative")]
    NegativeVariance(String),
    #[error("fixed effects for `{factor}` have {found} values, expected {expected}")]
    FixedEffectShape {
        factor: String,
        found: usize,
        expected: usize,
    },
    #[error("`{0}` is not a fixed factor of the design")]
    NotFixed(String),
    #[error("data table: {0}")]
    Table(String),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("unknown render format `{0}` (expected dot, ascii or tikz)")]
    UnknownFormat(String),
    #[error("degrees of freedom were requested but have not been computed")]
    MissingDf,
}

/// Any failure along the compile pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Anova(#[from] AnovaError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
