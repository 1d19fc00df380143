//! Factor posets: treatment, unit and experiment structure diagrams.
//!
//! Every factor is identified by a closed set of base factors (see
//! [`BaseTable`]). `Y` is below `X` exactly when the set of `X` is a proper
//! subset of the set of `Y`, so interactions sit below their constituents
//! and a unit factor sits below the treatments randomized on it.

mod base;
mod build;
mod df;
mod merge;
mod relation;

pub use base::{BaseFactor, BaseId, BaseKind, BaseSet, BaseTable, Restriction};
pub use build::{
    build_experiment, build_experiment_with, build_treatment_poset, build_unit_poset,
    canonicalize_interaction, compose_experiment, experiment_bases,
};
pub use df::degrees_of_freedom;
pub use merge::{merge_zero_df, MergeRecord};
pub use relation::Relation;

use std::fmt;

use crate::dsl::Variability;
use crate::error::PosetError;

pub type FactorId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Mean,
    Treatment,
    Unit,
    UnitByTreatment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramKind {
    Treatment,
    Unit,
    Experiment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub id: FactorId,
    pub name: String,
    /// Every base factor whose level this factor determines.
    pub closure: BaseSet,
    /// Minimal generating base factors; empty for `M`.
    pub constituents: BaseSet,
    /// Fixed base factors among the constituents. Shrinks when a zero-df
    /// factor is merged in.
    pub fixed_constituents: BaseSet,
    pub variability: Variability,
    pub role: Role,
    pub levels: u64,
    /// Names of zero-df factors merged into this one.
    pub pooled: Vec<String>,
}

impl Factor {
    pub fn is_random(&self) -> bool {
        self.variability == Variability::Random
    }

    pub fn is_fixed(&self) -> bool {
        self.variability == Variability::Fixed
    }

    pub fn is_mean(&self) -> bool {
        self.role == Role::Mean
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    pub(crate) kind: DiagramKind,
    pub(crate) bases: BaseTable,
    pub(crate) factors: Vec<Factor>,
    /// `order.contains(x, y)`: `y` is strictly below `x`.
    pub(crate) order: Relation,
    pub(crate) covers: Relation,
    pub(crate) response: Option<FactorId>,
    pub(crate) df: Option<Vec<u64>>,
    pub(crate) warnings: Vec<String>,
    pub(crate) merges: Vec<MergeRecord>,
}

impl Diagram {
    /// Builds a diagram over `M` plus one factor per distinct closed set.
    pub(crate) fn from_closures(
        kind: DiagramKind,
        bases: BaseTable,
        closures: impl IntoIterator<Item = BaseSet>,
    ) -> Self {
        let mut d = Diagram {
            kind,
            bases,
            factors: Vec::new(),
            order: Relation::new(0),
            covers: Relation::new(0),
            response: None,
            df: None,
            warnings: Vec::new(),
            merges: Vec::new(),
        };
        let mut sets = vec![BaseSet::EMPTY];
        for c in closures {
            if !sets.contains(&c) {
                sets.push(c);
            }
        }
        d.factors = sets
            .into_iter()
            .enumerate()
            .map(|(id, c)| d.make_factor(id, c))
            .collect();
        d.rebuild_order();
        d
    }

    pub(crate) fn make_factor(&self, id: FactorId, closure: BaseSet) -> Factor {
        let b = &self.bases;
        let constituents = b.minimal(closure);
        let random = constituents
            .iter()
            .any(|c| b.get(c).variability == Variability::Random);
        let units = closure.intersection(b.units());
        let role = if closure.is_empty() {
            Role::Mean
        } else if units.is_empty() {
            Role::Treatment
        } else if closure.is_subset(b.closure_of(units)) {
            Role::Unit
        } else {
            Role::UnitByTreatment
        };
        Factor {
            id,
            name: b.name_of(constituents),
            closure,
            constituents,
            fixed_constituents: constituents.intersection(b.fixed()),
            variability: if random {
                Variability::Random
            } else {
                Variability::Fixed
            },
            role,
            levels: b.levels(closure),
            pooled: Vec::new(),
        }
    }

    /// Adds a factor for `closure` unless one exists; returns its id.
    pub(crate) fn insert_closure(&mut self, closure: BaseSet) -> FactorId {
        if let Some(f) = self.factors.iter().find(|f| f.closure == closure) {
            return f.id;
        }
        let id = self.factors.len();
        let f = self.make_factor(id, closure);
        self.factors.push(f);
        self.rebuild_order();
        self.df = None;
        id
    }

    /// Recomputes order and covers from the factor closures.
    pub(crate) fn rebuild_order(&mut self) {
        let n = self.factors.len();
        let mut order = Relation::new(n);
        for x in &self.factors {
            for y in &self.factors {
                if x.id != y.id && x.closure.is_subset(y.closure) {
                    order.insert(x.id, y.id);
                }
            }
        }
        self.covers = order
            .transitive_reduction()
            .expect("strict inclusion is acyclic");
        self.order = order;
    }

    pub(crate) fn rebuild_covers(&mut self) {
        self.covers = self.order.transitive_reduction().expect("order is acyclic");
    }

    pub fn kind(&self) -> DiagramKind {
        self.kind
    }

    pub fn bases(&self) -> &BaseTable {
        &self.bases
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, id: FactorId) -> &Factor {
        &self.factors[id]
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn mean(&self) -> FactorId {
        0
    }

    pub fn find(&self, name: &str) -> Option<FactorId> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// Factor with the given set of base-factor names, in any order.
    pub fn find_by_names<S: AsRef<str>>(&self, names: &[S]) -> Option<FactorId> {
        let ids: Option<Vec<BaseId>> = names.iter().map(|n| self.bases.index(n.as_ref())).collect();
        let closure = self.bases.closure_of(BaseSet::from_ids(ids?));
        self.find_closure(closure)
    }

    pub fn find_closure(&self, closure: BaseSet) -> Option<FactorId> {
        self.factors.iter().position(|f| f.closure == closure)
    }

    /// Factor carrying base factor `b` on its own, following merges.
    pub fn factor_of_base(&self, b: BaseId) -> Option<FactorId> {
        self.find_closure(self.bases.base_closure(b)).or_else(|| {
            let name = &self.bases.get(b).name;
            self.factors.iter().position(|f| f.pooled.contains(name))
        })
    }

    pub fn response(&self) -> Option<FactorId> {
        self.response
    }

    pub fn order(&self) -> &Relation {
        &self.order
    }

    pub fn covers(&self) -> &Relation {
        &self.covers
    }

    /// `y` is strictly below (nested in) `x`.
    pub fn is_below(&self, y: FactorId, x: FactorId) -> bool {
        self.order.contains(x, y)
    }

    pub fn comparable(&self, x: FactorId, y: FactorId) -> bool {
        x == y || self.is_below(x, y) || self.is_below(y, x)
    }

    /// Strict ancestors of `f`.
    pub fn ancestors(&self, f: FactorId) -> Vec<FactorId> {
        (0..self.len()).filter(|&g| self.is_below(f, g)).collect()
    }

    /// Strict descendants of `f`.
    pub fn descendants(&self, f: FactorId) -> Vec<FactorId> {
        (0..self.len()).filter(|&g| self.is_below(g, f)).collect()
    }

    pub fn cover_parents(&self, f: FactorId) -> Vec<FactorId> {
        (0..self.len())
            .filter(|&g| self.covers.contains(g, f))
            .collect()
    }

    pub fn cover_children(&self, f: FactorId) -> Vec<FactorId> {
        (0..self.len())
            .filter(|&g| self.covers.contains(f, g))
            .collect()
    }

    /// Cover edges `(upper, lower)` in topological order of both ends.
    pub fn cover_edges(&self) -> Vec<(FactorId, FactorId)> {
        let topo = self.topological_order();
        let rank = self.rank_of(&topo);
        let mut edges: Vec<_> = self.covers.pairs().collect();
        edges.sort_by_key(|&(a, b)| (rank[a], rank[b]));
        edges
    }

    /// Length of the longest chain from `M` down to `f`.
    pub fn depth(&self, f: FactorId) -> usize {
        let mut memo = vec![None; self.len()];
        self.depth_memo(f, &mut memo)
    }

    fn depth_memo(&self, f: FactorId, memo: &mut [Option<usize>]) -> usize {
        if let Some(d) = memo[f] {
            return d;
        }
        let d = self
            .cover_parents(f)
            .into_iter()
            .map(|p| self.depth_memo(p, memo) + 1)
            .max()
            .unwrap_or(0);
        memo[f] = Some(d);
        d
    }

    /// All factors sorted by depth, ties by name.
    pub fn topological_order(&self) -> Vec<FactorId> {
        let mut memo = vec![None; self.len()];
        let mut ids: Vec<FactorId> = (0..self.len()).collect();
        let depths: Vec<usize> = ids.iter().map(|&f| self.depth_memo(f, &mut memo)).collect();
        ids.sort_by(|&a, &b| {
            (depths[a], &self.factors[a].name).cmp(&(depths[b], &self.factors[b].name))
        });
        ids
    }

    pub(crate) fn rank_of(&self, topo: &[FactorId]) -> Vec<usize> {
        let mut rank = vec![0; self.len()];
        for (i, &f) in topo.iter().enumerate() {
            rank[f] = i;
        }
        rank
    }

    /// The factor below every other factor, if there is one.
    pub fn minimum(&self) -> Option<FactorId> {
        (0..self.len()).find(|&f| (0..self.len()).all(|g| g == f || self.is_below(f, g)))
    }

    pub fn df(&self, f: FactorId) -> Option<u64> {
        self.df.as_ref().map(|d| d[f])
    }

    pub fn df_values(&self) -> Option<&[u64]> {
        self.df.as_deref()
    }

    /// Computes and stores degrees of freedom.
    pub fn with_df(mut self) -> Result<Self, PosetError> {
        self.df = Some(degrees_of_freedom(&self)?);
        Ok(self)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn merges(&self) -> &[MergeRecord] {
        &self.merges
    }

    /// Formula spelling of a factor: treatments first, units with their
    /// unit ancestry (e.g. `Block:Plot`).
    pub fn formula_name(&self, f: FactorId) -> String {
        self.bases
            .formula_names(self.factors[f].constituents)
            .join(":")
    }
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for id in self.topological_order() {
            let x = &self.factors[id];
            write!(f, "{} [{}]", x.name, x.levels)?;
            if let Some(df) = self.df(id) {
                write!(f, " df={df}")?;
            }
            let parents: Vec<&str> = self
                .cover_parents(id)
                .into_iter()
                .map(|p| self.factors[p].name.as_str())
                .collect();
            if !parents.is_empty() {
                write!(f, " < {}", parents.join(", "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Recomputes the cover edges of `diagram` from its order.
pub fn transitive_reduction(diagram: &Diagram) -> Result<Diagram, PosetError> {
    let mut d = diagram.clone();
    let mut all = d.order.clone();
    for (a, b) in d.covers.pairs() {
        all.insert(a, b);
    }
    let closed = all
        .transitive_closure()
        .map_err(|i| PosetError::Cycle(d.factors[i].name.clone()))?;
    d.order = closed;
    d.rebuild_covers();
    Ok(d)
}
