//! Pre-data analysis of an experiment diagram: experimental units, error
//! strata, F-test denominators, expected mean squares and the skeleton
//! ANOVA table.
//!
//! Expected mean squares follow the restricted-model convention: the
//! variance component of a random factor `G` below `F` contributes to
//! `E[MS(F)]` only when `G` brings in no fixed factor that `F` lacks.

mod diagnostics;

pub use diagnostics::{
    detect_pseudo_replication, diagnostics, marginality_check, Diagnostic, DiagnosticKind,
};

use std::collections::BTreeMap;
use std::fmt;

use crate::error::SkeletonError;
use crate::poset::{BaseKind, Diagram, FactorId, Role};

/// Experimental unit of every treatment factor whose unit can be resolved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentalUnits {
    pub units: BTreeMap<FactorId, FactorId>,
    /// Treatment factors whose candidate units are incomparable.
    pub unresolved: Vec<(FactorId, Vec<FactorId>)>,
}

impl ExperimentalUnits {
    pub fn get(&self, treatment: FactorId) -> Option<FactorId> {
        self.units.get(&treatment).copied()
    }
}

pub fn experimental_units(d: &Diagram) -> ExperimentalUnits {
    let bases = d.bases();
    let mut out = ExperimentalUnits::default();
    for f in d.topological_order() {
        let factor = d.factor(f);
        if factor.role != Role::Treatment {
            continue;
        }
        let mut candidates: Vec<FactorId> = Vec::new();
        for b in factor.constituents.iter() {
            if bases.get(b).kind != BaseKind::Treatment {
                continue;
            }
            if let Some(u) = bases.get(b).randomized_on.and_then(|u| d.factor_of_base(u)) {
                if !candidates.contains(&u) {
                    candidates.push(u);
                }
            }
        }
        let lowest = candidates
            .iter()
            .copied()
            .find(|&u| candidates.iter().all(|&v| v == u || d.is_below(u, v)));
        match lowest {
            Some(u) => {
                out.units.insert(f, u);
            }
            None if !candidates.is_empty() => out.unresolved.push((f, candidates)),
            None => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Denominator {
    Factor(FactorId),
    /// Several incomparable closest candidates; no exact F-test exists.
    NoExactTest(Vec<FactorId>),
}

/// Random factors strictly below `f` that bring in no new fixed factor.
fn eligible(d: &Diagram, f: FactorId) -> Vec<FactorId> {
    let fixed = d.factor(f).fixed_constituents;
    d.topological_order()
        .into_iter()
        .filter(|&g| {
            let x = d.factor(g);
            x.is_random() && d.is_below(g, f) && x.fixed_constituents.is_subset(fixed)
        })
        .collect()
}

/// Closest eligible random factor below `f`.
pub fn find_denominator(d: &Diagram, f: FactorId) -> Result<Denominator, SkeletonError> {
    let candidates = eligible(d, f);
    let maximal: Vec<FactorId> = candidates
        .iter()
        .copied()
        .filter(|&g| !candidates.iter().any(|&h| d.is_below(g, h)))
        .collect();
    match maximal.as_slice() {
        [] => Err(SkeletonError::NoDenominator(d.factor(f).name.clone())),
        [g] => Ok(Denominator::Factor(*g)),
        _ => Ok(Denominator::NoExactTest(maximal)),
    }
}

/// Stratum of every factor: random unit factors head their own; any other
/// factor belongs to the closest random unit factor below it. `M` has none.
pub fn error_strata(d: &Diagram) -> Vec<Option<FactorId>> {
    let topo = d.topological_order();
    (0..d.len())
        .map(|f| {
            let x = d.factor(f);
            if x.is_mean() {
                return None;
            }
            if x.is_random() && x.role == Role::Unit {
                return Some(f);
            }
            let below: Vec<FactorId> = topo
                .iter()
                .copied()
                .filter(|&g| {
                    let y = d.factor(g);
                    y.is_random() && y.role == Role::Unit && d.is_below(g, f)
                })
                .collect();
            below
                .iter()
                .copied()
                .find(|&g| !below.iter().any(|&h| d.is_below(g, h)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EmsTerm {
    pub coefficient: u64,
    pub factor: FactorId,
    pub name: String,
}

/// `E[MS(F)]` as an optional `k*Q(F)` term plus variance components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmsExpression {
    pub fixed: Option<EmsTerm>,
    pub components: Vec<EmsTerm>,
}

impl EmsExpression {
    /// The expression with `f`'s own term removed.
    pub fn without(&self, f: FactorId) -> EmsExpression {
        EmsExpression {
            fixed: self.fixed.clone().filter(|t| t.factor != f),
            components: self
                .components
                .iter()
                .filter(|t| t.factor != f)
                .cloned()
                .collect(),
        }
    }

    /// Evaluates the variance-component part given `sigma2[factor]`.
    pub fn evaluate(&self, sigma2: impl Fn(FactorId) -> f64) -> f64 {
        self.components
            .iter()
            .map(|t| t.coefficient as f64 * sigma2(t.factor))
            .sum()
    }
}

impl fmt::Display for EmsExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let coef = |k: u64| {
            if k == 1 {
                String::new()
            } else {
                format!("{k}*")
            }
        };
        if let Some(t) = &self.fixed {
            parts.push(format!("{}Q({})", coef(t.coefficient), t.name));
        }
        for t in &self.components {
            parts.push(format!("{}sigma2({})", coef(t.coefficient), t.name));
        }
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

fn observations(d: &Diagram) -> u64 {
    d.response()
        .or_else(|| d.minimum())
        .map(|r| d.factor(r).levels)
        .unwrap_or(1)
}

pub fn expected_mean_squares(d: &Diagram, f: FactorId) -> EmsExpression {
    let n = observations(d);
    let term = |g: FactorId| EmsTerm {
        coefficient: n / d.factor(g).levels.max(1),
        factor: g,
        name: d.factor(g).name.clone(),
    };
    let x = d.factor(f);
    let fixed = x.is_fixed().then(|| term(f));
    let mut components = Vec::new();
    if x.is_random() {
        components.push(term(f));
    }
    components.extend(eligible(d, f).into_iter().map(term));
    EmsExpression { fixed, components }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonRow {
    pub factor: FactorId,
    /// Row label: the factor name, or `Residual` for the response.
    pub label: String,
    pub name: String,
    pub levels: u64,
    pub df: u64,
    pub stratum: Option<FactorId>,
    /// `None` when nothing below can serve as error term.
    pub denominator: Option<Denominator>,
    pub ems: EmsExpression,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTable {
    pub rows: Vec<SkeletonRow>,
    names: Vec<String>,
}

impl SkeletonTable {
    pub fn row(&self, name: &str) -> Option<&SkeletonRow> {
        self.rows.iter().find(|r| r.name == name || r.label == name)
    }

    fn name(&self, f: Option<FactorId>) -> String {
        f.map(|f| self.names[f].clone())
            .unwrap_or_else(|| "-".into())
    }

    fn denominator_text(&self, d: &Option<Denominator>, sep: &str) -> String {
        match d {
            None => "-".into(),
            Some(Denominator::Factor(g)) => self.names[*g].clone(),
            Some(Denominator::NoExactTest(gs)) => {
                let names: Vec<&str> = gs.iter().map(|&g| self.names[g].as_str()).collect();
                format!("no exact test ({})", names.join(sep))
            }
        }
    }

    fn cells(&self, sep: &str) -> Vec<[String; 6]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    r.levels.to_string(),
                    r.df.to_string(),
                    self.name(r.stratum),
                    self.denominator_text(&r.denominator, sep),
                    r.ems.to_string(),
                ]
            })
            .collect()
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let header = ["Source", "Levels", "df", "Stratum", "Denominator", "E[MS]"];
        let cells = self.cells(", ");
        let mut width = header.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, c) in row.iter().enumerate() {
                if i == row.len() - 1 {
                    s.push_str(c);
                } else if i == 1 || i == 2 {
                    s.push_str(&format!("{:>w$}  ", c, w = width[i]));
                } else {
                    s.push_str(&format!("{:<w$}  ", c, w = width[i]));
                }
            }
            s.trim_end().to_string()
        };
        let mut out = line(&header.map(String::from));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    /// Comma-separated rendering with a header row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["factor", "levels", "df", "stratum", "denominator", "ems"])
            .expect("in-memory write");
        for row in self.cells("|") {
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

impl fmt::Display for SkeletonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// One row per factor other than `M`, grouped by stratum in top-down order.
pub fn skeleton_table(d: &Diagram) -> Result<SkeletonTable, SkeletonError> {
    let df = match d.df_values() {
        Some(v) => v.to_vec(),
        None => crate::poset::degrees_of_freedom(d)?,
    };
    let topo = d.topological_order();
    let rank = {
        let mut r = vec![0usize; d.len()];
        for (i, &f) in topo.iter().enumerate() {
            r[f] = i;
        }
        r
    };
    let strata = error_strata(d);
    let residual = d.response().filter(|&r| d.minimum() == Some(r));

    let mut rows = Vec::new();
    for &f in &topo {
        let x = d.factor(f);
        if x.is_mean() {
            continue;
        }
        let denominator = match find_denominator(d, f) {
            Ok(den) => Some(den),
            Err(SkeletonError::NoDenominator(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(SkeletonRow {
            factor: f,
            label: if Some(f) == residual {
                "Residual".into()
            } else {
                x.name.clone()
            },
            name: x.name.clone(),
            levels: x.levels,
            df: df[f],
            stratum: strata[f],
            denominator,
            ems: expected_mean_squares(d, f),
        });
    }
    rows.sort_by_key(|r| (r.stratum.map_or(0, |s| rank[s] + 1), rank[r.factor]));
    Ok(SkeletonTable {
        rows,
        names: d.factors().iter().map(|f| f.name.clone()).collect(),
    })
}
