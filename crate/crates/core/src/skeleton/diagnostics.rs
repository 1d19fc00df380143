use std::fmt;

use super::{experimental_units, find_denominator, Denominator};
use crate::poset::{BaseKind, Diagram, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    PseudoReplication,
    CompleteConfounding,
    MarginalityViolation,
    NoExactTest,
    UnitTreatmentInteractionAssumedNegligible,
    UnresolvedExperimentalUnit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subjects: Vec<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            DiagnosticKind::PseudoReplication => "pseudo-replication",
            DiagnosticKind::CompleteConfounding => "confounding",
            DiagnosticKind::MarginalityViolation => "marginality",
            DiagnosticKind::NoExactTest => "no exact test",
            DiagnosticKind::UnitTreatmentInteractionAssumedNegligible => "assumption",
            DiagnosticKind::UnresolvedExperimentalUnit => "experimental unit",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Treatment factors whose experimental unit lies strictly above the
/// response unit.
pub fn detect_pseudo_replication(d: &Diagram) -> Vec<Diagnostic> {
    let Some(r) = d.response() else {
        return Vec::new();
    };
    let eu = experimental_units(d);
    let mut out = Vec::new();
    for f in d.topological_order() {
        let Some(u) = eu.get(f) else { continue };
        if u != r && d.is_below(r, u) {
            let (t, u, r) = (&d.factor(f).name, &d.factor(u).name, &d.factor(r).name);
            out.push(Diagnostic {
                kind: DiagnosticKind::PseudoReplication,
                subjects: vec![t.clone(), u.clone(), r.clone()],
                message: format!(
                    "`{t}` is randomized on `{u}`; the {r} measurements within each {u} are pseudo-replicates"
                ),
            });
        }
    }
    out
}

/// Treatment interactions present without one of their main effects.
pub fn marginality_check(d: &Diagram) -> Vec<Diagnostic> {
    let bases = d.bases();
    let mut out = Vec::new();
    for f in d.topological_order() {
        let x = d.factor(f);
        if x.role != Role::Treatment || x.constituents.len() < 2 {
            continue;
        }
        for b in x.constituents.iter() {
            if d.find_closure(bases.base_closure(b)).is_none() {
                let main = &bases.get(b).name;
                out.push(Diagnostic {
                    kind: DiagnosticKind::MarginalityViolation,
                    subjects: vec![x.name.clone(), main.clone()],
                    message: format!(
                        "interaction `{}` is present but main effect `{main}` is not",
                        x.name
                    ),
                });
            }
        }
    }
    out
}

fn confounding(d: &Diagram) -> Vec<Diagnostic> {
    let Some(df) = d.df_values() else {
        return Vec::new();
    };
    d.topological_order()
        .into_iter()
        .filter(|&f| f != d.mean() && df[f] == 0)
        .map(|f| {
            let parents: Vec<String> = d
                .cover_parents(f)
                .into_iter()
                .map(|p| d.factor(p).name.clone())
                .collect();
            let name = d.factor(f).name.clone();
            Diagnostic {
                kind: DiagnosticKind::CompleteConfounding,
                message: format!(
                    "`{name}` has zero degrees of freedom and is completely confounded with {}",
                    parents.join(", ")
                ),
                subjects: std::iter::once(name).chain(parents).collect(),
            }
        })
        .collect()
}

fn no_exact_tests(d: &Diagram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for f in d.topological_order() {
        if d.factor(f).is_mean() {
            continue;
        }
        if let Ok(Denominator::NoExactTest(gs)) = find_denominator(d, f) {
            let names: Vec<String> = gs.iter().map(|&g| d.factor(g).name.clone()).collect();
            out.push(Diagnostic {
                kind: DiagnosticKind::NoExactTest,
                message: format!(
                    "no exact F-test for `{}`: candidate error terms {} are incomparable; an approximate (Satterthwaite) denominator is needed",
                    d.factor(f).name,
                    names.join(", ")
                ),
                subjects: std::iter::once(d.factor(f).name.clone())
                    .chain(names)
                    .collect(),
            });
        }
    }
    out
}

fn negligible_interactions(d: &Diagram) -> Vec<Diagnostic> {
    let bases = d.bases();
    let mut out = Vec::new();
    for (u, ub) in bases.iter() {
        if ub.kind != BaseKind::Unit {
            continue;
        }
        let uc = bases.base_closure(u);
        for (t, tb) in bases.iter() {
            if tb.kind != BaseKind::Treatment || uc.contains(t) {
                continue;
            }
            let joint = uc.union(bases.base_closure(t));
            if d.find_closure(joint).is_none() {
                out.push(Diagnostic {
                    kind: DiagnosticKind::UnitTreatmentInteractionAssumedNegligible,
                    subjects: vec![ub.name.clone(), tb.name.clone()],
                    message: format!(
                        "`{}` is crossed with `{}`; their interaction is assumed negligible",
                        ub.name, tb.name
                    ),
                });
            }
        }
    }
    out
}

fn unresolved_units(d: &Diagram) -> Vec<Diagnostic> {
    experimental_units(d)
        .unresolved
        .into_iter()
        .map(|(f, us)| {
            let names: Vec<String> = us.iter().map(|&u| d.factor(u).name.clone()).collect();
            Diagnostic {
                kind: DiagnosticKind::UnresolvedExperimentalUnit,
                message: format!(
                    "`{}` has incomparable candidate experimental units {}",
                    d.factor(f).name,
                    names.join(", ")
                ),
                subjects: std::iter::once(d.factor(f).name.clone())
                    .chain(names)
                    .collect(),
            }
        })
        .collect()
}

/// Every diagnostic for the diagram.
pub fn diagnostics(d: &Diagram) -> Vec<Diagnostic> {
    let mut out = detect_pseudo_replication(d);
    out.extend(marginality_check(d));
    out.extend(confounding(d));
    out.extend(no_exact_tests(d));
    out.extend(unresolved_units(d));
    out.extend(negligible_interactions(d));
    out
}
