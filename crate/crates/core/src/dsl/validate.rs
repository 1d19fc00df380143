use std::fmt;

use super::{DeclRole, DesignSpec, InteractionPolicy, Variability};
use crate::poset::{experiment_bases, Restriction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    /// A treatment factor is declared but absent from the structure.
    Unreachable,
    /// The structure references a unit factor.
    UnitInStructure,
    /// A treatment factor in the structure has no randomization target.
    NotRandomized,
    /// Random treatment factors are not supported.
    RandomTreatment,
    /// The response is not nested in every unit factor.
    ResponseNotMinimum,
    /// A treatment factor is randomized on a unit the response is not nested in.
    TargetAboveResponse,
    /// Treatment combinations cannot be spread evenly over the unit levels.
    Unbalanced,
    /// A kept interaction refers to a factor that is not part of the design.
    ConstituentMissing,
    /// The unit nesting cannot be resolved.
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub subjects: Vec<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn of_kind(&self, kind: IssueKind) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(move |i| i.kind == kind)
    }

    fn push(&mut self, severity: Severity, kind: IssueKind, subjects: &[&str], message: String) {
        self.issues.push(Issue {
            severity,
            kind,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks a parsed spec for problems that make it unusable or unbalanced.
pub fn validate_spec(spec: &DesignSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let used = spec.treatment_expr.leaves();

    for leaf in &used {
        if matches!(spec.decl(leaf), Some(d) if d.role == DeclRole::Unit) {
            report.push(
                Severity::Error,
                IssueKind::UnitInStructure,
                &[leaf],
                format!("treatment structure refers to unit factor `{leaf}`"),
            );
        }
    }
    for d in &spec.treatment_decls {
        if !used.contains(&d.name) {
            report.push(
                Severity::Warning,
                IssueKind::Unreachable,
                &[&d.name],
                format!(
                    "treatment factor `{}` is declared but not used in the structure",
                    d.name
                ),
            );
            continue;
        }
        if d.variability == Variability::Random {
            report.push(
                Severity::Error,
                IssueKind::RandomTreatment,
                &[&d.name],
                format!("random treatment factor `{}` is not supported", d.name),
            );
        }
        if spec.randomized_on(&d.name).is_none() {
            report.push(
                Severity::Error,
                IssueKind::NotRandomized,
                &[&d.name],
                format!(
                    "treatment factor `{}` is not randomized on any unit factor",
                    d.name
                ),
            );
        }
    }

    let table = match experiment_bases(spec) {
        Ok(t) => t,
        Err(e) => {
            report.push(Severity::Error, IssueKind::Structure, &[], e.to_string());
            return report;
        }
    };
    let Some(response) = table.index(&spec.response) else {
        return report;
    };
    let response_closure = table.base_closure(response);
    for (id, base) in table.iter() {
        if base.kind == crate::poset::BaseKind::Unit && !response_closure.contains(id) {
            report.push(
                Severity::Error,
                IssueKind::ResponseNotMinimum,
                &[&spec.response, &base.name],
                format!(
                    "response `{}` is not nested in unit factor `{}`",
                    spec.response, base.name
                ),
            );
        }
    }
    for (t, u) in &spec.randomization {
        let Some(uid) = table.index(u) else { continue };
        if !response_closure.contains(uid) {
            report.push(
                Severity::Error,
                IssueKind::TargetAboveResponse,
                &[t, u],
                format!(
                    "`{t}` is randomized on `{u}`, but the response `{}` is not nested in `{u}`",
                    spec.response
                ),
            );
        }
    }

    for (id, base) in table.iter() {
        if let Restriction::Unbalanced { size, combos } = table.restriction(id) {
            report.push(
                Severity::Error,
                IssueKind::Unbalanced,
                &[&base.name],
                format!(
                    "{combos} treatment combinations cannot be balanced over {size} levels of `{}` per group",
                    base.name
                ),
            );
        }
    }

    if let InteractionPolicy::Keep(terms) = &spec.interaction_policy {
        for term in terms {
            for name in term {
                let present = match spec.decl(name) {
                    Some(d) if d.role == DeclRole::Treatment => used.contains(name),
                    Some(_) => true,
                    None => false,
                };
                if !present {
                    report.push(
                        Severity::Error,
                        IssueKind::ConstituentMissing,
                        &[name],
                        format!(
                            "kept interaction `{}` refers to `{name}`, which is not in the design",
                            term.join(":")
                        ),
                    );
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_design;

    fn spec(body: &str) -> DesignSpec {
        parse_design(&format!("design t {{ {body} }}")).unwrap()
    }

    #[test]
    fn rcbd_is_clean() {
        let s = spec(
            "treatment { A: fixed 4 structure: A }
             unit { B: random 5 E: random 4 in B response: E }
             randomize { A -> E }",
        );
        assert!(validate_spec(&s).is_empty());
    }

    #[test]
    fn indivisible_replication_is_flagged() {
        let s = spec(
            "treatment { A: fixed 3 structure: A }
             unit { E: random 10 response: E }
             randomize { A -> E }",
        );
        let r = validate_spec(&s);
        assert_eq!(r.of_kind(IssueKind::Unbalanced).count(), 1);
        assert!(r.has_errors());
    }

    #[test]
    fn kept_interaction_with_absent_treatment() {
        let s = spec(
            "treatment { A: fixed 2 B: fixed 2 structure: B }
             unit { R: random 4 E: random 2 in R response: E }
             randomize { B -> E }
             interactions: R:A",
        );
        let r = validate_spec(&s);
        let missing: Vec<_> = r.of_kind(IssueKind::ConstituentMissing).collect();
        assert_eq!(missing.len(), 1);
        assert_eq!(missing[0].subjects, vec!["A".to_string()]);
        assert_eq!(r.of_kind(IssueKind::Unreachable).count(), 1);
    }

    #[test]
    fn response_must_be_nested_in_every_unit() {
        let s = spec(
            "treatment { A: fixed 2 structure: A }
             unit { B: random 2 E: random 4 response: E }
             randomize { A -> E }",
        );
        assert_eq!(
            validate_spec(&s)
                .of_kind(IssueKind::ResponseNotMinimum)
                .count(),
            1
        );
    }

    #[test]
    fn unrandomized_treatment_is_an_error() {
        let s = spec(
            "treatment { A: fixed 2 B: fixed 2 structure: A*B }
             unit { E: random 8 response: E }
             randomize { A -> E }",
        );
        let r = validate_spec(&s);
        assert_eq!(r.of_kind(IssueKind::NotRandomized).count(), 1);
    }
}
