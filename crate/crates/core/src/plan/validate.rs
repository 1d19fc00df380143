use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{combos_on, plan_bases, plan_columns, Plan};
use crate::error::PlanError;
use crate::poset::{BaseId, BaseSet, Diagram};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A level number outside `1..=levels`.
    OutOfRange,
    /// Two rows share a response unit.
    DuplicateUnit,
    /// A unit level appears under two different levels of a factor it is
    /// nested in.
    Nesting,
    /// A treatment level varies within one of its experimental units.
    NotConstant,
    /// Treatment combinations are not equally frequent within a class.
    Imbalance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanViolation {
    pub kind: ViolationKind,
    /// Factor (or colon-joined factors) whose classes are violated.
    pub subject: String,
    /// 0-based data row indices involved.
    pub rows: Vec<usize>,
    pub message: String,
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.rows.iter().map(|r| (r + 1).to_string()).collect();
        write!(f, "{} (rows {})", self.message, rows.join(", "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlanReport {
    pub violations: Vec<PlanViolation>,
}

impl PlanReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `plan` is a balanced randomization of the design.
pub fn validate_plan(plan: &Plan, d: &Diagram) -> Result<PlanReport, PlanError> {
    let b = d.bases();
    let expected = plan_columns(b);
    if plan.columns != expected {
        return Err(PlanError::SchemaMismatch(format!(
            "expected columns {}, found {}",
            expected.join(","),
            plan.columns.join(",")
        )));
    }
    let (us, ts) = plan_bases(b);
    let col: BTreeMap<BaseId, usize> = us
        .iter()
        .chain(&ts)
        .enumerate()
        .map(|(i, &x)| (x, i))
        .collect();
    let n_rows = b.unit_levels(b.units()) as usize;
    if plan.rows.len() != n_rows {
        return Err(PlanError::SchemaMismatch(format!(
            "expected {n_rows} rows, found {}",
            plan.rows.len()
        )));
    }
    if let Some(i) = plan.rows.iter().position(|r| r.len() != expected.len()) {
        return Err(PlanError::SchemaMismatch(format!(
            "row {} has {} values, expected {}",
            i + 1,
            plan.rows[i].len(),
            expected.len()
        )));
    }

    let mut report = PlanReport::default();
    let name = |x: BaseId| b.get(x).name.clone();

    for (&x, &c) in &col {
        let max = if b.get(x).kind == crate::poset::BaseKind::Unit {
            b.unit_levels(b.unit_ancestry(x))
        } else {
            b.get(x).count
        };
        let bad: Vec<usize> = (0..n_rows)
            .filter(|&r| plan.rows[r][c] == 0 || plan.rows[r][c] > max)
            .collect();
        if !bad.is_empty() {
            report.violations.push(PlanViolation {
                kind: ViolationKind::OutOfRange,
                subject: name(x),
                message: format!("`{}` levels must lie in 1..={max}", name(x)),
                rows: bad,
            });
        }
    }
    if !report.is_valid() {
        return Ok(report);
    }

    // Rows grouped by the value of one column.
    let groups = |c: usize| -> BTreeMap<u64, Vec<usize>> {
        let mut g: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (r, row) in plan.rows.iter().enumerate() {
            g.entry(row[c]).or_default().push(r);
        }
        g
    };

    let response_col = col[us.last().expect("at least one unit factor")];
    for (_, rows) in groups(response_col) {
        if rows.len() > 1 {
            report.violations.push(PlanViolation {
                kind: ViolationKind::DuplicateUnit,
                subject: plan.columns[response_col].clone(),
                message: format!(
                    "response unit `{}` appears more than once",
                    plan.columns[response_col]
                ),
                rows,
            });
        }
    }

    for &u in &us {
        let above = b.unit_ancestry(u).without(u);
        let dependents = above.iter().map(|v| (v, ViolationKind::Nesting)).chain(
            b.randomized_on(u)
                .iter()
                .map(|t| (t, ViolationKind::NotConstant)),
        );
        for (v, kind) in dependents {
            for (level, rows) in groups(col[&u]) {
                let values: BTreeSet<u64> = rows.iter().map(|&r| plan.rows[r][col[&v]]).collect();
                if values.len() > 1 {
                    report.violations.push(PlanViolation {
                        kind,
                        subject: name(v),
                        message: format!(
                            "`{}` level {level} occurs with several levels of `{}`",
                            name(u),
                            name(v)
                        ),
                        rows,
                    });
                }
            }
        }
    }
    if !report.is_valid() {
        return Ok(report);
    }

    for &u in &us {
        let (set, combos) = combos_on(b, u);
        if set.is_empty() {
            continue;
        }
        // One entry per level of u: its classes and treatment combination.
        let mut levels: BTreeMap<u64, usize> = BTreeMap::new();
        for (r, row) in plan.rows.iter().enumerate() {
            levels.entry(row[col[&u]]).or_insert(r);
        }
        let combo_of =
            |r: usize| -> Vec<u64> { set.iter().map(|t| plan.rows[r][col[&t]]).collect() };

        let above = b.unit_ancestry(u).without(u);
        let mut classings: Vec<(BaseSet, String)> = above
            .iter()
            .map(|v| (BaseSet::single(v), name(v)))
            .collect();
        if above.len() > 1 {
            let joint: Vec<String> = above.iter().map(name).collect();
            classings.push((above, joint.join(":")));
        }
        classings.push((BaseSet::EMPTY, "all units".into()));
        for (key, subject) in classings {
            let mut classes: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
            for &r in levels.values() {
                let k: Vec<u64> = key.iter().map(|v| plan.rows[r][col[&v]]).collect();
                classes.entry(k).or_default().push(r);
            }
            for (k, rs) in classes {
                if !(rs.len() as u64).is_multiple_of(combos) {
                    continue;
                }
                let want = rs.len() as u64 / combos;
                let mut count: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
                for &r in &rs {
                    *count.entry(combo_of(r)).or_default() += 1;
                }
                let balanced = count.len() as u64 == combos && count.values().all(|&c| c == want);
                if !balanced {
                    let at = if k.is_empty() {
                        String::new()
                    } else {
                        format!(
                            " at level {}",
                            k.iter().map(u64::to_string).collect::<Vec<_>>().join(":")
                        )
                    };
                    report.violations.push(PlanViolation {
                        kind: ViolationKind::Imbalance,
                        subject: subject.clone(),
                        message: format!(
                            "treatments on `{}` are not balanced within `{subject}`{at}",
                            name(u)
                        ),
                        rows: rs,
                    });
                }
            }
        }
    }
    Ok(report)
}
