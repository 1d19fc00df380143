//! Balanced ANOVA from data, following the skeleton of a diagram.
//!
//! Effects use the sum-to-zero convention: a factor's effect on a class is
//! the class mean minus the effects of every factor above it. For balanced
//! data these effects are orthogonal projections, so their squared sums
//! partition the total sum of squares.

mod simulate;

pub use simulate::{simulate_response, Simulator};

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::error::AnovaError;
use crate::plan::{plan_columns, Plan};
use crate::poset::{degrees_of_freedom, Diagram, FactorId};
use crate::scalar::Scalar;
use crate::skeleton::{skeleton_table, Denominator};

/// Observations with the level of every base factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable<T> {
    /// Base factor names, one per level column.
    pub columns: Vec<String>,
    pub levels: Vec<Vec<u64>>,
    pub response: Vec<T>,
}

impl<T: Scalar> DataTable<T> {
    pub fn from_plan(plan: &Plan, response: Vec<T>) -> Result<Self, AnovaError> {
        if response.len() != plan.rows.len() {
            return Err(AnovaError::SchemaMismatch(format!(
                "{} responses for {} plan rows",
                response.len(),
                plan.rows.len()
            )));
        }
        Ok(DataTable {
            columns: plan.columns.clone(),
            levels: plan.rows.clone(),
            response,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Reads a table whose last column is named `response`.
    pub fn from_csv(text: &str) -> Result<Self, AnovaError> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut columns: Vec<String> = r
            .headers()
            .map_err(|e| AnovaError::Table(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.last().map(String::as_str) != Some("response") {
            return Err(AnovaError::Table("last column must be `response`".into()));
        }
        columns.pop();
        let mut levels = Vec::new();
        let mut response = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| AnovaError::Table(e.to_string()))?;
            let line = i + 2;
            let mut row = Vec::with_capacity(columns.len());
            for v in rec.iter().take(columns.len()) {
                row.push(v.parse::<u64>().map_err(|_| {
                    AnovaError::Table(format!("line {line}: `{v}` is not a level number"))
                })?);
            }
            let y = rec.get(columns.len()).unwrap_or("");
            let y = y
                .parse::<T>()
                .map_err(|_| AnovaError::Table(format!("line {line}: `{y}` is not a number")))?;
            levels.push(row);
            response.push(y);
        }
        Ok(DataTable {
            columns,
            levels,
            response,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(String::as_str).chain(["response"]))
            .expect("in-memory write");
        for (row, y) in self.levels.iter().zip(&self.response) {
            w.write_record(
                row.iter()
                    .map(u64::to_string)
                    .chain(std::iter::once(y.to_string())),
            )
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Partition of the observations into the classes of one factor.
#[derive(Debug, Clone)]
pub(crate) struct Classes {
    /// Constituent levels of each class, sorted.
    pub keys: Vec<Vec<u64>>,
    pub of: Vec<usize>,
    pub size: usize,
}

/// Classes of every factor; fails unless each factor has exactly its
/// declared number of equally sized classes.
pub(crate) fn classify(
    d: &Diagram,
    columns: &[String],
    levels: &[Vec<u64>],
) -> Result<Vec<Classes>, AnovaError> {
    let b = d.bases();
    let mut col = vec![0usize; b.len()];
    for (id, base) in b.iter() {
        col[id] = columns
            .iter()
            .position(|c| *c == base.name)
            .ok_or_else(|| {
                AnovaError::SchemaMismatch(format!(
                    "missing column `{}` (expected {})",
                    base.name,
                    plan_columns(b).join(",")
                ))
            })?;
    }
    if let Some(i) = levels.iter().position(|r| r.len() != columns.len()) {
        return Err(AnovaError::SchemaMismatch(format!(
            "row {} has {} levels, expected {}",
            i + 1,
            levels[i].len(),
            columns.len()
        )));
    }
    let n = levels.len();
    d.factors()
        .iter()
        .map(|x| {
            let mut index: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
            for (i, row) in levels.iter().enumerate() {
                let key = x.closure.iter().map(|m| row[col[m]]).collect();
                index.entry(key).or_default().push(i);
            }
            let unbalanced = |detail: String| AnovaError::Unbalanced {
                factor: x.name.clone(),
                detail,
            };
            if index.len() as u64 != x.levels {
                return Err(unbalanced(format!(
                    "{} classes observed, {} expected",
                    index.len(),
                    x.levels
                )));
            }
            let size = n / index.len();
            if let Some((key, rows)) = index.iter().find(|(_, r)| r.len() != size || size == 0) {
                return Err(unbalanced(format!(
                    "class {:?} has {} observations, expected {size}",
                    key,
                    rows.len()
                )));
            }
            let mut of = vec![0usize; n];
            let mut keys = Vec::with_capacity(index.len());
            for (c, (key, rows)) in index.into_iter().enumerate() {
                for r in rows {
                    of[r] = c;
                }
                keys.push(key);
            }
            Ok(Classes { keys, of, size })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorEffects<T> {
    pub factor: FactorId,
    pub name: String,
    /// Constituent levels of each class in lexicographic order.
    pub classes: Vec<Vec<u64>>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effects<T> {
    /// Indexed by factor id.
    pub factors: Vec<FactorEffects<T>>,
    class_of: Vec<Vec<usize>>,
}

impl<T: Scalar> Effects<T> {
    pub fn get(&self, name: &str) -> Option<&FactorEffects<T>> {
        self.factors.iter().find(|e| e.name == name)
    }

    /// Effect of `f` on observation `obs`.
    pub fn effect(&self, f: FactorId, obs: usize) -> T {
        self.factors[f].values[self.class_of[f][obs]]
    }

    /// Effect of `f` on every observation.
    pub fn per_observation(&self, f: FactorId) -> Vec<T> {
        self.class_of[f]
            .iter()
            .map(|&c| self.factors[f].values[c])
            .collect()
    }

    /// Sum over all observations of the squared effect of `f`.
    pub fn sum_of_squares(&self, f: FactorId) -> T {
        self.class_of[f]
            .iter()
            .map(|&c| {
                let e = self.factors[f].values[c];
                e * e
            })
            .sum()
    }
}

pub fn effect_decomposition<T: Scalar>(
    d: &Diagram,
    data: &DataTable<T>,
) -> Result<Effects<T>, AnovaError> {
    let classes = classify(d, &data.columns, &data.levels)?;
    check_orthogonal(d, &classes)?;
    Ok(sweep(d, &classes, &data.response))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Every pair of incomparable factors must meet proportionally within the
/// classes of their join, and the join itself must be a factor of the
/// diagram; otherwise averaging does not yield orthogonal projections.
pub(crate) fn check_orthogonal(d: &Diagram, classes: &[Classes]) -> Result<(), AnovaError> {
    let n = classes.first().map_or(0, |c| c.of.len());
    for f in 0..d.len() {
        for g in f + 1..d.len() {
            if d.comparable(f, g) {
                continue;
            }
            let (cf, cg) = (&classes[f], &classes[g]);
            let nf = cf.keys.len();
            let mut parent: Vec<usize> = (0..nf + cg.keys.len()).collect();
            for i in 0..n {
                let (a, b) = (
                    find(&mut parent, cf.of[i]),
                    find(&mut parent, nf + cg.of[i]),
                );
                parent[a] = b;
            }
            let join: Vec<usize> = (0..n).map(|i| find(&mut parent, cf.of[i])).collect();
            let mut join_size: BTreeMap<usize, usize> = BTreeMap::new();
            let mut meet: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for (i, &s) in join.iter().enumerate() {
                *join_size.entry(s).or_default() += 1;
                *meet.entry((cf.of[i], cg.of[i])).or_default() += 1;
            }
            let mut members: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
            for c in 0..nf {
                members.entry(find(&mut parent, c)).or_default().0.push(c);
            }
            for c in 0..cg.keys.len() {
                members
                    .entry(find(&mut parent, nf + c))
                    .or_default()
                    .1
                    .push(c);
            }
            let proportional = members.iter().all(|(s, (fs, gs))| {
                fs.iter().all(|&a| {
                    gs.iter().all(|&b| {
                        meet.get(&(a, b)).copied().unwrap_or(0) * join_size[s] == cf.size * cg.size
                    })
                })
            });
            let join_present = classes.iter().any(|h| {
                h.keys.len() == join_size.len() && {
                    let mut to: BTreeMap<usize, usize> = BTreeMap::new();
                    (0..n).all(|i| *to.entry(join[i]).or_insert(h.of[i]) == h.of[i])
                }
            });
            if !proportional || !join_present {
                return Err(AnovaError::NotOrthogonal {
                    first: d.factor(f).name.clone(),
                    second: d.factor(g).name.clone(),
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn sweep<T: Scalar>(d: &Diagram, classes: &[Classes], y: &[T]) -> Effects<T> {
    let n = y.len();
    let mut per_obs: Vec<Vec<T>> = vec![Vec::new(); d.len()];
    for f in d.topological_order() {
        let c = &classes[f];
        let mut sums = vec![T::zero(); c.keys.len()];
        for (i, &k) in c.of.iter().enumerate() {
            sums[k] = sums[k] + y[i];
        }
        let size = T::from_count(c.size as u64);
        let ancestors = d.ancestors(f);
        per_obs[f] = (0..n)
            .map(|i| {
                let above: T = ancestors.iter().map(|&g| per_obs[g][i]).sum();
                sums[c.of[i]] / size - above
            })
            .collect();
    }
    let factors = d
        .factors()
        .iter()
        .map(|x| {
            let c = &classes[x.id];
            let mut values = vec![T::zero(); c.keys.len()];
            for (i, &k) in c.of.iter().enumerate() {
                values[k] = per_obs[x.id][i];
            }
            FactorEffects {
                factor: x.id,
                name: x.name.clone(),
                classes: c.keys.clone(),
                values,
            }
        })
        .collect();
    Effects {
        factors,
        class_of: classes.iter().map(|c| c.of.clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaRow<T> {
    pub factor: FactorId,
    /// Row label; the response reads `Residual` when it is the finest factor.
    pub label: String,
    pub df: u64,
    pub ss: T,
    /// `None` when `df` is zero.
    pub ms: Option<T>,
    pub f_ratio: Option<T>,
    pub denominator: Option<Denominator>,
    pub stratum: Option<FactorId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaTable<T> {
    /// `M` first, then the skeleton rows in stratum order.
    pub rows: Vec<AnovaRow<T>>,
    names: Vec<String>,
}

impl<T: Scalar> AnovaTable<T> {
    pub fn row(&self, name: &str) -> Option<&AnovaRow<T>> {
        self.rows
            .iter()
            .find(|r| r.label == name || self.names[r.factor] == name)
    }

    pub fn total_ss(&self) -> T {
        self.rows.iter().map(|r| r.ss).sum()
    }

    fn cells(&self, sep: &str) -> Vec<[String; 6]> {
        let num =
            |v: Option<T>| v.map_or_else(|| "-".into(), |v| format!("{:.6}", v.to_f64_lossy()));
        self.rows
            .iter()
            .map(|r| {
                let den = match &r.denominator {
                    None => "-".into(),
                    Some(Denominator::Factor(g)) => self.names[*g].clone(),
                    Some(Denominator::NoExactTest(gs)) => {
                        let names: Vec<&str> = gs.iter().map(|&g| self.names[g].as_str()).collect();
                        format!("no exact test ({})", names.join(sep))
                    }
                };
                [
                    r.label.clone(),
                    r.df.to_string(),
                    num(Some(r.ss)),
                    num(r.ms),
                    num(r.f_ratio),
                    den,
                ]
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let header = ["Source", "df", "SS", "MS", "F", "Denominator"].map(String::from);
        let cells = self.cells(", ");
        let mut width = header.clone().map(|h| h.len());
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&cells) {
            let mut line = format!("{:<w$}", row[0], w = width[0]);
            for i in 1..5 {
                let _ = write!(line, "  {:>w$}", row[i], w = width[i]);
            }
            let _ = write!(line, "  {}", row[5]);
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["factor", "df", "ss", "ms", "f", "denominator"])
            .expect("in-memory write");
        for row in self.cells("|") {
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

impl<T: Scalar> fmt::Display for AnovaTable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn compute_anova<T: Scalar>(
    d: &Diagram,
    data: &DataTable<T>,
) -> Result<AnovaTable<T>, AnovaError> {
    let effects = effect_decomposition(d, data)?;
    anova_from_effects(d, &effects)
}

pub(crate) fn anova_from_effects<T: Scalar>(
    d: &Diagram,
    effects: &Effects<T>,
) -> Result<AnovaTable<T>, AnovaError> {
    let df = match d.df_values() {
        Some(v) => v.to_vec(),
        None => degrees_of_freedom(d)?,
    };
    let skeleton = skeleton_table(d).map_err(|e| match e {
        crate::error::SkeletonError::Poset(p) => AnovaError::Poset(p),
        other => AnovaError::Table(other.to_string()),
    })?;
    let ms = |f: FactorId| -> Option<T> {
        (df[f] > 0).then(|| effects.sum_of_squares(f) / T::from_count(df[f]))
    };
    let mean = d.mean();
    let mut rows = vec![AnovaRow {
        factor: mean,
        label: d.factor(mean).name.clone(),
        df: df[mean],
        ss: effects.sum_of_squares(mean),
        ms: ms(mean),
        f_ratio: None,
        denominator: None,
        stratum: None,
    }];
    for s in skeleton.rows {
        let f_ratio = match s.denominator {
            Some(Denominator::Factor(g)) => ms(s.factor).zip(ms(g)).map(|(a, b)| a / b),
            _ => None,
        };
        rows.push(AnovaRow {
            factor: s.factor,
            label: s.label,
            df: s.df,
            ss: effects.sum_of_squares(s.factor),
            ms: ms(s.factor),
            f_ratio,
            denominator: s.denominator,
            stratum: s.stratum,
        });
    }
    Ok(AnovaTable {
        rows,
        names: d.factors().iter().map(|f| f.name.clone()).collect(),
    })
}
