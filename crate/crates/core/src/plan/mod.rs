//! Seeded randomization plans.
//!
//! Every response unit gets one row holding the level of each unit factor
//! (numbered `1..=levels` across the whole experiment) and the level of
//! each treatment factor. Randomness comes from ChaCha8 seeded with the
//! 64-bit plan seed, so a plan is reproducible on every platform.

mod latin;
mod validate;

pub use latin::{generate_latin_square, is_latin_square};
pub use validate::{validate_plan, PlanReport, PlanViolation, ViolationKind};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::PlanError;
use crate::poset::{BaseId, BaseSet, BaseTable, Diagram, Restriction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub seed: u64,
    /// Unit factors (top to bottom) followed by treatment factors.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<u64>>,
}

impl Plan {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Reads a plan table. The seed is not stored in the table and is set to 0.
    pub fn from_csv(text: &str) -> Result<Plan, PlanError> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| PlanError::Table(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| PlanError::Table(e.to_string()))?;
            let row = rec
                .iter()
                .map(|v| {
                    v.parse::<u64>()
                        .map_err(|_| PlanError::Table(format!("`{v}` is not a level number")))
                })
                .collect::<Result<Vec<u64>, _>>()?;
            rows.push(row);
        }
        Ok(Plan {
            seed: 0,
            columns,
            rows,
        })
    }
}

/// Enumeration of response units by their unit-factor coordinates.
#[derive(Debug, Clone)]
pub(crate) struct UnitLayout {
    pub units: Vec<BaseId>,
    pub rows: u64,
}

impl UnitLayout {
    pub fn new(b: &BaseTable) -> Result<Self, PlanError> {
        let all = b.units();
        if !all.iter().any(|u| b.unit_ancestry(u) == all) {
            return Err(PlanError::NoResponse);
        }
        Ok(UnitLayout {
            units: all.iter().collect(),
            rows: b.unit_levels(all),
        })
    }

    /// Per-base local indices for response row `row`; zero for treatments.
    pub fn locals(&self, b: &BaseTable, row: u64) -> Vec<u64> {
        decode(b, BaseSet::from_ids(self.units.iter().copied()), row)
    }
}

/// Mixed-radix index of `locals` over the members of `set`, the first
/// member most significant.
pub(crate) fn encode(b: &BaseTable, set: BaseSet, locals: &[u64]) -> u64 {
    set.iter()
        .fold(0u64, |acc, u| acc * b.get(u).count + locals[u])
}

pub(crate) fn decode(b: &BaseTable, set: BaseSet, mut index: u64) -> Vec<u64> {
    let mut locals = vec![0u64; b.len()];
    let members: Vec<BaseId> = set.iter().collect();
    for &u in members.iter().rev() {
        let c = b.get(u).count;
        locals[u] = index % c;
        index /= c;
    }
    locals
}

/// 0-based level of unit `u` given local indices.
pub(crate) fn unit_level(b: &BaseTable, u: BaseId, locals: &[u64]) -> u64 {
    encode(b, b.unit_ancestry(u), locals)
}

/// Unit factors ordered from the top of the nesting down, then treatments,
/// each tie in declaration order.
pub(crate) fn plan_bases(b: &BaseTable) -> (Vec<BaseId>, Vec<BaseId>) {
    let units = b.units();
    let height = |u: BaseId| -> usize {
        fn h(b: &BaseTable, u: BaseId, units: BaseSet) -> usize {
            units
                .iter()
                .filter(|&v| v != u && b.unit_ancestry(v).contains(u))
                .map(|v| h(b, v, units) + 1)
                .max()
                .unwrap_or(0)
        }
        h(b, u, units)
    };
    let mut us: Vec<BaseId> = units.iter().collect();
    us.sort_by_key(|&u| (std::cmp::Reverse(height(u)), u));
    (us, b.treatments().iter().collect())
}

pub(crate) fn plan_columns(b: &BaseTable) -> Vec<String> {
    let (us, ts) = plan_bases(b);
    us.iter()
        .chain(&ts)
        .map(|&i| b.get(i).name.clone())
        .collect()
}

/// Treatment factors randomized on `u` and their joint level count.
pub(crate) fn combos_on(b: &BaseTable, u: BaseId) -> (BaseSet, u64) {
    let ts = b.randomized_on(u);
    let n = ts.iter().map(|t| b.get(t).count).product();
    (ts, n)
}

/// Combination index for each level of `u`, or `None` if nothing is
/// randomized on it.
fn assign<R: rand::Rng>(
    b: &BaseTable,
    u: BaseId,
    rng: &mut R,
) -> Result<Option<Vec<u64>>, PlanError> {
    let levels = b.unit_levels(b.unit_ancestry(u));
    match b.restriction(u) {
        Restriction::Free => Ok(None),
        Restriction::Unbalanced { size, combos } => Err(PlanError::Unbalanced {
            unit: b.get(u).name.clone(),
            group_size: size,
            combinations: combos,
        }),
        Restriction::Groups { size, combos, .. } => {
            let mut out = Vec::with_capacity(levels as usize);
            for _ in 0..levels / size {
                let mut group: Vec<u64> = (0..size).map(|i| i % combos).collect();
                group.shuffle(rng);
                out.extend(group);
            }
            Ok(Some(out))
        }
        Restriction::Latin {
            rows,
            cols,
            key,
            rows_per_square: r,
            cols_per_square: c,
            combos: a,
        } => {
            let key_set = key
                .iter()
                .fold(BaseSet::EMPTY, |acc, k| acc.union(b.unit_ancestry(k)));
            let row_set = b.unit_ancestry(rows).difference(key_set);
            let col_set = b.unit_ancestry(cols).difference(key_set);
            let classes = b.unit_levels(key_set);
            let mut grids = Vec::with_capacity(classes as usize);
            for _ in 0..classes {
                let mut grid = vec![vec![0u64; c as usize]; r as usize];
                for bi in 0..(r / a) as usize {
                    for bj in 0..(c / a) as usize {
                        let sq = latin::latin_square_with(a as usize, rng)?;
                        for (i, line) in sq.iter().enumerate() {
                            for (j, &s) in line.iter().enumerate() {
                                grid[bi * a as usize + i][bj * a as usize + j] = s as u64 - 1;
                            }
                        }
                    }
                }
                let mut rp: Vec<usize> = (0..r as usize).collect();
                let mut cp: Vec<usize> = (0..c as usize).collect();
                rp.shuffle(rng);
                cp.shuffle(rng);
                grids.push(
                    rp.iter()
                        .map(|&i| cp.iter().map(|&j| grid[i][j]).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                );
            }
            let ancestry = b.unit_ancestry(u);
            let out = (0..levels)
                .map(|level| {
                    let loc = decode(b, ancestry, level);
                    let k = encode(b, key_set, &loc) as usize;
                    let i = encode(b, row_set, &loc) as usize;
                    let j = encode(b, col_set, &loc) as usize;
                    grids[k][i][j]
                })
                .collect();
            Ok(Some(out))
        }
    }
}

/// A balanced randomized layout of the design, reproducible from `seed`.
pub fn generate_plan(d: &Diagram, seed: u64) -> Result<Plan, PlanError> {
    let b = d.bases();
    let layout = UnitLayout::new(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned: Vec<Option<Vec<u64>>> = vec![None; b.len()];
    for &u in &layout.units {
        assigned[u] = assign(b, u, &mut rng)?;
    }

    let (us, ts) = plan_bases(b);
    let mut treatment_level = vec![0u64; b.len()];
    let mut rows = Vec::with_capacity(layout.rows as usize);
    for r in 0..layout.rows {
        let loc = layout.locals(b, r);
        for &u in &layout.units {
            if let Some(a) = &assigned[u] {
                let combo = a[unit_level(b, u, &loc) as usize];
                let (set, _) = combos_on(b, u);
                let digits = decode(b, set, combo);
                for t in set.iter() {
                    treatment_level[t] = digits[t];
                }
            }
        }
        let row = us
            .iter()
            .map(|&u| unit_level(b, u, &loc) + 1)
            .chain(ts.iter().map(|&t| treatment_level[t] + 1))
            .collect();
        rows.push(row);
    }
    Ok(Plan {
        seed,
        columns: plan_columns(b),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_design;
    use crate::poset::build_experiment;
    use std::collections::BTreeMap;

    fn diagram(body: &str) -> Diagram {
        build_experiment(&parse_design(&format!("design t {{ {body} }}")).unwrap()).unwrap()
    }

    #[test]
    fn rcbd_each_block_gets_every_treatment_once() {
        let d = diagram(
            "treatment { A: fixed 4 structure: A }
             unit { B: random 5 E: random 4 in B response: E } randomize { A -> E }",
        );
        let p = generate_plan(&d, 11).unwrap();
        assert_eq!(p.columns, vec!["B", "E", "A"]);
        assert_eq!(p.rows.len(), 20);
        let mut per_block: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for row in &p.rows {
            per_block.entry(row[0]).or_default().push(row[2]);
        }
        assert_eq!(per_block.len(), 5);
        for (_, mut v) in per_block {
            v.sort();
            assert_eq!(v, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn single_level_treatment() {
        let d = diagram(
            "treatment { A: fixed 1 structure: A }
             unit { E: random 6 response: E } randomize { A -> E }",
        );
        for seed in [0, 1, 99] {
            let p = generate_plan(&d, seed).unwrap();
            assert!(p.rows.iter().all(|r| r[1] == 1));
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let d = diagram(
            "treatment { A: fixed 3 structure: A }
             unit { B: random 4 E: random 6 in B response: E } randomize { A -> E }",
        );
        assert_eq!(generate_plan(&d, 5).unwrap(), generate_plan(&d, 5).unwrap());
        assert_ne!(generate_plan(&d, 5).unwrap(), generate_plan(&d, 6).unwrap());
    }

    #[test]
    fn oats_split_unit_randomization() {
        let d = diagram(
            "treatment { Variety: fixed 3 Nitrogen: fixed 4 structure: Variety*Nitrogen }
             unit { Block: random 6 Plot: random 3 in Block Subplot: random 4 in Plot response: Subplot }
             randomize { Variety -> Plot Nitrogen -> Subplot }",
        );
        let p = generate_plan(&d, 3).unwrap();
        assert_eq!(
            p.columns,
            vec!["Block", "Plot", "Subplot", "Variety", "Nitrogen"]
        );
        let mut per_plot: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        let mut per_block: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
        for row in &p.rows {
            per_plot.entry(row[1]).or_default().push(row[4]);
            per_block.entry(row[0]).or_default().insert(row[1], row[3]);
        }
        for (_, mut v) in per_plot {
            v.sort();
            assert_eq!(v, vec![1, 2, 3, 4]);
        }
        for (_, plots) in per_block {
            let mut v: Vec<u64> = plots.into_values().collect();
            v.sort();
            assert_eq!(v, vec![1, 2, 3]);
        }
    }

    #[test]
    fn latin_square_plan_is_latin() {
        let d = diagram(
            "treatment { A: fixed 4 structure: A }
             unit { R: random 4 C: random 4 E: random 1 in R:C response: E } randomize { A -> E }",
        );
        let p = generate_plan(&d, 9).unwrap();
        assert_eq!(p.columns, vec!["R", "C", "E", "A"]);
        let mut sq = vec![vec![0u32; 4]; 4];
        for row in &p.rows {
            sq[(row[0] - 1) as usize][(row[1] - 1) as usize] = row[3] as u32;
        }
        assert!(is_latin_square(&sq));
    }

    #[test]
    fn csv_round_trip() {
        let d = diagram(
            "treatment { A: fixed 2 structure: A }
             unit { B: random 2 E: random 2 in B response: E } randomize { A -> E }",
        );
        let p = generate_plan(&d, 1).unwrap();
        let back = Plan::from_csv(&p.to_csv()).unwrap();
        assert_eq!(back.columns, p.columns);
        assert_eq!(back.rows, p.rows);
    }

    #[test]
    fn unbalanced_design_is_refused() {
        let d = diagram(
            "treatment { A: fixed 3 structure: A }
             unit { E: random 10 response: E } randomize { A -> E }",
        );
        assert!(matches!(
            generate_plan(&d, 0),
            Err(PlanError::Unbalanced { .. })
        ));
    }
}
