//! Base (declared) factors and the implication closure between them.
//!
//! A base factor `X` *implies* `Y` when knowing the level of `X` determines
//! the level of `Y`: a unit factor implies the unit factors it is nested in
//! and the treatment factors randomized on it (or on anything above it).
//! Every diagram factor is identified by the closure of its constituents
//! under this relation.

use std::fmt;

use crate::dsl::Variability;
use crate::error::PosetError;

pub type BaseId = usize;

/// Bit set over base-factor indices.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BaseSet(u64);

impl BaseSet {
    pub const EMPTY: BaseSet = BaseSet(0);

    pub fn single(id: BaseId) -> Self {
        BaseSet(1 << id)
    }

    pub fn from_ids(ids: impl IntoIterator<Item = BaseId>) -> Self {
        ids.into_iter().fold(Self::EMPTY, |s, i| s.with(i))
    }

    pub fn with(self, id: BaseId) -> Self {
        BaseSet(self.0 | (1 << id))
    }

    pub fn without(self, id: BaseId) -> Self {
        BaseSet(self.0 & !(1 << id))
    }

    pub fn contains(self, id: BaseId) -> bool {
        self.0 & (1 << id) != 0
    }

    pub fn union(self, other: BaseSet) -> Self {
        BaseSet(self.0 | other.0)
    }

    pub fn intersection(self, other: BaseSet) -> Self {
        BaseSet(self.0 & other.0)
    }

    pub fn difference(self, other: BaseSet) -> Self {
        BaseSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: BaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = BaseId> {
        (0..64).filter(move |i| self.0 & (1u64 << i) != 0)
    }

    /// Shifts every member up by `by` positions.
    pub fn shifted(self, by: usize) -> Self {
        BaseSet(self.0 << by)
    }
}

impl fmt::Debug for BaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Treatment,
    Unit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseFactor {
    pub name: String,
    pub kind: BaseKind,
    pub variability: Variability,
    /// Level count for treatment factors; replicates per parent cell for
    /// unit factors.
    pub count: u64,
    /// Unit factors this one is declared `in`.
    pub parents: BaseSet,
    /// Unit factor a treatment factor is randomized on.
    pub randomized_on: Option<BaseId>,
}

/// How a unit factor's levels are grouped when treatments are assigned to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Restriction {
    /// No treatment is randomized on this unit factor.
    Free,
    /// Levels are grouped by the joint level of every unit factor above;
    /// each group of `size` levels gets a balanced permutation.
    Groups {
        key: BaseSet,
        size: u64,
        combos: u64,
    },
    /// One level per cell of a row-column grid: rows and columns must
    /// each be balanced within every class of `key`.
    Latin {
        rows: BaseId,
        cols: BaseId,
        key: BaseSet,
        rows_per_square: u64,
        cols_per_square: u64,
        combos: u64,
    },
    /// No balanced assignment exists.
    Unbalanced { size: u64, combos: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseTable {
    bases: Vec<BaseFactor>,
    closure: Vec<BaseSet>,
}

impl BaseTable {
    pub fn new(bases: Vec<BaseFactor>) -> Result<Self, PosetError> {
        if bases.len() > 64 {
            return Err(PosetError::TooManyBaseFactors);
        }
        let mut table = BaseTable {
            closure: vec![BaseSet::EMPTY; bases.len()],
            bases,
        };
        table.recompute()?;
        Ok(table)
    }

    fn recompute(&mut self) -> Result<(), PosetError> {
        let n = self.bases.len();
        // 0 = unvisited, 1 = in progress, 2 = done
        let mut state = vec![0u8; n];
        let mut closure = vec![BaseSet::EMPTY; n];
        fn visit(
            b: BaseId,
            bases: &[BaseFactor],
            state: &mut [u8],
            closure: &mut [BaseSet],
            path: &mut Vec<BaseId>,
        ) -> Result<(), PosetError> {
            match state[b] {
                2 => return Ok(()),
                1 => {
                    let start = path.iter().position(|&p| p == b).unwrap_or(0);
                    let names = path[start..]
                        .iter()
                        .map(|&i| bases[i].name.clone())
                        .collect();
                    return Err(PosetError::NestingCycle(names));
                }
                _ => {}
            }
            state[b] = 1;
            path.push(b);
            let mut c = BaseSet::single(b);
            for p in bases[b].parents.iter() {
                visit(p, bases, state, closure, path)?;
                c = c.union(closure[p]);
            }
            for (t, base) in bases.iter().enumerate() {
                if base.randomized_on == Some(b) {
                    c = c.with(t);
                }
            }
            path.pop();
            state[b] = 2;
            closure[b] = c;
            Ok(())
        }
        let mut path = Vec::new();
        for b in 0..n {
            visit(b, &self.bases, &mut state, &mut closure, &mut path)?;
        }
        self.closure = closure;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn get(&self, id: BaseId) -> &BaseFactor {
        &self.bases[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BaseId, &BaseFactor)> {
        self.bases.iter().enumerate()
    }

    pub fn index(&self, name: &str) -> Option<BaseId> {
        self.bases.iter().position(|b| b.name == name)
    }

    pub fn all(&self) -> BaseSet {
        BaseSet::from_ids(0..self.bases.len())
    }

    pub fn of_kind(&self, kind: BaseKind) -> BaseSet {
        BaseSet::from_ids(
            self.bases
                .iter()
                .enumerate()
                .filter(|(_, b)| b.kind == kind)
                .map(|(i, _)| i),
        )
    }

    pub fn units(&self) -> BaseSet {
        self.of_kind(BaseKind::Unit)
    }

    pub fn treatments(&self) -> BaseSet {
        self.of_kind(BaseKind::Treatment)
    }

    pub fn fixed(&self) -> BaseSet {
        BaseSet::from_ids(
            self.bases
                .iter()
                .enumerate()
                .filter(|(_, b)| b.variability == Variability::Fixed)
                .map(|(i, _)| i),
        )
    }

    pub fn base_closure(&self, id: BaseId) -> BaseSet {
        self.closure[id]
    }

    pub fn closure_of(&self, set: BaseSet) -> BaseSet {
        set.iter()
            .fold(BaseSet::EMPTY, |acc, b| acc.union(self.closure[b]))
    }

    /// Number of distinct level combinations of a closed set in a balanced
    /// design: unit replicate counts multiply, and treatment levels multiply
    /// unless a unit factor in the set already determines them.
    pub fn levels(&self, closure: BaseSet) -> u64 {
        let units = closure.intersection(self.units());
        let implied = self.closure_of(units);
        let mut n = 1u64;
        for b in units.iter() {
            n = n.saturating_mul(self.bases[b].count);
        }
        for t in closure.difference(implied).iter() {
            n = n.saturating_mul(self.bases[t].count);
        }
        n
    }

    /// Minimal generating members of a closed set: those not implied by
    /// another member.
    pub fn minimal(&self, closure: BaseSet) -> BaseSet {
        BaseSet::from_ids(closure.iter().filter(|&b| {
            !closure
                .iter()
                .any(|o| o != b && self.closure[o].contains(b) && !self.closure[b].contains(o))
        }))
    }

    /// Colon-joined name, unit factors first, each group in declaration order.
    pub fn name_of(&self, set: BaseSet) -> String {
        if set.is_empty() {
            return "M".to_string();
        }
        let units = set.intersection(self.units()).iter();
        let treatments = set.intersection(self.treatments()).iter();
        units
            .chain(treatments)
            .map(|b| self.bases[b].name.as_str())
            .collect::<Vec<_>>()
            .join(":")
    }

    /// Formula spelling: treatment factors first, then the unit factors
    /// together with the unit factors they are nested in.
    pub fn formula_names(&self, constituents: BaseSet) -> Vec<String> {
        let units = constituents.intersection(self.units());
        let unit_closure = units
            .iter()
            .fold(BaseSet::EMPTY, |acc, u| acc.union(self.unit_ancestry(u)));
        let treatments = constituents.intersection(self.treatments());
        treatments
            .iter()
            .chain(unit_closure.iter())
            .map(|b| self.bases[b].name.clone())
            .collect()
    }

    /// The unit factor itself plus every unit factor it is nested in.
    pub fn unit_ancestry(&self, unit: BaseId) -> BaseSet {
        self.closure[unit].intersection(self.units())
    }

    /// Product of unit replicate counts over a parent-closed unit set.
    pub fn unit_levels(&self, units: BaseSet) -> u64 {
        units
            .iter()
            .fold(1u64, |n, b| n.saturating_mul(self.bases[b].count))
    }

    fn unit_closure(&self, units: BaseSet) -> BaseSet {
        units
            .iter()
            .fold(BaseSet::EMPTY, |acc, u| acc.union(self.unit_ancestry(u)))
    }

    /// Treatment factors randomized directly on `unit`.
    pub fn randomized_on(&self, unit: BaseId) -> BaseSet {
        BaseSet::from_ids(
            self.bases
                .iter()
                .enumerate()
                .filter(|(_, b)| b.randomized_on == Some(unit))
                .map(|(i, _)| i),
        )
    }

    /// Determines how treatment levels can be balanced over `unit`.
    pub fn restriction(&self, unit: BaseId) -> Restriction {
        let treatments = self.randomized_on(unit);
        if treatments.is_empty() {
            return Restriction::Free;
        }
        let combos = treatments
            .iter()
            .fold(1u64, |n, t| n.saturating_mul(self.bases[t].count));
        let size = self.bases[unit].count;
        let above = self.unit_ancestry(unit).without(unit);
        if size.is_multiple_of(combos) {
            return Restriction::Groups {
                key: above,
                size,
                combos,
            };
        }
        let parents: Vec<BaseId> = self.bases[unit].parents.iter().collect();
        if size == 1 && parents.len() >= 2 {
            // Later-declared pairs first: replicate factors are usually
            // declared before rows and columns.
            for i in (0..parents.len()).rev() {
                for j in (0..i).rev() {
                    let (rows, cols) = (parents[j], parents[i]);
                    if let Some((r, c)) = self.latin_shape(unit, rows, cols) {
                        if r % combos == 0 && c % combos == 0 {
                            return Restriction::Latin {
                                rows,
                                cols,
                                key: above.without(rows).without(cols),
                                rows_per_square: r,
                                cols_per_square: c,
                                combos,
                            };
                        }
                    }
                }
            }
        }
        Restriction::Unbalanced { size, combos }
    }

    /// Rows and columns per square when `unit` cells form a complete
    /// `rows` x `cols` grid within every class of the remaining ancestors.
    fn latin_shape(&self, unit: BaseId, rows: BaseId, cols: BaseId) -> Option<(u64, u64)> {
        let above = self.unit_ancestry(unit).without(unit);
        let key = above.without(rows).without(cols);
        if key
            .iter()
            .any(|k| self.closure[k].contains(rows) || self.closure[k].contains(cols))
        {
            return None;
        }
        let key_closure = self.unit_closure(key);
        let key_levels = self.unit_levels(key_closure);
        let row_levels = self.unit_levels(key_closure.union(self.unit_ancestry(rows)));
        let col_levels = self.unit_levels(key_closure.union(self.unit_ancestry(cols)));
        let cell_levels = self.unit_levels(self.unit_ancestry(unit));
        let r = row_levels / key_levels;
        let c = col_levels / key_levels;
        (cell_levels == key_levels * r * c).then_some((r, c))
    }
}
