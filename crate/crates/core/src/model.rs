//! Model formulas derived from an experiment diagram.
//!
//! Two dialects are produced: `Error(...)` strata for classical ANOVA
//! software and `(1|...)` random-intercept terms for mixed-model software.
//! The mean and the lowest unit factor are always implicit. The alternative
//! split-unit spelling that places treatment factors inside `Error(...)` is
//! never produced, because strata are defined by unit factors only.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::ModelError;
use crate::formula::{Expr, Op};
use crate::poset::{BaseId, BaseSet, Diagram, FactorId, Role};

pub use crate::formula::expand_formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    ErrorStratum,
    PipeRandomTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelFormula {
    pub fixed_part: String,
    /// Empty when the design has a single random factor.
    pub random_part: String,
    pub dialect: Dialect,
}

impl fmt::Display for ModelFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fixed_part)?;
        if !self.random_part.is_empty() {
            write!(f, "+{}", self.random_part)?;
        }
        Ok(())
    }
}

fn lowest(d: &Diagram) -> Option<FactorId> {
    d.minimum().or(d.response())
}

/// Base ids of a factor as written in a formula: treatments plus the unit
/// ancestry of each unit constituent.
fn formula_ids(d: &Diagram, f: FactorId) -> BaseSet {
    let b = d.bases();
    let c = d.factor(f).constituents;
    let treatments = c.intersection(b.treatments());
    c.intersection(b.units())
        .iter()
        .fold(treatments, |acc, u| acc.union(b.unit_ancestry(u)))
}

fn names(d: &Diagram, ids: BaseSet) -> Vec<String> {
    let b = d.bases();
    let t = ids.intersection(b.treatments()).iter();
    let u = ids.intersection(b.units()).iter();
    t.chain(u).map(|i| b.get(i).name.clone()).collect()
}

fn interaction(names: Vec<String>) -> Expr {
    names
        .into_iter()
        .map(Expr::Factor)
        .reduce(|a, b| Expr::binary(Op::Interact, a, b))
        .unwrap_or(Expr::One)
}

fn sort_key(ids: BaseSet) -> (usize, Vec<BaseId>) {
    (ids.len(), ids.iter().collect())
}

/// `+`-joined fixed terms, compacting every maximal full factorial into a
/// `*` product.
fn fixed_part(d: &Diagram) -> String {
    let low = lowest(d);
    let mut terms: Vec<BaseSet> = (0..d.len())
        .filter(|&f| {
            let x = d.factor(f);
            !x.is_mean() && x.is_fixed() && Some(f) != low
        })
        .map(|f| formula_ids(d, f))
        .collect();
    terms.sort_by_key(|&t| sort_key(t));
    let present: BTreeSet<BaseSet> = terms.iter().copied().collect();

    let is_factorial = |s: BaseSet| -> bool {
        let members: Vec<BaseId> = s.iter().collect();
        (1u64..(1 << members.len())).all(|mask| {
            let sub = BaseSet::from_ids(
                members
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &m)| m),
            );
            present.contains(&sub)
        })
    };

    let mut covered: BTreeSet<BaseSet> = BTreeSet::new();
    let mut items: Vec<((usize, Vec<BaseId>), Expr)> = Vec::new();
    let mut by_size = terms.clone();
    by_size.sort_by_key(|&t| std::cmp::Reverse(t.len()));
    for t in by_size {
        if covered.contains(&t) || t.len() < 2 || !is_factorial(t) {
            continue;
        }
        let members: Vec<BaseId> = t.iter().collect();
        for mask in 1u64..(1 << members.len()) {
            covered.insert(BaseSet::from_ids(
                members
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &m)| m),
            ));
        }
        let expr = names(d, t)
            .into_iter()
            .map(Expr::Factor)
            .reduce(|a, b| Expr::binary(Op::Cross, a, b))
            .expect("non-empty");
        let first = members
            .iter()
            .map(|&m| sort_key(BaseSet::single(m)))
            .min()
            .unwrap();
        items.push((first, expr));
    }
    for &t in &terms {
        if !covered.contains(&t) {
            items.push((sort_key(t), interaction(names(d, t))));
        }
    }
    items.sort_by(|a, b| a.0.cmp(&b.0));
    Expr::sum_of(items.into_iter().map(|(_, e)| e))
        .map(|e| e.to_string())
        .unwrap_or_else(|| "1".into())
}

/// Non-minimum random factors ordered by depth, then declaration.
fn random_factors(d: &Diagram) -> Vec<FactorId> {
    let low = lowest(d);
    let mut fs: Vec<FactorId> = (0..d.len())
        .filter(|&f| {
            let x = d.factor(f);
            !x.is_mean() && x.is_random() && Some(f) != low
        })
        .collect();
    fs.sort_by_key(|&f| (d.depth(f), sort_key(formula_ids(d, f))));
    fs
}

/// Children of `f` within `set` in the order induced on `set`.
fn children_in(d: &Diagram, set: &[FactorId], f: FactorId) -> Vec<FactorId> {
    set.iter()
        .copied()
        .filter(|&g| d.is_below(g, f) && !set.iter().any(|&h| d.is_below(g, h) && d.is_below(h, f)))
        .collect()
}

fn parents_in(d: &Diagram, set: &[FactorId], f: FactorId) -> Vec<FactorId> {
    set.iter()
        .copied()
        .filter(|&g| d.is_below(f, g) && !set.iter().any(|&h| d.is_below(f, h) && d.is_below(h, g)))
        .collect()
}

/// Writes the random unit factors in `set` as a nesting/crossing expression,
/// naming each factor relative to the unit factors in `context`.
fn strata_expr(d: &Diagram, set: &[FactorId], context: BaseSet) -> Expr {
    let short = |f: FactorId| interaction(names(d, formula_ids(d, f).difference(context)));
    let roots: Vec<FactorId> = set
        .iter()
        .copied()
        .filter(|&f| !set.iter().any(|&g| d.is_below(f, g)))
        .collect();

    if let [root] = roots.as_slice() {
        let rest: Vec<FactorId> = set.iter().copied().filter(|&f| f != *root).collect();
        let head = short(*root);
        if rest.is_empty() {
            return head;
        }
        let inner = strata_expr(d, &rest, context.union(formula_ids(d, *root)));
        return Expr::binary(Op::Nest, head, inner);
    }

    // Crossed roots together with every interaction among them.
    let root_sets: Vec<BaseSet> = roots.iter().map(|&r| d.factor(r).closure).collect();
    let full = (1u64..(1 << roots.len())).all(|mask| {
        if mask.count_ones() < 2 {
            return true;
        }
        let c = root_sets
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .fold(BaseSet::EMPTY, |acc, (_, &s)| acc.union(s));
        d.find_closure(c).is_some_and(|f| set.contains(&f))
    });
    if full && set.len() == (1usize << roots.len()) - 1 {
        return roots
            .iter()
            .map(|&r| short(r))
            .reduce(|a, b| Expr::binary(Op::Cross, a, b))
            .expect("non-empty");
    }

    // Separate subtrees, one per root.
    let owner: Vec<Vec<FactorId>> = set
        .iter()
        .map(|&f| {
            roots
                .iter()
                .copied()
                .filter(|&r| r == f || d.is_below(f, r))
                .collect()
        })
        .collect();
    if owner.iter().all(|o| o.len() == 1) {
        let parts = roots.iter().map(|&r| {
            let members: Vec<FactorId> = set
                .iter()
                .zip(&owner)
                .filter(|(_, o)| o[0] == r)
                .map(|(&f, _)| f)
                .collect();
            strata_expr(d, &members, context)
        });
        return Expr::sum_of(parts).expect("non-empty");
    }

    Expr::sum_of(set.iter().map(|&f| short(f))).expect("non-empty")
}

/// `<fixed>+Error(<strata>)`, omitting `Error()` when there is a single
/// random factor.
pub fn emit_error_stratum_formula(d: &Diagram) -> Result<String, ModelError> {
    Ok(error_stratum_formula(d)?.to_string())
}

pub fn error_stratum_formula(d: &Diagram) -> Result<ModelFormula, ModelError> {
    let random = random_factors(d);
    let mixed: Vec<String> = random
        .iter()
        .filter(|&&f| d.factor(f).role != Role::Unit)
        .map(|&f| d.formula_name(f))
        .collect();
    if !mixed.is_empty() {
        return Err(ModelError::RequiresMixedModel(mixed));
    }
    let random_part = if random.is_empty() {
        String::new()
    } else {
        format!("Error({})", strata_expr(d, &random, BaseSet::EMPTY))
    };
    Ok(ModelFormula {
        fixed_part: fixed_part(d),
        random_part,
        dialect: Dialect::ErrorStratum,
    })
}

pub fn emit_pipe_random_term_formula(d: &Diagram) -> String {
    pipe_random_term_formula(d).to_string()
}

/// `<fixed>+(1|G1)+(1|G2)+...`, compacting single-branch unit nesting
/// chains into `(1|X/Y)`.
pub fn pipe_random_term_formula(d: &Diagram) -> ModelFormula {
    let random = random_factors(d);
    let is_unit = |f: FactorId| d.factor(f).role == Role::Unit;
    let next = |f: FactorId| -> Option<FactorId> {
        if !is_unit(f) {
            return None;
        }
        match children_in(d, &random, f).as_slice() {
            [c] if is_unit(*c) && parents_in(d, &random, *c) == vec![f] => Some(*c),
            _ => None,
        }
    };
    let has_prev = |f: FactorId| random.iter().any(|&g| next(g) == Some(f));

    let mut groups = Vec::new();
    for &f in &random {
        if has_prev(f) {
            continue;
        }
        let mut chain = vec![f];
        while let Some(c) = next(*chain.last().unwrap()) {
            chain.push(c);
        }
        let expr = if chain.len() == 1 {
            interaction(names(d, formula_ids(d, f)))
        } else {
            let mut context = BaseSet::EMPTY;
            chain
                .iter()
                .map(|&g| {
                    let e = interaction(names(d, formula_ids(d, g).difference(context)));
                    context = context.union(formula_ids(d, g));
                    e
                })
                .reduce(|a, b| Expr::binary(Op::Nest, a, b))
                .expect("non-empty")
        };
        groups.push(Expr::Random(Box::new(expr)).to_string());
    }
    ModelFormula {
        fixed_part: fixed_part(d),
        random_part: groups.join("+"),
        dialect: Dialect::PipeRandomTerm,
    }
}
