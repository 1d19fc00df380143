use std::collections::BTreeSet;

use super::{
    BaseFactor, BaseId, BaseKind, BaseSet, BaseTable, Diagram, DiagramKind, FactorId, Role,
};
use crate::dsl::{DeclRole, DesignSpec, InteractionPolicy};
use crate::error::PosetError;

fn treatment_bases(spec: &DesignSpec) -> Result<Vec<BaseFactor>, PosetError> {
    let used = spec.treatment_expr.leaves();
    for name in &used {
        match spec.decl(name) {
            Some(d) if d.role == DeclRole::Unit => {
                return Err(PosetError::UnitInTreatmentStructure(name.clone()))
            }
            Some(_) => {}
            None => return Err(PosetError::UnknownFactor(name.clone())),
        }
    }
    Ok(spec
        .treatment_decls
        .iter()
        .filter(|d| used.contains(&d.name))
        .map(|d| BaseFactor {
            name: d.name.clone(),
            kind: BaseKind::Treatment,
            variability: d.variability,
            count: d.levels,
            parents: BaseSet::EMPTY,
            randomized_on: None,
        })
        .collect())
}

fn unit_bases(spec: &DesignSpec) -> Result<Vec<BaseFactor>, PosetError> {
    let index = |name: &str| {
        spec.unit_decls
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| PosetError::UnknownFactor(name.to_string()))
    };
    spec.unit_decls
        .iter()
        .map(|d| {
            let mut parents = BaseSet::EMPTY;
            for p in &d.parents {
                parents = parents.with(index(p)?);
            }
            Ok(BaseFactor {
                name: d.name.clone(),
                kind: BaseKind::Unit,
                variability: d.variability,
                count: d.levels,
                parents,
                randomized_on: None,
            })
        })
        .collect()
}

/// Base factors of the full experiment: treatments used in the structure
/// followed by all unit factors, with randomization links.
pub fn experiment_bases(spec: &DesignSpec) -> Result<BaseTable, PosetError> {
    let t = treatment_bases(spec)?;
    let u = unit_bases(spec)?;
    link(t, u, &spec.randomization)
}

fn link(
    mut treatments: Vec<BaseFactor>,
    units: Vec<BaseFactor>,
    randomization: &[(String, String)],
) -> Result<BaseTable, PosetError> {
    let nt = treatments.len();
    for t in treatments.iter_mut() {
        t.randomized_on = None;
        if let Some((_, u)) = randomization.iter().find(|(name, _)| *name == t.name) {
            let uid = units.iter().position(|b| b.name == *u).ok_or_else(|| {
                PosetError::RandomizedOnUnknown {
                    treatment: t.name.clone(),
                    unit: u.clone(),
                }
            })?;
            t.randomized_on = Some(uid + nt);
        }
    }
    let units = units.into_iter().map(|mut u| {
        u.parents = u.parents.shifted(nt);
        u
    });
    BaseTable::new(treatments.into_iter().chain(units).collect())
}

/// Treatment structure diagram: one factor per term of the expanded
/// structure expression.
pub fn build_treatment_poset(spec: &DesignSpec) -> Result<Diagram, PosetError> {
    let table = BaseTable::new(treatment_bases(spec)?)?;
    let terms = spec
        .treatment_expr
        .expand()
        .map_err(|e| PosetError::UnknownFactor(e.to_string()))?;
    let mut closures = Vec::new();
    for term in &terms {
        let mut set = BaseSet::EMPTY;
        for name in &term.0 {
            let id = table
                .index(name)
                .ok_or_else(|| PosetError::UnknownFactor(name.clone()))?;
            set = set.with(id);
        }
        closures.push(table.closure_of(set));
    }
    // Main effects first, then by declaration order of their members.
    closures.sort_by_key(|c| (c.len(), c.iter().collect::<Vec<_>>()));
    Ok(Diagram::from_closures(
        DiagramKind::Treatment,
        table,
        closures,
    ))
}

/// Unit structure diagram. A unit factor declared inside several crossed
/// parents with more than one replicate per cell adds the cell
/// interaction of those parents.
pub fn build_unit_poset(spec: &DesignSpec) -> Result<Diagram, PosetError> {
    let table = BaseTable::new(unit_bases(spec)?)?;
    let mut closures = Vec::new();
    for (id, b) in table.iter() {
        if b.parents.len() >= 2 && b.count > 1 {
            closures.push(table.closure_of(b.parents));
        }
        closures.push(table.base_closure(id));
    }
    closures.sort_by_key(|c| (c.len(), c.iter().collect::<Vec<_>>()));
    let response = table
        .index(&spec.response)
        .ok_or_else(|| PosetError::UnknownFactor(spec.response.clone()))?;
    let response_closure = table.base_closure(response);
    if let Some(missing) = table.units().difference(response_closure).iter().next() {
        return Err(PosetError::ResponseNotMinimum {
            response: spec.response.clone(),
            unit: table.get(missing).name.clone(),
        });
    }
    let mut d = Diagram::from_closures(DiagramKind::Unit, table, closures);
    d.response = d.find_closure(response_closure);
    Ok(d)
}

/// The factor for the interaction of `constituents`: an existing factor
/// when one has the same closure, otherwise a new one. Nested members are
/// absorbed, so `{Plot, Block}` with Plot in Block yields Plot.
pub fn canonicalize_interaction(
    diagram: &mut Diagram,
    constituents: &[FactorId],
) -> Result<FactorId, PosetError> {
    if constituents.is_empty() {
        return Err(PosetError::EmptyInteraction);
    }
    let closure = constituents.iter().fold(BaseSet::EMPTY, |acc, &f| {
        acc.union(diagram.factors[f].closure)
    });
    Ok(diagram.insert_closure(closure))
}

/// Merges treatment and unit diagrams through the randomization links.
pub fn compose_experiment(
    treatment: &Diagram,
    unit: &Diagram,
    randomization: &[(String, String)],
    policy: &InteractionPolicy,
) -> Result<Diagram, PosetError> {
    let t_bases: Vec<BaseFactor> = treatment.bases.iter().map(|(_, b)| b.clone()).collect();
    let u_bases: Vec<BaseFactor> = unit.bases.iter().map(|(_, b)| b.clone()).collect();
    let nt = t_bases.len();
    for b in &t_bases {
        if !randomization.iter().any(|(t, _)| *t == b.name) {
            return Err(PosetError::NotRandomized(b.name.clone()));
        }
    }
    let table = link(t_bases, u_bases, randomization)?;

    let t_sets: Vec<BaseSet> = treatment.factors[1..]
        .iter()
        .map(|f| table.closure_of(f.closure))
        .collect();
    let u_sets: Vec<BaseSet> = unit.factors[1..]
        .iter()
        .map(|f| table.closure_of(f.closure.shifted(nt)))
        .collect();

    let mut extra = Vec::new();
    match policy {
        InteractionPolicy::None => {}
        InteractionPolicy::All => {
            for &u in &u_sets {
                if !u.is_subset(table.closure_of(u.intersection(table.units()))) {
                    continue;
                }
                for &t in &t_sets {
                    if !t.is_subset(u) {
                        extra.push(u.union(t));
                    }
                }
            }
        }
        InteractionPolicy::Keep(terms) => {
            for term in terms {
                extra.push(kept_interaction(&table, term)?);
            }
        }
    }

    let mut closures: Vec<BaseSet> = t_sets.iter().chain(&u_sets).copied().collect();
    let mut seen: BTreeSet<BaseSet> = closures.iter().copied().collect();
    extra.sort_by_key(|c| (c.len(), c.iter().collect::<Vec<_>>()));
    for c in extra {
        if seen.insert(c) {
            closures.push(c);
        }
    }

    let mut d = Diagram::from_closures(DiagramKind::Experiment, table, closures);
    if let Some(r) = unit.response {
        let c = d.bases.closure_of(unit.factors[r].closure.shifted(nt));
        d.response = d.find_closure(c);
    }
    d.warnings = additive_warnings(&d);
    Ok(d)
}

fn kept_interaction(table: &BaseTable, term: &[String]) -> Result<BaseSet, PosetError> {
    let label = term.join(":");
    let mut ids: Vec<BaseId> = Vec::new();
    for name in term {
        let id = table
            .index(name)
            .ok_or_else(|| PosetError::InteractionConstituentMissing {
                term: label.clone(),
                name: name.clone(),
            })?;
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(PosetError::EmptyInteraction);
    }
    for (i, &x) in ids.iter().enumerate() {
        for &y in &ids[i + 1..] {
            let (cx, cy) = (table.base_closure(x), table.base_closure(y));
            let nested = if cx.is_subset(cy) {
                Some((x, y))
            } else if cy.is_subset(cx) {
                Some((y, x))
            } else {
                None
            };
            if let Some((upper, lower)) = nested {
                return Err(PosetError::InteractionNotCrossed {
                    term: label,
                    upper: table.get(upper).name.clone(),
                    lower: table.get(lower).name.clone(),
                });
            }
        }
    }
    Ok(table.closure_of(BaseSet::from_ids(ids)))
}

/// Notes unit factors nested in two crossed treatment factors whose
/// interaction is absent from the diagram.
fn additive_warnings(d: &Diagram) -> Vec<String> {
    let mut out = Vec::new();
    let mut reported = BTreeSet::new();
    let treatments: Vec<FactorId> = (0..d.len())
        .filter(|&f| d.factors[f].role == Role::Treatment)
        .collect();
    for u in d.topological_order() {
        if d.factors[u].role != Role::Unit {
            continue;
        }
        let above: Vec<FactorId> = treatments
            .iter()
            .copied()
            .filter(|&t| d.is_below(u, t))
            .collect();
        for (i, &a) in above.iter().enumerate() {
            for &b in &above[i + 1..] {
                if d.comparable(a, b) {
                    continue;
                }
                let joint = d.factors[a].closure.union(d.factors[b].closure);
                if d.find_closure(joint).is_none() && reported.insert((a.min(b), a.max(b))) {
                    out.push(format!(
                        "`{}` lies below `{}` and `{}` but their interaction is absent; an additive model is assumed",
                        d.factors[u].name, d.factors[a].name, d.factors[b].name
                    ));
                }
            }
        }
    }
    out
}

/// Treatment, unit and experiment diagrams for a spec, with degrees of
/// freedom computed on the experiment diagram.
pub fn build_experiment(spec: &DesignSpec) -> Result<Diagram, PosetError> {
    build_experiment_with(spec, &spec.interaction_policy)
}

/// As [`build_experiment`] with `policy` in place of the design's own.
pub fn build_experiment_with(
    spec: &DesignSpec,
    policy: &InteractionPolicy,
) -> Result<Diagram, PosetError> {
    let t = build_treatment_poset(spec)?;
    let u = build_unit_poset(spec)?;
    compose_experiment(&t, &u, &spec.randomization, policy)?.with_df()
}
