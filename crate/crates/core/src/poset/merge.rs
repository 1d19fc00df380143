use super::{Diagram, FactorId, Relation, Role};
use crate::dsl::Variability;
use crate::error::PosetError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRecord {
    pub removed: String,
    pub into: String,
}

/// Folds every zero-df factor into its unique cover parent. A zero-df
/// factor with several cover parents is left in place and noted as a
/// warning.
pub fn merge_zero_df(diagram: &Diagram) -> Result<Diagram, PosetError> {
    let mut d = match diagram.df {
        Some(_) => diagram.clone(),
        None => diagram.clone().with_df()?,
    };
    let mut noted = Vec::new();
    loop {
        let df = d.df.clone().expect("df computed");
        let candidate = d.topological_order().into_iter().find(|&f| {
            f != d.mean() && df[f] == 0 && !noted.contains(&d.factors[f].name) && {
                let parents = d.cover_parents(f);
                if parents.len() == 1 {
                    true
                } else {
                    let names: Vec<&str> = parents
                        .iter()
                        .map(|&p| d.factors[p].name.as_str())
                        .collect();
                    d.warnings.push(format!(
                        "`{}` has zero degrees of freedom and is confounded with {}; not merged",
                        d.factors[f].name,
                        names.join(", ")
                    ));
                    noted.push(d.factors[f].name.clone());
                    false
                }
            }
        });
        let Some(f) = candidate else { break };
        let parent = d.cover_parents(f)[0];
        fold_into(&mut d, f, parent);
    }
    Ok(d)
}

fn fold_into(d: &mut Diagram, gone: FactorId, keep: FactorId) {
    let removed = d.factors[gone].clone();
    {
        let s = &mut d.factors[keep];
        if removed.variability == Variability::Random {
            s.variability = Variability::Random;
        }
        if removed.role == Role::Unit {
            s.role = Role::Unit;
        }
        s.fixed_constituents = s
            .fixed_constituents
            .intersection(removed.fixed_constituents);
        s.pooled.push(removed.name.clone());
        s.pooled.extend(removed.pooled.iter().cloned());
    }
    d.merges.push(MergeRecord {
        removed: removed.name.clone(),
        into: d.factors[keep].name.clone(),
    });

    let n = d.factors.len();
    let remap = |i: FactorId| if i > gone { i - 1 } else { i };
    let mut order = Relation::new(n - 1);
    for (a, b) in d.order.pairs() {
        if a != gone && b != gone {
            order.insert(remap(a), remap(b));
        }
    }
    d.order = order;
    d.factors.remove(gone);
    for (i, f) in d.factors.iter_mut().enumerate() {
        f.id = i;
    }
    if let Some(r) = d.response {
        d.response = Some(if r == gone { remap(keep) } else { remap(r) });
    }
    if let Some(df) = d.df.as_mut() {
        df.remove(gone);
    }
    d.rebuild_covers();
}
