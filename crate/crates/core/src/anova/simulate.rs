use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{classify, Classes, DataTable};
use crate::error::{AnovaError, PosetError};
use crate::plan::{generate_plan, Plan};
use crate::poset::{Diagram, FactorId};
use crate::scalar::Scalar;

/// Draws responses on a fixed layout: fixed effects along each
/// observation's classes plus one independent normal draw per class of
/// every random factor.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    plan: Plan,
    classes: Vec<Classes>,
    fixed: Vec<(FactorId, Vec<T>)>,
    /// Standard deviation per random factor.
    random: Vec<(FactorId, T)>,
}

fn lookup(d: &Diagram, name: &str) -> Option<FactorId> {
    d.find(name)
        .or_else(|| (0..d.len()).find(|&f| d.formula_name(f) == name))
}

impl<T: Scalar> Simulator<T> {
    /// `fixed_effects` maps a fixed factor to one value per class, in the
    /// class order of [`super::FactorEffects::classes`]; factors left out
    /// contribute nothing. Every random factor needs a variance.
    pub fn new(
        d: &Diagram,
        plan: Plan,
        fixed_effects: &BTreeMap<String, Vec<T>>,
        variance_components: &BTreeMap<String, T>,
    ) -> Result<Self, AnovaError> {
        let classes = classify(d, &plan.columns, &plan.rows)?;
        let mut fixed = Vec::new();
        for (name, values) in fixed_effects {
            let f = lookup(d, name).ok_or_else(|| AnovaError::NotFixed(name.clone()))?;
            if !d.factor(f).is_fixed() {
                return Err(AnovaError::NotFixed(name.clone()));
            }
            if values.len() != classes[f].keys.len() {
                return Err(AnovaError::FixedEffectShape {
                    factor: name.clone(),
                    found: values.len(),
                    expected: classes[f].keys.len(),
                });
            }
            fixed.push((f, values.clone()));
        }
        let mut given: BTreeMap<FactorId, T> = BTreeMap::new();
        for (name, &v) in variance_components {
            let f = lookup(d, name)
                .filter(|&f| d.factor(f).is_random())
                .ok_or_else(|| AnovaError::Poset(PosetError::UnknownFactor(name.clone())))?;
            if v < T::zero() || v.is_nan() {
                return Err(AnovaError::NegativeVariance(name.clone()));
            }
            given.insert(f, v);
        }
        let mut random = Vec::new();
        for x in d.factors().iter().filter(|x| x.is_random()) {
            let v = given
                .get(&x.id)
                .ok_or_else(|| AnovaError::MissingVariance(x.name.clone()))?;
            random.push((x.id, v.sqrt()));
        }
        Ok(Simulator {
            plan,
            classes,
            fixed,
            random,
        })
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let n = self.plan.rows.len();
        let mut y = vec![T::zero(); n];
        for (f, values) in &self.fixed {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = *yi + values[self.classes[*f].of[i]];
            }
        }
        for &(f, sd) in &self.random {
            let c = &self.classes[f];
            let z: Vec<T> = (0..c.keys.len())
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    <T as num_traits::NumCast>::from(z).expect("finite draw") * sd
                })
                .collect();
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = *yi + z[c.of[i]];
            }
        }
        y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DataTable<T> {
        DataTable {
            columns: self.plan.columns.clone(),
            levels: self.plan.rows.clone(),
            response: self.draw(rng),
        }
    }
}

/// Simulated data on the plan generated from `seed`; the noise comes from a
/// separate ChaCha8 stream of the same seed.
pub fn simulate_response<T: Scalar>(
    d: &Diagram,
    fixed_effects: &BTreeMap<String, Vec<T>>,
    variance_components: &BTreeMap<String, T>,
    seed: u64,
) -> Result<DataTable<T>, AnovaError> {
    let plan = generate_plan(d, seed)?;
    let sim = Simulator::new(d, plan, fixed_effects, variance_components)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Ok(sim.sample(&mut rng))
}
