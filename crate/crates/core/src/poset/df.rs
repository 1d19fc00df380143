use super::Diagram;
use crate::error::PosetError;

/// `df(F) = levels(F) - sum of df(G)` over every factor `G` strictly above
/// `F`, evaluated from the top down.
pub fn degrees_of_freedom(diagram: &Diagram) -> Result<Vec<u64>, PosetError> {
    let mut df = vec![0i64; diagram.len()];
    for f in diagram.topological_order() {
        let above: i64 = diagram.ancestors(f).iter().map(|&g| df[g]).sum();
        let value = diagram.factor(f).levels as i64 - above;
        if value < 0 {
            return Err(PosetError::NegativeDf {
                factor: diagram.factor(f).name.clone(),
                df: value,
            });
        }
        df[f] = value;
    }
    Ok(df.into_iter().map(|v| v as u64).collect())
}
