use std::fmt;

use super::{DesignSpec, FactorDecl, InteractionPolicy};

fn write_decl(f: &mut fmt::Formatter<'_>, d: &FactorDecl) -> fmt::Result {
    write!(
        f,
        "    {}: {} {}",
        d.name,
        d.variability.keyword(),
        d.levels
    )?;
    if !d.parents.is_empty() {
        write!(f, " in {}", d.parents.join(":"))?;
    }
    writeln!(f)
}

/// Canonical source text; parsing it yields an equal spec.
impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "design {} {{", self.name)?;
        writeln!(f, "  treatment {{")?;
        for d in &self.treatment_decls {
            write_decl(f, d)?;
        }
        writeln!(f, "    structure: {}", self.treatment_expr)?;
        writeln!(f, "  }}")?;
        writeln!(f, "  unit {{")?;
        for d in &self.unit_decls {
            write_decl(f, d)?;
        }
        writeln!(f, "    response: {}", self.response)?;
        writeln!(f, "  }}")?;
        writeln!(f, "  randomize {{")?;
        for (t, u) in &self.randomization {
            writeln!(f, "    {t} -> {u}")?;
        }
        writeln!(f, "  }}")?;
        match &self.interaction_policy {
            InteractionPolicy::None => writeln!(f, "  interactions: none")?,
            InteractionPolicy::All => writeln!(f, "  interactions: all")?,
            InteractionPolicy::Keep(terms) => {
                let list: Vec<String> = terms.iter().map(|t| t.join(":")).collect();
                writeln!(f, "  interactions: {}", list.join(", "))?;
            }
        }
        writeln!(f, "}}")
    }
}
