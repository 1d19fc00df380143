//! Text renderings of a diagram: Graphviz DOT, an indented plain-text
//! listing, and a TikZ picture.
//!
//! Treatment factors are bold and unit factors italic, random factors are
//! parenthesised, the response is underlined, levels are superscripts and
//! degrees of freedom subscripts. Only cover edges are drawn.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::RenderError;
use crate::poset::{Diagram, FactorId, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Dot,
    Ascii,
    Tikz,
}

impl FromStr for RenderFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(RenderFormat::Dot),
            "ascii" => Ok(RenderFormat::Ascii),
            "tikz" => Ok(RenderFormat::Tikz),
            other => Err(RenderError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub format: RenderFormat,
    pub show_levels: bool,
    pub show_df: bool,
    pub merge_annotations: bool,
}

impl RenderOptions {
    pub fn new(format: RenderFormat) -> Self {
        RenderOptions {
            format,
            show_levels: true,
            show_df: true,
            merge_annotations: true,
        }
    }
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions::new(RenderFormat::Dot)
    }
}

struct Layout {
    /// Factors grouped by depth, each rank in topological order.
    ranks: Vec<Vec<FactorId>>,
    edges: Vec<(FactorId, FactorId)>,
}

fn layout(d: &Diagram) -> Layout {
    let mut ranks: Vec<Vec<FactorId>> = Vec::new();
    for f in d.topological_order() {
        let depth = d.depth(f);
        if ranks.len() <= depth {
            ranks.resize(depth + 1, Vec::new());
        }
        ranks[depth].push(f);
    }
    Layout {
        ranks,
        edges: d.cover_edges(),
    }
}

pub fn render(d: &Diagram, opts: &RenderOptions) -> Result<String, RenderError> {
    if opts.show_df && d.df_values().is_none() {
        return Err(RenderError::MissingDf);
    }
    Ok(match opts.format {
        RenderFormat::Dot => dot(d, opts),
        RenderFormat::Ascii => ascii(d, opts),
        RenderFormat::Tikz => tikz(d, opts),
    })
}

fn is_treatment(d: &Diagram, f: FactorId) -> bool {
    matches!(d.factor(f).role, Role::Treatment | Role::Mean)
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn dot(d: &Diagram, opts: &RenderOptions) -> String {
    let l = layout(d);
    let mut out = String::from(
        "digraph design {\n  rankdir=TB;\n  node [shape=plaintext];\n  edge [arrowhead=none];\n",
    );
    for rank in &l.ranks {
        for &f in rank {
            let x = d.factor(f);
            let mut name = html_escape(&x.name);
            name = if is_treatment(d, f) {
                format!("<B>{name}</B>")
            } else {
                format!("<I>{name}</I>")
            };
            if Some(f) == d.response() {
                name = format!("<U>{name}</U>");
            }
            if x.is_random() {
                name = format!("({name})");
            }
            if opts.show_levels {
                let _ = write!(name, "<SUP>{}</SUP>", x.levels);
            }
            if let (true, Some(df)) = (opts.show_df, d.df(f)) {
                let _ = write!(name, "<SUB>{df}</SUB>");
            }
            if opts.merge_annotations && !x.pooled.is_empty() {
                let _ = write!(name, "<BR/>= {}", html_escape(&x.pooled.join(", ")));
            }
            let _ = writeln!(out, "  f{f} [label=<{name}>];");
        }
        if rank.len() > 1 {
            let ids: Vec<String> = rank.iter().map(|f| format!("f{f}")).collect();
            let _ = writeln!(out, "  {{ rank=same; {}; }}", ids.join("; "));
        }
    }
    for (a, b) in l.edges {
        let _ = writeln!(out, "  f{a} -> f{b};");
    }
    out.push_str("}\n");
    out
}

fn plain_label(d: &Diagram, f: FactorId, opts: &RenderOptions) -> String {
    let x = d.factor(f);
    let mut s = if x.is_random() {
        format!("({})", x.name)
    } else {
        x.name.clone()
    };
    if opts.show_levels {
        let _ = write!(s, " ^{}", x.levels);
    }
    if let (true, Some(df)) = (opts.show_df, d.df(f)) {
        let _ = write!(s, " _{df}");
    }
    if Some(f) == d.response() {
        s.push_str(" [response]");
    }
    if opts.merge_annotations && !x.pooled.is_empty() {
        let _ = write!(s, " [merged: {}]", x.pooled.join(", "));
    }
    s
}

fn ascii(d: &Diagram, opts: &RenderOptions) -> String {
    let l = layout(d);
    let mut out = String::new();
    for (depth, rank) in l.ranks.iter().enumerate() {
        for &f in rank {
            let _ = writeln!(out, "{}{}", "  ".repeat(depth), plain_label(d, f, opts));
        }
    }
    out.push_str("edges:\n");
    for (a, b) in l.edges {
        let _ = writeln!(out, "  {} -> {}", d.factor(a).name, d.factor(b).name);
    }
    out
}

fn tex_name(name: &str) -> String {
    name.replace('_', "\\_").replace(':', "\\!:\\!")
}

fn tikz(d: &Diagram, opts: &RenderOptions) -> String {
    let l = layout(d);
    let mut out = String::from("\\begin{tikzpicture}\n");
    for (depth, rank) in l.ranks.iter().enumerate() {
        let width = rank.len() as f64;
        for (i, &f) in rank.iter().enumerate() {
            let x = d.factor(f);
            let font = if is_treatment(d, f) {
                "mathbf"
            } else {
                "mathit"
            };
            let mut label = format!("\\{font}{{{}}}", tex_name(&x.name));
            if Some(f) == d.response() {
                label = format!("\\underline{{{label}}}");
            }
            if x.is_random() {
                label = format!("({label})");
            }
            if opts.show_levels {
                let _ = write!(label, "^{{{}}}", x.levels);
            }
            if let (true, Some(df)) = (opts.show_df, d.df(f)) {
                let _ = write!(label, "_{{{df}}}");
            }
            if opts.merge_annotations && !x.pooled.is_empty() {
                let pooled: Vec<String> = x.pooled.iter().map(|p| tex_name(p)).collect();
                let _ = write!(label, "\\;[{}]", pooled.join(","));
            }
            let xpos = (i as f64 - (width - 1.0) / 2.0) * 2.5;
            let ypos = -(depth as f64) * 1.5;
            let _ = writeln!(
                out,
                "  \\node (f{f}) at ({xpos:.2},{ypos:.2}) {{${label}$}};"
            );
        }
    }
    for (a, b) in l.edges {
        let _ = writeln!(out, "  \\draw (f{a}) -- (f{b});");
    }
    out.push_str("\\end{tikzpicture}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_design;
    use crate::poset::build_experiment;

    fn diagram(body: &str) -> Diagram {
        build_experiment(&parse_design(&format!("design t {{ {body} }}")).unwrap()).unwrap()
    }

    fn edge_lines(s: &str) -> Vec<&str> {
        s.lines().filter(|l| l.contains("->")).collect()
    }

    #[test]
    fn crd_dot_edges() {
        let d = diagram(
            "treatment { A: fixed 3 B: fixed 2 structure: A*B }
             unit { E: random 24 response: E } randomize { A -> E B -> E }",
        );
        let s = render(&d, &RenderOptions::new(RenderFormat::Dot)).unwrap();
        assert!(s.starts_with("digraph"));
        assert_eq!(s.matches(" [label=").count(), 5);
        assert_eq!(edge_lines(&s).len(), 5);
        let ascii = render(&d, &RenderOptions::new(RenderFormat::Ascii)).unwrap();
        let edges: Vec<&str> = edge_lines(&ascii).into_iter().map(str::trim).collect();
        assert_eq!(
            edges,
            vec!["M -> A", "M -> B", "A -> A:B", "B -> A:B", "A:B -> E"]
        );
        assert!(ascii.contains("(E) ^24 _18 [response]"));
    }

    #[test]
    fn oats_response_has_two_parents() {
        let d = diagram(
            "treatment { Variety: fixed 3 Nitrogen: fixed 4 structure: Variety*Nitrogen }
             unit { Block: random 6 Plot: random 3 in Block Subplot: random 4 in Plot response: Subplot }
             randomize { Variety -> Plot Nitrogen -> Subplot }",
        );
        let s = render(&d, &RenderOptions::new(RenderFormat::Ascii)).unwrap();
        let mut into: Vec<&str> = edge_lines(&s)
            .into_iter()
            .map(str::trim)
            .filter(|l| l.ends_with("-> Subplot"))
            .collect();
        into.sort();
        assert_eq!(into, vec!["Plot -> Subplot", "Variety:Nitrogen -> Subplot"]);
        let t = render(&d, &RenderOptions::new(RenderFormat::Tikz)).unwrap();
        assert_eq!(t.matches("\\node").count(), 7);
        assert!(t.contains("(\\underline{\\mathit{Subplot}})^{72}_{45}"));
    }

    #[test]
    fn unknown_format_and_missing_df() {
        assert!(matches!(
            "svg".parse::<RenderFormat>(),
            Err(RenderError::UnknownFormat(_))
        ));
        let s = parse_design(
            "design t { treatment { A: fixed 2 structure: A } unit { E: random 4 response: E } randomize { A -> E } }",
        )
        .unwrap();
        let t = crate::poset::build_treatment_poset(&s).unwrap();
        assert_eq!(
            render(&t, &RenderOptions::new(RenderFormat::Dot)),
            Err(RenderError::MissingDf)
        );
        let opts = RenderOptions {
            show_df: false,
            ..RenderOptions::new(RenderFormat::Ascii)
        };
        assert!(render(&t, &opts).unwrap().starts_with("M ^1\n"));
    }
}
