#![allow(dead_code)]

use std::path::PathBuf;

use hasse::anova::DataTable;
use hasse::{compile, CompileOptions, Diagram};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const GOLDEN: &[&str] = &[
    "crd",
    "rcbd",
    "grcbd",
    "subsampling",
    "oats",
    "latin",
    "ls-rep-rows",
    "ls-rep-both",
    "ls-rep-crossed",
    "latin-interactions",
    "marginality",
];

pub fn design_text(name: &str) -> String {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "designs",
        &format!("{name}.design"),
    ]
    .iter()
    .collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn golden(name: &str) -> Diagram {
    compile_text(&design_text(name))
}

pub fn compile_text(text: &str) -> Diagram {
    compile(text, &CompileOptions::default())
        .unwrap_or_else(|e| panic!("{e}\n{text}"))
        .diagram
}

/// A random design that is balanced by construction: nested unit chains
/// whose per-cell counts are multiples of the treatment combinations
/// randomized on them, or row-column layouts tiled by Latin squares.
pub fn random_design<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.6) {
        nested_design(rng)
    } else {
        row_column_design(rng)
    }
}

fn nested_design<R: Rng>(rng: &mut R) -> String {
    let names = ["A", "B", "C"];
    let t = rng.random_range(1..=3);
    let levels: Vec<u64> = (0..t).map(|_| rng.random_range(2..=4)).collect();
    let structure = match t {
        1 => "A",
        2 => *["A*B", "A/B", "A+B"].choose(rng).unwrap(),
        _ => *["A*B*C", "A*B+C", "A/B/C", "A*B/C"].choose(rng).unwrap(),
    };
    let depth = rng.random_range(1..=3usize);
    // Unit index per treatment, non-decreasing so nested treatments never
    // sit on a coarser unit than the factor they are nested in.
    let mut target: Vec<usize> = (0..t).map(|_| rng.random_range(0..depth)).collect();
    target.sort_unstable();

    let mut s = String::from("design fuzz {\n  treatment {\n");
    for i in 0..t {
        s += &format!("    {}: fixed {}\n", names[i], levels[i]);
    }
    s += &format!("    structure: {structure}\n  }}\n  unit {{\n");
    let unit = |j: usize| {
        if j + 1 == depth {
            "E".to_string()
        } else {
            format!("U{}", j + 1)
        }
    };
    for j in 0..depth {
        let combos: u64 = (0..t)
            .filter(|&i| target[i] == j)
            .map(|i| levels[i])
            .product();
        let rep = if combos == 1 {
            rng.random_range(2..=3)
        } else {
            rng.random_range(1..=2)
        };
        let parent = if j == 0 {
            String::new()
        } else {
            format!(" in {}", unit(j - 1))
        };
        s += &format!("    {}: random {}{parent}\n", unit(j), combos * rep);
    }
    s += "    response: E\n  }\n  randomize {\n";
    for i in 0..t {
        s += &format!("    {} -> {}\n", names[i], unit(target[i]));
    }
    s += "  }\n";
    if rng.random_bool(0.3) {
        s += "  interactions: all\n";
    }
    s + "}\n"
}

fn row_column_design<R: Rng>(rng: &mut R) -> String {
    let a = rng.random_range(2..=4u64);
    let (rm, cm) = (rng.random_range(1..=2u64), rng.random_range(1..=2u64));
    let reps = rng.random_range(2..=3u64);
    let units = match rng.random_range(0..4) {
        0 => format!(
            "R: random {} C: random {} E: random 1 in R:C",
            a * rm,
            a * cm
        ),
        1 => format!(
            "Rep: random {reps} R: random {a} in Rep C: random {} E: random 1 in R:C",
            a * cm
        ),
        2 => format!(
            "Rep: random {reps} R: random {a} in Rep C: random {a} in Rep E: random 1 in R:C"
        ),
        _ => format!("Rep: random {reps} R: random {a} C: random {a} E: random 1 in Rep:R:C"),
    };
    format!(
        "design fuzz {{ treatment {{ A: fixed {a} structure: A }} unit {{ {units} response: E }} randomize {{ A -> E }} }}"
    )
}

/// Observation classes of a factor, read off the columns named in its
/// display name.
pub fn partition(name: &str, data: &DataTable<f64>) -> Vec<Vec<u64>> {
    let cols: Vec<usize> = if name == "M" {
        Vec::new()
    } else {
        name.split(':')
            .map(|n| data.column(n).unwrap_or_else(|| panic!("no column {n}")))
            .collect()
    };
    data.levels
        .iter()
        .map(|row| cols.iter().map(|&c| row[c]).collect())
        .collect()
}

fn indicator(classes: &[Vec<u64>]) -> DMatrix<f64> {
    let mut keys: Vec<&Vec<u64>> = classes.iter().collect();
    keys.sort();
    keys.dedup();
    DMatrix::from_fn(classes.len(), keys.len(), |i, j| {
        if *keys[j] == classes[i] {
            1.0
        } else {
            0.0
        }
    })
}

/// `coarse` groups together everything `fine` groups together.
fn coarser(coarse: &[Vec<u64>], fine: &[Vec<u64>]) -> bool {
    let n = fine.len();
    (0..n).all(|i| (0..n).all(|j| fine[i] != fine[j] || coarse[i] == coarse[j]))
}

/// Orthogonal projector onto the column space of `x`, from the
/// eigen-decomposition of `x'x` with null directions dropped.
fn projector(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(x.transpose() * x);
    let tol = 1e-9 * eig.eigenvalues.amax().max(1.0);
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| if l > tol { 1.0 / l } else { 0.0 }));
    let v = &eig.eigenvectors;
    x * v * inv * v.transpose() * x.transpose()
}

/// Sum of squares per factor from explicit projections: the projection of
/// `y` onto the factor's indicator space minus its projection onto the span
/// of every coarser factor.
pub fn projection_ss(d: &Diagram, data: &DataTable<f64>) -> Vec<f64> {
    let y = DVector::from_vec(data.response.clone());
    let parts: Vec<Vec<Vec<u64>>> = d
        .factors()
        .iter()
        .map(|f| partition(&f.name, data))
        .collect();
    (0..d.len())
        .map(|f| {
            let above: Vec<usize> = (0..d.len())
                .filter(|&g| {
                    g != f
                        && coarser(&parts[g], &parts[f])
                        && (!coarser(&parts[f], &parts[g]) || d.is_below(f, g))
                })
                .collect();
            let pf = projector(&indicator(&parts[f]));
            let fitted = &pf * &y;
            let resid = if above.is_empty() {
                fitted
            } else {
                let blocks: Vec<DMatrix<f64>> =
                    above.iter().map(|&g| indicator(&parts[g])).collect();
                let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
                let mut w = DMatrix::zeros(y.len(), cols);
                let mut at = 0;
                for b in &blocks {
                    w.columns_mut(at, b.ncols()).copy_from(b);
                    at += b.ncols();
                }
                fitted - projector(&w) * &y
            };
            resid.norm_squared()
        })
        .collect()
}
