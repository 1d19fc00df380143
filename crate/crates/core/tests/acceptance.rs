//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hasse::anova::{compute_anova, DataTable, Simulator};
use hasse::model::{emit_error_stratum_formula, emit_pipe_random_term_formula};
use hasse::plan::{generate_latin_square, generate_plan, validate_plan};
use hasse::skeleton::{
    diagnostics, expected_mean_squares, experimental_units, skeleton_table, Denominator,
    DiagnosticKind,
};
use hasse::{simulate_response, Diagram};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{compile_text, golden, projection_ss, random_design, GOLDEN};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    if t > limit {
        Err(format!("took {:.2?}, limit {:.0?}", t, limit))
    } else {
        Ok(t)
    }
}

fn df_by_label(d: &Diagram) -> BTreeMap<String, u64> {
    skeleton_table(d)
        .unwrap()
        .rows
        .into_iter()
        .map(|r| (r.label, r.df))
        .collect()
}

fn expect(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn oats_fixture() -> Outcome {
    let start = Instant::now();
    let d = golden("oats");
    let got: Vec<(String, u64)> = skeleton_table(&d)
        .unwrap()
        .rows
        .into_iter()
        .map(|r| (r.label, r.df))
        .collect();
    let want: Vec<(String, u64)> = [
        ("Block", 5),
        ("Variety", 2),
        ("Plot", 10),
        ("Nitrogen", 3),
        ("Variety:Nitrogen", 6),
        ("Residual", 45),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), *v))
    .collect();
    ensure!(got == want, "skeleton {got:?}");
    let id = |n: &str| d.find(n).unwrap();
    let eu = experimental_units(&d);
    ensure!(eu.get(id("Variety")) == Some(id("Plot")), "Variety unit");
    ensure!(
        eu.get(id("Nitrogen")) == Some(id("Subplot")),
        "Nitrogen unit"
    );
    let e = emit_error_stratum_formula(&d).map_err(|e| e.to_string())?;
    let p = emit_pipe_random_term_formula(&d);
    ensure!(
        e == "Variety*Nitrogen+Error(Block/Plot)",
        "error formula {e}"
    );
    ensure!(p == "Variety*Nitrogen+(1|Block/Plot)", "pipe formula {p}");
    let t = within(Duration::from_secs(1), start)?;
    Ok(format!("{t:.2?}"))
}

fn latin_units(a: u64) -> String {
    format!("R: random {a} C: random {a} E: random 1 in R:C")
}

fn one_factor(a: u64, units: &str, extra: &str) -> Diagram {
    compile_text(&format!(
        "design t {{ treatment {{ A: fixed {a} structure: A }} unit {{ {units} response: E }} randomize {{ A -> E }} {extra} }}"
    ))
}

fn closed_forms() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut check = |d: Diagram, want: BTreeMap<String, u64>, what: String| -> Result<(), String> {
        let got = df_by_label(&d);
        checked += 1;
        if got == want {
            Ok(())
        } else {
            Err(format!("{what}: got {got:?}, want {want:?}"))
        }
    };
    for a in 2..=4u64 {
        for b in 2..=4u64 {
            for n in 1..=3u64 {
                let d = compile_text(&format!(
                    "design t {{ treatment {{ A: fixed {a} B: fixed {b} structure: A*B }}
                     unit {{ E: random {} response: E }} randomize {{ A -> E B -> E }} }}",
                    a * b * n
                ));
                let want = expect(&[
                    ("A", a - 1),
                    ("B", b - 1),
                    ("A:B", (a - 1) * (b - 1)),
                    ("Residual", a * b * (n - 1)),
                ]);
                check(d, want, format!("CRD a={a} b={b} n={n}"))?;
            }
        }
    }
    for a in 2..=5u64 {
        for b in 2..=5u64 {
            let d = one_factor(a, &format!("B: random {b} E: random {a} in B"), "");
            let want = expect(&[("B", b - 1), ("A", a - 1), ("Residual", (a - 1) * (b - 1))]);
            check(d, want, format!("RCBD a={a} b={b}"))?;
            for n in 2..=3u64 {
                let d = one_factor(
                    a,
                    &format!("B: random {b} E: random {} in B", a * n),
                    "interactions: all",
                );
                let want = expect(&[
                    ("B", b - 1),
                    ("A", a - 1),
                    ("B:A", (a - 1) * (b - 1)),
                    ("Residual", a * b * (n - 1)),
                ]);
                check(d, want, format!("GRCBD a={a} b={b} n={n}"))?;
            }
        }
    }
    for a in 2..=4u64 {
        for k in 2..=4u64 {
            for n in 2..=3u64 {
                let d = compile_text(&format!(
                    "design t {{ treatment {{ A: fixed {a} structure: A }}
                     unit {{ U: random {} E: random {n} in U response: E }} randomize {{ A -> U }} }}",
                    a * k
                ));
                let want = expect(&[
                    ("A", a - 1),
                    ("U", a * (k - 1)),
                    ("Residual", a * k * (n - 1)),
                ]);
                check(d, want, format!("sub-sampling a={a} k={k} n={n}"))?;
            }
        }
    }
    for a in 2..=6u64 {
        let d = one_factor(a, &latin_units(a), "");
        let want = expect(&[
            ("R", a - 1),
            ("C", a - 1),
            ("A", a - 1),
            ("Residual", (a - 1) * (a - 2)),
        ]);
        check(d, want, format!("Latin square a={a}"))?;
    }
    for r in 2..=4u64 {
        for a in 2..=5u64 {
            let d = one_factor(
                a,
                &format!("Rep: random {r} R: random {a} in Rep C: random {a} E: random 1 in R:C"),
                "",
            );
            let want = expect(&[
                ("Rep", r - 1),
                ("R", r * (a - 1)),
                ("C", a - 1),
                ("A", a - 1),
                ("Residual", (r * a - 2) * (a - 1)),
            ]);
            check(d, want, format!("rows in Rep r={r} a={a}"))?;
            let d = one_factor(
                a,
                &format!(
                    "Rep: random {r} R: random {a} in Rep C: random {a} in Rep E: random 1 in R:C"
                ),
                "",
            );
            let want = expect(&[
                ("Rep", r - 1),
                ("R", r * (a - 1)),
                ("C", r * (a - 1)),
                ("A", a - 1),
                ("Residual", (r * (a - 1) - 1) * (a - 1)),
            ]);
            check(d, want, format!("rows and columns in Rep r={r} a={a}"))?;
            let d = one_factor(
                a,
                &format!("Rep: random {r} R: random {a} C: random {a} E: random 1 in Rep:R:C"),
                "",
            );
            let want = expect(&[
                ("Rep", r - 1),
                ("R", a - 1),
                ("C", a - 1),
                ("A", a - 1),
                ("Residual", (a - 1) * (r * (a + 1) - 3)),
            ]);
            check(d, want, format!("Rep crossed r={r} a={a}"))?;
        }
    }
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!("{checked} designs, {t:.2?}"))
}

fn names(d: &Diagram, ids: &[usize]) -> BTreeSet<String> {
    ids.iter().map(|&i| d.factor(i).name.clone()).collect()
}

fn denominators() -> Outcome {
    let den = |d: &Diagram, f: &str| {
        skeleton_table(d)
            .unwrap()
            .row(f)
            .and_then(|r| r.denominator.clone())
    };
    let factor = |d: &Diagram, n: &str| Some(Denominator::Factor(d.find(n).unwrap()));

    let crd = golden("crd");
    for f in ["A", "B", "A:B"] {
        ensure!(
            den(&crd, f) == factor(&crd, "E"),
            "CRD {f}: {:?}",
            den(&crd, f)
        );
    }
    let g = golden("grcbd");
    ensure!(
        den(&g, "A") == factor(&g, "B:A"),
        "GRCBD A: {:?}",
        den(&g, "A")
    );
    ensure!(
        den(&g, "B") == factor(&g, "E"),
        "GRCBD B: {:?}",
        den(&g, "B")
    );
    let l = golden("latin-interactions");
    match den(&l, "A") {
        Some(Denominator::NoExactTest(ids)) => {
            let got = names(&l, &ids);
            let want: BTreeSet<String> = ["R:A", "C:A"].map(String::from).into();
            ensure!(got == want, "Latin A candidates {got:?}");
        }
        other => return Err(format!("Latin A: {other:?}")),
    }
    Ok("CRD, GRCBD, Latin square with R:A and C:A".into())
}

fn df_partition() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xdf);
    for i in 0..200 {
        let text = random_design(&mut rng);
        let compiled = hasse::compile(&text, &hasse::CompileOptions::default())
            .map_err(|e| format!("spec {i} rejected: {e}\n{text}"))?;
        let d = compiled.diagram;
        let df = d.df_values().ok_or("no df")?;
        let total: u64 = df.iter().sum();
        let n = d.factor(d.response().ok_or("no response")?).levels;
        ensure!(total == n, "spec {i}: sum df {total} != {n}\n{text}");
    }
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("200 specs, {t:.2?}"))
}

fn random_variances(d: &Diagram, rng: &mut ChaCha8Rng) -> BTreeMap<String, f64> {
    use rand::Rng;
    d.factors()
        .iter()
        .filter(|f| f.is_random())
        .map(|f| (f.name.clone(), rng.random_range(0.2..4.0)))
        .collect()
}

fn anova_oracle() -> Outcome {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Averaging only decomposes orthogonal designs; the engine must refuse
    // the others rather than report sums of squares that do not partition.
    let mut refused = Vec::new();
    let mut designs = Vec::new();
    for name in GOLDEN {
        let d = golden(name);
        let data = simulate_response(&d, &BTreeMap::new(), &random_variances(&d, &mut rng), 0)
            .map_err(|e| e.to_string())?;
        match compute_anova(&d, &data) {
            Err(hasse::error::AnovaError::NotOrthogonal { .. }) => refused.push(*name),
            Err(e) => return Err(format!("{name}: {e}")),
            Ok(_) => designs.push((*name, d)),
        }
    }
    ensure!(
        refused == ["latin-interactions"],
        "refused as non-orthogonal: {refused:?}"
    );
    let mut worst = 0.0f64;
    let mut worst_rel = 0.0f64;
    for i in 0..50 {
        let (name, d) = &designs[i % designs.len()];
        let fixed: BTreeMap<String, Vec<f64>> =
            [("M".to_string(), vec![rng.random_range(-5.0..5.0)])].into();
        let data = simulate_response(d, &fixed, &random_variances(d, &mut rng), i as u64)
            .map_err(|e| e.to_string())?;
        ensure!(data.len() <= 100, "{name} has {} observations", data.len());
        let table = compute_anova(d, &data).map_err(|e| e.to_string())?;
        let oracle = projection_ss(d, &data);
        for row in &table.rows {
            let diff = (row.ss - oracle[row.factor]).abs();
            worst = worst.max(diff);
            ensure!(
                diff <= 1e-10,
                "{name} {}: {} vs {}",
                row.label,
                row.ss,
                oracle[row.factor]
            );
        }
        let total: f64 = data.response.iter().map(|y| y * y).sum();
        let rel = (table.total_ss() - total).abs() / total;
        worst_rel = worst_rel.max(rel);
        ensure!(
            rel <= 1e-9,
            "{name}: sum SS {} vs sum y^2 {total}",
            table.total_ss()
        );
    }
    Ok(format!(
        "50 datasets over {} designs, max |dSS| {worst:.1e}, max rel {worst_rel:.1e}; refused as non-orthogonal: {}",
        designs.len(),
        refused.join(", ")
    ))
}

/// Mean MS per row over `reps` simulated datasets against the EMS evaluated
/// at the injected components.
fn monte_carlo(
    name: &str,
    variances: &[(&str, f64)],
    reps: usize,
    seed: u64,
) -> Result<String, String> {
    let d = golden(name);
    let var: BTreeMap<String, f64> = variances.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let plan = generate_plan(&d, seed).map_err(|e| e.to_string())?;
    let sim = Simulator::new(&d, plan, &BTreeMap::new(), &var).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for _ in 0..reps {
        let data: DataTable<f64> = sim.sample(&mut rng);
        let t = compute_anova(&d, &data).map_err(|e| e.to_string())?;
        for r in t.rows.iter().skip(1) {
            if let Some(ms) = r.ms {
                let e = sums.entry(r.label.clone()).or_insert((0.0, 0.0, r.factor));
                e.0 += ms;
                e.1 += ms * ms;
            }
        }
    }
    let sigma2 = |f: usize| var.get(&d.factor(f).name).copied().unwrap_or(0.0);
    let mut worst = 0.0f64;
    for (label, (s, s2, f)) in &sums {
        let n = reps as f64;
        let mean = s / n;
        let se = ((s2 / n - mean * mean) * n / (n - 1.0)).sqrt() / n.sqrt();
        let ems = expected_mean_squares(&d, *f).evaluate(sigma2);
        let z = (mean - ems).abs() / se;
        worst = worst.max(z);
        ensure!(
            z <= 3.0,
            "{name} {label}: mean MS {mean:.4} vs EMS {ems} ({z:.2} SE)"
        );
    }
    Ok(format!("{name} max {worst:.2} SE"))
}

fn ems_monte_carlo() -> Outcome {
    let start = Instant::now();
    let crd = monte_carlo("crd", &[("E", 1.0)], 10_000, 11)?;
    let oats = monte_carlo(
        "oats",
        &[("Block", 2.0), ("Plot", 4.0), ("Subplot", 1.0)],
        10_000,
        12,
    )?;
    for name in GOLDEN {
        let d = golden(name);
        for row in skeleton_table(&d).unwrap().rows {
            if let Some(Denominator::Factor(g)) = row.denominator {
                let own: BTreeSet<_> = row.ems.without(row.factor).components.into_iter().collect();
                let den: BTreeSet<_> = expected_mean_squares(&d, g)
                    .components
                    .into_iter()
                    .collect();
                ensure!(
                    own == den,
                    "{name} {}: EMS minus own term differs from EMS({})",
                    row.label,
                    d.factor(g).name
                );
            }
        }
    }
    let t = within(Duration::from_secs(120), start)?;
    Ok(format!("{crd}; {oats}; {t:.2?}"))
}

fn is_latin(sq: &[Vec<u32>]) -> bool {
    let n = sq.len() as u32;
    let full: BTreeSet<u32> = (1..=n).collect();
    sq.iter()
        .all(|r| r.len() == n as usize && r.iter().copied().collect::<BTreeSet<_>>() == full)
        && (0..n as usize).all(|j| sq.iter().map(|r| r[j]).collect::<BTreeSet<_>>() == full)
}

fn plan_validity() -> Outcome {
    for name in GOLDEN {
        let d = golden(name);
        for seed in 0..1000 {
            let p = generate_plan(&d, seed).map_err(|e| format!("{name}: {e}"))?;
            let r = validate_plan(&p, &d).map_err(|e| e.to_string())?;
            ensure!(
                r.is_valid(),
                "{name} seed {seed}: {:?}",
                r.violations.first()
            );
        }
    }
    for a in 1..=8 {
        for seed in 0..100 {
            let sq = generate_latin_square(a, seed).map_err(|e| e.to_string())?;
            ensure!(is_latin(&sq), "a={a} seed={seed}: {sq:?}");
        }
    }
    let d = one_factor(2, "B: random 2 E: random 2 in B", "");
    let mut counts: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let n = 10_000;
    for seed in 0..n {
        let p = generate_plan(&d, seed).unwrap();
        let a = p.column("A").unwrap();
        *counts
            .entry(p.rows.iter().map(|r| r[a]).collect())
            .or_default() += 1;
    }
    ensure!(counts.len() == 4, "assignments seen: {counts:?}");
    let freqs: Vec<f64> = counts.values().map(|&c| c as f64 / n as f64).collect();
    ensure!(
        freqs.iter().all(|f| (f - 0.25).abs() <= 0.05),
        "frequencies {freqs:?}"
    );
    Ok(format!("RCBD frequencies {freqs:.3?}"))
}

fn diagnostics_fire() -> Outcome {
    let fired = |kind: DiagnosticKind| -> BTreeMap<String, BTreeSet<String>> {
        GOLDEN
            .iter()
            .filter_map(|name| {
                let d = golden(name);
                let subjects: BTreeSet<String> = diagnostics(&d)
                    .into_iter()
                    .filter(|x| x.kind == kind)
                    .flat_map(|x| x.subjects)
                    .collect();
                (!subjects.is_empty()).then(|| (name.to_string(), subjects))
            })
            .collect()
    };
    let pseudo = fired(DiagnosticKind::PseudoReplication);
    let marg = fired(DiagnosticKind::MarginalityViolation);
    let keys = |m: &BTreeMap<String, BTreeSet<String>>| m.keys().cloned().collect::<Vec<_>>();
    ensure!(
        keys(&pseudo) == ["oats", "subsampling"],
        "pseudo-replication fired on {pseudo:?}"
    );
    ensure!(
        pseudo["oats"].contains("Variety") && !pseudo["oats"].contains("Nitrogen"),
        "oats {pseudo:?}"
    );
    ensure!(
        pseudo["subsampling"].contains("A"),
        "subsampling {pseudo:?}"
    );
    ensure!(
        keys(&marg) == ["marginality"],
        "marginality fired on {marg:?}"
    );
    ensure!(
        marg["marginality"].contains("B"),
        "marginality subjects {marg:?}"
    );
    Ok(format!(
        "pseudo-replication {pseudo:?}; marginality {marg:?}"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oats split-unit fixture", oats_fixture),
        ("closed-form degrees of freedom", closed_forms),
        ("denominator rule", denominators),
        ("df partition over random specs", df_partition),
        ("ANOVA projection oracle", anova_oracle),
        (
            "EMS Monte Carlo and denominator consistency",
            ems_monte_carlo,
        ),
        ("plan validity and uniformity", plan_validity),
        (
            "marginality and pseudo-replication diagnostics",
            diagnostics_fire,
        ),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {title} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {title}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
