use std::path::PathBuf;
use std::process::{Command, Output};

fn design(name: &str) -> PathBuf {
    [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "designs",
        &format!("{name}.design"),
    ]
    .iter()
    .collect()
}

fn hasse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hasse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_for_oats() {
    let o = hasse(&["table", design("oats").to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let dfs: Vec<(&str, &str)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            let name = f.next().unwrap();
            (name, f.nth(1).unwrap())
        })
        .collect();
    assert_eq!(
        dfs,
        [
            ("Block", "5"),
            ("Variety", "2"),
            ("Plot", "10"),
            ("Nitrogen", "3"),
            ("Variety:Nitrogen", "6"),
            ("Residual", "45")
        ]
    );
}

#[test]
fn formula_for_oats() {
    let path = design("oats");
    let o = hasse(&["formula", path.to_str().unwrap()]);
    assert_eq!(
        stdout(&o),
        "Variety*Nitrogen+Error(Block/Plot)\nVariety*Nitrogen+(1|Block/Plot)\n"
    );
    let o = hasse(&["formula", path.to_str().unwrap(), "--dialect", "pipe"]);
    assert_eq!(stdout(&o), "Variety*Nitrogen+(1|Block/Plot)\n");
}

#[test]
fn plan_is_byte_identical_across_runs() {
    let path = design("rcbd");
    let a = hasse(&["plan", path.to_str().unwrap(), "--seed", "42"]);
    let b = hasse(&["plan", path.to_str().unwrap(), "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("B,E,A\n"));
    assert_eq!(stdout(&a).lines().count(), 21);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.design");
    std::fs::write(&bad, "design x { treatment {").unwrap();
    assert_eq!(
        hasse(&["check", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let unbalanced = dir.path().join("unbalanced.design");
    std::fs::write(
        &unbalanced,
        "design u { treatment { A: fixed 3 structure: A } unit { B: random 2 E: random 4 in B response: E } randomize { A -> E } }",
    )
    .unwrap();
    let o = hasse(&["check", unbalanced.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());

    let path = design("rcbd");
    assert_eq!(
        hasse(&["plan", path.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(
        hasse(&["check", path.to_str().unwrap()]).status.code(),
        Some(0)
    );
}

#[test]
fn render_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oats.dot");
    let o = hasse(&[
        "render",
        design("oats").to_str().unwrap(),
        "--format",
        "dot",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let dot = std::fs::read_to_string(out).unwrap();
    assert!(dot.starts_with("digraph"));
}

#[test]
fn anova_on_plan_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = design("rcbd");
    let plan = stdout(&hasse(&["plan", path.to_str().unwrap(), "--seed", "7"]));
    let mut lines = plan.lines();
    let mut csv = format!("{},response\n", lines.next().unwrap());
    for (i, l) in lines.enumerate() {
        let a: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        csv.push_str(&format!("{l},{}\n", a + (i % 3) as f64 * 0.5));
    }
    let data = dir.path().join("data.csv");
    std::fs::write(&data, csv).unwrap();
    let o = hasse(&[
        "anova",
        path.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("factor,df,ss,ms,f,denominator\n"));
    assert!(out.lines().any(|l| l.starts_with("A,3,")));

    let o = hasse(&["anova", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
