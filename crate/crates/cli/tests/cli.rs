use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tump")).args(args).output().expect("binary runs")
}

fn demo() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/demo_trace.jsonl")
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decg_on_the_demo_trace() {
    let o = tump(&["solve", "--input", &demo(), "--algo", "decg", "--k", "3", "--gamma", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.by_ref().take(3).collect::<Vec<_>>(), ["B10", "B12", "B14"]);
    assert!(lines.next().unwrap().contains("satisfied=2/11"), "{out}");
}

#[test]
fn simg_list_goes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("upgrade.txt");
    let o = tump(&[
        "solve", "--input", &demo(), "--algo", "simg", "--k", "3", "--gamma", "0.33", "--out", s(&list),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&list).unwrap(), "B10\nB11\nB12\n");
    assert!(stdout(&o).contains("satisfied=8/11"));
}

#[test]
fn zero_budget_gives_an_empty_list() {
    let o = tump(&["solve", "--input", &demo(), "--algo", "incg", "--k", "0", "--gamma", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("incg k=0") && out.contains("satisfied=0/11"), "{out}");
}

#[test]
fn budget_fraction_is_rounded() {
    let o = tump(&["solve", "--input", &demo(), "--algo", "decg", "--k-prime", "0.2", "--gamma", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("decg k=3 "));
}

#[test]
fn star_generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = tump(&["generate", "--preset", "star", "--seed", "7", "--scale", "0.2", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["trace.jsonl", "stations.jsonl", "manifest.json"] {
        let x = fs::read(a.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let o = tump(&["solve", "--input", s(&a.join("trace.jsonl")), "--algo", "decg", "--k-prime", "0.2", "--gamma", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn nyc_preset_manifest_records_full_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = tump(&["generate", "--preset", "nyc-like", "--seed", "1", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"num_trajectories\": 50000"), "{manifest}");
    assert!(manifest.contains("\"num_stations\": 13860"), "{manifest}");
    let lines = fs::read_to_string(dir.path().join("trace.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 50000);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("city.toml");
    fs::write(&cfg, "topology = \"star\"\nseed = 1\nnum_trajectories = 10\nbogus_key = 3\n").unwrap();
    let o = tump(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tump(&["generate", "--preset", "star", "--scale=0", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exact_over_the_cap_exits_4() {
    let o = tump(&["solve", "--input", &demo(), "--algo", "exact", "--k", "5", "--gamma", "1", "--cap", "5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("cap"));
}

#[test]
fn missing_input_exits_5() {
    let o = tump(&["solve", "--input", "/nonexistent/trace.jsonl", "--algo", "simg", "--k", "1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(tump(&["solve", "--input", &demo()]).status.code(), Some(2));
    assert_eq!(tump(&["solve", "--input", &demo(), "--algo", "best", "--k", "1", "--gamma", "1"]).status.code(), Some(2));
}

#[test]
fn sweep_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        format!(
            "algorithms = [\"simg\", \"decg\"]\nk_prime = [0.2]\ngamma = [1.0, 0.33]\n\n[source.trace]\npath = \"{}\"\n",
            demo()
        ),
    )
    .unwrap();
    let results = dir.path().join("results.csv");
    let o = tump(&["sweep", "--spec", s(&spec), "--out", s(&results)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&results).unwrap();
    assert!(csv.starts_with("algorithm,k_prime,gamma,cohort,satisfied_count,satisfied_fraction,elapsed_ms,seed,status\n"));
    let decg = csv.lines().find(|l| l.starts_with("decg,0.2,1.0,all,")).unwrap_or_else(|| panic!("{csv}"));
    assert!(decg.starts_with("decg,0.2,1.0,all,2,"), "{decg}");

    let o = tump(&["compare", s(&results)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("decg,0.2,0.33,all,simg,8,11,1.375,")), "{}", stdout(&o));

    let o = tump(&["compare", s(&results), s(&results)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    let body: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(body.len(), 4);
    assert!(body.iter().all(|l| l.split(',').nth(7) == Some("1.0")), "{table}");
}

#[test]
fn empty_gamma_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        format!("algorithms = [\"decg\"]\nk_prime = [0.2]\ngamma = []\n\n[source.trace]\npath = \"{}\"\n", demo()),
    )
    .unwrap();
    let o = tump(&["sweep", "--spec", s(&spec), "--out", s(&dir.path().join("r.csv"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("gamma"));
    assert!(!dir.path().join("r.csv").exists());
}
