use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn macmem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macmem"))
        .args(args)
        .env("MACMEM_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    (header, r.records().map(Result::unwrap).collect())
}

fn column(header: &csv::StringRecord, row: &csv::StringRecord, name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    row[i].parse().unwrap()
}

#[test]
fn analyze_fo_and_memoryless() {
    let dir = tempfile::tempdir().unwrap();
    assert!(macmem(dir.path(), &["analyze", "--protocol", "fo", "--n", "5", "--feedback", "ternary"]).status.success());
    let (h, r) = rows(&dir.path().join("analyze.csv"));
    assert_eq!(r.len(), 1);
    assert!((column(&h, &r[0], "tau_total") - 0.7920).abs() < 1e-3);

    assert!(macmem(dir.path(), &["analyze", "--protocol", "memoryless:0.2", "--n", "5"]).status.success());
    let (h, r) = rows(&dir.path().join("analyze.csv"));
    assert!((column(&h, &r[0], "tau_total") - 0.4096).abs() < 1e-12);

    assert!(macmem(dir.path(), &["analyze", "--protocol", "fo", "--wlan", "80211a-mode8"]).status.success());
    let (h, r) = rows(&dir.path().join("analyze.csv"));
    assert!(column(&h, &r[0], "tau") <= 0.8136);
}

#[test]
fn every_csv_has_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["boundary", "--grid", "0.6", "--cloud", "20", "--seed", "4"],
        &["simulate", "--protocol", "fo", "--slots", "5000", "--seed", "9"],
        &["tdma", "--n", "2", "--seeds", "3"],
        &["analyze", "--protocol", "reservation", "--n", "2", "--feedback", "sf", "--allow-reducible"],
    ];
    for args in runs {
        let out = macmem(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let mut csvs: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    assert_eq!(csvs, ["analyze.csv", "boundary_ternary.csv", "cloud_ternary.csv", "simulate.csv", "tdma.csv"]);
    for name in &csvs {
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{name}.manifest.json"))).unwrap()).unwrap();
        assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
        assert!(manifest["output"].as_str().unwrap().ends_with(name.as_str()));
    }
    let (h, r) = rows(&dir.path().join("boundary_ternary.csv"));
    assert_eq!(&h.iter().take(4).collect::<Vec<_>>(), &["target_tau", "achieved_tau", "delay", "converged"]);
    assert_eq!(&r[0][3], "true");
    let (h, _) = rows(&dir.path().join("cloud_ternary.csv"));
    assert_eq!(h.iter().collect::<Vec<_>>(), ["tau", "delay", "seed_index"]);
}

#[test]
fn runs_repeat_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--protocol", "fo", "--slots", "20000", "--seed", "5", "--epsilon", "0.05"];
    assert!(macmem(a.path(), &args).status.success());
    assert!(macmem(b.path(), &args).status.success());
    assert_eq!(fs::read(a.path().join("simulate.csv")).unwrap(), fs::read(b.path().join("simulate.csv")).unwrap());
    let hash = |d: &Path| {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("simulate.csv.manifest.json")).unwrap()).unwrap();
        m["config_hash"].clone()
    };
    assert_eq!(hash(a.path()), hash(b.path()));
}

#[test]
fn trace_lines_follow_the_slot_format() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let out = macmem(dir.path(), &["simulate", "--protocol", "theorem1", "--feedback", "sf", "--slots", "200", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 200);
    for (t, line) in lines.iter().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0].parse::<usize>().unwrap(), t);
        let k: usize = f[1].parse().unwrap();
        match f[2] {
            "success" => assert!(k == 1 && f[3].parse::<usize>().is_ok()),
            "idle" => assert!(k == 0 && f[3] == "-"),
            "collision" => assert!(k >= 2 && f[3] == "-"),
            other => panic!("unknown outcome {other}"),
        }
    }
}

#[test]
fn compare_contains_every_family() {
    let dir = tempfile::tempdir().unwrap();
    assert!(macmem(dir.path(), &["compare", "--n", "5"]).status.success());
    let (h, r) = rows(&dir.path().join("compare.csv"));
    let family = h.iter().position(|c| c == "family").unwrap();
    for name in ["two-state", "memoryless", "one-slot", "tdma"] {
        assert!(r.iter().any(|row| &row[family] == name), "missing {name}");
    }
    let two_state_max = r.iter().filter(|row| &row[family] == "two-state").map(|row| column(&h, row, "tau")).fold(0.0, f64::max);
    assert!(two_state_max <= 5.0 / 9.0);
    let tdma = r.iter().find(|row| &row[family] == "tdma").unwrap();
    assert_eq!((column(&h, tdma, "tau"), column(&h, tdma, "delay")), (1.0, 2.5));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(macmem(dir.path(), &["analyze", "--protocol", "nonsense"]).status.code(), Some(2));
    assert_eq!(macmem(dir.path(), &["analyze", "--protocol", "memoryless:1.5"]).status.code(), Some(2));
    assert_eq!(macmem(dir.path(), &["boundary", "--grid", "0.5,0.6"]).status.code(), Some(2));
    assert_eq!(macmem(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(macmem(dir.path(), &["analyze", "--protocol", "reservation", "--n", "2", "--feedback", "sf"]).status.code(), Some(3));
    assert_eq!(macmem(dir.path(), &["analyze", "--protocol", "one-slot:1,1,1", "--feedback", "none"]).status.code(), Some(0));
}
