use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn advhdh(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advhdh")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn estimate(report: &Value, quantity: &str) -> Option<f64> {
    report["estimates"].as_array()?.iter().find(|e| e["quantity"] == quantity)?["value"].as_f64()
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "x1,x2\n1,0\n0,1\n").unwrap();
    std::fs::write(dir.path().join("pair.csv"), "x1,x2\n0.3,-0.2\n0.9,0.4\n-0.5,0.7\n").unwrap();
    std::fs::write(dir.path().join("labelled.csv"), "x1,x2,label\n1,0.2,1\n-1,0.1,-1\n0.05,1,1\n-0.3,-0.8,-1\n").unwrap();
    dir
}

#[test]
fn regression_complexity_of_the_unit_basis() {
    let dir = workspace();
    let o = advhdh(
        dir.path(),
        &[
            "complexity",
            "--data",
            "e.csv",
            "--class",
            "linear-regression",
            "--p",
            "2",
            "--W",
            "1",
            "--method",
            "exact",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/complexity.json"));
    assert_eq!(estimate(&r, "std"), Some(1.5));
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["holds"] == true));
}

#[test]
fn zero_budget_makes_adv_equal_std() {
    let dir = workspace();
    for class in ["linear-classification", "linear-regression"] {
        let o =
            advhdh(dir.path(), &["complexity", "--data", "pair.csv", "--class", class, "--p", "1", "--eps", "0", "--out", "r"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let r = json(dir.path().join("r/complexity.json"));
        for suffix in ["", "-lower", "-upper"] {
            assert_eq!(estimate(&r, &format!("adv{suffix}")), estimate(&r, &format!("std{suffix}")), "{class}{suffix}");
        }
        assert!(estimate(&r, "adv").or(estimate(&r, "adv-lower")).is_some());
        assert_eq!(estimate(&r, "adv-gap-bound"), Some(0.0));
    }
}

#[test]
fn missing_label_column_is_a_validation_error() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["train", "--data", "e.csv", "--out", "r"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`label`"), "{}", stderr(&o));
}

#[test]
fn missing_input_file_is_a_validation_error() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["complexity", "--data", "nope.csv", "--out", "r"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn concentration_only_bound() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["bound", "--kind", "standard", "--n-source", "100", "--n-target", "400", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/bound.json"))["report"].clone();
    let conc = |n: f64| 3.0 * (1.0f64 / 0.05).ln().sqrt() / n.sqrt();
    assert!((r["concentration_source"].as_f64().unwrap() - conc(100.0)).abs() < 1e-12);
    assert!((r["concentration_target"].as_f64().unwrap() - conc(400.0)).abs() < 1e-12);
    assert!((r["total"].as_f64().unwrap() - conc(100.0) - conc(400.0)).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&o.stdout).contains("concentration (source)"));
}

#[test]
fn invalid_confidence_exits_2() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["bound", "--n-source", "10", "--n-target", "10", "--confidence", "1.5", "--out", "r"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("confidence"));
}

#[test]
fn computed_bound_is_byte_identical_across_runs() {
    let dir = workspace();
    let run = |out: &str| {
        let args = [
            "bound",
            "--source",
            "e.csv",
            "--target",
            "pair.csv",
            "--eps",
            "0.05",
            "--source-risk",
            "0.1",
            "--no-timestamp",
            "--out",
            out,
        ];
        let o = advhdh(dir.path(), &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("bound.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a).unwrap();
    assert!(r["report"]["discrepancy"].as_f64().unwrap() > 0.0);
    assert_eq!(r["computed"].as_array().unwrap().len(), 3);
    assert!(r.get("generated_unix").is_none());
}

#[test]
fn timestamps_are_added_unless_disabled() {
    let dir = workspace();
    advhdh(dir.path(), &["bound", "--n-source", "5", "--n-target", "5", "--out", "r"]);
    assert!(json(dir.path().join("r/bound.json"))["generated_unix"].as_u64().is_some());
}

#[test]
fn subset_sum_reference_instance() {
    let dir = workspace();
    std::fs::write(dir.path().join("i.json"), r#"{"p":[0.5,0.3,0.2],"p_prime":[0.2,0.3,0.5],"ell":[1,0,0],"free":[2,3]}"#)
        .unwrap();
    let o = advhdh(dir.path(), &["subset-sum", "--instance", "i.json", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/subset-sum.json"));
    assert_eq!(r["solvers_agree"], true);
    for s in ["brute-force", "meet-in-middle"] {
        assert_eq!(r["solutions"][s]["optimum"].as_f64(), Some(0.3));
    }
    // 0-based indices are rejected on the wire
    std::fs::write(dir.path().join("z.json"), r#"{"p":[1.0],"p_prime":[1.0],"ell":[0],"free":[0]}"#).unwrap();
    assert_eq!(code(&advhdh(dir.path(), &["subset-sum", "--instance", "z.json", "--out", "r"])), 2);
}

#[test]
fn transfer_check_holds_on_a_small_pair() {
    let dir = workspace();
    let o = advhdh(
        dir.path(),
        &[
            "transfer-check",
            "--support",
            "labelled.csv",
            "--mass-t",
            "0.25,0.25,0.25,0.25",
            "--mass-t-prime",
            "0.1,0.2,0.3,0.4",
            "--w",
            "1,-0.5",
            "--eps",
            "0.1",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/transfer-check.json"));
    assert_eq!(r["comparison"]["robust"]["holds"], true);
    assert_eq!(r["comparison"]["vstar_monotone"], true);
}

#[test]
fn train_reports_robust_accuracy() {
    let dir = workspace();
    let o = advhdh(
        dir.path(),
        &[
            "train",
            "--data",
            "labelled.csv",
            "--test",
            "labelled.csv",
            "--mode",
            "adversarial",
            "--eps",
            "2/255",
            "--epochs",
            "30",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/train.json"));
    for split in ["train", "test"] {
        let s = &r[split];
        assert!(s["ra"].as_f64().unwrap() <= s["pgd_ra"].as_f64().unwrap());
        assert!(s["pgd_ra"].as_f64().unwrap() <= s["sa"].as_f64().unwrap());
    }
    assert_eq!(r["model"]["trained"]["config"]["epochs"], 30);
}

#[test]
fn verify_restricted_to_one_battery() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["verify", "--only", "subset-sum", "--instances", "25", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/verify.json"));
    let b = r["batteries"].as_array().unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b[0]["battery"], "subset-sum");
    assert_eq!(b[0]["instances"], 25);
    assert!(!dir.path().join("r/violations.json").exists());
}

#[test]
fn unknown_battery_exits_2() {
    let dir = workspace();
    assert_eq!(code(&advhdh(dir.path(), &["verify", "--only", "everything"])), 2);
}

#[test]
fn replaying_a_failing_instance_reproduces_it() {
    // A recorded 0-1 counterexample from the lower-bound battery.
    let dir = workspace();
    let seed = "16763571632668497736";
    let run = |out: &str| {
        let o = advhdh(dir.path(), &["verify", "--only", "lower-bounds", "--replay", seed, "--no-timestamp", "--out", out]);
        assert_eq!(code(&o), 1, "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("replay.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(r["replay"]["seed"].as_u64(), Some(16763571632668497736));
    assert!(r["replay"]["checks"].as_array().unwrap().iter().any(|c| c["holds"] == false));
}

#[test]
fn replay_needs_a_single_battery() {
    let dir = workspace();
    assert_eq!(code(&advhdh(dir.path(), &["verify", "--replay", "7"])), 2);
}

#[test]
fn sweep_matches_the_golden_file_on_one_thread() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["sweep", "--threads", "1", "--seed", "0", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/l1_sweep.csv");
    assert_eq!(std::fs::read_to_string(dir.path().join("r/sweep.csv")).unwrap(), std::fs::read_to_string(golden).unwrap());
}

#[test]
fn small_sweep_zero_budget_rows_show_clean_drops() {
    let dir = workspace();
    std::fs::write(dir.path().join("c.toml"), "[domains]\nn = 120\nd = 4\n[training]\nepochs = 20\n").unwrap();
    let o = advhdh(dir.path(), &["--config", "c.toml", "sweep", "--mu", "0,1e-2", "--eps", "0,4/255", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("r/sweep.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("mu,eps,ra_source,ra_target,delta,sa_source,sa_target"));
    let rows: Vec<Vec<f64>> = rows.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows.iter().filter(|r| r[1] == 0.0) {
        assert!((r[4] - (r[5] - r[6])).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn empty_grid_exits_2() {
    let dir = workspace();
    let o = advhdh(dir.path(), &["sweep", "--mu", "--out", "r"]);
    assert_eq!(code(&o), 2);
    std::fs::write(dir.path().join("c.toml"), "[sweep]\neps = []\n").unwrap();
    assert_eq!(code(&advhdh(dir.path(), &["--config", "c.toml", "sweep", "--out", "r"])), 2);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = workspace();
    std::fs::write(
        dir.path().join("c.toml"),
        "out = \"from-config\"\n[complexity]\nclass = \"linear-regression\"\nmethod = \"exact\"\nW = 2.0\n",
    )
    .unwrap();
    // W = 2 from the file scales the value by 4
    assert_eq!(code(&advhdh(dir.path(), &["--config", "c.toml", "complexity", "--data", "e.csv"])), 0);
    assert_eq!(estimate(&json(dir.path().join("from-config/complexity.json")), "std"), Some(6.0));
    // the flag wins
    assert_eq!(code(&advhdh(dir.path(), &["--config", "c.toml", "complexity", "--data", "e.csv", "--W", "1"])), 0);
    assert_eq!(estimate(&json(dir.path().join("from-config/complexity.json")), "std"), Some(1.5));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = workspace();
    std::fs::write(dir.path().join("c.toml"), "[complexity]\nweight = 2.0\n").unwrap();
    let o = advhdh(dir.path(), &["--config", "c.toml", "complexity", "--data", "e.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("weight"));
}

#[test]
fn zero_threads_exits_2() {
    let dir = workspace();
    assert_eq!(code(&advhdh(dir.path(), &["--threads", "0", "bound", "--n-source", "1", "--n-target", "1"])), 2);
}

#[test]
fn relu_witness_sits_below_its_upper_bound() {
    let dir = workspace();
    let o = advhdh(
        dir.path(),
        &[
            "complexity",
            "--data",
            "pair.csv",
            "--class",
            "two-layer-relu",
            "--W",
            "1",
            "--A",
            "1",
            "--m",
            "3",
            "--pairs",
            "200",
            "--eps",
            "0.1",
            "--out",
            "r",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(dir.path().join("r/complexity.json"));
    assert!(estimate(&r, "std-witness-lower").unwrap() <= estimate(&r, "std-upper-bound").unwrap());
    assert!(estimate(&r, "std-upper-bound").unwrap() <= estimate(&r, "adv-upper-bound").unwrap());
    assert_eq!(r["checks"].as_array().unwrap().len(), 2);
}
