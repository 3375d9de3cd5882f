use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pcombine(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcombine"))
        .args(args)
        .current_dir(dir)
        .env_remove("PCOMBINE_TABLE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn pvalue_column(csv_text: &str) -> Vec<f64> {
    csv_text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect()
}

#[test]
fn combine_fisher_two_values() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("one_row_K2.csv"), "0.1,0.5\n").unwrap();
    let o = pcombine(&["combine", "--method", "fisher", "--input", "one_row_K2.csv", "--out", "res.csv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("res.csv")).unwrap();
    assert!(text.starts_with("id,method,statistic,pvalue,calibration,j_star"));
    let p = pvalue_column(&text)[0];
    assert!((p - 0.19979).abs() < 5e-6, "{p}");
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn combine_reports_errors_by_exit_code() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("x.csv"), "0.1,0.5\n").unwrap();
    fs::write(tmp.path().join("bad.csv"), "0.1,1.5\n").unwrap();

    let no_tau = pcombine(&["combine", "--method", "tfhard", "--input", "x.csv"], tmp.path());
    assert_eq!(no_tau.status.code(), Some(1));
    assert!(stderr(&no_tau).contains("tau"));

    let unknown = pcombine(&["combine", "--method", "nope", "--input", "x.csv"], tmp.path());
    assert_eq!(unknown.status.code(), Some(1));

    let malformed = pcombine(&["combine", "--method", "fisher", "--input", "bad.csv"], tmp.path());
    assert_eq!(malformed.status.code(), Some(2));

    let missing = pcombine(&["combine", "--method", "fisher", "--input", "absent.csv"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));

    let bad_flag = pcombine(&["combine", "--no-such-flag"], tmp.path());
    assert_eq!(bad_flag.status.code(), Some(1));
}

#[test]
fn combine_with_tau_and_ids() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("x.csv"), "id,p1,p2,p3\ngeneA,0.01,0.2,0.9\ngeneB,0.5,0.5,0.5\n").unwrap();
    let o = pcombine(
        &["combine", "--method", "tfhard", "--tau", "0.05", "--input", "x.csv", "--B", "2000", "--table-dir", "t"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("geneA") && out.contains("geneB"));
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn table_critical_value_and_cache() {
    let tmp = TempDir::new().unwrap();
    let args = ["table", "--method", "fisher", "--K", "2", "--B", "1000000", "--alpha", "0.05", "--table-dir", "tables"];
    let first = pcombine(&args, tmp.path());
    assert!(first.status.success(), "{}", stderr(&first));
    let line = stdout(&first).lines().nth(1).unwrap().to_string();
    let crit: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!((crit - 9.488).abs() < 0.05, "{crit}");
    assert!(stderr(&first).contains("wrote"));

    let files: Vec<_> = fs::read_dir(tmp.path().join("tables"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .collect();
    assert_eq!(files.len(), 1);
    let bytes = fs::read(&files[0]).unwrap();

    let second = pcombine(&args, tmp.path());
    assert!(second.status.success());
    assert!(stderr(&second).contains("cache hit:"));
    assert_eq!(stdout(&second), stdout(&first));
    assert_eq!(fs::read(&files[0]).unwrap(), bytes);
}

#[test]
fn table_rejects_unstable_tail() {
    let tmp = TempDir::new().unwrap();
    let o = pcombine(&["table", "--method", "fisher", "--K", "2", "--B", "100", "--alpha", "0.01"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn budget_guard_exits_with_resource_code() {
    let tmp = TempDir::new().unwrap();
    let o = pcombine(
        &["table", "--method", "afp", "--K", "50", "--B", "100000", "--max-cells", "1000", "--table-dir", "t"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn synth_and_meta_are_deterministic_across_threads() {
    let tmp = TempDir::new().unwrap();
    let synth = pcombine(&["synth", "--preset", "concordant", "--seed", "7", "--out", "data"], tmp.path());
    assert!(synth.status.success(), "{}", stderr(&synth));
    assert!(tmp.path().join("data/design.csv").exists());
    assert!(tmp.path().join("data/truth.csv").exists());

    let run = |out: &str, threads: &str| {
        let o = pcombine(
            &[
                "meta", "--expr-dir", "data", "--design", "data/design.csv", "--methods", "fisher,afp,fe,fecs",
                "--B", "5000", "--seed", "7", "--threads", threads, "--table-dir", "tables", "--out", out,
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), fs::read(tmp.path().join(out).join("results.csv")).unwrap())
    };
    let (summary_a, results_a) = run("meta_a", "1");
    let (summary_b, results_b) = run("meta_b", "2");
    assert_eq!(results_a, results_b);
    assert_eq!(summary_a, summary_b);
    assert!(summary_a.contains("FE only:"));
    for name in ["e_matrix.csv", "skipped.csv", "manifest.json"] {
        assert!(tmp.path().join("meta_a").join(name).exists(), "{name}");
    }
}

#[test]
fn meta_on_null_data_finds_almost_nothing() {
    let tmp = TempDir::new().unwrap();
    assert!(pcombine(&["synth", "--preset", "null", "--seed", "3", "--out", "data"], tmp.path()).status.success());
    let o = pcombine(
        &["meta", "--expr-dir", "data", "--design", "data/design.csv", "--methods", "fisher,fe", "--B", "5000", "--out", "m"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("m/results.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let q_col = header.iter().position(|h| *h == "q_value").expect("q_value column");
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let hits = rows.iter().filter(|r| r[q_col].parse::<f64>().unwrap() <= 0.05).count();
    assert!(hits * 100 <= rows.len(), "{hits} of {}", rows.len());
}

#[test]
fn slope_ztest_converges() {
    let tmp = TempDir::new().unwrap();
    let o = pcombine(&["slope", "--test", "ztest", "--mu", "1.5", "--nmax", "10000", "--out", "s"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let last = stdout(&o).lines().find(|l| l.starts_with("n=10000")).unwrap().to_string();
    let est: f64 = last.split("slope=").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((est - 2.25).abs() < 0.1, "{est}");
    assert!(fs::read_to_string(tmp.path().join("s/slope.csv")).unwrap().starts_with("test,theta,n,slope_estimate,c_theory"));
}

#[test]
fn simulate_null_preset_holds_size() {
    let tmp = TempDir::new().unwrap();
    let o = pcombine(
        &["simulate", "--preset", "null", "--methods", "fisher,stouffer", "--reps", "4000", "--out", "sim"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("sim/power.csv")).unwrap();
    assert!(text.starts_with("method,K,ell,mu0,alpha,sidedness,reps,power,mc_se,seed"));
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let power: f64 = f[7].parse().unwrap();
        let se = (0.05f64 * 0.95 / 4000.0).sqrt();
        assert!((power - 0.05).abs() < 4.0 * se, "{line}");
    }
    assert!(tmp.path().join("sim/summary.txt").exists());
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("x.csv"), "0.1,0.5\n").unwrap();
    fs::write(tmp.path().join("cfg.toml"), "seed = 5\nB = 3000\n").unwrap();
    let o = pcombine(
        &["--config", "cfg.toml", "--seed", "6", "combine", "--method", "fisher", "--input", "x.csv", "--out", "r/res.csv"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("r/manifest.json")).unwrap()).unwrap();
    let text = manifest.to_string();
    assert!(text.contains("\"seed\":6"), "{text}");
    assert!(text.contains("3000"), "{text}");

    fs::write(tmp.path().join("bad.toml"), "sede = 5\n").unwrap();
    let bad = pcombine(&["--config", "bad.toml", "combine", "--method", "fisher", "--input", "x.csv"], tmp.path());
    assert_eq!(bad.status.code(), Some(1));
}
