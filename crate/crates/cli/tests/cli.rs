use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nsmc(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsmc"))
        .args(args)
        .env(nsmc_cli::OUTPUT_ROOT_VAR, root)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_ZZS: &str = r#"
seed = 5
[model]
id = "laplace"
dim = 3
[sampler]
id = "zzs"
horizon = 200.0
dt = 0.5
[output]
dir = "zzs"
"#;

const SMALL_BPS: &str = r#"
seed = 6
[model]
id = "laplace"
dim = 3
[sampler]
id = "bps"
horizon = 200.0
dt = 0.5
[output]
dir = "bps"
"#;

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", &SMALL_ZZS.replace("\"zzs\"\nhorizon", "\"slice\"\nhorizon"));
    let out = nsmc(tmp.path(), &["run", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slice"));

    let missing = tmp.path().join("nope.toml");
    let out = nsmc(tmp.path(), &["run", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = nsmc(tmp.path(), &["emit-plotdata", tmp.path().join("empty").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_write_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zzs.toml", SMALL_ZZS);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(nsmc(&a, &["run", &cfg]).status.success());
    assert!(nsmc(&b, &["run", &cfg]).status.success());
    for file in ["samples.csv", "events.log"] {
        assert_eq!(fs::read(a.join("zzs").join(file)).unwrap(), fs::read(b.join("zzs").join(file)).unwrap());
    }
    let events = lines(&a.join("zzs/events.log"));
    assert_eq!(events[0], "time,kind,coordinate");
    assert!(events.len() > 100);
}

#[test]
fn plot_data_is_consistent_with_the_chain() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zzs.toml", SMALL_ZZS);
    assert!(nsmc(tmp.path(), &["run", &cfg]).status.success());
    let run = tmp.path().join("zzs");
    let out = nsmc(tmp.path(), &["emit-plotdata", run.to_str().unwrap(), "--coords", "0,2", "--bins", "20", "--max-lag", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let n_samples = lines(&run.join("samples.csv")).len() - 1;
    for i in [0, 2] {
        let trace = lines(&run.join(format!("trace_{i}.csv")));
        assert_eq!(trace.len() - 1, n_samples);

        let acf = lines(&run.join(format!("acf_{i}.csv")));
        assert_eq!(acf.len() - 1, 11);
        let first: Vec<f64> = acf[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 1.0]);

        let hist = lines(&run.join(format!("histogram_{i}.csv")));
        assert_eq!(hist.len() - 1, 20);
        let total: usize = hist[1..]
            .iter()
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, n_samples);
    }
    assert!(!run.join("trace_1.csv").exists());

    let out = nsmc(tmp.path(), &["emit-plotdata", run.to_str().unwrap(), "--coords", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_writes_a_table_with_a_stable_header() {
    let tmp = TempDir::new().unwrap();
    let zzs = write_config(tmp.path(), "zzs.toml", SMALL_ZZS);
    let bps = write_config(tmp.path(), "bps.toml", SMALL_BPS);
    let out = nsmc(tmp.path(), &["compare", &zzs, &bps, "--metric", "ks", "--budget", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "sampler,config,wall_time,samples,ks_statistic_max,ks_p_min");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("zzs,") && rows[2].starts_with("bps,"));
    assert_eq!(fs::read_to_string(tmp.path().join("comparison_ks.csv")).unwrap(), table);

    let out = nsmc(tmp.path(), &["compare", &zzs, &bps, "--metric", "mse-over-time", "--budget", "5"]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().next(), Some("sampler,config,fraction,time,mse"));
    assert_eq!(table.lines().count(), 1 + 2 * 10);
}

#[test]
fn compare_rejects_invalid_requests() {
    let tmp = TempDir::new().unwrap();
    let zzs = write_config(tmp.path(), "zzs.toml", SMALL_ZZS);
    let out = nsmc(tmp.path(), &["compare", &zzs, "--metric", "ks"]);
    assert_eq!(out.status.code(), Some(2));

    let other = write_config(tmp.path(), "gauss.toml", &SMALL_BPS.replace("\"laplace\"", "\"gaussian\""));
    let out = nsmc(tmp.path(), &["compare", &zzs, &other, "--metric", "ess-per-sec"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different model"));

    let same_dir = write_config(tmp.path(), "zzs2.toml", &SMALL_ZZS.replace("seed = 5", "seed = 9"));
    let out = nsmc(tmp.path(), &["compare", &zzs, &same_dir, "--metric", "ks"]);
    assert_eq!(out.status.code(), Some(2));

    let bps = write_config(tmp.path(), "bps.toml", SMALL_BPS);
    let out = nsmc(tmp.path(), &["compare", &zzs, &bps, "--metric", "speed"]);
    assert_eq!(out.status.code(), Some(2));
}
