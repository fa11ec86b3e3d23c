use std::fs;
use std::path::Path;
use std::process::Command;

use rlwindow::harness::{parse_ticks_csv, run, RunConfig};

const BIN: &str = env!("CARGO_BIN_EXE_rlwindow");

fn small_config(seeds: &str, methods: &str) -> String {
    format!(
        r#"
name = "small"
seeds = {seeds}
methods = {methods}

[stream]
kind = "synthetic"
dims = 3
length = 3000
classes = 3

[stream.drift]
period = 1000
affected_dims = [0, 1, 2]
mean_delta = 3.0

[agent]
preset = "compact"
batch_size = 16
hidden = [16, 8]
train_every = 2
epsilon = {{ start = 1.0, end = 0.05, steps = 1500 }}

[drift_eval]
horizon = 300
skip = 50

[output]
eval_interval = 1000
"#
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_all_outputs_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[1, 2]", r#"["rl-window", "fixed", "adwin", "stream-x"]"#));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = cli(&["run", "--config", &cfg, "--out-dir", dir.to_str().unwrap(), "--ticks"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for m in ["rl-window", "fixed", "adwin", "stream-x"] {
        for s in [1, 2] {
            assert!(a.join(format!("metrics_{m}_{s}.csv")).exists());
            assert!(a.join(format!("ticks_{m}_{s}.csv")).exists());
        }
    }
    assert!(a.join("report.md").exists());
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
}

/// Independent recomputation of the per-seed "all" row from the tick log.
#[test]
fn metrics_recompute_from_tick_log() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[3]", r#"["rl-window", "adwin"]"#));
    let out_dir = tmp.path().join("o");
    let out = cli(&["run", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap(), "--ticks"]);
    assert!(out.status.success());
    for m in ["rl-window", "adwin"] {
        let ticks = fs::read_to_string(out_dir.join(format!("ticks_{m}_3.csv"))).unwrap();
        let metrics = fs::read_to_string(out_dir.join(format!("metrics_{m}_3.csv"))).unwrap();

        let mut rdr = csv::Reader::from_reader(ticks.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
        let (cw, cc, cwin, cts, ccost, clat) = (col("warmup"), col("correct"), col("window"), col("timestamp"), col("cost_ms"), col("latency_ms"));
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).filter(|r| &r[cw] == "false").collect();
        let n = rows.len() as f64;
        let acc = rows.iter().filter(|r| &r[cc] == "true").count() as f64 / n;
        let win: Vec<f64> = rows.iter().map(|r| r[cwin].parse().unwrap()).collect();
        let avg_w = win.iter().sum::<f64>() / n;
        let stab = win.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>() / (n - 1.0);
        let cost = rows.iter().map(|r| r[ccost].parse::<f64>().unwrap()).sum::<f64>() / n;
        let lat = rows.iter().map(|r| r[clat].parse::<f64>().unwrap()).sum::<f64>() / n;
        let span_acc = |lo: i64, hi: i64| {
            let v: Vec<_> = rows
                .iter()
                .filter(|r| (lo..hi).contains(&r[cts].parse::<i64>().unwrap()))
                .collect();
            v.iter().filter(|r| &r[cc] == "true").count() as f64 / v.len() as f64
        };
        let robust = [1000i64, 2000]
            .iter()
            .map(|&d| span_acc(d + 50, d + 300) - span_acc(d - 300, d))
            .sum::<f64>()
            / 2.0;

        let mut mr = csv::Reader::from_reader(metrics.as_bytes());
        let all = mr.records().map(Result::unwrap).find(|r| &r[0] == "all").unwrap();
        let got = |i: usize| all[i].parse::<f64>().unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert_eq!(got(1), n, "{m}: tick count");
        assert!(close(got(2), acc), "{m}: accuracy {} vs {acc}", got(2));
        assert!(close(got(3), avg_w), "{m}: avg window");
        assert!(close(got(4), cost), "{m}: cost");
        assert!(close(got(5), robust), "{m}: robustness {} vs {robust}", got(5));
        assert!(close(got(6), stab), "{m}: stability");
        assert!(close(got(7), lat), "{m}: latency");
        // proxy timing: cost is exactly window * 0.01 ms
        for r in &rows {
            let w: f64 = r[cwin].parse().unwrap();
            assert_eq!(r[ccost].parse::<f64>().unwrap(), w * 0.01);
        }
        assert_eq!(parse_ticks_csv(&ticks).unwrap().len(), 3000);
    }
}

#[test]
fn seed_order_leaves_aggregate_unchanged() {
    let a = RunConfig::from_toml(&small_config("[1, 2, 3]", r#"["fixed", "adwin"]"#), None).unwrap();
    let b = RunConfig::from_toml(&small_config("[3, 1, 2]", r#"["fixed", "adwin"]"#), None).unwrap();
    let ra = run(&a, None).unwrap();
    let rb = run(&b, None).unwrap();
    assert_eq!(ra.rows, rb.rows);
}

#[test]
fn single_seed_override_zero_std() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[1, 2, 3]", r#"["fixed"]"#));
    let out_dir = tmp.path().join("o");
    let out = cli(&["run", "--config", &cfg, "--seed-override", "7", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out_dir.join("metrics_fixed_7.csv").exists());
    assert!(!out_dir.join("metrics_fixed_1.csv").exists());
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    let mut r = csv::Reader::from_reader(agg.as_bytes());
    let h = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    for (name, v) in h.iter().zip(row.iter()) {
        if name.ends_with("_std") {
            assert!(v == "0.000000" || v == "NA", "{name} = {v}");
        }
    }
    assert_eq!(&row[h.iter().position(|c| c == "avg_window_mean").unwrap()], "100.000000");
}

#[test]
fn exit_codes_for_bad_config_and_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "seeds = []\n[stream]\nkind = \"synthetic\"\ndims = 0\nlength = 5\nclasses = 1\n");
    let out = cli(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["seeds", "dims", "class count"] {
        assert!(err.contains(needle), "missing {needle}: {err}");
    }
    let missing = tmp.path().join("nope.toml");
    assert_eq!(cli(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(1));

    // the CSV names a file that does not exist: fails at run time
    let text = "methods = [\"fixed\"]\n[stream]\nkind = \"csv\"\npath = \"absent.csv\"\nclasses = 2\n[stream.schema]\nhas_header = true\ntimestamp = \"row-index\"\nvalues = [\"x0\"]\nlabel = \"label\"\n";
    let cfg = write_config(tmp.path(), text);
    let out = cli(&["run", "--config", &cfg, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("o").join("error_fixed_1.log").exists());

    let out = cli(&["report", tmp.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_data_round_trips_through_a_csv_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[4]", r#"["fixed"]"#));
    let data = tmp.path().join("stream.csv");
    let out = cli(&["gen-data", "--config", &cfg, "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = fs::read_to_string(&data).unwrap().lines().next().unwrap().to_string();
    let cols: Vec<&str> = header.split(',').collect();
    let values: Vec<String> = cols.iter().filter(|c| c.starts_with('v')).map(|c| format!("\"{c}\"")).collect();
    let ts = cols[0];
    let label = cols.last().unwrap();
    let csv_cfg = format!(
        "name = \"small\"\nseeds = [4]\nmethods = [\"fixed\"]\n[stream]\nkind = \"csv\"\npath = \"stream.csv\"\nclasses = 3\ndrift_ticks = [1000, 2000]\n[stream.schema]\nhas_header = true\ntimestamp = {{ column = \"{ts}\" }}\nvalues = [{}]\nlabel = \"{label}\"\n[drift_eval]\nhorizon = 300\nskip = 50\n[output]\neval_interval = 1000\n",
        values.join(", ")
    );
    let from_csv = RunConfig::from_toml(&csv_cfg, Some(tmp.path())).unwrap();
    let synthetic = RunConfig::from_toml(&small_config("[4]", r#"["fixed"]"#), None).unwrap();
    let a = run(&from_csv, None).unwrap();
    let b = run(&synthetic, None).unwrap();
    // written at full precision, so the replayed stream behaves identically
    assert_eq!(a.rows[0].stats, b.rows[0].stats);
}

#[test]
fn ablate_and_report_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[1]", r#"["rl-window"]"#));
    let out_dir = tmp.path().join("abl");
    let out = cli(&[
        "ablate",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--variant",
        "full",
        "--variant",
        "without-stability-penalty",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    assert!(agg.contains("\nwithout-stability-penalty,"));

    let merged = tmp.path().join("merged");
    let out = cli(&["report", out_dir.join("aggregate.csv").to_str().unwrap(), "--out-dir", merged.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(merged.join("aggregate.csv")).unwrap(), agg);
    assert!(fs::read_to_string(merged.join("report.md")).unwrap().contains("| full |"));
}
