use std::path::Path;
use std::process::{Command, Output};

use tof_mcl::eval::{BatchSummary, ReportRow};
use tof_mcl::run::{prepare_field, run_with_policy, SensorSet};
use tof_mcl::sim::{builtin_world, load_sequence, read_jsonl, write_jsonl};
use tof_mcl::FilterConfig;

fn tofmcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tofmcl"))
        .args(args)
        .env_remove("TOFMCL_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tofmcl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = tofmcl(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<ReportRow> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn simulate_is_reproducible_from_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--seq", "seq02", "--seeds", "4", "--out", p(out)]);
    }
    let read = |d: &Path| std::fs::read_to_string(d.join("manifest.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let m: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["seeds"], serde_json::json!([4]));
    assert_eq!(m["schema_version"], 1);
}

#[test]
fn six_sequence_batch_replays_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seeds", "0", "--out", p(dir.path())]);
    let mut files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|f| f.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    assert_eq!(files.len(), 6);
    for f in &files {
        let bytes = std::fs::read(f).unwrap();
        let record = read_jsonl(&bytes[..]).unwrap();
        let mut again = Vec::new();
        write_jsonl(&record, &mut again).unwrap();
        assert_eq!(bytes, again, "{}", f.display());
    }
}

#[test]
fn unknown_world_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&["simulate", "--world", "atlantis", "--out", p(dir.path())], 2);
    assert!(err.contains("world.name"), "{err}");
}

#[test]
fn config_errors_are_line_anchored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "[filter]\nparticles = 64\nsigma = 1.0\n").unwrap();
    let err = fails(&["simulate", "--config", p(&cfg), "--out", p(dir.path())], 2);
    assert!(err.contains("exp.toml:3:1"), "{err}");
}

#[test]
fn single_particle_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seq", "seq01", "--seeds", "0", "--out", p(dir.path())]);
    let csv = dir.path().join("one.csv");
    ok(&["localize", "--data", p(dir.path()), "--particles", "1", "--out", p(&csv)]);
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    assert_eq!((r[0].sequence.as_str(), r[0].seed, r[0].particles), ("seq01", 0, 1));
    assert!(dir.path().join("one.csv.manifest.json").exists());
}

#[test]
fn policy_sweep_emits_comparable_blocks() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seq", "seq03,seq05", "--seeds", "1", "--out", p(dir.path())]);
    let csv = dir.path().join("sweep.csv");
    ok(&[
        "localize", "--data", p(dir.path()), "--particles", "128", "--policy", "fp32,fp32qm,fp16qm",
        "--out", p(&csv),
    ]);
    let r = rows(&csv);
    assert_eq!(r.len(), 6);
    let policies: Vec<&str> = r.iter().map(|r| r.policy.as_str()).collect();
    assert_eq!(policies, ["fp32", "fp32", "fp32qm", "fp32qm", "fp16qm", "fp16qm"]);
    for block in r.chunks(2) {
        let keys: Vec<_> = block.iter().map(|r| (r.sequence.clone(), r.seed)).collect();
        assert_eq!(keys, [("seq03".to_string(), 1), ("seq05".to_string(), 1)]);
    }
}

#[test]
fn two_sensors_do_at_least_as_well_as_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seeds", "0,1", "--out", p(dir.path())]);
    let csv = dir.path().join("sensors.csv");
    ok(&[
        "localize", "--data", p(dir.path()), "--particles", "2048", "--sensors", "both,front",
        "--out", p(&csv),
    ]);
    let r = rows(&csv);
    let successes = |s: &str| r.iter().filter(|r| r.sensors == s && r.success).count();
    assert_eq!(r.len(), 24);
    assert!(successes("both") >= successes("front"), "{} vs {}", successes("both"), successes("front"));
}

#[test]
fn localize_output_is_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seq", "seq06", "--seeds", "2", "--out", p(dir.path())]);
    let strip = |rows: Vec<ReportRow>| {
        rows.into_iter()
            .map(|r| (r.sequence, r.seed, r.convergence_tick, r.success, r.ate_rmse_m.map(f64::to_bits)))
            .collect::<Vec<_>>()
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["localize", "--data", p(dir.path()), "--particles", "512", "--out", p(&a)]);
    ok(&["localize", "--data", p(dir.path()), "--particles", "512", "--workers", "3", "--out", p(&b)]);
    assert_eq!(strip(rows(&a)), strip(rows(&b)));
}

#[test]
fn schema_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seq", "seq01", "--seeds", "0", "--out", p(dir.path())]);
    std::fs::remove_file(dir.path().join("manifest.json")).unwrap();
    let file = dir.path().join("seq01_s0.jsonl");
    let text = std::fs::read_to_string(&file).unwrap();
    std::fs::write(&file, text.replacen("\"version\":1", "\"version\":99", 1)).unwrap();
    let err = fails(&["localize", "--data", p(dir.path()), "--particles", "8"], 3);
    assert!(err.contains("v99"), "{err}");
}

#[test]
fn tampered_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seq", "seq01", "--seeds", "0", "--out", p(dir.path())]);
    let file = dir.path().join("seq01_s0.jsonl");
    let mut text = std::fs::read_to_string(&file).unwrap();
    text.push('\n');
    std::fs::write(&file, text).unwrap();
    let err = fails(&["localize", "--data", p(dir.path()), "--particles", "8"], 3);
    assert!(err.contains("manifest"), "{err}");
}

#[test]
fn single_run_eval_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seq", "seq04", "--seeds", "3", "--out", p(dir.path())]);
    let (runs, summary) = (dir.path().join("runs.csv"), dir.path().join("summary.csv"));
    ok(&["localize", "--data", p(dir.path()), "--particles", "1024", "--out", p(&runs)]);
    ok(&["eval", p(&runs), "--out", p(&summary)]);

    let record = load_sequence(&dir.path().join("seq04_s3.jsonl")).unwrap();
    let world = builtin_world(&record.header.world).unwrap();
    let config = FilterConfig { particles: 1024, seed: 3, ..FilterConfig::default() };
    let field = prepare_field(world.grid(), &config).unwrap();
    let run = run_with_policy(&record, world.grid(), &field, &config, SensorSet::Both).unwrap();
    let direct = BatchSummary::of(&[run]).unwrap();

    let mut r = csv::Reader::from_path(&summary).unwrap();
    let row: Vec<serde_json::Value> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            serde_json::json!({
                "runs": rec[3].parse::<usize>().unwrap(),
                "successes": rec[4].parse::<usize>().unwrap(),
                "ate": rec[6].parse::<f64>().ok(),
                "conv": rec[7].parse::<f64>().ok(),
            })
        })
        .collect();
    assert_eq!(row.len(), 1);
    assert_eq!(row[0]["runs"], 1);
    assert_eq!(row[0]["successes"], direct.successes);
    assert_eq!(row[0]["ate"].as_f64(), direct.median_ate);
    assert_eq!(row[0]["conv"].as_f64(), direct.median_convergence_time);
}

fn synthetic(sensors: &str, seq: usize, seed: u64, success: bool) -> ReportRow {
    ReportRow {
        sequence: format!("seq0{}", seq + 1),
        seed,
        particles: 4096,
        policy: "fp32".into(),
        sensors: sensors.into(),
        convergence_tick: success.then_some(30 + seq),
        convergence_time_s: success.then_some((30 + seq) as f64 / 15.0),
        success,
        ate_rmse_m: success.then_some(0.1),
        step_p10_ns: 1.0,
        step_p50_ns: 2.0,
        step_p90_ns: 3.0,
    }
}

#[test]
fn aggregate_gives_one_row_per_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs.csv");
    let mut w = csv::Writer::from_path(&runs).unwrap();
    for sensors in ["both", "front"] {
        for seq in 0..6 {
            for seed in 0..6 {
                let success = sensors == "both" || seed % 2 == 0;
                w.serialize(synthetic(sensors, seq, seed, success)).unwrap();
            }
        }
    }
    w.flush().unwrap();
    let (summary, curve) = (dir.path().join("s.csv"), dir.path().join("c.csv"));
    ok(&["eval", p(&runs), "--out", p(&summary), "--curve", p(&curve)]);
    let mut r = csv::Reader::from_path(&summary).unwrap();
    let recs: Vec<_> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 2);
    assert_eq!((&recs[0][2], &recs[0][3], &recs[0][4]), ("both", "36", "36"));
    assert_eq!((&recs[1][2], &recs[1][3], &recs[1][4]), ("front", "36", "18"));

    let mut c = csv::Reader::from_path(&curve).unwrap();
    let last: Vec<_> = c.records().map(|r| r.unwrap()).filter(|r| &r[2] == "front").collect();
    assert_eq!(last.len(), 900);
    assert_eq!(last[0][4].parse::<f64>().unwrap(), 0.0);
    assert_eq!(last[899][4].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn empty_eval_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("empty.csv");
    std::fs::write(&runs, "sequence,seed\n").unwrap();
    let err = fails(&["eval", p(&runs)], 3);
    assert!(err.contains("no runs"), "{err}");
}

#[test]
fn bench_emits_the_full_matrix() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["bench", "--particles", "64,256,1024,4096,16384", "--workers", "1,2,4,8", "--out", p(dir.path())]);
    let mut r = csv::Reader::from_path(dir.path().join("steps.csv")).unwrap();
    let recs: Vec<_> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 5 * 4 * 6);
    for n in ["64", "256", "1024", "4096", "16384"] {
        for w in ["1", "2", "4", "8"] {
            assert!(recs.iter().any(|r| &r[1] == n && &r[2] == w && &r[0] == "total"));
        }
    }
    let speedup = std::fs::read_to_string(dir.path().join("speedup.csv")).unwrap();
    assert_eq!(speedup.lines().count(), 1 + 5 * 3 * 6);
    for f in ["memory.csv", "tradeoff.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn bench_rejects_too_few_repetitions() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&["bench", "--reps", "5", "--out", p(dir.path())], 2);
    assert!(err.contains("bench"), "{err}");
}
