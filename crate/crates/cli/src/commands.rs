use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tof_mcl::bench::{bench_memory, bench_step, memory_tradeoff, speedup, step_rows, Stage};
use tof_mcl::eval::{convergence_curve, BatchSummary, ReportRow};
use tof_mcl::run::{prepare_field, run_batch};
use tof_mcl::sim::{
    builtin_sequence, builtin_world, load_sequence, save_sequence, simulate_sequence,
    SequenceRecord, WORLD_RESOLUTION,
};
use tof_mcl::{FilterConfig, NumericPolicy};

use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{FileEntry, Manifest, MANIFEST_FILE};
use crate::Format;

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// `<out>.manifest.json` next to a single output file.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

pub fn simulate(config: &Config, format: Format, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let world = builtin_world(&config.world.name)?;
    let mut files = Vec::new();
    for name in &config.experiment.sequences {
        let spec = builtin_sequence(name)?;
        for &seed in &config.experiment.seeds {
            let record = simulate_sequence(&world, name, &spec.trajectory, &config.simulation, seed)?;
            let ext = match format {
                Format::Jsonl => "jsonl",
                Format::Binary => "bin",
            };
            let file = format!("{name}_s{seed}.{ext}");
            save_sequence(&record, &out.join(&file))?;
            files.push(FileEntry::of(out, &file)?);
        }
    }
    let count = files.len();
    Manifest::new("simulate", config, files).write(&out.join(MANIFEST_FILE))?;
    println!("wrote {count} sequences to {}", out.display());
    Ok(())
}

/// Records to localize; `None` keeps everything in the dataset.
pub struct Selection {
    pub sequences: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
}

impl Selection {
    fn keeps(&self, r: &SequenceRecord) -> bool {
        self.sequences.as_ref().is_none_or(|s| s.contains(&r.header.name))
            && self.seeds.as_ref().is_none_or(|s| s.contains(&r.header.seed))
    }
}

fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        let m = Manifest::read(&manifest)?;
        for f in &m.files {
            let bytes = std::fs::read(dir.join(&f.path))
                .map_err(|e| CliError::Data(format!("{}: {e}", dir.join(&f.path).display())))?;
            if crate::manifest::sha256_hex(&bytes) != f.sha256 {
                return Err(CliError::Data(format!("{} does not match its manifest hash", f.path)));
            }
        }
        return Ok(m.files.iter().map(|f| dir.join(&f.path)).collect());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("jsonl" | "bin")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn localize(config: &Config, selection: &Selection, data: &Path, out: &Path) -> Result<(), CliError> {
    let mut records = Vec::new();
    for path in dataset_files(data)? {
        let record = load_sequence(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if selection.keeps(&record) {
            records.push(record);
        }
    }
    if records.is_empty() {
        return Err(CliError::Data(format!("no matching sequences in {}", data.display())));
    }
    // group by world so each map is built once
    let mut by_world: BTreeMap<String, Vec<SequenceRecord>> = BTreeMap::new();
    for r in records {
        by_world.entry(r.header.world.clone()).or_default().push(r);
    }

    let mut rows = Vec::new();
    for sensors in &config.experiment.sensors {
        for &particles in &config.particle_counts() {
            for &policy in &config.policies() {
                let filter = FilterConfig {
                    particles,
                    policy,
                    ..config.filter.clone()
                };
                let mut block = Vec::new();
                for (world, records) in &by_world {
                    let world = builtin_world(world).map_err(|e| CliError::Data(e.to_string()))?;
                    let field = prepare_field(world.grid(), &filter)?;
                    let runs = run_batch(records, world.grid(), &field, &filter, *sensors)?;
                    for (r, run) in records.iter().zip(&runs) {
                        block.push(ReportRow::new(
                            &r.header.name,
                            r.header.seed,
                            particles,
                            policy.as_str(),
                            sensors.as_str(),
                            run,
                        ));
                    }
                }
                let s = BatchSummary::from_rows(&block)?;
                println!(
                    "{particles:>6} {policy:<7} {sensors:<5} {}/{} successful, median ATE {}",
                    s.successes,
                    s.runs,
                    s.median_ate.map_or("-".into(), |a| format!("{a:.3} m"))
                );
                rows.extend(block);
            }
        }
    }
    write_csv(out, &rows)?;
    let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let files = vec![FileEntry::of(dir, &file_name(out))?];
    Manifest::new("localize", config, files).write(&sidecar(out))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    particles: usize,
    policy: String,
    sensors: String,
    runs: usize,
    successes: usize,
    success_rate: f64,
    median_ate_m: Option<f64>,
    median_convergence_s: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    particles: usize,
    policy: &'a str,
    sensors: &'a str,
    time_s: f64,
    probability: f64,
}

type ConfigKey = (usize, String, String);

/// Rows grouped by configuration in order of first appearance.
fn group(rows: Vec<ReportRow>) -> Vec<(ConfigKey, Vec<ReportRow>)> {
    let mut groups: Vec<(ConfigKey, Vec<ReportRow>)> = Vec::new();
    for row in rows {
        let key = (row.particles, row.policy.clone(), row.sensors.clone());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
}

pub fn eval(
    inputs: &[PathBuf],
    out: Option<&Path>,
    curve: Option<&Path>,
    duration: f64,
    rate: f64,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in inputs {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        for row in r.deserialize::<ReportRow>() {
            rows.push(row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data("no runs to evaluate".into()));
    }
    if !(duration > 0.0 && rate > 0.0) {
        return Err(CliError::Config("duration and rate must be positive".into()));
    }
    let ticks = (duration * rate).round() as usize;
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    println!("particles policy  sensors  runs  success  median ATE  median convergence");
    for ((particles, policy, sensors), rows) in group(rows) {
        let s = BatchSummary::from_rows(&rows)?;
        println!(
            "{particles:>9} {policy:<7} {sensors:<7} {:>5}  {:>6.1}%  {:>10}  {:>18}",
            s.runs,
            100.0 * s.success_rate,
            s.median_ate.map_or("-".into(), |a| format!("{a:.3} m")),
            s.median_convergence_time.map_or("-".into(), |t| format!("{t:.2} s")),
        );
        if curve.is_some() {
            let conv: Vec<Option<usize>> = rows
                .iter()
                .map(|r| r.convergence_tick.filter(|&k| k < ticks))
                .collect();
            for (k, p) in convergence_curve(&conv, ticks)?.into_iter().enumerate() {
                curves.push((particles, policy.clone(), sensors.clone(), k as f64 / rate, p));
            }
        }
        summary.push(SummaryRow {
            particles,
            policy,
            sensors,
            runs: s.runs,
            successes: s.successes,
            success_rate: s.success_rate,
            median_ate_m: s.median_ate,
            median_convergence_s: s.median_convergence_time,
        });
    }
    if let Some(out) = out {
        write_csv(out, &summary)?;
    }
    if let Some(path) = curve {
        let rows: Vec<CurveRow> = curves
            .iter()
            .map(|(n, p, s, t, v)| CurveRow {
                particles: *n,
                policy: p,
                sensors: s,
                time_s: *t,
                probability: *v,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SpeedupRow {
    step: &'static str,
    particles: usize,
    workers: usize,
    speedup: f64,
}

/// Memory budgets of the tradeoff table: 128 kB and 1.5 MB.
const BUDGETS: [u64; 2] = [128 * 1024, 1536 * 1024];

pub fn bench(config: &Config, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let b = &config.bench;
    let table = bench_step(b)?;
    println!("particles workers  total p50     obs/N  motion/N  resample/N  pose/N  overhead");
    for t in &table {
        println!(
            "{:>9} {:>7} {:>9.1} us {:>7.1} {:>9.1} {:>11.1} {:>7.1} {:>6.1} us",
            t.particles,
            t.workers,
            t.quantiles(Stage::Total).p50 / 1e3,
            t.observation_ns,
            t.motion_ns,
            t.resampling_ns,
            t.pose_ns,
            t.overhead_ns / 1e3
        );
    }
    write_csv(&out.join("steps.csv"), &step_rows(&table))?;

    let mut speedups = Vec::new();
    for &n in &b.particles {
        for &w in b.workers.iter().filter(|&&w| w != 1) {
            for stage in Stage::ALL {
                if let Some(s) = speedup(&table, stage, n, w) {
                    speedups.push(SpeedupRow {
                        step: stage.as_str(),
                        particles: n,
                        workers: w,
                        speedup: s,
                    });
                }
            }
        }
    }
    write_csv(&out.join("speedup.csv"), &speedups)?;

    let particles: Vec<u64> = b.particles.iter().map(|&n| n as u64).collect();
    let world = builtin_world(&config.world.name)?;
    let memory = bench_memory(&NumericPolicy::ALL, &particles, &[16.0, world.structured_area()], WORLD_RESOLUTION)?;
    write_csv(&out.join("memory.csv"), &memory)?;

    let counts: Vec<u64> = (0..=64).map(|k| k * 512).collect();
    let tradeoff: Vec<_> = BUDGETS
        .iter()
        .flat_map(|&budget| memory_tradeoff(&NumericPolicy::ALL, budget, &counts, WORLD_RESOLUTION))
        .collect();
    write_csv(&out.join("tradeoff.csv"), &tradeoff)?;

    let files = ["steps.csv", "speedup.csv", "memory.csv", "tradeoff.csv"]
        .iter()
        .map(|f| FileEntry::of(out, f))
        .collect::<Result<Vec<_>, _>>()?;
    Manifest::new("bench", config, files).write(&out.join(MANIFEST_FILE))?;
    Ok(())
}
