//! Prequential (test-then-train) evaluation, run configuration files, and
//! the CSV report.
//!
//! Report columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `name` | run name from the config |
//! | `variant` | `cbdt`, `fct`, `ep` or `epa` |
//! | `pool_size`, `energy_threshold`, `tie_threshold`, `alpha` | pool settings |
//! | `detector`, `drift_significance` | drift detector settings |
//! | `seed` | engine seed |
//! | `noise_rate` | label noise of a generated stream, empty for file input |
//! | `instances` | records scored |
//! | `accuracy` | overall prequential accuracy |
//! | `accuracy_std` | population std of the segment accuracies |
//! | `segment_accuracies` | `;`-separated accuracy of each equal division |
//! | `avg_pool_memory_kb` | pool memory sampled every 1,000 records, averaged |
//! | `reuse_count` | pool entries chosen as best classifier at drift points |
//! | `drift_count` | drift points of the best classifier |
//! | `encodings`, `merges` | trees encoded, spectra merged |
//! | `throughput` | records per second; empty unless timing was requested |
//! | `status` | `ok`, or `failed: <reason>` |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::drift::{DetectorConfig, DetectorKind};
use crate::error::{parse_err, Error, Result};
use crate::fourier::AttributeSpace;
use crate::pool::{Engine, EngineConfig};
use crate::stream::{hyperplane_stream, load_arff, load_csv, ConceptSchedule, LoadOptions, StreamRecord};

/// Records between pool-memory samples.
pub const MEMORY_SAMPLE_INTERVAL: u64 = 1_000;

/// Where a run's records come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    /// The built-in recurring hyperplane benchmark.
    Benchmark { noise_rate: f64, seed: u64 },
    Schedule { path: PathBuf, noise_rate: Option<f64> },
    /// CSV or ARFF (by extension).
    File {
        path: PathBuf,
        class: Option<String>,
        options: LoadOptions,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub engine: EngineConfig,
    pub segments: usize,
    pub source: StreamSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            engine: EngineConfig::default(),
            segments: 10,
            source: StreamSource::Benchmark {
                noise_rate: 0.1,
                seed: 0,
            },
        }
    }
}

fn parse_value<T: std::str::FromStr>(n: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_err(n, format!("bad value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// kept as written; see [`Self::resolve_paths`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut kind = DetectorKind::BlockSeq;
        let mut significance = DetectorConfig::default().significance;
        let mut noise_rate: Option<f64> = None;
        let mut stream_seed: Option<u64> = None;
        let mut schedule: Option<PathBuf> = None;
        let mut stream: Option<PathBuf> = None;
        let mut class: Option<String> = None;
        let mut options = LoadOptions {
            integer_codes: true,
            ..LoadOptions::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| parse_err(n, "expected `key = value`"))?;
            let e = &mut config.engine;
            match key {
                "name" => config.name = value.to_string(),
                "variant" => e.pool.variant = value.parse()?,
                "pool_size" => e.pool.pool_size = parse_value(n, key, value)?,
                "energy_threshold" => e.pool.energy_threshold = parse_value(n, key, value)?,
                "tie_threshold" => e.pool.tie_threshold = parse_value(n, key, value)?,
                "alpha" => e.pool.alpha = parse_value(n, key, value)?,
                "seed" => e.seed = parse_value(n, key, value)?,
                "detector" => kind = value.parse()?,
                "drift_significance" => significance = parse_value(n, key, value)?,
                "segments" => config.segments = parse_value(n, key, value)?,
                "node_budget" => e.node_budget = parse_value(n, key, value)?,
                "split_confidence" => e.tree.split_confidence = parse_value(n, key, value)?,
                "grace_period" => e.tree.grace_period = parse_value(n, key, value)?,
                "split_tie_threshold" => e.tree.tie_threshold = parse_value(n, key, value)?,
                "reset_on_drift" => e.reset_on_drift = parse_value(n, key, value)?,
                "noise_rate" => noise_rate = Some(parse_value(n, key, value)?),
                "stream_seed" => stream_seed = Some(parse_value(n, key, value)?),
                "schedule" => schedule = Some(value.into()),
                "stream" => stream = Some(value.into()),
                "class" => class = Some(value.to_string()),
                "bins" => options.bins = parse_value(n, key, value)?,
                "integer_codes" => options.integer_codes = parse_value(n, key, value)?,
                other => return Err(parse_err(n, format!("unknown key `{other}`"))),
            }
        }
        config.engine.detector = DetectorConfig { kind, significance };
        config.source = match (schedule, stream) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("`schedule` and `stream` are mutually exclusive".into()))
            }
            (Some(path), None) => StreamSource::Schedule { path, noise_rate },
            (None, Some(path)) => StreamSource::File { path, class, options },
            (None, None) => StreamSource::Benchmark {
                noise_rate: noise_rate.unwrap_or(0.1),
                seed: stream_seed.unwrap_or(config.engine.seed),
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::parse(&fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    /// Makes relative source paths relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        match &mut self.source {
            StreamSource::Schedule { path, .. } | StreamSource::File { path, .. } if path.is_relative() => {
                *path = dir.join(&*path);
            }
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.pool.validate()?;
        if self.segments == 0 {
            return Err(Error::Config("segments must be at least 1".into()));
        }
        if !(self.engine.detector.significance > 0.0 && self.engine.detector.significance < 1.0) {
            return Err(Error::Config(format!(
                "drift_significance {} not in (0, 1)",
                self.engine.detector.significance
            )));
        }
        Ok(())
    }

    pub fn noise_rate(&self) -> Option<f64> {
        match &self.source {
            StreamSource::Benchmark { noise_rate, .. } => Some(*noise_rate),
            StreamSource::Schedule { noise_rate, .. } => *noise_rate,
            StreamSource::File { .. } => None,
        }
    }

    /// Materializes the configured stream.
    pub fn load_stream(&self) -> Result<(Arc<AttributeSpace>, Vec<StreamRecord>)> {
        match &self.source {
            StreamSource::Benchmark { noise_rate, seed } => {
                generate(&ConceptSchedule::benchmark(*noise_rate, *seed))
            }
            StreamSource::Schedule { path, noise_rate } => {
                let mut schedule = ConceptSchedule::parse(&fs::read_to_string(path)?)?;
                if let Some(rate) = noise_rate {
                    schedule.noise_rate = *rate;
                }
                generate(&schedule)
            }
            StreamSource::File { path, class, options } => {
                let is_arff = path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("arff"));
                let data = if is_arff {
                    load_arff(path, class.as_deref(), *options)?
                } else {
                    load_csv(path, class.as_deref().unwrap_or("class"), *options)?
                };
                Ok((data.space, data.records))
            }
        }
    }
}

fn generate(schedule: &ConceptSchedule) -> Result<(Arc<AttributeSpace>, Vec<StreamRecord>)> {
    let space = Arc::new(schedule.space()?);
    let records = hyperplane_stream(schedule, space.clone())?.collect();
    Ok((space, records))
}

/// Anything that can be evaluated prequentially.
pub trait Learner {
    /// Predicts `record`'s label, then learns from it.
    fn test_then_train(&mut self, record: &StreamRecord) -> u8;

    fn pool_memory_kb(&self) -> f64 {
        0.0
    }
}

impl Learner for Engine {
    fn test_then_train(&mut self, record: &StreamRecord) -> u8 {
        self.step(record)
    }

    fn pool_memory_kb(&self) -> f64 {
        self.pool().memory_kb()
    }
}

/// Accuracy figures of one prequential pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prequential {
    pub instances: u64,
    pub correct: u64,
    pub segment_accuracies: Vec<f64>,
    pub avg_pool_memory_kb: f64,
}

impl Prequential {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.instances as f64
    }

    /// Population standard deviation of the segment accuracies.
    pub fn segment_std(&self) -> f64 {
        let k = self.segment_accuracies.len() as f64;
        let mean = self.segment_accuracies.iter().sum::<f64>() / k;
        (self.segment_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k).sqrt()
    }
}

/// Runs `learner` over `records`, splitting accuracy into `segments` equal
/// divisions (sizes differ by at most one record).
pub fn prequential<L: Learner>(learner: &mut L, records: &[StreamRecord], segments: usize) -> Result<Prequential> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    if segments == 0 || segments > records.len() {
        return Err(Error::Config(format!(
            "cannot split {} records into {segments} segments",
            records.len()
        )));
    }
    let n = records.len();
    let mut segment_accuracies = Vec::with_capacity(segments);
    let mut correct = 0u64;
    let mut memory_sum = 0.0;
    let mut samples = 0u64;
    let mut t = 0u64;
    for k in 0..segments {
        let (start, end) = (k * n / segments, (k + 1) * n / segments);
        let mut hits = 0u64;
        for record in &records[start..end] {
            hits += u64::from(learner.test_then_train(record) == record.label);
            t += 1;
            if t.is_multiple_of(MEMORY_SAMPLE_INTERVAL) {
                memory_sum += learner.pool_memory_kb();
                samples += 1;
            }
        }
        correct += hits;
        segment_accuracies.push(hits as f64 / (end - start) as f64);
    }
    if samples == 0 {
        memory_sum = learner.pool_memory_kb();
        samples = 1;
    }
    Ok(Prequential {
        instances: n as u64,
        correct,
        segment_accuracies,
        avg_pool_memory_kb: memory_sum / samples as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: RunConfig,
    pub instances: u64,
    pub accuracy: f64,
    /// Std over the segment accuracies.
    pub accuracy_std: f64,
    pub segment_accuracies: Vec<f64>,
    pub avg_pool_memory_kb: f64,
    pub throughput: f64,
    pub reuse_count: u64,
    pub drift_count: u64,
    pub encodings: u64,
    pub merges: u64,
}

/// Builds an engine from `config` and evaluates it over `records`.
pub fn prequential_run(config: &RunConfig, records: &[StreamRecord], space: Arc<AttributeSpace>) -> Result<RunReport> {
    config.validate()?;
    let mut engine = Engine::new(space, config.engine.clone())?;
    let start = Instant::now();
    let result = prequential(&mut engine, records, config.segments)?;
    let elapsed = start.elapsed().as_secs_f64();
    let stats = engine.stats();
    Ok(RunReport {
        config: config.clone(),
        instances: result.instances,
        accuracy: result.accuracy(),
        accuracy_std: result.segment_std(),
        segment_accuracies: result.segment_accuracies,
        avg_pool_memory_kb: result.avg_pool_memory_kb,
        throughput: if elapsed > 0.0 { result.instances as f64 / elapsed } else { 0.0 },
        reuse_count: stats.reuses,
        drift_count: stats.drifts,
        encodings: stats.encodings,
        merges: stats.merges,
    })
}

/// Loads the configured stream and runs it.
pub fn run_config(config: &RunConfig) -> Result<RunReport> {
    let (space, records) = config.load_stream()?;
    prequential_run(config, &records, space)
}

pub const REPORT_HEADER: &[&str] = &[
    "name",
    "variant",
    "pool_size",
    "energy_threshold",
    "tie_threshold",
    "alpha",
    "detector",
    "drift_significance",
    "seed",
    "noise_rate",
    "instances",
    "accuracy",
    "accuracy_std",
    "segment_accuracies",
    "avg_pool_memory_kb",
    "reuse_count",
    "drift_count",
    "encodings",
    "merges",
    "throughput",
    "status",
];

fn config_columns(config: &RunConfig) -> Vec<String> {
    let e = &config.engine;
    vec![
        config.name.clone(),
        e.pool.variant.to_string(),
        e.pool.pool_size.to_string(),
        e.pool.energy_threshold.to_string(),
        e.pool.tie_threshold.to_string(),
        e.pool.alpha.to_string(),
        e.detector.kind.to_string(),
        e.detector.significance.to_string(),
        e.seed.to_string(),
        config.noise_rate().map(|r| r.to_string()).unwrap_or_default(),
    ]
}

/// One report row: a finished run or a failed one.
pub type ReportRow = std::result::Result<RunReport, (RunConfig, String)>;

/// Renders rows as CSV. Throughput is written only with `timing`, so that
/// reruns produce byte-identical output.
pub fn report_csv(rows: &[ReportRow], timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for row in rows {
        let record = match row {
            Ok(r) => {
                let mut cols = config_columns(&r.config);
                let mut segs = String::new();
                for (i, a) in r.segment_accuracies.iter().enumerate() {
                    if i > 0 {
                        segs.push(';');
                    }
                    let _ = write!(segs, "{a:.6}");
                }
                cols.extend([
                    r.instances.to_string(),
                    format!("{:.6}", r.accuracy),
                    format!("{:.6}", r.accuracy_std),
                    segs,
                    format!("{:.6}", r.avg_pool_memory_kb),
                    r.reuse_count.to_string(),
                    r.drift_count.to_string(),
                    r.encodings.to_string(),
                    r.merges.to_string(),
                    if timing { format!("{:.1}", r.throughput) } else { String::new() },
                    "ok".into(),
                ]);
                cols
            }
            Err((config, reason)) => {
                let mut cols = config_columns(config);
                cols.extend((0..10).map(|_| String::new()));
                cols.push(format!("failed: {reason}"));
                cols
            }
        };
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs every config, in parallel, keeping input order. Failures become
/// failed rows.
pub fn sweep(configs: &[RunConfig]) -> Vec<ReportRow> {
    configs
        .par_iter()
        .map(|c| run_config(c).map_err(|e| (c.clone(), e.to_string())))
        .collect()
}

/// Loads every `*.conf` file in `dir`, sorted by file name. Files that fail
/// to parse become failed rows when passed through [`sweep_dir`].
pub fn load_config_dir(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, Result<RunConfig>)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "conf"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let c = RunConfig::load(&p);
            (p, c)
        })
        .collect())
}

/// Sweeps a directory of config files.
pub fn sweep_dir(dir: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let loaded = load_config_dir(dir)?;
    if loaded.is_empty() {
        return Err(Error::Config("no *.conf files found".into()));
    }
    let mut rows: Vec<Option<ReportRow>> = vec![None; loaded.len()];
    let mut good = Vec::new();
    let mut slots = Vec::new();
    for (i, (path, config)) in loaded.into_iter().enumerate() {
        match config {
            Ok(c) => {
                good.push(c);
                slots.push(i);
            }
            Err(e) => {
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let config = RunConfig { name, ..RunConfig::default() };
                rows[i] = Some(Err((config, e.to_string())));
            }
        }
    }
    for (slot, row) in slots.into_iter().zip(sweep(&good)) {
        rows[slot] = Some(row);
    }
    Ok(rows.into_iter().map(|r| r.expect("every slot filled")).collect())
}
