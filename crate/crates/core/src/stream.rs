//! Stream records, the recurring-concept hyperplane generator, and loaders
//! for external CSV / ARFF data.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{parse_err, Error, Result};
use crate::fourier::AttributeSpace;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamRecord {
    pub values: Vec<u32>,
    pub label: u8,
}

impl StreamRecord {
    pub fn new(values: Vec<u32>, label: u8) -> Self {
        Self { values, label }
    }
}

/// Samples used to place a concept's threshold at the median of `w·x`.
const MEDIAN_SAMPLES: usize = 10_000;

// RNG stream ids; concepts use CONCEPT_STREAM_BASE + id.
const VALUE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const CONCEPT_STREAM_BASE: u64 = 1 << 32;

/// A hyperplane labeling rule `[w·x ≥ θ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl Concept {
    /// Draws the concept with the given id. Depends only on `(seed, id, space)`.
    pub fn generate(seed: u64, id: u32, space: &AttributeSpace) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CONCEPT_STREAM_BASE + id as u64);
        let weights: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut sums: Vec<f64> = (0..MEDIAN_SAMPLES)
            .map(|_| {
                space
                    .cardinalities()
                    .iter()
                    .zip(&weights)
                    .map(|(&card, w)| w * rng.gen_range(0..card) as f64)
                    .sum()
            })
            .collect();
        sums.sort_by(f64::total_cmp);
        let threshold = sums[MEDIAN_SAMPLES / 2];
        Self { weights, threshold }
    }

    pub fn label(&self, values: &[u32]) -> u8 {
        let s: f64 = self.weights.iter().zip(values).map(|(w, &v)| w * v as f64).sum();
        u8::from(s >= self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSchedule {
    /// `(concept id, length)` in stream order.
    pub segments: Vec<(u32, usize)>,
    pub noise_rate: f64,
    pub seed: u64,
    pub n_attrs: usize,
    pub cardinality: u32,
}

impl ConceptSchedule {
    /// `concepts` concepts of `length` records each, the whole sequence
    /// repeated `occurrences` times, over `n_attrs` binary attributes.
    pub fn recurring(concepts: u32, length: usize, occurrences: usize, noise_rate: f64, seed: u64) -> Self {
        let segments = (0..occurrences)
            .flat_map(|_| (0..concepts).map(move |id| (id, length)))
            .collect();
        Self {
            segments,
            noise_rate,
            seed,
            n_attrs: 10,
            cardinality: 2,
        }
    }

    /// 10 concepts × 5,000 records × 3 occurrences on 10 binary attributes.
    pub fn benchmark(noise_rate: f64, seed: u64) -> Self {
        Self::recurring(10, 5_000, 3, noise_rate, seed)
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|&(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn space(&self) -> Result<AttributeSpace> {
        AttributeSpace::uniform(self.n_attrs, self.cardinality)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!("noise_rate {} not in [0, 1)", self.noise_rate)));
        }
        if let Some(&(id, _)) = self.segments.iter().find(|&&(_, n)| n == 0) {
            return Err(Error::Config(format!("segment for concept {id} has length 0")));
        }
        if self.segments.is_empty() {
            return Err(Error::Config("schedule has no segments".into()));
        }
        Ok(())
    }

    /// Parses a schedule file: one `concept_id,length` segment per line, plus
    /// `key = value` lines for `noise_rate`, `seed`, `n_attrs`, `cardinality`.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut schedule = Self {
            segments: Vec::new(),
            noise_rate: 0.0,
            seed: 0,
            n_attrs: 10,
            cardinality: 2,
        };
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let value = value.trim();
                let bad = || parse_err(n, format!("bad value `{value}` for {}", key.trim()));
                match key.trim() {
                    "noise_rate" => schedule.noise_rate = value.parse().map_err(|_| bad())?,
                    "seed" => schedule.seed = value.parse().map_err(|_| bad())?,
                    "n_attrs" => schedule.n_attrs = value.parse().map_err(|_| bad())?,
                    "cardinality" => schedule.cardinality = value.parse().map_err(|_| bad())?,
                    other => return Err(parse_err(n, format!("unknown key `{other}`"))),
                }
            } else if let Some((id, len)) = line.split_once(',') {
                let id = id.trim().parse().map_err(|_| parse_err(n, "bad concept id"))?;
                let len = len.trim().parse().map_err(|_| parse_err(n, "bad segment length"))?;
                schedule.segments.push((id, len));
            } else {
                return Err(parse_err(n, "expected `concept_id,length` or `key = value`"));
            }
        }
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "noise_rate = {}\nseed = {}\nn_attrs = {}\ncardinality = {}\n",
            self.noise_rate, self.seed, self.n_attrs, self.cardinality
        );
        for (id, len) in &self.segments {
            out.push_str(&format!("{id},{len}\n"));
        }
        out
    }
}

/// Pull-based generator over a schedule.
#[derive(Debug, Clone)]
pub struct HyperplaneStream {
    space: Arc<AttributeSpace>,
    schedule: ConceptSchedule,
    concepts: HashMap<u32, Concept>,
    values_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    segment: usize,
    emitted_in_segment: usize,
}

pub fn hyperplane_stream(schedule: &ConceptSchedule, space: Arc<AttributeSpace>) -> Result<HyperplaneStream> {
    schedule.validate()?;
    let mut concepts = HashMap::new();
    for &(id, _) in &schedule.segments {
        concepts
            .entry(id)
            .or_insert_with(|| Concept::generate(schedule.seed, id, &space));
    }
    let mut values_rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    values_rng.set_stream(VALUE_STREAM);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    noise_rng.set_stream(NOISE_STREAM);
    Ok(HyperplaneStream {
        space,
        schedule: schedule.clone(),
        concepts,
        values_rng,
        noise_rng,
        segment: 0,
        emitted_in_segment: 0,
    })
}

impl HyperplaneStream {
    pub fn space(&self) -> &Arc<AttributeSpace> {
        &self.space
    }

    pub fn concept(&self, id: u32) -> Option<&Concept> {
        self.concepts.get(&id)
    }
}

impl Iterator for HyperplaneStream {
    type Item = StreamRecord;

    fn next(&mut self) -> Option<StreamRecord> {
        while self.emitted_in_segment == self.schedule.segments.get(self.segment)?.1 {
            self.segment += 1;
            self.emitted_in_segment = 0;
        }
        let id = self.schedule.segments[self.segment].0;
        self.emitted_in_segment += 1;
        let values: Vec<u32> = self
            .space
            .cardinalities()
            .iter()
            .map(|&card| self.values_rng.gen_range(0..card))
            .collect();
        let mut label = self.concepts[&id].label(&values);
        if self.noise_rng.gen::<f64>() < self.schedule.noise_rate {
            label ^= 1;
        }
        Some(StreamRecord { values, label })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let done: usize = self.schedule.segments[..self.segment.min(self.schedule.segments.len())]
            .iter()
            .map(|&(_, n)| n)
            .sum::<usize>()
            + self.emitted_in_segment;
        let left = self.schedule.len() - done;
        (left, Some(left))
    }
}

/// Records plus the space they were coded into.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub space: Arc<AttributeSpace>,
    pub records: Vec<StreamRecord>,
    /// Rows dropped as unparseable.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Equal-width bins for numeric columns.
    pub bins: u32,
    /// Treat columns holding only non-negative integers as ready-made codes
    /// (`λ = max + 1`) instead of binning them.
    pub integer_codes: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            bins: 10,
            integer_codes: false,
        }
    }
}

enum ColumnKind {
    /// Declared or first-appearance value list.
    Nominal(Vec<String>),
    Numeric,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "?"
}

/// Maps class values to bits: `0`/`1` directly when every value is one of
/// those, otherwise the first two distinct values become 0 and 1 and any
/// further value is rejected.
fn class_codes<'a>(values: impl Iterator<Item = &'a str> + Clone) -> HashMap<&'a str, u8> {
    if values.clone().all(|v| v == "0" || v == "1") {
        return HashMap::from([("0", 0), ("1", 1)]);
    }
    let mut codes = HashMap::new();
    for v in values {
        if codes.len() == 2 {
            break;
        }
        let next = codes.len() as u8;
        codes.entry(v).or_insert(next);
    }
    codes
}

/// Codes raw string rows into records. `declared[i]` gives a fixed kind for
/// column `i` (ARFF); otherwise the kind is inferred.
fn code_table(
    names: Vec<String>,
    rows: Vec<Vec<String>>,
    mut declared: Vec<Option<ColumnKind>>,
    class: usize,
    options: LoadOptions,
    mut skipped: usize,
) -> Result<Dataset> {
    if options.bins < 2 {
        return Err(Error::Config(format!("bins must be at least 2, got {}", options.bins)));
    }
    let width = names.len();
    declared.resize_with(width, || None);

    // Rows with a missing value or a non-binarizable class are dropped up front.
    let complete: Vec<Vec<String>> = rows
        .into_iter()
        .filter(|row| {
            let ok = row.len() == width && !row.iter().any(|s| is_missing(s));
            skipped += usize::from(!ok);
            ok
        })
        .collect();
    let codes = class_codes(complete.iter().map(|row| row[class].as_str()));
    let mut kept = Vec::with_capacity(complete.len());
    for row in &complete {
        match codes.get(row[class].as_str()) {
            Some(&label) => kept.push((row, label)),
            None => skipped += 1,
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyStream);
    }

    let attrs: Vec<usize> = (0..width).filter(|&c| c != class).collect();
    let mut columns = Vec::with_capacity(attrs.len());
    for &c in &attrs {
        let values = || kept.iter().map(|(row, _)| row[c].as_str());
        let kind = match declared[c].take() {
            Some(kind) => kind,
            None if values().all(|v| v.parse::<f64>().is_ok()) => ColumnKind::Numeric,
            None => {
                let mut seen: Vec<String> = Vec::new();
                let mut index = HashMap::new();
                for v in values() {
                    if !index.contains_key(v) {
                        index.insert(v.to_string(), seen.len());
                        seen.push(v.to_string());
                    }
                }
                ColumnKind::Nominal(seen)
            }
        };
        columns.push(ColumnCoder::new(kind, values(), options)?);
    }

    let space = AttributeSpace::new(
        attrs
            .iter()
            .zip(&columns)
            .map(|(&c, col)| (names[c].clone(), col.cardinality)),
    )?;
    let mut records = Vec::with_capacity(kept.len());
    for (row, label) in kept {
        let values: Option<Vec<u32>> = attrs
            .iter()
            .zip(&columns)
            .map(|(&c, col)| col.code(&row[c]))
            .collect();
        match values {
            Some(values) => records.push(StreamRecord { values, label }),
            None => skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(Dataset {
        space: Arc::new(space),
        records,
        skipped,
    })
}

struct ColumnCoder {
    cardinality: u32,
    map: Option<HashMap<String, u32>>,
    /// (min, max, bins) for binned numerics; `None` for integer codes.
    range: Option<(f64, f64, u32)>,
}

impl ColumnCoder {
    fn new<'a>(kind: ColumnKind, values: impl Iterator<Item = &'a str> + Clone, options: LoadOptions) -> Result<Self> {
        match kind {
            ColumnKind::Nominal(list) => Ok(Self {
                cardinality: (list.len() as u32).max(2),
                map: Some(list.into_iter().zip(0..).collect()),
                range: None,
            }),
            ColumnKind::Numeric => {
                let nums = values.clone().filter_map(|v| v.parse::<f64>().ok());
                if options.integer_codes && values.clone().all(|v| v.parse::<u32>().is_ok()) {
                    let max = values.filter_map(|v| v.parse::<u32>().ok()).max().unwrap_or(0);
                    return Ok(Self {
                        cardinality: (max + 1).max(2),
                        map: None,
                        range: None,
                    });
                }
                let (min, max) = nums.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                Ok(Self {
                    cardinality: options.bins,
                    map: None,
                    range: Some((min, max, options.bins)),
                })
            }
        }
    }

    fn code(&self, raw: &str) -> Option<u32> {
        if let Some(map) = &self.map {
            return map.get(raw).copied();
        }
        match self.range {
            None => raw.parse().ok(),
            Some((min, max, bins)) => {
                let v: f64 = raw.parse().ok()?;
                if max <= min {
                    return Some(0);
                }
                let bin = ((v - min) / (max - min) * bins as f64).floor();
                Some((bin.max(0.0) as u32).min(bins - 1))
            }
        }
    }
}

/// Loads a CSV file with a header row. Nominal columns get dense codes in
/// first-appearance order; numeric columns are binned over their observed
/// range.
pub fn load_csv(path: impl AsRef<Path>, class_column: &str, options: LoadOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, class_column, options)
}

pub fn parse_csv(text: &str, class_column: &str, options: LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let class = names
        .iter()
        .position(|n| n == class_column)
        .ok_or_else(|| Error::Config(format!("no class column `{class_column}`")))?;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for row in reader.records() {
        match row {
            Ok(row) => rows.push(row.iter().map(str::to_string).collect()),
            Err(_) => skipped += 1,
        }
    }
    code_table(names, rows, Vec::new(), class, options, skipped)
}

/// Loads the dense subset of ARFF: `@attribute` with nominal `{...}` lists or
/// `numeric`/`real`/`integer`, then an `@data` CSV body. The class column
/// defaults to the last attribute.
pub fn load_arff(path: impl AsRef<Path>, class_column: Option<&str>, options: LoadOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_arff(&text, class_column, options)
}

pub fn parse_arff(text: &str, class_column: Option<&str>, options: LoadOptions) -> Result<Dataset> {
    let mut names = Vec::new();
    let mut declared = Vec::new();
    let mut lines = text.lines().enumerate();
    for (i, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        }
        if lower.starts_with("@data") {
            break;
        }
        let Some(rest) = line.get(10..).filter(|_| lower.starts_with("@attribute")) else {
            return Err(parse_err(i + 1, "expected @relation, @attribute or @data"));
        };
        let rest = rest.trim();
        let (name, ty) = split_arff_name(rest).ok_or_else(|| parse_err(i + 1, "bad @attribute"))?;
        let ty = ty.trim();
        let kind = if let Some(list) = ty.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            ColumnKind::Nominal(list.split(',').map(|s| unquote(s.trim()).to_string()).collect())
        } else {
            match ty.to_ascii_lowercase().as_str() {
                "numeric" | "real" | "integer" => ColumnKind::Numeric,
                other => return Err(parse_err(i + 1, format!("unsupported attribute type `{other}`"))),
            }
        };
        names.push(name.to_string());
        declared.push(Some(kind));
    }
    if names.is_empty() {
        return Err(parse_err(0, "no attributes declared"));
    }
    let class = match class_column {
        Some(c) => names
            .iter()
            .position(|n| n == c)
            .ok_or_else(|| Error::Config(format!("no class column `{c}`")))?,
        None => names.len() - 1,
    };
    // the class column is binarized separately
    declared[class] = None;
    let mut rows = Vec::new();
    for (_, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        rows.push(line.split(',').map(|s| unquote(s.trim()).to_string()).collect());
    }
    code_table(names, rows, declared, class, options, 0)
}

fn split_arff_name(rest: &str) -> Option<(&str, &str)> {
    if let Some(quoted) = rest.strip_prefix('\'') {
        let end = quoted.find('\'')?;
        Some((&quoted[..end], &quoted[end + 1..]))
    } else {
        let end = rest.find(char::is_whitespace)?;
        Some((&rest[..end], &rest[end..]))
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('\'')
        .and_then(|s| s.strip_suffix('\''))
        .or_else(|| s.strip_prefix('"').and_then(|s| s.strip_suffix('"')))
        .unwrap_or(s)
}

/// Writes records as CSV with the attribute names as header and a trailing
/// `class` column.
pub fn write_csv<W: Write>(out: W, space: &AttributeSpace, records: impl IntoIterator<Item = StreamRecord>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = space.names().iter().map(String::as_str).collect();
    header.push("class");
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(space.dim() + 1);
    for r in records {
        row.clear();
        row.extend(r.values.iter().map(u32::to_string));
        row.push(r.label.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::from)
}

/// `1` where the trailing `window`-mean rises over the previous step's mean,
/// else `0`. The first label is 0; early steps average the available prefix.
pub fn moving_average_label(series: &[f64], window: usize) -> Result<Vec<u8>> {
    if window == 0 {
        return Err(Error::InvalidInput("window must be at least 1".into()));
    }
    if series.len() < 2 {
        return Err(Error::InvalidInput("series needs at least two points".into()));
    }
    let mut labels = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    let mut prev = f64::NAN;
    for t in 0..series.len() {
        sum += series[t];
        if t >= window {
            sum -= series[t - window];
        }
        let mean = sum / (t + 1).min(window) as f64;
        labels.push(u8::from(t > 0 && mean > prev));
        prev = mean;
    }
    Ok(labels)
}
