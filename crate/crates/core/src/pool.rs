//! The spectrum pool and the test-then-train control loop that fills it.
//!
//! An [`Engine`] runs a forest of Hoeffding trees next to a bounded pool of
//! (possibly aggregated) spectra. Every record is classified by all of them
//! and the prediction of the current best classifier is emitted. When that
//! classifier's detector signals drift and it is a forest tree, the tree may
//! be encoded as a spectrum and stored: inserted as is ([`Variant::Fct`]),
//! merged into the structurally closest entry ([`Variant::Ep`]) or into the
//! entry with the closest accuracy ([`Variant::EpA`]).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::drift::{Detector, DetectorConfig, DriftSignal};
use crate::error::{parse_err, Error, Result};
use crate::fourier::{classify_score, dft_from_tree, AttributeSpace, Spectrum};
use crate::hoeffding::{Forest, TreeParams, DEFAULT_NODE_BUDGET};
use crate::stream::StreamRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Forest only; nothing is ever encoded.
    Cbdt,
    /// Every encoded tree becomes its own entry.
    Fct,
    /// Merge by structural similarity.
    Ep,
    /// Merge by accuracy similarity.
    EpA,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cbdt" => Ok(Variant::Cbdt),
            "fct" => Ok(Variant::Fct),
            "ep" => Ok(Variant::Ep),
            "epa" | "ep_a" => Ok(Variant::EpA),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Cbdt => "cbdt",
            Variant::Fct => "fct",
            Variant::Ep => "ep",
            Variant::EpA => "epa",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolConfig {
    pub variant: Variant,
    pub pool_size: usize,
    pub energy_threshold: f64,
    /// τ: margin a tree needs over the best pooled spectrum to be encoded.
    pub tie_threshold: f64,
    /// α: largest structural distance that still merges.
    pub alpha: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ep,
            pool_size: 10,
            energy_threshold: 0.95,
            tie_threshold: 0.01,
            alpha: 0.1,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::Config("pool_size must be at least 1".into()));
        }
        if !(self.energy_threshold > 0.0 && self.energy_threshold <= 1.0) {
            return Err(Error::InvalidEnergyThreshold(self.energy_threshold));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(Error::Config(format!("tie_threshold {} < 0", self.tie_threshold)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub pool: PoolConfig,
    pub seed: u64,
    pub node_budget: usize,
    pub tree: TreeParams,
    pub detector: DetectorConfig,
    /// Replant a forest tree (and clear its detector) when its own detector
    /// reports a rising error rate.
    pub reset_on_drift: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            pool: PoolConfig::default(),
            seed: 0,
            node_budget: DEFAULT_NODE_BUDGET,
            tree: TreeParams::default(),
            detector: DetectorConfig::default(),
            reset_on_drift: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleEntry {
    /// `Σ A_i · s_i` over the member spectra.
    spectrum: Spectrum,
    weight_sum: f64,
    detector: Detector,
    disagreements: u64,
    usage: u64,
    /// Fingerprints of the member spectra, for the duplicate check.
    members: Vec<u64>,
    created: u64,
}

impl EnsembleEntry {
    fn new(spectrum: &Spectrum, weight: f64, detector: Detector, created: u64) -> Self {
        Self {
            spectrum: spectrum.scaled(weight),
            weight_sum: weight,
            detector,
            disagreements: 0,
            usage: 0,
            members: vec![spectrum.fingerprint()],
            created,
        }
    }

    /// The aggregate `Σ A_i · s_i`; see [`Self::score`] for the normalized form.
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    pub fn accuracy(&self) -> f64 {
        self.detector.accuracy()
    }

    pub fn disagreements(&self) -> u64 {
        self.disagreements
    }

    pub fn usage(&self) -> u64 {
        self.usage
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Aggregate score divided by the weight sum; 0 for a zero weight.
    pub fn score(&self, x: &[u32]) -> f64 {
        if self.weight_sum > 0.0 {
            self.spectrum.score(x) / self.weight_sum
        } else {
            0.0
        }
    }

    pub fn predict(&self, x: &[u32]) -> u8 {
        classify_score(self.score(x))
    }

    /// Bytes charged to this entry: per coefficient 16 for the value and one
    /// per attribute for the partition digits, plus 64 of overhead.
    pub fn memory_bytes(&self) -> usize {
        self.spectrum.len() * (16 + self.spectrum.space().dim()) + 64
    }

    fn merge(&mut self, addition: &Spectrum, weight: f64) -> Result<()> {
        let mut union: Vec<usize> = self
            .spectrum
            .attr_set()
            .iter()
            .chain(addition.attr_set())
            .copied()
            .collect();
        union.sort_unstable();
        union.dedup();
        let base = self.spectrum.expand_to(&union)?;
        let addition_wide = addition.expand_to(&union)?;
        self.spectrum = base.aggregate(&addition_wide, weight)?;
        self.weight_sum += weight;
        self.members.push(addition.fingerprint());
        Ok(())
    }
}

/// Disagreement rate between an entry and the current best classifier since
/// the last drift point. With no instances observed the distance is 1.
pub fn structural_distance(entry: &EnsembleEntry, n_instances: u64) -> f64 {
    if n_instances == 0 {
        1.0
    } else {
        entry.disagreements as f64 / n_instances as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierId {
    Tree(usize),
    Entry(usize),
}

/// What [`Pool::merge_or_insert`] did with a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Merged(usize),
    Inserted(usize),
}

/// Bounded list of ensemble entries.
#[derive(Debug, Clone)]
pub struct Pool {
    entries: Vec<EnsembleEntry>,
    capacity: usize,
    detector: DetectorConfig,
    next_seq: u64,
}

impl Pool {
    pub fn new(capacity: usize, detector: DetectorConfig) -> Self {
        Self {
            entries: Vec::with_capacity(capacity),
            capacity: capacity.max(1),
            detector,
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &EnsembleEntry {
        &self.entries[i]
    }

    /// True if some entry already holds exactly this spectrum.
    pub fn contains(&self, spectrum: &Spectrum) -> bool {
        let fp = spectrum.fingerprint();
        self.entries.iter().any(|e| e.members.contains(&fp))
    }

    /// Adds a fresh entry with weight `weight`, evicting the least used
    /// (then oldest) entry when full.
    pub fn insert(&mut self, spectrum: &Spectrum, weight: f64) -> usize {
        if self.entries.len() == self.capacity {
            let victim = self
                .entries
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (e.usage, e.created))
                .map(|(i, _)| i)
                .expect("non-empty pool");
            self.entries.remove(victim);
        }
        let entry = EnsembleEntry::new(spectrum, weight, self.detector.build(), self.next_seq);
        self.next_seq += 1;
        self.entries.push(entry);
        self.entries.len() - 1
    }

    /// Merges into the entry with the smallest structural distance when that
    /// distance is at most `alpha`, otherwise inserts.
    pub fn merge_or_insert(
        &mut self,
        spectrum: &Spectrum,
        weight: f64,
        n_instances: u64,
        alpha: f64,
    ) -> Result<Placement> {
        let closest = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, structural_distance(e, n_instances)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        self.place(spectrum, weight, closest.filter(|&(_, d)| d <= alpha).map(|(i, _)| i))
    }

    /// Merges into the entry whose accuracy is nearest `accuracy` when the
    /// gap is at most `tie`, otherwise inserts.
    pub fn merge_or_insert_by_accuracy(
        &mut self,
        spectrum: &Spectrum,
        weight: f64,
        accuracy: f64,
        tie: f64,
    ) -> Result<Placement> {
        let closest = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, (e.accuracy() - accuracy).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        self.place(spectrum, weight, closest.filter(|&(_, d)| d <= tie).map(|(i, _)| i))
    }

    fn place(&mut self, spectrum: &Spectrum, weight: f64, target: Option<usize>) -> Result<Placement> {
        match target {
            Some(i) => {
                self.entries[i].merge(spectrum, weight)?;
                Ok(Placement::Merged(i))
            }
            None => Ok(Placement::Inserted(self.insert(spectrum, weight))),
        }
    }

    pub fn memory_bytes(&self) -> usize {
        self.entries.iter().map(EnsembleEntry::memory_bytes).sum()
    }

    pub fn memory_kb(&self) -> f64 {
        self.memory_bytes() as f64 / 1024.0
    }

    fn reset_disagreements(&mut self) {
        for e in &mut self.entries {
            e.disagreements = 0;
        }
    }

    /// Text dump: a `pool <n>` line, then per entry an
    /// `entry <i> weight_sum <w> usage <u> members <m>` line followed by the
    /// aggregate spectrum in its text form.
    pub fn dump(&self) -> String {
        let mut out = format!("pool {}\n", self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "entry {i} weight_sum {:.16e} usage {} members {}\n",
                e.weight_sum,
                e.usage,
                e.members.len()
            ));
            e.spectrum.write_text(&mut out);
        }
        out
    }

    /// Reads a dump back as `(weight_sum, usage, aggregate spectrum)` triples.
    pub fn read_dump(text: &str) -> Result<Vec<(f64, u64, Spectrum)>> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (n, head) = lines.next().ok_or_else(|| parse_err(0, "empty pool dump"))?;
        let count: usize = head
            .strip_prefix("pool ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(n, "expected `pool <n>`"))?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = lines.next().ok_or_else(|| parse_err(0, "truncated pool dump"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [_, _, _, weight, _, usage, ..] = fields[..] else {
                return Err(parse_err(n, "bad entry line"));
            };
            let weight = weight.parse().map_err(|_| parse_err(n, "bad weight_sum"))?;
            let usage = usage.parse().map_err(|_| parse_err(n, "bad usage"))?;
            out.push((weight, usage, Spectrum::read_text(&mut lines)?));
        }
        Ok(out)
    }
}

/// What happened to the encoded tree at a drift point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftAction {
    /// The drifting classifier was a pool entry, or the variant never encodes.
    None,
    /// The tree did not beat the best pooled spectrum by more than τ.
    TieNotMet,
    /// The encoding duplicated a spectrum already in the pool.
    Duplicate,
    Placed(Placement),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEvent {
    /// 1-based index of the record that triggered the drift.
    pub instance: u64,
    pub previous: ClassifierId,
    pub selected: ClassifierId,
    pub action: DriftAction,
}

/// Counters describing an engine's history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub instances: u64,
    /// Drift points of the current best classifier.
    pub drifts: u64,
    /// Trees encoded into spectra.
    pub encodings: u64,
    pub inserts: u64,
    pub merges: u64,
    /// Times a pool entry was selected as best classifier at a drift point.
    pub reuses: u64,
    pub tree_resets: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    forest: Forest,
    pool: Pool,
    current: ClassifierId,
    since_drift: u64,
    stats: EngineStats,
    tree_preds: Vec<u8>,
    entry_preds: Vec<u8>,
    resets: Vec<usize>,
    events: Vec<DriftEvent>,
}

impl Engine {
    pub fn new(space: Arc<AttributeSpace>, config: EngineConfig) -> Result<Self> {
        config.pool.validate()?;
        let forest = Forest::new(space, config.node_budget, config.tree, config.detector)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let current = ClassifierId::Tree(rng.gen_range(0..forest.len()));
        Ok(Self {
            pool: Pool::new(config.pool.pool_size, config.detector),
            forest,
            current,
            since_drift: 0,
            stats: EngineStats::default(),
            tree_preds: Vec::new(),
            entry_preds: Vec::new(),
            resets: Vec::new(),
            events: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn current(&self) -> ClassifierId {
        self.current
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    /// Every drift point so far, in order.
    pub fn drift_log(&self) -> &[DriftEvent] {
        &self.events
    }

    /// Instances since the last drift point.
    pub fn since_drift(&self) -> u64 {
        self.since_drift
    }

    pub fn accuracy_of(&self, id: ClassifierId) -> f64 {
        match id {
            ClassifierId::Tree(i) => self.forest.detector(i).accuracy(),
            ClassifierId::Entry(i) => self.pool.entry(i).accuracy(),
        }
    }

    /// The current best classifier's prediction, without learning.
    pub fn predict(&self, x: &[u32]) -> u8 {
        match self.current {
            ClassifierId::Tree(i) => self.forest.tree(i).classify(x),
            ClassifierId::Entry(i) => self.pool.entry(i).predict(x),
        }
    }

    /// Scores `record` with every classifier, emits the best classifier's
    /// prediction, then trains on it. Out-of-range records are counted,
    /// predicted as 0 and otherwise ignored.
    pub fn step(&mut self, record: &StreamRecord) -> u8 {
        let x = &record.values;
        if self.forest.space().check(x).is_err() || record.label > 1 {
            self.stats.rejected += 1;
            return 0;
        }
        self.forest.classify_into(x, &mut self.tree_preds);
        self.entry_preds.clear();
        self.entry_preds
            .extend(self.pool.entries.iter().map(|e| e.predict(x)));
        let prediction = match self.current {
            ClassifierId::Tree(i) => self.tree_preds[i],
            ClassifierId::Entry(i) => self.entry_preds[i],
        };

        // accuracies before this record, used if C drifts on it
        let before_current = self.accuracy_of(self.current);
        let before_entries: Vec<f64> = self.pool.entries.iter().map(|e| e.accuracy()).collect();

        self.since_drift += 1;
        self.stats.instances += 1;
        for (e, &p) in self.pool.entries.iter_mut().zip(&self.entry_preds) {
            e.disagreements += u64::from(p != prediction);
        }

        self.resets.clear();
        let mut current_drifted = false;
        for (i, &p) in self.tree_preds.iter().enumerate() {
            let signal = self.forest.detector_mut(i).add(p != record.label);
            if signal == DriftSignal::ErrorUp {
                self.resets.push(i);
            }
            current_drifted |= self.current == ClassifierId::Tree(i) && signal.is_drift();
        }
        for (i, (e, &p)) in self.pool.entries.iter_mut().zip(&self.entry_preds).enumerate() {
            let signal = e.detector.add(p != record.label);
            current_drifted |= self.current == ClassifierId::Entry(i) && signal.is_drift();
        }
        self.forest
            .learn(record)
            .expect("record validated above");

        if current_drifted {
            self.on_drift(before_current, &before_entries);
        }
        if self.config.reset_on_drift {
            for k in 0..self.resets.len() {
                let i = self.resets[k];
                self.forest.reset_tree(i);
                *self.forest.detector_mut(i) = self.config.detector.build();
                self.stats.tree_resets += 1;
            }
        }
        prediction
    }

    fn on_drift(&mut self, acc_current: f64, acc_entries: &[f64]) {
        self.stats.drifts += 1;
        let previous = self.current;
        let mut action = DriftAction::None;
        if let ClassifierId::Tree(c) = self.current {
            if self.config.pool.variant != Variant::Cbdt {
                action = self.maybe_encode(c, acc_current, acc_entries);
            }
        }
        self.current = self.best_classifier();
        self.events.push(DriftEvent {
            instance: self.stats.instances,
            previous,
            selected: self.current,
            action,
        });
        if let ClassifierId::Entry(i) = self.current {
            self.pool.entries[i].usage += 1;
            self.stats.reuses += 1;
        }
        self.since_drift = 0;
        self.pool.reset_disagreements();
    }

    fn maybe_encode(&mut self, tree: usize, acc_tree: f64, acc_entries: &[f64]) -> DriftAction {
        let pool_cfg = self.config.pool;
        let best_pooled = acc_entries.iter().copied().fold(None, |m: Option<f64>, a| {
            Some(m.map_or(a, |m| m.max(a)))
        });
        if let Some(best) = best_pooled {
            if acc_tree - best <= pool_cfg.tie_threshold {
                return DriftAction::TieNotMet;
            }
        }
        let spectrum = match dft_from_tree(self.forest.tree(tree), self.forest.space(), pool_cfg.energy_threshold) {
            Ok(s) => s,
            Err(e) => unreachable!("forest trees always encode: {e}"),
        };
        self.stats.encodings += 1;
        if self.pool.contains(&spectrum) {
            return DriftAction::Duplicate;
        }
        let placement = match pool_cfg.variant {
            Variant::Cbdt => return DriftAction::None,
            Variant::Fct => Ok(Placement::Inserted(self.pool.insert(&spectrum, acc_tree))),
            Variant::Ep => self
                .pool
                .merge_or_insert(&spectrum, acc_tree, self.since_drift, pool_cfg.alpha),
            Variant::EpA => {
                self.pool
                    .merge_or_insert_by_accuracy(&spectrum, acc_tree, acc_tree, pool_cfg.tie_threshold)
            }
        };
        let placement = placement.expect("pool spectra share the forest's space");
        match placement {
            Placement::Merged(_) => self.stats.merges += 1,
            Placement::Inserted(_) => self.stats.inserts += 1,
        }
        DriftAction::Placed(placement)
    }

    /// Highest detector accuracy across forest and pool; ties prefer a tree,
    /// then the lowest index.
    pub fn best_classifier(&self) -> ClassifierId {
        let mut best = (ClassifierId::Tree(0), self.forest.detector(0).accuracy());
        let candidates = (0..self.forest.len())
            .map(|i| (ClassifierId::Tree(i), self.forest.detector(i).accuracy()))
            .chain(
                self.pool
                    .entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (ClassifierId::Entry(i), e.accuracy())),
            );
        for (id, acc) in candidates {
            if acc > best.1 {
                best = (id, acc);
            }
        }
        best.0
    }
}
