//! Change detectors over a host classifier's 0/1 error stream.
//!
//! Two detectors share one interface:
//!
//! * [`Adwin`]: adaptive windowing over an exponential histogram, cutting
//!   the window wherever two sub-windows differ by more than a
//!   Hoeffding/Bernstein-style bound.
//! * [`BlockSeq`]: a block-sequential detector. Outcomes are grouped into
//!   blocks of 200; each completed block is tested against a FIFO reservoir
//!   of up to 5,000 past outcomes with a Bernstein two-sample bound. This is
//!   an approximation of SeqDrift2, whose exact internals are not
//!   reproduced here.
//!
//! Both detect increases and decreases of the error rate. On a detection the
//! window keeps only the post-change part (ADWIN's newer sub-window, or the
//! triggering block).

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Adwin,
    BlockSeq,
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "adwin" => Ok(DetectorKind::Adwin),
            "block-seq" => Ok(DetectorKind::BlockSeq),
            other => Err(Error::Config(format!(
                "unknown detector `{other}` (expected adwin or block-seq)"
            ))),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Adwin => "adwin",
            DetectorKind::BlockSeq => "block-seq",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub significance: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kind: DetectorKind::BlockSeq,
            significance: DEFAULT_SIGNIFICANCE,
        }
    }
}

impl DetectorConfig {
    pub fn build(&self) -> Detector {
        match self.kind {
            DetectorKind::Adwin => Detector::Adwin(Adwin::new(self.significance)),
            DetectorKind::BlockSeq => Detector::BlockSeq(BlockSeq::new(self.significance)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSignal {
    Stable,
    /// The error rate went up.
    ErrorUp,
    /// The error rate went down.
    ErrorDown,
}

impl DriftSignal {
    pub fn is_drift(self) -> bool {
        self != DriftSignal::Stable
    }

    fn between(old_mean: f64, new_mean: f64) -> Self {
        if new_mean > old_mean {
            DriftSignal::ErrorUp
        } else {
            DriftSignal::ErrorDown
        }
    }
}

#[derive(Debug, Clone)]
pub enum Detector {
    Adwin(Adwin),
    BlockSeq(BlockSeq),
}

impl Detector {
    /// Appends one outcome (`true` = misclassified).
    pub fn add(&mut self, error: bool) -> DriftSignal {
        match self {
            Detector::Adwin(d) => d.add(error),
            Detector::BlockSeq(d) => d.add(error),
        }
    }

    /// `1 - mean(window)`, or 0.5 before any outcome.
    pub fn accuracy(&self) -> f64 {
        let (errors, width) = self.window();
        if width == 0 {
            0.5
        } else {
            1.0 - errors as f64 / width as f64
        }
    }

    /// (errors, outcomes) currently in the window.
    pub fn window(&self) -> (u64, u64) {
        match self {
            Detector::Adwin(d) => (d.errors, d.width),
            Detector::BlockSeq(d) => d.window(),
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Adwin(_) => DetectorKind::Adwin,
            Detector::BlockSeq(_) => DetectorKind::BlockSeq,
        }
    }
}

const ADWIN_MAX_BUCKETS: usize = 5;
const ADWIN_CLOCK: u64 = 32;
const ADWIN_MIN_SUB_WINDOW: u64 = 5;
const ADWIN_MIN_WIDTH: u64 = 10;

/// ADWIN over 0/1 outcomes. Row `r` holds buckets of `2^r` outcomes, newest
/// first; only the error count of each bucket is stored.
#[derive(Debug, Clone)]
pub struct Adwin {
    delta: f64,
    rows: Vec<VecDeque<u64>>,
    errors: u64,
    width: u64,
    ticks: u64,
}

impl Adwin {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            rows: vec![VecDeque::new()],
            errors: 0,
            width: 0,
            ticks: 0,
        }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn add(&mut self, error: bool) -> DriftSignal {
        let e = u64::from(error);
        self.rows[0].push_front(e);
        self.errors += e;
        self.width += 1;
        self.compress();
        self.ticks += 1;
        if !self.ticks.is_multiple_of(ADWIN_CLOCK) || self.width <= ADWIN_MIN_WIDTH {
            return DriftSignal::Stable;
        }
        let mut signal = DriftSignal::Stable;
        while let Some(cut) = self.find_cut() {
            if signal == DriftSignal::Stable {
                signal = cut;
            }
            self.drop_oldest();
        }
        signal
    }

    fn compress(&mut self) {
        let mut r = 0;
        while r < self.rows.len() && self.rows[r].len() > ADWIN_MAX_BUCKETS {
            let a = self.rows[r].pop_back().expect("non-empty row");
            let b = self.rows[r].pop_back().expect("non-empty row");
            if r + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[r + 1].push_front(a + b);
            r += 1;
        }
    }

    fn drop_oldest(&mut self) {
        for r in (0..self.rows.len()).rev() {
            if let Some(errs) = self.rows[r].pop_back() {
                self.errors -= errs;
                self.width -= 1 << r;
                return;
            }
        }
    }

    /// Scans split points from oldest to newest; returns the direction of
    /// the first significant difference.
    fn find_cut(&self) -> Option<DriftSignal> {
        if self.width <= ADWIN_MIN_WIDTH {
            return None;
        }
        let n = self.width as f64;
        let p = self.errors as f64 / n;
        let variance = p * (1.0 - p);
        let dd = (2.0 * n.ln() / self.delta).ln();
        let (mut n0, mut u0) = (0u64, 0u64);
        for r in (0..self.rows.len()).rev() {
            for (i, &errs) in self.rows[r].iter().enumerate().rev() {
                if r == 0 && i == 0 {
                    return None;
                }
                n0 += 1 << r;
                u0 += errs;
                let n1 = self.width - n0;
                if n0 < ADWIN_MIN_SUB_WINDOW || n1 < ADWIN_MIN_SUB_WINDOW {
                    continue;
                }
                let mean0 = u0 as f64 / n0 as f64;
                let mean1 = (self.errors - u0) as f64 / n1 as f64;
                let m = 1.0 / (n0 - ADWIN_MIN_SUB_WINDOW + 1) as f64
                    + 1.0 / (n1 - ADWIN_MIN_SUB_WINDOW + 1) as f64;
                let eps = (2.0 * m * variance * dd).sqrt() + 2.0 / 3.0 * dd * m;
                if (mean0 - mean1).abs() > eps {
                    return Some(DriftSignal::between(mean0, mean1));
                }
            }
        }
        None
    }
}

pub const BLOCK_SIZE: u64 = 200;
pub const RESERVOIR_CAPACITY: u64 = 5_000;

/// Block-sequential two-sample detector.
#[derive(Debug, Clone)]
pub struct BlockSeq {
    significance: f64,
    /// Error counts of past blocks, oldest first.
    reservoir: VecDeque<u64>,
    reservoir_errors: u64,
    block_len: u64,
    block_errors: u64,
}

impl BlockSeq {
    pub fn new(significance: f64) -> Self {
        Self {
            significance,
            reservoir: VecDeque::new(),
            reservoir_errors: 0,
            block_len: 0,
            block_errors: 0,
        }
    }

    fn window(&self) -> (u64, u64) {
        (
            self.reservoir_errors + self.block_errors,
            self.reservoir.len() as u64 * BLOCK_SIZE + self.block_len,
        )
    }

    pub fn add(&mut self, error: bool) -> DriftSignal {
        self.block_len += 1;
        self.block_errors += u64::from(error);
        if self.block_len < BLOCK_SIZE {
            return DriftSignal::Stable;
        }
        let block = self.block_errors;
        self.block_len = 0;
        self.block_errors = 0;
        let signal = self.test(block);
        if signal.is_drift() {
            self.reservoir.clear();
            self.reservoir_errors = 0;
        }
        self.reservoir.push_back(block);
        self.reservoir_errors += block;
        if self.reservoir.len() as u64 * BLOCK_SIZE > RESERVOIR_CAPACITY {
            let old = self.reservoir.pop_front().expect("non-empty reservoir");
            self.reservoir_errors -= old;
        }
        signal
    }

    fn test(&self, block_errors: u64) -> DriftSignal {
        if self.reservoir.is_empty() {
            return DriftSignal::Stable;
        }
        let n_r = (self.reservoir.len() as u64 * BLOCK_SIZE) as f64;
        let n_b = BLOCK_SIZE as f64;
        let mean_r = self.reservoir_errors as f64 / n_r;
        let mean_b = block_errors as f64 / n_b;
        let p = (self.reservoir_errors + block_errors) as f64 / (n_r + n_b);
        let variance = p * (1.0 - p);
        let m = 1.0 / n_r + 1.0 / n_b;
        let l = (2.0 / self.significance).ln();
        let eps = (2.0 * variance * m * l).sqrt() + 2.0 / 3.0 * m * l;
        if (mean_b - mean_r).abs() > eps {
            DriftSignal::between(mean_r, mean_b)
        } else {
            DriftSignal::Stable
        }
    }
}
