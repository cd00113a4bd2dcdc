//! Line-oriented text form of a spectrum.
//!
//! ```text
//! fourier-spectrum 1
//! dimension 3
//! attribute 0 2 a0
//! attribute 1 2 a1
//! attribute 2 2 a2
//! attr_set 0,2
//! energy_threshold 1.0000000000000000e0
//! coefficients 2
//! 00 7.5000000000000000e-1 0.0000000000000000e0
//! 01 2.5000000000000000e-1 0.0000000000000000e0
//! ```
//!
//! Digits are written back to back when every local cardinality is at most
//! ten, dot-separated otherwise; the empty partition is written `-`. Floats
//! carry 17 significant digits, so parsing reproduces the exact bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use super::{AttributeSpace, Partition, Spectrum};
use crate::error::{parse_err, Result};

const MAGIC: &str = "fourier-spectrum 1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Spectrum {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    pub fn write_text(&self, out: &mut String) {
        let space = self.space();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "dimension {}", space.dim());
        for m in 0..space.dim() {
            let _ = writeln!(out, "attribute {m} {} {}", space.cardinality(m), space.name(m));
        }
        let attrs = if self.attr_set().is_empty() {
            "-".to_string()
        } else {
            self.attr_set()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(out, "attr_set {attrs}");
        let _ = writeln!(out, "energy_threshold {}", fmt_f64(self.energy_threshold()));
        let _ = writeln!(out, "coefficients {}", self.len());
        let compact = self
            .attr_set()
            .iter()
            .all(|&m| space.cardinality(m) <= 10);
        for (j, w) in self.iter() {
            let digits = if j.is_empty() {
                "-".to_string()
            } else if compact {
                j.digits().iter().map(u32::to_string).collect()
            } else {
                j.digits()
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join(".")
            };
            let _ = writeln!(out, "{digits} {} {}", fmt_f64(w.re), fmt_f64(w.im));
        }
    }

    pub fn from_text(text: &str) -> Result<Spectrum> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        Self::read_text(&mut lines)
    }

    /// Reads one spectrum from `(line number, line)` pairs, consuming exactly
    /// its lines.
    pub fn read_text<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Spectrum> {
        let mut next = |what: &str| -> Result<(usize, &'a str)> {
            lines
                .next()
                .ok_or_else(|| parse_err(0, format!("unexpected end of input, expected {what}")))
        };
        let (n, line) = next("header")?;
        if line.trim() != MAGIC {
            return Err(parse_err(n, format!("expected `{MAGIC}`")));
        }
        let (n, line) = next("dimension")?;
        let dim: usize = keyed(n, line, "dimension")?
            .parse()
            .map_err(|_| parse_err(n, "bad dimension"))?;
        let mut attrs = Vec::with_capacity(dim);
        for m in 0..dim {
            let (n, line) = next("attribute")?;
            let rest = keyed(n, line, "attribute")?;
            let mut parts = rest.splitn(3, ' ');
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(n, "bad attribute index"))?;
            if idx != m {
                return Err(parse_err(n, format!("attribute {idx} out of order")));
            }
            let card: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(n, "bad cardinality"))?;
            let name = parts.next().unwrap_or("").to_string();
            attrs.push((name, card));
        }
        let space = Arc::new(AttributeSpace::new(attrs)?);
        let (n, line) = next("attr_set")?;
        let raw = keyed(n, line, "attr_set")?;
        let attr_set: Vec<usize> = if raw == "-" {
            Vec::new()
        } else {
            raw.split(',')
                .map(|s| s.parse().map_err(|_| parse_err(n, "bad attr_set")))
                .collect::<Result<_>>()?
        };
        let (n, line) = next("energy_threshold")?;
        let e_t: f64 = keyed(n, line, "energy_threshold")?
            .parse()
            .map_err(|_| parse_err(n, "bad energy_threshold"))?;
        let (n, line) = next("coefficients")?;
        let count: usize = keyed(n, line, "coefficients")?
            .parse()
            .map_err(|_| parse_err(n, "bad coefficient count"))?;
        let compact = attr_set
            .iter()
            .all(|&m| m < space.dim() && space.cardinality(m) <= 10);
        let mut coeffs = BTreeMap::new();
        for _ in 0..count {
            let (n, line) = next("coefficient")?;
            let mut parts = line.split_whitespace();
            let (Some(d), Some(re), Some(im), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(parse_err(n, "expected `<digits> <re> <im>`"));
            };
            let digits: Vec<u32> = if d == "-" {
                Vec::new()
            } else if compact {
                d.chars()
                    .map(|c| c.to_digit(10).ok_or_else(|| parse_err(n, "bad digit")))
                    .collect::<Result<_>>()?
            } else {
                d.split('.')
                    .map(|s| s.parse().map_err(|_| parse_err(n, "bad digit")))
                    .collect::<Result<_>>()?
            };
            let re: f64 = re.parse().map_err(|_| parse_err(n, "bad real part"))?;
            let im: f64 = im.parse().map_err(|_| parse_err(n, "bad imaginary part"))?;
            if coeffs
                .insert(Partition::new(digits), Complex64::new(re, im))
                .is_some()
            {
                return Err(parse_err(n, "duplicate partition"));
            }
        }
        Spectrum::new(space, attr_set, coeffs, e_t)
    }
}

fn keyed<'a>(n: usize, line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::trim_end)
        .ok_or_else(|| parse_err(n, format!("expected `{key} ...`")))
}
