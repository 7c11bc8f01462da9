//! Win/tie/loss and good/neutral/poor percentages from annotation records.
//!
//! Percentages are kept as integer hundredths so rounding is exact: a share
//! `c / t` becomes `round_half_up(10000 · c / t)`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Serialize, Serializer};

use super::annotations::{AnnotationRecord, Method, Metric, Mode, Outcome};
use crate::error::{Error, Result};

/// A percentage with two decimals, stored in hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub u32);

impl Percent {
    /// `count / total` as a percentage, rounded half-up to two decimals.
    pub fn of(count: usize, total: usize) -> Percent {
        assert!(total > 0 && count <= total);
        let (c, t) = (count as u128, total as u128);
        Percent(((2 * c * 10_000 + t) / (2 * t)) as u32)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Percent {
    type Err = Error;

    /// Accepts `d+`, `d+.d` or `d+.dd`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("{s:?} is not a percentage with at most two decimals"));
        let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
        if whole.is_empty() || frac.len() > 2 || !(whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())) {
            return Err(bad());
        }
        let whole: u32 = whole.parse().map_err(|_| bad())?;
        let frac: u32 = format!("{frac:0<2}").parse().map_err(|_| bad())?;
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(frac))
            .map(Percent)
            .ok_or_else(bad)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(f64::from(self.0) / 100.0)
    }
}

/// Whether three reported percentages add up to 100 within 0.02.
pub fn sums_to_hundred(triple: [Percent; 3]) -> bool {
    let sum: u32 = triple.iter().map(|p| p.0).sum();
    sum.abs_diff(10_000) <= 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WinTieLoss {
    pub win: Percent,
    pub tie: Percent,
    pub loss: Percent,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScaleSummary {
    pub good: Percent,
    pub neutral: Percent,
    pub poor: Percent,
    pub n: usize,
}

fn counted(
    records: &[AnnotationRecord],
    metric: Metric,
    method: Method,
    mode: Mode,
) -> impl Iterator<Item = &AnnotationRecord> {
    records
        .iter()
        .filter(move |r| r.passed_attention_check() && r.metric == metric && r.baseline == method && r.mode == mode)
}

pub fn tabulate_win_tie_loss(records: &[AnnotationRecord], metric: Metric, baseline: Method) -> Result<WinTieLoss> {
    let mut counts = [0usize; 3];
    for r in counted(records, metric, baseline, Mode::Pairwise) {
        r.validate()?;
        let slot = match r.pairwise_outcome.expect("validated") {
            Outcome::Win => 0,
            Outcome::Tie => 1,
            Outcome::Loss => 2,
        };
        counts[slot] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptySlice(format!(
            "no pairwise {metric} records against {baseline}"
        )));
    }
    Ok(WinTieLoss {
        win: Percent::of(counts[0], n),
        tie: Percent::of(counts[1], n),
        loss: Percent::of(counts[2], n),
        n,
    })
}

pub fn tabulate_scale(records: &[AnnotationRecord], metric: Metric, method: Method) -> Result<ScaleSummary> {
    let mut counts = [0usize; 3];
    for r in counted(records, metric, method, Mode::Scale) {
        r.validate()?;
        let slot = match r.scale_score.expect("validated") {
            4 | 5 => 0,
            3 => 1,
            _ => 2,
        };
        counts[slot] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptySlice(format!("no scale {metric} records for {method}")));
    }
    Ok(ScaleSummary {
        good: Percent::of(counts[0], n),
        neutral: Percent::of(counts[1], n),
        poor: Percent::of(counts[2], n),
        n,
    })
}

/// Every slice present in a record set, keyed metric → method.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Report {
    pub pairwise: BTreeMap<Metric, BTreeMap<Method, WinTieLoss>>,
    pub scale: BTreeMap<Metric, BTreeMap<Method, ScaleSummary>>,
}

impl Report {
    pub fn from_records(records: &[AnnotationRecord]) -> Result<Report> {
        let mut report = Report::default();
        for r in records.iter().filter(|r| r.passed_attention_check()) {
            match r.mode {
                Mode::Pairwise
                    if !report
                        .pairwise
                        .get(&r.metric)
                        .is_some_and(|m| m.contains_key(&r.baseline)) =>
                {
                    let row = tabulate_win_tie_loss(records, r.metric, r.baseline)?;
                    report.pairwise.entry(r.metric).or_default().insert(r.baseline, row);
                }
                Mode::Scale if !report.scale.get(&r.metric).is_some_and(|m| m.contains_key(&r.baseline)) => {
                    let row = tabulate_scale(records, r.metric, r.baseline)?;
                    report.scale.entry(r.metric).or_default().insert(r.baseline, row);
                }
                _ => {}
            }
        }
        Ok(report)
    }

    /// One table per mode: a row per method, a `a / b / c` column per metric.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.pairwise.is_empty() {
            out.push_str("## Win / tie / loss (%)\n\n");
            table(&mut out, "Baseline", &self.pairwise, |r| (r.win, r.tie, r.loss, r.n));
        }
        if !self.scale.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("## Good / neutral / poor (%)\n\n");
            table(&mut out, "Method", &self.scale, |r| (r.good, r.neutral, r.poor, r.n));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn table<R>(
    out: &mut String,
    label: &str,
    rows: &BTreeMap<Metric, BTreeMap<Method, R>>,
    cells: impl Fn(&R) -> (Percent, Percent, Percent, usize),
) {
    let metrics: Vec<Metric> = rows.keys().copied().collect();
    let mut methods: Vec<Method> = rows.values().flat_map(|m| m.keys().copied()).collect();
    methods.sort();
    methods.dedup();

    write!(out, "| {label} |").unwrap();
    for m in &metrics {
        write!(out, " {m} |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(metrics.len()));
    out.push('\n');
    for method in methods {
        write!(out, "| {method} |").unwrap();
        for metric in &metrics {
            match rows[metric].get(&method) {
                Some(r) => {
                    let (a, b, c, n) = cells(r);
                    write!(out, " {a} / {b} / {c} (n={n}) |").unwrap();
                }
                None => out.push_str(" – |"),
            }
        }
        out.push('\n');
    }
}
