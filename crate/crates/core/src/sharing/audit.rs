//! Parameter counting under a sharing scheme.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::key::{Component, Site};
use crate::error::Result;
use crate::model::layout::parameter_sites;
use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRow {
    pub module: &'static str,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamReport {
    pub model_label: String,
    pub scheme: String,
    pub rows: Vec<ParamRow>,
    pub total: usize,
    pub baseline_total: usize,
    /// `100 * total / baseline_total`.
    pub compression_pct: f64,
}

const MODULES: [&str; 6] = [
    "encoder",
    "bottleneck",
    "blocks.pointwise",
    "blocks.separable",
    "mask_head",
    "decoder",
];

fn module_of(site: &Site) -> usize {
    match site {
        Site::Encoder => 0,
        Site::Bottleneck => 1,
        Site::Block {
            component: Component::Pointwise,
            ..
        } => 2,
        Site::Block {
            component: Component::Separable,
            ..
        } => 3,
        Site::MaskHead => 4,
        Site::Decoder => 5,
    }
}

/// Per-module scalar counts, each distinct canonical tensor counted once.
fn count(config: &ModelConfig) -> [usize; 6] {
    let mut seen = BTreeSet::new();
    let mut counts = [0usize; 6];
    for spec in parameter_sites(config) {
        let key = spec.key.canonicalize(&config.sharing);
        if seen.insert(key) {
            counts[module_of(&key.site)] += spec.numel();
        }
    }
    counts
}

pub fn total_params(config: &ModelConfig) -> usize {
    count(config).iter().sum()
}

/// Audit against the same architecture without sharing.
pub fn audit(config: &ModelConfig) -> ParamReport {
    let baseline = config.clone().with_sharing(Default::default());
    audit_against(config, &baseline)
}

/// Audit with the compression ratio taken relative to `reference`
/// (used for structurally reduced controls measured against their base).
pub fn audit_against(config: &ModelConfig, reference: &ModelConfig) -> ParamReport {
    let counts = count(config);
    let total = counts.iter().sum();
    let baseline_total = total_params(&reference.clone().with_sharing(Default::default()));
    ParamReport {
        model_label: config.family.scheme_label(&config.sharing),
        scheme: config.sharing.to_string(),
        rows: MODULES
            .iter()
            .zip(counts)
            .map(|(&module, params)| ParamRow { module, params })
            .collect(),
        total,
        baseline_total,
        compression_pct: 100.0 * total as f64 / baseline_total as f64,
    }
}

#[derive(Debug, Serialize)]
struct ReportCsvRow<'a> {
    model_label: &'a str,
    scheme: &'a str,
    size_params: usize,
    compression_pct: String,
}

impl ParamReport {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.model_label = label.into();
        self
    }

    pub fn write_csv<W: Write>(reports: &[ParamReport], out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for r in reports {
            writer.serialize(ReportCsvRow {
                model_label: &r.model_label,
                scheme: &r.scheme,
                size_params: r.total,
                compression_pct: format!("{:.2}", r.compression_pct),
            })?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Aligned per-module breakdown.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let width = MODULES.iter().map(|m| m.len()).max().unwrap_or(0).max(8);
        let _ = writeln!(s, "{} [{}]", self.model_label, self.scheme);
        for row in &self.rows {
            let _ = writeln!(s, "  {:<width$}  {:>12}", row.module, row.params);
        }
        let _ = writeln!(s, "  {:<width$}  {:>12}", "total", self.total);
        let _ = writeln!(s, "  {:<width$}  {:>12}", "baseline", self.baseline_total);
        let _ = writeln!(s, "  {:<width$}  {:>11.2}%", "ratio", self.compression_pct);
        s
    }
}
