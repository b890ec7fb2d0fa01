use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Hob2srnnModel, Pass};

/// One sample's attention weights over one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRow {
    pub id: String,
    pub true_class: String,
    pub predicted_class: String,
    pub weights: Vec<f64>,
}

/// Attention weights of many samples over a labelled time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTable {
    pub dates: Vec<String>,
    pub rows: Vec<AttentionRow>,
}

impl AttentionTable {
    /// Comma-separated table: `id,true_class,predicted_class,<dates...>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,true_class,predicted_class");
        for d in &self.dates {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.id, r.true_class, r.predicted_class));
            for w in &r.weights {
                out.push(',');
                out.push_str(&w.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Keeps rows whose true or predicted class is `class`.
    pub fn filter(&self, class: &str, by_prediction: bool) -> AttentionTable {
        AttentionTable {
            dates: self.dates.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| if by_prediction { r.predicted_class == class } else { r.true_class == class })
                .cloned()
                .collect(),
        }
    }
}

/// Per-source and fused attention tables. The fused axis lists radar dates
/// first, then optical dates.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionExport {
    pub radar: Option<AttentionTable>,
    pub optical: Option<AttentionTable>,
    pub fused: Option<AttentionTable>,
}

impl AttentionExport {
    pub fn filter(&self, class: &str, by_prediction: bool) -> AttentionExport {
        let f = |t: &Option<AttentionTable>| t.as_ref().map(|t| t.filter(class, by_prediction));
        AttentionExport {
            radar: f(&self.radar),
            optical: f(&self.optical),
            fused: f(&self.fused),
        }
    }
}

/// Runs `model` dropout-free at `level` and collects every attention weight.
pub fn export_attention(model: &Hob2srnnModel, dataset: &Dataset, level: usize) -> Result<AttentionExport> {
    if level > dataset.hierarchy.target_level() {
        return Err(Error::input(format!("unknown level {level}")));
    }
    let names = dataset.hierarchy.names(level);
    let truth = dataset.labels_at(level)?;
    let outs: Vec<_> = dataset
        .samples
        .par_iter()
        .map(|s| model.forward(s, level, None, Pass::Eval))
        .collect::<Result<_>>()?;
    let h = &dataset.header;
    let cfg = model.config();
    let fused_dates: Vec<String> = h.radar_dates.iter().chain(&h.optical_dates).cloned().collect();
    let mut radar = cfg.sources.uses_radar().then(|| table(&h.radar_dates));
    let mut optical = cfg.sources.uses_optical().then(|| table(&h.optical_dates));
    let mut fused = (cfg.sources.uses_radar() && cfg.sources.uses_optical()).then(|| table(&fused_dates));
    for ((s, out), &t) in dataset.samples.iter().zip(&outs).zip(&truth) {
        let row = |lambdas: &[f64]| AttentionRow {
            id: s.id.clone(),
            true_class: names[t].clone(),
            predicted_class: names[out.scores.predicted_class()].clone(),
            weights: lambdas.to_vec(),
        };
        let a = &out.attention;
        for (tab, att) in [(&mut radar, &a.rad), (&mut optical, &a.opt), (&mut fused, &a.fused)] {
            if let (Some(tab), Some(att)) = (tab.as_mut(), att) {
                tab.rows.push(row(&att.lambdas));
            }
        }
    }
    Ok(AttentionExport { radar, optical, fused })
}

fn table(dates: &[String]) -> AttentionTable {
    AttentionTable {
        dates: dates.to_vec(),
        rows: Vec::new(),
    }
}
