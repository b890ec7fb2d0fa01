//! The assembled two-branch network: per-source FCGRU + attention, a fused
//! attention over the stacked hidden states, and three classifiers per
//! taxonomy level combined with weights 0.5 / 0.5 / 1.

mod checkpoint;

pub use checkpoint::Checkpoint;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attention::{attend, attend_backward, AttentionMode, AttentionOutput, AttentionParams, AttentionTrace};
use crate::data::SegmentSample;
use crate::error::{Error, Result};
use crate::fcgru::{CandidateInput, Dropout, Enrichment, FcgruConfig, FcgruParams, FcgruTrace};
use crate::numkernel::{glorot_init, softmax, Matrix, Parameters, SeededRng};

/// Weight of each auxiliary (per-source) classifier in loss and score fusion.
pub const AUX_WEIGHT: f64 = 0.5;
/// Weight of the fused classifier.
pub const FUSED_WEIGHT: f64 = 1.0;

/// Which input sources the network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sources {
    Both,
    Radar,
    Optical,
}

impl Sources {
    pub fn uses_radar(self) -> bool {
        matches!(self, Sources::Both | Sources::Radar)
    }

    pub fn uses_optical(self) -> bool {
        matches!(self, Sources::Both | Sources::Optical)
    }
}

/// Architecture and ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub sources: Sources,
    pub radar_channels: usize,
    pub optical_channels: usize,
    pub hidden_units: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub enrichment: Enrichment,
    pub candidate_input: CandidateInput,
    pub attention: AttentionMode,
}

impl ModelConfig {
    /// Widths 512 / 64 / 128 with both sources, tanh attention and
    /// enrichment on.
    pub fn standard(radar_channels: usize, optical_channels: usize) -> Self {
        ModelConfig {
            sources: Sources::Both,
            radar_channels,
            optical_channels,
            hidden_units: 512,
            fc1_units: 64,
            fc2_units: 128,
            enrichment: Enrichment::FullyConnected,
            candidate_input: CandidateInput::Enriched,
            attention: AttentionMode::Tanh,
        }
    }

    fn branch(&self, channels: usize) -> FcgruConfig {
        FcgruConfig {
            input_channels: channels,
            fc1_units: self.fc1_units,
            fc2_units: self.fc2_units,
            hidden_units: self.hidden_units,
            enrichment: self.enrichment,
            candidate_input: self.candidate_input,
        }
    }
}

/// Linear classifier `feat · W + b` followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub w: Matrix,
    pub b: Matrix,
}

impl LinearHead {
    fn new(d: usize, k: usize, rng: &mut SeededRng) -> Self {
        LinearHead {
            w: glorot_init(d, k, rng),
            b: Matrix::zeros(1, k),
        }
    }

    fn logits(&self, feat: &[f64]) -> Vec<f64> {
        let mut out = self.b.data().to_vec();
        crate::numkernel::vec_mat_acc(feat, &self.w, &mut out);
        out
    }

    pub fn classes(&self) -> usize {
        self.w.cols()
    }
}

/// The classifiers of one taxonomy level. With a single source only `fused`
/// exists and it reads that source's pooled feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelHeads {
    pub rad: Option<LinearHead>,
    pub opt: Option<LinearHead>,
    pub fused: LinearHead,
}

/// Per-classifier cross-entropies (nats) and their weighted total. Absent
/// auxiliary classifiers contribute 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l_rad: f64,
    pub l_opt: f64,
    pub l_fused: f64,
    pub l_total: f64,
}

/// `0.5·l_rad + 0.5·l_opt + l_fused`.
pub fn loss_total(l_rad: f64, l_opt: f64, l_fused: f64) -> f64 {
    AUX_WEIGHT * l_rad + AUX_WEIGHT * l_opt + FUSED_WEIGHT * l_fused
}

/// Softmax outputs of each classifier and the fused decision score.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionScores {
    pub rad: Option<Vec<f64>>,
    pub opt: Option<Vec<f64>>,
    pub fused: Vec<f64>,
    pub combined: Vec<f64>,
}

/// `0.5·rad + 0.5·opt + fused`, entrywise.
pub fn combine_scores(rad: &[f64], opt: &[f64], fused: &[f64]) -> Result<Vec<f64>> {
    if rad.len() != fused.len() || opt.len() != fused.len() {
        return Err(Error::Shape {
            op: "combine_scores",
            left: (rad.len(), opt.len()),
            right: (fused.len(), fused.len()),
        });
    }
    Ok(rad
        .iter()
        .zip(opt)
        .zip(fused)
        .map(|((r, o), f)| AUX_WEIGHT * r + AUX_WEIGHT * o + FUSED_WEIGHT * f)
        .collect())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

impl PredictionScores {
    pub fn predicted_class(&self) -> usize {
        argmax(&self.combined)
    }
}

/// Attention outputs of one forward pass (`fused` indexes radar rows first).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleAttention {
    pub rad: Option<AttentionOutput>,
    pub opt: Option<AttentionOutput>,
    pub fused: Option<AttentionOutput>,
}

/// How a forward pass runs.
pub enum Pass<'a> {
    /// Dropout off, nothing recorded.
    Eval,
    /// Dropout off, activations recorded for `backward`.
    Record,
    /// Dropout on, activations recorded.
    Train { dropout: f64, rng: &'a mut SeededRng },
}

struct Record {
    level: usize,
    target: usize,
    radar: Option<(FcgruTrace, AttentionTrace)>,
    optical: Option<(FcgruTrace, AttentionTrace)>,
    fused: Option<AttentionTrace>,
    radar_len: usize,
}

/// Everything produced by [`Hob2srnnModel::forward`].
pub struct ForwardOutput {
    pub loss: Option<LossBreakdown>,
    pub scores: PredictionScores,
    pub attention: SampleAttention,
    record: Option<Record>,
}

/// Two-branch network with per-level output heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Hob2srnnModel {
    config: ModelConfig,
    radar: Option<FcgruParams>,
    optical: Option<FcgruParams>,
    att_rad: Option<AttentionParams>,
    att_opt: Option<AttentionParams>,
    att_fused: Option<AttentionParams>,
    class_counts: Vec<usize>,
    heads: Vec<Option<LevelHeads>>,
    active_level: usize,
}

impl Hob2srnnModel {
    /// Fresh network with heads for `level` only. `class_counts[k]` is the
    /// number of classes at taxonomy level `k`.
    pub fn new(config: ModelConfig, class_counts: Vec<usize>, level: usize, rng: &mut SeededRng) -> Result<Self> {
        if config.enrichment == Enrichment::Identity && config.candidate_input == CandidateInput::Raw {
            // Identical to Enriched in that case; keep a single representation.
            return Err(Error::input("raw candidate input is meaningless without enrichment"));
        }
        let mut model = Hob2srnnModel::skeleton(config, class_counts)?;
        let d = config.hidden_units;
        if config.sources.uses_radar() {
            model.radar = Some(FcgruParams::new(config.branch(config.radar_channels), rng)?);
        }
        if config.sources.uses_optical() {
            model.optical = Some(FcgruParams::new(config.branch(config.optical_channels), rng)?);
        }
        if config.attention != AttentionMode::Mean {
            if config.sources.uses_radar() {
                model.att_rad = Some(AttentionParams::new(d, rng));
            }
            if config.sources.uses_optical() {
                model.att_opt = Some(AttentionParams::new(d, rng));
            }
            if config.sources == Sources::Both {
                model.att_fused = Some(AttentionParams::new(d, rng));
            }
        }
        model.init_heads(level, model.class_counts[level], rng)?;
        model.active_level = level;
        Ok(model)
    }

    /// Structure without weights, used by checkpoint loading.
    fn skeleton(config: ModelConfig, class_counts: Vec<usize>) -> Result<Self> {
        if class_counts.is_empty() || class_counts.contains(&0) {
            return Err(Error::input("every taxonomy level needs at least one class"));
        }
        if config.hidden_units == 0 {
            return Err(Error::input("hidden width must be positive"));
        }
        Ok(Hob2srnnModel {
            config,
            radar: None,
            optical: None,
            att_rad: None,
            att_opt: None,
            att_fused: None,
            heads: vec![None; class_counts.len()],
            class_counts,
            active_level: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn active_level(&self) -> usize {
        self.active_level
    }

    pub fn heads(&self, level: usize) -> Option<&LevelHeads> {
        self.heads.get(level).and_then(Option::as_ref)
    }

    pub fn has_heads(&self, level: usize) -> bool {
        self.heads(level).is_some()
    }

    pub fn radar_branch(&self) -> Option<&FcgruParams> {
        self.radar.as_ref()
    }

    pub fn optical_branch(&self) -> Option<&FcgruParams> {
        self.optical.as_ref()
    }

    pub fn attention_params(&self) -> [Option<&AttentionParams>; 3] {
        [self.att_rad.as_ref(), self.att_opt.as_ref(), self.att_fused.as_ref()]
    }

    /// Replaces the heads of `level` with freshly initialized ones of
    /// `d × classes` shape.
    pub fn init_heads(&mut self, level: usize, classes: usize, rng: &mut SeededRng) -> Result<()> {
        if level >= self.class_counts.len() {
            return Err(Error::input(format!("unknown level {level}")));
        }
        if classes != self.class_counts[level] {
            return Err(Error::input(format!(
                "level {level} has {} classes, not {classes}",
                self.class_counts[level]
            )));
        }
        let d = self.config.hidden_units;
        let both = self.config.sources == Sources::Both;
        let rad = both.then(|| LinearHead::new(d, classes, rng));
        let opt = both.then(|| LinearHead::new(d, classes, rng));
        let fused = LinearHead::new(d, classes, rng);
        self.heads[level] = Some(LevelHeads { rad, opt, fused });
        Ok(())
    }

    pub fn set_active_level(&mut self, level: usize) -> Result<()> {
        if !self.has_heads(level) {
            return Err(Error::State(format!("no output heads for level {level}")));
        }
        self.active_level = level;
        Ok(())
    }

    fn check_sample(&self, sample: &SegmentSample) -> Result<()> {
        let c = &self.config;
        if c.sources.uses_radar() && sample.radar.cols() != c.radar_channels {
            return Err(Error::Shape {
                op: "forward (radar)",
                left: sample.radar.shape(),
                right: (sample.radar.rows(), c.radar_channels),
            });
        }
        if c.sources.uses_optical() && sample.optical.cols() != c.optical_channels {
            return Err(Error::Shape {
                op: "forward (optical)",
                left: sample.optical.shape(),
                right: (sample.optical.rows(), c.optical_channels),
            });
        }
        Ok(())
    }

    /// Runs the network on one sample at taxonomy `level`. A loss is computed
    /// when `target` (class index at that level) is given.
    pub fn forward(&self, sample: &SegmentSample, level: usize, target: Option<usize>, pass: Pass<'_>) -> Result<ForwardOutput> {
        let heads = self
            .heads
            .get(level)
            .ok_or_else(|| Error::input(format!("unknown level {level}")))?
            .as_ref()
            .ok_or_else(|| Error::State(format!("level {level} has no trained heads")))?;
        if let Some(t) = target {
            if t >= self.class_counts[level] {
                return Err(Error::input(format!("target class {t} out of range at level {level}")));
            }
        }
        self.check_sample(sample)?;
        let mode = self.config.attention;
        let (record, mut train) = match pass {
            Pass::Eval => (false, None),
            Pass::Record => (true, None),
            Pass::Train { dropout, rng } => (true, Some((dropout, rng))),
        };

        let radar = match &self.radar {
            Some(p) => {
                let drop = train.as_mut().map(|(rate, r)| Dropout { rate: *rate, rng: &mut **r });
                let (h, trace) = p.unroll(&sample.radar, drop)?;
                let (out, att_trace) = attend(mode, self.att_rad.as_ref(), &h)?;
                Some((h, trace, out, att_trace))
            }
            None => None,
        };
        let optical = match &self.optical {
            Some(p) => {
                let drop = train.as_mut().map(|(rate, r)| Dropout { rate: *rate, rng: &mut **r });
                let (h, trace) = p.unroll(&sample.optical, drop)?;
                let (out, att_trace) = attend(mode, self.att_opt.as_ref(), &h)?;
                Some((h, trace, out, att_trace))
            }
            None => None,
        };

        let (fused_out, fused_trace, radar_len) = match (&radar, &optical) {
            (Some(r), Some(o)) => {
                let stacked = r.0.vstack(&o.0)?;
                let (out, trace) = attend(mode, self.att_fused.as_ref(), &stacked)?;
                (Some(out), Some(trace), r.0.rows())
            }
            _ => (None, None, 0),
        };

        let single_feat = || -> &[f64] {
            match (&radar, &optical) {
                (Some(r), None) => &r.2.feat,
                (None, Some(o)) => &o.2.feat,
                _ => unreachable!("single-source model"),
            }
        };
        let fused_feat: &[f64] = match &fused_out {
            Some(out) => &out.feat,
            None => single_feat(),
        };

        let fused_logits = heads.fused.logits(fused_feat);
        let rad_logits = heads.rad.as_ref().zip(radar.as_ref()).map(|(hd, r)| hd.logits(&r.2.feat));
        let opt_logits = heads.opt.as_ref().zip(optical.as_ref()).map(|(hd, o)| hd.logits(&o.2.feat));

        let fused_p = softmax(&fused_logits);
        let rad_p = rad_logits.as_deref().map(softmax);
        let opt_p = opt_logits.as_deref().map(softmax);
        let combined = match (&rad_p, &opt_p) {
            (Some(r), Some(o)) => combine_scores(r, o, &fused_p)?,
            _ => fused_p.iter().map(|v| FUSED_WEIGHT * v).collect(),
        };

        let loss = target.map(|t| {
            let l_fused = cross_entropy(&fused_logits, t);
            let l_rad = rad_logits.as_deref().map_or(0.0, |l| cross_entropy(l, t));
            let l_opt = opt_logits.as_deref().map_or(0.0, |l| cross_entropy(l, t));
            LossBreakdown {
                l_rad,
                l_opt,
                l_fused,
                l_total: loss_total(l_rad, l_opt, l_fused),
            }
        });

        let attention = SampleAttention {
            rad: radar.as_ref().map(|r| r.2.clone()),
            opt: optical.as_ref().map(|o| o.2.clone()),
            fused: fused_out,
        };
        let record = match (record, target) {
            (true, Some(target)) => Some(Record {
                level,
                target,
                radar: radar.map(|r| (r.1, r.3)),
                optical: optical.map(|o| (o.1, o.3)),
                fused: fused_trace,
                radar_len,
            }),
            _ => None,
        };
        Ok(ForwardOutput {
            loss,
            scores: PredictionScores {
                rad: rad_p,
                opt: opt_p,
                fused: fused_p,
                combined,
            },
            attention,
            record,
        })
    }

    /// Dropout-free class prediction at `level`.
    pub fn predict(&self, sample: &SegmentSample, level: usize) -> Result<usize> {
        Ok(self.forward(sample, level, None, Pass::Eval)?.scores.predicted_class())
    }

    /// Gradients of `scale · l_total` for a recorded forward pass, in the
    /// order of [`Parameters::tensors`] with the pass's level active.
    pub fn backward(&self, out: &ForwardOutput, scale: f64) -> Result<Vec<Matrix>> {
        let rec = out
            .record
            .as_ref()
            .ok_or_else(|| Error::State("backward requires a recorded forward pass with a target".into()))?;
        if rec.level != self.active_level {
            return Err(Error::State(format!(
                "forward ran at level {} but level {} is active",
                rec.level, self.active_level
            )));
        }
        let heads = self.heads(rec.level).expect("recorded level has heads");
        let d = self.config.hidden_units;
        let t = rec.target;
        let att = &out.attention;
        let scores = &out.scores;

        let head_grad = |head: &LinearHead, p: &[f64], feat: &[f64], weight: f64| {
            let dlogits: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(k, &pk)| weight * scale * (pk - if k == t { 1.0 } else { 0.0 }))
                .collect();
            let mut gw = head.w.zeros_like();
            crate::numkernel::outer_acc(&mut gw, feat, &dlogits);
            let gb = Matrix::from_raw(1, dlogits.len(), dlogits.clone());
            let mut d_feat = vec![0.0; d];
            crate::numkernel::vec_mat_t_acc(&dlogits, &head.w, &mut d_feat);
            (LinearHead { w: gw, b: gb }, d_feat)
        };

        let mut g_rad_head = None;
        let mut g_opt_head = None;
        let mut d_feat_rad = None;
        let mut d_feat_opt = None;
        if let (Some(hd), Some(p), Some(a)) = (&heads.rad, &scores.rad, &att.rad) {
            let (g, df) = head_grad(hd, p, &a.feat, AUX_WEIGHT);
            g_rad_head = Some(g);
            d_feat_rad = Some(df);
        }
        if let (Some(hd), Some(p), Some(a)) = (&heads.opt, &scores.opt, &att.opt) {
            let (g, df) = head_grad(hd, p, &a.feat, AUX_WEIGHT);
            g_opt_head = Some(g);
            d_feat_opt = Some(df);
        }

        let mut g_att_fused = None;
        let mut d_h_rad: Option<Matrix> = None;
        let mut d_h_opt: Option<Matrix> = None;
        let g_fused_head;
        match (&att.fused, &rec.fused) {
            (Some(fout), Some(ftrace)) => {
                let (g, df) = head_grad(&heads.fused, &scores.fused, &fout.feat, FUSED_WEIGHT);
                g_fused_head = g;
                let (ga, d_stack) = attend_backward(self.att_fused.as_ref(), fout, ftrace, &df)?;
                g_att_fused = ga;
                d_h_rad = Some(d_stack.slice_rows(0, rec.radar_len));
                d_h_opt = Some(d_stack.slice_rows(rec.radar_len, d_stack.rows()));
            }
            _ => {
                let feat = att.rad.as_ref().or(att.opt.as_ref()).expect("one source").feat.clone();
                let (g, df) = head_grad(&heads.fused, &scores.fused, &feat, FUSED_WEIGHT);
                g_fused_head = g;
                if self.radar.is_some() {
                    d_feat_rad = Some(df);
                } else {
                    d_feat_opt = Some(df);
                }
            }
        }

        let branch = |params: &Option<FcgruParams>,
                          att_params: &Option<AttentionParams>,
                          traces: &Option<(FcgruTrace, AttentionTrace)>,
                          att_out: &Option<AttentionOutput>,
                          d_feat: Option<Vec<f64>>,
                          d_h_extra: Option<Matrix>|
         -> Result<(Option<FcgruParams>, Option<AttentionParams>)> {
            let (Some(p), Some((ftrace, atrace)), Some(aout)) = (params, traces, att_out) else {
                return Ok((None, None));
            };
            let mut d_h = Matrix::zeros(hidden_rows(ftrace), d);
            let mut g_att = None;
            if let Some(df) = d_feat {
                let (ga, dh) = attend_backward(att_params.as_ref(), aout, atrace, &df)?;
                g_att = ga;
                d_h.add_assign(&dh)?;
            }
            if let Some(extra) = d_h_extra {
                d_h.add_assign(&extra)?;
            }
            let (g, _) = p.backward(ftrace, &d_h)?;
            Ok((Some(g), g_att))
        };
        let (g_radar, g_att_rad) = branch(&self.radar, &self.att_rad, &rec.radar, &att.rad, d_feat_rad, d_h_rad)?;
        let (g_optical, g_att_opt) = branch(&self.optical, &self.att_opt, &rec.optical, &att.opt, d_feat_opt, d_h_opt)?;

        let mut grads = self.clone_structure();
        grads.radar = g_radar.or_else(|| self.radar.as_ref().map(FcgruParams::zeros_like));
        grads.optical = g_optical.or_else(|| self.optical.as_ref().map(FcgruParams::zeros_like));
        grads.att_rad = g_att_rad.or_else(|| self.att_rad.as_ref().map(AttentionParams::zeros_like));
        grads.att_opt = g_att_opt.or_else(|| self.att_opt.as_ref().map(AttentionParams::zeros_like));
        grads.att_fused = g_att_fused.or_else(|| self.att_fused.as_ref().map(AttentionParams::zeros_like));
        grads.heads[rec.level] = Some(LevelHeads {
            rad: g_rad_head,
            opt: g_opt_head,
            fused: g_fused_head,
        });
        Ok(grads.tensors().into_iter().map(|(_, m)| m.clone()).collect())
    }

    fn clone_structure(&self) -> Hob2srnnModel {
        Hob2srnnModel {
            config: self.config,
            radar: None,
            optical: None,
            att_rad: None,
            att_opt: None,
            att_fused: None,
            class_counts: self.class_counts.clone(),
            heads: vec![None; self.class_counts.len()],
            active_level: self.active_level,
        }
    }

    /// Parameters shared across taxonomy levels (branches and attention).
    pub fn shared_tensors<'a>(&'a self) -> Vec<(String, &'a Matrix)> {
        let mut out = Vec::new();
        let mut push = |prefix: &str, items: Vec<(String, &'a Matrix)>| {
            for (n, m) in items {
                out.push((format!("{prefix}.{n}"), m));
            }
        };
        if let Some(p) = &self.radar {
            push("radar", p.tensors());
        }
        if let Some(p) = &self.optical {
            push("optical", p.tensors());
        }
        if let Some(p) = &self.att_rad {
            push("att_rad", p.tensors());
        }
        if let Some(p) = &self.att_opt {
            push("att_opt", p.tensors());
        }
        if let Some(p) = &self.att_fused {
            push("att_fused", p.tensors());
        }
        out
    }

    fn head_tensors(&self, level: usize) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        if let Some(h) = self.heads(level) {
            for (name, head) in [("rad", h.rad.as_ref()), ("opt", h.opt.as_ref()), ("fused", Some(&h.fused))] {
                if let Some(head) = head {
                    out.push((format!("heads.{level}.{name}.w"), &head.w));
                    out.push((format!("heads.{level}.{name}.b"), &head.b));
                }
            }
        }
        out
    }

    /// Every tensor, including heads of inactive levels.
    pub fn all_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = self.shared_tensors();
        for level in 0..self.heads.len() {
            out.extend(self.head_tensors(level));
        }
        out
    }

    fn all_tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let names: Vec<String> = self.all_tensors().into_iter().map(|(n, _)| n).collect();
        let mut mats: Vec<&mut Matrix> = Vec::new();
        for p in [&mut self.radar, &mut self.optical].into_iter().flatten() {
            mats.extend(p.tensors_mut());
        }
        for p in [&mut self.att_rad, &mut self.att_opt, &mut self.att_fused].into_iter().flatten() {
            mats.extend(p.tensors_mut());
        }
        for h in self.heads.iter_mut().flatten() {
            for head in [h.rad.as_mut(), h.opt.as_mut(), Some(&mut h.fused)].into_iter().flatten() {
                mats.push(&mut head.w);
                mats.push(&mut head.b);
            }
        }
        names.into_iter().zip(mats).collect()
    }

    /// SHA-256 over the bit patterns of every shared (non-head) parameter.
    pub fn shared_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, m) in self.shared_tensors() {
            hasher.update(name.as_bytes());
            hasher.update((m.rows() as u64).to_le_bytes());
            hasher.update((m.cols() as u64).to_le_bytes());
            for v in m.data() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

fn hidden_rows(trace: &FcgruTrace) -> usize {
    trace.h.as_ref().map_or(0, Matrix::rows)
}

/// `-ln softmax(logits)[target]`, computed through log-sum-exp.
fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// Shared parameters followed by the active level's heads.
impl Parameters for Hob2srnnModel {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = self.shared_tensors();
        out.extend(self.head_tensors(self.active_level));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let active = self.active_level;
        let prefix = format!("heads.{active}.");
        self.all_tensors_mut()
            .into_iter()
            .filter(|(n, _)| !n.starts_with("heads.") || n.starts_with(&prefix))
            .map(|(_, m)| m)
            .collect()
    }
}
