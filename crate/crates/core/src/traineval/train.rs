use rayon::prelude::*;

use super::{MetricsReport, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hierarchy::{pretrain_transfer, Stage};
use crate::model::{Hob2srnnModel, LossBreakdown, Pass};
use crate::numkernel::{AdamState, Matrix, SeededRng};

/// Mean losses over one epoch and the validation accuracy after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub level: usize,
    /// 1-based within the level.
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_accuracy: f64,
}

/// The epoch whose weights were kept for a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSelection {
    pub level: usize,
    pub epoch: usize,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Hob2srnnModel,
    pub log: Vec<EpochRecord>,
    pub selected: Vec<LevelSelection>,
}

/// Header of the per-epoch log table.
pub const EPOCH_LOG_HEADER: &str = "level,epoch,l_rad,l_opt,l_fused,l_total,val_accuracy";

/// Per-epoch log as comma-separated rows under [`EPOCH_LOG_HEADER`].
pub fn epoch_log_table(log: &[EpochRecord]) -> String {
    let mut out = format!("{EPOCH_LOG_HEADER}\n");
    for r in log {
        let l = &r.loss;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.level, r.epoch, l.l_rad, l.l_opt, l.l_fused, l.l_total, r.val_accuracy
        ));
    }
    out
}

/// The level training starts at: the most general one, or the target level
/// when hierarchical pretraining is disabled.
pub fn start_level(config: &TrainConfig, dataset: &Dataset) -> usize {
    if config.hierarchical() {
        0
    } else {
        dataset.hierarchy.target_level()
    }
}

/// Fresh model for `dataset` (already passed through
/// [`TrainConfig::prepare_dataset`]) with heads at the start level.
pub fn init_model(config: &TrainConfig, dataset: &Dataset, rng: &mut SeededRng) -> Result<Hob2srnnModel> {
    config.validate()?;
    Hob2srnnModel::new(
        config.model_config(&dataset.header),
        dataset.hierarchy.class_counts(),
        start_level(config, dataset),
        rng,
    )
}

fn stages(config: &TrainConfig, dataset: &Dataset) -> Vec<Stage> {
    if config.hierarchical() {
        dataset.hierarchy.pretrain_schedule(config.epochs_per_level)
    } else {
        vec![Stage {
            level: dataset.hierarchy.target_level(),
            epochs: config.epochs_per_level,
        }]
    }
}

fn add_loss(acc: &mut LossBreakdown, l: &LossBreakdown, w: f64) {
    acc.l_rad += w * l.l_rad;
    acc.l_opt += w * l.l_opt;
    acc.l_fused += w * l.l_fused;
    acc.l_total += w * l.l_total;
}

/// Combined-score predictions at `level`, in sample order.
pub fn predict_all(model: &Hob2srnnModel, dataset: &Dataset, level: usize) -> Result<Vec<usize>> {
    dataset.samples.par_iter().map(|s| model.predict(s, level)).collect()
}

fn accuracy(model: &Hob2srnnModel, dataset: &Dataset, labels: &[usize], level: usize) -> Result<f64> {
    let pred = predict_all(model, dataset, level)?;
    let hits = pred.iter().zip(labels).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// One mini-batch step: per-sample forward/backward fanned out, gradients
/// summed in batch order, one Adam update on the mean loss. Each sample's
/// dropout stream is keyed by a batch seed and its batch position, so the
/// result does not depend on the worker count.
fn batch_step(
    model: &mut Hob2srnnModel,
    adam: &mut AdamState,
    train: &Dataset,
    labels: &[usize],
    batch: &[usize],
    level: usize,
    config: &TrainConfig,
    batch_seed: u64,
) -> Result<Vec<LossBreakdown>> {
    let scale = 1.0 / batch.len() as f64;
    let shared: &Hob2srnnModel = model;
    let results: Vec<(LossBreakdown, Vec<Matrix>)> = batch
        .par_iter()
        .enumerate()
        .map(|(pos, &i)| {
            let mut rng = SeededRng::with_stream(batch_seed, pos as u64);
            let pass = Pass::Train {
                dropout: config.dropout,
                rng: &mut rng,
            };
            let out = shared.forward(&train.samples[i], level, Some(labels[i]), pass)?;
            let grads = shared.backward(&out, scale)?;
            Ok((out.loss.expect("target given"), grads))
        })
        .collect::<Result<_>>()?;
    let mut losses = Vec::with_capacity(results.len());
    let mut total: Option<Vec<Matrix>> = None;
    for (loss, grads) in results {
        losses.push(loss);
        match &mut total {
            None => total = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g)?;
                }
            }
        }
    }
    adam.update(model, &total.expect("nonempty batch"), config.learning_rate)?;
    Ok(losses)
}

/// Runs the training schedule and returns the best-validation model of the
/// target level.
///
/// Each level trains for `epochs_per_level` epochs of shuffled mini-batches
/// with a fresh Adam state. After every epoch the validation accuracy at that
/// level is measured; the earliest epoch with the highest accuracy is kept
/// and is what the next level starts from. With zero epochs the model is
/// returned untouched.
pub fn train(
    model: Hob2srnnModel,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::input("training and validation partitions must be nonempty"));
    }
    if train.hierarchy != val.hierarchy || train.header != val.header {
        return Err(Error::input("training and validation sets disagree on header or taxonomy"));
    }
    let schedule = stages(config, train);
    let first = schedule[0].level;
    if model.active_level() != first || model.class_counts() != train.hierarchy.class_counts().as_slice() {
        return Err(Error::State(format!(
            "model is not prepared for level {first} of this taxonomy"
        )));
    }
    let mut outcome = TrainOutcome {
        model,
        log: Vec::new(),
        selected: Vec::new(),
    };
    if config.epochs_per_level == 0 {
        return Ok(outcome);
    }
    for (k, stage) in schedule.iter().enumerate() {
        let level = stage.level;
        if k > 0 {
            pretrain_transfer(&mut outcome.model, &train.hierarchy, level, rng)?;
        }
        let labels = train.labels_at(level)?;
        let val_labels = val.labels_at(level)?;
        let mut model = outcome.model.clone();
        let mut adam = AdamState::new(&model);
        let mut best: Option<(LevelSelection, Hob2srnnModel)> = None;
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 1..=stage.epochs {
            rng.shuffle(&mut order);
            let mut sum = LossBreakdown::default();
            for batch in order.chunks(config.batch_size) {
                let batch_seed = rng.next_u64();
                for l in batch_step(&mut model, &mut adam, train, &labels, batch, level, config, batch_seed)? {
                    add_loss(&mut sum, &l, 1.0);
                }
            }
            let mut loss = LossBreakdown::default();
            add_loss(&mut loss, &sum, 1.0 / train.len() as f64);
            let val_accuracy = accuracy(&model, val, &val_labels, level)?;
            outcome.log.push(EpochRecord {
                level,
                epoch,
                loss,
                val_accuracy,
            });
            if best.as_ref().is_none_or(|(b, _)| val_accuracy > b.val_accuracy) {
                let sel = LevelSelection {
                    level,
                    epoch,
                    val_accuracy,
                };
                best = Some((sel, model.clone()));
            }
        }
        let (sel, kept) = best.expect("at least one epoch");
        outcome.selected.push(sel);
        outcome.model = kept;
    }
    Ok(outcome)
}

/// Metrics of the combined prediction at `level`, dropout off.
pub fn evaluate(model: &Hob2srnnModel, dataset: &Dataset, level: usize) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::input("cannot evaluate an empty set"));
    }
    let truth = dataset.labels_at(level)?;
    let pred = predict_all(model, dataset, level)?;
    MetricsReport::from_predictions(&truth, &pred, dataset.hierarchy.class_count(level))
}

/// Metrics of the combined score and of each individual classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierReports {
    pub combined: MetricsReport,
    pub fused: MetricsReport,
    pub rad: Option<MetricsReport>,
    pub opt: Option<MetricsReport>,
}

pub fn evaluate_classifiers(model: &Hob2srnnModel, dataset: &Dataset, level: usize) -> Result<ClassifierReports> {
    if dataset.is_empty() {
        return Err(Error::input("cannot evaluate an empty set"));
    }
    let truth = dataset.labels_at(level)?;
    let k = dataset.hierarchy.class_count(level);
    let scores: Vec<_> = dataset
        .samples
        .par_iter()
        .map(|s| Ok(model.forward(s, level, None, Pass::Eval)?.scores))
        .collect::<Result<_>>()?;
    let argmax = crate::model::argmax;
    let report = |pred: Vec<usize>| MetricsReport::from_predictions(&truth, &pred, k);
    let aux = |pick: fn(&crate::model::PredictionScores) -> Option<&Vec<f64>>| -> Result<Option<MetricsReport>> {
        let pred: Option<Vec<usize>> = scores.iter().map(|s| pick(s).map(|p| argmax(p))).collect();
        pred.map(report).transpose()
    };
    Ok(ClassifierReports {
        combined: report(scores.iter().map(|s| s.predicted_class()).collect())?,
        fused: report(scores.iter().map(|s| argmax(&s.fused)).collect())?,
        rad: aux(|s| s.rad.as_ref())?,
        opt: aux(|s| s.opt.as_ref())?,
    })
}
