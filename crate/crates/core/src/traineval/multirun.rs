use rayon::prelude::*;

use super::metrics::mean_std;
use super::{evaluate, init_model, train, Ablation, MetricsReport, TrainConfig, TrainOutcome};
use crate::data::{fit_normalize, split_grouped, Dataset, NormalizationStats, Split, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};
use crate::model::Sources;
use crate::numkernel::SeededRng;

/// Default number of random splits averaged per experiment.
pub const DEFAULT_SPLITS: usize = 10;

/// Everything one split/normalize/train/evaluate cycle produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub split: Split,
    pub normalization: NormalizationStats,
    pub outcome: TrainOutcome,
    /// Target-level metrics on the test partition.
    pub test: MetricsReport,
}

/// Splits `dataset` with `seed`, fits normalization on the training part,
/// trains and evaluates on the test part. The same seed drives split,
/// initialization, shuffling and dropout, in that order.
pub fn run_once(dataset: &Dataset, config: &TrainConfig, seed: u64) -> Result<RunResult> {
    let ds = config.prepare_dataset(dataset)?;
    let mut rng = SeededRng::new(seed);
    let split = split_grouped(&ds, DEFAULT_FRACTIONS, &mut rng)?;
    let normalization = fit_normalize(&ds.subset(&split.train).samples)?;
    let normalized = normalization.apply_dataset(&ds)?;
    let model = init_model(config, &normalized, &mut rng)?;
    let outcome = train(
        model,
        &normalized.subset(&split.train),
        &normalized.subset(&split.val),
        config,
        &mut rng,
    )?;
    let target = normalized.hierarchy.target_level();
    let test = evaluate(&outcome.model, &normalized.subset(&split.test), target)?;
    Ok(RunResult {
        seed,
        split,
        normalization,
        outcome,
        test,
    })
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> MeanStd {
        let (mean, std) = mean_std(xs);
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone)]
pub struct MultiRunReport {
    pub runs: Vec<RunResult>,
    pub accuracy: MeanStd,
    pub weighted_f1: MeanStd,
    pub kappa: MeanStd,
}

impl MultiRunReport {
    /// TOML summary: per-metric mean/std and each run's seed and metrics.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for (name, m) in [
            ("accuracy", self.accuracy),
            ("weighted_f1", self.weighted_f1),
            ("kappa", self.kappa),
        ] {
            out.push_str(&format!("{name}_mean = {}\n{name}_std = {}\n", m.mean, m.std));
        }
        for r in &self.runs {
            out.push_str(&format!(
                "\n[[runs]]\nseed = {}\naccuracy = {}\nweighted_f1 = {}\nkappa = {}\n",
                r.seed, r.test.accuracy, r.test.weighted_f1, r.test.kappa
            ));
        }
        out
    }
}

/// [`run_once`] for seeds `base_seed .. base_seed + n`, run in parallel and
/// reported in seed order.
pub fn multi_run(dataset: &Dataset, config: &TrainConfig, n: usize, base_seed: u64) -> Result<MultiRunReport> {
    if n == 0 {
        return Err(Error::input("multi_run needs at least one split"));
    }
    let runs: Vec<RunResult> = (0..n as u64)
        .into_par_iter()
        .map(|i| run_once(dataset, config, base_seed + i))
        .collect::<Result<_>>()?;
    let pick = |f: fn(&MetricsReport) -> f64| MeanStd::of(&runs.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
    Ok(MultiRunReport {
        accuracy: pick(|m| m.accuracy),
        weighted_f1: pick(|m| m.weighted_f1),
        kappa: pick(|m| m.kappa),
        runs,
    })
}

/// One entry of an ablation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub ablation: Ablation,
    pub sources: Sources,
}

impl Variant {
    /// The full model, each single-mechanism ablation and both single-source
    /// models.
    pub fn standard() -> Vec<Variant> {
        let mut out: Vec<Variant> = Ablation::ALL
            .into_iter()
            .map(|a| Variant {
                name: if a == Ablation::None { "full" } else { a.name() },
                ablation: a,
                sources: Sources::Both,
            })
            .collect();
        out.push(Variant {
            name: "radar",
            ablation: Ablation::None,
            sources: Sources::Radar,
        });
        out.push(Variant {
            name: "optical",
            ablation: Ablation::None,
            sources: Sources::Optical,
        });
        out
    }

    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            ablation: self.ablation,
            sources: self.sources,
            ..base.clone()
        }
    }
}

/// [`multi_run`] for each variant with the same seeds.
pub fn ablation_sweep(
    dataset: &Dataset,
    base: &TrainConfig,
    variants: &[Variant],
    n: usize,
    base_seed: u64,
) -> Result<Vec<(Variant, MultiRunReport)>> {
    variants
        .iter()
        .map(|v| Ok((*v, multi_run(dataset, &v.apply(base), n, base_seed)?)))
        .collect()
}
