//! The experiment stages. Each stage reads the artifacts of the stages
//! before it from the run directory, writes JSON plus CSV/text/SVG reports,
//! and records them in the manifest. A stage whose JSON already exists is
//! reused unless `force` is set.

use std::fmt::Write as _;

use imbapipe_core::bundle::ModelBundle;
use imbapipe_core::classifiers::{Family, ModelParams, ModelSpec};
use imbapipe_core::dataset::{apply_normalizer, encode_labels, fit_normalizer, load_csv, Dataset};
use imbapipe_core::evaluation::{
    feature_grid_search, grid_search, score_table_csv, score_table_text, CvContext, CvOptions, CvPlan, FeatureSubset,
    Pipeline, PipelineScore, ScoreRow,
};
use imbapipe_core::importance::{group_importances, permutation_importance_in, ImportanceReport};
use imbapipe_core::resampling::ResamplerKind;
use imbapipe_core::statcompare::{
    cd_diagram_data, friedman_test, nemenyi_compare, rank_pipelines, render_cd_svg, FriedmanResult, NemenyiResult,
};
use imbapipe_core::util::{self, derive_seed};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::RunDir;
use crate::config::{ExperimentConfig, RankUnit};
use crate::error::StageError;

pub const RESAMPLE_BENCH: &str = "resample-bench";
pub const MODEL_SELECT: &str = "model-select";
pub const FEATURE_SELECT: &str = "feature-select";
pub const COMPARE: &str = "compare";
pub const IMPORTANCE: &str = "importance";
pub const ABLATION: &str = "ablation";
pub const TRAIN: &str = "train";

/// Loads the CSV and encodes the target; a table without both classes is a data error.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, StageError> {
    let path = &cfg.dataset.path;
    let raw = load_csv(path, &cfg.dataset.label_column)
        .map_err(|e| StageError::Data(format!("{}: {e}", path.display())))?;
    let data = encode_labels(&raw, &cfg.positive_classes()).map_err(|e| StageError::Data(e.to_string()))?;
    let (neg, pos) = data.class_counts().map_err(|e| StageError::Data(e.to_string()))?;
    if neg == 0 || pos == 0 {
        return Err(StageError::Data(format!(
            "{} needs both classes, found {neg} negatives and {pos} positives (positive classes {:?})",
            path.display(),
            cfg.dataset.positive_classes
        )));
    }
    Ok(data)
}

/// A loaded dataset and its run directory.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    /// Raw feature values with the encoded target.
    pub raw: Dataset,
    /// What the CV stages see: globally normalized unless the normalizer
    /// is refit per fold.
    pub data: Dataset,
    pub dir: RunDir,
    pub force: bool,
}

impl Experiment {
    pub fn open(cfg: ExperimentConfig, force: bool) -> Result<Experiment, StageError> {
        let raw = load_dataset(&cfg)?;
        let dir = RunDir::open(&cfg)?;
        let data = if cfg.cv.per_fold_normalization {
            raw.clone()
        } else {
            apply_normalizer(&fit_normalizer(&raw)?, &raw)?
        };
        Ok(Experiment {
            cfg,
            raw,
            data,
            dir,
            force,
        })
    }

    pub fn context(&self, plan: CvPlan) -> Result<CvContext<'_>, StageError> {
        let options = CvOptions {
            per_fold_normalization: self.cfg.cv.per_fold_normalization,
            resample_before_split: false,
        };
        CvContext::new(&self.data, plan, options).map_err(|e| StageError::Data(e.to_string()))
    }

    fn cached<T: serde::de::DeserializeOwned>(&self, file: &str, stage: &str) -> Option<T> {
        if self.force || !self.dir.exists(file) {
            return None;
        }
        log::info!("{stage}: reusing {}", self.dir.path(file).display());
        self.dir.read_json(file, stage).ok()
    }

    fn families(&self) -> Result<Vec<Family>, StageError> {
        Ok(self.cfg.families()?)
    }

    fn default_pipeline(&self, kind: ResamplerKind, family: Family) -> Pipeline {
        Pipeline::new(
            self.cfg.resampler(kind),
            ModelSpec::new(self.cfg.default_params(family), self.cfg.model_seed()),
            FeatureSubset::All,
        )
    }

    /// The configured grid with the default point prepended when absent,
    /// so tuning never reports less than the untuned model on the same folds.
    fn search_grid(&self, family: Family) -> Vec<ModelParams> {
        let mut grid = self.cfg.grid(family);
        let default = self.cfg.default_params(family);
        if !grid.contains(&default) {
            grid.insert(0, default);
        }
        grid
    }
}

/// Cross-validates every pipeline; failures become `None` plus a warning.
fn evaluate_all(ctx: &CvContext<'_>, pipelines: &[Pipeline], warnings: &mut Vec<String>) -> Vec<Option<PipelineScore>> {
    let results: Vec<_> = pipelines.par_iter().map(|p| ctx.evaluate(p)).collect();
    results
        .into_iter()
        .zip(pipelines)
        .map(|(r, p)| match r {
            Ok(s) => {
                warnings.extend(s.warnings.iter().map(|w| format!("{}: {w}", p.method_name())));
                Some(s)
            }
            Err(e) => {
                warnings.push(format!("{} ({}) failed: {e}", p.method_name(), p.model.params.describe()));
                None
            }
        })
        .collect()
}

/// Indices by descending mean, then ascending error, then position.
fn rank_order(scores: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .0
            .total_cmp(&scores[a].0)
            .then(scores[a].1.total_cmp(&scores[b].1))
            .then(a.cmp(&b))
    });
    order
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    util::mean(&v)
}

fn write_tables(dir: &RunDir, stem: &str, rows: &[ScoreRow]) -> Result<[String; 2], StageError> {
    let csv = format!("{stem}.csv");
    let txt = format!("{stem}.txt");
    dir.write_bytes(&csv, score_table_csv(rows).as_bytes())?;
    dir.write_bytes(&txt, score_table_text(rows).as_bytes())?;
    Ok([csv, txt])
}

// ---------------------------------------------------------------- resample-bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub family: Family,
    pub params: ModelParams,
    pub score: Option<PipelineScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplerRow {
    pub kind: ResamplerKind,
    pub name: String,
    /// Mean over families of the per-family mean balanced accuracy.
    pub mean: f64,
    /// Mean over families of the per-family error %.
    pub error_pct: f64,
    pub top: bool,
    pub pairs: Vec<PairScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleBench {
    /// Ranked best first.
    pub rows: Vec<ResamplerRow>,
    /// Balancing resamplers carried into model selection.
    pub top: Vec<ResamplerKind>,
    pub warnings: Vec<String>,
}

impl ResampleBench {
    pub fn score_rows(&self) -> Vec<ScoreRow> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = ScoreRow::new(r.name.clone(), r.mean, r.error_pct, None);
                if r.top {
                    row.mark = "*".into();
                }
                row
            })
            .collect()
    }
}

/// Cross-validates every (resampler, default model) pair and ranks the
/// resamplers by their average over families.
pub fn resample_bench(exp: &Experiment) -> Result<ResampleBench, StageError> {
    const FILE: &str = "resample_bench.json";
    if let Some(b) = exp.cached(FILE, RESAMPLE_BENCH) {
        return Ok(b);
    }
    let roster = exp.cfg.roster()?;
    let families = exp.families()?;
    let ctx = exp.context(exp.cfg.cv_plan())?;
    let pipelines: Vec<Pipeline> = roster
        .iter()
        .flat_map(|&k| families.iter().map(move |&f| (k, f)))
        .map(|(k, f)| exp.default_pipeline(k, f))
        .collect();
    let mut warnings = Vec::new();
    let scores = evaluate_all(&ctx, &pipelines, &mut warnings);

    let mut rows = Vec::new();
    for (r, &kind) in roster.iter().enumerate() {
        let pairs: Vec<PairScore> = families
            .iter()
            .enumerate()
            .map(|(i, &family)| PairScore {
                family,
                params: pipelines[r * families.len() + i].model.params,
                score: scores[r * families.len() + i].clone(),
            })
            .collect();
        let ok: Vec<&PipelineScore> = pairs.iter().filter_map(|p| p.score.as_ref()).collect();
        if ok.is_empty() {
            warnings.push(format!("{kind}: every model failed; resampler dropped"));
            continue;
        }
        rows.push(ResamplerRow {
            kind,
            name: kind.display_name().to_string(),
            mean: mean_of(ok.iter().map(|s| s.mean)),
            error_pct: mean_of(ok.iter().map(|s| s.error_pct)),
            top: false,
            pairs,
        });
    }
    if rows.is_empty() {
        return Err(StageError::Runtime("every resampler failed".into()));
    }
    let order = rank_order(&rows.iter().map(|r| (r.mean, r.error_pct)).collect::<Vec<_>>());
    let mut rows: Vec<ResamplerRow> = order.into_iter().map(|i| rows[i].clone()).collect();
    let mut top = Vec::new();
    for row in rows.iter_mut() {
        if row.kind != ResamplerKind::None && top.len() < exp.cfg.resampling.top {
            row.top = true;
            top.push(row.kind);
        }
    }
    if top.is_empty() {
        return Err(StageError::Config(crate::config::ConfigError::Invalid(
            "resampling.roster has no balancing resampler to carry forward".into(),
        )));
    }
    let bench = ResampleBench { rows, top, warnings };
    let [csv, txt] = write_tables(&exp.dir, "resample_bench", &bench.score_rows())?;
    exp.dir.write_json(FILE, &bench)?;
    exp.dir.record(RESAMPLE_BENCH, &[FILE, &csv, &txt], bench.warnings.clone())?;
    Ok(bench)
}

// ---------------------------------------------------------------- model-select

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPipeline {
    pub method: String,
    pub params: String,
    pub pipeline: Pipeline,
    pub score: PipelineScore,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub resamplers: Vec<ResamplerKind>,
    /// Ranked best first.
    pub rows: Vec<SelectedPipeline>,
    pub warnings: Vec<String>,
}

impl ModelSelection {
    pub fn score_rows(&self) -> Vec<ScoreRow> {
        self.rows
            .iter()
            .map(|r| ScoreRow::new(r.method.clone(), r.score.mean, r.score.error_pct, None))
            .collect()
    }
}

fn grid_search_pairs(
    exp: &Experiment,
    ctx: &CvContext<'_>,
    resamplers: &[ResamplerKind],
    warnings: &mut Vec<String>,
) -> Result<Vec<SelectedPipeline>, StageError> {
    let families = exp.families()?;
    let pairs: Vec<(Family, ResamplerKind)> = families
        .iter()
        .flat_map(|&f| resamplers.iter().map(move |&r| (f, r)))
        .collect();
    let outcomes: Vec<_> = pairs
        .par_iter()
        .map(|&(f, r)| {
            let grid = exp.search_grid(f);
            let out = grid_search(&grid, &exp.cfg.resampler(r), &FeatureSubset::All, exp.cfg.model_seed(), ctx);
            (grid.len(), out)
        })
        .collect();
    let mut rows = Vec::new();
    for ((f, r), (grid_size, out)) in pairs.into_iter().zip(outcomes) {
        match out {
            Ok(o) => {
                for (params, s) in &o.evaluated {
                    if s.is_none() {
                        warnings.push(format!("{}-{} ({}) failed", f.short_name(), r.config_name(), params.describe()));
                    }
                }
                rows.push(SelectedPipeline {
                    method: o.best.method_name(),
                    params: o.best.model.params.describe(),
                    pipeline: o.best,
                    score: o.score,
                    grid_size,
                });
            }
            Err(e) => warnings.push(format!("{}-{}: grid search failed: {e}", f.short_name(), r.config_name())),
        }
    }
    Ok(rows)
}

fn ranked<T: Clone>(items: &[T], key: impl Fn(&T) -> (f64, f64)) -> Vec<T> {
    let order = rank_order(&items.iter().map(key).collect::<Vec<_>>());
    order.into_iter().map(|i| items[i].clone()).collect()
}

/// Grid search for every (family, top resampler) pair.
pub fn model_select(exp: &Experiment) -> Result<ModelSelection, StageError> {
    const FILE: &str = "model_select.json";
    if let Some(m) = exp.cached(FILE, MODEL_SELECT) {
        return Ok(m);
    }
    let bench: ResampleBench = exp.dir.read_json("resample_bench.json", RESAMPLE_BENCH)?;
    let ctx = exp.context(exp.cfg.cv_plan())?;
    let mut warnings = Vec::new();
    let rows = grid_search_pairs(exp, &ctx, &bench.top, &mut warnings)?;
    if rows.is_empty() {
        return Err(StageError::Runtime("every grid search failed".into()));
    }
    let sel = ModelSelection {
        resamplers: bench.top,
        rows: ranked(&rows, |r| (r.score.mean, r.score.error_pct)),
        warnings,
    };
    let [csv, txt] = write_tables(&exp.dir, "model_select", &sel.score_rows())?;
    exp.dir.write_json(FILE, &sel)?;
    exp.dir.record(MODEL_SELECT, &[FILE, &csv, &txt], sel.warnings.clone())?;
    Ok(sel)
}

// ---------------------------------------------------------------- feature-select

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub mean: Option<f64>,
    pub error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChoice {
    pub method: String,
    /// Pipeline id such as `XGB-SMOTE_IPF/35`.
    pub id: String,
    pub pipeline: Pipeline,
    pub best_k: usize,
    pub score: PipelineScore,
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelectionReport {
    pub k_min: usize,
    pub k_max: usize,
    /// Ranked best first.
    pub rows: Vec<FeatureChoice>,
    pub warnings: Vec<String>,
}

impl FeatureSelectionReport {
    pub fn score_rows(&self) -> Vec<ScoreRow> {
        self.rows
            .iter()
            .map(|r| ScoreRow::new(r.method.clone(), r.score.mean, r.score.error_pct, Some(r.best_k)))
            .collect()
    }
}

fn feature_search(
    exp: &Experiment,
    ctx: &CvContext<'_>,
    pipelines: &[Pipeline],
) -> Result<(usize, Vec<FeatureChoice>), StageError> {
    let d = exp.data.n_features();
    let k_min = exp.cfg.feature_selection.k_min.min(d);
    let found = feature_grid_search(pipelines, ctx, k_min)?;
    let rows = found
        .into_iter()
        .map(|s| FeatureChoice {
            method: s.pipeline.method_name(),
            id: s.pipeline.id(d),
            best_k: s.best_k,
            sweep: s
                .sweep
                .iter()
                .map(|(k, sc)| SweepPoint {
                    k: *k,
                    mean: sc.as_ref().map(|s| s.mean),
                    error_pct: sc.as_ref().map(|s| s.error_pct),
                })
                .collect(),
            pipeline: s.pipeline,
            score: s.score,
        })
        .collect();
    Ok((k_min, rows))
}

/// Sweeps the k-best feature count for the model-selection winners.
pub fn feature_select(exp: &Experiment) -> Result<FeatureSelectionReport, StageError> {
    const FILE: &str = "feature_select.json";
    if let Some(f) = exp.cached(FILE, FEATURE_SELECT) {
        return Ok(f);
    }
    let sel: ModelSelection = exp.dir.read_json("model_select.json", MODEL_SELECT)?;
    let take = exp.cfg.feature_selection.top.unwrap_or(sel.rows.len());
    let pipelines: Vec<Pipeline> = sel.rows.iter().take(take).map(|r| r.pipeline.clone()).collect();
    let ctx = exp.context(exp.cfg.cv_plan())?;
    let (k_min, rows) = feature_search(exp, &ctx, &pipelines)?;
    let report = FeatureSelectionReport {
        k_min,
        k_max: exp.data.n_features(),
        rows: ranked(&rows, |r| (r.score.mean, r.score.error_pct)),
        warnings: Vec::new(),
    };
    let [csv, txt] = write_tables(&exp.dir, "feature_select", &report.score_rows())?;
    exp.dir.write_json(FILE, &report)?;
    exp.dir.record(FEATURE_SELECT, &[FILE, &csv, &txt], report.warnings.clone())?;
    Ok(report)
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub pipelines: Vec<Pipeline>,
    pub runs: usize,
    pub rank_unit: RankUnit,
    /// One row per rank unit (repetition or repetition x fold), one column per pipeline.
    pub scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
    pub friedman: Option<FriedmanResult>,
    pub nemenyi: Option<NemenyiResult>,
    pub winner: usize,
    pub winner_id: String,
    /// Best pipeline of each repetition by mean score.
    pub run_winners: Vec<String>,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

impl Comparison {
    pub fn winner_pipeline(&self) -> &Pipeline {
        &self.pipelines[self.winner]
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("pipeline,average_rank,mean_balanced_accuracy\n");
        let order: Vec<usize> = match &self.nemenyi {
            Some(n) => n.order.clone(),
            None => (0..self.labels.len()).collect(),
        };
        for i in order {
            let rank = self.nemenyi.as_ref().map_or(1.0, |n| n.average_ranks[i]);
            let _ = writeln!(s, "{},{rank:.4},{:.4}", self.labels[i], self.mean_scores[i]);
        }
        s
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Pipelines compared: {}", self.labels.len());
        let _ = writeln!(s, "Repetitions: {} (rank unit: {:?})", self.runs, self.rank_unit);
        if let (Some(f), Some(n)) = (&self.friedman, &self.nemenyi) {
            let _ = writeln!(s, "Friedman chi2 = {:.4}, df = {}, p = {:.4e}", f.statistic, f.df, f.p_value);
            let _ = writeln!(
                s,
                "Nemenyi ({} formula, alpha = {}): q = {:.4}, CD = {:.4}",
                n.formula.name(),
                n.alpha,
                n.q_alpha,
                n.cd
            );
            let width = self.labels.iter().map(String::len).max().unwrap_or(8).max(8);
            let _ = writeln!(s, "{:<width$}  {:>8}  {:>8}", "Pipeline", "Avg rank", "Acc_b");
            for &i in &n.order {
                let _ = writeln!(
                    s,
                    "{:<width$}  {:>8.2}  {:>8.2}",
                    self.labels[i], n.average_ranks[i], self.mean_scores[i]
                );
            }
        }
        let _ = writeln!(s, "Winner: {}", self.winner_id);
        s
    }
}

/// Repeats CV `runs` times with derived seeds, ranks the pipelines, runs
/// the Friedman and Nemenyi tests and declares the lowest average rank the winner.
pub fn compare(exp: &Experiment) -> Result<Comparison, StageError> {
    const FILE: &str = "compare.json";
    if let Some(c) = exp.cached(FILE, COMPARE) {
        return Ok(c);
    }
    let fs: FeatureSelectionReport = exp.dir.read_json("feature_select.json", FEATURE_SELECT)?;
    let take = exp.cfg.compare.top.unwrap_or(fs.rows.len());
    let pipelines: Vec<Pipeline> = fs.rows.iter().take(take).map(|r| r.pipeline.clone()).collect();
    let comparison = compare_pipelines(exp, &pipelines)?;
    let svg = match &comparison.nemenyi {
        Some(n) => render_cd_svg(&cd_diagram_data(n)),
        None => String::from("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"10\" height=\"10\"></svg>\n"),
    };
    exp.dir.write_bytes("cd_diagram.svg", svg.as_bytes())?;
    exp.dir.write_bytes("compare.csv", comparison.to_csv().as_bytes())?;
    exp.dir.write_bytes("compare.txt", comparison.to_text().as_bytes())?;
    exp.dir.write_json(FILE, &comparison)?;
    exp.dir.record(
        COMPARE,
        &[FILE, "compare.csv", "compare.txt", "cd_diagram.svg"],
        comparison.warnings.clone(),
    )?;
    Ok(comparison)
}

/// The repetition protocol behind [`compare`], on explicit pipelines.
pub fn compare_pipelines(exp: &Experiment, pipelines: &[Pipeline]) -> Result<Comparison, StageError> {
    if pipelines.is_empty() {
        return Err(StageError::Runtime("no pipelines to compare".into()));
    }
    let d = exp.data.n_features();
    let runs = exp.cfg.compare.runs;
    let unit = exp.cfg.compare.rank_unit;
    let mut warnings = Vec::new();
    // per run: per pipeline fold scores (None when the pipeline failed)
    let per_run: Vec<Vec<Option<PipelineScore>>> = (0..runs)
        .map(|r| {
            let ctx = exp.context(exp.cfg.cv_plan_for_run(Some(r)))?;
            let seeded: Vec<Pipeline> = pipelines
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    p.resampler.seed = derive_seed(p.resampler.seed, r as u64);
                    p.model.seed = derive_seed(p.model.seed, r as u64);
                    p
                })
                .collect();
            let mut w = Vec::new();
            let scores = evaluate_all(&ctx, &seeded, &mut w);
            Ok((scores, w))
        })
        .collect::<Result<Vec<_>, StageError>>()?
        .into_iter()
        .map(|(s, w)| {
            warnings.extend(w);
            s
        })
        .collect();
    let folds = exp.cfg.cv.folds;
    let keep: Vec<usize> = (0..pipelines.len())
        .filter(|&j| {
            per_run.iter().all(|run| match &run[j] {
                Some(s) => unit == RankUnit::Run || s.failed_folds.is_empty(),
                None => false,
            })
        })
        .collect();
    let dropped: Vec<String> = (0..pipelines.len())
        .filter(|j| !keep.contains(j))
        .map(|j| pipelines[j].id(d))
        .collect();
    for id in &dropped {
        warnings.push(format!("{id} dropped: failed in at least one repetition"));
    }
    if keep.is_empty() {
        return Err(StageError::Runtime("every compared pipeline failed".into()));
    }
    let labels: Vec<String> = keep.iter().map(|&j| pipelines[j].id(d)).collect();
    let score = |r: usize, j: usize| per_run[r][j].as_ref().expect("kept pipelines scored");
    let scores: Vec<Vec<f64>> = match unit {
        RankUnit::Run => (0..runs).map(|r| keep.iter().map(|&j| score(r, j).mean).collect()).collect(),
        RankUnit::Fold => (0..runs)
            .flat_map(|r| (0..folds).map(move |f| (r, f)))
            .map(|(r, f)| keep.iter().map(|&j| score(r, j).fold_scores[f]).collect())
            .collect(),
    };
    let mean_scores: Vec<f64> = keep
        .iter()
        .map(|&j| mean_of((0..runs).map(|r| score(r, j).mean)))
        .collect();
    let run_winners: Vec<String> = (0..runs)
        .map(|r| {
            let means: Vec<(f64, f64)> = keep
                .iter()
                .map(|&j| (score(r, j).mean, score(r, j).error_pct))
                .collect();
            labels[rank_order(&means)[0]].clone()
        })
        .collect();
    let (friedman, nemenyi, winner) = if keep.len() >= 2 {
        let m = keep.len();
        let flat: Vec<f64> = scores.iter().flatten().copied().collect();
        let table = rank_pipelines(labels.clone(), Array2::from_shape_vec((scores.len(), m), flat).expect("rectangular"))?;
        let nem = nemenyi_compare(&table, exp.cfg.compare.alpha, exp.cfg.compare.formula)?;
        let winner = nem.order[0];
        (Some(friedman_test(&table)), Some(nem), winner)
    } else {
        (None, None, 0)
    };
    Ok(Comparison {
        winner_id: labels[winner].clone(),
        labels,
        pipelines: keep.iter().map(|&j| pipelines[j].clone()).collect(),
        runs,
        rank_unit: unit,
        scores,
        mean_scores,
        friedman,
        nemenyi,
        winner,
        run_winners,
        dropped,
        warnings,
    })
}

// ---------------------------------------------------------------- importance

/// Permutation importance of the comparison winner, banded by k-means.
pub fn importance(exp: &Experiment) -> Result<ImportanceReport, StageError> {
    const FILE: &str = "importance.json";
    if let Some(r) = exp.cached(FILE, IMPORTANCE) {
        return Ok(r);
    }
    let cmp: Comparison = exp.dir.read_json("compare.json", COMPARE)?;
    let ctx = exp.context(exp.cfg.cv_plan())?;
    let seed = exp.cfg.importance_seed();
    let report = permutation_importance_in(&ctx, cmp.winner_pipeline(), exp.cfg.importance.permutations, seed)?;
    let report = group_importances(report, exp.cfg.importance.groups.min(exp.data.n_features()), seed)?;
    exp.dir.write_bytes("importance.csv", report.to_csv().as_bytes())?;
    exp.dir.write_bytes("importance.svg", report.to_svg().as_bytes())?;
    exp.dir.write_json(FILE, &report)?;
    exp.dir
        .record(IMPORTANCE, &[FILE, "importance.csv", "importance.svg"], report.warnings.clone())?;
    Ok(report)
}

// ---------------------------------------------------------------- train

/// Bundle creation time: `SOURCE_DATE_EPOCH` when set, else the clock.
pub fn bundle_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Fits the comparison winner on the full raw dataset and writes `bundle.json`.
pub fn train(exp: &Experiment) -> Result<ModelBundle, StageError> {
    const FILE: &str = "bundle.json";
    let cmp: Comparison = exp.dir.read_json("compare.json", COMPARE)?;
    if !exp.force && exp.dir.exists(FILE) {
        log::info!("{TRAIN}: reusing {}", exp.dir.path(FILE).display());
        return Ok(ModelBundle::load(exp.dir.path(FILE))?);
    }
    let bundle = ModelBundle::train(&exp.raw, cmp.winner_pipeline(), bundle_timestamp())?;
    bundle.save(exp.dir.path(FILE))?;
    exp.dir.record(TRAIN, &[FILE], bundle.model.warnings.clone())?;
    Ok(bundle)
}

// ---------------------------------------------------------------- ablation

pub const ABLATION_STAGES: [&str; 4] = [
    "Baseline",
    "+Resampling",
    "+Model Parameterization",
    "+Feature Selection",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub stage: String,
    /// Mean over the row's pipelines of their mean balanced accuracy.
    pub mean: f64,
    /// Mean over the row's pipelines of their error %.
    pub error_pct: f64,
    /// Best single pipeline.
    pub best: f64,
    pub best_pipeline: String,
    pub pipelines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub top_resamplers: Vec<ResamplerKind>,
    pub warnings: Vec<String>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,mean_balanced_accuracy,error_pct,best_balanced_accuracy,best_pipeline\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.4},{:.4},{:.4},{}", r.stage, r.mean, r.error_pct, r.best, r.best_pipeline);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let w = ABLATION_STAGES.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut s = format!("{:<w$}  {:>8}  {:>9}  {:>10}\n", "Stage", "Acc_b", "Error (%)", "Best Acc_b");
        for r in &self.rows {
            let _ = writeln!(s, "{:<w$}  {:>8.2}  {:>9.2}  {:>10.2}", r.stage, r.mean, r.error_pct, r.best);
        }
        s
    }
}

fn ablation_row(stage: &str, entries: &[(String, PipelineScore)]) -> Result<AblationRow, StageError> {
    if entries.is_empty() {
        return Err(StageError::Runtime(format!("ablation row {stage}: every pipeline failed")));
    }
    let order = rank_order(&entries.iter().map(|(_, s)| (s.mean, s.error_pct)).collect::<Vec<_>>());
    Ok(AblationRow {
        stage: stage.to_string(),
        mean: mean_of(entries.iter().map(|(_, s)| s.mean)),
        error_pct: mean_of(entries.iter().map(|(_, s)| s.error_pct)),
        best: entries[order[0]].1.mean,
        best_pipeline: entries[order[0]].0.clone(),
        pipelines: entries.len(),
    })
}

fn scored(d: usize, pipelines: &[Pipeline], scores: Vec<Option<PipelineScore>>) -> Vec<(String, PipelineScore)> {
    pipelines
        .iter()
        .zip(scores)
        .filter_map(|(p, s)| s.map(|s| (p.id(d), s)))
        .collect()
}

/// Four cumulative rows on one fold plan and seed set: default models with
/// no resampling; default models with every balancing resampler; grid-best
/// models under the top resamplers; the same with the best k features.
pub fn ablation(exp: &Experiment) -> Result<AblationReport, StageError> {
    const FILE: &str = "ablation.json";
    if let Some(r) = exp.cached(FILE, ABLATION) {
        return Ok(r);
    }
    let d = exp.data.n_features();
    let families = exp.families()?;
    let balancing: Vec<ResamplerKind> = exp
        .cfg
        .roster()?
        .into_iter()
        .filter(|k| *k != ResamplerKind::None)
        .collect();
    if balancing.is_empty() {
        return Err(StageError::Config(crate::config::ConfigError::Invalid(
            "ablation needs at least one balancing resampler in resampling.roster".into(),
        )));
    }
    let ctx = exp.context(exp.cfg.cv_plan())?;
    let mut warnings = Vec::new();

    let base: Vec<Pipeline> = families
        .iter()
        .map(|&f| exp.default_pipeline(ResamplerKind::None, f))
        .collect();
    let base_scores = evaluate_all(&ctx, &base, &mut warnings);
    let baseline = ablation_row(ABLATION_STAGES[0], &scored(d, &base, base_scores))?;

    let res: Vec<Pipeline> = balancing
        .iter()
        .flat_map(|&k| families.iter().map(move |&f| (k, f)))
        .map(|(k, f)| exp.default_pipeline(k, f))
        .collect();
    let res_scores = evaluate_all(&ctx, &res, &mut warnings);
    // rank resamplers by their family average, as the benchmark does
    let per_kind: Vec<(f64, f64)> = balancing
        .iter()
        .enumerate()
        .map(|(r, _)| {
            let ok: Vec<&PipelineScore> = res_scores[r * families.len()..(r + 1) * families.len()]
                .iter()
                .flatten()
                .collect();
            if ok.is_empty() {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (mean_of(ok.iter().map(|s| s.mean)), mean_of(ok.iter().map(|s| s.error_pct)))
            }
        })
        .collect();
    let top: Vec<ResamplerKind> = rank_order(&per_kind)
        .into_iter()
        .filter(|&i| per_kind[i].0.is_finite())
        .take(exp.cfg.resampling.top)
        .map(|i| balancing[i])
        .collect();
    let resampling = ablation_row(ABLATION_STAGES[1], &scored(d, &res, res_scores))?;

    let tuned = grid_search_pairs(exp, &ctx, &top, &mut warnings)?;
    let tuned_entries: Vec<(String, PipelineScore)> = tuned.iter().map(|t| (t.pipeline.id(d), t.score.clone())).collect();
    let parameterization = ablation_row(ABLATION_STAGES[2], &tuned_entries)?;

    let tuned_pipelines: Vec<Pipeline> = tuned.iter().map(|t| t.pipeline.clone()).collect();
    let (_, chosen) = feature_search(exp, &ctx, &tuned_pipelines)?;
    let fs_entries: Vec<(String, PipelineScore)> = chosen.iter().map(|c| (c.id.clone(), c.score.clone())).collect();
    let selection = ablation_row(ABLATION_STAGES[3], &fs_entries)?;

    let report = AblationReport {
        rows: vec![baseline, resampling, parameterization, selection],
        top_resamplers: top,
        warnings,
    };
    exp.dir.write_bytes("ablation.csv", report.to_csv().as_bytes())?;
    exp.dir.write_bytes("ablation.txt", report.to_text().as_bytes())?;
    exp.dir.write_json(FILE, &report)?;
    exp.dir
        .record(ABLATION, &[FILE, "ablation.csv", "ablation.txt"], report.warnings.clone())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_order_breaks_ties_by_error_then_position() {
        let s = [(0.8, 2.0), (0.9, 5.0), (0.9, 1.0), (0.8, 2.0)];
        assert_eq!(rank_order(&s), vec![2, 1, 0, 3]);
    }

    #[test]
    fn ablation_text_has_four_rows() {
        let rows = ABLATION_STAGES
            .iter()
            .map(|s| AblationRow {
                stage: s.to_string(),
                mean: 0.8,
                error_pct: 3.0,
                best: 0.9,
                best_pipeline: "KNN-SMOTE/37".into(),
                pipelines: 4,
            })
            .collect();
        let r = AblationReport {
            rows,
            top_resamplers: vec![],
            warnings: vec![],
        };
        assert_eq!(r.to_text().lines().count(), 5);
        assert_eq!(r.to_csv().lines().count(), 5);
        assert!(r.to_text().contains("+Model Parameterization      0.80       3.00        0.90"));
    }
}
