//! Session-wise cross-validated decoding pipelines and cohort benchmarks.
//!
//! Every fold fits `reduce → standardize → classify` on its training rows
//! only. Graphs come from the rest signals of the dataset, never from task
//! observations, so graph-derived stages may see test rows without leaking
//! their labels.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::{build_graph, GraphBuildParams, GraphType};
use crate::classifiers::{self, ClassifierSpec, TrainedClassifier};
use crate::error::{Error, Result};
use crate::graph::{eigendecompose, Spectrum};
use crate::reducers::{
    fit_anova_kbest, fit_graph_sampling, fit_ica, fit_pca, fit_standardizer, FrequencySelection, IcaOptions,
    ReducerModel, ReductionSpec, Standardizer,
};
use crate::simulator::{simulate_subject, CohortConfig, SubjectSpec};

pub use crate::dataset::Dataset;

/// Reference accuracy above which a subject is `Easy`.
pub const EASY_THRESHOLD: f64 = 0.80;
/// Reference accuracy from which a subject is `Difficult`.
pub const DIFFICULT_THRESHOLD: f64 = 0.55;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_sessions: Vec<u32>,
    pub test_sessions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// Leave-two-sessions-out folds: sorted session ids paired consecutively.
/// With an odd count the last fold tests the remaining single session.
pub fn plan_folds(sessions: &[u32]) -> Result<FoldPlan> {
    let mut ids = sessions.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 3 {
        return Err(Error::Data(format!(
            "cross-validation needs at least 3 sessions, got {}",
            ids.len()
        )));
    }
    if ids.len() % 2 == 1 {
        log::warn!("{} sessions: the last fold tests a single session", ids.len());
    }
    let folds = ids
        .chunks(2)
        .map(|test| Fold {
            train_sessions: ids.iter().copied().filter(|s| !test.contains(s)).collect(),
            test_sessions: test.to_vec(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DifficultyGroup {
    Easy,
    Difficult,
    Excluded,
}

impl DifficultyGroup {
    pub fn label(self) -> &'static str {
        match self {
            DifficultyGroup::Easy => "easy",
            DifficultyGroup::Difficult => "difficult",
            DifficultyGroup::Excluded => "excluded",
        }
    }
}

impl std::fmt::Display for DifficultyGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

pub fn classify_difficulty(reference_accuracy: f64) -> DifficultyGroup {
    if reference_accuracy > EASY_THRESHOLD {
        DifficultyGroup::Easy
    } else if reference_accuracy >= DIFFICULT_THRESHOLD {
        DifficultyGroup::Difficult
    } else {
        DifficultyGroup::Excluded
    }
}

/// A reduction, together with the graph it needs (if any).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Method {
    #[serde(default)]
    pub graph: Option<GraphType>,
    pub reduction: ReductionSpec,
}

impl Method {
    pub fn new(graph: Option<GraphType>, reduction: ReductionSpec) -> Self {
        Method { graph, reduction }
    }

    pub fn reference() -> Self {
        Method::new(None, ReductionSpec::NONE)
    }

    /// `Semilocal GS-HF`, `PCA`, …; `k` is not part of the label.
    pub fn label(&self) -> String {
        match self.graph {
            Some(g) if self.reduction.needs_graph() => format!("{} {}", g.label(), self.reduction.label()),
            _ => self.reduction.label(),
        }
    }

    /// Label including the number of kept dimensions.
    pub fn label_with_k(&self) -> String {
        match self.reduction.k() {
            Some(k) => format!("{} k={k}", self.label()),
            None => self.label(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reduction.needs_graph() && self.graph.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{} needs a graph type",
                self.reduction.label()
            )));
        }
        if self.reduction.k() == Some(0) {
            return Err(Error::InvalidParameter(format!("{}: k must be ≥ 1", self.label())));
        }
        Ok(())
    }

    fn uses_coefficients(&self) -> bool {
        matches!(self.reduction, ReductionSpec::GFS { .. })
    }
}

/// The columns (of raw signals or of GFT coefficients) fed to the
/// standardizer, or a fitted projection.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Columns { n_features: usize, columns: Vec<usize> },
    Projection(ReducerModel),
}

impl FeatureMap {
    fn apply(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            FeatureMap::Columns { n_features, columns } => {
                if x.ncols() != *n_features {
                    return Err(Error::Dimension(format!(
                        "input has {} features, pipeline was fitted on {n_features}",
                        x.ncols()
                    )));
                }
                Ok(x.select(Axis(1), columns))
            }
            FeatureMap::Projection(m) => m.transform(x),
        }
    }
}

/// Everything fitted on the training rows of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub method: Method,
    pub features: FeatureMap,
    pub standardizer: Standardizer,
    pub classifier: TrainedClassifier,
}

impl FittedPipeline {
    /// `x` lives in the same space the pipeline was fitted in: raw region
    /// signals, or GFT coefficients for frequency-sampling methods.
    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Vec<u8>> {
        let z = self.standardizer.transform(&self.features.apply(x)?.view())?;
        self.classifier.predict(&z.view())
    }
}

/// Fits one pipeline on training rows. `features` are raw signals, or GFT
/// coefficients when the method samples frequencies; `spectrum` is required
/// by graph methods. Test rows never enter this function.
pub fn fit_pipeline(
    method: &Method,
    spectrum: Option<&Spectrum>,
    features: &ArrayView2<f64>,
    labels: &[u8],
    classifier: &ClassifierSpec,
    seed: u64,
) -> Result<FittedPipeline> {
    method.validate()?;
    let n = features.ncols();
    let need_spectrum = || {
        spectrum.ok_or_else(|| Error::InvalidParameter(format!("{} needs a graph spectrum", method.label())))
    };
    let map = match method.reduction {
        ReductionSpec::NONE => FeatureMap::Columns {
            n_features: n,
            columns: (0..n).collect(),
        },
        ReductionSpec::GS { band, k } => FeatureMap::Columns {
            n_features: n,
            columns: fit_graph_sampling(need_spectrum()?, band, k)?.vertices,
        },
        ReductionSpec::GFS { selection, k } => {
            let s = need_spectrum()?;
            if s.n_vertices() != n {
                return Err(Error::Dimension(format!(
                    "{n} coefficients for a {}-vertex graph",
                    s.n_vertices()
                )));
            }
            if k > n {
                return Err(Error::InvalidParameter(format!("k = {k} exceeds {n} frequencies")));
            }
            let columns = match selection {
                FrequencySelection::LF => (0..k).collect(),
                FrequencySelection::HF => (n - k..n).collect(),
                FrequencySelection::ANOVA => fit_anova_kbest(features, labels, k)?.features,
            };
            FeatureMap::Columns { n_features: n, columns }
        }
        ReductionSpec::ANOVA { k } => FeatureMap::Columns {
            n_features: n,
            columns: fit_anova_kbest(features, labels, k)?.features,
        },
        ReductionSpec::PCA { k } => FeatureMap::Projection(ReducerModel::Pca(fit_pca(features, k)?)),
        ReductionSpec::ICA { k } => FeatureMap::Projection(ReducerModel::Ica(fit_ica(
            features,
            k,
            &IcaOptions {
                seed,
                accept_unconverged: true,
                ..IcaOptions::default()
            },
        )?)),
    };
    let reduced = map.apply(features)?;
    let standardizer = fit_standardizer(&reduced.view())?;
    let z = standardizer.transform(&reduced.view())?;
    let classifier = classifiers::fit(classifier, &z.view(), labels)?;
    Ok(FittedPipeline {
        method: *method,
        features: map,
        standardizer,
        classifier,
    })
}

/// Test labels of one fold; they are only ever compared with predictions.
struct HeldOut(Vec<u8>);

impl HeldOut {
    fn score(&self, predictions: &[u8]) -> Result<f64> {
        classifiers::accuracy(predictions, &self.0)
    }
}

type CacheKey = (GraphType, usize, Vec<u64>);

/// Spectra of graphs that depend on coordinates only (Full, Geometric),
/// shared between runs and subjects with identical geometry.
#[derive(Debug, Default)]
pub struct SpectrumCache {
    entries: Mutex<HashMap<CacheKey, Arc<Spectrum>>>,
}

impl SpectrumCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Exact key: graph type plus the bit patterns of everything the graph
    /// depends on.
    fn key(kind: GraphType, coords: &ArrayView2<f64>, params: &GraphBuildParams) -> CacheKey {
        let bits = coords
            .iter()
            .chain([params.sigma, params.alpha].iter())
            .map(|v| v.to_bits())
            .collect();
        (kind, coords.nrows(), bits)
    }
}

/// Cross-validates any number of methods on one dataset, building each graph
/// and its spectrum (and GFT coefficients) once.
pub struct SubjectEvaluator<'a> {
    dataset: &'a Dataset,
    params: GraphBuildParams,
    folds: FoldPlan,
    fold_rows: Vec<(Vec<usize>, Vec<usize>)>,
    spectra: HashMap<GraphType, Arc<Spectrum>>,
    coefficients: HashMap<GraphType, Array2<f64>>,
    shared: Option<&'a SpectrumCache>,
    seed: u64,
}

impl<'a> SubjectEvaluator<'a> {
    pub fn new(dataset: &'a Dataset, params: GraphBuildParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let folds = plan_folds(&dataset.sessions)?;
        let fold_rows = folds
            .folds
            .iter()
            .map(|f| {
                let (mut train, mut test) = (Vec::new(), Vec::new());
                for (i, s) in dataset.sessions.iter().enumerate() {
                    if f.test_sessions.contains(s) {
                        test.push(i);
                    } else if f.train_sessions.contains(s) {
                        train.push(i);
                    }
                }
                (train, test)
            })
            .collect();
        Ok(SubjectEvaluator {
            dataset,
            params,
            folds,
            fold_rows,
            spectra: HashMap::new(),
            coefficients: HashMap::new(),
            shared: None,
            seed,
        })
    }

    pub fn with_shared_spectra(mut self, cache: &'a SpectrumCache) -> Self {
        self.shared = Some(cache);
        self
    }

    pub fn folds(&self) -> &FoldPlan {
        &self.folds
    }

    fn compute_spectrum(&self, kind: GraphType) -> Result<Spectrum> {
        let ds = self.dataset;
        let graph = build_graph(kind, Some(&ds.coords.view()), Some(&ds.rest), &self.params)?;
        eigendecompose(&graph.laplacian().view())
    }

    /// Spectrum of the dataset's graph of the given type.
    pub fn spectrum(&mut self, kind: GraphType) -> Result<Arc<Spectrum>> {
        if let Some(s) = self.spectra.get(&kind) {
            return Ok(Arc::clone(s));
        }
        let s = match (self.shared, kind.needs_rest()) {
            (Some(cache), false) => {
                let key = SpectrumCache::key(kind, &self.dataset.coords.view(), &self.params);
                let cached = cache.entries.lock().expect("cache lock").get(&key).cloned();
                match cached {
                    Some(s) => s,
                    None => {
                        let s = Arc::new(self.compute_spectrum(kind)?);
                        cache.entries.lock().expect("cache lock").insert(key, Arc::clone(&s));
                        s
                    }
                }
            }
            _ => Arc::new(self.compute_spectrum(kind)?),
        };
        self.spectra.insert(kind, Arc::clone(&s));
        Ok(s)
    }

    fn features(&mut self, method: &Method) -> Result<(Option<Arc<Spectrum>>, Option<GraphType>)> {
        let Some(kind) = method.graph.filter(|_| method.reduction.needs_graph()) else {
            return Ok((None, None));
        };
        let s = self.spectrum(kind)?;
        if method.uses_coefficients() && !self.coefficients.contains_key(&kind) {
            let c = s.gft_rows(&self.dataset.signals.view())?;
            self.coefficients.insert(kind, c);
        }
        Ok((Some(s), method.uses_coefficients().then_some(kind)))
    }

    fn fold_inputs(&mut self, method: &Method) -> Result<(Option<Arc<Spectrum>>, Option<GraphType>)> {
        method.validate()?;
        self.features(method)
    }

    fn design(&self, coeff_graph: Option<GraphType>) -> ArrayView2<'_, f64> {
        match coeff_graph {
            Some(g) => self.coefficients[&g].view(),
            None => self.dataset.signals.view(),
        }
    }

    fn fit_rows(
        &self,
        method: &Method,
        spectrum: Option<&Spectrum>,
        x: &ArrayView2<f64>,
        fold: usize,
        classifier: &ClassifierSpec,
    ) -> Result<FittedPipeline> {
        let (train, test) = &self.fold_rows[fold];
        if train.iter().any(|r| test.contains(r)) {
            return Err(Error::Leakage(format!("fold {fold}: a row is both training and test")));
        }
        let train_x = x.select(Axis(0), train);
        let train_y: Vec<u8> = train.iter().map(|&i| self.dataset.labels[i]).collect();
        fit_pipeline(
            method,
            spectrum,
            &train_x.view(),
            &train_y,
            classifier,
            self.seed.wrapping_add(fold as u64),
        )
    }

    /// The pipeline fitted on the training rows of one fold.
    pub fn fit_fold(&mut self, method: &Method, classifier: &ClassifierSpec, fold: usize) -> Result<FittedPipeline> {
        if fold >= self.fold_rows.len() {
            return Err(Error::InvalidParameter(format!(
                "fold {fold} out of range ({} folds)",
                self.fold_rows.len()
            )));
        }
        let (spectrum, coeff_graph) = self.fold_inputs(method)?;
        self.fit_rows(method, spectrum.as_deref(), &self.design(coeff_graph), fold, classifier)
    }

    /// Accuracy of every fold, in fold order.
    pub fn evaluate(&mut self, method: &Method, classifier: &ClassifierSpec) -> Result<Vec<f64>> {
        let (spectrum, coeff_graph) = self.fold_inputs(method)?;
        let x = self.design(coeff_graph);
        (0..self.fold_rows.len())
            .map(|f| {
                let fitted = self.fit_rows(method, spectrum.as_deref(), &x, f, classifier)?;
                let test = &self.fold_rows[f].1;
                let held_out = HeldOut(test.iter().map(|&i| self.dataset.labels[i]).collect());
                held_out.score(&fitted.predict(&x.select(Axis(0), test).view())?)
            })
            .collect()
    }
}

/// Default graph parameters of a dataset (σ and α from its coordinates).
pub fn default_params(dataset: &Dataset) -> Result<GraphBuildParams> {
    GraphBuildParams::defaults_for(&dataset.coords.view())
}

/// Per-fold accuracies of one method on one dataset.
pub fn run_pipeline(
    dataset: &Dataset,
    graph: Option<GraphType>,
    reduction: ReductionSpec,
    classifier: &ClassifierSpec,
) -> Result<Vec<f64>> {
    let mut ev = SubjectEvaluator::new(dataset, default_params(dataset)?, classifier.seed)?;
    ev.evaluate(&Method::new(graph, reduction), classifier)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Mean fold accuracy of a linear SVM on all regions without reduction.
pub fn reference_accuracy(dataset: &Dataset) -> Result<f64> {
    Ok(mean(&run_pipeline(dataset, None, ReductionSpec::NONE, &ClassifierSpec::svm())?))
}

/// A collection of subjects, each with one or more runs (datasets).
pub trait CohortSource: Sync {
    fn subject_ids(&self) -> Vec<String>;
    fn n_runs(&self, subject: usize) -> u32;
    fn load(&self, subject: usize, run: u32) -> Result<Dataset>;
}

/// Subjects generated on the fly by the simulator on shared coordinates.
pub struct SimulatedCohort {
    pub subjects: Vec<SubjectSpec>,
    pub runs_per_subject: u32,
    pub coords: Array2<f64>,
}

impl SimulatedCohort {
    pub fn from_config(cfg: &CohortConfig) -> Result<Self> {
        Ok(SimulatedCohort {
            subjects: cfg.subjects()?,
            runs_per_subject: cfg.runs_per_subject,
            coords: cfg.atlas(),
        })
    }
}

impl CohortSource for SimulatedCohort {
    fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }

    fn n_runs(&self, _subject: usize) -> u32 {
        self.runs_per_subject
    }

    fn load(&self, subject: usize, run: u32) -> Result<Dataset> {
        let spec = &self.subjects[subject];
        let mut ds = simulate_subject(&spec.run_config(run), &self.coords.view())?;
        ds.subject_id = spec.id.clone();
        Ok(ds)
    }
}

/// Already-loaded datasets grouped by subject id (in first-seen order).
pub struct DatasetCohort {
    subjects: Vec<(String, Vec<Dataset>)>,
}

impl DatasetCohort {
    pub fn new(datasets: Vec<Dataset>) -> Self {
        let mut subjects: Vec<(String, Vec<Dataset>)> = Vec::new();
        for ds in datasets {
            match subjects.iter_mut().find(|(id, _)| *id == ds.subject_id) {
                Some((_, runs)) => runs.push(ds),
                None => subjects.push((ds.subject_id.clone(), vec![ds])),
            }
        }
        DatasetCohort { subjects }
    }
}

impl CohortSource for DatasetCohort {
    fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.0.clone()).collect()
    }

    fn n_runs(&self, subject: usize) -> u32 {
        self.subjects[subject].1.len() as u32
    }

    fn load(&self, subject: usize, run: u32) -> Result<Dataset> {
        Ok(self.subjects[subject].1[run as usize].clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkOptions {
    pub classifier: ClassifierSpec,
    /// `None`: defaults derived from each dataset's coordinates.
    pub graph_params: Option<GraphBuildParams>,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    pub seed: u64,
    /// Shuffle each dataset's labels before evaluation (chance-level check).
    pub permute_labels: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            classifier: ClassifierSpec::svm(),
            graph_params: None,
            jobs: 0,
            seed: 0,
            permute_labels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub subject_id: String,
    pub run: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject_id: String,
    /// Mean over runs of the full-data reference accuracy.
    pub reference: f64,
    pub group: DifficultyGroup,
    /// Mean over runs of the mean fold accuracy, one entry per method.
    pub mean: Vec<f64>,
    /// Standard deviation over all folds of all runs, one entry per method.
    pub sd: Vec<f64>,
    pub runs: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub methods: Vec<Method>,
    pub options: BenchmarkOptions,
    /// Graph parameters actually used for the first evaluated dataset.
    pub graph_params: Option<GraphBuildParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub methods: Vec<String>,
    pub subjects: Vec<SubjectResult>,
    pub failures: Vec<RunFailure>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn method_index(&self, label: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == label)
    }

    pub fn group_subjects(&self, group: Option<DifficultyGroup>) -> Vec<&SubjectResult> {
        self.subjects
            .iter()
            .filter(|s| group.map_or(s.group != DifficultyGroup::Excluded, |g| s.group == g))
            .collect()
    }

    /// Mean accuracy of each method over the subjects of `group` (`None`: all
    /// non-excluded subjects). Empty groups give NaN.
    pub fn group_means(&self, group: Option<DifficultyGroup>) -> Vec<f64> {
        let subs = self.group_subjects(group);
        (0..self.methods.len())
            .map(|m| subs.iter().map(|s| s.mean[m]).sum::<f64>() / subs.len() as f64)
            .collect()
    }

    /// `subjects × methods` accuracy matrix restricted to `group`.
    pub fn accuracy_matrix(&self, group: Option<DifficultyGroup>, methods: &[usize]) -> Array2<f64> {
        let subs = self.group_subjects(group);
        Array2::from_shape_fn((subs.len(), methods.len()), |(i, j)| subs[i].mean[methods[j]])
    }
}

fn permuted(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let mut labels = ds.labels.clone();
        labels.shuffle(&mut rng);
        if let Ok(p) = Dataset::new(
            ds.signals.clone(),
            labels,
            ds.sessions.clone(),
            ds.rest.clone(),
            ds.coords.clone(),
            ds.subject_id.clone(),
        ) {
            return Ok(p);
        }
    }
    Err(Error::Data("could not permute labels keeping both conditions per session".into()))
}

struct RunOutcome {
    reference: Vec<f64>,
    folds: Vec<Vec<f64>>,
    params: GraphBuildParams,
}

fn evaluate_run(
    ds: &Dataset,
    methods: &[Method],
    opts: &BenchmarkOptions,
    cache: &SpectrumCache,
    seed: u64,
) -> Result<RunOutcome> {
    let params = match &opts.graph_params {
        Some(p) => *p,
        None => default_params(ds)?,
    };
    let mut ev = SubjectEvaluator::new(ds, params, seed)?.with_shared_spectra(cache);
    let reference = ev.evaluate(&Method::reference(), &ClassifierSpec::svm())?;
    let folds = methods
        .iter()
        .map(|m| ev.evaluate(m, &opts.classifier))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutcome {
        reference,
        folds,
        params,
    })
}

/// Seed of one run: the SplitMix64 finalizer applied to the mixed indices,
/// stable across platforms and compiler versions.
fn run_seed(base: u64, subject: usize, run: u32) -> u64 {
    let mut z = base
        .wrapping_add((subject as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((run as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates every method on every run of every subject; a run in which any
/// method fails is recorded in `failures` and excluded from the averages.
pub fn benchmark(source: &dyn CohortSource, methods: &[Method], opts: &BenchmarkOptions) -> Result<ExperimentReport> {
    opts.classifier.validate()?;
    for m in methods {
        m.validate()?;
    }
    let cache = SpectrumCache::new();
    let ids = source.subject_ids();
    let work = |i: usize| -> (Option<SubjectResult>, Vec<RunFailure>, Option<GraphBuildParams>) {
        let id = &ids[i];
        let mut failures = Vec::new();
        let mut outcomes = Vec::new();
        for run in 0..source.n_runs(i) {
            let seed = run_seed(opts.seed, i, run);
            let result = source.load(i, run).and_then(|ds| {
                let ds = if opts.permute_labels { permuted(&ds, seed)? } else { ds };
                evaluate_run(&ds, methods, opts, &cache, seed)
            });
            match result {
                Ok(o) => outcomes.push(o),
                Err(e) => {
                    log::warn!("subject {id} run {run} failed: {e}");
                    failures.push(RunFailure {
                        subject_id: id.clone(),
                        run,
                        message: e.to_string(),
                    });
                }
            }
        }
        if outcomes.is_empty() {
            return (None, failures, None);
        }
        let reference = mean(&outcomes.iter().map(|o| mean(&o.reference)).collect::<Vec<_>>());
        let means = (0..methods.len())
            .map(|m| mean(&outcomes.iter().map(|o| mean(&o.folds[m])).collect::<Vec<_>>()))
            .collect();
        let sds = (0..methods.len())
            .map(|m| sd(&outcomes.iter().flat_map(|o| o.folds[m].iter().copied()).collect::<Vec<_>>()))
            .collect();
        log::info!("subject {id}: reference accuracy {reference:.3}");
        let params = outcomes[0].params;
        (
            Some(SubjectResult {
                subject_id: id.clone(),
                reference,
                group: classify_difficulty(reference),
                mean: means,
                sd: sds,
                runs: outcomes.len() as u32,
            }),
            failures,
            Some(params),
        )
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {} worker threads: {e}", opts.jobs)))?;
    let per_subject: Vec<_> = pool.install(|| (0..ids.len()).into_par_iter().map(work).collect());

    let mut subjects = Vec::new();
    let mut failures = Vec::new();
    let mut used_params = None;
    for (result, fails, params) in per_subject {
        subjects.extend(result);
        failures.extend(fails);
        if used_params.is_none() {
            used_params = params;
        }
    }
    Ok(ExperimentReport {
        methods: methods.iter().map(Method::label_with_k).collect(),
        subjects,
        failures,
        provenance: Provenance {
            methods: methods.to_vec(),
            options: opts.clone(),
            graph_params: used_params,
        },
    })
}

/// Methods of the first results table: every graph × {GFT-LF, GFT-HF,
/// GFT-ANOVA, GS-LF, GS-HF} at `k` dimensions.
pub fn graph_methods(graphs: &[GraphType], k: usize) -> Vec<Method> {
    use crate::graph::Band;
    graphs
        .iter()
        .flat_map(|&g| {
            [
                ReductionSpec::GFS {
                    selection: FrequencySelection::LF,
                    k,
                },
                ReductionSpec::GFS {
                    selection: FrequencySelection::HF,
                    k,
                },
                ReductionSpec::GFS {
                    selection: FrequencySelection::ANOVA,
                    k,
                },
                ReductionSpec::GS { band: Band::LF, k },
                ReductionSpec::GS { band: Band::HF, k },
            ]
            .map(|r| Method::new(Some(g), r))
        })
        .collect()
}

/// Graph-free baselines at `k` dimensions: PCA, ICA, ANOVA k-best.
pub fn baseline_methods(k: usize) -> Vec<Method> {
    [ReductionSpec::PCA { k }, ReductionSpec::ICA { k }, ReductionSpec::ANOVA { k }]
        .map(|r| Method::new(None, r))
        .to_vec()
}

/// Every reduction in `reductions` at every `k` of the grid, on `graph`.
pub fn curve_methods(graph: GraphType, reductions: &[ReductionSpec], k_grid: &[usize]) -> Vec<Method> {
    reductions
        .iter()
        .flat_map(|r| k_grid.iter().map(move |&k| Method::new(Some(graph), r.with_k(k))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub k: usize,
    pub group: DifficultyGroup,
    pub mean: f64,
    pub n_subjects: usize,
}

/// Group means of the methods of `curve` found in a benchmark report, in
/// the order of `curve`.
pub fn curve_points(report: &ExperimentReport, curve: &[Method], groups: &[DifficultyGroup]) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for m in curve {
        let Some(i) = report.provenance.methods.iter().position(|x| x == m) else { continue };
        let Some(k) = m.reduction.k() else { continue };
        for &g in groups {
            let subs = report.group_subjects(Some(g));
            out.push(CurvePoint {
                method: m.label(),
                k,
                group: g,
                mean: subs.iter().map(|s| s.mean[i]).sum::<f64>() / subs.len() as f64,
                n_subjects: subs.len(),
            });
        }
    }
    out
}

/// Accuracy-versus-dimension curve of `reductions` on `graph` over a cohort.
pub fn accuracy_vs_k(
    source: &dyn CohortSource,
    graph: GraphType,
    reductions: &[ReductionSpec],
    k_grid: &[usize],
    opts: &BenchmarkOptions,
) -> Result<Vec<CurvePoint>> {
    let methods = curve_methods(graph, reductions, k_grid);
    let report = benchmark(source, &methods, opts)?;
    Ok(curve_points(
        &report,
        &methods,
        &[DifficultyGroup::Easy, DifficultyGroup::Difficult],
    ))
}
