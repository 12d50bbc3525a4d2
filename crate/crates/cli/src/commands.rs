//! Subcommand implementations: everything except argument parsing.

use std::path::{Path, PathBuf};

use neurogsp::builders::GraphType;
use neurogsp::graph::Band;
use neurogsp::pipeline::{
    baseline_methods, benchmark, curve_points, graph_methods, BenchmarkOptions, CohortSource, DatasetCohort,
    DifficultyGroup, ExperimentReport, Method, SimulatedCohort,
};
use neurogsp::reducers::{FrequencySelection, ReductionSpec};
use neurogsp::stats::{friedman, pairwise_wilcoxon, MethodMatrix, PairwiseComparison};
use neurogsp::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DataConfig, ExperimentConfig};
use crate::io::{self, Cell, CsvTable, DatasetPaths, FileHeader};

/// Which difficulty groups the result tables report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupFilter {
    Easy,
    Difficult,
    All,
}

impl GroupFilter {
    pub fn groups(self) -> Vec<DifficultyGroup> {
        match self {
            GroupFilter::Easy => vec![DifficultyGroup::Easy],
            GroupFilter::Difficult => vec![DifficultyGroup::Difficult],
            GroupFilter::All => vec![DifficultyGroup::Easy, DifficultyGroup::Difficult],
        }
    }
}

impl std::str::FromStr for GroupFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(GroupFilter::Easy),
            "difficult" => Ok(GroupFilter::Difficult),
            "all" => Ok(GroupFilter::All),
            other => Err(format!("unknown group `{other}` (expected easy, difficult or all)")),
        }
    }
}

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// Applies overrides; the result is what gets hashed and recorded.
pub fn resolve(mut cfg: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig> {
    if let Some(out) = &o.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = o.jobs {
        cfg.jobs = jobs;
    }
    if cfg.output_dir.is_none() {
        return Err(Error::Config("no output directory: pass --out or set output_dir".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> &Path {
    cfg.output_dir.as_deref().expect("checked by resolve")
}

fn header(cfg: &ExperimentConfig) -> FileHeader {
    FileHeader {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

/// Data source described by the configuration.
pub fn make_source(cfg: &ExperimentConfig) -> Result<Box<dyn CohortSource>> {
    match &cfg.data {
        DataConfig::Simulated { cohort } => Ok(Box::new(SimulatedCohort::from_config(cohort)?)),
        DataConfig::Files { runs } => {
            let datasets = runs
                .iter()
                .map(|r| {
                    let paths = DatasetPaths {
                        signals: r.signals.clone(),
                        labels: r.labels.clone(),
                        coords: r.coords.clone(),
                        rest: r.rest.clone(),
                    };
                    io::load_dataset(&paths, &r.subject)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Box::new(DatasetCohort::new(datasets)))
        }
    }
}

fn benchmark_options(cfg: &ExperimentConfig) -> BenchmarkOptions {
    BenchmarkOptions {
        classifier: cfg.classifier,
        graph_params: cfg.graphs.params,
        jobs: cfg.jobs,
        seed: cfg.seed,
        permute_labels: cfg.permute_labels,
    }
}

/// The graph-sampling method of the second table.
pub fn focus_method(k: usize) -> Method {
    Method::new(Some(GraphType::Semilocal), ReductionSpec::GS { band: Band::HF, k })
}

/// Methods of both tables plus the curve, without duplicates.
pub fn benchmark_methods(cfg: &ExperimentConfig) -> Result<Vec<Method>> {
    let k = cfg.reduction.k;
    let mut all = graph_methods(&cfg.graphs.types, k);
    all.push(focus_method(k));
    all.extend(baseline_methods(k));
    all.extend(cfg.curve_methods()?);
    let mut out: Vec<Method> = Vec::with_capacity(all.len());
    for m in all {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// `simulate`: writes every run of the simulated cohort to disk.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let DataConfig::Simulated { cohort } = &cfg.data else {
        return Err(Error::Config("simulate needs `data.source = \"simulated\"`".into()));
    };
    let out = out_dir(cfg);
    let h = header(cfg);
    let source = SimulatedCohort::from_config(cohort)?;
    let mut manifest = CsvTable::new([
        "subject_id",
        "calibration_group",
        "run",
        "snr",
        "selectivity",
        "subject_seed",
        "directory",
    ]);
    for (i, spec) in source.subjects.iter().enumerate() {
        for run in 0..source.runs_per_subject {
            let ds = source.load(i, run)?;
            let rel = PathBuf::from(&spec.id).join(format!("run-{run:02}"));
            io::write_dataset(&ds, &out.join(&rel), &h)?;
            manifest.push(vec![
                spec.id.as_str().into(),
                spec.calibration_group.as_str().into(),
                (run as usize).into(),
                spec.config.snr.into(),
                spec.config.selectivity.into(),
                Cell::Int(spec.config.seed),
                rel.to_string_lossy().replace('\\', "/").into(),
            ]);
        }
        log::info!("wrote {} ({} runs)", spec.id, source.runs_per_subject);
    }
    manifest.write(&out.join("cohort.csv"), &h)?;
    write_provenance(cfg, None)
}

/// Everything `benchmark` produces, before it is written.
pub struct BenchmarkOutputs {
    pub report: ExperimentReport,
    pub methods: Vec<Method>,
}

pub fn run_benchmark(cfg: &ExperimentConfig, methods: Vec<Method>) -> Result<BenchmarkOutputs> {
    let source = make_source(cfg)?;
    let report = benchmark(source.as_ref(), &methods, &benchmark_options(cfg))?;
    if report.subjects.is_empty() {
        return Err(Error::Numerical(format!(
            "every run failed ({} failures); first: {}",
            report.failures.len(),
            report.failures.first().map_or("-", |f| f.message.as_str())
        )));
    }
    Ok(BenchmarkOutputs { report, methods })
}

/// `benchmark`: both tables, the curve, the statistics, per-subject
/// accuracies and provenance.
pub fn cmd_benchmark(cfg: &ExperimentConfig, groups: GroupFilter) -> Result<BenchmarkOutputs> {
    let outputs = run_benchmark(cfg, benchmark_methods(cfg)?)?;
    let out = out_dir(cfg);
    let h = header(cfg);
    let report = &outputs.report;
    table1(cfg, report, groups).write(&out.join("table1.csv"), &h)?;
    table2(cfg, report, groups).write(&out.join("table2.csv"), &h)?;
    curve_table(cfg, report, groups)?.write(&out.join("curve.csv"), &h)?;
    stats_table(&table2_comparisons(cfg, report, groups)?).write(&out.join("stats.csv"), &h)?;
    subjects_table(report).write(&out.join("subjects.csv"), &h)?;
    write_provenance(cfg, Some(report))?;
    Ok(outputs)
}

/// `curve`: accuracy versus dimension only.
pub fn cmd_curve(cfg: &ExperimentConfig, groups: GroupFilter) -> Result<BenchmarkOutputs> {
    let outputs = run_benchmark(cfg, cfg.curve_methods()?)?;
    let out = out_dir(cfg);
    curve_table(cfg, &outputs.report, groups)?.write(&out.join("curve.csv"), &header(cfg))?;
    write_provenance(cfg, Some(&outputs.report))?;
    Ok(outputs)
}

const TABLE1_COLUMNS: [&str; 5] = ["GFT-LF", "GFT-HF", "GFT-ANOVA", "GS-LF", "GS-HF"];

fn table1_reductions(k: usize) -> [ReductionSpec; 5] {
    [
        ReductionSpec::GFS { selection: FrequencySelection::LF, k },
        ReductionSpec::GFS { selection: FrequencySelection::HF, k },
        ReductionSpec::GFS { selection: FrequencySelection::ANOVA, k },
        ReductionSpec::GS { band: Band::LF, k },
        ReductionSpec::GS { band: Band::HF, k },
    ]
}

fn method_position(report: &ExperimentReport, m: &Method) -> Option<usize> {
    report.provenance.methods.iter().position(|x| x == m)
}

/// Graphs × {GFT-LF, GFT-HF, GFT-ANOVA, GS-LF, GS-HF}, per group.
pub fn table1(cfg: &ExperimentConfig, report: &ExperimentReport, groups: GroupFilter) -> CsvTable {
    let mut t = CsvTable::new(
        ["group", "graph", "n_subjects"]
            .into_iter()
            .chain(TABLE1_COLUMNS)
            .map(String::from),
    );
    for g in groups.groups() {
        let means = report.group_means(Some(g));
        let n = report.group_subjects(Some(g)).len();
        for &graph in &cfg.graphs.types {
            let mut row: Vec<Cell> = vec![g.label().into(), graph.label().into(), n.into()];
            for r in table1_reductions(cfg.reduction.k) {
                let idx = method_position(report, &Method::new(Some(graph), r));
                row.push(idx.map_or(Cell::Text(String::new()), |i| means[i].into()));
            }
            t.push(row);
        }
    }
    t
}

fn table2_methods(k: usize) -> Vec<(&'static str, Method)> {
    let mut v = vec![("Graph sampling", focus_method(k))];
    for (name, m) in ["PCA", "ICA", "ANOVA"].into_iter().zip(baseline_methods(k)) {
        v.push((name, m));
    }
    v
}

/// PCA, ICA, ANOVA and graph sampling, one column per group.
pub fn table2(cfg: &ExperimentConfig, report: &ExperimentReport, groups: GroupFilter) -> CsvTable {
    let gs = groups.groups();
    let mut t = CsvTable::new(
        std::iter::once("method".to_string())
            .chain(gs.iter().map(|g| g.label().to_string()))
            .chain(gs.iter().map(|g| format!("n_{}", g.label()))),
    );
    let means: Vec<Vec<f64>> = gs.iter().map(|&g| report.group_means(Some(g))).collect();
    for (name, m) in table2_methods(cfg.reduction.k) {
        let Some(i) = method_position(report, &m) else { continue };
        let mut row: Vec<Cell> = vec![name.into()];
        row.extend(means.iter().map(|mm| Cell::Num(mm[i])));
        row.extend(gs.iter().map(|&g| Cell::Int(report.group_subjects(Some(g)).len() as u64)));
        t.push(row);
    }
    t
}

pub fn curve_table(cfg: &ExperimentConfig, report: &ExperimentReport, groups: GroupFilter) -> Result<CsvTable> {
    let mut t = CsvTable::new(["group", "method", "k", "mean_accuracy", "n_subjects"]);
    for p in curve_points(report, &cfg.curve_methods()?, &groups.groups()) {
        t.push(vec![
            p.group.label().into(),
            p.method.into(),
            p.k.into(),
            p.mean.into(),
            p.n_subjects.into(),
        ]);
    }
    Ok(t)
}

/// Per-subject mean accuracies, one column per method; the input format of
/// the `stats` subcommand.
pub fn subjects_table(report: &ExperimentReport) -> CsvTable {
    let mut t = CsvTable::new(
        ["subject_id", "group", "runs", "reference"]
            .into_iter()
            .map(String::from)
            .chain(report.methods.iter().cloned()),
    );
    for s in &report.subjects {
        let mut row: Vec<Cell> = vec![
            s.subject_id.as_str().into(),
            s.group.label().into(),
            (s.runs as usize).into(),
            s.reference.into(),
        ];
        row.extend(s.mean.iter().map(|&v| Cell::Num(v)));
        t.push(row);
    }
    t
}

/// One group's statistics: a Friedman test over the compared methods and
/// the Bonferroni-corrected pairwise Wilcoxon tests.
#[derive(Debug, Clone, Serialize)]
pub struct GroupStats {
    pub group: String,
    pub methods: Vec<String>,
    pub n_subjects: usize,
    pub friedman_statistic: f64,
    pub friedman_p: f64,
    pub comparisons: Vec<PairwiseComparison>,
}

/// Compares column `focus` against every other column of `matrix`.
pub fn group_stats(group: &str, names: &[String], matrix: ndarray::Array2<f64>, focus: usize) -> Result<GroupStats> {
    let n_subjects = matrix.nrows();
    let m = MethodMatrix::new(matrix)?;
    let f = friedman(&m)?;
    let pairs: Vec<(usize, usize)> = (0..names.len()).filter(|&j| j != focus).map(|j| (focus, j)).collect();
    Ok(GroupStats {
        group: group.to_string(),
        methods: names.to_vec(),
        n_subjects,
        friedman_statistic: f.statistic,
        friedman_p: f.p_value,
        comparisons: pairwise_wilcoxon(&m, names, &pairs)?,
    })
}

/// Graph sampling against PCA, ICA and ANOVA in every reported group with
/// at least two subjects.
pub fn table2_comparisons(
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
    groups: GroupFilter,
) -> Result<Vec<GroupStats>> {
    let methods = table2_methods(cfg.reduction.k);
    let idx: Vec<usize> = methods
        .iter()
        .filter_map(|(_, m)| method_position(report, m))
        .collect();
    if idx.len() != methods.len() {
        return Ok(Vec::new());
    }
    let names: Vec<String> = idx.iter().map(|&i| report.methods[i].clone()).collect();
    let mut out = Vec::new();
    for g in groups.groups() {
        if report.group_subjects(Some(g)).len() < 2 {
            log::warn!("group {} has fewer than 2 subjects; no statistics", g.label());
            continue;
        }
        out.push(group_stats(g.label(), &names, report.accuracy_matrix(Some(g), &idx), 0)?);
    }
    Ok(out)
}

pub fn stats_table(stats: &[GroupStats]) -> CsvTable {
    let mut t = CsvTable::new([
        "group",
        "test",
        "method_a",
        "method_b",
        "n_subjects",
        "mean_a",
        "mean_b",
        "statistic",
        "p_value",
        "p_bonferroni",
    ]);
    for s in stats {
        t.push(vec![
            s.group.as_str().into(),
            "friedman".into(),
            s.methods.join(";").into(),
            "".into(),
            s.n_subjects.into(),
            "".into(),
            "".into(),
            s.friedman_statistic.into(),
            s.friedman_p.into(),
            "".into(),
        ]);
        for c in &s.comparisons {
            t.push(vec![
                s.group.as_str().into(),
                "wilcoxon".into(),
                c.method_a.as_str().into(),
                c.method_b.as_str().into(),
                c.n_subjects.into(),
                c.mean_a.into(),
                c.mean_b.into(),
                c.z.into(),
                c.p_value.into(),
                c.p_adjusted.into(),
            ]);
        }
    }
    t
}

/// `stats`: reads a per-subject table (as written to `subjects.csv`) and
/// tests `focus` (default: the graph-sampling column, else the first
/// method) against every other method column, per group.
pub fn cmd_stats(input: &Path, out: &Path, focus: Option<&str>, groups: GroupFilter, seed: u64) -> Result<Vec<GroupStats>> {
    let text = std::fs::read(input).map_err(|e| Error::io(input, e))?;
    let (header, rows) = io::read_result_table(input)?;
    let first_method = header.iter().position(|c| c == "reference").map_or(2, |i| i + 1);
    let group_col = header
        .iter()
        .position(|c| c == "group")
        .ok_or_else(|| parse_error(input, 1, "missing column `group`"))?;
    let names: Vec<String> = header[first_method..].to_vec();
    if names.len() < 2 {
        return Err(parse_error(input, 1, "need at least two method columns"));
    }
    let focus_idx = match focus {
        Some(f) => names
            .iter()
            .position(|n| n == f)
            .ok_or_else(|| Error::Config(format!("no method column named `{f}`")))?,
        None => names.iter().position(|n| n.starts_with("Semilocal GS-HF")).unwrap_or(0),
    };
    let mut results = Vec::new();
    for g in groups.groups() {
        let mut values = Vec::new();
        let mut n = 0;
        for (line, fields) in &rows {
            if fields.len() != header.len() {
                return Err(parse_error(input, *line, format!("expected {} fields, found {}", header.len(), fields.len())));
            }
            if fields[group_col] != g.label() {
                continue;
            }
            for f in &fields[first_method..] {
                values.push(
                    f.parse::<f64>()
                        .map_err(|_| parse_error(input, *line, format!("cannot parse accuracy `{f}`")))?,
                );
            }
            n += 1;
        }
        if n < 2 {
            log::warn!("group {} has fewer than 2 subjects; no statistics", g.label());
            continue;
        }
        let matrix = ndarray::Array2::from_shape_vec((n, names.len()), values).map_err(|e| Error::Dimension(e.to_string()))?;
        results.push(group_stats(g.label(), &names, matrix, focus_idx)?);
    }
    let h = FileHeader {
        config_hash: Sha256::digest(&text).iter().map(|b| format!("{b:02x}")).collect(),
        seed,
    };
    stats_table(&results).write(&out.join("stats.csv"), &h)?;
    Ok(results)
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

#[derive(Serialize)]
struct ProvenanceFile<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    config: &'a ExperimentConfig,
    graph_params: Option<neurogsp::builders::GraphBuildParams>,
    methods: Vec<String>,
    subjects: Vec<SubjectSummary<'a>>,
    failures: &'a [neurogsp::pipeline::RunFailure],
}

#[derive(Serialize)]
struct SubjectSummary<'a> {
    subject_id: &'a str,
    group: &'static str,
    reference: f64,
    runs: u32,
}

/// Writes `provenance.json`: resolved configuration, hash, seeds, graph
/// parameters actually used and every recorded failure.
pub fn write_provenance(cfg: &ExperimentConfig, report: Option<&ExperimentReport>) -> Result<()> {
    let file = ProvenanceFile {
        tool: "neurogsp",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        config: cfg,
        graph_params: report.and_then(|r| r.provenance.graph_params),
        methods: report.map(|r| r.methods.clone()).unwrap_or_default(),
        subjects: report
            .map(|r| {
                r.subjects
                    .iter()
                    .map(|s| SubjectSummary {
                        subject_id: &s.subject_id,
                        group: s.group.label(),
                        reference: s.reference,
                        runs: s.runs,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        failures: report.map_or(&[], |r| r.failures.as_slice()),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Numerical(e.to_string()))?;
    io::write_atomic(&out_dir(cfg).join("provenance.json"), &(text + "\n"))
}
