//! Dimensionality reduction.
//!
//! Graph sampling keeps the `k` vertices with the largest band coherence and
//! works on raw vertex signals. Frequency sampling keeps `k` graph Fourier
//! coefficients. PCA, ICA and ANOVA k-best are the graph-free baselines. Every
//! model is fitted on training rows only and is immutable afterwards.

mod ica;
mod pca;

pub use ica::{fit_ica, IcaModel, IcaOptions};
pub use pca::{fit_pca, PcaModel};

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Band, FrequencyBand, Spectrum};

pub const DEFAULT_K: usize = 50;

/// How graph frequency sampling picks its coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FrequencySelection {
    LF,
    HF,
    ANOVA,
}

impl std::fmt::Display for FrequencySelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrequencySelection::LF => "LF",
            FrequencySelection::HF => "HF",
            FrequencySelection::ANOVA => "ANOVA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "UPPERCASE", deny_unknown_fields)]
pub enum ReductionSpec {
    /// Graph sampling: vertex selection by band coherence.
    GS { band: Band, k: usize },
    /// Graph frequency sampling: GFT coefficient selection.
    GFS { selection: FrequencySelection, k: usize },
    PCA { k: usize },
    ICA { k: usize },
    ANOVA { k: usize },
    NONE,
}

impl ReductionSpec {
    pub fn k(&self) -> Option<usize> {
        match *self {
            ReductionSpec::GS { k, .. }
            | ReductionSpec::GFS { k, .. }
            | ReductionSpec::PCA { k }
            | ReductionSpec::ICA { k }
            | ReductionSpec::ANOVA { k } => Some(k),
            ReductionSpec::NONE => None,
        }
    }

    pub fn with_k(self, k: usize) -> Self {
        match self {
            ReductionSpec::GS { band, .. } => ReductionSpec::GS { band, k },
            ReductionSpec::GFS { selection, .. } => ReductionSpec::GFS { selection, k },
            ReductionSpec::PCA { .. } => ReductionSpec::PCA { k },
            ReductionSpec::ICA { .. } => ReductionSpec::ICA { k },
            ReductionSpec::ANOVA { .. } => ReductionSpec::ANOVA { k },
            ReductionSpec::NONE => ReductionSpec::NONE,
        }
    }

    pub fn needs_graph(&self) -> bool {
        matches!(self, ReductionSpec::GS { .. } | ReductionSpec::GFS { .. })
    }

    /// Short column label, e.g. `GS-HF`, `GFT-ANOVA`, `PCA`.
    pub fn label(&self) -> String {
        match self {
            ReductionSpec::GS { band, .. } => format!("GS-{band}"),
            ReductionSpec::GFS { selection, .. } => format!("GFT-{selection}"),
            ReductionSpec::PCA { .. } => "PCA".into(),
            ReductionSpec::ICA { .. } => "ICA".into(),
            ReductionSpec::ANOVA { .. } => "ANOVA".into(),
            ReductionSpec::NONE => "NONE".into(),
        }
    }
}

/// Per-vertex energy of the Fourier modes in `band`: `Σ_{k∈band} F_ik²`.
pub fn coherence(s: &Spectrum, band: FrequencyBand) -> Result<Array1<f64>> {
    let n = s.n_vertices();
    let band = FrequencyBand::new(band.f_min, band.f_max, n)?;
    let f = s.eigenvectors();
    Ok(Array1::from_shape_fn(n, |i| {
        (band.f_min..=band.f_max).map(|k| f[[i, k]] * f[[i, k]]).sum()
    }))
}

/// Indices of the `k` largest scores, ties to the lower index, in rank order.
pub fn top_k_indices(scores: &ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn check_k(k: usize, available: usize) -> Result<()> {
    if k == 0 || k > available {
        return Err(Error::InvalidParameter(format!("k = {k} must be in [1, {available}]")));
    }
    Ok(())
}

fn check_cols(x: &ArrayView2<f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Dimension(format!(
            "input has {} features, model was fitted on {expected}",
            x.ncols()
        )));
    }
    Ok(())
}

fn select_columns(x: &ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(1), idx)
}

/// Vertex selection by band coherence. Indices are stored ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSamplingModel {
    pub n_vertices: usize,
    pub vertices: Vec<usize>,
}

/// Coherence scores closer than this count as tied (and go to the lower
/// vertex index), so that rounding noise in the eigenvectors cannot reorder
/// vertices whose scores are equal in exact arithmetic.
pub const COHERENCE_RESOLUTION: f64 = 1e-12;

pub fn fit_graph_sampling(s: &Spectrum, band: Band, k: usize) -> Result<GraphSamplingModel> {
    let n = s.n_vertices();
    check_k(k, n)?;
    let scores = coherence(s, band.range(n))?.mapv(|c| (c / COHERENCE_RESOLUTION).round());
    let mut vertices = top_k_indices(&scores.view(), k);
    vertices.sort_unstable();
    Ok(GraphSamplingModel { n_vertices: n, vertices })
}

impl GraphSamplingModel {
    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        check_cols(x, self.n_vertices)?;
        Ok(select_columns(x, &self.vertices))
    }
}

/// Projection onto a subset of graph Fourier modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySamplingModel {
    /// Selected eigen-indices, in selection order.
    pub frequencies: Vec<usize>,
    /// `N×k` matrix of the selected Fourier modes.
    pub modes: Array2<f64>,
}

/// `train_coeffs` (GFT coefficients of training rows) and `train_labels` are
/// required for ANOVA selection and ignored otherwise.
pub fn fit_frequency_sampling(
    s: &Spectrum,
    selection: FrequencySelection,
    k: usize,
    train_coeffs: Option<&ArrayView2<f64>>,
    train_labels: Option<&[u8]>,
) -> Result<FrequencySamplingModel> {
    let n = s.n_vertices();
    check_k(k, n)?;
    let frequencies: Vec<usize> = match selection {
        FrequencySelection::LF => (0..k).collect(),
        FrequencySelection::HF => (n - k..n).collect(),
        FrequencySelection::ANOVA => {
            let (Some(coeffs), Some(labels)) = (train_coeffs, train_labels) else {
                return Err(Error::InvalidParameter(
                    "ANOVA frequency selection needs training coefficients and labels".into(),
                ));
            };
            check_cols(coeffs, n)?;
            fit_anova_kbest(coeffs, labels, k)?.features
        }
    };
    let modes = select_columns(&s.eigenvectors().view(), &frequencies);
    Ok(FrequencySamplingModel { frequencies, modes })
}

impl FrequencySamplingModel {
    /// Selected entries of `Fᵀx` for every row `x`.
    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        check_cols(x, self.modes.nrows())?;
        Ok(x.dot(&self.modes))
    }
}

/// One-way ANOVA F statistic of every column across label groups.
///
/// Columns with zero within-group variance but distinct group means get
/// `f64::MAX`; constant columns get 0.
pub fn anova_f_scores(x: &ArrayView2<f64>, labels: &[u8]) -> Result<Array1<f64>> {
    Ok(anova_scores(x, labels)?.into_iter().map(|s| s.f).collect())
}

#[derive(Debug, Clone, Copy)]
struct AnovaScore {
    f: f64,
    /// Between-group sum of squares; orders degenerate (`f64::MAX`) scores.
    between: f64,
}

fn anova_scores(x: &ArrayView2<f64>, labels: &[u8]) -> Result<Vec<AnovaScore>> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", labels.len())));
    }
    let mut groups: Vec<u8> = labels.to_vec();
    groups.sort_unstable();
    groups.dedup();
    let g = groups.len();
    if g < 2 {
        return Err(Error::Data("ANOVA needs at least two label groups".into()));
    }
    if n <= g {
        return Err(Error::Data(format!("ANOVA needs more rows ({n}) than groups ({g})")));
    }
    let gi: Vec<usize> = labels
        .iter()
        .map(|l| groups.binary_search(l).expect("label from the same set"))
        .collect();
    let mut counts = vec![0.0; g];
    for &i in &gi {
        counts[i] += 1.0;
    }
    let mut out = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        let mut sums = vec![0.0; g];
        for (&v, &i) in col.iter().zip(&gi) {
            sums[i] += v;
        }
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
        let grand = sums.iter().sum::<f64>() / n as f64;
        let between: f64 = means
            .iter()
            .zip(&counts)
            .map(|(m, c)| c * (m - grand) * (m - grand))
            .sum();
        let within: f64 = col
            .iter()
            .zip(&gi)
            .map(|(&v, &i)| (v - means[i]) * (v - means[i]))
            .sum();
        // Round-off guard: sums of squares below this are treated as zero.
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let eps = 1e-24 * scale * scale * n as f64;
        let f = if within <= eps {
            if between <= eps {
                0.0
            } else {
                f64::MAX
            }
        } else {
            (between / (g - 1) as f64) / (within / (n - g) as f64)
        };
        out.push(AnovaScore { f, between });
    }
    Ok(out)
}

/// Feature selection by ANOVA F statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaModel {
    pub n_features: usize,
    /// Selected feature indices, best first.
    pub features: Vec<usize>,
}

pub fn fit_anova_kbest(train: &ArrayView2<f64>, labels: &[u8], k: usize) -> Result<AnovaModel> {
    check_k(k, train.ncols())?;
    let scores = anova_scores(train, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a], scores[b]);
        sb.f.total_cmp(&sa.f)
            .then_with(|| {
                if sa.f == f64::MAX && sb.f == f64::MAX {
                    sb.between.total_cmp(&sa.between)
                } else {
                    Ordering::Equal
                }
            })
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(AnovaModel {
        n_features: train.ncols(),
        features: order,
    })
}

impl AnovaModel {
    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        check_cols(x, self.n_features)?;
        Ok(select_columns(x, &self.features))
    }
}

/// Per-feature centring and scaling to unit (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

pub fn fit_standardizer(train: &ArrayView2<f64>) -> Result<Standardizer> {
    if train.nrows() == 0 {
        return Err(Error::Data("cannot standardize an empty matrix".into()));
    }
    let (mean, std) = crate::linalg::column_mean_std(train);
    Ok(Standardizer { mean, std })
}

impl Standardizer {
    /// Zero-variance columns map to 0.
    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        check_cols(x, self.mean.len())?;
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if s > 0.0 { (*v - m) / s } else { 0.0 };
            }
        }
        Ok(out)
    }
}

/// Fitted state of one reduction stage.
#[derive(Debug, Clone, PartialEq)]
pub enum ReducerModel {
    Identity { n_features: usize },
    GraphSampling(GraphSamplingModel),
    FrequencySampling(FrequencySamplingModel),
    Pca(PcaModel),
    Ica(IcaModel),
    Anova(AnovaModel),
    Standardizer(Standardizer),
}

impl ReducerModel {
    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            ReducerModel::Identity { n_features } => {
                check_cols(x, *n_features)?;
                Ok(x.to_owned())
            }
            ReducerModel::GraphSampling(m) => m.transform(x),
            ReducerModel::FrequencySampling(m) => m.transform(x),
            ReducerModel::Pca(m) => m.transform(x),
            ReducerModel::Ica(m) => m.transform(x),
            ReducerModel::Anova(m) => m.transform(x),
            ReducerModel::Standardizer(m) => m.transform(x),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ReducerModel::Identity { n_features } => *n_features,
            ReducerModel::GraphSampling(m) => m.vertices.len(),
            ReducerModel::FrequencySampling(m) => m.frequencies.len(),
            ReducerModel::Pca(m) => m.components.nrows(),
            ReducerModel::Ica(m) => m.components.nrows(),
            ReducerModel::Anova(m) => m.features.len(),
            ReducerModel::Standardizer(m) => m.mean.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, laplacian};
    use ndarray::array;

    fn path_spectrum(n: usize) -> Spectrum {
        let w = Array2::from_shape_fn((n, n), |(i, j)| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
        eigendecompose(&laplacian(&w.view()).unwrap().view()).unwrap()
    }

    #[test]
    fn full_band_coherence_is_one() {
        let s = path_spectrum(7);
        let c = coherence(&s, FrequencyBand::full(7)).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn band_partition_sums_to_one() {
        let s = path_spectrum(9);
        let lf = coherence(&s, FrequencyBand::low(9)).unwrap();
        let hf = coherence(&s, FrequencyBand::high(9)).unwrap();
        assert!((&lf + &hf).iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn first_mode_coherence_is_uniform() {
        let s = path_spectrum(5);
        let c = coherence(&s, FrequencyBand::new(0, 0, 5).unwrap()).unwrap();
        assert!(c.iter().all(|v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn graph_sampling_all_vertices_is_identity() {
        let s = path_spectrum(6);
        let m = fit_graph_sampling(&s, Band::HF, 6).unwrap();
        assert_eq!(m.vertices, (0..6).collect::<Vec<_>>());
        let x = Array2::from_shape_fn((3, 6), |(i, j)| (i * 6 + j) as f64);
        assert_eq!(m.transform(&x.view()).unwrap(), x);
        assert_eq!(fit_graph_sampling(&s, Band::HF, 6).unwrap(), m);
        assert!(fit_graph_sampling(&s, Band::HF, 7).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(top_k_indices(&array![1.0, 3.0, 3.0, 2.0].view(), 2), vec![1, 2]);
        assert_eq!(top_k_indices(&array![5.0, 5.0, 5.0].view(), 1), vec![0]);
    }

    #[test]
    fn lf_single_coefficient_is_scaled_mean() {
        let s = path_spectrum(4);
        let m = fit_frequency_sampling(&s, FrequencySelection::LF, 1, None, None).unwrap();
        let x = array![[1.0, 2.0, 3.0, 6.0]];
        let out = m.transform(&x.view()).unwrap();
        assert!((out[[0, 0]] - 3.0 * 2.0).abs() < 1e-12); // mean 3 · √4
    }

    #[test]
    fn anova_frequency_needs_labels() {
        let s = path_spectrum(4);
        assert!(fit_frequency_sampling(&s, FrequencySelection::ANOVA, 1, None, None).is_err());
    }

    #[test]
    fn anova_hand_computed() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]];
        let f = anova_f_scores(&x.view(), &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((f[0] - 13.5).abs() < 1e-12);
    }

    #[test]
    fn anova_degenerate_and_null_features() {
        // column 0: no class difference; column 1: zero within-class variance
        let x = array![[1.0, 0.0], [3.0, 0.0], [1.0, 2.0], [3.0, 2.0]];
        let labels = [0, 0, 1, 1];
        let f = anova_f_scores(&x.view(), &labels).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], f64::MAX);
        let m = fit_anova_kbest(&x.view(), &labels, 1).unwrap();
        assert_eq!(m.features, vec![1]);
    }

    #[test]
    fn standardizer_examples() {
        let x = array![[1.0, 5.0, 2.0], [2.0, 5.0, 4.0], [4.0, 5.0, 9.0]];
        let s = fit_standardizer(&x.view()).unwrap();
        let z = s.transform(&x.view()).unwrap();
        for j in 0..3 {
            assert!(z.column(j).mean().unwrap().abs() < 1e-10);
        }
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        let affine = x.mapv(|v| 3.0 * v + 7.0);
        let z2 = fit_standardizer(&affine.view()).unwrap().transform(&affine.view()).unwrap();
        assert!(crate::linalg::max_abs_diff(&z.view(), &z2.view()) < 1e-12);
        // a new constant-column value still maps to 0
        let t = s.transform(&array![[0.0, 100.0, 0.0]].view()).unwrap();
        assert_eq!(t[[0, 1]], 0.0);
    }
}
