//! The seven graph constructions over brain regions.
//!
//! Geometric graphs use only region barycenters, functional graphs use only
//! rest-period signals, mixed graphs use both.

mod kalofolias;

pub use kalofolias::{learn_graph, smooth_signals, KalofoliasFit, KalofoliasOptions};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Rest-period signals, one row per region and one column per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RestMatrix {
    data: Array2<f64>,
}

impl RestMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::Data(format!("rest matrix needs at least 2 regions, got {}", data.nrows())));
        }
        if data.ncols() < 2 {
            return Err(Error::Data(format!(
                "rest matrix needs at least 2 observations, got {}",
                data.ncols()
            )));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("rest value at region {i}, observation {j} is {v}")));
        }
        Ok(RestMatrix { data })
    }

    pub fn n_regions(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_observations(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Sample covariance between regions (denominator `M - 1`).
    pub fn covariance(&self) -> Array2<f64> {
        crate::linalg::column_covariance(&self.data.t())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphType {
    Full,
    Geometric,
    Correlation,
    Covariance,
    Kalofolias,
    Semilocal,
    Fundis,
}

impl GraphType {
    pub const ALL: [GraphType; 7] = [
        GraphType::Full,
        GraphType::Geometric,
        GraphType::Correlation,
        GraphType::Covariance,
        GraphType::Kalofolias,
        GraphType::Semilocal,
        GraphType::Fundis,
    ];

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            GraphType::Full => "Full",
            GraphType::Geometric => "Geometric",
            GraphType::Correlation => "|Correlation|",
            GraphType::Covariance => "|Covariance|",
            GraphType::Kalofolias => "Kalofolias",
            GraphType::Semilocal => "Semilocal",
            GraphType::Fundis => "Fundis",
        }
    }

    pub fn needs_coords(self) -> bool {
        matches!(
            self,
            GraphType::Full | GraphType::Geometric | GraphType::Semilocal | GraphType::Fundis
        )
    }

    pub fn needs_rest(self) -> bool {
        !matches!(self, GraphType::Full | GraphType::Geometric)
    }
}

impl std::fmt::Display for GraphType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Kernel scales and thresholds for graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBuildParams {
    /// Gaussian kernel scale on squared distance, mm².
    pub sigma: f64,
    /// Neighborhood radius, mm (strict `<`).
    pub alpha: f64,
    /// Kernel scale on `(1 - |corr|)²`.
    pub theta: f64,
    /// Smoothness weight of the learned graph.
    pub beta: f64,
    pub kal_log_weight: f64,
    pub kal_sparsity_weight: f64,
}

impl GraphBuildParams {
    /// Data-driven defaults: `σ = (mean pairwise distance)² / 2`, `α` = 20%
    /// quantile of pairwise distances, `θ = 0.5`, `β = 1`.
    pub fn defaults_for(coords: &ArrayView2<f64>) -> Result<Self> {
        let d = pairwise_distances(coords)?;
        let n = d.nrows();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push(d[[i, j]]);
            }
        }
        if pairs.is_empty() {
            return Err(Error::Data("need at least two regions".into()));
        }
        let mean = pairs.iter().sum::<f64>() / pairs.len() as f64;
        pairs.sort_by(f64::total_cmp);
        let kal = KalofoliasOptions::default();
        Ok(GraphBuildParams {
            sigma: mean * mean / 2.0,
            alpha: quantile_sorted(&pairs, 0.2),
            theta: 0.5,
            beta: kal.beta,
            kal_log_weight: kal.log_weight,
            kal_sparsity_weight: kal.sparsity_weight,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("theta", self.theta),
            ("beta", self.beta),
            ("kal_log_weight", self.kal_log_weight),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kal_sparsity_weight >= 0.0 && self.kal_sparsity_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kal_sparsity_weight must be nonnegative, got {}",
                self.kal_sparsity_weight
            )));
        }
        Ok(())
    }

    pub fn kalofolias_options(&self) -> KalofoliasOptions {
        KalofoliasOptions {
            beta: self.beta,
            log_weight: self.kal_log_weight,
            sparsity_weight: self.kal_sparsity_weight,
            ..KalofoliasOptions::default()
        }
    }
}

/// Linear-interpolation quantile of ascending data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Euclidean distances between rows of an `N×3` coordinate matrix.
pub fn pairwise_distances(coords: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if coords.ncols() != 3 {
        return Err(Error::Dimension(format!("coordinates must have 3 columns, got {}", coords.ncols())));
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("coordinates contain non-finite values".into()));
    }
    let n = coords.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for k in 0..3 {
                let t = coords[[i, k]] - coords[[j, k]];
                s += t * t;
            }
            d[[i, j]] = s.sqrt();
            d[[j, i]] = d[[i, j]];
        }
    }
    Ok(d)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn check_match(coords: &ArrayView2<f64>, rest: &RestMatrix) -> Result<()> {
    if coords.nrows() != rest.n_regions() {
        return Err(Error::Dimension(format!(
            "{} coordinate rows but {} rest regions",
            coords.nrows(),
            rest.n_regions()
        )));
    }
    Ok(())
}

fn full_kernel(coords: &ArrayView2<f64>, sigma: f64) -> Result<Array2<f64>> {
    check_positive("sigma", sigma)?;
    let d = pairwise_distances(coords)?;
    let mut w = d.mapv(|x| (-x * x / (2.0 * sigma)).exp());
    w.diag_mut().fill(0.0);
    Ok(w)
}

/// Zeroes every weight whose endpoints are at distance `≥ alpha`.
fn mask_by_radius(w: &mut Array2<f64>, coords: &ArrayView2<f64>, alpha: f64) -> Result<()> {
    check_positive("alpha", alpha)?;
    let d = pairwise_distances(coords)?;
    w.zip_mut_with(&d, |wij, &dij| {
        if !(dij < alpha) {
            *wij = 0.0;
        }
    });
    Ok(())
}

pub fn build_full(coords: &ArrayView2<f64>, params: &GraphBuildParams) -> Result<Graph> {
    Graph::new(full_kernel(coords, params.sigma)?, Some(coords.to_owned()))
}

pub fn build_geometric(coords: &ArrayView2<f64>, params: &GraphBuildParams) -> Result<Graph> {
    let mut w = full_kernel(coords, params.sigma)?;
    mask_by_radius(&mut w, coords, params.alpha)?;
    let g = Graph::new(w, Some(coords.to_owned()))?;
    let components = g.n_components();
    if components > 1 {
        log::warn!("geometric graph has {components} connected components");
    }
    Ok(g)
}

/// Pearson correlation between rest rows; fails on a zero-variance region.
pub fn correlation_matrix(rest: &RestMatrix) -> Result<Array2<f64>> {
    let cov = rest.covariance();
    let sd: Array1<f64> = cov.diag().mapv(f64::sqrt);
    if let Some(i) = sd.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Data(format!("region {i} has zero variance in the rest signals")));
    }
    let mut corr = cov;
    let n = corr.nrows();
    for i in 0..n {
        for j in 0..n {
            corr[[i, j]] = (corr[[i, j]] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
        }
    }
    Ok(corr)
}

fn abs_offdiag_symmetric(m: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m[[i, j]].abs();
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    w
}

pub fn build_abs_correlation(rest: &RestMatrix) -> Result<Graph> {
    Graph::new(abs_offdiag_symmetric(correlation_matrix(rest)?), None)
}

pub fn build_abs_covariance(rest: &RestMatrix) -> Result<Graph> {
    Graph::new(abs_offdiag_symmetric(rest.covariance()), None)
}

/// Returns the learned graph and its Laplacian.
pub fn build_kalofolias(rest: &RestMatrix, params: &GraphBuildParams) -> Result<(Graph, Array2<f64>)> {
    let fit = build_kalofolias_fit(rest, params)?;
    Ok((Graph::new(fit.weights, None)?, fit.laplacian))
}

pub fn build_kalofolias_fit(rest: &RestMatrix, params: &GraphBuildParams) -> Result<KalofoliasFit> {
    learn_graph(&rest.data.view(), &params.kalofolias_options())
}

pub fn build_semilocal(coords: &ArrayView2<f64>, rest: &RestMatrix, params: &GraphBuildParams) -> Result<Graph> {
    check_match(coords, rest)?;
    let mut w = abs_offdiag_symmetric(rest.covariance());
    mask_by_radius(&mut w, coords, params.alpha)?;
    Graph::new(w, Some(coords.to_owned()))
}

pub fn build_fundis(coords: &ArrayView2<f64>, rest: &RestMatrix, params: &GraphBuildParams) -> Result<Graph> {
    check_match(coords, rest)?;
    check_positive("theta", params.theta)?;
    let corr = correlation_matrix(rest)?;
    let mut w = full_kernel(coords, params.sigma)?;
    let n = w.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let c = 1.0 - corr[[i, j]].abs();
            let v = w[[i, j]] * (-c * c / (2.0 * params.theta)).exp();
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    Graph::new(w, Some(coords.to_owned()))
}

/// Builds any of the seven graphs. `coords` and `rest` are required only by
/// the constructions that use them.
pub fn build_graph(
    kind: GraphType,
    coords: Option<&ArrayView2<f64>>,
    rest: Option<&RestMatrix>,
    params: &GraphBuildParams,
) -> Result<Graph> {
    let need_coords = || coords.ok_or_else(|| Error::Data(format!("{kind} graph needs coordinates")));
    let need_rest = || rest.ok_or_else(|| Error::Data(format!("{kind} graph needs rest signals")));
    match kind {
        GraphType::Full => build_full(need_coords()?, params),
        GraphType::Geometric => build_geometric(need_coords()?, params),
        GraphType::Correlation => build_abs_correlation(need_rest()?),
        GraphType::Covariance => build_abs_covariance(need_rest()?),
        GraphType::Kalofolias => Ok(build_kalofolias(need_rest()?, params)?.0),
        GraphType::Semilocal => build_semilocal(need_coords()?, need_rest()?, params),
        GraphType::Fundis => build_fundis(need_coords()?, need_rest()?, params),
    }
}

/// Row means of the rest matrix; exposed for callers that need to centre
/// rest data consistently.
pub fn rest_region_means(rest: &RestMatrix) -> Array1<f64> {
    rest.data.mean_axis(Axis(1)).expect("non-empty")
}
