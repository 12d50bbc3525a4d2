//! Random instance generators, brute-force oracles and the two aggregate
//! suites (spectral invariants, oracle equivalence) shared by the
//! integration tests and the acceptance run.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use neurogsp::builders::{build_graph, GraphBuildParams, GraphType, RestMatrix};
use neurogsp::classifiers::{self, ClassifierSpec};
use neurogsp::graph::{eigendecompose, gft, FrequencyBand, Graph, Spectrum};
use neurogsp::reducers::{anova_f_scores, coherence};
use neurogsp::stats::{friedman, wilcoxon_signed_rank, MethodMatrix};
use neurogsp::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Coordinates uniform in a 120 mm box.
pub fn random_coords(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 3), |_| rng.gen_range(-60.0..60.0))
}

/// Rest signals (`n` regions × `m` observations) with a few shared factors
/// so that correlations are not all near zero.
pub fn random_rest(rng: &mut ChaCha8Rng, n: usize, m: usize) -> RestMatrix {
    let factors = normal_matrix(rng, 3, m);
    let loadings = normal_matrix(rng, n, 3);
    let noise = normal_matrix(rng, n, m);
    RestMatrix::new(loadings.dot(&factors) + noise).expect("valid rest matrix")
}

/// Instances redrawn because graph learning hit its outer-iteration limit.
pub static REDRAWS: AtomicUsize = AtomicUsize::new(0);

/// A graph of the given kind on random coordinates and rest signals. The
/// learned graph stops with an error when its alternating scheme has not
/// settled after the default number of outer iterations; such instances
/// are redrawn (and counted in [`REDRAWS`]).
pub fn random_graph(rng: &mut ChaCha8Rng, kind: GraphType, n: usize) -> Graph {
    for _ in 0..100 {
        let coords = random_coords(rng, n);
        let m = rng.gen_range(n.max(8)..=2 * n.max(8));
        let rest = random_rest(rng, n, m);
        let params = GraphBuildParams::defaults_for(&coords.view()).expect("defaults");
        match build_graph(kind, Some(&coords.view()), Some(&rest), &params) {
            Ok(g) => return g,
            Err(Error::Convergence { .. }) => {
                REDRAWS.fetch_add(1, Ordering::Relaxed);
            }
            Err(e) => panic!("{kind} graph failed: {e}"),
        }
    }
    panic!("no convergent {kind} instance in 100 draws");
}

/// Unweighted random graph: each edge present with probability `p`.
pub fn random_binary_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                w[[i, j]] = 1.0;
                w[[j, i]] = 1.0;
            }
        }
    }
    Graph::new(w, None).expect("valid graph")
}

/// Connected components by depth-first search.
pub fn count_components(w: &Array2<f64>) -> usize {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if w[[v, u]] > 0.0 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

// ---------------------------------------------------------------------------
// Spectral invariants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct SpectralReport {
    pub graphs: usize,
    pub signals: usize,
    pub max_row_sum: f64,
    pub max_orthonormality: f64,
    pub max_reconstruction: f64,
    pub max_parseval: f64,
    pub max_coherence: f64,
    pub elapsed: Duration,
}

impl SpectralReport {
    pub fn within_tolerances(&self) -> bool {
        self.max_row_sum < 1e-10
            && self.max_orthonormality < 1e-8
            && self.max_reconstruction < 1e-6
            && self.max_parseval < 1e-8
            && self.max_coherence < 1e-9
    }
}

/// Builds `n_graphs` graphs with 4–64 vertices, cycling through the seven
/// constructions, and measures every spectral invariant on each.
pub fn spectral_suite(n_graphs: usize, signals_per_graph: usize, seed: u64) -> SpectralReport {
    let start = Instant::now();
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    let mut r = SpectralReport::default();
    for g in 0..n_graphs {
        let kind = GraphType::ALL[g % GraphType::ALL.len()];
        let n = rng.gen_range(4..=64);
        let graph = random_graph(&mut rng, kind, n);
        let l = graph.laplacian();
        for row in l.rows() {
            r.max_row_sum = r.max_row_sum.max(row.sum().abs());
        }
        let s = eigendecompose(&l.view()).expect("eigendecomposition");
        let f = s.eigenvectors();
        let gram = f.t().dot(f) - Array2::<f64>::eye(n);
        r.max_orthonormality = r.max_orthonormality.max(max_abs(&gram));
        r.max_reconstruction = r.max_reconstruction.max(max_abs(&(s.reconstruct() - &l)));
        for _ in 0..signals_per_graph {
            let x: Array1<f64> = Array1::from_shape_fn(n, |_| rng.sample(StandardNormal));
            let xhat = gft(&s, &x.view()).expect("gft");
            let e = x.dot(&x);
            r.max_parseval = r.max_parseval.max((xhat.dot(&xhat) - e).abs() / e);
            r.signals += 1;
        }
        let full = coherence(&s, FrequencyBand::full(n)).expect("coherence");
        for c in full.iter() {
            r.max_coherence = r.max_coherence.max((c - 1.0).abs());
        }
        r.graphs += 1;
    }
    r.elapsed = start.elapsed();
    r
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Mid-rank of `values[i]` by counting: `#smaller + (#equal + 1) / 2`.
fn counting_rank(values: &[f64], i: usize) -> f64 {
    let less = values.iter().filter(|v| **v < values[i]).count() as f64;
    let equal = values.iter().filter(|v| **v == values[i]).count() as f64;
    less + (equal + 1.0) / 2.0
}

/// Sizes of the groups of equal values.
fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        out.push(j);
        i += j;
    }
    out
}

/// Tie-corrected Friedman statistic of a subjects × methods table.
pub fn friedman_oracle(rows: &[Vec<f64>]) -> f64 {
    let s = rows.len() as f64;
    let c = rows[0].len();
    let cf = c as f64;
    let mut rank_sums = vec![0.0; c];
    let mut tie_total = 0.0;
    for row in rows {
        for (j, r) in rank_sums.iter_mut().enumerate() {
            *r += counting_rank(row, j);
        }
        tie_total += tie_sizes(row).iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let chi = 12.0 / (s * cf * (cf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * s * (cf + 1.0);
    let denom = 1.0 - tie_total / (s * (cf * cf * cf - cf));
    if denom <= 0.0 {
        0.0
    } else {
        chi / denom
    }
}

/// χ² survival function for an even number of degrees of freedom.
pub fn chi2_sf_even(x: f64, df: usize) -> f64 {
    assert!(df % 2 == 0);
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..df / 2 {
        term *= h / i as f64;
        sum += term;
    }
    (-h).exp() * sum
}

/// `(W⁺, two-sided exact p)` by enumerating all sign assignments of the
/// mid-ranks of the nonzero paired differences.
pub fn wilcoxon_exact_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = (0..n).map(|i| counting_rank(&abs, i)).collect();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let centre = ranks.iter().sum::<f64>() / 2.0;
    let observed = (w_plus - centre).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - centre).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    (w_plus, extreme as f64 / (1u64 << n) as f64)
}

/// Signed-rank z with continuity and tie corrections.
pub fn wilcoxon_z_oracle(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len() as f64;
    if d.is_empty() {
        return 0.0;
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let w: f64 = (0..d.len()).filter(|&i| d[i] > 0.0).map(|i| counting_rank(&abs, i)).sum();
    let ties: f64 = tie_sizes(&abs).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let dev = w - n * (n + 1.0) / 4.0;
    if var <= 0.0 || dev.abs() <= 0.5 {
        0.0
    } else {
        (dev - 0.5 * dev.signum()) / var.sqrt()
    }
}

/// One-way ANOVA F of every column of `x` between the two label classes.
pub fn anova_oracle(x: &Array2<f64>, labels: &[u8]) -> Vec<f64> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let grand = col.sum() / n;
            let mut ssb = 0.0;
            let mut ssw = 0.0;
            for class in [0u8, 1] {
                let members: Vec<f64> = (0..x.nrows()).filter(|&i| labels[i] == class).map(|i| col[i]).collect();
                let m = members.iter().sum::<f64>() / members.len() as f64;
                ssb += members.len() as f64 * (m - grand).powi(2);
                ssw += members.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            }
            (ssb / 1.0) / (ssw / (n - 2.0))
        })
        .collect()
}

/// Majority vote of the `k` nearest training rows, found by a full sort
/// (distances assumed distinct); a tied vote goes to class 0.
pub fn knn_oracle(train: &Array2<f64>, labels: &[u8], test: &Array2<f64>, k: usize) -> Vec<u8> {
    test.rows()
        .into_iter()
        .map(|q| {
            let mut d: Vec<(f64, u8)> = train
                .rows()
                .into_iter()
                .zip(labels)
                .map(|(t, &l)| ((&t - &q).mapv(|v| v * v).sum(), l))
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let ones = d.iter().take(k).filter(|p| p.1 == 1).count();
            u8::from(2 * ones > k.min(d.len()))
        })
        .collect()
}

/// `Σ_k F[i,k]²` over the band, by explicit loops.
pub fn coherence_oracle(s: &Spectrum, band: FrequencyBand) -> Vec<f64> {
    let f = s.eigenvectors();
    (0..f.nrows())
        .map(|i| {
            let mut acc = 0.0;
            for k in band.f_min..=band.f_max {
                acc += f[[i, k]] * f[[i, k]];
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub friedman_max_diff: f64,
    pub friedman_p_max_diff: f64,
    pub wilcoxon_z_max_diff: f64,
    pub wilcoxon_p_max_diff: f64,
    pub anova_max_rel_diff: f64,
    pub knn_mismatches: usize,
    pub coherence_max_diff: f64,
}

impl OracleReport {
    pub fn within_tolerances(&self) -> bool {
        self.friedman_max_diff < 1e-10
            && self.friedman_p_max_diff < 1e-10
            && self.wilcoxon_z_max_diff < 1e-10
            && self.wilcoxon_p_max_diff == 0.0
            && self.anova_max_rel_diff < 1e-10
            && self.knn_mismatches == 0
            && self.coherence_max_diff < 1e-10
    }
}

/// Accuracy-like value on a coarse grid, so that ties are frequent.
fn grid_value(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.gen_range(0..=16u32)) / 16.0
}

/// Compares every statistic against its oracle on `n_instances` random
/// instances with at most 12 subjects / vertices.
pub fn oracle_suite(n_instances: usize, seed: u64) -> OracleReport {
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    let mut r = OracleReport::default();
    for _ in 0..n_instances {
        // Friedman on a tie-rich table.
        let s = rng.gen_range(2..=12);
        let c = rng.gen_range(2..=12);
        let rows: Vec<Vec<f64>> = (0..s).map(|_| (0..c).map(|_| grid_value(&mut rng)).collect()).collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = MethodMatrix::new(Array2::from_shape_vec((s, c), flat).unwrap()).unwrap();
        let got = friedman(&m).unwrap();
        let want = friedman_oracle(&rows);
        r.friedman_max_diff = r.friedman_max_diff.max((got.statistic - want).abs());
        if (c - 1) % 2 == 0 {
            let p = chi2_sf_even(want.max(0.0), c - 1);
            r.friedman_p_max_diff = r.friedman_p_max_diff.max((got.p_value - p).abs());
        }

        // Wilcoxon (exact regime).
        let a: Vec<f64> = (0..s).map(|_| grid_value(&mut rng)).collect();
        let b: Vec<f64> = (0..s).map(|_| grid_value(&mut rng)).collect();
        let got = wilcoxon_signed_rank(&Array1::from(a.clone()).view(), &Array1::from(b.clone()).view()).unwrap();
        let (_, p) = wilcoxon_exact_oracle(&a, &b);
        r.wilcoxon_p_max_diff = r.wilcoxon_p_max_diff.max((got.p_value - p).abs());
        r.wilcoxon_z_max_diff = r.wilcoxon_z_max_diff.max((got.statistic - wilcoxon_z_oracle(&a, &b)).abs());

        // ANOVA F.
        let n = rng.gen_range(4..=12);
        let d = rng.gen_range(1..=12);
        let x = normal_matrix(&mut rng, n, d);
        let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.gen_range(0..=i));
        }
        let got = anova_f_scores(&x.view(), &labels).unwrap();
        for (g, w) in got.iter().zip(anova_oracle(&x, &labels)) {
            r.anova_max_rel_diff = r.anova_max_rel_diff.max((g - w).abs() / w.abs().max(1.0));
        }

        // kNN.
        let n_train = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=6);
        let train = normal_matrix(&mut rng, n_train, d);
        let train_labels: Vec<u8> = (0..n_train).map(|i| (i % 2) as u8).collect();
        let test = normal_matrix(&mut rng, 6, d);
        let k = 2 * rng.gen_range(0..=(n_train - 1) / 2) + 1;
        let model = classifiers::fit(&ClassifierSpec::knn(k), &train.view(), &train_labels).unwrap();
        let got = model.predict(&test.view()).unwrap();
        let want = knn_oracle(&train, &train_labels, &test, k);
        r.knn_mismatches += got.iter().zip(&want).filter(|(g, w)| g != w).count();

        // Coherence over random bands.
        let n = rng.gen_range(2..=12);
        let kind = GraphType::ALL[rng.gen_range(0..7)];
        let graph = random_graph(&mut rng, kind, n);
        let spec = eigendecompose(&graph.laplacian().view()).unwrap();
        let lo = rng.gen_range(0..n);
        let hi = rng.gen_range(lo..n);
        let band = FrequencyBand::new(lo, hi, n).unwrap();
        let got = coherence(&spec, band).unwrap();
        for (g, w) in got.iter().zip(coherence_oracle(&spec, band)) {
            r.coherence_max_diff = r.coherence_max_diff.max((g - w).abs());
        }
        r.instances += 1;
    }
    r
}

/// Column means of a matrix (helper for reports).
pub fn column_means(a: &Array2<f64>) -> Array1<f64> {
    a.mean_axis(Axis(0)).expect("non-empty")
}
