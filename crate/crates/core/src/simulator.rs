//! Region-level simulation of a two-condition block-design experiment.
//!
//! Activation is placed in clusters of neighbouring regions, convolved with a
//! canonical double-gamma response and buried in a weighted mixture of six
//! noise processes whose overall level is set by a target signal-to-noise
//! ratio measured in the active regions.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma};

use crate::builders::{pairwise_distances, RestMatrix};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Lag-one coefficient of the autoregressive noise component.
pub const AR1_RHO: f64 = 0.3;
/// Width of the Gaussian kernel smoothing the spatial noise component.
pub const SPATIAL_SIGMA_MM: f64 = 10.0;
/// Upper frequency of the cosine drift basis.
pub const DRIFT_MAX_HZ: f64 = 0.01;
pub const RESPIRATORY_HZ: f64 = 0.2;
pub const CARDIAC_HZ: f64 = 1.17;
/// Support of the response kernel.
pub const HRF_LENGTH_S: f64 = 32.0;
const HRF_PEAK_SHAPE: f64 = 6.0;
const HRF_UNDERSHOOT_SHAPE: f64 = 16.0;
const HRF_UNDERSHOOT_RATIO: f64 = 1.0 / 6.0;
/// Sub-samples per repetition time used for the convolution.
const OVERSAMPLING: usize = 16;
/// Non-centrality of the complex Gaussian whose magnitude gives Rician noise.
const RICIAN_NU: f64 = 1.0;

/// Order of the noise components in [`SimConfig::noise_weights`].
pub const NOISE_COMPONENTS: [&str; 6] = ["rician", "ar1", "spatial", "drift", "physio", "task"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_regions: usize,
    pub tr_seconds: f64,
    pub blocks_per_condition: usize,
    pub block_seconds: f64,
    pub rest_seconds: f64,
    pub mid_rest_seconds: f64,
    /// Number of active areas (region clusters).
    pub n_active_regions: usize,
    pub snr: f64,
    /// One magnitude per active area; an empty list means all 1.
    pub activation_magnitudes: Vec<f64>,
    pub center_jitter_mm: f64,
    /// Regions within this distance of a (jittered) area centre are active.
    pub cluster_radius_mm: f64,
    /// Fraction by which an area's response to its non-preferred condition
    /// is reduced: 1 responds to one condition only, 0 to both equally.
    pub selectivity: f64,
    /// Weights of the rician, ar1, spatial, drift, physio and task components.
    pub noise_weights: [f64; 6],
    /// Subject seed: drives the jitter of the area centres.
    pub seed: u64,
    /// Run index: together with `seed` drives the noise realisation.
    pub run: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_regions: 444,
            tr_seconds: 2.0,
            blocks_per_condition: 12,
            block_seconds: 22.0,
            rest_seconds: 10.0,
            mid_rest_seconds: 60.0,
            n_active_regions: 6,
            snr: 3.0,
            activation_magnitudes: Vec::new(),
            center_jitter_mm: 6.0,
            cluster_radius_mm: 18.0,
            selectivity: 0.5,
            noise_weights: [1.0; 6],
            seed: 0,
            run: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_regions < 2 || self.n_active_regions == 0 || self.blocks_per_condition == 0 {
            return bad("simulation needs ≥ 2 regions, ≥ 1 active area and ≥ 1 block".into());
        }
        for (name, v) in [
            ("tr_seconds", self.tr_seconds),
            ("block_seconds", self.block_seconds),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("rest_seconds", self.rest_seconds),
            ("mid_rest_seconds", self.mid_rest_seconds),
            ("center_jitter_mm", self.center_jitter_mm),
            ("cluster_radius_mm", self.cluster_radius_mm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.block_seconds < 2.0 * self.tr_seconds {
            return bad("a block must span at least two volumes".into());
        }
        if !(self.snr > 0.0) {
            return bad(format!("snr must be positive, got {}", self.snr));
        }
        if !(0.0..=1.0).contains(&self.selectivity) {
            return bad(format!("selectivity must lie in [0, 1], got {}", self.selectivity));
        }
        if self.noise_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad(format!("noise weights must be nonnegative, got {:?}", self.noise_weights));
        }
        if !self.activation_magnitudes.is_empty() && self.activation_magnitudes.len() != self.n_active_regions {
            return bad(format!(
                "{} activation magnitudes for {} active areas",
                self.activation_magnitudes.len(),
                self.n_active_regions
            ));
        }
        if self.activation_magnitudes.iter().any(|m| !m.is_finite()) {
            return bad("activation magnitudes must be finite".into());
        }
        Ok(())
    }

    fn magnitude(&self, area: usize) -> f64 {
        self.activation_magnitudes.get(area).copied().unwrap_or(1.0)
    }
}

/// Volume-by-volume layout of the experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignMatrix {
    /// Condition shown at each volume, `None` during rest.
    pub conditions: Vec<Option<u8>>,
    /// Block index (0-based, in presentation order) at each volume.
    pub blocks: Vec<Option<usize>>,
}

impl DesignMatrix {
    pub fn n_volumes(&self) -> usize {
        self.conditions.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.iter().flatten().max().map_or(0, |b| b + 1)
    }

    /// Volumes used for decoding: block volumes except the first of each block.
    pub fn task_volumes(&self) -> Vec<usize> {
        (0..self.n_volumes())
            .filter(|&v| match self.blocks[v] {
                Some(b) => v > 0 && self.blocks[v - 1] == Some(b),
                None => false,
            })
            .collect()
    }

    pub fn rest_volumes(&self) -> Vec<usize> {
        (0..self.n_volumes()).filter(|&v| self.conditions[v].is_none()).collect()
    }
}

/// Alternating blocks of the two conditions, each followed by rest, with an
/// extra rest period after the first half of the blocks.
pub fn make_design(cfg: &SimConfig) -> Result<DesignMatrix> {
    cfg.validate()?;
    let n_blocks = 2 * cfg.blocks_per_condition;
    // Segment boundaries in seconds.
    let mut segments: Vec<(f64, Option<usize>)> = Vec::new();
    for b in 0..n_blocks {
        segments.push((cfg.block_seconds, Some(b)));
        if cfg.rest_seconds > 0.0 {
            segments.push((cfg.rest_seconds, None));
        }
        if b + 1 == n_blocks / 2 && cfg.mid_rest_seconds > 0.0 {
            segments.push((cfg.mid_rest_seconds, None));
        }
    }
    let total: f64 = segments.iter().map(|s| s.0).sum();
    let n_volumes = (total / cfg.tr_seconds).round() as usize;
    let mut conditions = Vec::with_capacity(n_volumes);
    let mut blocks = Vec::with_capacity(n_volumes);
    let mut seg = 0;
    let mut seg_end = segments[0].0;
    for v in 0..n_volumes {
        let t = v as f64 * cfg.tr_seconds;
        while t >= seg_end - 1e-9 && seg + 1 < segments.len() {
            seg += 1;
            seg_end += segments[seg].0;
        }
        let block = segments[seg].1;
        blocks.push(block);
        conditions.push(block.map(|b| (b % 2) as u8));
    }
    Ok(DesignMatrix { conditions, blocks })
}

/// Double-gamma response kernel evaluated at `t` seconds (unnormalized).
pub fn hrf_kernel(t: f64) -> f64 {
    if !(0.0..=HRF_LENGTH_S).contains(&t) || t == 0.0 {
        return 0.0;
    }
    let peak = Gamma::new(HRF_PEAK_SHAPE, 1.0).expect("valid shape");
    let under = Gamma::new(HRF_UNDERSHOOT_SHAPE, 1.0).expect("valid shape");
    peak.pdf(t) - HRF_UNDERSHOOT_RATIO * under.pdf(t)
}

/// Per-condition regressors (`T×2`): each condition's boxcar convolved with
/// the response kernel and sampled at volume onsets. Both columns share one
/// scale factor chosen so the largest value of their sum is 1.
pub fn hemodynamic_response(design: &DesignMatrix, tr: f64) -> Result<Array2<f64>> {
    if !(tr > 0.0) {
        return Err(Error::InvalidParameter(format!("tr must be positive, got {tr}")));
    }
    let t = design.n_volumes();
    let dt = tr / OVERSAMPLING as f64;
    let kernel: Vec<f64> = (0..=(HRF_LENGTH_S / dt).floor() as usize)
        .map(|i| hrf_kernel(i as f64 * dt) * dt)
        .collect();
    let fine = t * OVERSAMPLING;
    let mut out = Array2::<f64>::zeros((t, 2));
    for c in 0..2u8 {
        let boxcar: Vec<f64> = (0..fine)
            .map(|i| f64::from(u8::from(design.conditions[i / OVERSAMPLING] == Some(c))))
            .collect();
        for v in 0..t {
            let i = v * OVERSAMPLING;
            let mut acc = 0.0;
            for (lag, k) in kernel.iter().enumerate().take(i + 1) {
                acc += k * boxcar[i - lag];
            }
            out[[v, c as usize]] = acc;
        }
    }
    let peak = out.sum_axis(Axis(1)).iter().fold(0.0_f64, |m, &v| m.max(v));
    if peak > 0.0 {
        out /= peak;
    }
    Ok(out)
}

/// Deterministic pseudo-random region centroids filling an ellipsoid with
/// brain-like semi-axes (x 68, y 88, z 62 mm), spread by farthest-point
/// sampling so neighbouring regions sit roughly evenly apart.
pub fn synthetic_atlas(n_regions: usize, seed: u64) -> Array2<f64> {
    const AXES: [f64; 3] = [68.0, 88.0, 62.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cand = 20 * n_regions.max(1);
    let mut cand = Vec::with_capacity(n_cand);
    while cand.len() < n_cand {
        let p: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            cand.push([p[0] * AXES[0], p[1] * AXES[1], p[2] * AXES[2]]);
        }
    }
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
    // Start from the candidate closest to the centre.
    let first = (0..n_cand)
        .min_by(|&a, &b| d2(&cand[a], &[0.0; 3]).total_cmp(&d2(&cand[b], &[0.0; 3])))
        .unwrap_or(0);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = cand.iter().map(|c| d2(c, &cand[first])).collect();
    while chosen.len() < n_regions {
        let next = (0..n_cand)
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        chosen.push(next);
        for (i, c) in cand.iter().enumerate() {
            nearest[i] = nearest[i].min(d2(c, &cand[next]));
        }
    }
    // Present regions in a spatially meaningful order (by y, then x, then z).
    chosen.sort_by(|&a, &b| {
        let (p, q) = (&cand[a], &cand[b]);
        p[1].total_cmp(&q[1]).then(p[0].total_cmp(&q[0])).then(p[2].total_cmp(&q[2]))
    });
    Array2::from_shape_fn((n_regions, 3), |(i, k)| (cand[chosen[i]][k] * 10.0).round() / 10.0)
}

/// Nominal area centres as fractions of the atlas half-extent around its
/// centre: three bilateral pairs placed between the core and the boundary.
const NOMINAL_AREAS: [[f64; 3]; 6] = [
    [-0.42, -0.45, -0.2],
    [0.42, -0.45, -0.2],
    [-0.5, -0.05, 0.25],
    [0.5, -0.05, 0.25],
    [-0.3, 0.35, 0.3],
    [0.3, 0.35, 0.3],
];

struct Geometry {
    center: [f64; 3],
    half_extent: [f64; 3],
    lo: [f64; 3],
    hi: [f64; 3],
}

fn geometry(coords: &ArrayView2<f64>) -> Geometry {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for row in coords.rows() {
        for k in 0..3 {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    let center = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
    let half_extent = [0, 1, 2].map(|k| 0.5 * (hi[k] - lo[k]));
    Geometry {
        center,
        half_extent,
        lo,
        hi,
    }
}

/// Area centres for one subject: nominal positions (extra areas beyond the
/// six nominal ones are drawn from a fixed stream) plus Gaussian jitter,
/// clamped to the bounding box of the coordinates.
pub fn area_centers(cfg: &SimConfig, coords: &ArrayView2<f64>) -> Vec<[f64; 3]> {
    let g = geometry(coords);
    let mut fixed = ChaCha8Rng::seed_from_u64(0x5eed_a7ea);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_active_regions)
        .map(|a| {
            let frac = NOMINAL_AREAS.get(a).copied().unwrap_or_else(|| {
                [0, 1, 2].map(|_| fixed.gen_range(-0.5..0.5))
            });
            let mut p = [0.0; 3];
            for k in 0..3 {
                let jitter: f64 = StandardNormal.sample(&mut rng);
                let v = g.center[k] + frac[k] * g.half_extent[k] + cfg.center_jitter_mm * jitter;
                if v < g.lo[k] || v > g.hi[k] {
                    log::warn!("area {a} centre pushed outside the coordinate hull, clamped");
                }
                p[k] = v.clamp(g.lo[k], g.hi[k]);
            }
            p
        })
        .collect()
}

/// Regions belonging to each area: those within the cluster radius of its
/// centre, and always at least the nearest region (the anchor).
pub fn area_members(cfg: &SimConfig, coords: &ArrayView2<f64>) -> Vec<Vec<usize>> {
    area_centers(cfg, coords)
        .iter()
        .map(|c| {
            let dist: Vec<f64> = coords
                .rows()
                .into_iter()
                .map(|r| (0..3).map(|k| (r[k] - c[k]).powi(2)).sum::<f64>().sqrt())
                .collect();
            let anchor = (0..dist.len()).min_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap_or(0);
            (0..dist.len())
                .filter(|&i| i == anchor || dist[i] <= cfg.cluster_radius_mm)
                .collect()
        })
        .collect()
}

fn unit_variance(mut m: Array2<f64>) -> Array2<f64> {
    let mean = m.mean().unwrap_or(0.0);
    m -= mean;
    let sd = (m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64).sqrt();
    if sd > 0.0 {
        m /= sd;
    }
    m
}

fn gaussian(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

/// Log-normal spread of the per-region physiological noise amplitude.
const PHYSIO_LOG_SD: f64 = 0.75;

/// Per-region amplitude of physiological noise; fixed for a subject.
fn physio_amplitudes(cfg: &SimConfig, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (PHYSIO_LOG_SD * z).exp()
        })
        .collect()
}

fn noise_rng(cfg: &SimConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1 + u64::from(cfg.run));
    rng
}

/// Weighted sum of the six noise components, each scaled to unit pooled
/// variance before weighting. `task_regressor` gates the task component.
pub fn noise_mixture(
    cfg: &SimConfig,
    n_volumes: usize,
    coords: &ArrayView2<f64>,
    task_regressor: &Array1<f64>,
) -> Result<Array2<f64>> {
    let n = coords.nrows();
    if coords.ncols() != 3 || task_regressor.len() != n_volumes {
        return Err(Error::Dimension(format!(
            "noise needs N×3 coordinates and {n_volumes} regressor values, got {}x{} and {}",
            n,
            coords.ncols(),
            task_regressor.len()
        )));
    }
    let shape = (n_volumes, n);
    let tr = cfg.tr_seconds;
    let mut rng = noise_rng(cfg);
    let mut total = Array2::<f64>::zeros(shape);
    for (which, &w) in cfg.noise_weights.iter().enumerate() {
        // Every component consumes its random numbers even when unweighted so
        // that changing one weight does not reshuffle the others.
        let component = match which {
            0 => {
                let re = gaussian(&mut rng, shape);
                let im = gaussian(&mut rng, shape);
                ndarray::Zip::from(&re).and(&im).map_collect(|a, b| ((RICIAN_NU + a).powi(2) + b * b).sqrt())
            }
            1 => {
                let e = gaussian(&mut rng, shape);
                let innov = (1.0 - AR1_RHO * AR1_RHO).sqrt();
                let mut out = Array2::<f64>::zeros(shape);
                out.row_mut(0).assign(&e.row(0));
                for t in 1..n_volumes {
                    let prev = out.row(t - 1).to_owned();
                    out.row_mut(t).assign(&(&prev * AR1_RHO + &e.row(t) * innov));
                }
                out
            }
            2 => {
                let e = gaussian(&mut rng, shape);
                let d = pairwise_distances(coords)?;
                let kernel = d.mapv(|v| (-v * v / (2.0 * SPATIAL_SIGMA_MM * SPATIAL_SIGMA_MM)).exp());
                e.dot(&kernel)
            }
            3 => {
                let duration = n_volumes as f64 * tr;
                // cos(π j t / duration) has frequency j / (2 duration).
                let n_basis = ((2.0 * duration * DRIFT_MAX_HZ).ceil() as usize).saturating_sub(1).max(1);
                let basis = Array2::from_shape_fn((n_volumes, n_basis), |(t, j)| {
                    (std::f64::consts::PI * (j + 1) as f64 * (t as f64 + 0.5) * tr / duration).cos()
                });
                let coef = gaussian(&mut rng, (n_basis, n));
                basis.dot(&coef)
            }
            4 => {
                // Respiration and heartbeat are global sources: one phase per
                // run, felt with a region-specific (subject-level) amplitude.
                let phases = [0, 1].map(|_| rng.gen_range(0.0..std::f64::consts::TAU));
                let amplitude = physio_amplitudes(cfg, n);
                Array2::from_shape_fn(shape, |(t, i)| {
                    let time = t as f64 * tr;
                    amplitude[i]
                        * ((std::f64::consts::TAU * RESPIRATORY_HZ * time + phases[0]).sin()
                            + (std::f64::consts::TAU * CARDIAC_HZ * time + phases[1]).sin())
                })
            }
            _ => {
                let e = gaussian(&mut rng, shape);
                e * &task_regressor.view().insert_axis(Axis(1))
            }
        };
        if w > 0.0 {
            total.scaled_add(w, &unit_variance(component));
        }
    }
    Ok(total)
}

fn pooled_sd(m: &Array2<f64>, cols: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &c in cols {
        let col = m.column(c);
        let mean = col.mean().unwrap_or(0.0);
        sum += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        count += col.len();
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// One simulated run: clean signal, scaled noise, and the resulting dataset.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    /// Union of all area members, ascending.
    pub active_regions: Vec<usize>,
    /// `sd(signal) / sd(noise)` over the active regions and all volumes.
    pub realized_snr: f64,
}

/// Simulates one run of one subject on the given region coordinates.
pub fn simulate(cfg: &SimConfig, coords: &ArrayView2<f64>) -> Result<Simulation> {
    cfg.validate()?;
    if coords.nrows() != cfg.n_regions || coords.ncols() != 3 {
        return Err(Error::Dimension(format!(
            "config has {} regions, coordinates are {}x{}",
            cfg.n_regions,
            coords.nrows(),
            coords.ncols()
        )));
    }
    let design = make_design(cfg)?;
    let regressors = hemodynamic_response(&design, cfg.tr_seconds)?;
    let t = design.n_volumes();
    let members = area_members(cfg, coords);

    let mut signal = Array2::<f64>::zeros((t, cfg.n_regions));
    for (a, regions) in members.iter().enumerate() {
        let preferred = a % 2;
        let m = cfg.magnitude(a);
        let response = &regressors.column(preferred) * m
            + &regressors.column(1 - preferred) * (m * (1.0 - cfg.selectivity));
        for &r in regions {
            let mut col = signal.column_mut(r);
            col += &response;
        }
    }
    let mut active: Vec<usize> = members.into_iter().flatten().collect();
    active.sort_unstable();
    active.dedup();

    let task = regressors.sum_axis(Axis(1));
    let mut noise = noise_mixture(cfg, t, coords, &task)?;
    let s_sd = pooled_sd(&signal, &active);
    let n_sd = pooled_sd(&noise, &active);
    if n_sd > 0.0 && s_sd > 0.0 {
        noise *= s_sd / (cfg.snr * n_sd);
    }
    let realized_snr = if n_sd > 0.0 {
        pooled_sd(&signal, &active) / pooled_sd(&noise, &active)
    } else {
        f64::INFINITY
    };
    let bold = signal + noise;

    let task_vols = design.task_volumes();
    let rest_vols = design.rest_volumes();
    let signals = bold.select(Axis(0), &task_vols);
    let labels = task_vols.iter().map(|&v| design.conditions[v].unwrap_or(0)).collect();
    let sessions = task_vols
        .iter()
        .map(|&v| design.blocks[v].map_or(0, |b| (b / 2) as u32 + 1))
        .collect();
    let rest = RestMatrix::new(bold.select(Axis(0), &rest_vols).t().to_owned())?;
    let dataset = Dataset::new(
        signals,
        labels,
        sessions,
        rest,
        coords.to_owned(),
        format!("sim-{}-run{:02}", cfg.seed, cfg.run),
    )?;
    Ok(Simulation {
        dataset,
        active_regions: active,
        realized_snr,
    })
}

/// Simulates one subject run and returns only its dataset.
pub fn simulate_subject(cfg: &SimConfig, coords: &ArrayView2<f64>) -> Result<Dataset> {
    simulate(cfg, coords).map(|s| s.dataset)
}

/// A group of subjects sharing an SNR range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortGroup {
    pub name: String,
    pub n_subjects: usize,
    pub snr_range: (f64, f64),
    /// Range of the per-subject [`SimConfig::selectivity`].
    pub selectivity_range: (f64, f64),
}

/// Randomized subjects: each draws its area centres (through its seed), its
/// per-area activation magnitudes, its SNR and its selectivity; runs vary
/// only the noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub base: SimConfig,
    pub groups: Vec<CohortGroup>,
    pub runs_per_subject: u32,
    pub magnitude_range: (f64, f64),
    pub seed: u64,
    /// Seed of the shared [`synthetic_atlas`].
    pub atlas_seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            base: SimConfig::default(),
            groups: vec![
                CohortGroup {
                    name: "easy".into(),
                    n_subjects: 40,
                    snr_range: (3.0, 4.8),
                    selectivity_range: (0.3, 0.45),
                },
                CohortGroup {
                    name: "difficult".into(),
                    n_subjects: 46,
                    snr_range: (1.4, 2.6),
                    selectivity_range: (0.12, 0.2),
                },
            ],
            runs_per_subject: 20,
            magnitude_range: (0.6, 1.4),
            seed: 2017,
            atlas_seed: 444,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSpec {
    pub id: String,
    /// Name of the cohort group the subject was drawn for.
    pub calibration_group: String,
    /// Configuration of run 0; other runs differ only in `run`.
    pub config: SimConfig,
}

impl SubjectSpec {
    pub fn run_config(&self, run: u32) -> SimConfig {
        SimConfig {
            run,
            ..self.config.clone()
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let (lo, hi) = self.magnitude_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid magnitude range ({lo}, {hi})")));
        }
        for g in &self.groups {
            let (a, b) = g.snr_range;
            if !(a > 0.0 && b >= a && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("invalid SNR range ({a}, {b}) for group {}", g.name)));
            }
            let (a, b) = g.selectivity_range;
            if !(a >= 0.0 && b >= a && b <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "invalid selectivity range ({a}, {b}) for group {}",
                    g.name
                )));
            }
        }
        if self.runs_per_subject == 0 {
            return Err(Error::InvalidParameter("runs_per_subject must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Region coordinates shared by every subject of the cohort.
    pub fn atlas(&self) -> Array2<f64> {
        synthetic_atlas(self.base.n_regions, self.atlas_seed)
    }

    pub fn n_subjects(&self) -> usize {
        self.groups.iter().map(|g| g.n_subjects).sum()
    }

    /// All subjects, in a deterministic order (group by group).
    pub fn subjects(&self) -> Result<Vec<SubjectSpec>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.n_subjects());
        for g in &self.groups {
            for _ in 0..g.n_subjects {
                let index = out.len();
                let snr = rng.gen_range(g.snr_range.0..=g.snr_range.1);
                let selectivity = rng.gen_range(g.selectivity_range.0..=g.selectivity_range.1);
                let (lo, hi) = self.magnitude_range;
                let magnitudes = (0..self.base.n_active_regions)
                    .map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo })
                    .collect();
                let seed = rng.gen::<u64>();
                out.push(SubjectSpec {
                    id: format!("sub-{:03}", index + 1),
                    calibration_group: g.name.clone(),
                    config: SimConfig {
                        snr,
                        selectivity,
                        activation_magnitudes: magnitudes,
                        seed,
                        run: 0,
                        ..self.base.clone()
                    },
                });
            }
        }
        Ok(out)
    }
}
