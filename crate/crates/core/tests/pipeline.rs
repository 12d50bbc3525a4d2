use ndarray::{Array2, Axis};
use neurogsp::builders::GraphType;
use neurogsp::classifiers::ClassifierSpec;
use neurogsp::dataset::Dataset;
use neurogsp::graph::Band;
use neurogsp::pipeline::{
    benchmark, default_params, reference_accuracy, run_pipeline, BenchmarkOptions, DatasetCohort, Method,
    SubjectEvaluator,
};
use neurogsp::reducers::{FrequencySelection, ReductionSpec};
use neurogsp::simulator::{simulate_subject, synthetic_atlas, SimConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 60;

fn subject(seed: u64, snr: f64, selectivity: f64) -> Dataset {
    let cfg = SimConfig {
        n_regions: N,
        snr,
        selectivity,
        seed,
        ..SimConfig::default()
    };
    simulate_subject(&cfg, &synthetic_atlas(N, 11).view()).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn methods() -> Vec<Method> {
    vec![
        Method::reference(),
        Method::new(None, ReductionSpec::PCA { k: 10 }),
        Method::new(None, ReductionSpec::ANOVA { k: 10 }),
        Method::new(Some(GraphType::Geometric), ReductionSpec::GS { band: Band::HF, k: 10 }),
        Method::new(
            Some(GraphType::Correlation),
            ReductionSpec::GFS {
                selection: FrequencySelection::ANOVA,
                k: 10,
            },
        ),
    ]
}

#[test]
fn test_rows_never_influence_the_fitted_pipeline() {
    let ds = subject(3, 2.0, 0.3);
    let params = default_params(&ds).unwrap();
    let mut all = methods();
    all.push(Method::new(None, ReductionSpec::ICA { k: 8 }));
    let n_folds = SubjectEvaluator::new(&ds, params, 5).unwrap().folds().folds.len();
    for fold in 0..n_folds {
        let mut ev = SubjectEvaluator::new(&ds, params, 5).unwrap();
        let test_sessions = ev.folds().folds[fold].test_sessions.clone();
        let mut corrupted = ds.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(fold as u64);
        for i in 0..ds.n_observations() {
            if test_sessions.contains(&ds.sessions[i]) {
                corrupted.labels[i] = 1 - corrupted.labels[i];
                corrupted.signals.row_mut(i).mapv_inplace(|_| rand::Rng::gen_range(&mut rng, -1e3..1e3));
            }
        }
        let mut ev_corrupted = SubjectEvaluator::new(&corrupted, params, 5).unwrap();
        for m in &all {
            for clf in [ClassifierSpec::svm(), ClassifierSpec::knn(5), ClassifierSpec::logreg_l1(0.01)] {
                let clean = ev.fit_fold(m, &clf, fold).unwrap();
                let dirty = ev_corrupted.fit_fold(m, &clf, fold).unwrap();
                assert_eq!(clean, dirty, "fold {fold}, {}", m.label());
            }
        }
    }
}

#[test]
fn fold_index_is_checked() {
    let ds = subject(3, 2.0, 0.3);
    let mut ev = SubjectEvaluator::new(&ds, default_params(&ds).unwrap(), 0).unwrap();
    let n = ev.folds().folds.len();
    assert!(ev.fit_fold(&Method::reference(), &ClassifierSpec::svm(), n).is_err());
}

#[test]
fn swapping_condition_labels_leaves_accuracies_unchanged() {
    let ds = subject(4, 2.4, 0.3);
    let swapped = ds.with_swapped_labels();
    for m in methods() {
        for clf in [ClassifierSpec::svm(), ClassifierSpec::knn(7), ClassifierSpec::logreg_l1(0.01)] {
            let a = run_pipeline(&ds, m.graph, m.reduction, &clf).unwrap();
            let b = run_pipeline(&swapped, m.graph, m.reduction, &clf).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{} {:?}: {a:?} vs {b:?}", m.label(), clf.kind);
            }
        }
    }
}

fn duplicated(ds: &Dataset) -> Dataset {
    let rows: Vec<usize> = (0..ds.n_observations()).flat_map(|i| [i, i]).collect();
    Dataset::new(
        ds.signals.select(Axis(0), &rows),
        rows.iter().map(|&i| ds.labels[i]).collect(),
        rows.iter().map(|&i| ds.sessions[i]).collect(),
        ds.rest.clone(),
        ds.coords.clone(),
        ds.subject_id.clone(),
    )
    .unwrap()
}

#[test]
fn duplicating_every_observation_leaves_accuracies_unchanged() {
    let ds = subject(5, 2.0, 0.25);
    let twice = duplicated(&ds);
    let chosen = [
        Method::reference(),
        Method::new(None, ReductionSpec::PCA { k: 10 }),
        Method::new(None, ReductionSpec::ANOVA { k: 10 }),
        Method::new(Some(GraphType::Geometric), ReductionSpec::GS { band: Band::HF, k: 10 }),
    ];
    for m in chosen {
        for clf in [ClassifierSpec::svm(), ClassifierSpec::logreg_l1(0.01)] {
            let a = run_pipeline(&ds, m.graph, m.reduction, &clf).unwrap();
            let b = run_pipeline(&twice, m.graph, m.reduction, &clf).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-6, "{} {:?}: {a:?} vs {b:?}", m.label(), clf.kind);
            }
        }
    }
}

#[test]
fn shuffled_labels_decode_at_chance() {
    let mut accs = Vec::new();
    for seed in 0..6 {
        let ds = subject(100 + seed, 4.0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shuffled = loop {
            let mut labels = ds.labels.clone();
            labels.shuffle(&mut rng);
            if let Ok(d) = Dataset::new(
                ds.signals.clone(),
                labels,
                ds.sessions.clone(),
                ds.rest.clone(),
                ds.coords.clone(),
                "shuffled",
            ) {
                break d;
            }
        };
        accs.push(reference_accuracy(&shuffled).unwrap());
    }
    let m = mean(&accs);
    assert!((0.35..=0.65).contains(&m), "mean accuracy {m} over shuffled labels");
}

#[test]
fn easy_subject_decodes_well_on_the_full_atlas() {
    let cfg = SimConfig {
        snr: 4.8,
        selectivity: 0.45,
        seed: 9,
        ..SimConfig::default()
    };
    let ds = simulate_subject(&cfg, &synthetic_atlas(cfg.n_regions, 444).view()).unwrap();
    assert_eq!(ds.n_regions(), 444);
    let acc = reference_accuracy(&ds).unwrap();
    assert!(acc > 0.80, "reference accuracy {acc}");
}

#[test]
fn sampling_every_vertex_matches_no_reduction() {
    let ds = subject(6, 2.4, 0.3);
    let none = run_pipeline(&ds, None, ReductionSpec::NONE, &ClassifierSpec::svm()).unwrap();
    for band in [Band::LF, Band::HF] {
        let gs = run_pipeline(
            &ds,
            Some(GraphType::Semilocal),
            ReductionSpec::GS { band, k: N },
            &ClassifierSpec::svm(),
        )
        .unwrap();
        for (x, y) in none.iter().zip(&gs) {
            assert!((x - y).abs() < 1e-9, "{none:?} vs {gs:?}");
        }
    }
}

#[test]
fn single_run_report_matches_direct_evaluation() {
    let ds = subject(7, 2.4, 0.3);
    let method = Method::new(None, ReductionSpec::PCA { k: 12 });
    let opts = BenchmarkOptions {
        jobs: 1,
        ..BenchmarkOptions::default()
    };
    let report = benchmark(&DatasetCohort::new(vec![ds.clone()]), &[method], &opts).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.subjects.len(), 1);
    let s = &report.subjects[0];
    let direct = run_pipeline(&ds, None, method.reduction, &ClassifierSpec::svm()).unwrap();
    assert!((s.mean[0] - mean(&direct)).abs() < 1e-12);
    assert!((s.reference - reference_accuracy(&ds).unwrap()).abs() < 1e-12);
    assert_eq!(s.runs, 1);
}

#[test]
fn reports_are_deterministic() {
    let datasets: Vec<Dataset> = (0..3)
        .flat_map(|s| {
            (0..2).map(move |r| {
                let mut d = subject(20 + s, 2.0 + s as f64, 0.3);
                d.signals += &Array2::from_elem(d.signals.dim(), r as f64 * 0.01);
                d.subject_id = format!("s{s}");
                d
            })
        })
        .collect();
    let mut all = methods();
    all.push(Method::new(None, ReductionSpec::ICA { k: 6 }));
    let opts = BenchmarkOptions {
        jobs: 1,
        seed: 42,
        ..BenchmarkOptions::default()
    };
    let cohort = DatasetCohort::new(datasets);
    let a = benchmark(&cohort, &all, &opts).unwrap();
    let b = benchmark(&cohort, &all, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.subjects.len(), 3);
    assert!(a.subjects.iter().all(|s| s.runs == 2));
}
