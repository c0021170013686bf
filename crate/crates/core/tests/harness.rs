use std::io::Write;

use dperm::harness::reference::reference_minimizer_with;
use dperm::harness::results::CSV_COLUMNS;
use dperm::harness::{
    build_objective, emit_results, load_dataset, read_results, reference_minimizer, run_experiment,
    spec_digest, synth_logistic, synth_quadratic, Algorithm, DataKind, DatasetSource,
    ExperimentSpec, LabelMode, Normalization, OutputFormat, Quartiles,
};
use dperm::linalg::norm2;
use dperm::optimizers::Calibration;
use dperm::{Error, ErmObjective, LossKind, Regularizer};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn temp_file(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn design(data: &dperm::Dataset) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = (data.len(), data.dim());
    let a = DMatrix::from_fn(n, p, |i, j| data.row(i)[j]);
    let b = DVector::from_iterator(n, data.labels().iter().copied());
    (a, b)
}

#[test]
fn libsvm_file_loads_with_normalization_and_labels() {
    let f = temp_file("# comment\n3 1:3 2:4\n1 3:2\n\n2 1:1\n", ".svm");
    let mut src = DatasetSource::new(DataKind::LibsvmFile {
        path: f.path().to_path_buf(),
        dim: None,
    });
    let d = load_dataset(&src).unwrap();
    assert_eq!((d.len(), d.dim()), (3, 3));
    assert_eq!(d.row(0), &[0.6, 0.8, 0.0]);
    assert_eq!(d.row(1), &[0.0, 0.0, 1.0]);
    // Multi-class labels map one-vs-rest on class 2 by default.
    assert_eq!(d.labels(), &[-1.0, -1.0, 1.0]);

    src.labels = LabelMode::OneVsRest { positive: 3.0 };
    src.normalization = Some(Normalization::None);
    let d = load_dataset(&src).unwrap();
    assert_eq!(d.labels(), &[1.0, -1.0, -1.0]);
    assert_eq!(d.row(0), &[3.0, 4.0, 0.0]);

    src.labels = LabelMode::Raw;
    assert_eq!(load_dataset(&src).unwrap().labels(), &[3.0, 1.0, 2.0]);

    src.subsample = Some(2);
    src.subsample_seed = 9;
    let d = load_dataset(&src).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(load_dataset(&src).unwrap().labels(), d.labels());

    let missing = DatasetSource::new(DataKind::LibsvmFile {
        path: "/nonexistent/file.svm".into(),
        dim: None,
    });
    assert!(matches!(load_dataset(&missing), Err(Error::Io { .. })));
}

#[test]
fn csv_file_loads_with_header_and_binary_labels() {
    let f = temp_file("x1,x2,y\n1,0,0\n0,2,1\n", ".csv");
    let kind: DataKind = f.path().to_str().unwrap().parse().unwrap();
    assert!(matches!(kind, DataKind::CsvFile { .. }));
    let d = load_dataset(&DatasetSource::new(kind)).unwrap();
    assert_eq!(d.labels(), &[-1.0, 1.0]);
    assert_eq!(d.row(1), &[0.0, 1.0]);
    let d = load_dataset(&DatasetSource {
        normalization: Some(Normalization::MinmaxThenRowL2),
        ..DatasetSource::new(DataKind::CsvFile {
            path: f.path().to_path_buf(),
            label_column: Some(0),
        })
    })
    .unwrap();
    // Column 0 is the label: x1 = (1, 0).
    assert_eq!(d.dim(), 2);
    assert_eq!(d.labels(), &[1.0, -1.0]);
}

#[test]
fn synth_specs_parse_and_round_trip() {
    let k: DataKind = "synth:logistic:n=50,p=3,seed=4".parse().unwrap();
    assert_eq!(k.to_string().parse::<DataKind>().unwrap(), k);
    let k: DataKind = "synth:quadratic:n=20,p=4,mu=0.1,L=1,seed=2".parse().unwrap();
    assert_eq!(k.to_string().parse::<DataKind>().unwrap(), k);
    assert!("synth:logistic:n=5".parse::<DataKind>().is_err());
    assert!("synth:cubic:n=5,p=2".parse::<DataKind>().is_err());
    assert!("synth:quadratic:n=20,p=4,L=1".parse::<DataKind>().is_err());
}

#[test]
fn synthetic_sets_are_reproducible() {
    let a = synth_logistic(500, 7, 3).unwrap();
    let b = synth_logistic(500, 7, 3).unwrap();
    let bits = |d: &dperm::Dataset| -> Vec<u64> {
        d.rows()
            .flat_map(|(r, y)| r.iter().chain(std::iter::once(&y)).map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    let c = synth_logistic(500, 7, 4).unwrap();
    assert_ne!(bits(&a), bits(&c));
    let q1 = synth_quadratic(40, 4, 0.1, 1.0, 1).unwrap();
    let q2 = synth_quadratic(40, 4, 0.1, 1.0, 1).unwrap();
    assert_eq!(bits(&q1), bits(&q2));
}

#[test]
fn synth_logistic_labels_are_balanced() {
    // With ‖w*‖ = 1 and symmetric features, P(y = 1) = ½.
    let n = 20_000;
    let d = synth_logistic(n, 10, 12).unwrap();
    let positives = d.labels().iter().filter(|&&y| y == 1.0).count() as f64;
    let sd = (n as f64 * 0.25).sqrt();
    assert!((positives - n as f64 / 2.0).abs() < 4.0 * sd);
    assert!(d.rows().all(|(r, _)| (norm2(r) - 1.0).abs() < 1e-12));
}

#[test]
fn synth_quadratic_spectrum_extremes() {
    for (n, p, mu, l) in [(1000, 10, 0.1, 1.0), (37, 5, 1e-3, 2.0)] {
        let d = synth_quadratic(n, p, mu, l, 6).unwrap();
        let (a, _) = design(&d);
        let h = a.transpose() * &a / n as f64;
        let eig = SymmetricEigen::new(h).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(0.0, f64::max);
        assert!((lo - mu).abs() <= 1e-10 * l, "{lo} vs {mu}");
        assert!((hi - l).abs() <= 1e-10 * l, "{hi} vs {l}");
    }
    assert!(synth_quadratic(3, 5, 0.1, 1.0, 0).is_err());
    assert!(synth_quadratic(10, 1, 0.1, 1.0, 0).is_err());
    assert!(synth_quadratic(10, 2, 2.0, 1.0, 0).is_err());
}

#[test]
fn ridge_reference_matches_linear_solve() {
    let d = synth_quadratic(200, 6, 0.05, 1.0, 3).unwrap();
    let lambda = 0.01;
    let obj = ErmObjective::new(d.clone(), LossKind::Squared, Regularizer::SquaredL2 { lambda })
        .unwrap();
    let (a, b) = design(&d);
    let n = d.len() as f64;
    let h = a.transpose() * &a / n + DMatrix::identity(6, 6) * lambda;
    let rhs = a.transpose() * &b / n;
    let x = h.cholesky().unwrap().solve(&rhs);
    let mut residuals = Vec::new();
    let r = reference_minimizer_with(&obj, 1e-12, 1_000_000, |res| residuals.push(res)).unwrap();
    assert!(r.converged);
    for (u, v) in r.point.iter().zip(x.iter()) {
        assert!((u - v).abs() < 1e-10, "{u} vs {v}");
    }
    let f_star = obj.value(x.as_slice());
    assert!((r.value - f_star).abs() < 1e-12);
    // Gradient descent with step 1/L on a convex quadratic never increases
    // the gradient norm.
    assert!(residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(reference_minimizer(&obj, 0.0).is_err());
}

fn small_spec() -> ExperimentSpec {
    ExperimentSpec::from_toml(
        r#"
algorithm = "dp_svrg"
dataset = "synth:logistic:n=300,p=5,seed=2"
loss = "logistic"
regularizer = "squared_l2"
lambda = 0.05
epsilon = [0.5, 1.0, 2.0]
delta = 1e-5
calibration = "advanced"
T = 4
repetitions = 3
base_seed = 11
"#,
    )
    .unwrap()
}

#[test]
fn spec_parsing_and_validation() {
    let spec = small_spec();
    assert_eq!(spec.algorithm, Algorithm::DpSvrg);
    assert_eq!(spec.t, Some(4));
    let back = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
    assert_eq!(back, spec);
    assert_eq!(spec_digest(&spec).unwrap(), spec_digest(&back).unwrap());
    assert_eq!(spec_digest(&spec).unwrap().len(), 64);

    assert!(ExperimentSpec::from_toml("algorithm = \"dp_svrg\"\nbogus = 1").is_err());
    assert!(ExperimentSpec::from_toml("algorithm = \"dp_sgd\"").is_err());
    let mut bad = spec.clone();
    bad.epsilon = vec![];
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    let mut bad = spec.clone();
    bad.delta = 2.0;
    assert!(bad.validate().is_err());
    let mut bad = spec.clone();
    bad.algorithm = Algorithm::DpGd;
    bad.regularizer = dperm::harness::RegularizerKind::L1;
    assert!(bad.validate().is_err());
    let mut bad = spec.clone();
    bad.raw_labels = true;
    bad.positive_class = Some(2.0);
    assert!(bad.validate().is_err());

    let mut s = spec.clone();
    s.out = "runs/exp.json".into();
    let (j, c) = s.output_paths();
    assert_eq!(j, std::path::PathBuf::from("runs/exp.json"));
    assert_eq!(c, std::path::PathBuf::from("runs/exp.csv"));
}

#[test]
fn experiment_is_deterministic_and_aggregates_three_epsilons() {
    let spec = small_spec();
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert!(a.complete && a.error.is_none());
    assert_eq!(a.runs.len(), 9);
    assert_eq!(a.aggregates.len(), 3);
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        assert_eq!(ra.final_excess_risk, rb.final_excess_risk);
        assert_eq!(ra.seed, rb.seed);
    }
    let seeds: Vec<u64> = a.runs.iter().take(3).map(|r| r.seed).collect();
    assert_eq!(seeds, vec![11, 12, 13]);
    for agg in &a.aggregates {
        let vals: Vec<f64> = a
            .runs
            .iter()
            .filter(|r| r.epsilon == agg.epsilon)
            .map(|r| r.final_excess_risk)
            .collect();
        assert_eq!(agg.repetitions, 3);
        assert_eq!(Quartiles::of(&vals).unwrap(), agg.excess_risk);
    }
    let tol = spec.reference_tol;
    let xstar = norm2(&a.reference.point);
    for run in &a.runs {
        assert_eq!(run.sample_gradients, 4 * (300 + 2 * run.schedule.inner_steps.unwrap() as u64));
        let epochs: Vec<usize> = run.records.iter().map(|r| r.epoch).collect();
        assert!(epochs.windows(2).all(|w| w[1] > w[0]));
        for r in &run.records {
            assert!(r.excess_risk.unwrap() >= -tol * (1.0 + xstar));
        }
    }

    let mut off = spec.clone();
    off.calibration = Calibration::Off;
    let r = run_experiment(&off).unwrap();
    // Without noise only the index stream differs between seeds, and every
    // run still converges.
    assert!(r.runs.iter().all(|run| run.noise.sigma == 0.0));
    assert!(r.runs.iter().all(|run| run.final_excess_risk < 1e-6));
}

#[test]
fn median_risk_decreases_with_epsilon() {
    let mut spec = small_spec();
    spec.repetitions = 30;
    spec.epsilon = vec![0.5, 2.0, 8.0];
    let r = run_experiment(&spec).unwrap();
    let med: Vec<f64> = r.aggregates.iter().map(|a| a.excess_risk.median).collect();
    assert!(med.windows(2).all(|w| w[1] < w[0]), "{med:?}");
}

#[test]
fn results_round_trip_and_csv_layout() {
    let spec = small_spec();
    let record = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("nested/out.json");
    let csv_path = dir.path().join("nested/out.csv");
    emit_results(&record, OutputFormat::Json, &json).unwrap();
    emit_results(&record, OutputFormat::Csv, &csv_path).unwrap();
    let back = read_results(&json).unwrap();
    assert_eq!(back.schema_version, 1);
    assert_eq!(back.spec, record.spec);
    assert_eq!(back.runs.len(), record.runs.len());
    assert_eq!(back.aggregates, record.aggregates);

    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_COLUMNS);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let expected: usize = record.runs.iter().map(|r| r.records.len()).sum();
    assert_eq!(rows.len(), expected);
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!(&rows[0][0], "dp_svrg");
    assert_eq!(&rows[0][4], "0");
}

#[test]
fn full_gradient_quadratic_uses_declared_constants() {
    let spec = ExperimentSpec::from_toml(
        r#"
algorithm = "dp_gd"
dataset = "synth:quadratic:n=100,p=5,mu=0.2,L=1,seed=1"
loss = "squared"
regularizer = "none"
"#,
    )
    .unwrap();
    let obj = build_objective(&spec).unwrap();
    assert_eq!(obj.smoothness(), 1.0);
    assert_eq!(obj.strong_convexity(), 0.2);
    let r = run_experiment(&spec).unwrap();
    assert!(r.complete);
    assert!(r.runs[0].schedule.epochs >= 1);
}
