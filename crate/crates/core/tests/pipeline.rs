use splitfun::harness::{read_rows, run_experiment, EstimatorKind, ExperimentConfig};
use splitfun::models::Dataset;
use splitfun::{estimate_from_sample, make_split, Functional, FunctionalSpec, ModelSpec, RngStream, SplitMode, TruncRule};

#[test]
fn results_file_round_trips() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        reps = 300
        n_grid = [40, 80, 160]
        p_list = [1.0, 2.0, 3.5]
        [d_rule]
        kind = "power"
        alpha = 0.5
        [model]
        kind = "gaussian_location"
        theta = "unit"
        sigma = 0.5
        [functional]
        kind = "sin"
        u = "unit"
        [estimator]
        m = 4
        trunc = { kind = "auto" }
        "#,
    )
    .unwrap();
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.rows.len(), 3 * 3 * 3);
    let dir = tempfile::tempdir().unwrap();
    let path = out.write(dir.path(), "r.csv").unwrap();
    let back = read_rows(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
    assert_eq!(back, out.rows);
    // |sin| ≤ 1 is declared, so the truncated estimator never leaves [−1, 1].
    for r in out.rows.iter().filter(|r| r.estimator_kind == EstimatorKind::Truncated) {
        assert!((0.0..=1.0).contains(&r.clipped_fraction));
    }
}

#[test]
fn dataset_dump_reproduces_the_estimate() {
    let model = ModelSpec::gaussian_location(vec![0.2, -0.4, 1.0], vec![1.0, 2.0, 0.5]).unwrap();
    let data = model.sample(37, &mut RngStream::new(5, 0, 0)).unwrap();
    let mut buf = Vec::new();
    data.write_csv(model.tag(), &mut buf).unwrap();
    let (tag, back) = Dataset::read_csv(buf.as_slice()).unwrap();
    assert_eq!(tag, model.tag());
    let f = FunctionalSpec::new(Functional::SmoothSqrt).unwrap();
    let plan = make_split(37, 3, SplitMode::Efficient, 9, true).unwrap();
    let a = estimate_from_sample(&model, &f, &data, &plan, TruncRule::None, false).unwrap();
    let b = estimate_from_sample(&model, &f, &back, &plan, TruncRule::None, false).unwrap();
    assert_eq!(a, b);
}

#[test]
fn covariance_quadratic_is_unbiased_at_order_two() {
    // ⟨Σ², U⟩ is quadratic, so the order-2 estimator is exactly unbiased
    // while the plug-in is biased upwards.
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        reps = 4000
        n_grid = [30]
        master_seed = 12
        estimators = ["taylor", "plugin"]
        [d_rule]
        kind = "fixed"
        d = 3
        [model]
        kind = "covariance"
        spectrum = [1.0, 0.5, 0.25]
        xi_law = "uniform_sym"
        [functional]
        kind = "matrix_quadratic"
        [estimator]
        m = 2
        "#,
    )
    .unwrap();
    let out = run_experiment(&cfg).unwrap();
    let get = |k| out.rows.iter().find(|r| r.estimator_kind == k).unwrap();
    let (t, p) = (get(EstimatorKind::Taylor), get(EstimatorKind::Plugin));
    let se = |sd: f64| sd / (4000f64).sqrt();
    assert!(t.bias.abs() <= 4.0 * se(t.sd), "taylor bias {} se {}", t.bias, se(t.sd));
    assert!(p.bias > 4.0 * se(p.sd), "plug-in bias {} se {}", p.bias, se(p.sd));
    assert!(t.w2_normal.is_none());
}
