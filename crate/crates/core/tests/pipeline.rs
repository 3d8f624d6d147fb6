//! End-to-end pipeline integration: generate, write, ingest, encode, train,
//! serialize, reload, evaluate.

use pavenet::data::{
    generate_synthetic, indicator_by_name, ingest_csv, prepare_dataset, write_conditions,
    write_work_history, GeneratorConfig,
};
use pavenet::model::container::{
    load_from_file, save_to_file, ContainerHeader, FORMAT_VERSION,
};
use pavenet::model::{build_lstm, Head};
use pavenet::rng::Rng;
use pavenet::train::{evaluate, train, MetricKind, TrainingConfig};

#[test]
fn synthetic_to_csv_to_trained_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen_config = GeneratorConfig::default();
    let sections = generate_synthetic(60, &gen_config, &mut Rng::from_seed(5)).unwrap();

    let cond = dir.path().join("conditions.csv");
    let work = dir.path().join("work_history.csv");
    write_conditions(&cond, &sections).unwrap();
    write_work_history(&work, &sections).unwrap();
    let report = ingest_csv(&cond, &work).unwrap();
    assert_eq!(report.sections, sections, "ingest must reproduce all values");
    assert_eq!(report.warning_count(), 0);

    let indicator = indicator_by_name("TX_RIDE_SCORE").unwrap();
    let (dataset, norm) = prepare_dataset::<f64>(&report.sections, indicator, 0.2, 11).unwrap();
    assert_eq!(dataset.test().len(), 12);

    let mut model = build_lstm::<f64>(Head::Regression1, &mut Rng::from_seed(1)).unwrap();
    let config = TrainingConfig {
        epochs: 2,
        batch_size: 16,
        seed: 11,
        ..TrainingConfig::default()
    };
    let run = train(&mut model, &dataset, &norm, &config).unwrap();
    assert_eq!(run.history.len(), 2);

    // Serialize, reload, and check inference equivalence on the test split.
    let header = ContainerHeader {
        format_version: FORMAT_VERSION,
        spec: model.spec().clone(),
        indicator: indicator.name.to_string(),
        normalization: norm.clone(),
        split_seed: 11,
        test_fraction: 0.2,
    };
    let path = dir.path().join("model.pvn");
    save_to_file(&path, &model, &header).unwrap();
    let loaded = load_from_file::<f64>(&path).unwrap();
    assert_eq!(loaded.header, header);

    let test = dataset.test();
    let a = evaluate(&model, &test, &norm, 18, MetricKind::R2, false).unwrap();
    let b = evaluate(&loaded.model, &test, &norm, 18, MetricKind::R2, false).unwrap();
    assert_eq!(
        a.value.map(f64::to_bits),
        b.value.map(f64::to_bits),
        "reloaded model must evaluate identically"
    );

    // The recorded final-epoch test metric must match a fresh evaluation.
    let from_history = run.final_test_metric().unwrap();
    assert!((from_history - b.value.unwrap()).abs() < 1e-9);
}

#[test]
fn single_precision_mode_compiles_and_learns_shapes() {
    let gen_config = GeneratorConfig::default();
    let sections = generate_synthetic(30, &gen_config, &mut Rng::from_seed(9)).unwrap();
    let indicator = indicator_by_name("TX_IRI_AVERAGE_SCORE").unwrap();
    let (dataset, norm) = prepare_dataset::<f32>(&sections, indicator, 0.2, 9).unwrap();
    let mut model = build_lstm::<f32>(Head::Regression1, &mut Rng::from_seed(2)).unwrap();
    assert_eq!(model.count_params(), 18_651);
    let config = TrainingConfig {
        epochs: 1,
        batch_size: 8,
        seed: 3,
        ..TrainingConfig::default()
    };
    let run = train(&mut model, &dataset, &norm, &config).unwrap();
    assert_eq!(run.history.len(), 1);
    assert!(run.history[0].train_loss.is_finite());
}
