mod common;

use common::sex_split;
use glycemlp::bench::{emit_speedup_table, parse_speedup_table, run_bench, BenchSpec, Workload};
use glycemlp::dataset::{
    normalize_apply, normalize_fit, parse_csv, split_by_sex, synth_dataset, train_test_split, write_csv,
    Signal,
};
use glycemlp::{BackendKind, Dataset, Network, NetworkConfig, ParticipantRecord, SubsetTag};

fn csv_bytes(records: &[ParticipantRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(&mut out, records).unwrap();
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn synthetic_table_round_trips_through_csv() {
    let records = synth_dataset(120, 7, Signal::PlantedLinear).unwrap();
    let bytes = csv_bytes(&records);
    let parsed = parse_csv(bytes.as_slice()).unwrap();
    assert_eq!(parsed.len(), 120);
    for (a, b) in records.iter().zip(&parsed) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.sex, b.sex);
        assert_eq!(a.label().unwrap(), b.label().unwrap());
        assert!(close(a.hba1c_pct, b.hba1c_pct));
        for (x, y) in a.feature_vector().iter().zip(b.feature_vector().iter()) {
            assert!(close(*x, *y), "{x} vs {y}");
        }
    }
    assert_eq!(csv_bytes(&parsed), bytes);
}

#[test]
fn sex_partition_and_split_sizes() {
    let records = synth_dataset(120, 7, Signal::PlantedLinear).unwrap();
    let (male, female) = split_by_sex(&records);
    assert_eq!((male.len(), female.len()), (61, 59));

    let all = Dataset::from_records(&records, SubsetTag::All).unwrap();
    let split = train_test_split(&all, 0.75, 7).unwrap();
    assert_eq!((split.train.rows(), split.test.rows()), (90, 30));

    let male = sex_split(7, Signal::PlantedLinear, SubsetTag::Male);
    assert_eq!((male.train.rows(), male.test.rows()), (46, 15));
    let female = sex_split(7, Signal::Random, SubsetTag::Female);
    assert_eq!((female.train.rows(), female.test.rows()), (44, 15));
    assert_eq!(female.train.subset(), SubsetTag::Female);
}

#[test]
fn normalized_training_partition_lies_in_unit_interval() {
    for seed in 0..5 {
        let split = sex_split(seed, Signal::PlantedLinear, SubsetTag::Male);
        assert!(split.train.features().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(split.test.features().iter().all(|v| (-0.5..=1.5).contains(v)));
        assert_eq!(split.train.columns(), 30);
    }
}

#[test]
fn normalization_matches_hand_arithmetic() {
    let labels = vec![glycemlp::Label::Good; 3];
    let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let train = Dataset::new(vec![2.0, 3.0, 4.0, 3.0, 6.0, 3.0], labels, ids, 2, SubsetTag::Synthetic).unwrap();
    let stats = normalize_fit(&train).unwrap();
    let n = normalize_apply(&train, &stats).unwrap();
    assert_eq!(n.features(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
    let test = Dataset::new(
        vec![8.0, 3.0],
        vec![glycemlp::Label::Poor],
        vec!["d".into()],
        2,
        SubsetTag::Synthetic,
    )
    .unwrap();
    assert_eq!(normalize_apply(&test, &stats).unwrap().features(), &[1.5, 0.0]);
}

#[test]
fn split_partitions_are_disjoint_and_complete() {
    let split = sex_split(3, Signal::Random, SubsetTag::All);
    let mut ids: Vec<&String> = split.train.row_ids().iter().chain(split.test.row_ids()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 120);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let net = Network::init(NetworkConfig::new(30).with_seed(12)).unwrap();
    net.save(&path).unwrap();
    let back = Network::load(&path).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.to_checkpoint_json().unwrap(), net.to_checkpoint_json().unwrap());
}

#[test]
fn bench_on_male_sized_split_yields_two_cells_one_row() {
    let mut spec = BenchSpec::new(
        Workload::Synthetic { rows: 61, columns: 33, seed: 1 },
        NetworkConfig::new(33).with_seed(1),
        vec![10_000],
        1,
    );
    spec.repetitions = 1;
    let report = run_bench(&spec).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert_eq!(report.cells[0].backend, BackendKind::Sequential);
    assert_eq!(report.speedups.len(), 1);
    let table = emit_speedup_table(&report);
    assert_eq!(parse_speedup_table(&table).unwrap().len(), 1);
    assert_eq!(report.environment.rows, 61);
    assert_eq!(report.environment.columns, 33);
}
