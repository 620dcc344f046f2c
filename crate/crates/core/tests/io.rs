mod common;

use std::fs;

use bsmrmr::diagnostics::{export_traces, read_traces, TraceSeries};
use bsmrmr::io::{load_dataset, read_chain, schema_path_for, write_chain, write_dataset};
use bsmrmr::{run_chain, Error, FixedParameters, Hyperparameters, RngStream};

const SCHEMA: &str = "l = 1\nm = 1\nk = 1\ngroup_sizes = [1, 1]\n";

#[test]
fn three_row_dataset_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(
        &csv,
        "x1,x2,u1,z1,w1\n0.5,-1,2.25,3,1\n1e-3, 2 ,0,0,0\n-7,0.125,-1.5,12,1\n",
    )
    .unwrap();
    fs::write(schema_path_for(&csv), SCHEMA).unwrap();
    let data = load_dataset(&csv, &schema_path_for(&csv)).unwrap();
    assert_eq!(data.n(), 3);
    assert_eq!(data.x[(1, 0)], 1e-3);
    assert_eq!(data.x[(1, 1)], 2.0);
    assert_eq!(data.z[(2, 0)], 12);
    assert_eq!(data.w[(1, 0)], 0);
    assert_eq!(data.response(0, 0), 2.25);

    let again = dir.path().join("e.csv");
    write_dataset(&data, &again, &schema_path_for(&again)).unwrap();
    assert_eq!(load_dataset(&again, &schema_path_for(&again)).unwrap(), data);
}

#[test]
fn bad_binary_cell_reports_its_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(&csv, "x1,x2,u1,z1,w1\n0,0,0,0,1\n0,0,0,0,2\n").unwrap();
    fs::write(schema_path_for(&csv), SCHEMA).unwrap();
    let err = load_dataset(&csv, &schema_path_for(&csv)).unwrap_err();
    match &err {
        Error::Cell { row, col, .. } => assert_eq!((*row, *col), (1, 4)),
        other => panic!("{other}"),
    }
    let text = err.to_string();
    assert!(text.contains("row 2") && text.contains("column 5"), "{text}");
}

#[test]
fn negative_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(&csv, "x1,x2,u1,z1,w1\n0,0,0,-1,1\n").unwrap();
    fs::write(schema_path_for(&csv), SCHEMA).unwrap();
    assert!(matches!(
        load_dataset(&csv, &schema_path_for(&csv)),
        Err(Error::Cell { row: 0, col: 3, .. })
    ));
}

#[test]
fn schema_that_disagrees_with_the_columns_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(&csv, "x1,x2,u1,z1,w1\n0,0,0,0,1\n").unwrap();
    let schema = dir.path().join("s.toml");
    fs::write(&schema, "l = 1\nm = 1\nk = 1\ngroup_sizes = [2, 1]\n").unwrap();
    let err = load_dataset(&csv, &schema).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");

    fs::write(&schema, "l = 1\nm = 1\nk = 1\ngroups = [2]\n").unwrap();
    assert!(matches!(load_dataset(&csv, &schema), Err(Error::Format { .. })));
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("absent.csv");
    fs::write(schema_path_for(&csv), SCHEMA).unwrap();
    match load_dataset(&csv, &schema_path_for(&csv)) {
        Err(Error::Io { path, .. }) => assert_eq!(path, csv),
        other => panic!("{other:?}"),
    }
}

fn small_chain() -> bsmrmr::PosteriorChain {
    let data = common::dataset(20, &[1, 2], (1, 1, 1), 3);
    let h = Hyperparameters {
        n_iter: 60,
        n_burnin: 20,
        ..Hyperparameters::defaults_for(3)
    };
    run_chain(&data, &h, &FixedParameters::default(), RngStream::new(4, 2)).unwrap()
}

#[test]
fn chain_file_round_trips_and_detects_corruption() {
    let chain = small_chain();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.bin");
    write_chain(&path, &chain).unwrap();
    let back = read_chain(&path).unwrap();
    assert_eq!(back.digest(), chain.digest());
    assert_eq!(back.draws, chain.draws);
    assert_eq!(back.acceptance, chain.acceptance);

    let mut bytes = fs::read(&path).unwrap();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x40;
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_chain(&path), Err(Error::Format { .. })));

    fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(read_chain(&path), Err(Error::Format { .. })));
}

#[test]
fn traces_round_trip() {
    let chain = small_chain();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let ids: Vec<String> = ["B[1,1]", "Omega[1,2]", "sigma_tau2", "pi3"].map(String::from).to_vec();
    export_traces(&chain, &ids, &path).unwrap();
    let (iters, series) = read_traces(&path).unwrap();
    assert_eq!(iters, chain.draws.iter().map(|d| d.iter).collect::<Vec<_>>());
    for (id, s) in ids.iter().zip(&series) {
        assert_eq!(s, &TraceSeries::from_chain(&chain, id).unwrap());
    }

    export_traces(&chain, &[], &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "iter\n");
    let (iters, series) = read_traces(&path).unwrap();
    assert!(iters.is_empty() && series.is_empty());

    assert!(export_traces(&chain, &["B[9,9]".to_string()], &path).is_err());
}
