use std::fs;

use pilotwave::archive::{encode_record, load_ensemble, save_ensemble, METADATA_FILE};
use pilotwave::config::default_config;
use pilotwave::ensemble::{calibrate, run_ensemble, run_single};
use pilotwave::stats::{pdf_series, uniform_grid};
use pilotwave::Error;

#[test]
fn single_run_ensemble_equals_run_single() {
    let mut cfg = default_config().with_duration(12.0);
    cfg.seed = 9;
    let cal = calibrate(&cfg).unwrap();
    let single = run_single(&cfg, &cal).unwrap();
    let ens = run_ensemble(&cfg, 1, 9, 2).unwrap();
    assert_eq!(ens.records, vec![single.record]);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = default_config().with_duration(15.0);
    let a = run_ensemble(&cfg, 12, 40, 1).unwrap();
    let b = run_ensemble(&cfg, 12, 40, 3).unwrap();
    let bytes = |e: &pilotwave::EnsembleResult| e.records.iter().flat_map(encode_record).collect::<Vec<u8>>();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(a, b);
}

#[test]
fn archive_round_trip_and_tamper_detection() {
    let cfg = default_config().with_duration(10.0);
    let ens = run_ensemble(&cfg, 4, 1, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_ensemble(&ens, dir.path()).unwrap();
    let back = load_ensemble(dir.path()).unwrap();
    assert_eq!(back, ens);

    // Saving again writes identical bytes.
    let again = tempfile::tempdir().unwrap();
    save_ensemble(&back, again.path()).unwrap();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(dir.path().join(&name)).unwrap(),
            fs::read(again.path().join(&name)).unwrap()
        );
    }

    let run = dir.path().join("run-00000000000000000002.bin");
    let mut bytes = fs::read(&run).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&run, &bytes).unwrap();
    assert!(matches!(load_ensemble(dir.path()), Err(Error::Checksum(_))));

    let meta = again.path().join(METADATA_FILE);
    let text = fs::read_to_string(&meta).unwrap();
    fs::write(&meta, text.replace("alpha = 0.045", "alpha = 0.05")).unwrap();
    assert!(matches!(load_ensemble(again.path()), Err(Error::DigestMismatch { .. })));
    fs::write(
        &meta,
        text.replace("format_version = \"1.0\"", "format_version = \"2.0\""),
    )
    .unwrap();
    assert!(matches!(load_ensemble(again.path()), Err(Error::FormatVersion { .. })));
}

#[test]
fn initial_density_is_the_kernel() {
    let cfg = default_config().with_duration(10.0);
    let ens = run_ensemble(&cfg, 6, 1, 2).unwrap();
    let xs = uniform_grid(-10.0, 10.0, 401);
    let s = pdf_series(&ens, 1.0, &xs, &[0.0]).unwrap();
    let (mean, var) = s.moments(0).unwrap();
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-6);
}

#[test]
fn invalid_ensemble_arguments() {
    let cfg = default_config().with_duration(10.0);
    assert!(run_ensemble(&cfg, 0, 1, 1).is_err());
    assert!(run_ensemble(&cfg, 1, 1, 0).is_err());
    assert!(run_ensemble(&cfg, 2, u64::MAX, 1).is_err());
    let mut bad = cfg.clone();
    bad.grid.dt = 1.0;
    assert!(matches!(run_ensemble(&bad, 1, 1, 1), Err(Error::InvalidConfig(_))));
}
