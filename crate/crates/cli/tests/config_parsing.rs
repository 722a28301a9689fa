use hdqkd_cli::config::{RawConfig, SweepSpec};
use hdqkd_cli::output::{csv_record, CSV_COLUMNS};
use hdqkd_core::keyrate::SweepAxis;
use hdqkd_core::model::{Loss, Protocol, ProtocolConfig};

#[test]
fn empty_file_with_flags_gives_default_scenario() {
    let mut raw = RawConfig::parse("# nothing here\n\n").unwrap();
    raw.set("protocol", "p1");
    raw.set("d", "4");
    let sc = raw.resolve(true).unwrap();
    assert_eq!(sc.protocol_config(), ProtocolConfig::default_for(Protocol::P1, 4));
    assert_eq!(sc.quadrature_m, 10);
    assert_eq!(sc.sweep, None);
}

#[test]
fn scenario_keys_are_required_only_when_asked() {
    let raw = RawConfig::parse("").unwrap();
    let err = raw.resolve(true).unwrap_err();
    assert!(err.to_string().contains("protocol"), "{err}");
    assert!(raw.resolve(false).is_ok());
}

#[test]
fn loss_forms_are_exclusive() {
    let err = RawConfig::parse("protocol = p1\nd = 2\nloss_db = 20\nloss_prob = 0.9\n").unwrap().resolve(true).unwrap_err();
    assert_eq!(err.line, Some(4));
    assert!(err.to_string().starts_with("line 4:"), "{err}");
}

#[test]
fn flag_replaces_either_loss_form() {
    let mut raw = RawConfig::parse("protocol = p1\nd = 2\nloss_prob = 0.9\n").unwrap();
    raw.set("loss_db", "10");
    assert_eq!(raw.resolve(true).unwrap().loss, Loss::Db(10.0));
}

#[test]
fn default_loss_is_ninety_nine_point_seven_percent() {
    let sc = RawConfig::parse("protocol = p2\nd = 4\n").unwrap().resolve(true).unwrap();
    assert!((sc.loss.probability() - 0.997).abs() < 1e-3);
}

#[test]
fn malformed_files_report_lines() {
    let cases = [
        ("protocol = p1\nbogus = 1\n", 2),
        ("protocol = p1\nd = 2\nd = 4\n", 3),
        ("protocol = p1\nd\n", 2),
        ("protocol = p1\nd = 3\n", 2),
        ("protocol = p9\n", 1),
        ("protocol = p1\nd = 2\neta_d = 1.5\n", 3),
        ("protocol = p1\nd = 2\nsweep_start = 1\n", 3),
    ];
    for (text, line) in cases {
        let err = RawConfig::parse(text).and_then(|r| r.resolve(true)).unwrap_err();
        assert_eq!(err.line, Some(line), "{text:?}: {err}");
    }
}

#[test]
fn sweep_grids() {
    let sc = RawConfig::parse("protocol=p1\nd=2\nsweep_axis=solar\nsweep_start=1e2\nsweep_stop=1e6\nsweep_points=5\n")
        .unwrap()
        .resolve(true)
        .unwrap();
    let spec = sc.sweep.unwrap();
    assert!(spec.log_scale);
    let expected = [1e2, 1e3, 1e4, 1e5, 1e6];
    for (x, e) in spec.grid().iter().zip(expected) {
        assert!((x / e - 1.0).abs() < 1e-12);
    }
    let linear = SweepSpec { axis: SweepAxis::LossDb, start: 20.0, stop: 30.0, points: 3, log_scale: false };
    assert_eq!(linear.grid(), vec![20.0, 25.0, 30.0]);
}

#[test]
fn error_rows_keep_inputs() {
    let cfg = ProtocolConfig::default_for(Protocol::P2, 4);
    let rec = csv_record(&cfg, Err("boom"));
    assert_eq!(rec.len(), CSV_COLUMNS.len());
    assert_eq!(rec[0], "p2");
    assert_eq!(rec.last().unwrap(), "error");
    assert_eq!(rec[15], "true");
    assert!(rec[9..15].iter().all(String::is_empty));
}
