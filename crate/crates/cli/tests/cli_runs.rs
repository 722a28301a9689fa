use std::io::Write;
use std::process::{Command, Output};

fn hdqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdqkd")).args(args).output().expect("binary runs")
}

fn config_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn quadrature_prints_two_node_rule() {
    let o = hdqkd(&["quadrature", "--m", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (t, w) = l.split_once(',').unwrap();
            (t.parse().unwrap(), w.parse().unwrap())
        })
        .collect();
    assert_eq!(text.lines().next(), Some("node,weight"));
    assert_eq!(rows.len(), 2);
    assert!((rows[0].0 - 1.0 / 3.0).abs() < 1e-15 && (rows[0].1 - 0.75).abs() < 1e-15);
    assert!((rows[1].0 - 1.0).abs() < 1e-15 && (rows[1].1 - 0.25).abs() < 1e-15);
}

#[test]
fn validate_passes_on_defaults() {
    let o = hdqkd(&["validate"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 30);
    assert!(!text.contains("FAIL"));
}

#[test]
fn validate_fails_with_too_few_frames() {
    let cfg = config_file("mc_frames = 10\n");
    let o = hdqkd(&["validate", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn rate_reports_key_fields() {
    let o = hdqkd(&["rate", "--protocol", "p1", "--d", "2", "--m", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in ["s_ae_lb_bits", "h_ab_bits", "rate_per_second", "status = optimal"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    assert_eq!(hdqkd(&["rate", "--d", "2"]).status.code(), Some(1));
    let cfg = config_file("protocol = p1\nd = 2\nloss_db = 20\nloss_prob = 0.5\n");
    let o = hdqkd(&["rate", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    assert_eq!(hdqkd(&["rate", "--protocol", "p1", "--d", "3"]).status.code(), Some(1));
    assert_eq!(hdqkd(&["sweep", "--protocol", "p1", "--d", "2"]).status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_point_reproducibly() {
    let cfg = config_file(
        "protocol = p1\nd = 2\nquadrature_m = 3\nsweep_axis = solar_rate\nsweep_start = 1e3\nsweep_stop = 1e7\nsweep_points = 5\n",
    );
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let path = dir.path().join(format!("run{k}.csv"));
        let o = hdqkd(&["sweep", "--config", cfg.path().to_str().unwrap(), "--jobs", jobs, "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("protocol,d,m,"));
    assert!(lines[1..].iter().all(|l| l.starts_with("p1,2,3,")));
}

#[test]
fn failed_points_exit_with_two_and_keep_rows() {
    // Without pairs or dark counts nothing ever clicks.
    let cfg = config_file(
        "protocol = p1\nd = 2\npair_rate_hz = 0\ndark_rate_hz = 0\nsweep_axis = loss_db\nsweep_start = 10\nsweep_stop = 20\nsweep_points = 2\n",
    );
    let o = hdqkd(&["sweep", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",error")));
}

#[test]
fn export_writes_json_program() {
    let o = hdqkd(&["export-sdp", "--protocol", "p1", "--d", "2", "--m", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.trim_start().starts_with('{') && text.trim_end().ends_with('}'));
    assert!(text.contains("constraints"));
}
