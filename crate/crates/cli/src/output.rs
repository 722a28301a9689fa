//! CSV rows and plain-text reports.

use std::io::Write;

use hdqkd_core::keyrate::{KeyRateResult, SweepRow};
use hdqkd_core::model::{Protocol, ProtocolConfig};

/// Column order of every CSV this tool writes.
pub const CSV_COLUMNS: [&str; 17] = [
    "protocol",
    "d",
    "m",
    "frame_length_s",
    "pair_rate_hz",
    "dark_rate_hz",
    "solar_rate_hz",
    "loss_db",
    "eta_d",
    "v",
    "qber",
    "s_ae_lb_bits",
    "h_ab_bits",
    "rate_per_coincidence",
    "rate_per_second",
    "upper_bound_only",
    "status",
];

fn num(x: f64) -> String {
    format!("{x}")
}

/// One CSV record: the full input parameter set, then the result fields.
/// A failed point keeps its inputs and reports `error` as status.
pub fn csv_record(cfg: &ProtocolConfig, result: Result<&KeyRateResult, &str>) -> Vec<String> {
    let mut rec = vec![
        cfg.protocol.tag().to_string(),
        cfg.d.to_string(),
        cfg.quadrature_m.to_string(),
        num(cfg.frame_length_s),
        num(cfg.pair_rate_hz),
        num(cfg.dark_rate_hz),
        num(cfg.solar_rate_hz),
        num(cfg.loss.db()),
        num(cfg.eta_d),
    ];
    match result {
        Ok(r) => rec.extend([
            num(r.v),
            num(r.qber),
            num(r.s_ae_lb),
            num(r.h_ab),
            num(r.rate_per_coincidence),
            num(r.rate_per_second),
            r.upper_bound_only.to_string(),
            r.status.tag().to_string(),
        ]),
        Err(_) => {
            rec.extend(std::iter::repeat_n(String::new(), 6));
            rec.push((cfg.protocol.measurement_protocol() == Protocol::P2).to_string());
            rec.push("error".to_string());
        }
    }
    rec
}

/// Writes the header and one record per sweep row, in row order.
pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(csv_record(&row.config, row.result.as_ref().map_err(|e| e.as_str())))?;
    }
    w.flush()?;
    Ok(())
}

/// `name = value` lines describing one key-rate result.
pub fn rate_report(cfg: &ProtocolConfig, r: &KeyRateResult) -> String {
    let lines = [
        ("protocol", cfg.protocol.tag().to_string()),
        ("d", r.d.to_string()),
        ("m", cfg.quadrature_m.to_string()),
        ("frame_length_s", num(r.frame_length_s)),
        ("v", num(r.v)),
        ("qber", num(r.qber)),
        ("p_tt11", num(r.p_tt11)),
        ("s_ae_lb_bits", num(r.s_ae_lb)),
        ("h_ab_bits", num(r.h_ab)),
        ("rate_unclipped", num(r.rate_unclipped)),
        ("rate_per_coincidence", num(r.rate_per_coincidence)),
        ("rate_per_second", num(r.rate_per_second)),
        ("duality_gap", num(r.duality_gap)),
        ("upper_bound_only", r.upper_bound_only.to_string()),
        ("status", r.status.tag().to_string()),
    ];
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
