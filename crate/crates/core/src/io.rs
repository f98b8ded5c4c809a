//! CSV and JSON writers for run artefacts.
//!
//! Floats are written with 17 significant digits so they round-trip
//! exactly; infinities are written as `inf` / `-inf`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bank::FrequencyResponse;
use crate::error::Result;
use crate::perturb::SweepResult;
use crate::trainer::TrainLog;
use crate::transform::Spectrogram;

pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

/// One row per filter, one column per frame; no header.
pub fn write_spectrogram_csv(path: impl AsRef<Path>, spec: &Spectrogram) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    for row in spec.values.rows() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `probe_freq, filter_0 .. filter_{F-1}, max_gain`.
pub fn write_frequency_response_csv(
    path: impl AsRef<Path>,
    resp: &FrequencyResponse,
) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let f = resp.gains.nrows();
    let mut header = vec!["probe_freq".to_string()];
    header.extend((0..f).map(|k| format!("filter_{k}")));
    header.push("max_gain".into());
    w.write_record(&header)?;
    for (j, freq) in resp.probe_freqs.iter().enumerate() {
        let mut row = vec![fmt_f64(*freq)];
        row.extend(resp.gains.column(j).iter().map(|g| fmt_f64(*g)));
        row.push(fmt_f64(resp.max_gain_curve[j]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_train_log_csv(path: impl AsRef<Path>, log: &TrainLog) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record([
        "epoch",
        "total_loss",
        "task_loss",
        "fbsp_loss",
        "accuracy",
        "m",
        "f_b",
    ])?;
    for r in &log.records {
        w.write_record([
            r.epoch.to_string(),
            fmt_f64(r.total_loss),
            fmt_f64(r.task_loss),
            fmt_f64(r.fbsp_loss),
            fmt_f64(r.accuracy),
            fmt_f64(r.m),
            fmt_f64(r.f_b),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `axis_value, accuracy, spectro_snr_db, bank_label`; one file per
/// sweep kind and bank.
pub fn write_sweep_csv(path: impl AsRef<Path>, result: &SweepResult) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["axis_value", "accuracy", "spectro_snr_db", "bank_label"])?;
    for i in 0..result.axis.len() {
        w.write_record([
            fmt_f64(result.axis[i]),
            fmt_f64(result.accuracy[i]),
            fmt_f64(result.spectro_snr[i]),
            result.bank_label.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// `out.csv` -> `out.csv.json`.
pub fn sidecar_path(path: impl AsRef<Path>) -> PathBuf {
    let mut s = path.as_ref().as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::f64::consts::PI] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path("a/b.csv"), PathBuf::from("a/b.csv.json"));
    }
}
