//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use scw_qkd::KeyRateReport;
use serde::Serialize;

pub const CSV_HEADER: [&str; 13] = [
    "loss_db",
    "xi",
    "n",
    "K_or_R_bits_per_s",
    "Q",
    "P",
    "chi",
    "mu0",
    "beta_A",
    "delta",
    "v0",
    "k_sample",
    "status",
];

/// Shortest round-trip decimal, empty when not finite.
fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

/// One CSV record. `beta_A` is in radians.
pub fn csv_record(r: &KeyRateReport) -> [String; 13] {
    let has_params = r.mu_0.is_finite();
    [
        number(r.loss_db),
        number(r.xi),
        r.n.to_string(),
        number(r.rate),
        number(r.q),
        number(r.p),
        number(r.chi),
        number(r.mu_0),
        number(r.beta_a),
        number(r.delta),
        number(r.v_0),
        if has_params { r.k_sample.to_string() } else { String::new() },
        r.status.to_string(),
    ]
}

/// Ordered CSV writer flushed after every batch, so an interrupted sweep
/// leaves only complete rows behind.
pub struct CsvSink {
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        writer.write_record(CSV_HEADER)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn write_batch(&mut self, rows: &[KeyRateReport]) -> io::Result<()> {
        for r in rows {
            self.writer.write_record(csv_record(r))?;
        }
        self.writer.flush()
    }
}

/// Writes through a sibling temporary file and a rename, so a failed run
/// never leaves a half-written file at `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = sibling(path, ".tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(contents)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    write_atomic(path, json(value).as_bytes())
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}
