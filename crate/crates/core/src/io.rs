//! Matrix files, JSON envelopes and run manifests.
//!
//! Matrices are stored either as headerless CSV (one row per line) or in the
//! `FSM1` binary layout: the four magic bytes `FSM1`, `rows` and `cols` as
//! little-endian `u64`, then `rows·cols` little-endian `f64` in row-major
//! order. The format is chosen by extension: `.fsm` is binary, anything else
//! is CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::SCHEMA_VERSION;

const MAGIC: &[u8; 4] = b"FSM1";

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("fsm"))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    if is_binary(path) {
        decode_fsm(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| format_err(path, "not UTF-8"))?;
        parse_csv(path, &text)
    }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let bytes = if is_binary(path) { encode_fsm(m) } else { to_csv(m).into_bytes() };
    write_atomic(path, &bytes)
}

fn parse_csv(path: &Path, text: &str) -> Result<DenseMatrix> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                let v: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| format_err(path, format!("line {}: cannot parse {:?}", lineno + 1, t.trim())))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(format_err(path, format!("line {}: non-finite entry", lineno + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(format_err(path, format!("line {}: {} fields, expected {first}", lineno + 1, row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, "empty matrix file"));
    }
    DenseMatrix::from_rows(&rows)
}

/// CSV using the shortest round-trip representation of each entry.
pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn encode_fsm(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for x in m.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn decode_fsm(path: &Path, bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(format_err(path, "missing FSM1 header"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let count =
        rows.checked_mul(cols).and_then(|c| c.checked_mul(8)).ok_or_else(|| format_err(path, "dimensions overflow"))?;
    if bytes.len() as u64 - 20 != count {
        return Err(format_err(path, format!("payload holds {} bytes, header implies {count}", bytes.len() - 20)));
    }
    let data: Vec<f64> = bytes[20..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if data.iter().any(|x| !x.is_finite()) {
        return Err(format_err(path, "non-finite entry"));
    }
    DenseMatrix::new(rows as usize, cols as usize, data)
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a top-level `"schema"` field.
pub fn to_json_envelope<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema: SCHEMA_VERSION, body: value })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, to_json_envelope(value)?.as_bytes())
}

/// Hex sha256 of the canonical JSON of a configuration.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(config)?;
    let digest = Sha256::digest(serde_json::to_vec(&v)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Record of one experiment run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config_hash: String,
    /// The fully resolved configuration.
    pub config: serde_json::Value,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
    pub outputs: Vec<PathBuf>,
}

fn unix_ms() -> u128 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads: crate::par::current_threads(),
            config_hash: config_hash(config)?,
            config: serde_json::to_value(config)?,
            started_unix_ms: unix_ms(),
            finished_unix_ms: None,
            outputs: Vec::new(),
        })
    }

    /// Stamps the end time and writes `manifest.json` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix_ms = Some(unix_ms());
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

/// On-disk matrix layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Fsm,
}

/// Writes in the given layout regardless of the file extension.
pub fn write_matrix_as(path: &Path, m: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => to_csv(m).into_bytes(),
        MatrixFormat::Fsm => encode_fsm(m),
    };
    write_atomic(path, &bytes)
}

/// Reads in the given layout regardless of the file extension.
pub fn read_matrix_as(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    match format {
        MatrixFormat::Fsm => decode_fsm(path, &bytes),
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| format_err(path, "not UTF-8"))?;
            parse_csv(path, &text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0, -0.1, 1e-300], vec![std::f64::consts::PI, 0.0, -7.5]]).unwrap()
    }

    #[test]
    fn roundtrip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.csv", "a.fsm"] {
            let p = dir.path().join(name);
            write_matrix(&p, &sample()).unwrap();
            assert_eq!(read_matrix(&p).unwrap(), sample());
        }
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        for body in ["1,2\n3\n", "1,x\n", "", "1,NaN\n"] {
            fs::write(&p, body).unwrap();
            assert!(matches!(read_matrix(&p), Err(Error::Format { .. })), "{body:?}");
        }
        let b = dir.path().join("bad.fsm");
        fs::write(&b, b"FSM0").unwrap();
        assert!(matches!(read_matrix(&b), Err(Error::Format { .. })));
        let mut bytes = encode_fsm(&sample());
        bytes.pop();
        fs::write(&b, bytes).unwrap();
        assert!(matches!(read_matrix(&b), Err(Error::Format { .. })));
        assert!(matches!(read_matrix(&dir.path().join("missing.csv")), Err(Error::Io(_))));
    }

    #[test]
    fn envelope_and_hash() {
        #[derive(Serialize)]
        struct C {
            a: u32,
        }
        let s = to_json_envelope(&C { a: 3 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["a"], 3);
        assert_eq!(config_hash(&C { a: 3 }).unwrap(), config_hash(&C { a: 3 }).unwrap());
        assert_ne!(config_hash(&C { a: 3 }).unwrap(), config_hash(&C { a: 4 }).unwrap());
        assert_eq!(config_hash(&C { a: 3 }).unwrap().len(), 64);
    }
}
