//! On-disk ensemble archives.
//!
//! An archive is a directory holding `metadata.toml` and one binary file per
//! successful run. Run files are little-endian:
//!
//! ```text
//! magic      8 bytes  "PWTRAJ\0\0"
//! major      u32
//! minor      u32
//! seed       u64
//! n_samples  u64
//! stride     u64      steps between samples
//! dt         f64
//! positions  n_samples × f64
//! betas      n_samples × f64
//! ```
//!
//! Sample times are not stored; sample `k` is at `(k · stride) as f64 · dt`,
//! which is the expression the simulation used.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, CONFIG_SCHEMA_VERSION};
use crate::ensemble::{ensemble_digest, Calibration, EnsembleResult, RunFailure, TrajectoryRecord};
use crate::error::{Error, Result};

pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_MINOR: u32 = 0;
pub const METADATA_FILE: &str = "metadata.toml";

const MAGIC: &[u8; 8] = b"PWTRAJ\0\0";
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8 + 8;

/// `"major.minor"` of the archive format.
pub fn format_version() -> String {
    format!("{FORMAT_MAJOR}.{FORMAT_MINOR}")
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: String,
    config_schema: u32,
    config_digest: String,
    n_runs: usize,
    calibration: CalibrationMeta,
    units: UnitsMeta,
    config: toml::Table,
    #[serde(default)]
    runs: Vec<RunMeta>,
    #[serde(default)]
    failures: Vec<FailureMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationMeta {
    epsilon_p: f64,
    phi_char: f64,
    raw_phi_char: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnitsMeta {
    length: String,
    time: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunMeta {
    seed: u64,
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FailureMeta {
    seed: u64,
    error: String,
}

/// Encodes one trajectory in the run-file layout.
pub fn encode_record(record: &TrajectoryRecord) -> Vec<u8> {
    let n = record.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
    out.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
    out.extend_from_slice(&record.seed.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(record.sample_stride as u64).to_le_bytes());
    out.extend_from_slice(&record.dt.to_le_bytes());
    for v in record.positions.iter().chain(&record.betas) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn read_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn read_f64(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Decodes a run file; `config_digest` is attached to the record.
pub fn decode_record(bytes: &[u8], config_digest: &str) -> Result<TrajectoryRecord> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Corrupt("not a trajectory file".into()));
    }
    let major = read_u32(bytes, 8);
    if major != FORMAT_MAJOR {
        return Err(Error::FormatVersion {
            found: format!("{major}.{}", read_u32(bytes, 12)),
            supported: FORMAT_MAJOR,
        });
    }
    let seed = read_u64(bytes, 16);
    let n = read_u64(bytes, 24);
    let stride = read_u64(bytes, 32);
    let dt = read_f64(bytes, 40);
    let expected = (n as u128) * 16 + HEADER_LEN as u128;
    if expected != bytes.len() as u128 {
        return Err(Error::Corrupt(format!(
            "trajectory file has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    if stride == 0 || !(dt > 0.0) {
        return Err(Error::Corrupt("trajectory header has a zero stride or step".into()));
    }
    let n = n as usize;
    let stride = stride as usize;
    let values: Vec<f64> = (0..2 * n).map(|i| read_f64(bytes, HEADER_LEN + 8 * i)).collect();
    Ok(TrajectoryRecord {
        seed,
        sample_stride: stride,
        dt,
        times: (0..n).map(|k| TrajectoryRecord::sample_time(k, stride, dt)).collect(),
        positions: values[..n].to_vec(),
        betas: values[n..].to_vec(),
        config_digest: config_digest.to_string(),
    })
}

fn run_file_name(seed: u64) -> String {
    format!("run-{seed:020}.bin")
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `result` into `dir`, creating it if needed.
///
/// The output depends only on the ensemble contents, so saving the same
/// result twice produces identical bytes.
pub fn save_ensemble(result: &EnsembleResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut runs = Vec::with_capacity(result.records.len());
    for record in &result.records {
        let bytes = encode_record(record);
        let file = run_file_name(record.seed);
        write(&dir.join(&file), &bytes)?;
        runs.push(RunMeta {
            seed: record.seed,
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let config: toml::Table =
        toml::from_str(&result.config.to_toml()).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let meta = Metadata {
        format_version: format_version(),
        config_schema: CONFIG_SCHEMA_VERSION,
        config_digest: result.config_digest(),
        n_runs: result.records.len() + result.failures.len(),
        calibration: CalibrationMeta {
            epsilon_p: result.calibration.epsilon_p,
            phi_char: result.calibration.phi_char,
            raw_phi_char: result.calibration.raw_phi_char,
        },
        units: UnitsMeta {
            length: result.config.units.length.clone(),
            time: result.config.units.time.clone(),
        },
        config,
        runs,
        failures: result
            .failures
            .iter()
            .map(|f| FailureMeta {
                seed: f.seed,
                error: f.error.clone(),
            })
            .collect(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Corrupt(e.to_string()))?;
    write(&dir.join(METADATA_FILE), text.as_bytes())
}

/// Reads an archive written by [`save_ensemble`], verifying the format
/// version, every run checksum and the configuration digest.
pub fn load_ensemble(dir: &Path) -> Result<EnsembleResult> {
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Metadata = toml::from_str(&text).map_err(|e| Error::Corrupt(format!("{}: {e}", meta_path.display())))?;
    let major = meta
        .format_version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok());
    if major != Some(FORMAT_MAJOR) {
        return Err(Error::FormatVersion {
            found: meta.format_version,
            supported: FORMAT_MAJOR,
        });
    }
    let config_text = toml::to_string(&meta.config).map_err(|e| Error::Corrupt(e.to_string()))?;
    let config = RunConfig::from_toml(&config_text)?;
    let computed = ensemble_digest(&config);
    if computed != meta.config_digest {
        return Err(Error::DigestMismatch {
            stored: meta.config_digest,
            computed,
        });
    }
    let mut records = Vec::with_capacity(meta.runs.len());
    for run in &meta.runs {
        if run.file.contains(['/', '\\']) || run.file.starts_with('.') {
            return Err(Error::Corrupt(format!(
                "run file name {:?} escapes the archive",
                run.file
            )));
        }
        let path: PathBuf = dir.join(&run.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != run.sha256 {
            return Err(Error::Checksum(path));
        }
        let record = decode_record(&bytes, &meta.config_digest)?;
        if record.seed != run.seed {
            return Err(Error::Corrupt(format!(
                "{} holds seed {}, expected {}",
                run.file, record.seed, run.seed
            )));
        }
        records.push(record);
    }
    Ok(EnsembleResult {
        config,
        calibration: Calibration {
            epsilon_p: meta.calibration.epsilon_p,
            phi_char: meta.calibration.phi_char,
            raw_phi_char: meta.calibration.raw_phi_char,
        },
        records,
        failures: meta
            .failures
            .into_iter()
            .map(|f| RunFailure {
                seed: f.seed,
                error: f.error,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TrajectoryRecord {
        TrajectoryRecord {
            seed: 42,
            sample_stride: 5,
            dt: 0.025,
            times: (0..4).map(|k| TrajectoryRecord::sample_time(k, 5, 0.025)).collect(),
            positions: vec![0.0, 0.1, -0.2, 1e-300],
            betas: vec![0.0, 0.3, -0.99, f64::MIN_POSITIVE],
            config_digest: "d".into(),
        }
    }

    #[test]
    fn record_round_trips_bit_for_bit() {
        let r = record();
        let bytes = encode_record(&r);
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 16);
        assert_eq!(decode_record(&bytes, "d").unwrap(), r);
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let mut bytes = encode_record(&record());
        bytes[0] = b'X';
        assert!(matches!(decode_record(&bytes, ""), Err(Error::Corrupt(_))));
        let mut bytes = encode_record(&record());
        bytes[8] = 2;
        assert!(matches!(decode_record(&bytes, ""), Err(Error::FormatVersion { .. })));
        let bytes = encode_record(&record());
        assert!(matches!(
            decode_record(&bytes[..bytes.len() - 1], ""),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
