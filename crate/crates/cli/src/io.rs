//! File loading, validation, digests and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use mixprep::linalg::{eig_hermitian, is_physical, outer4, CMat, DensityMatrix};

use crate::CliError;

/// FNV-1a 64-bit digest of a byte stream, hex encoded.
pub fn digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Inputs, seed and outputs of one invocation; written next to --out so
/// reruns are auditable.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<ManifestInput>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ManifestInput {
    pub path: String,
    pub digest: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            digest: digest(bytes),
        });
    }

    /// Write the manifest alongside the primary output.
    pub fn write(mut self, out: &Path) -> Result<(), CliError> {
        let manifest_path = manifest_path(out);
        self.outputs.push(manifest_path.display().to_string());
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&manifest_path, json)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", manifest_path.display())))
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_json(bytes: &[u8], path: &Path) -> Result<Value, CliError> {
    serde_json::from_slice(bytes)
        .map_err(|e| CliError::input(format!("invalid JSON in {}: {e}", path.display())))
}

/// Load a density matrix, validating physicality at `tol` and reporting all
/// violation magnitudes on failure. Inputs inside the tolerance are
/// projected back onto the physical set before use.
pub fn load_density(
    path: &Path,
    tol: f64,
    manifest: &mut RunManifest,
) -> Result<DensityMatrix, CliError> {
    let bytes = read_file(path)?;
    manifest.record_input(path, &bytes);
    let value = parse_json(&bytes, path)?;
    let mat = cmat_from_value(&value, 4)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let report = is_physical(&mat, tol);
    if !report.ok {
        let diag = serde_json::to_string(&report).expect("report serializes");
        return Err(CliError::input(format!(
            "{} is not a physical density matrix at tolerance {tol:e}: {diag}",
            path.display()
        )));
    }
    sanitize_density(&mat).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Hermitize, clip negative eigenvalues, renormalize the trace.
fn sanitize_density(mat: &CMat) -> Result<DensityMatrix, mixprep::Error> {
    let sym = mat.add(&mat.dagger()).scale_re(0.5);
    let eig = eig_hermitian(&sym)?;
    let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut out = CMat::zeros(4, 4);
    for k in 0..4 {
        if clipped[k] == 0.0 {
            continue;
        }
        let col = eig.vector(k);
        let col4 = [col[0], col[1], col[2], col[3]];
        out = out.add(&outer4(&col4, &col4).scale_re(clipped[k] / total));
    }
    DensityMatrix::new(out)
}

fn cmat_from_value(value: &Value, n: usize) -> Result<CMat, String> {
    let grab = |key: &str| -> Result<Vec<Vec<f64>>, String> {
        let rows = value
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| format!("missing \"{key}\" array"))?;
        if rows.len() != n {
            return Err(format!("\"{key}\" must have {n} rows"));
        }
        rows.iter()
            .map(|row| {
                let cols = row.as_array().ok_or("rows must be arrays")?;
                if cols.len() != n {
                    return Err(format!("\"{key}\" rows must have {n} entries"));
                }
                cols.iter()
                    .map(|v| {
                        v.as_f64()
                            .ok_or_else(|| "entries must be numbers".to_string())
                    })
                    .collect()
            })
            .collect()
    };
    let re = grab("re")?;
    let im = grab("im")?;
    Ok(CMat::from_fn(n, n, |i, j| {
        mixprep::linalg::C64::new(re[i][j], im[i][j])
    }))
}

/// Parse an angle, radians by default, degrees with a "deg" suffix.
pub fn parse_angle(raw: &str) -> Result<f64, String> {
    let trimmed = raw.trim();
    if let Some(deg) = trimmed.strip_suffix("deg") {
        deg.trim()
            .parse::<f64>()
            .map(f64::to_radians)
            .map_err(|e| format!("invalid angle {trimmed:?}: {e}"))
    } else {
        trimmed
            .parse::<f64>()
            .map_err(|e| format!("invalid angle {trimmed:?}: {e}"))
    }
}

/// Emit to --out (recording it in the manifest) or stdout.
pub fn emit(content: &str, out: Option<&Path>, manifest: &mut RunManifest) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, content)
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
            manifest.outputs.push(path.display().to_string());
            Ok(())
        }
        None => {
            if content.ends_with('\n') {
                print!("{content}");
            } else {
                println!("{content}");
            }
            Ok(())
        }
    }
}
