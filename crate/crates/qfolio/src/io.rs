//! File formats: instance JSON (with precomputed QUBO/Ising/ground state),
//! result and manifest JSON, CSV reports. All writes go to a temp file in
//! the target directory and are renamed into place, so a failed run never
//! leaves a partial file.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{
    self, BitOrder, Bitstring, GroundState, IsingModel, QuboModel,
};
use crate::portfolio::{self, PortfolioInstance};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("cannot encode JSON: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("instance id {id} not found in {path}")]
    UnknownInstance { id: u64, path: String },
    #[error("unsupported schema_version {got}, expected {expected}")]
    SchemaVersion { got: u32, expected: u32 },
}

/// Ising block of the instance JSON, with the brute-forced ground state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsingRecord {
    pub h: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    pub delta: f64,
    #[serde(rename = "E_g")]
    pub e_g: f64,
    /// Canonical rendering (qubit 0 leftmost).
    pub ground_bitstring: String,
}

impl IsingRecord {
    pub fn from_model(model: &IsingModel) -> Option<Self> {
        let ground = model.ground.as_ref()?;
        Some(IsingRecord {
            h: model.h.clone(),
            j: model.j.clone(),
            delta: model.delta,
            e_g: ground.energy,
            ground_bitstring: ground.bitstring.render(BitOrder::Canonical),
        })
    }

    pub fn to_model(&self) -> IsingModel {
        let n = self.h.len();
        IsingModel {
            n,
            h: self.h.clone(),
            j: self.j.clone(),
            delta: self.delta,
            ground: Bitstring::parse(&self.ground_bitstring, BitOrder::Canonical).map(
                |bits| GroundState {
                    energy: self.e_g,
                    bitstring: bits,
                },
            ),
        }
    }
}

/// One fully precomputed problem instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u64,
    pub prices: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub qubo: QuboModel,
    pub ising: IsingRecord,
}

/// Top-level instance file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub m: usize,
    pub w: usize,
    #[serde(rename = "N_f")]
    pub n_f: usize,
    pub b: f64,
    pub theta: [f64; 3],
    pub seed: u64,
    pub instances: Vec<InstanceRecord>,
}

impl InstanceFile {
    /// Generate `count` instances and precompute everything downstream
    /// solvers need: r, c, QUBO, Ising, ground state.
    pub fn generate(
        m: usize,
        w: usize,
        n_f: usize,
        b: f64,
        theta: [f64; 3],
        seed: u64,
        count: u64,
    ) -> Result<Self, crate::portfolio::PortfolioError> {
        let mut instances = Vec::with_capacity(count as usize);
        for id in 0..count {
            let inst = portfolio::generate_instance(m, w, n_f, b, theta, seed, id)?;
            let summary = portfolio::summarize(&inst)?;
            let qubo = encoding::build_qubo(&inst, &summary);
            let mut ising = encoding::build_ising(&qubo);
            ising.ground = Some(encoding::brute_force_ground(&ising).expect("n within limit"));
            instances.push(InstanceRecord {
                id,
                prices: inst.prices.clone(),
                r: summary.expected_return.clone(),
                c: summary.covariance.clone(),
                qubo,
                ising: IsingRecord::from_model(&ising).expect("ground just computed"),
            });
        }
        Ok(InstanceFile {
            schema_version: SCHEMA_VERSION,
            m,
            w,
            n_f,
            b,
            theta,
            seed,
            instances,
        })
    }

    pub fn check_schema(&self) -> Result<(), IoError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(IoError::SchemaVersion {
                got: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(())
    }

    pub fn find(&self, id: u64, path: &str) -> Result<&InstanceRecord, IoError> {
        self.instances
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| IoError::UnknownInstance {
                id,
                path: path.to_string(),
            })
    }

    /// Rebuild the in-memory instance for a record (prices are stored, the
    /// rest is derived).
    pub fn instance(&self, record: &InstanceRecord) -> PortfolioInstance {
        PortfolioInstance {
            asset_count: self.m,
            slices_per_asset: self.w,
            history_len: self.n_f,
            budget: self.b,
            prices: record.prices.clone(),
            theta: self.theta,
            seed: self.seed,
            instance_id: record.id,
        }
    }
}

/// Run provenance: enough to regenerate the output exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved configuration, flags and defaults included.
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config,
        }
    }
}

/// Serialize to pretty JSON and atomically replace `path`.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let body = serde_json::to_string_pretty(value)?;
    write_text_atomic(path, &(body + "\n"))
}

/// Atomically replace `path` with `text` (temp file + rename).
pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), IoError> {
    let wrap = |source: std::io::Error| IoError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(wrap)?;
    tmp.write_all(text.as_bytes()).map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IoError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Sidecar manifest path: `out.json` -> `out.manifest.json`.
pub fn manifest_path(path: &Path) -> std::path::PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    path.with_file_name(format!("{stem}.manifest.json"))
}

/// Write an output and its manifest together.
pub fn write_output<T: Serialize>(
    path: &Path,
    value: &T,
    manifest: &Manifest,
) -> Result<(), IoError> {
    write_json_atomic(path, value)?;
    write_json_atomic(&manifest_path(path), manifest)
}
