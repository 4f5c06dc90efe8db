//! Run configurations: JSON documents with dotted-path overrides and a
//! content digest embedded in every output for provenance. Unknown keys are
//! rejected so a config file cannot silently drift from the code.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use rlk::{SchemeSpec, SplitProblem};

use crate::CliError;

/// Problem selector. Externally tagged so unknown-field rejection applies to
/// the per-kind payloads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    ManufacturedSmooth,
    ManufacturedMembrane { tau_min: f64 },
    ThetaSplit { lambda: f64, theta: f64 },
    BeelerReuter { params: PathBuf },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<SplitProblem, CliError> {
        match self {
            ProblemConfig::ManufacturedSmooth => Ok(rlk::manufactured_smooth()),
            ProblemConfig::ManufacturedMembrane { tau_min } => {
                if *tau_min <= 0.0 {
                    return Err(CliError::Config(format!(
                        "problem.manufactured_membrane.tau_min: must be positive, got {tau_min}"
                    )));
                }
                Ok(rlk::manufactured_membrane(*tau_min))
            }
            ProblemConfig::ThetaSplit { lambda, theta } => Ok(rlk::theta_split(*lambda, *theta)),
            ProblemConfig::BeelerReuter { params } => {
                rlk::br_model_from_path(params).map_err(CliError::from)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl From<RectConfig> for rlk::GridRect {
    fn from(r: RectConfig) -> Self {
        rlk::GridRect {
            re_min: r.re_min,
            re_max: r.re_max,
            im_min: r.im_min,
            im_max: r.im_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    pub re: usize,
    pub im: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub problem: ProblemConfig,
    pub scheme: SchemeSpec,
    pub h: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub schemes: Vec<SchemeSpec>,
    pub thetas: Vec<f64>,
    /// Scan rectangle; defaults per scheme order to the classic axis ranges.
    #[serde(default)]
    pub rect: Option<RectConfig>,
    pub resolution: ResolutionConfig,
    #[serde(default = "default_true")]
    pub crossings: bool,
    #[serde(default = "default_search_limit")]
    pub search_limit: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub problem: ProblemConfig,
    pub schemes: Vec<SchemeSpec>,
    pub h_ref: f64,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<u32>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalDtConfig {
    pub problem: ProblemConfig,
    pub schemes: Vec<SchemeSpec>,
    pub h_hi: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_search_limit() -> f64 {
    -1e6
}

fn default_m_list() -> Vec<u32> {
    vec![5, 4, 3, 2]
}

fn default_tol() -> f64 {
    1e-2
}

/// Default scan rectangles matching the classic per-order axis ranges.
pub fn default_rect(order: usize) -> rlk::GridRect {
    match order {
        2 => rlk::GridRect {
            re_min: -6.0,
            re_max: 1.0,
            im_min: 0.0,
            im_max: 8.0,
        },
        3 => rlk::GridRect {
            re_min: -250.0,
            re_max: 0.0,
            im_min: 0.0,
            im_max: 140.0,
        },
        _ => rlk::GridRect {
            re_min: -90.0,
            re_max: 0.0,
            im_min: 0.0,
            im_max: 50.0,
        },
    }
}

/// Load a config file, apply `--set key=value` overrides, deserialize with
/// key-path error reporting, and return the config with its digest.
pub fn load_config<T: DeserializeOwned + Serialize>(
    path: &Path,
    overrides: &[String],
) -> Result<(T, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    let config: T = serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::Config(format!("config key `{}`: {}", e.path(), e.inner())))?;
    let digest = config_digest(&config);
    Ok((config, digest))
}

/// First 16 hex digits of the SHA-256 of the canonical config serialization.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn apply_override(root: &mut Value, item: &str) -> Result<(), CliError> {
    let Some((key, raw)) = item.split_once('=') else {
        return Err(CliError::Config(format!(
            "override `{item}` must have the form key=value"
        )));
    };
    // value parses as JSON when possible, otherwise taken as a string
    let val: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let segments: Vec<&str> = key.split('.').collect();
    let mut cur = root;
    for seg in &segments[..segments.len() - 1] {
        cur = if let Ok(idx) = seg.parse::<usize>() {
            cur.as_array_mut()
                .and_then(|a| a.get_mut(idx))
                .ok_or_else(|| {
                    CliError::Config(format!("override `{key}`: no array element `{seg}`"))
                })?
        } else {
            cur.as_object_mut()
                .ok_or_else(|| {
                    CliError::Config(format!("override `{key}`: `{seg}` is not an object"))
                })?
                .entry(seg.to_string())
                .or_insert_with(|| Value::Object(Default::default()))
        };
    }
    let last = segments[segments.len() - 1];
    if let Ok(idx) = last.parse::<usize>() {
        let arr = cur.as_array_mut().ok_or_else(|| {
            CliError::Config(format!("override `{key}`: parent is not an array"))
        })?;
        if idx >= arr.len() {
            return Err(CliError::Config(format!(
                "override `{key}`: index {idx} out of bounds ({})",
                arr.len()
            )));
        }
        arr[idx] = val;
    } else {
        cur.as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: parent is not an object")))?
            .insert(last.to_string(), val);
    }
    Ok(())
}
