//! Flat result records and their persistence.
//!
//! Every record carries the schema version, the driver version string, the
//! config hash, the full resolved config as canonical JSON, and the master
//! seed, so each row is reproducible from its own metadata. CSV output gets
//! an RFC-4180 body preceded by `#`-comment column documentation; JSONL
//! output is one schema-versioned object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Version string stamped into every record. `SPINLAB_BUILD_REF` can carry a
/// VCS describe string at build time; the crate version is always present.
pub fn version_string() -> String {
    match option_env!("SPINLAB_BUILD_REF") {
        Some(build_ref) => format!("spinlab {} ({build_ref})", env!("CARGO_PKG_VERSION")),
        None => format!("spinlab {}", env!("CARGO_PKG_VERSION")),
    }
}

/// Metadata fields shared by all record types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema_version: u32,
    pub version: String,
    pub config_hash: String,
    pub config_json: String,
    pub seed: u64,
}

impl Meta {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            version: version_string(),
            config_hash: cfg.hash()?,
            config_json: cfg.canonical_json()?,
            seed: cfg.seed,
        })
    }
}

const META_DOCS: [(&str, &str); 5] = [
    ("schema_version", "record schema revision"),
    ("version", "driver version string"),
    ("config_hash", "16-hex-char SHA-256 prefix of config_json"),
    ("config_json", "full resolved run configuration"),
    ("seed", "master seed of all random streams"),
];

/// One finite-size point of the self-averaging scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub schema_version: u32,
    pub version: String,
    pub config_hash: String,
    pub config_json: String,
    pub seed: u64,
    pub model: String,
    pub term: String,
    pub l: u32,
    pub volume: usize,
    pub beta: f64,
    pub samples: u64,
    pub var_psi: f64,
    pub var_psi_stderr: f64,
    pub bound_free: f64,
    pub dm_duhamel: f64,
    pub dm_duhamel_stderr: f64,
    pub bound_dm_duhamel: Option<f64>,
    pub dh_duhamel: f64,
    pub dh_duhamel_stderr: f64,
    pub bound_dh_duhamel: Option<f64>,
    pub var_m_total: f64,
    pub var_m_total_stderr: f64,
    pub var_h_total: f64,
    pub var_h_total_stderr: f64,
    pub dm_sq_thermal: f64,
    pub dm_sq_thermal_stderr: f64,
    pub dh_sq_thermal: f64,
    pub dh_sq_thermal_stderr: f64,
    pub harris_m_slack_lower: f64,
    pub harris_m_slack_upper: f64,
    pub harris_h_slack_lower: f64,
    pub harris_h_slack_upper: f64,
}

impl ScalingRecord {
    pub fn column_docs() -> Vec<(&'static str, &'static str)> {
        let mut docs = META_DOCS.to_vec();
        docs.extend([
            ("model", "model preset name"),
            ("term", "term whose densities are measured"),
            ("l", "chain length"),
            ("volume", "number of lattice sites"),
            ("beta", "inverse temperature"),
            ("samples", "disorder samples behind this row"),
            ("var_psi", "Var(psi_L), psi_L = log Z / volume"),
            ("var_psi_stderr", "jackknife stderr of var_psi"),
            ("bound_free", "concentration bound sum (beta J1 K)^2 n_a / volume"),
            ("dm_duhamel", "E (dm, dm)_D, dm = m - <m>"),
            ("dm_duhamel_stderr", "stderr of dm_duhamel"),
            ("bound_dm_duhamel", "bound (K/beta J1) sqrt(1/(n_a volume)); empty if J1 = 0"),
            ("dh_duhamel", "E (dh, dh)_D, dh = h - <h>"),
            ("dh_duhamel_stderr", "stderr of dh_duhamel"),
            ("bound_dh_duhamel", "bound (K/beta J1)(sqrt(6/(n_a volume)) + 1/(n_a volume)); empty if J1 = 0"),
            ("var_m_total", "E<(m - E<m>)^2> (disorder + thermal)"),
            ("var_m_total_stderr", "jackknife stderr of var_m_total"),
            ("var_h_total", "E<(h - E<h>)^2>"),
            ("var_h_total_stderr", "jackknife stderr of var_h_total"),
            ("dm_sq_thermal", "E<(m - <m>)^2> (thermal only; scaling-trend bound)"),
            ("dm_sq_thermal_stderr", "stderr of dm_sq_thermal"),
            ("dh_sq_thermal", "E<(h - <h>)^2>"),
            ("dh_sq_thermal_stderr", "stderr of dh_sq_thermal"),
            ("harris_m_slack_lower", "min over samples of <m^2> - (m,m)_D"),
            ("harris_m_slack_upper", "min over samples of upper - <m^2>"),
            ("harris_h_slack_lower", "min over samples of <h^2> - (h,h)_D"),
            ("harris_h_slack_upper", "min over samples of upper - <h^2>"),
        ]);
        docs
    }
}

/// Weighted log–log fit of a variance column against the volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub beta: f64,
    pub n_points: usize,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
}

/// One identity check of the disorder integration-by-parts relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgRecord {
    pub schema_version: u32,
    pub version: String,
    pub config_hash: String,
    pub config_json: String,
    pub seed: u64,
    pub model: String,
    pub probe_term: String,
    /// "quadrature" (exact disorder average) or "mc".
    pub branch: String,
    pub l: u32,
    pub volume: usize,
    pub beta: f64,
    /// Overlap polynomial: "1", "R12", or "R23".
    pub f_label: String,
    pub n_replicas: u32,
    /// Quadrature order or MC sample count, depending on the branch.
    pub points: u64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub residual_norm: f64,
    pub residual_stderr: Option<f64>,
    pub dhf_norm: f64,
    pub dhf_stderr: Option<f64>,
}

impl GgRecord {
    pub fn column_docs() -> Vec<(&'static str, &'static str)> {
        let mut docs = META_DOCS.to_vec();
        docs.extend([
            ("model", "model preset name"),
            ("probe_term", "disordered term whose couplings are integrated by parts"),
            ("branch", "disorder average route: quadrature (exact) or mc"),
            ("l", "chain length"),
            ("volume", "number of lattice sites"),
            ("beta", "inverse temperature"),
            ("f_label", "overlap polynomial multiplying the energy density"),
            ("n_replicas", "replicas carrying f (one more appears on the right side)"),
            ("points", "quadrature order or MC sample count"),
            ("lhs_re", "Re E<(h - E<h>) f>"),
            ("lhs_im", "Im E<(h - E<h>) f>"),
            ("rhs_re", "Re of the Duhamel/overlap side"),
            ("rhs_im", "Im of the Duhamel/overlap side"),
            ("residual_norm", "|lhs - rhs|"),
            ("residual_stderr", "jackknife stderr of residual_norm (mc branch)"),
            ("dhf_norm", "|E<(h - E<h>) f>| itself (decays with volume)"),
            ("dhf_stderr", "jackknife stderr of dhf_norm (mc branch)"),
        ]);
        docs
    }
}

/// One finite-size point of the classical overlap variance comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRecord {
    pub schema_version: u32,
    pub version: String,
    pub config_hash: String,
    pub config_json: String,
    pub seed: u64,
    pub model: String,
    pub term: String,
    pub l: u32,
    pub volume: usize,
    pub beta: f64,
    pub samples: u64,
    /// E<R^2> − (E<R>)² — total variance of the overlap.
    pub v_delta: f64,
    pub v_delta_stderr: f64,
    /// E[<R²> − <R>²] — thermal part.
    pub v_small: f64,
    pub v_small_stderr: f64,
    /// E[<R>²] − (E<R>)² — disorder part.
    pub v_mean: f64,
    pub v_mean_stderr: f64,
    pub two_v_delta: f64,
    pub three_v_small: f64,
    pub six_v_mean: f64,
    pub gap_ds: f64,
    pub gap_ds_stderr: f64,
    pub gap_sm: f64,
    pub gap_sm_stderr: f64,
    pub gap_dm: f64,
    pub gap_dm_stderr: f64,
    /// v_delta − v_small − v_mean; identically 0 up to rounding.
    pub decomposition_residual: f64,
}

impl ClassicalRecord {
    pub fn column_docs() -> Vec<(&'static str, &'static str)> {
        let mut docs = META_DOCS.to_vec();
        docs.extend([
            ("model", "model preset name"),
            ("term", "term whose overlap R is studied"),
            ("l", "chain length"),
            ("volume", "number of lattice sites"),
            ("beta", "inverse temperature"),
            ("samples", "disorder samples behind this row"),
            ("v_delta", "E<R^2> - (E<R>)^2, total overlap variance"),
            ("v_delta_stderr", "jackknife stderr"),
            ("v_small", "E[<R^2> - <R>^2], thermal overlap variance"),
            ("v_small_stderr", "jackknife stderr"),
            ("v_mean", "E[<R>^2] - (E<R>)^2, disorder variance of <R>"),
            ("v_mean_stderr", "jackknife stderr"),
            ("two_v_delta", "2 v_delta (identity-scaled)"),
            ("three_v_small", "3 v_small"),
            ("six_v_mean", "6 v_mean"),
            ("gap_ds", "|2 v_delta - 3 v_small|"),
            ("gap_ds_stderr", "jackknife stderr of the signed gap"),
            ("gap_sm", "|3 v_small - 6 v_mean|"),
            ("gap_sm_stderr", "jackknife stderr of the signed gap"),
            ("gap_dm", "|2 v_delta - 6 v_mean|"),
            ("gap_dm_stderr", "jackknife stderr of the signed gap"),
            ("decomposition_residual", "v_delta - v_small - v_mean (exact zero check)"),
        ]);
        docs
    }
}

/// One (L, β, coupling) point of the inter-replica coupling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsbRecord {
    pub schema_version: u32,
    pub version: String,
    pub config_hash: String,
    pub config_json: String,
    pub seed: u64,
    pub model: String,
    pub c_term: String,
    pub l: u32,
    pub volume: usize,
    pub beta: f64,
    pub samples: u64,
    /// Inter-replica coupling disorder strength J1⁰.
    pub j1_c: f64,
    /// Inter-replica deterministic coupling J0⁰.
    pub j0_c: f64,
    pub r_mean: f64,
    pub r_mean_stderr: f64,
    /// E<(R − <R>)²> — thermal overlap variance in the coupled state.
    pub var_thermal: f64,
    pub var_thermal_stderr: f64,
    /// E<R²> − (E<R>)² — total overlap variance.
    pub var_total: f64,
    pub var_total_stderr: f64,
    /// Operator-level defect of the m⁰ ≡ R identification (max abs entry).
    pub m0_overlap_gap: f64,
    /// Max |coupled − factorized| at the (0,0) point; empty elsewhere.
    pub decoupling_gap: Option<f64>,
}

impl RsbRecord {
    pub fn column_docs() -> Vec<(&'static str, &'static str)> {
        let mut docs = META_DOCS.to_vec();
        docs.extend([
            ("model", "base model preset name"),
            ("c_term", "term family carrying the inter-replica coupling"),
            ("l", "chain length"),
            ("volume", "number of lattice sites"),
            ("beta", "inverse temperature"),
            ("samples", "disorder samples behind this row"),
            ("j1_c", "inter-replica coupling disorder strength"),
            ("j0_c", "inter-replica deterministic coupling"),
            ("r_mean", "E<R^c_{1,2}> in the coupled two-replica state"),
            ("r_mean_stderr", "jackknife stderr"),
            ("var_thermal", "E<(R - <R>)^2>, centering on the per-sample thermal mean"),
            ("var_thermal_stderr", "stderr"),
            ("var_total", "E<R^2> - (E<R>)^2, centering on the disorder-averaged mean"),
            ("var_total_stderr", "jackknife stderr"),
            ("m0_overlap_gap", "max-abs entry defect of coupling-density vs overlap operator"),
            ("decoupling_gap", "max |coupled - factorized| expectation at zero coupling; empty off the zero point"),
        ]);
        docs
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Write records as CSV: `#`-prefixed column documentation, then an RFC-4180
/// body with a header row.
pub fn emit_csv<T: Serialize>(
    records: &[T],
    path: &Path,
    docs: &[(&str, &str)],
) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# one record per line after the header; columns:").map_err(io_err(path))?;
    for (name, doc) in docs {
        writeln!(w, "#   {name}: {doc}").map_err(io_err(path))?;
    }
    let mut csv_w = csv::Writer::from_writer(w);
    for r in records {
        csv_w
            .serialize(r)
            .map_err(|e| CliError::Serde(format!("{}: {e}", path.display())))?;
    }
    csv_w
        .flush()
        .map_err(io_err(path))?;
    Ok(())
}

/// Write records as JSON Lines (one schema-versioned object per line).
pub fn emit_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::Serde(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn emit_records<T: Serialize>(
    records: &[T],
    format: OutputFormat,
    path: &Path,
    docs: &[(&str, &str)],
) -> Result<()> {
    match format {
        OutputFormat::Csv => emit_csv(records, path, docs),
        OutputFormat::Jsonl => emit_jsonl(records, path),
    }
}

/// Parse a JSONL artifact back into records.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    BufReader::new(file)
        .lines()
        .map(|line| {
            let line = line.map_err(io_err(path))?;
            serde_json::from_str(&line).map_err(|e| CliError::Serde(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Parse a CSV artifact back into records (comment lines are skipped).
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Serde(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Serde(format!("{}: {e}", path.display()))))
        .collect()
}
