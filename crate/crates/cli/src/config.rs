//! Run configuration: TOML file plus command-line overrides, fully validated
//! before any compute and serialized verbatim into every output record.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spinlab_core::model::{
    preset_random_bond_heisenberg, preset_random_bond_ising, preset_random_field_heisenberg,
    ModelSpec,
};
use spinlab_core::spin::{Boundary, LatticeGeometry, DEFAULT_DIM_CAP};

use crate::error::{CliError, Result};

/// Used when no seed is given; always recorded in the output so a rerun can
/// reproduce the artifact exactly.
pub const DEFAULT_SEED: u64 = 1729;

pub const PRESETS: &[&str] = &[
    "random_field_heisenberg",
    "random_bond_heisenberg",
    "random_bond_ising",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(CliError::Config(format!(
                "unknown format {other:?}; use csv or jsonl"
            ))),
        }
    }
}

/// Preset parameters shared by the model builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Disorder strength J1 of the random term (field or bond).
    pub j1: f64,
    /// Deterministic coupling J0 (exchange for the field preset, bond offset
    /// for the bond presets).
    pub j0: f64,
    /// Longitudinal field of the Ising preset.
    pub field: f64,
    /// One shared Gaussian per bond across the three spin axes (bond preset).
    pub su2_shared: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            j1: 1.0,
            j0: 1.0,
            field: 0.2,
            su2_shared: true,
        }
    }
}

/// Inter-replica coupling sweep parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RsbParams {
    /// Decreasing (J1⁰, J0⁰) path; include (0, 0) to probe the decoupling
    /// point.
    pub coupling_grid: Vec<[f64; 2]>,
    /// Identify the coupling draws g⁰ with the base draws of the coupling
    /// term instead of an independent family.
    pub g0_shared_with_base: bool,
}

impl Default for RsbParams {
    fn default() -> Self {
        Self {
            coupling_grid: vec![[0.4, 0.4], [0.2, 0.2], [0.1, 0.1], [0.05, 0.05], [0.0, 0.0]],
            g0_shared_with_base: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Model preset name; see [`PRESETS`].
    pub model: String,
    /// Chain lengths, strictly increasing.
    pub l_grid: Vec<u32>,
    /// Inverse temperatures.
    pub beta_grid: Vec<f64>,
    /// Monte Carlo sample count (0 disables the MC branch where an
    /// alternative exists).
    pub samples: u64,
    /// Gauss–Hermite order for exact disorder averages (0 disables the
    /// quadrature branch).
    pub quadrature_order: usize,
    /// Master seed for all counter-based streams.
    pub seed: u64,
    /// Worker threads; 0 means the default pool.
    pub jobs: usize,
    pub format: OutputFormat,
    /// Output path; defaults to `spinlab_<subcommand>.<ext>`.
    pub out: Option<String>,
    /// Hilbert-space dimension cap applied to every constructed model.
    pub dim_cap: usize,
    /// Term measured / probed; defaults to the first term with J1 ≠ 0.
    pub term: Option<String>,
    pub params: ModelParams,
    pub rsb: RsbParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "random_field_heisenberg".into(),
            l_grid: vec![2, 3, 4, 5, 6],
            beta_grid: vec![1.0],
            samples: 200,
            quadrature_order: 32,
            seed: DEFAULT_SEED,
            jobs: 0,
            format: OutputFormat::Csv,
            out: None,
            dim_cap: DEFAULT_DIM_CAP,
            term: None,
            params: ModelParams::default(),
            rsb: RsbParams::default(),
        }
    }
}

impl RunConfig {
    /// Structural validation shared by all subcommands; runners add their own
    /// requirements on top.
    pub fn validate(&self) -> Result<()> {
        if !PRESETS.contains(&self.model.as_str()) {
            return Err(CliError::Config(format!(
                "unknown model preset {:?}; available: {}",
                self.model,
                PRESETS.join(", ")
            )));
        }
        if self.l_grid.is_empty() {
            return Err(CliError::Config("l_grid must not be empty".into()));
        }
        if self.l_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config(
                "l_grid must be strictly increasing".into(),
            ));
        }
        if self.l_grid[0] < 1 {
            return Err(CliError::Config("l_grid entries must be ≥ 1".into()));
        }
        if self.beta_grid.is_empty() {
            return Err(CliError::Config("beta_grid must not be empty".into()));
        }
        if self.beta_grid.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(CliError::Config(
                "beta_grid entries must be finite and ≥ 0".into(),
            ));
        }
        if self.samples == 0 && self.quadrature_order == 0 {
            return Err(CliError::Config(
                "either samples or quadrature_order must be positive".into(),
            ));
        }
        if self.samples == 1 {
            return Err(CliError::Config(
                "samples must be 0 (disabled) or ≥ 2 (jackknife error bars need two)".into(),
            ));
        }
        if self.dim_cap < 2 {
            return Err(CliError::Config("dim_cap must be ≥ 2".into()));
        }
        if self
            .rsb
            .coupling_grid
            .iter()
            .flatten()
            .any(|c| !c.is_finite() || *c < 0.0)
        {
            return Err(CliError::Config(
                "rsb.coupling_grid entries must be finite and ≥ 0".into(),
            ));
        }
        if !(self.params.j1.is_finite() && self.params.j0.is_finite() && self.params.field.is_finite())
        {
            return Err(CliError::Config("model parameters must be finite".into()));
        }
        // capacity: every grid point must clear the dimension cap before any
        // expensive work starts
        for &l in &self.l_grid {
            self.build_model(l)?;
        }
        Ok(())
    }

    /// Instantiate the configured preset on a 1D open chain of length `l`.
    pub fn build_model(&self, l: u32) -> Result<ModelSpec> {
        let lattice = LatticeGeometry::new(1, l, Boundary::Open)?;
        let p = &self.params;
        let model = match self.model.as_str() {
            "random_field_heisenberg" => {
                preset_random_field_heisenberg(&lattice, p.j1, p.j0)?
            }
            "random_bond_heisenberg" => preset_random_bond_heisenberg(
                &lattice,
                [p.j1; 3],
                [p.j0; 3],
                p.su2_shared,
            )?,
            "random_bond_ising" => preset_random_bond_ising(&lattice, p.j1, p.j0, p.field)?,
            other => {
                return Err(CliError::Config(format!(
                    "unknown model preset {other:?}"
                )))
            }
        };
        let model = ModelSpec::with_cap(
            model.rep().clone(),
            model.lattice().clone(),
            model.terms().to_vec(),
            model.sign(),
            self.dim_cap,
        )?;
        model.hilbert_dim()?;
        Ok(model)
    }

    /// The term measured or probed: the configured one, or the first term
    /// carrying disorder.
    pub fn resolve_term<'m>(&self, model: &'m ModelSpec) -> Result<(usize, &'m str)> {
        if let Some(label) = &self.term {
            let (ti, t) = model.term(label)?;
            return Ok((ti, t.label.as_str()));
        }
        let ti = model
            .terms()
            .iter()
            .position(|t| t.j1 != 0.0)
            .unwrap_or(0);
        Ok((ti, model.terms()[ti].label.as_str()))
    }

    /// Canonical JSON of the full resolved config (embedded in every record).
    pub fn canonical_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| CliError::Serde(e.to_string()))
    }

    /// First 16 hex chars of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> Result<String> {
        let json = self.canonical_json()?;
        let digest = Sha256::digest(json.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(hex[..16].to_string())
    }

    pub fn out_path(&self, subcommand: &str) -> PathBuf {
        match &self.out {
            Some(p) => PathBuf::from(p),
            None => PathBuf::from(format!(
                "spinlab_{subcommand}.{}",
                self.format.extension()
            )),
        }
    }
}

/// Command-line overrides; every flag beats the corresponding file value.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file (unknown keys are errors).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model preset name.
    #[arg(long)]
    pub model: Option<String>,
    /// Chain lengths: "2,3,4" or "2..8" (inclusive).
    #[arg(long = "l-grid")]
    pub l_grid: Option<String>,
    /// Inverse temperatures: "0.5,1,2".
    #[arg(long = "beta-grid")]
    pub beta_grid: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Gauss–Hermite order for exact disorder averages.
    #[arg(long = "quadrature-order")]
    pub quadrature_order: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format: csv or jsonl.
    #[arg(long)]
    pub format: Option<String>,
    /// Output path.
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads (0 = default pool).
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn parse_u32_grid(s: &str) -> Result<Vec<u32>> {
    let bad = |s: &str| CliError::Config(format!("cannot parse L grid {s:?}; use \"2,3,4\" or \"2..8\""));
    if let Some((a, b)) = s.split_once("..") {
        let lo: u32 = a.trim().parse().map_err(|_| bad(s))?;
        let hi: u32 = b.trim().parse().map_err(|_| bad(s))?;
        if lo > hi {
            return Err(bad(s));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|_| bad(s)))
        .collect()
}

fn parse_f64_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("cannot parse grid value {p:?}")))
        })
        .collect()
}

/// File (if given) + flag overrides → validated RunConfig.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            toml::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(m) = &args.model {
        cfg.model = m.clone();
    }
    if let Some(g) = &args.l_grid {
        cfg.l_grid = parse_u32_grid(g)?;
    }
    if let Some(g) = &args.beta_grid {
        cfg.beta_grid = parse_f64_grid(g)?;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = args.quadrature_order {
        cfg.quadrature_order = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(f) = &args.format {
        cfg.format = f.parse()?;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}
