//! Classical overlap variance comparison: in the commuting (diagonal) case
//! the total, thermal, and disorder variances of the bond overlap obey an
//! asymptotic 2:3:6 proportion, so the pairwise gaps between 2·v_Δ, 3·v_δ,
//! and 6·v_m close as the chain grows. The decomposition
//! v_Δ = v_δ + v_m is exact at every size and checked to rounding.

use spinlab_core::disorder::{jackknife, mc_samples, mean_and_stderr, sample_disorder};
use spinlab_core::model::ModelDiagonals;
use spinlab_core::replica::classical_overlap_stats;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::{ClassicalRecord, Meta};

#[derive(Debug)]
pub struct ClassicalResult {
    pub records: Vec<ClassicalRecord>,
}

/// Per-sample components: [⟨R⟩, ⟨R²⟩, ⟨R⟩²].
fn v_delta(m: &[f64]) -> f64 {
    m[1] - m[0] * m[0]
}
fn v_small(m: &[f64]) -> f64 {
    m[1] - m[2]
}
fn v_mean(m: &[f64]) -> f64 {
    m[2] - m[0] * m[0]
}

pub fn run_classical(cfg: &RunConfig) -> Result<ClassicalResult> {
    if cfg.samples < 2 {
        return Err(CliError::Config(
            "the classical study is Monte Carlo; set samples ≥ 2".into(),
        ));
    }
    let meta = Meta::from_config(cfg)?;
    let mut records = Vec::new();
    for &l in &cfg.l_grid {
        let model = cfg.build_model(l)?;
        if !model.is_diagonal() {
            return Err(CliError::Config(format!(
                "model {:?} is not diagonal; the classical study needs commuting terms \
                 (use random_bond_ising)",
                cfg.model
            )));
        }
        let diags = ModelDiagonals::build(&model)?;
        let (_, term) = cfg.resolve_term(&model)?;
        let volume = model.lattice().volume();
        for &beta in &cfg.beta_grid {
            let mat = mc_samples(cfg.samples as usize, cfg.jobs, |i| {
                let sample = sample_disorder(&model, cfg.seed, i);
                let stats = classical_overlap_stats(&model, &diags, &sample, beta, term)?;
                Ok(vec![
                    stats.r_mean,
                    stats.r2_mean,
                    stats.r_mean * stats.r_mean,
                ])
            })?;
            let vd = jackknife(&mat, v_delta)?;
            let vs = jackknife(&mat, v_small)?;
            let vm = jackknife(&mat, v_mean)?;
            let gap_ds = jackknife(&mat, |m| 2.0 * v_delta(m) - 3.0 * v_small(m))?;
            let gap_sm = jackknife(&mat, |m| 3.0 * v_small(m) - 6.0 * v_mean(m))?;
            let gap_dm = jackknife(&mat, |m| 2.0 * v_delta(m) - 6.0 * v_mean(m))?;
            // v_small is a plain per-sample average, but the jackknife point
            // estimate coincides with it; keep one code path.
            debug_assert!(
                (vs.mean - mean_and_stderr(&mat.column(1)).mean
                    + mean_and_stderr(&mat.column(2)).mean)
                    .abs()
                    < 1e-12
            );
            let means = mat.column_means();
            records.push(ClassicalRecord {
                schema_version: meta.schema_version,
                version: meta.version.clone(),
                config_hash: meta.config_hash.clone(),
                config_json: meta.config_json.clone(),
                seed: meta.seed,
                model: cfg.model.clone(),
                term: term.to_string(),
                l,
                volume,
                beta,
                samples: cfg.samples,
                v_delta: vd.mean,
                v_delta_stderr: vd.stderr,
                v_small: vs.mean,
                v_small_stderr: vs.stderr,
                v_mean: vm.mean,
                v_mean_stderr: vm.stderr,
                two_v_delta: 2.0 * vd.mean,
                three_v_small: 3.0 * vs.mean,
                six_v_mean: 6.0 * vm.mean,
                gap_ds: gap_ds.mean.abs(),
                gap_ds_stderr: gap_ds.stderr,
                gap_sm: gap_sm.mean.abs(),
                gap_sm_stderr: gap_sm.stderr,
                gap_dm: gap_dm.mean.abs(),
                gap_dm_stderr: gap_dm.stderr,
                decomposition_residual: v_delta(&means) - v_small(&means) - v_mean(&means),
            });
        }
    }
    Ok(ClassicalResult { records })
}
