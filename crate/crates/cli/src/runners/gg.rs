//! Overlap identity checks: the disorder integration-by-parts relation that
//! ties the centered energy–overlap correlation E⟨Δh f⟩ to Duhamel and
//! overlap terms on one extra replica.
//!
//! Small systems whose active coupling count fits a tensor quadrature grid
//! are averaged exactly (the identity then closes to quadrature accuracy);
//! larger systems fall back to Monte Carlo with jackknife error bars.

use spinlab_core::disorder::{
    gauss_hermite_vec_over_model, jackknife, mc_samples, sample_disorder, GaussHermite,
    MAX_QUADRATURE_DIMS,
};
use spinlab_core::model::{ModelOperators, ModelSpec};
use spinlab_core::replica::{
    gg_identity_sides, GgComponents, OverlapMonomial, SampleCtx, GG_COMPONENT_WIDTH,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::{GgRecord, Meta};

/// Hard ceiling on tensor-grid evaluations per (L, β, f) point.
const MAX_QUADRATURE_EVALS: f64 = 2.0e6;

#[derive(Debug)]
pub struct GgResult {
    pub records: Vec<GgRecord>,
}

fn f_set(term: &str) -> Vec<(&'static str, OverlapMonomial, usize)> {
    vec![
        ("1", OverlapMonomial::one(), 1),
        ("R12", OverlapMonomial::overlap(term, 1, 2), 2),
        ("R23", OverlapMonomial::overlap(term, 2, 3), 3),
    ]
}

fn active_slot_count(model: &ModelSpec) -> usize {
    model
        .draw_slots()
        .iter()
        .filter(|k| model.slot_is_active(k))
        .count()
}

pub fn run_gg(cfg: &RunConfig) -> Result<GgResult> {
    let meta = Meta::from_config(cfg)?;
    let grid = if cfg.quadrature_order > 0 {
        Some(GaussHermite::new(cfg.quadrature_order)?)
    } else {
        None
    };
    let mut records = Vec::new();
    for &l in &cfg.l_grid {
        let model = cfg.build_model(l)?;
        let ops = ModelOperators::build(&model)?;
        let (ti, term) = cfg.resolve_term(&model)?;
        let j1 = model.terms()[ti].j1;
        let volume = model.lattice().volume();
        let slots = active_slot_count(&model);
        let quadrature_feasible = grid.is_some()
            && slots <= MAX_QUADRATURE_DIMS
            && (cfg.quadrature_order as f64).powi(slots as i32) <= MAX_QUADRATURE_EVALS;
        if !quadrature_feasible && cfg.samples < 2 {
            return Err(CliError::Config(format!(
                "L = {l} has {slots} active couplings — beyond exact quadrature \
                 (max {MAX_QUADRATURE_DIMS} dims, {MAX_QUADRATURE_EVALS:.0} evals); \
                 set samples ≥ 2 for the Monte Carlo branch"
            )));
        }
        for &beta in &cfg.beta_grid {
            for (label, f, n) in f_set(term) {
                let term = term.to_string();
                let rec = if quadrature_feasible {
                    let grid = grid.as_ref().expect("grid exists when feasible");
                    let means =
                        gauss_hermite_vec_over_model(&model, grid, GG_COMPONENT_WIDTH, |sample| {
                            let ctx = SampleCtx::new(&model, &ops, sample, beta)?;
                            Ok(ctx.gg_components(&term, &f, n)?.to_vec())
                        })?;
                    let avg = GgComponents::from_slice(&means)?;
                    let (lhs, rhs) = gg_identity_sides(model.sign(), beta, j1, n, &avg);
                    GgRecord {
                        schema_version: meta.schema_version,
                        version: meta.version.clone(),
                        config_hash: meta.config_hash.clone(),
                        config_json: meta.config_json.clone(),
                        seed: meta.seed,
                        model: cfg.model.clone(),
                        probe_term: term,
                        branch: "quadrature".into(),
                        l,
                        volume,
                        beta,
                        f_label: label.into(),
                        n_replicas: n as u32,
                        points: cfg.quadrature_order as u64,
                        lhs_re: lhs.re,
                        lhs_im: lhs.im,
                        rhs_re: rhs.re,
                        rhs_im: rhs.im,
                        residual_norm: (lhs - rhs).norm(),
                        residual_stderr: None,
                        dhf_norm: lhs.norm(),
                        dhf_stderr: None,
                    }
                } else {
                    let mat = mc_samples(cfg.samples as usize, cfg.jobs, |i| {
                        let sample = sample_disorder(&model, cfg.seed, i);
                        let ctx = SampleCtx::new(&model, &ops, &sample, beta)?;
                        Ok(ctx.gg_components(&term, &f, n)?.to_vec())
                    })?;
                    let sides = |m: &[f64]| {
                        let avg = GgComponents::from_slice(m).expect("component width");
                        gg_identity_sides(model.sign(), beta, j1, n, &avg)
                    };
                    let residual = jackknife(&mat, |m| {
                        let (lhs, rhs) = sides(m);
                        (lhs - rhs).norm()
                    })?;
                    let dhf = jackknife(&mat, |m| sides(m).0.norm())?;
                    let (lhs, rhs) = sides(&mat.column_means());
                    GgRecord {
                        schema_version: meta.schema_version,
                        version: meta.version.clone(),
                        config_hash: meta.config_hash.clone(),
                        config_json: meta.config_json.clone(),
                        seed: meta.seed,
                        model: cfg.model.clone(),
                        probe_term: term,
                        branch: "mc".into(),
                        l,
                        volume,
                        beta,
                        f_label: label.into(),
                        n_replicas: n as u32,
                        points: cfg.samples,
                        lhs_re: lhs.re,
                        lhs_im: lhs.im,
                        rhs_re: rhs.re,
                        rhs_im: rhs.im,
                        residual_norm: residual.mean,
                        residual_stderr: Some(residual.stderr),
                        dhf_norm: dhf.mean,
                        dhf_stderr: Some(dhf.stderr),
                    }
                };
                records.push(rec);
            }
        }
    }
    Ok(GgResult { records })
}
