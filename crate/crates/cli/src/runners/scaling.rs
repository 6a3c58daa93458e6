//! Self-averaging study: how the disorder variance of the free energy
//! density and of term densities shrinks with system size, against the
//! deterministic concentration bounds.

use spinlab_core::disorder::{
    delta_h_duhamel_bound, delta_m_duhamel_bound, free_energy_variance_bound, jackknife,
    mc_samples, mean_and_stderr, sample_disorder,
};
use spinlab_core::gibbs::GibbsContext;
use spinlab_core::model::assemble_from_ops;
use spinlab_core::model::ModelOperators;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::{Meta, ScalingRecord, SlopeFit};

/// Per-sample component layout (see `sample_row`).
const ROW_WIDTH: usize = 16;

#[derive(Debug)]
pub struct ScalingResult {
    pub records: Vec<ScalingRecord>,
    /// One weighted log–log fit of `var_psi` against the volume per β,
    /// present whenever at least three sizes produced positive variances.
    pub fits: Vec<SlopeFit>,
}

/// Every estimate with a rigorous bound must sit below it, with 4·stderr of
/// Monte Carlo slack. A violation is a numerical failure, not a config
/// problem.
fn check_bounds(r: &ScalingRecord) -> Result<()> {
    let mut checks = vec![("var_psi", r.var_psi, r.var_psi_stderr, r.bound_free)];
    if let Some(b) = r.bound_dm_duhamel {
        checks.push(("dm_duhamel", r.dm_duhamel, r.dm_duhamel_stderr, b));
    }
    if let Some(b) = r.bound_dh_duhamel {
        checks.push(("dh_duhamel", r.dh_duhamel, r.dh_duhamel_stderr, b));
    }
    for (name, value, stderr, bound) in checks {
        let slack = if stderr.is_finite() { 4.0 * stderr } else { 0.0 };
        if value > bound + slack {
            return Err(CliError::Core(spinlab_core::Error::Numerical(format!(
                "{name} = {value:.6e} exceeds its bound {bound:.6e} beyond 4·stderr \
                 ({stderr:.2e}) at L = {}, beta = {}",
                r.l, r.beta
            ))));
        }
    }
    Ok(())
}

pub fn run_scaling(cfg: &RunConfig) -> Result<ScalingResult> {
    if cfg.samples < 2 {
        return Err(CliError::Config(
            "scaling is a Monte Carlo study; set samples ≥ 2".into(),
        ));
    }
    let meta = Meta::from_config(cfg)?;
    let mut records = Vec::new();
    for &l in &cfg.l_grid {
        let model = cfg.build_model(l)?;
        let ops = ModelOperators::build(&model)?;
        let (ti, term) = cfg.resolve_term(&model)?;
        let volume = model.lattice().volume();
        let m_op = ops.term_density(ti);
        for &beta in &cfg.beta_grid {
            let mat = mc_samples(cfg.samples as usize, cfg.jobs, |i| {
                let sample = sample_disorder(&model, cfg.seed, i);
                let h = assemble_from_ops(&model, &ops, &sample)?;
                let ctx = GibbsContext::new(&h, beta)?;
                let h_op = ops.term_random_density(&model, ti, &sample)?;
                let psi = ctx.free_energy_density(volume);
                let m_mean = ctx.expectation(&m_op);
                let h_mean = ctx.expectation(&h_op);
                let m_h = ctx.harris_terms(&m_op);
                let h_h = ctx.harris_terms(&h_op);
                Ok(vec![
                    psi,
                    psi * psi,
                    m_mean,
                    m_mean * m_mean,
                    m_h.second_moment,
                    m_h.duhamel - m_mean * m_mean,
                    m_h.second_moment - m_mean * m_mean,
                    h_mean,
                    h_mean * h_mean,
                    h_h.second_moment,
                    h_h.duhamel - h_mean * h_mean,
                    h_h.second_moment - h_mean * h_mean,
                    m_h.second_moment - m_h.duhamel,
                    m_h.upper - m_h.second_moment,
                    h_h.second_moment - h_h.duhamel,
                    h_h.upper - h_h.second_moment,
                ])
            })?;
            debug_assert_eq!(mat.width(), ROW_WIDTH);
            let var_psi = jackknife(&mat, |m| m[1] - m[0] * m[0])?;
            let var_m = jackknife(&mat, |m| m[4] - m[2] * m[2])?;
            let var_h = jackknife(&mat, |m| m[9] - m[7] * m[7])?;
            let dm_duh = mean_and_stderr(&mat.column(5));
            let dh_duh = mean_and_stderr(&mat.column(10));
            let dm_th = mean_and_stderr(&mat.column(6));
            let dh_th = mean_and_stderr(&mat.column(11));
            let col_min = |j: usize| {
                mat.column(j)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            };
            records.push(ScalingRecord {
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
                var_psi: var_psi.mean,
                var_psi_stderr: var_psi.stderr,
                bound_free: free_energy_variance_bound(&model, beta),
                dm_duhamel: dm_duh.mean,
                dm_duhamel_stderr: dm_duh.stderr,
                bound_dm_duhamel: delta_m_duhamel_bound(&model, beta, term).ok(),
                dh_duhamel: dh_duh.mean,
                dh_duhamel_stderr: dh_duh.stderr,
                bound_dh_duhamel: delta_h_duhamel_bound(&model, beta, term).ok(),
                var_m_total: var_m.mean,
                var_m_total_stderr: var_m.stderr,
                var_h_total: var_h.mean,
                var_h_total_stderr: var_h.stderr,
                dm_sq_thermal: dm_th.mean,
                dm_sq_thermal_stderr: dm_th.stderr,
                dh_sq_thermal: dh_th.mean,
                dh_sq_thermal_stderr: dh_th.stderr,
                harris_m_slack_lower: col_min(12),
                harris_m_slack_upper: col_min(13),
                harris_h_slack_lower: col_min(14),
                harris_h_slack_upper: col_min(15),
            });
            check_bounds(records.last().expect("just pushed"))?;
        }
    }
    let fits = slope_fits(&records);
    Ok(ScalingResult { records, fits })
}

/// Weighted least-squares fits of ln var_psi against ln volume, one per β.
fn slope_fits(records: &[ScalingRecord]) -> Vec<SlopeFit> {
    let mut betas: Vec<f64> = records.iter().map(|r| r.beta).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    betas
        .iter()
        .filter_map(|&beta| {
            let pts: Vec<(f64, f64, f64)> = records
                .iter()
                .filter(|r| r.beta == beta && r.var_psi > 0.0 && r.var_psi_stderr.is_finite())
                .map(|r| (r.volume as f64, r.var_psi, r.var_psi_stderr))
                .collect();
            wls_loglog(beta, &pts)
        })
        .collect()
}

/// WLS on (ln v, ln var) with per-point σ propagated from the variance
/// stderr; the slope error is inflated by the reduced χ² when the scatter
/// exceeds the quoted errors. Needs at least three points.
pub fn wls_loglog(beta: f64, points: &[(f64, f64, f64)]) -> Option<SlopeFit> {
    if points.len() < 3 {
        return None;
    }
    let mut s = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let data: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(v, var, err)| {
            let sigma = (err / var).max(1e-12); // δ(ln var) = δvar / var
            (v.ln(), var.ln(), 1.0 / (sigma * sigma))
        })
        .collect();
    for &(x, y, w) in &data {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = s * sxx - sx * sx;
    if delta <= 0.0 {
        return None;
    }
    let slope = (s * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let mut var_slope = s / delta;
    let dof = points.len() as f64 - 2.0;
    if dof > 0.0 {
        let chi2: f64 = data
            .iter()
            .map(|&(x, y, w)| {
                let r = y - intercept - slope * x;
                w * r * r
            })
            .sum();
        let chi2_red = chi2 / dof;
        if chi2_red > 1.0 {
            var_slope *= chi2_red;
        }
    }
    Some(SlopeFit {
        beta,
        n_points: points.len(),
        slope,
        slope_stderr: var_slope.sqrt(),
        intercept,
    })
}
