//! Quenched-disorder sampling, Gaussian quadrature, and estimator statistics.
//!
//! Sampling is counter-based: each (domain, master seed, sample index) triple
//! hashes to an independent ChaCha12 stream, so sample `i` is the same bit
//! pattern no matter which worker evaluates it or in which order. Aggregation
//! uses fixed-order pairwise summation over the index-ordered sample list.
//! Together these make every estimate bitwise independent of the worker
//! count.
//!
//! Disorder averages of smooth low-dimensional functionals are also available
//! through Gauss–Hermite quadrature, which serves as an independent
//! cross-check on the Monte Carlo path (and as the high-precision route for
//! the exact finite-size identities).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gibbs::check_beta;
use crate::linalg::pairwise_sum;
use crate::model::{DisorderSample, DrawKey, ModelSpec};

/// Provenance of one disorder realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub sample_index: u64,
}

/// Independent random stream for (domain, master seed, sample index).
///
/// The domain tag separates draw families that share a sample index — e.g.
/// base couplings versus inter-replica couplings — without any coordination
/// between the consumers.
pub fn stream_rng(domain: &str, master_seed: u64, sample_index: u64) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]); // length separator: "ab"+"c" must differ from "a"+"bc"
    h.update(master_seed.to_le_bytes());
    h.update(sample_index.to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}

/// Standard Gaussian draws for every slot of `model`, in canonical slot
/// order, from the "base" stream of (master seed, index).
pub fn sample_disorder(model: &ModelSpec, master_seed: u64, index: u64) -> DisorderSample {
    let slots = model.draw_slots();
    sample_for_slots("base", &slots, master_seed, index)
}

/// Standard Gaussian draws for an explicit slot list from a named stream.
pub fn sample_for_slots(
    domain: &str,
    slots: &[DrawKey],
    master_seed: u64,
    index: u64,
) -> DisorderSample {
    let mut rng = stream_rng(domain, master_seed, index);
    let mut draws = BTreeMap::new();
    for key in slots {
        let g: f64 = StandardNormal.sample(&mut rng);
        draws.insert(key.clone(), g);
    }
    DisorderSample::new(
        draws,
        Some(SeedSpec {
            master_seed,
            sample_index: index,
        }),
    )
}

// ---------------------------------------------------------------------------
// Gauss–Hermite quadrature
// ---------------------------------------------------------------------------

/// Hard cap on tensor-grid dimensions; beyond this the grid size is
/// impractical and Monte Carlo is the right tool.
pub const MAX_QUADRATURE_DIMS: usize = 4;

/// Gauss–Hermite rule rewritten for the standard normal weight: an order-n
/// rule integrates polynomials of degree ≤ 2n−1 against N(0,1) exactly.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch construction: nodes are eigenvalues of the Jacobi matrix
    /// (off-diagonal √(k/2) for physicists' Hermite), weights the squared
    /// first eigenvector components. Nodes and weights are then rescaled from
    /// the e^{−x²} weight to the standard normal.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 512 {
            return Err(Error::QuadratureOrder(order));
        }
        if order == 1 {
            return Ok(Self {
                nodes: vec![0.0],
                weights: vec![1.0],
            });
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let x = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                // physicists' weight is v0²·√π; dividing by the total mass √π
                // gives the standard-normal weight directly
                (x * std::f64::consts::SQRT_2, v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ f dN(0,1) by the one-dimensional rule.
    pub fn expect_1d<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }

    /// Tensor-grid expectation over `dims` independent standard normals.
    /// The point visit order is lexicographic in the multi-index, and the
    /// accumulation is fixed-order pairwise, so results are deterministic.
    pub fn expect_nd<F>(&self, dims: usize, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        if dims == 0 {
            return f(&[]);
        }
        if dims > MAX_QUADRATURE_DIMS {
            return Err(Error::QuadratureDims {
                dims,
                max: MAX_QUADRATURE_DIMS,
            });
        }
        let n = self.order();
        let total = n.pow(dims as u32);
        let mut point = vec![0.0f64; dims];
        let mut terms = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut weight = 1.0f64;
            for d in (0..dims).rev() {
                let idx = rem % n;
                rem /= n;
                point[d] = self.nodes[idx];
                weight *= self.weights[idx];
            }
            terms.push(weight * f(&point)?);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Vector-valued tensor-grid expectation: every component is integrated
    /// over the same grid with one integrand evaluation per point. `width`
    /// fixes the expected length of each returned vector.
    pub fn expect_nd_vec<F>(&self, dims: usize, width: usize, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        if dims > MAX_QUADRATURE_DIMS {
            return Err(Error::QuadratureDims {
                dims,
                max: MAX_QUADRATURE_DIMS,
            });
        }
        let n = self.order();
        let total = n.pow(dims as u32);
        let mut point = vec![0.0f64; dims];
        let mut terms: Vec<Vec<f64>> = (0..width).map(|_| Vec::with_capacity(total)).collect();
        for flat in 0..total {
            let mut rem = flat;
            let mut weight = 1.0f64;
            for d in (0..dims).rev() {
                let idx = rem % n;
                rem /= n;
                point[d] = self.nodes[idx];
                weight *= self.weights[idx];
            }
            let row = f(&point)?;
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            for (col, v) in terms.iter_mut().zip(&row) {
                col.push(weight * v);
            }
        }
        Ok(terms.iter().map(|col| pairwise_sum(col)).collect())
    }
}

/// Disorder average of `f` over a model's couplings by Gauss–Hermite
/// quadrature.
///
/// Only *active* slots (read by some term with J1 ≠ 0) become quadrature
/// dimensions; inactive slots are pinned to 0. Pinning is exact for any
/// integrand that is constant or linear in the inactive draws — constants
/// because the draws never enter the Hamiltonian, linear terms because a
/// standard normal has mean 0. Integrands quadratic in inactive draws are not
/// supported on this path; use Monte Carlo for those.
pub fn gauss_hermite_over_model<F>(
    model: &ModelSpec,
    grid: &GaussHermite,
    mut f: F,
) -> Result<f64>
where
    F: FnMut(&DisorderSample) -> Result<f64>,
{
    let slots = model.draw_slots();
    let active: Vec<usize> = slots
        .iter()
        .enumerate()
        .filter(|(_, k)| model.slot_is_active(k))
        .map(|(i, _)| i)
        .collect();
    if active.len() > MAX_QUADRATURE_DIMS {
        return Err(Error::QuadratureDims {
            dims: active.len(),
            max: MAX_QUADRATURE_DIMS,
        });
    }
    let mut draws: BTreeMap<DrawKey, f64> = slots.iter().map(|k| (k.clone(), 0.0)).collect();
    grid.expect_nd(active.len(), |point| {
        for (d, &slot_idx) in active.iter().enumerate() {
            *draws.get_mut(&slots[slot_idx]).expect("slot key") = point[d];
        }
        f(&DisorderSample::new(draws.clone(), None))
    })
}

/// Vector-valued version of [`gauss_hermite_over_model`]: all `width`
/// components are averaged in a single sweep over the grid, so integrands
/// that share expensive per-sample state (an eigendecomposition, say) are
/// evaluated once per node.
pub fn gauss_hermite_vec_over_model<F>(
    model: &ModelSpec,
    grid: &GaussHermite,
    width: usize,
    mut f: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&DisorderSample) -> Result<Vec<f64>>,
{
    let slots = model.draw_slots();
    let active: Vec<usize> = slots
        .iter()
        .enumerate()
        .filter(|(_, k)| model.slot_is_active(k))
        .map(|(i, _)| i)
        .collect();
    if active.len() > MAX_QUADRATURE_DIMS {
        return Err(Error::QuadratureDims {
            dims: active.len(),
            max: MAX_QUADRATURE_DIMS,
        });
    }
    let mut draws: BTreeMap<DrawKey, f64> = slots.iter().map(|k| (k.clone(), 0.0)).collect();
    grid.expect_nd_vec(active.len(), width, |point| {
        for (d, &slot_idx) in active.iter().enumerate() {
            *draws.get_mut(&slots[slot_idx]).expect("slot key") = point[d];
        }
        f(&DisorderSample::new(draws.clone(), None))
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo drivers and statistics
// ---------------------------------------------------------------------------

/// Mean, standard error, and sample count of a scalar estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Per-sample component values: `rows[i]` holds the components of sample `i`.
/// All rows have equal width.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    rows: Vec<Vec<f64>>,
    width: usize,
}

impl SampleMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Numerical("ragged sample matrix".into()));
        }
        Ok(Self { rows, width })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Per-column means via fixed-order pairwise summation.
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.width)
            .map(|j| pairwise_sum(&self.column(j)) / self.n() as f64)
            .collect()
    }
}

/// Evaluate `f(i)` for i = 0..n across a worker pool and return the results
/// in index order. Output is bitwise independent of `jobs` because each index
/// owns its random stream and the collection is index-ordered.
pub fn par_map_indices<F>(n: usize, jobs: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let run = || -> Result<Vec<Vec<f64>>> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| f(i))
            .collect::<Result<Vec<_>>>()
    };
    if jobs == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
        pool.install(run)
    }
}

/// Monte Carlo sample matrix: `f` maps a sample index to its component
/// vector, typically by drawing `sample_disorder(model, seed, i)` internally.
pub fn mc_samples<F>(n: usize, jobs: usize, f: F) -> Result<SampleMatrix>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if n == 0 {
        return Err(Error::Numerical("Monte Carlo needs at least one sample".into()));
    }
    SampleMatrix::new(par_map_indices(n, jobs, f)?)
}

/// Sample mean and its standard error (two-pass, pairwise-summed).
pub fn mean_and_stderr(values: &[f64]) -> EstimatorResult {
    let n = values.len();
    if n == 0 {
        return EstimatorResult {
            mean: f64::NAN,
            stderr: f64::NAN,
            n: 0,
        };
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return EstimatorResult {
            mean,
            stderr: f64::NAN,
            n,
        };
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    EstimatorResult {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    }
}

/// Delete-one jackknife for a smooth statistic of the column means.
///
/// `g` receives the component means and returns the statistic; the estimate
/// is `g` at the full-sample means and the standard error comes from the
/// spread of the leave-one-out replicates. For nonlinear `g` (variance
/// combinations, ratios) this is the honest error bar that a naive
/// per-sample stderr cannot provide.
pub fn jackknife<G>(samples: &SampleMatrix, g: G) -> Result<EstimatorResult>
where
    G: Fn(&[f64]) -> f64,
{
    let n = samples.n();
    if n < 2 {
        return Err(Error::Numerical("jackknife needs at least two samples".into()));
    }
    let means = samples.column_means();
    let estimate = g(&means);
    let nf = n as f64;
    let mut replicates = Vec::with_capacity(n);
    let mut loo = vec![0.0f64; samples.width()];
    for row in samples.rows() {
        for (j, m) in means.iter().enumerate() {
            loo[j] = (nf * m - row[j]) / (nf - 1.0);
        }
        replicates.push(g(&loo));
    }
    let rep_mean = pairwise_sum(&replicates) / nf;
    let sq: Vec<f64> = replicates
        .iter()
        .map(|r| (r - rep_mean) * (r - rep_mean))
        .collect();
    let var = (nf - 1.0) / nf * pairwise_sum(&sq);
    Ok(EstimatorResult {
        mean: estimate,
        stderr: var.sqrt(),
        n,
    })
}

/// Gaussian-concentration bound on the variance of the free energy density
/// ψ_L = log Z / |Λ|:
///
///   Var(ψ_L) ≤ Σ_{a : J1^a ≠ 0} (β J1^a K^a)² n_a / |Λ|
///
/// where K^a bounds the operator norm of every O_X^a and n_a is the number
/// of sites per range. Deterministic in the model — no sampling involved.
pub fn free_energy_variance_bound(model: &ModelSpec, beta: f64) -> f64 {
    let volume = model.lattice().volume() as f64;
    let s = model.rep().s();
    model
        .terms()
        .iter()
        .filter(|t| t.j1 != 0.0)
        .map(|t| {
            let k = t.operator_bound(s);
            (beta * t.j1 * k).powi(2) * t.family.arity() as f64 / volume
        })
        .sum()
}

fn active_term_scales(model: &ModelSpec, term: &str, beta: f64) -> Result<(f64, f64)> {
    check_beta(beta)?;
    let (_, t) = model.term(term)?;
    if beta * t.j1 == 0.0 {
        return Err(Error::InvalidModel(format!(
            "the bound for term {term:?} needs βJ1 ≠ 0 (got β = {beta}, J1 = {})",
            t.j1
        )));
    }
    let k = t.operator_bound(model.rep().s());
    let n_vol = (t.family.arity() * model.lattice().volume()) as f64;
    Ok((k / (beta * t.j1).abs(), n_vol))
}

/// Bound on the disorder-averaged Duhamel fluctuation of the term density
/// m^a = (1/|C^a|) Σ_X O_X:   E(δm, δm)_D ≤ (K^a/βJ1^a) √(1/(n_a|Λ|)).
pub fn delta_m_duhamel_bound(model: &ModelSpec, beta: f64, term: &str) -> Result<f64> {
    let (pref, n_vol) = active_term_scales(model, term, beta)?;
    Ok(pref * (1.0 / n_vol).sqrt())
}

/// Bound on the disorder-averaged Duhamel fluctuation of the random energy
/// density h^a = (1/|C^a|) Σ_X g_X O_X:
/// E(δh, δh)_D ≤ (K^a/βJ1^a) (√(6/(n_a|Λ|)) + 1/(n_a|Λ|)).
pub fn delta_h_duhamel_bound(model: &ModelSpec, beta: f64, term: &str) -> Result<f64> {
    let (pref, n_vol) = active_term_scales(model, term, beta)?;
    Ok(pref * ((6.0 / n_vol).sqrt() + 1.0 / n_vol))
}
