//! Dense linear algebra kernels.
//!
//! nalgebra matrices are the working representation everywhere; the Hermitian
//! eigensolve and large matrix products are routed through faer, which is an
//! order of magnitude faster at the dimensions we care about. faer is pinned
//! to sequential mode so every result is independent of thread count.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{Error, Result};

static FAER_SEQ: OnceLock<()> = OnceLock::new();

fn init_faer() {
    FAER_SEQ.get_or_init(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

fn to_faer(m: &DMatrix<Complex64>) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        faer::c64::new(z.re, z.im)
    })
}

fn from_faer(m: faer::MatRef<'_, faer::c64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        Complex64::new(z.re, z.im)
    })
}

/// Largest entrywise deviation from Hermiticity, max_ij |A_ij − conj(A_ji)|.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut defect = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > defect {
                defect = d;
            }
        }
    }
    defect
}

/// Largest entry magnitude.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// acc += c · op, elementwise over the raw storage.
pub fn add_scaled(acc: &mut DMatrix<Complex64>, op: &DMatrix<Complex64>, c: f64) {
    debug_assert_eq!(acc.shape(), op.shape());
    for (a, o) in acc.as_mut_slice().iter_mut().zip(op.as_slice()) {
        *a += c * o;
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
pub fn eigh(h: &DMatrix<Complex64>) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    init_faer();
    let m = to_faer(h);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolve failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    // faer returns ascending eigenvalues; enforce the ordering regardless
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let evals = DVector::from_iterator(n, idx.iter().map(|&k| vals[k]));
    let evecs = DMatrix::from_fn(n, n, |i, j| {
        let z = u[(i, idx[j])];
        Complex64::new(z.re, z.im)
    });
    Ok((evals, evecs))
}

/// Matrix product through faer.
pub fn matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    init_faer();
    let fa = to_faer(a);
    let fb = to_faer(b);
    let fc = &fa * &fb;
    from_faer(fc.as_ref())
}

/// V† A V, the congruence transform into an eigenbasis.
pub fn conj_transform(v: &DMatrix<Complex64>, a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let av = matmul(a, v);
    matmul(&v.adjoint(), &av)
}

/// 1 ⊗ … ⊗ op ⊗ … ⊗ 1 with `op` (d×d) in Kronecker slot `slot` of `n_slots`
/// equal-dimension slots, slot 0 leftmost (slowest index). Built by direct
/// block placement, skipping zero entries of `op`.
pub fn kron_embed(
    op: &DMatrix<Complex64>,
    slot: usize,
    n_slots: usize,
    slot_dim: usize,
) -> DMatrix<Complex64> {
    assert_eq!(op.nrows(), slot_dim, "kron_embed operator dimension");
    assert!(slot < n_slots, "kron_embed slot index");
    let left = slot_dim.pow(slot as u32);
    let right = slot_dim.pow((n_slots - slot - 1) as u32);
    let dim = left * slot_dim * right;
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for bl in 0..left {
        for (i, j) in (0..slot_dim).flat_map(|i| (0..slot_dim).map(move |j| (i, j))) {
            let v = op[(i, j)];
            if v == Complex64::ZERO {
                continue;
            }
            let row_base = (bl * slot_dim + i) * right;
            let col_base = (bl * slot_dim + j) * right;
            for br in 0..right {
                out[(row_base + br, col_base + br)] = v;
            }
        }
    }
    out
}

/// Fixed-order pairwise summation; deterministic and far more accurate than a
/// running sum on long inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let re: f64 = rng.random::<f64>() - 0.5;
                let im: f64 = if i == j { 0.0 } else { rng.random::<f64>() - 0.5 };
                m[(i, j)] = Complex64::new(re, im);
                m[(j, i)] = Complex64::new(re, -im);
            }
        }
        m
    }

    #[test]
    fn eigh_reconstructs_and_is_orthonormal() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &n in &[1usize, 2, 5, 16, 40] {
            let h = random_hermitian(n, &mut rng);
            let (e, v) = eigh(&h).unwrap();
            // ascending
            for k in 1..n {
                assert!(e[k] >= e[k - 1]);
            }
            // reconstruction
            let mut rec = DMatrix::zeros(n, n);
            for k in 0..n {
                let col = v.column(k);
                for i in 0..n {
                    for j in 0..n {
                        rec[(i, j)] += e[k] * col[i] * col[j].conj();
                    }
                }
            }
            let scale = max_abs(&h).max(1.0);
            assert!(max_abs(&(rec - &h)) <= 1e-10 * scale, "reconstruction at n={n}");
            // orthonormality
            let gram = v.adjoint() * &v;
            let eye = DMatrix::<Complex64>::identity(n, n);
            assert!(max_abs(&(gram - eye)) <= 1e-10);
        }
    }

    #[test]
    fn matmul_matches_nalgebra() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let a = random_hermitian(17, &mut rng);
        let b = random_hermitian(17, &mut rng);
        let fast = matmul(&a, &b);
        let slow = &a * &b;
        assert!(max_abs(&(fast - slow)) <= 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_exact_on_ill_conditioned_input() {
        // alternating large/small terms; compare against Kahan summation
        let xs: Vec<f64> = (0..10_000)
            .map(|i| if i % 2 == 0 { 1e8 } else { 1.0 / (i as f64 + 1.0) })
            .collect();
        let pw = pairwise_sum(&xs);
        let mut kahan = 0.0f64;
        let mut c = 0.0f64;
        for &x in &xs {
            let y = x - c;
            let t = kahan + y;
            c = (t - kahan) - y;
            kahan = t;
        }
        assert!((pw - kahan).abs() <= 1e-6 * kahan.abs());
    }

    #[test]
    fn hermitian_defect_detects_asymmetry() {
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 1e-3);
        assert!(hermitian_defect(&m) > 5e-4);
    }
}
