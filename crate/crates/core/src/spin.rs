//! Spin-S operator matrices, lattice geometry, interaction-range families,
//! and embedded product operators.
//!
//! Conventions fixed here and relied on by everything downstream:
//! - Single-spin basis |S⟩, |S−1⟩, …, |−S⟩, so S³ = diag(S, S−1, …, −S).
//! - The many-body basis is the Kronecker chain over sites in order: site 1
//!   is the leftmost (slowest-varying) tensor factor. Embedding an operator
//!   at site 1 of a two-site spin-1/2 chain along axis 3 therefore gives
//!   diag(1/2, 1/2, −1/2, −1/2).
//! - Sites of Λ_L = [1,L]^d ∩ Z^d are ordered lexicographically by
//!   coordinate, last coordinate varying fastest.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Hard ceiling on Hilbert-space dimension used when no explicit cap is given.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Spin component label.
pub type Axis = usize; // 1, 2, or 3

fn check_axis(axis: Axis) -> Result<()> {
    if (1..=3).contains(&axis) {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("axis must be 1, 2, or 3, got {axis}")))
    }
}

/// Dense complex matrix certified Hermitian at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    mat: DMatrix<Complex64>,
}

impl OperatorMatrix {
    /// Hermiticity tolerance for certification, relative to the largest entry.
    pub const HERM_TOL: f64 = 1e-12;

    /// Certify and wrap a matrix; rejects non-square or non-Hermitian input.
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        let scale = linalg::max_abs(&mat).max(1.0);
        let defect = linalg::hermitian_defect(&mat);
        let tol = Self::HERM_TOL * scale;
        if defect > tol {
            return Err(Error::NotHermitian { defect, tol });
        }
        Ok(Self { mat })
    }

    /// Wrap a matrix known Hermitian by construction (sums and commuting
    /// products of certified operators). Debug builds still verify.
    pub(crate) fn new_unchecked(mat: DMatrix<Complex64>) -> Self {
        debug_assert!(
            linalg::hermitian_defect(&mat) <= Self::HERM_TOL * linalg::max_abs(&mat).max(1.0),
            "internal operator lost Hermiticity"
        );
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                if i != j && self.mat[(i, j)] != Complex64::ZERO {
                    return false;
                }
            }
        }
        true
    }

    /// Operator norm (largest |eigenvalue|), by eigensolve.
    pub fn operator_norm(&self) -> Result<f64> {
        let (evals, _) = linalg::eigh(&self.mat)?;
        Ok(evals.iter().fold(0.0f64, |m, &e| m.max(e.abs())))
    }
}

/// The three generators of the (2S+1)-dimensional irreducible representation.
#[derive(Debug, Clone)]
pub struct SpinRep {
    two_s: u32,
    matrices: [DMatrix<Complex64>; 3],
}

impl SpinRep {
    pub fn s(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// Generator along `axis` (1, 2, or 3).
    pub fn matrix(&self, axis: Axis) -> &DMatrix<Complex64> {
        &self.matrices[axis - 1]
    }
}

/// Build the standard spin-S representation from the ladder construction.
///
/// `s` must be a positive half-integer; magnitudes above 2 are rejected (the
/// toolkit targets desk-scale dense spectra, and nothing downstream needs
/// them).
pub fn build_spin_rep(s: f64) -> Result<SpinRep> {
    let two_s = 2.0 * s;
    if !(two_s.fract().abs() < 1e-9 && s > 0.0 && s <= 2.0) {
        return Err(Error::InvalidSpin(s));
    }
    let two_s = two_s.round() as u32;
    let s = two_s as f64 / 2.0;
    let dim = two_s as usize + 1;
    // m-values descending: m_k = S − k
    let m = |k: usize| s - k as f64;
    let mut sp = DMatrix::<Complex64>::zeros(dim, dim); // S⁺
    for k in 1..dim {
        // S⁺|m_k⟩ = sqrt(S(S+1) − m_k(m_k+1)) |m_{k−1}⟩
        let c = (s * (s + 1.0) - m(k) * (m(k) + 1.0)).sqrt();
        sp[(k - 1, k)] = Complex64::new(c, 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm).scale(0.5);
    let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
    let sz = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(m(i), 0.0)
        } else {
            Complex64::ZERO
        }
    });
    Ok(SpinRep {
        two_s,
        matrices: [sx, sy, sz],
    })
}

/// Boundary condition of the cubic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Λ_L = [1,L]^d ∩ Z^d with a fixed lexicographic site ordering.
#[derive(Debug, Clone)]
pub struct LatticeGeometry {
    d: u32,
    l: u32,
    boundary: Boundary,
    sites: Vec<Vec<u32>>,
}

impl LatticeGeometry {
    pub fn new(d: u32, l: u32, boundary: Boundary) -> Result<Self> {
        if d == 0 || l == 0 {
            return Err(Error::InvalidModel(format!(
                "lattice needs positive dimension and size, got d={d}, L={l}"
            )));
        }
        let n = (l as usize).checked_pow(d).ok_or(Error::DimensionCap {
            dim: usize::MAX,
            cap: DEFAULT_DIM_CAP,
        })?;
        let mut sites = Vec::with_capacity(n);
        let mut coord = vec![1u32; d as usize];
        loop {
            sites.push(coord.clone());
            // increment with the last coordinate varying fastest
            let mut k = d as usize;
            loop {
                if k == 0 {
                    return Ok(Self { d, l, boundary, sites });
                }
                k -= 1;
                if coord[k] < l {
                    coord[k] += 1;
                    break;
                }
                coord[k] = 1;
            }
        }
    }

    pub fn dimension(&self) -> u32 {
        self.d
    }

    pub fn linear_size(&self) -> u32 {
        self.l
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of sites |Λ_L| = L^d.
    pub fn volume(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Vec<u32>] {
        &self.sites
    }

    /// Index of a coordinate tuple under the fixed ordering.
    pub fn site_index(&self, coord: &[u32]) -> Option<usize> {
        if coord.len() != self.d as usize || coord.iter().any(|&c| c < 1 || c > self.l) {
            return None;
        }
        let mut idx = 0usize;
        for &c in coord {
            idx = idx * self.l as usize + (c as usize - 1);
        }
        Some(idx)
    }
}

/// Interaction-range patterns supported by [`build_range_family`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePattern {
    /// All single sites.
    Sites,
    /// Nearest-neighbor pairs along each lattice direction.
    NearestNeighborBonds,
    /// Distance-2 pairs along each lattice direction.
    NextNearestBonds,
    /// Elementary squares (d ≥ 2 only).
    Plaquettes,
}

/// A family C_L of same-shape interaction ranges, each a set of site indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeFamily {
    arity: usize,
    ranges: Vec<Vec<usize>>,
}

impl RangeFamily {
    /// Number of sites per range (n_a).
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// |C_L|.
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn ranges(&self) -> &[Vec<usize>] {
        &self.ranges
    }
}

/// Enumerate the translates of one reference shape over the lattice, in a
/// deterministic order (shape anchors in site order, directions in coordinate
/// order).
pub fn build_range_family(lattice: &LatticeGeometry, pattern: RangePattern) -> Result<RangeFamily> {
    let d = lattice.dimension() as usize;
    let l = lattice.linear_size();
    let periodic = lattice.boundary() == Boundary::Periodic;
    let pattern_name = match pattern {
        RangePattern::Sites => "sites",
        RangePattern::NearestNeighborBonds => "nearest_neighbor_bonds",
        RangePattern::NextNearestBonds => "next_nearest_bonds",
        RangePattern::Plaquettes => "plaquettes",
    };

    // step the coordinate `axis` by `shift`, respecting the boundary
    let stepped = |coord: &[u32], axis: usize, shift: u32| -> Option<Vec<u32>> {
        let mut c = coord.to_vec();
        let raw = c[axis] + shift;
        if raw <= l {
            c[axis] = raw;
            Some(c)
        } else if periodic {
            // wrap; reject wraps that alias the anchor on tiny rings
            let wrapped = (raw - 1) % l + 1;
            if wrapped == coord[axis] {
                return None;
            }
            c[axis] = wrapped;
            Some(c)
        } else {
            None
        }
    };

    let mut ranges: Vec<Vec<usize>> = Vec::new();
    match pattern {
        RangePattern::Sites => {
            ranges.extend((0..lattice.volume()).map(|i| vec![i]));
        }
        RangePattern::NearestNeighborBonds | RangePattern::NextNearestBonds => {
            let shift = if pattern == RangePattern::NearestNeighborBonds { 1 } else { 2 };
            if l <= shift || (periodic && l <= 2 * shift - 1) {
                return Err(Error::LatticeTooSmall {
                    pattern: pattern_name,
                    min_l: shift + 1,
                    l,
                });
            }
            for site in lattice.sites() {
                for axis in 0..d {
                    if let Some(other) = stepped(site, axis, shift) {
                        let a = lattice.site_index(site).unwrap();
                        let b = lattice.site_index(&other).unwrap();
                        if a == b {
                            continue;
                        }
                        let mut pair = vec![a, b];
                        pair.sort_unstable();
                        if periodic && ranges.contains(&pair) {
                            continue; // L=2 rings see each bond from both ends
                        }
                        ranges.push(pair);
                    }
                }
            }
        }
        RangePattern::Plaquettes => {
            if d < 2 {
                return Err(Error::InvalidModel(
                    "plaquettes need lattice dimension ≥ 2".into(),
                ));
            }
            if l < 2 {
                return Err(Error::LatticeTooSmall {
                    pattern: pattern_name,
                    min_l: 2,
                    l,
                });
            }
            for site in lattice.sites() {
                for a1 in 0..d {
                    for a2 in (a1 + 1)..d {
                        let Some(c10) = stepped(site, a1, 1) else { continue };
                        let Some(c01) = stepped(site, a2, 1) else { continue };
                        let Some(c11) = stepped(&c10, a2, 1) else { continue };
                        let mut quad = vec![
                            lattice.site_index(site).unwrap(),
                            lattice.site_index(&c10).unwrap(),
                            lattice.site_index(&c01).unwrap(),
                            lattice.site_index(&c11).unwrap(),
                        ];
                        quad.sort_unstable();
                        quad.dedup();
                        if quad.len() != 4 {
                            continue;
                        }
                        if periodic && ranges.contains(&quad) {
                            continue;
                        }
                        ranges.push(quad);
                    }
                }
            }
        }
    }
    if ranges.is_empty() {
        return Err(Error::LatticeTooSmall {
            pattern: pattern_name,
            min_l: 2,
            l,
        });
    }
    let arity = ranges[0].len();
    debug_assert!(ranges.iter().all(|r| r.len() == arity));
    Ok(RangeFamily { arity, ranges })
}

/// Total Hilbert dimension (2S+1)^N, guarded by `cap`.
pub fn hilbert_dim(rep: &SpinRep, n_sites: usize, cap: usize) -> Result<usize> {
    let mut dim = 1usize;
    for _ in 0..n_sites {
        dim = dim.checked_mul(rep.dim()).ok_or(Error::DimensionCap {
            dim: usize::MAX,
            cap,
        })?;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
    }
    Ok(dim)
}

/// Embed a single-site operator at `site` (0-based index into the lattice
/// ordering) into the N-site product space: 1 ⊗ … ⊗ op ⊗ … ⊗ 1.
fn embed_one(op: &DMatrix<Complex64>, site: usize, n_sites: usize, site_dim: usize) -> DMatrix<Complex64> {
    linalg::kron_embed(op, site, n_sites, site_dim)
}

/// S_x^i on the full lattice Hilbert space. `site` is 0-based.
pub fn embed_site_operator(
    rep: &SpinRep,
    lattice: &LatticeGeometry,
    site: usize,
    axis: Axis,
) -> Result<OperatorMatrix> {
    check_axis(axis)?;
    let n = lattice.volume();
    if site >= n {
        return Err(Error::SiteOutOfRange { site, size: n });
    }
    hilbert_dim(rep, n, DEFAULT_DIM_CAP)?;
    let mat = embed_one(rep.matrix(axis), site, n, rep.dim());
    Ok(OperatorMatrix::new_unchecked(mat))
}

/// S_X^i = Π_{x∈X} S_x^i on the full lattice Hilbert space.
///
/// The factors act on distinct sites, so they commute and the product is
/// Hermitian with operator norm S^|X|.
pub fn range_product_operator(
    rep: &SpinRep,
    lattice: &LatticeGeometry,
    range: &[usize],
    axis: Axis,
) -> Result<OperatorMatrix> {
    check_axis(axis)?;
    if range.is_empty() {
        return Err(Error::EmptyRange);
    }
    let n = lattice.volume();
    for &x in range {
        if x >= n {
            return Err(Error::SiteOutOfRange { site: x, size: n });
        }
    }
    hilbert_dim(rep, n, DEFAULT_DIM_CAP)?;
    let mut acc = embed_one(rep.matrix(axis), range[0], n, rep.dim());
    for &x in &range[1..] {
        let next = embed_one(rep.matrix(axis), x, n, rep.dim());
        acc = linalg::matmul(&acc, &next);
    }
    Ok(OperatorMatrix::new_unchecked(acc))
}

/// Diagonal of S_X^3 as a real vector, computed without building the dense
/// matrix. This is the classical fast path: axis-3 product operators are
/// diagonal in the lattice product basis.
pub fn range_product_diagonal(
    rep: &SpinRep,
    lattice: &LatticeGeometry,
    range: &[usize],
) -> Result<Vec<f64>> {
    if range.is_empty() {
        return Err(Error::EmptyRange);
    }
    let n = lattice.volume();
    for &x in range {
        if x >= n {
            return Err(Error::SiteOutOfRange { site: x, size: n });
        }
    }
    let dim = hilbert_dim(rep, n, DEFAULT_DIM_CAP)?;
    let site_dim = rep.dim();
    let s = rep.s();
    // m-value of local index k is S − k
    let mut out = vec![1.0f64; dim];
    for &x in range {
        let right = site_dim.pow((n - x - 1) as u32);
        for (b, o) in out.iter_mut().enumerate() {
            let k = (b / right) % site_dim;
            *o *= s - k as f64;
        }
    }
    Ok(out)
}
