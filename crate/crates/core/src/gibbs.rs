//! Gibbs states from exact spectra: partition functions, thermal
//! expectations, Duhamel two-point functions, and the commutator-corrected
//! second-moment bounds.
//!
//! Everything is computed in the eigenbasis of H. Energies are shifted by the
//! ground energy before exponentiation, so partition sums stay finite for any
//! β and any energy offset. The Duhamel kernel is evaluated in a
//! cancellation-free form that is exact in the degenerate limit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum};
use crate::spin::OperatorMatrix;

/// Relative scale for treating two eigenvalues as degenerate inside the
/// Duhamel kernel: |E_m − E_n| below DEGENERACY_RTOL · max(1, spectral width)
/// uses the coincidence value of the kernel.
pub const DEGENERACY_RTOL: f64 = 1e-9;

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Numerical(format!(
            "inverse temperature must be finite and ≥ 0, got {beta}"
        )));
    }
    Ok(())
}

/// The two-energy weight of the Duhamel bracket,
/// W(a,b) = (e^{−βa} − e^{−βb}) / (β(b−a)),  W(a,a) = e^{−βa}.
///
/// Evaluated as e^{−β·min}·(1 − e^{−2x})/(2x) with x = β|b−a|/2, which never
/// overflows and has no cancellation; below x = 1e−3 (and always inside the
/// degeneracy tolerance) it switches to the series
/// e^{−β(a+b)/2}·(1 + x²/6 + x⁴/120), whose truncation error is O(x⁶).
fn duhamel_weight(beta: f64, ea: f64, eb: f64, deg_tol: f64) -> f64 {
    let delta = (eb - ea).abs();
    let x = beta * delta / 2.0;
    if delta <= deg_tol || x <= 1e-3 {
        let x2 = x * x;
        (-beta * (ea + eb) / 2.0).exp() * (1.0 + x2 / 6.0 + x2 * x2 / 120.0)
    } else {
        (-beta * ea.min(eb)).exp() * (1.0 - (-2.0 * x).exp()) / (2.0 * x)
    }
}

/// Gibbs state of a Hermitian matrix at inverse temperature β, with the full
/// eigendecomposition retained.
#[derive(Debug, Clone)]
pub struct GibbsContext {
    evals: DVector<f64>,
    evecs: DMatrix<Complex64>,
    beta: f64,
    ground: f64,
    width: f64,
    /// normalized Boltzmann weights, w_m = e^{−β(E_m − E_0)} / Z_shift
    weights: Vec<f64>,
    log_z: f64,
}

impl GibbsContext {
    pub fn new(h: &OperatorMatrix, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let (evals, evecs) = linalg::eigh(h.matrix())?;
        Self::from_eigen(evals, evecs, beta)
    }

    fn from_eigen(evals: DVector<f64>, evecs: DMatrix<Complex64>, beta: f64) -> Result<Self> {
        let n = evals.len();
        let ground = evals[0];
        let width = evals[n - 1] - ground;
        let boltz: Vec<f64> = evals.iter().map(|e| (-beta * (e - ground)).exp()).collect();
        let z_shift = pairwise_sum(&boltz);
        if !z_shift.is_finite() || z_shift <= 0.0 {
            return Err(Error::Numerical("partition sum is not positive".into()));
        }
        let weights: Vec<f64> = boltz.iter().map(|b| b / z_shift).collect();
        let log_z = z_shift.ln() - beta * ground;
        Ok(Self {
            evals,
            evecs,
            beta,
            ground,
            width,
            weights,
            log_z,
        })
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Eigenvalues of H, ascending, unshifted.
    pub fn evals(&self) -> &DVector<f64> {
        &self.evals
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.evecs
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground
    }

    pub fn spectral_width(&self) -> f64 {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// log Z = log Tr e^{−βH}, reconstructed from the shifted sum.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Pressure-like density ψ = log Z / volume.
    pub fn free_energy_density(&self, volume: usize) -> f64 {
        self.log_z / volume as f64
    }

    /// Operator in the eigenbasis, Ã = V†AV. Transforms are the expensive
    /// step (two matrix products); callers evaluating many functionals of the
    /// same operators should transform once and reuse.
    pub fn transform(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        linalg::conj_transform(&self.evecs, op)
    }

    /// ⟨A⟩ for a transformed operator; complex because Ã need not be
    /// Hermitian (e.g. products of non-commuting observables).
    pub fn expectation_transformed(&self, at: &DMatrix<Complex64>) -> Complex64 {
        let re: Vec<f64> = (0..self.dim()).map(|m| self.weights[m] * at[(m, m)].re).collect();
        let im: Vec<f64> = (0..self.dim()).map(|m| self.weights[m] * at[(m, m)].im).collect();
        Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
    }

    /// ⟨O⟩ for a Hermitian operator.
    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        self.expectation_transformed(&self.transform(op.matrix())).re
    }

    /// (⟨O⟩, ⟨O²⟩) for Hermitian O from a single matrix product: with
    /// C = O·V, ⟨O⟩ = Σ_m w_m Re(v_m†c_m) and ⟨O²⟩ = Σ_m w_m ‖c_m‖².
    pub fn expectation_and_square(&self, op: &OperatorMatrix) -> (f64, f64) {
        let c = linalg::matmul(op.matrix(), &self.evecs);
        let d = self.dim();
        let mut first = Vec::with_capacity(d);
        let mut second = Vec::with_capacity(d);
        for m in 0..d {
            let vm = self.evecs.column(m);
            let cm = c.column(m);
            let dot: Complex64 = vm.iter().zip(cm.iter()).map(|(v, c)| v.conj() * c).sum();
            let norm2: f64 = cm.iter().map(|z| z.norm_sqr()).sum();
            first.push(self.weights[m] * dot.re);
            second.push(self.weights[m] * norm2);
        }
        (pairwise_sum(&first), pairwise_sum(&second))
    }

    /// Energy-pair kernel of the Duhamel bracket, already divided by the
    /// partition sum: K_mn = W(E_m − E_0, E_n − E_0)/Z_shift. Its diagonal
    /// equals the Boltzmann weights. Symmetric, entries in (0, 1].
    pub fn duhamel_kernel(&self) -> DMatrix<f64> {
        let d = self.dim();
        let deg_tol = DEGENERACY_RTOL * self.width.max(1.0);
        let z_shift: f64 = {
            // recover Z_shift from any weight: w_0 = e^{0}/Z at the ground state
            1.0 / self.weights[0]
        };
        let shifted: Vec<f64> = self.evals.iter().map(|e| e - self.ground).collect();
        let mut k = DMatrix::<f64>::zeros(d, d);
        for m in 0..d {
            for n in m..d {
                let w = duhamel_weight(self.beta, shifted[m], shifted[n], deg_tol) / z_shift;
                k[(m, n)] = w;
                k[(n, m)] = w;
            }
        }
        k
    }

    /// Duhamel bracket of two transformed operators against a precomputed
    /// kernel: (A,B)_D = Σ_mn Ã_mn B̃_nm K_mn. Complex in general; real
    /// whenever both operators are Hermitian.
    pub fn duhamel_transformed(
        &self,
        at: &DMatrix<Complex64>,
        bt: &DMatrix<Complex64>,
        kernel: &DMatrix<f64>,
    ) -> Complex64 {
        let d = self.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for m in 0..d {
            for n in 0..d {
                let z = at[(m, n)] * bt[(n, m)] * kernel[(m, n)];
                re.push(z.re);
                im.push(z.im);
            }
        }
        Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
    }

    /// (A,B)_D for Hermitian operators.
    pub fn duhamel_bracket(&self, a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
        let kernel = self.duhamel_kernel();
        let at = self.transform(a.matrix());
        let bt = self.transform(b.matrix());
        self.duhamel_transformed(&at, &bt, &kernel).re
    }

    /// The three members of the commutator-corrected moment inequality for a
    /// Hermitian observable O:
    ///
    ///   (O,O)_D  ≤  ⟨O²⟩  ≤  (O,O)_D + (β/12)·⟨[O,[H,O]]⟩.
    ///
    /// In the eigenbasis all three reduce to O(d²) sums over |Õ_mn|²:
    /// ⟨[O,[H,O]]⟩ = 2 Σ_mn w_m (E_n − E_m)|Õ_mn|².
    pub fn harris_terms(&self, op: &OperatorMatrix) -> HarrisTerms {
        let ot = self.transform(op.matrix());
        let kernel = self.duhamel_kernel();
        let d = self.dim();
        let mut duh = Vec::with_capacity(d * d);
        let mut second = Vec::with_capacity(d * d);
        let mut dc = Vec::with_capacity(d * d);
        for m in 0..d {
            for n in 0..d {
                let sq = ot[(m, n)].norm_sqr();
                duh.push(kernel[(m, n)] * sq);
                second.push(self.weights[m] * sq);
                dc.push(2.0 * self.weights[m] * (self.evals[n] - self.evals[m]) * sq);
            }
        }
        let duhamel = pairwise_sum(&duh);
        let second_moment = pairwise_sum(&second);
        let double_commutator = pairwise_sum(&dc);
        HarrisTerms {
            duhamel,
            second_moment,
            double_commutator,
            upper: duhamel + self.beta / 12.0 * double_commutator,
        }
    }
}

/// Members of the second-moment sandwich for one observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisTerms {
    /// (O,O)_D — the lower member.
    pub duhamel: f64,
    /// ⟨O²⟩ — the bounded quantity.
    pub second_moment: f64,
    /// ⟨[O,[H,O]]⟩ — always ≥ 0 in a Gibbs state.
    pub double_commutator: f64,
    /// (O,O)_D + (β/12)⟨[O,[H,O]]⟩ — the upper member.
    pub upper: f64,
}

/// Gibbs state of a diagonal (classical) Hamiltonian, stored as energies
/// only. Expectations of diagonal observables need no eigenvectors, and the
/// Duhamel bracket of commuting observables collapses to a plain thermal
/// expectation of the product.
#[derive(Debug, Clone)]
pub struct DiagonalGibbs {
    beta: f64,
    ground: f64,
    width: f64,
    weights: Vec<f64>,
    log_z: f64,
}

impl DiagonalGibbs {
    pub fn new(energies: &DVector<f64>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if energies.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let top = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let boltz: Vec<f64> = energies.iter().map(|e| (-beta * (e - ground)).exp()).collect();
        let z_shift = pairwise_sum(&boltz);
        if !z_shift.is_finite() || z_shift <= 0.0 {
            return Err(Error::Numerical("partition sum is not positive".into()));
        }
        Ok(Self {
            beta,
            ground,
            width: top - ground,
            weights: boltz.iter().map(|b| b / z_shift).collect(),
            log_z: z_shift.ln() - beta * ground,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground
    }

    pub fn spectral_width(&self) -> f64 {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn free_energy_density(&self, volume: usize) -> f64 {
        self.log_z / volume as f64
    }

    /// ⟨A⟩ for a diagonal observable given as its diagonal.
    pub fn expectation(&self, diag: &[f64]) -> f64 {
        debug_assert_eq!(diag.len(), self.weights.len());
        let terms: Vec<f64> = self.weights.iter().zip(diag).map(|(w, a)| w * a).collect();
        pairwise_sum(&terms)
    }

    /// ⟨AB⟩ = (A,B)_D for diagonal observables (they commute with H, so the
    /// Duhamel average carries no time dependence).
    pub fn product_expectation(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .collect();
        pairwise_sum(&terms)
    }
}
