//! Replica-resolved observables over product Gibbs states.
//!
//! For n independent replicas sharing one disorder realization, the total
//! Gibbs state is a tensor product, so every expectation of a product of
//! single-replica operators factorizes into single-copy expectations, and a
//! Duhamel bracket whose left operator lives on a single replica factorizes
//! into one single-copy bracket times plain expectations on the remaining
//! replicas. [`SampleCtx`] evaluates along that factorized route with one
//! single-copy eigendecomposition per sample; [`TensorOracle`] evaluates the
//! same quantities by brute force on the full n-fold tensor space and exists
//! purely to certify the factorized route.
//!
//! On top of the factorized primitives sit the Gaussian
//! integration-by-parts identities: the per-coupling form
//!
//!   E[g_X ⟨O_X¹ f⟩] = −σβJ1 ( Σ_α E(O_X^α, O_X¹ f)_D − n·E[⟨O_X⟩⟨O_X¹ f⟩] )
//!
//! and its aggregated Ghirlanda–Guerra-type form over the term density
//! h = (1/|C|) Σ_X g_X O_X¹, in which the disconnected piece turns into an
//! (n+1)-replica overlap. Both identities are exact at finite size for every
//! β and every overlap polynomial f, which is what the high-precision
//! residual checks verify.

use std::cell::{OnceCell, RefCell};
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gibbs::{DiagonalGibbs, GibbsContext};
use crate::linalg;
use crate::model::{
    assemble_diagonal, assemble_from_ops, DisorderSample, ModelDiagonals, ModelOperators,
    ModelSpec, ReplicatedAssembler,
};

/// Reference to one cached term operator, (term index, range index).
pub type OpRef = (usize, usize);

/// One overlap factor R^a_{α,β} = (1/|C^a|) Σ_X O_X^{a,α} O_X^{a,β}.
/// Replica indices are 1-based and must differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapFactor {
    pub term: String,
    pub alpha: usize,
    pub beta: usize,
}

/// Ordered product of overlap factors; empty means f ≡ 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OverlapMonomial {
    pub factors: Vec<OverlapFactor>,
}

impl OverlapMonomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn overlap(term: &str, alpha: usize, beta: usize) -> Self {
        Self {
            factors: vec![OverlapFactor {
                term: term.into(),
                alpha,
                beta,
            }],
        }
    }

    pub fn times(mut self, term: &str, alpha: usize, beta: usize) -> Self {
        self.factors.push(OverlapFactor {
            term: term.into(),
            alpha,
            beta,
        });
        self
    }

    /// Largest replica index appearing in the monomial (0 when empty).
    pub fn max_replica(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.alpha.max(f.beta))
            .max()
            .unwrap_or(0)
    }
}

/// Ordered single-replica operator sequences of a product observable:
/// the observable is Π_α (Π_k O_{seq_α[k]}) with replica factors on distinct
/// tensor slots. Missing replicas mean the identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplicaProduct {
    seqs: BTreeMap<usize, Vec<OpRef>>,
}

impl ReplicaProduct {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, replica: usize, op: OpRef) {
        self.seqs.entry(replica).or_default().push(op);
    }

    pub fn prepend(&mut self, replica: usize, op: OpRef) {
        self.seqs.entry(replica).or_default().insert(0, op);
    }

    pub fn seq(&self, replica: usize) -> &[OpRef] {
        self.seqs.get(&replica).map_or(&[], Vec::as_slice)
    }

    pub fn replicas(&self) -> impl Iterator<Item = usize> + '_ {
        self.seqs.keys().copied()
    }

    pub fn max_replica(&self) -> usize {
        self.seqs.keys().next_back().copied().unwrap_or(0)
    }
}

fn resolve_monomial(model: &ModelSpec, f: &OverlapMonomial) -> Result<Vec<(usize, usize, usize, usize)>> {
    // (term index, family size, alpha, beta) per factor
    f.factors
        .iter()
        .map(|fac| {
            if fac.alpha == 0 || fac.beta == 0 || fac.alpha == fac.beta {
                return Err(Error::InvalidMonomial(format!(
                    "overlap replicas must be distinct and 1-based, got ({},{})",
                    fac.alpha, fac.beta
                )));
            }
            let (ti, t) = model.term(&fac.term)?;
            Ok((ti, t.family.len(), fac.alpha, fac.beta))
        })
        .collect()
}

/// Run `body` for every multi-index with the given radix sizes (one empty
/// call when `sizes` is empty).
fn for_each_assignment<F>(sizes: &[usize], mut body: F) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    let mut idx = vec![0usize; sizes.len()];
    loop {
        body(&idx)?;
        let mut d = sizes.len();
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Per-sample evaluation context on the factorized route: one single-copy
/// Gibbs state plus memoized eigenbasis transforms of term-operator products.
pub struct SampleCtx<'a> {
    model: &'a ModelSpec,
    ops: &'a ModelOperators,
    sample: DisorderSample,
    ctx: GibbsContext,
    kernel: OnceCell<DMatrix<f64>>,
    products: RefCell<HashMap<Vec<OpRef>, Rc<DMatrix<Complex64>>>>,
}

impl<'a> SampleCtx<'a> {
    pub fn new(
        model: &'a ModelSpec,
        ops: &'a ModelOperators,
        sample: &DisorderSample,
        beta: f64,
    ) -> Result<Self> {
        let h = assemble_from_ops(model, ops, sample)?;
        let ctx = GibbsContext::new(&h, beta)?;
        Ok(Self {
            model,
            ops,
            sample: sample.clone(),
            ctx,
            kernel: OnceCell::new(),
            products: RefCell::new(HashMap::new()),
        })
    }

    pub fn gibbs(&self) -> &GibbsContext {
        &self.ctx
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    fn kernel(&self) -> &DMatrix<f64> {
        self.kernel.get_or_init(|| self.ctx.duhamel_kernel())
    }

    /// Eigenbasis transform of the ordered product Π_k O_{seq[k]}, memoized
    /// per prefix. The empty sequence is the identity.
    fn product(&self, seq: &[OpRef]) -> Rc<DMatrix<Complex64>> {
        if let Some(p) = self.products.borrow().get(seq) {
            return p.clone();
        }
        let value = if seq.is_empty() {
            Rc::new(DMatrix::<Complex64>::identity(self.ctx.dim(), self.ctx.dim()))
        } else if seq.len() == 1 {
            let (t, r) = seq[0];
            Rc::new(self.ctx.transform(self.ops.op(t, r).matrix()))
        } else {
            // transforms compose: (V†AV)(V†BV) = V†(AB)V
            let left = self.product(&seq[..seq.len() - 1]);
            let right = self.product(&seq[seq.len() - 1..]);
            Rc::new(linalg::matmul(&left, &right))
        };
        self.products
            .borrow_mut()
            .insert(seq.to_vec(), value.clone());
        value
    }

    /// ⟨Π_k O_{seq[k]}⟩ on a single copy.
    pub fn mean_product(&self, seq: &[OpRef]) -> Complex64 {
        self.ctx.expectation_transformed(&self.product(seq))
    }

    /// (Π A, Π B)_D on a single copy.
    pub fn duhamel_seq(&self, a: &[OpRef], b: &[OpRef]) -> Complex64 {
        self.ctx
            .duhamel_transformed(&self.product(a), &self.product(b), self.kernel())
    }

    /// ⟨Π_α M_α⟩ on the replicated product state: Π_α ⟨M_α⟩.
    pub fn replica_expectation(&self, rp: &ReplicaProduct) -> Complex64 {
        rp.seqs
            .values()
            .map(|seq| self.mean_product(seq))
            .product()
    }

    /// (A, B)_D on the replicated product state, with A supported on the
    /// single replica `a_replica`: the bracket closes on that replica and
    /// every other replica contributes a plain expectation of its B factor.
    pub fn replica_duhamel(&self, a_replica: usize, a_seq: &[OpRef], b: &ReplicaProduct) -> Complex64 {
        let mut value = self.duhamel_seq(a_seq, b.seq(a_replica));
        for (&rep, seq) in &b.seqs {
            if rep != a_replica {
                value *= self.mean_product(seq);
            }
        }
        value
    }

    /// ⟨f⟩ for an overlap monomial, by expanding every factor over its range
    /// family and factorizing each resulting replica product.
    pub fn overlap_expectation(&self, f: &OverlapMonomial) -> Result<Complex64> {
        let factors = resolve_monomial(self.model, f)?;
        let sizes: Vec<usize> = factors.iter().map(|&(_, len, _, _)| len).collect();
        let coeff: f64 = sizes.iter().map(|&l| 1.0 / l as f64).product();
        let mut total = Complex64::ZERO;
        for_each_assignment(&sizes, |tuple| {
            let mut rp = ReplicaProduct::new();
            for (k, &(ti, _, alpha, beta)) in factors.iter().enumerate() {
                rp.append(alpha, (ti, tuple[k]));
                rp.append(beta, (ti, tuple[k]));
            }
            total += self.replica_expectation(&rp);
            Ok(())
        })?;
        Ok(coeff * total)
    }

    /// (R^a_{1,1})_D = (1/|C^a|) Σ_X (O_X, O_X)_D — the self-overlap Duhamel
    /// term of the h-identity.
    pub fn self_overlap_duhamel(&self, term: &str) -> Result<f64> {
        let (ti, t) = self.model.term(term)?;
        let inv_c = 1.0 / t.family.len() as f64;
        let mut acc = 0.0;
        for x in 0..t.family.len() {
            acc += self.duhamel_seq(&[(ti, x)], &[(ti, x)]).re;
        }
        Ok(inv_c * acc)
    }

    /// ⟨R^a_{1,2}⟩ = (1/|C^a|) Σ_X ⟨O_X⟩².
    pub fn overlap_mean(&self, term: &str) -> Result<f64> {
        let (ti, t) = self.model.term(term)?;
        let inv_c = 1.0 / t.family.len() as f64;
        let mut acc = 0.0;
        for x in 0..t.family.len() {
            let m = self.mean_product(&[(ti, x)]).re;
            acc += m * m;
        }
        Ok(inv_c * acc)
    }

    fn check_probe_term(&self, term: &str) -> Result<(usize, usize)> {
        let (ti, t) = self.model.term(term)?;
        if t.share_group.is_some() {
            return Err(Error::InvalidModel(format!(
                "term {term:?} reads shared draws; the coupling derivative would touch every \
                 sharing term, which this identity does not model — probe an unshared term"
            )));
        }
        Ok((ti, t.family.len()))
    }

    /// All per-sample ingredients of the aggregated identity for probe term
    /// `a` and overlap polynomial `f` on `n` replicas. Averaging each field
    /// over the disorder and assembling via [`gg_identity_sides`] must give
    /// lhs = rhs up to the error of the disorder average itself.
    pub fn gg_components(&self, term: &str, f: &OverlapMonomial, n: usize) -> Result<GgComponents> {
        if n < 1 {
            return Err(Error::InvalidModel("need at least one replica".into()));
        }
        if f.max_replica() > n {
            return Err(Error::InvalidMonomial(format!(
                "f touches replica {} but only {n} replicas are present",
                f.max_replica()
            )));
        }
        let (ti, n_ranges) = self.check_probe_term(term)?;
        let inv_c = 1.0 / n_ranges as f64;
        let factors = resolve_monomial(self.model, f)?;
        let sizes: Vec<usize> = factors.iter().map(|&(_, len, _, _)| len).collect();
        let coeff: f64 = sizes.iter().map(|&l| 1.0 / l as f64).product();

        let mut f_mean = Complex64::ZERO;
        let mut hf = Complex64::ZERO;
        let mut duhamel_sum = Complex64::ZERO;
        let mut r_new_f = Complex64::ZERO;
        for_each_assignment(&sizes, |tuple| {
            let mut rp_f = ReplicaProduct::new();
            for (k, &(fti, _, alpha, beta)) in factors.iter().enumerate() {
                rp_f.append(alpha, (fti, tuple[k]));
                rp_f.append(beta, (fti, tuple[k]));
            }
            f_mean += coeff * self.replica_expectation(&rp_f);
            for x in 0..n_ranges {
                // O_X¹ f: the probe operator multiplies f from the left
                let mut b = rp_f.clone();
                b.prepend(1, (ti, x));
                let g_x = self.sample.draw(self.model, ti, x)?;
                let b_mean = self.replica_expectation(&b);
                hf += coeff * inv_c * g_x * b_mean;
                for alpha in 1..=n {
                    duhamel_sum += coeff * inv_c * self.replica_duhamel(alpha, &[(ti, x)], &b);
                }
                // ⟨O_X⟩⟨O_X¹f⟩ rewritten on n+1 replicas: R_{1,n+1}·f
                let mut bn = b.clone();
                bn.append(n + 1, (ti, x));
                r_new_f += coeff * inv_c * self.replica_expectation(&bn);
            }
            Ok(())
        })?;

        let mut h = Complex64::ZERO;
        for x in 0..n_ranges {
            let g_x = self.sample.draw(self.model, ti, x)?;
            h += inv_c * g_x * self.mean_product(&[(ti, x)]);
        }

        Ok(GgComponents {
            hf,
            h,
            f: f_mean,
            duhamel_sum,
            r_new_f,
            r11_duhamel: self.self_overlap_duhamel(term)?,
            r12: self.overlap_mean(term)?,
        })
    }

    /// Per-coupling integration-by-parts ingredients for coupling (a, X).
    pub fn ibp_components(
        &self,
        term: &str,
        range: usize,
        f: &OverlapMonomial,
        n: usize,
    ) -> Result<IbpComponents> {
        if f.max_replica() > n {
            return Err(Error::InvalidMonomial(format!(
                "f touches replica {} but only {n} replicas are present",
                f.max_replica()
            )));
        }
        let (ti, n_ranges) = self.check_probe_term(term)?;
        if range >= n_ranges {
            return Err(Error::SiteOutOfRange {
                site: range,
                size: n_ranges,
            });
        }
        let factors = resolve_monomial(self.model, f)?;
        let sizes: Vec<usize> = factors.iter().map(|&(_, len, _, _)| len).collect();
        let coeff: f64 = sizes.iter().map(|&l| 1.0 / l as f64).product();
        let g_x = self.sample.draw(self.model, ti, range)?;
        let o_mean = self.mean_product(&[(ti, range)]).re;

        let mut g_of = Complex64::ZERO;
        let mut duhamel_x = Complex64::ZERO;
        let mut disconnected = Complex64::ZERO;
        for_each_assignment(&sizes, |tuple| {
            let mut b = ReplicaProduct::new();
            for (k, &(fti, _, alpha, beta)) in factors.iter().enumerate() {
                b.append(alpha, (fti, tuple[k]));
                b.append(beta, (fti, tuple[k]));
            }
            b.prepend(1, (ti, range));
            let b_mean = self.replica_expectation(&b);
            g_of += coeff * g_x * b_mean;
            disconnected += coeff * o_mean * b_mean;
            for alpha in 1..=n {
                duhamel_x += coeff * self.replica_duhamel(alpha, &[(ti, range)], &b);
            }
            Ok(())
        })?;
        Ok(IbpComponents {
            g_of,
            duhamel_x,
            disconnected,
        })
    }
}

/// Disorder-averaged ingredients of the aggregated identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgComponents {
    /// ⟨h^a f⟩
    pub hf: Complex64,
    /// ⟨h^a⟩
    pub h: Complex64,
    /// ⟨f⟩
    pub f: Complex64,
    /// (1/|C|) Σ_X Σ_α (O_X^α, O_X¹ f)_D
    pub duhamel_sum: Complex64,
    /// ⟨R^a_{1,n+1} f⟩ on n+1 replicas
    pub r_new_f: Complex64,
    /// (R^a_{1,1})_D
    pub r11_duhamel: f64,
    /// ⟨R^a_{1,2}⟩
    pub r12: f64,
}

/// Flattened width of [`GgComponents`] for estimator plumbing.
pub const GG_COMPONENT_WIDTH: usize = 12;

impl GgComponents {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.hf.re,
            self.hf.im,
            self.h.re,
            self.h.im,
            self.f.re,
            self.f.im,
            self.duhamel_sum.re,
            self.duhamel_sum.im,
            self.r_new_f.re,
            self.r_new_f.im,
            self.r11_duhamel,
            self.r12,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != GG_COMPONENT_WIDTH {
            return Err(Error::DimensionMismatch {
                expected: GG_COMPONENT_WIDTH,
                got: v.len(),
            });
        }
        Ok(Self {
            hf: Complex64::new(v[0], v[1]),
            h: Complex64::new(v[2], v[3]),
            f: Complex64::new(v[4], v[5]),
            duhamel_sum: Complex64::new(v[6], v[7]),
            r_new_f: Complex64::new(v[8], v[9]),
            r11_duhamel: v[10],
            r12: v[11],
        })
    }
}

/// Both sides of the aggregated identity, assembled from disorder-averaged
/// components:
///
///   lhs = E⟨Δh f⟩ = E⟨hf⟩ − E⟨h⟩·E⟨f⟩
///   rhs = −σβJ1 [ E(duhamel sum) − n·E⟨R_{1,n+1}f⟩
///                 − (E(R_{1,1})_D − E⟨R_{1,2}⟩)·E⟨f⟩ ]
pub fn gg_identity_sides(
    sign: f64,
    beta: f64,
    j1: f64,
    n: usize,
    avg: &GgComponents,
) -> (Complex64, Complex64) {
    let lhs = avg.hf - avg.h * avg.f;
    let pref = -sign * beta * j1;
    let rhs = pref
        * (avg.duhamel_sum
            - (n as f64) * avg.r_new_f
            - Complex64::from(avg.r11_duhamel - avg.r12) * avg.f);
    (lhs, rhs)
}

/// Disorder-averaged ingredients of the per-coupling identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpComponents {
    /// g_X ⟨O_X¹ f⟩
    pub g_of: Complex64,
    /// Σ_α (O_X^α, O_X¹ f)_D
    pub duhamel_x: Complex64,
    /// ⟨O_X⟩⟨O_X¹ f⟩ (both factors in the same realization)
    pub disconnected: Complex64,
}

/// Flattened width of [`IbpComponents`].
pub const IBP_COMPONENT_WIDTH: usize = 6;

impl IbpComponents {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.g_of.re,
            self.g_of.im,
            self.duhamel_x.re,
            self.duhamel_x.im,
            self.disconnected.re,
            self.disconnected.im,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != IBP_COMPONENT_WIDTH {
            return Err(Error::DimensionMismatch {
                expected: IBP_COMPONENT_WIDTH,
                got: v.len(),
            });
        }
        Ok(Self {
            g_of: Complex64::new(v[0], v[1]),
            duhamel_x: Complex64::new(v[2], v[3]),
            disconnected: Complex64::new(v[4], v[5]),
        })
    }
}

/// Both sides of the per-coupling identity from averaged components:
/// lhs = E[g_X⟨O_X¹f⟩], rhs = −σβJ1(E Σ_α(O_X^α, O_X¹f)_D − n·E[⟨O_X⟩⟨O_X¹f⟩]).
pub fn ibp_identity_sides(
    sign: f64,
    beta: f64,
    j1: f64,
    n: usize,
    avg: &IbpComponents,
) -> (Complex64, Complex64) {
    let lhs = avg.g_of;
    let rhs = -sign * beta * j1 * (avg.duhamel_x - (n as f64) * avg.disconnected);
    (lhs, rhs)
}

/// Brute-force evaluator on the full n-replica tensor space. Independent of
/// the factorized route: it assembles H_tot = Σ_α H^α, diagonalizes the full
/// matrix, and evaluates products and brackets with dense embedded operators.
pub struct TensorOracle {
    n: usize,
    dim_single: usize,
    ops: ModelOperators,
    ctx: GibbsContext,
    kernel: DMatrix<f64>,
}

impl TensorOracle {
    pub fn new(model: &ModelSpec, sample: &DisorderSample, beta: f64, n: usize) -> Result<Self> {
        let asm = ReplicatedAssembler::new(model, n, None)?;
        let h_tot = asm.assemble(sample, None)?;
        let ctx = GibbsContext::new(&h_tot, beta)?;
        let kernel = ctx.duhamel_kernel();
        Ok(Self {
            n,
            dim_single: model.hilbert_dim()?,
            ops: ModelOperators::build(model)?,
            ctx,
            kernel,
        })
    }

    pub fn gibbs(&self) -> &GibbsContext {
        &self.ctx
    }

    /// Dense operator of a replica product on the tensor space. Factors on
    /// distinct replicas commute, so building in (replica, position) order is
    /// the operator itself.
    fn dense(&self, rp: &ReplicaProduct) -> Result<DMatrix<Complex64>> {
        let total = self.ctx.dim();
        if rp.max_replica() > self.n {
            return Err(Error::InvalidMonomial(format!(
                "product touches replica {} but the oracle holds {}",
                rp.max_replica(),
                self.n
            )));
        }
        let mut acc = DMatrix::<Complex64>::identity(total, total);
        for rep in rp.replicas() {
            for &(t, r) in rp.seq(rep) {
                let embedded =
                    linalg::kron_embed(self.ops.op(t, r).matrix(), rep - 1, self.n, self.dim_single);
                acc = linalg::matmul(&acc, &embedded);
            }
        }
        Ok(acc)
    }

    pub fn replica_expectation(&self, rp: &ReplicaProduct) -> Result<Complex64> {
        let op = self.dense(rp)?;
        Ok(self.ctx.expectation_transformed(&self.ctx.transform(&op)))
    }

    pub fn replica_duhamel(
        &self,
        a_replica: usize,
        a_seq: &[OpRef],
        b: &ReplicaProduct,
    ) -> Result<Complex64> {
        let mut a_rp = ReplicaProduct::new();
        for &op in a_seq {
            a_rp.append(a_replica, op);
        }
        let at = self.ctx.transform(&self.dense(&a_rp)?);
        let bt = self.ctx.transform(&self.dense(b)?);
        Ok(self.ctx.duhamel_transformed(&at, &bt, &self.kernel))
    }

    pub fn overlap_expectation(&self, model: &ModelSpec, f: &OverlapMonomial) -> Result<Complex64> {
        let factors = resolve_monomial(model, f)?;
        let sizes: Vec<usize> = factors.iter().map(|&(_, len, _, _)| len).collect();
        let coeff: f64 = sizes.iter().map(|&l| 1.0 / l as f64).product();
        let mut total = Complex64::ZERO;
        for_each_assignment(&sizes, |tuple| {
            let mut rp = ReplicaProduct::new();
            for (k, &(ti, _, alpha, beta)) in factors.iter().enumerate() {
                rp.append(alpha, (ti, tuple[k]));
                rp.append(beta, (ti, tuple[k]));
            }
            total += self.replica_expectation(&rp)?;
            Ok(())
        })?;
        Ok(coeff * total)
    }
}

/// Single-sample thermal overlap statistics of a classical (diagonal) model,
/// computed on the single copy through the Gram matrix of term operators:
/// with G_XY = ⟨O_X O_Y⟩ and m_X = ⟨O_X⟩,
///
///   ⟨R_{1,2}⟩  = (1/|C|)  Σ_X m_X²
///   ⟨R_{1,2}²⟩ = (1/|C|²) Σ_XY G_XY²
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOverlapStats {
    pub r_mean: f64,
    pub r2_mean: f64,
    pub log_z: f64,
}

pub fn classical_overlap_stats(
    model: &ModelSpec,
    diags: &ModelDiagonals,
    sample: &DisorderSample,
    beta: f64,
    term: &str,
) -> Result<ClassicalOverlapStats> {
    let (ti, t) = model.term(term)?;
    let energies = assemble_diagonal(model, diags, sample)?;
    let gibbs = DiagonalGibbs::new(&energies, beta)?;
    let n_ranges = t.family.len();
    let term_diags = diags.term_diags(ti);
    let means: Vec<f64> = term_diags.iter().map(|d| gibbs.expectation(d)).collect();
    let r_mean = means.iter().map(|m| m * m).sum::<f64>() / n_ranges as f64;
    let mut r2 = 0.0;
    for x in 0..n_ranges {
        for y in 0..n_ranges {
            let g = gibbs.product_expectation(&term_diags[x], &term_diags[y]);
            r2 += g * g;
        }
    }
    Ok(ClassicalOverlapStats {
        r_mean,
        r2_mean: r2 / (n_ranges * n_ranges) as f64,
        log_z: gibbs.log_z(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{gauss_hermite_over_model, sample_disorder, GaussHermite};
    use crate::model::{
        preset_random_bond_heisenberg, preset_random_bond_ising, preset_random_field_heisenberg,
        TermSpec,
    };
    use crate::spin::{self, Boundary, LatticeGeometry, RangePattern};

    fn chain(l: u32) -> LatticeGeometry {
        LatticeGeometry::new(1, l, Boundary::Open).unwrap()
    }

    fn single_site_field_model(s: f64, sign: f64, j1: f64, j0: f64) -> ModelSpec {
        let lat = chain(1);
        let rep = spin::build_spin_rep(s).unwrap();
        let sites = spin::build_range_family(&lat, RangePattern::Sites).unwrap();
        ModelSpec::new(
            rep,
            lat,
            vec![TermSpec {
                label: "field".into(),
                family: sites,
                axis: 3,
                j0,
                j1,
                op_scale: 1.0,
                share_group: None,
            }],
            sign,
        )
        .unwrap()
    }

    #[test]
    fn factorization_matches_tensor_oracle_n2() {
        let model = preset_random_field_heisenberg(&chain(3), 0.9, 0.4).unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let beta = 1.1;
        for idx in 0..3 {
            let sample = sample_disorder(&model, 77, idx);
            let fac = SampleCtx::new(&model, &ops, &sample, beta).unwrap();
            let oracle = TensorOracle::new(&model, &sample, beta, 2).unwrap();
            for f in [
                OverlapMonomial::overlap("field", 1, 2),
                OverlapMonomial::overlap("field", 1, 2).times("field", 1, 2),
                OverlapMonomial::overlap("exchange1", 1, 2),
            ] {
                let a = fac.overlap_expectation(&f).unwrap();
                let b = oracle.overlap_expectation(&model, &f).unwrap();
                assert!((a - b).norm() < 1e-10, "monomial {f:?}: {a} vs {b}");
            }
            // mixed-support bracket: A on replica 2, B spanning replicas 1,2
            let mut b = ReplicaProduct::new();
            b.append(1, (0, 0));
            b.append(1, (1, 0));
            b.append(2, (0, 2));
            for alpha in [1, 2] {
                let a_seq = [(0usize, 1usize)];
                let fac_v = fac.replica_duhamel(alpha, &a_seq, &b);
                let ora_v = oracle.replica_duhamel(alpha, &a_seq, &b).unwrap();
                assert!(
                    (fac_v - ora_v).norm() < 1e-10,
                    "alpha {alpha}: {fac_v} vs {ora_v}"
                );
            }
        }
    }

    #[test]
    fn factorization_matches_tensor_oracle_n3() {
        // strongly non-commuting two-site model, three replicas (dim 4³ = 64)
        let model =
            preset_random_bond_heisenberg(&chain(2), [1.0, 0.8, 0.6], [0.2, 0.0, 0.1], false)
                .unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let beta = 0.7;
        let sample = sample_disorder(&model, 5, 0);
        let fac = SampleCtx::new(&model, &ops, &sample, beta).unwrap();
        let oracle = TensorOracle::new(&model, &sample, beta, 3).unwrap();
        for f in [
            OverlapMonomial::overlap("bond1", 1, 2),
            OverlapMonomial::overlap("bond1", 2, 3),
            OverlapMonomial::overlap("bond2", 1, 3).times("bond3", 2, 3),
        ] {
            let a = fac.overlap_expectation(&f).unwrap();
            let b = oracle.overlap_expectation(&model, &f).unwrap();
            assert!((a - b).norm() < 1e-10, "monomial {f:?}: {a} vs {b}");
        }
        // replica indices are exchangeable: distant pairs agree with (1,2)
        let r12 = oracle
            .overlap_expectation(&model, &OverlapMonomial::overlap("bond1", 1, 2))
            .unwrap();
        let r23 = oracle
            .overlap_expectation(&model, &OverlapMonomial::overlap("bond1", 2, 3))
            .unwrap();
        assert!((r12 - r23).norm() < 1e-11);
    }

    #[test]
    fn bracket_with_empty_side_is_plain_expectation() {
        let model = preset_random_field_heisenberg(&chain(2), 1.0, 0.3).unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let sample = sample_disorder(&model, 9, 1);
        let fac = SampleCtx::new(&model, &ops, &sample, 1.3).unwrap();
        let a_seq = [(0usize, 0usize)];
        let empty = ReplicaProduct::new();
        let v = fac.replica_duhamel(1, &a_seq, &empty);
        assert!((v - fac.mean_product(&a_seq)).norm() < 1e-13);
    }

    #[test]
    fn gg_identity_is_exact_for_single_site_field() {
        // n = 2, f = R_{1,2}: every disorder average is a 1-dim integral the
        // quadrature nails, so the identity must close to near machine level
        let model = single_site_field_model(0.5, -1.0, 0.8, 0.3);
        let ops = ModelOperators::build(&model).unwrap();
        let beta = 1.2;
        let n = 2;
        let f = OverlapMonomial::overlap("field", 1, 2);
        let grid = GaussHermite::new(24).unwrap();
        let mut acc = vec![0.0; GG_COMPONENT_WIDTH];
        for j in 0..GG_COMPONENT_WIDTH {
            let jj = j;
            acc[jj] = gauss_hermite_over_model(&model, &grid, |s| {
                let ctx = SampleCtx::new(&model, &ops, s, beta)?;
                Ok(ctx.gg_components("field", &f, n)?.to_vec()[jj])
            })
            .unwrap();
        }
        let avg = GgComponents::from_slice(&acc).unwrap();
        let (lhs, rhs) = gg_identity_sides(model.sign(), beta, 0.8, n, &avg);
        assert!(
            (lhs - rhs).norm() < 1e-10,
            "lhs {lhs}, rhs {rhs}, residual {}",
            (lhs - rhs).norm()
        );
        // and the probe actually fires: both sides are away from zero
        assert!(lhs.norm() > 1e-3);
    }

    #[test]
    fn per_coupling_identity_is_exact_on_two_sites() {
        // two-site anisotropic bond model, probe one bond coupling, f = R_{1,2}
        let model =
            preset_random_bond_heisenberg(&chain(2), [1.1, 0.0, 0.0], [0.0, 0.7, 0.5], false)
                .unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let beta = 1.3;
        let n = 2;
        let f = OverlapMonomial::overlap("bond3", 1, 2);
        let grid = GaussHermite::new(32).unwrap();
        let mut acc = vec![0.0; IBP_COMPONENT_WIDTH];
        for j in 0..IBP_COMPONENT_WIDTH {
            acc[j] = gauss_hermite_over_model(&model, &grid, |s| {
                let ctx = SampleCtx::new(&model, &ops, s, beta)?;
                Ok(ctx.ibp_components("bond1", 0, &f, n)?.to_vec()[j])
            })
            .unwrap();
        }
        let avg = IbpComponents::from_slice(&acc).unwrap();
        let (lhs, rhs) = ibp_identity_sides(model.sign(), beta, 1.1, n, &avg);
        assert!((lhs - rhs).norm() < 1e-10, "lhs {lhs}, rhs {rhs}");
        assert!(lhs.norm() > 1e-5, "probe too weak: lhs {lhs}");
    }

    #[test]
    fn disorder_free_probe_gives_zero_sides() {
        // J1 = 0 on the probe term: h vanishes at the pinned draws and the
        // prefactor kills the right side
        let model = preset_random_field_heisenberg(&chain(2), 0.0, 0.4).unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let grid = GaussHermite::new(4).unwrap();
        let f = OverlapMonomial::overlap("field", 1, 2);
        let hf = gauss_hermite_over_model(&model, &grid, |s| {
            let ctx = SampleCtx::new(&model, &ops, s, 1.0)?;
            Ok(ctx.gg_components("field", &f, 2)?.hf.re)
        })
        .unwrap();
        assert_eq!(hf, 0.0);
    }

    #[test]
    fn shared_draw_probe_is_rejected() {
        let model = preset_random_bond_heisenberg(&chain(3), [1.0; 3], [0.0; 3], true).unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let sample = sample_disorder(&model, 1, 0);
        let ctx = SampleCtx::new(&model, &ops, &sample, 1.0).unwrap();
        assert!(matches!(
            ctx.gg_components("bond1", &OverlapMonomial::one(), 2),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn monomial_validation() {
        let model = preset_random_field_heisenberg(&chain(2), 1.0, 0.2).unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let sample = sample_disorder(&model, 2, 0);
        let ctx = SampleCtx::new(&model, &ops, &sample, 1.0).unwrap();
        assert!(ctx
            .overlap_expectation(&OverlapMonomial::overlap("field", 1, 1))
            .is_err());
        assert!(ctx
            .overlap_expectation(&OverlapMonomial::overlap("field", 0, 2))
            .is_err());
        assert!(ctx
            .overlap_expectation(&OverlapMonomial::overlap("nope", 1, 2))
            .is_err());
        // f beyond the declared replica count is caught
        assert!(ctx
            .gg_components("field", &OverlapMonomial::overlap("field", 2, 3), 2)
            .is_err());
    }

    #[test]
    fn classical_stats_match_dense_two_replica_route() {
        let model = preset_random_bond_ising(&chain(3), 1.0, 0.2, 0.3).unwrap();
        let diags = ModelDiagonals::build(&model).unwrap();
        let ops = ModelOperators::build(&model).unwrap();
        let beta = 1.4;
        let sample = sample_disorder(&model, 33, 4);
        let stats = classical_overlap_stats(&model, &diags, &sample, beta, "bond").unwrap();

        let oracle = TensorOracle::new(&model, &sample, beta, 2).unwrap();
        let r = oracle
            .overlap_expectation(&model, &OverlapMonomial::overlap("bond", 1, 2))
            .unwrap();
        let r2 = oracle
            .overlap_expectation(
                &model,
                &OverlapMonomial::overlap("bond", 1, 2).times("bond", 1, 2),
            )
            .unwrap();
        assert!((stats.r_mean - r.re).abs() < 1e-11);
        assert!((stats.r2_mean - r2.re).abs() < 1e-11);
        assert!(r.im.abs() < 1e-13);
        // factorized quantum route agrees too
        let fac = SampleCtx::new(&model, &ops, &sample, beta).unwrap();
        assert!((fac.overlap_mean("bond").unwrap() - stats.r_mean).abs() < 1e-11);

        // classical self-overlap of ±1-normalized bonds is exactly 1
        let self_d = fac.self_overlap_duhamel("bond").unwrap();
        assert!((self_d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_route_requires_diagonal_model() {
        let model = preset_random_field_heisenberg(&chain(2), 1.0, 0.2).unwrap();
        assert!(matches!(
            ModelDiagonals::build(&model),
            Err(Error::NotClassical(_))
        ));
    }
}
