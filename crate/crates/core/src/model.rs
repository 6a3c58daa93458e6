//! Disordered Hamiltonian assembly.
//!
//! A model is a list of terms; term `a` contributes
//! `sign · Σ_{X ∈ C^a} (J1^a g_X^a + J0^a) · scale_a · S_X^{i(a)}`,
//! where the `g` are independent standard Gaussian draws unless terms are
//! tied together through a share group (then every member term reads the same
//! draw for the same range, as in the SU(2)-symmetric random-bond model).
//!
//! The global sign is explicit: named presets use −1 so that positive J0 is
//! ferromagnetic, the general builder keeps +1. `scale_a` is an operator
//! prefactor (default 1) used e.g. to renormalize spin-1/2 products to
//! Ising ±1 convention; it multiplies the operator, so the sup-norm of a term
//! operator is `scale_a · S^{n_a}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::disorder::SeedSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::spin::{
    self, Axis, LatticeGeometry, OperatorMatrix, RangeFamily, SpinRep, DEFAULT_DIM_CAP,
};

/// One term of the Hamiltonian.
#[derive(Debug, Clone)]
pub struct TermSpec {
    pub label: String,
    pub family: RangeFamily,
    pub axis: Axis,
    pub j0: f64,
    pub j1: f64,
    /// Operator prefactor; the term operator is `op_scale · S_X^{axis}`.
    pub op_scale: f64,
    /// Terms sharing a group read identical Gaussian draws per range.
    pub share_group: Option<String>,
}

impl TermSpec {
    /// Sup-norm of this term's operator, scale · S^{n_a}.
    pub fn operator_bound(&self, s: f64) -> f64 {
        self.op_scale.abs() * s.powi(self.family.arity() as i32)
    }
}

/// Key of one independent Gaussian draw.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DrawKey {
    /// Unshared coupling of (term, range index).
    Term { term: String, range: usize },
    /// Shared coupling of (share group, range index).
    Group { group: String, range: usize },
}

impl fmt::Display for DrawKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DrawKey::Term { term, range } => write!(f, "{term}[{range}]"),
            DrawKey::Group { group, range } => write!(f, "shared:{group}[{range}]"),
        }
    }
}

/// Complete model: representation, lattice, terms, global sign.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    rep: SpinRep,
    lattice: LatticeGeometry,
    terms: Vec<TermSpec>,
    sign: f64,
    dim_cap: usize,
}

impl ModelSpec {
    pub fn new(
        rep: SpinRep,
        lattice: LatticeGeometry,
        terms: Vec<TermSpec>,
        sign: f64,
    ) -> Result<Self> {
        Self::with_cap(rep, lattice, terms, sign, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(
        rep: SpinRep,
        lattice: LatticeGeometry,
        terms: Vec<TermSpec>,
        sign: f64,
        dim_cap: usize,
    ) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidModel(format!("sign must be ±1, got {sign}")));
        }
        if terms.is_empty() {
            return Err(Error::InvalidModel("model needs at least one term".into()));
        }
        let mut labels = BTreeSet::new();
        for t in &terms {
            if !(1..=3).contains(&t.axis) {
                return Err(Error::InvalidModel(format!(
                    "term {:?}: axis must be 1..3, got {}",
                    t.label, t.axis
                )));
            }
            if !labels.insert(t.label.clone()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate term label {:?}",
                    t.label
                )));
            }
            if ![t.j0, t.j1, t.op_scale].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "term {:?}: couplings must be finite",
                    t.label
                )));
            }
            let n_sites = lattice.volume();
            for r in t.family.ranges() {
                if let Some(&bad) = r.iter().find(|&&x| x >= n_sites) {
                    return Err(Error::SiteOutOfRange {
                        site: bad,
                        size: n_sites,
                    });
                }
            }
        }
        // share-group members must carry identical range families
        let mut group_family: BTreeMap<&str, &RangeFamily> = BTreeMap::new();
        for t in &terms {
            if let Some(g) = &t.share_group {
                match group_family.get(g.as_str()) {
                    None => {
                        group_family.insert(g, &t.family);
                    }
                    Some(f) => {
                        if *f != &t.family {
                            return Err(Error::InvalidModel(format!(
                                "share group {g:?} mixes different range families"
                            )));
                        }
                    }
                }
            }
        }
        let model = Self {
            rep,
            lattice,
            terms,
            sign,
            dim_cap,
        };
        model.hilbert_dim()?; // reject oversized models up front
        Ok(model)
    }

    pub fn rep(&self) -> &SpinRep {
        &self.rep
    }

    pub fn lattice(&self) -> &LatticeGeometry {
        &self.lattice
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn dim_cap(&self) -> usize {
        self.dim_cap
    }

    pub fn hilbert_dim(&self) -> Result<usize> {
        spin::hilbert_dim(&self.rep, self.lattice.volume(), self.dim_cap)
    }

    /// Index and spec of the term labelled `label`.
    pub fn term(&self, label: &str) -> Result<(usize, &TermSpec)> {
        self.terms
            .iter()
            .enumerate()
            .find(|(_, t)| t.label == label)
            .ok_or_else(|| Error::UnknownTerm(label.to_string()))
    }

    /// Draw key for (term index, range index), resolving share groups.
    pub fn draw_key(&self, term_idx: usize, range: usize) -> DrawKey {
        let t = &self.terms[term_idx];
        match &t.share_group {
            Some(g) => DrawKey::Group {
                group: g.clone(),
                range,
            },
            None => DrawKey::Term {
                term: t.label.clone(),
                range,
            },
        }
    }

    /// All independent draw keys, in canonical order: terms in declaration
    /// order, ranges in family order, each shared key listed once at first
    /// appearance. This order defines both the RNG draw sequence and the
    /// quadrature dimension layout.
    pub fn draw_slots(&self) -> Vec<DrawKey> {
        let mut seen = BTreeSet::new();
        let mut slots = Vec::new();
        for (ti, t) in self.terms.iter().enumerate() {
            for ri in 0..t.family.len() {
                let key = self.draw_key(ti, ri);
                if seen.insert(key.clone()) {
                    slots.push(key);
                }
            }
        }
        slots
    }

    /// Whether the draw behind `key` actually enters the Hamiltonian, i.e.
    /// some term reading it has J1 ≠ 0.
    pub fn slot_is_active(&self, key: &DrawKey) -> bool {
        self.terms.iter().enumerate().any(|(ti, t)| {
            t.j1 != 0.0 && (0..t.family.len()).any(|ri| &self.draw_key(ti, ri) == key)
        })
    }

    /// True when every term operator is diagonal in the lattice product basis
    /// (all axes 3); such models are classical and admit the diagonal path.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.axis == 3)
    }
}

/// One realization of the quenched disorder.
#[derive(Debug, Clone)]
pub struct DisorderSample {
    draws: BTreeMap<DrawKey, f64>,
    seed: Option<SeedSpec>,
}

impl DisorderSample {
    pub fn new(draws: BTreeMap<DrawKey, f64>, seed: Option<SeedSpec>) -> Self {
        Self { draws, seed }
    }

    pub fn get(&self, key: &DrawKey) -> Option<f64> {
        self.draws.get(key).copied()
    }

    pub fn seed(&self) -> Option<&SeedSpec> {
        self.seed.as_ref()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Draw g_X^a for (term index, range index) of `model`.
    pub fn draw(&self, model: &ModelSpec, term_idx: usize, range: usize) -> Result<f64> {
        let key = model.draw_key(term_idx, range);
        self.get(&key)
            .ok_or_else(|| Error::MissingDraw(key.to_string()))
    }
}

/// Cache of embedded term operators, `ops[term][range] = scale_a · S_X^{i(a)}`.
///
/// Sample-independent; build once per (model, lattice size) and reuse across
/// every disorder realization.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    ops: Vec<Vec<OperatorMatrix>>,
    dim: usize,
}

impl ModelOperators {
    pub fn build(model: &ModelSpec) -> Result<Self> {
        let dim = model.hilbert_dim()?;
        let mut ops = Vec::with_capacity(model.terms().len());
        for t in model.terms() {
            let mut term_ops = Vec::with_capacity(t.family.len());
            for range in t.family.ranges() {
                let base = spin::range_product_operator(model.rep(), model.lattice(), range, t.axis)?;
                let mut m = base.into_matrix();
                if t.op_scale != 1.0 {
                    m.scale_mut(t.op_scale);
                }
                term_ops.push(OperatorMatrix::new_unchecked(m));
            }
            ops.push(term_ops);
        }
        Ok(Self { ops, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn op(&self, term_idx: usize, range: usize) -> &OperatorMatrix {
        &self.ops[term_idx][range]
    }

    pub fn term_ops(&self, term_idx: usize) -> &[OperatorMatrix] {
        &self.ops[term_idx]
    }

    /// Density m^a = (1/|C^a|) Σ_X O_X^a.
    pub fn term_density(&self, term_idx: usize) -> OperatorMatrix {
        let ops = &self.ops[term_idx];
        let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        let norm = 1.0 / ops.len() as f64;
        for op in ops {
            linalg::add_scaled(&mut acc, op.matrix(), norm);
        }
        OperatorMatrix::new_unchecked(acc)
    }

    /// Random density h^a = (1/|C^a|) Σ_X g_X O_X^a for one sample.
    pub fn term_random_density(
        &self,
        model: &ModelSpec,
        term_idx: usize,
        sample: &DisorderSample,
    ) -> Result<OperatorMatrix> {
        let ops = &self.ops[term_idx];
        let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        let norm = 1.0 / ops.len() as f64;
        for (ri, op) in ops.iter().enumerate() {
            let g = sample.draw(model, term_idx, ri)?;
            linalg::add_scaled(&mut acc, op.matrix(), g * norm);
        }
        Ok(OperatorMatrix::new_unchecked(acc))
    }
}

/// H(S,g) = sign · Σ_a Σ_X (J1^a g_X^a + J0^a) O_X^a from cached operators.
pub fn assemble_from_ops(
    model: &ModelSpec,
    ops: &ModelOperators,
    sample: &DisorderSample,
) -> Result<OperatorMatrix> {
    let dim = ops.dim();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (ti, t) in model.terms().iter().enumerate() {
        for ri in 0..t.family.len() {
            let coeff = if t.j1 != 0.0 {
                t.j1 * sample.draw(model, ti, ri)? + t.j0
            } else {
                // draws of disorder-free terms exist but do not enter H
                t.j0
            };
            if coeff != 0.0 {
                linalg::add_scaled(&mut h, ops.op(ti, ri).matrix(), model.sign() * coeff);
            }
        }
    }
    Ok(OperatorMatrix::new_unchecked(h))
}

/// One-shot assembly; builds the operator cache internally.
pub fn assemble_hamiltonian(model: &ModelSpec, sample: &DisorderSample) -> Result<OperatorMatrix> {
    let ops = ModelOperators::build(model)?;
    assemble_from_ops(model, &ops, sample)
}

/// Diagonal cache for classical (all-axis-3) models; the analogue of
/// [`ModelOperators`] holding only the operator diagonals.
#[derive(Debug, Clone)]
pub struct ModelDiagonals {
    diags: Vec<Vec<Vec<f64>>>,
    dim: usize,
}

impl ModelDiagonals {
    pub fn build(model: &ModelSpec) -> Result<Self> {
        if !model.is_diagonal() {
            return Err(Error::NotClassical(
                "diagonal assembly needs every term on axis 3".into(),
            ));
        }
        let dim = model.hilbert_dim()?;
        let mut diags = Vec::with_capacity(model.terms().len());
        for t in model.terms() {
            let mut term_diags = Vec::with_capacity(t.family.len());
            for range in t.family.ranges() {
                let mut d = spin::range_product_diagonal(model.rep(), model.lattice(), range)?;
                if t.op_scale != 1.0 {
                    d.iter_mut().for_each(|v| *v *= t.op_scale);
                }
                term_diags.push(d);
            }
            diags.push(term_diags);
        }
        Ok(Self { diags, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diag(&self, term_idx: usize, range: usize) -> &[f64] {
        &self.diags[term_idx][range]
    }

    pub fn term_diags(&self, term_idx: usize) -> &[Vec<f64>] {
        &self.diags[term_idx]
    }
}

/// Diagonal of H for a classical model, as a vector of energies.
pub fn assemble_diagonal(
    model: &ModelSpec,
    diags: &ModelDiagonals,
    sample: &DisorderSample,
) -> Result<DVector<f64>> {
    let mut h = DVector::<f64>::zeros(diags.dim());
    for (ti, t) in model.terms().iter().enumerate() {
        for ri in 0..t.family.len() {
            let coeff = if t.j1 != 0.0 {
                t.j1 * sample.draw(model, ti, ri)? + t.j0
            } else {
                t.j0
            };
            if coeff != 0.0 {
                let d = diags.diag(ti, ri);
                let c = model.sign() * coeff;
                for (hi, di) in h.iter_mut().zip(d) {
                    *hi += c * di;
                }
            }
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

/// Random-field Heisenberg model: Gaussian field along axis 3 on every site,
/// deterministic isotropic nearest-neighbor exchange. Global sign −1.
pub fn preset_random_field_heisenberg(
    lattice: &LatticeGeometry,
    j1_field: f64,
    j0_exchange: f64,
) -> Result<ModelSpec> {
    let rep = spin::build_spin_rep(0.5)?;
    let sites = spin::build_range_family(lattice, spin::RangePattern::Sites)?;
    let bonds = spin::build_range_family(lattice, spin::RangePattern::NearestNeighborBonds)?;
    let mut terms = vec![TermSpec {
        label: "field".into(),
        family: sites,
        axis: 3,
        j0: 0.0,
        j1: j1_field,
        op_scale: 1.0,
        share_group: None,
    }];
    for axis in 1..=3 {
        terms.push(TermSpec {
            label: format!("exchange{axis}"),
            family: bonds.clone(),
            axis,
            j0: j0_exchange,
            j1: 0.0,
            op_scale: 1.0,
            share_group: None,
        });
    }
    ModelSpec::new(rep, lattice.clone(), terms, -1.0)
}

/// Random-bond Heisenberg model: Gaussian nearest-neighbor bonds along all
/// three axes. With `su2_shared` the three axis terms read one shared draw
/// per bond and must carry identical couplings, making the Hamiltonian
/// SU(2)-invariant. Global sign −1.
pub fn preset_random_bond_heisenberg(
    lattice: &LatticeGeometry,
    j1: [f64; 3],
    j0: [f64; 3],
    su2_shared: bool,
) -> Result<ModelSpec> {
    if su2_shared && (j1[0] != j1[1] || j1[1] != j1[2] || j0[0] != j0[1] || j0[1] != j0[2]) {
        return Err(Error::InvalidModel(
            "SU(2)-shared bonds require identical per-axis couplings".into(),
        ));
    }
    let rep = spin::build_spin_rep(0.5)?;
    let bonds = spin::build_range_family(lattice, spin::RangePattern::NearestNeighborBonds)?;
    let terms = (1..=3)
        .map(|axis| TermSpec {
            label: format!("bond{axis}"),
            family: bonds.clone(),
            axis,
            j0: j0[axis - 1],
            j1: j1[axis - 1],
            op_scale: 1.0,
            share_group: su2_shared.then(|| "su2".to_string()),
        })
        .collect();
    ModelSpec::new(rep, lattice.clone(), terms, -1.0)
}

/// Random-bond Ising chain in the classical ±1 normalization: spin-1/2 axis-3
/// bonds rescaled so each bond operator has eigenvalues ±1, plus an optional
/// deterministic field (eigenvalues ±1 as well). Global sign −1. The model is
/// diagonal, so it runs on the classical fast path.
pub fn preset_random_bond_ising(
    lattice: &LatticeGeometry,
    j1: f64,
    j0: f64,
    field: f64,
) -> Result<ModelSpec> {
    let rep = spin::build_spin_rep(0.5)?;
    let bonds = spin::build_range_family(lattice, spin::RangePattern::NearestNeighborBonds)?;
    let mut terms = vec![TermSpec {
        label: "bond".into(),
        family: bonds,
        axis: 3,
        j0,
        j1,
        op_scale: 4.0, // (1/S)^2: bond products take values ±1
        share_group: None,
    }];
    if field != 0.0 {
        let sites = spin::build_range_family(lattice, spin::RangePattern::Sites)?;
        terms.push(TermSpec {
            label: "field".into(),
            family: sites,
            axis: 3,
            j0: field,
            j1: 0.0,
            op_scale: 2.0, // (1/S): site spins take values ±1
            share_group: None,
        });
    }
    ModelSpec::new(rep, lattice.clone(), terms, -1.0)
}

// ---------------------------------------------------------------------------
// replicated systems
// ---------------------------------------------------------------------------

/// Inter-replica coupling: copies the range family and axis of term `c` and
/// couples replicas 1 and 2 through Σ_X (J1⁰ g⁰_X + J0⁰) O_X^{c,1} O_X^{c,2}.
/// The coupling term always enters with a plus sign, independent of the base
/// model's sign convention.
#[derive(Debug, Clone)]
pub struct ReplicaCouplingSpec {
    pub c_term: String,
    pub j0: f64,
    pub j1: f64,
    /// When set, g⁰ is identified with the base draws g^c instead of being an
    /// independent family.
    pub g0_shared_with_base: bool,
}

/// Assembler for n-replica total Hamiltonians sharing one disorder sample,
/// with an optional inter-replica coupling between replicas 1 and 2.
///
/// Replica α occupies the α-th Kronecker slot (replica 1 leftmost). All
/// sample-independent operators are precomputed at construction.
#[derive(Debug)]
pub struct ReplicatedAssembler {
    model: ModelSpec,
    ops: ModelOperators,
    n: usize,
    dim_single: usize,
    dim_total: usize,
    coupling: Option<ReplicaCouplingSpec>,
    /// P_X = O_X^{c,1} O_X^{c,2} on the replicated space, in range order.
    coupling_ops: Vec<DMatrix<Complex64>>,
}

impl ReplicatedAssembler {
    pub fn new(
        model: &ModelSpec,
        n: usize,
        coupling: Option<ReplicaCouplingSpec>,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidModel("need at least one replica".into()));
        }
        if coupling.is_some() && n < 2 {
            return Err(Error::InvalidModel(
                "inter-replica coupling needs at least two replicas".into(),
            ));
        }
        let dim_single = model.hilbert_dim()?;
        let mut dim_total = 1usize;
        for _ in 0..n {
            dim_total = dim_total
                .checked_mul(dim_single)
                .filter(|&d| d <= model.dim_cap())
                .ok_or(Error::DimensionCap {
                    dim: dim_single.saturating_pow(n as u32),
                    cap: model.dim_cap(),
                })?;
        }
        let ops = ModelOperators::build(model)?;
        let mut coupling_ops = Vec::new();
        if let Some(c) = &coupling {
            let (ci, _) = model.term(&c.c_term)?;
            let rest = dim_total / (dim_single * dim_single);
            for op in ops.term_ops(ci) {
                // O_X ⊗ O_X ⊗ 1 ⊗ … ⊗ 1
                let pair = op.matrix().kronecker(op.matrix());
                let full = if rest == 1 {
                    pair
                } else {
                    pair.kronecker(&DMatrix::<Complex64>::identity(rest, rest))
                };
                coupling_ops.push(full);
            }
        }
        Ok(Self {
            model: model.clone(),
            ops,
            n,
            dim_single,
            dim_total,
            coupling,
            coupling_ops,
        })
    }

    pub fn n_replicas(&self) -> usize {
        self.n
    }

    pub fn dim_total(&self) -> usize {
        self.dim_total
    }

    pub fn single_ops(&self) -> &ModelOperators {
        &self.ops
    }

    pub fn coupling(&self) -> Option<&ReplicaCouplingSpec> {
        self.coupling.as_ref()
    }

    /// Draw keys of the independent g⁰ family, in range order.
    pub fn coupling_draw_slots(&self) -> Result<Vec<DrawKey>> {
        let c = self.coupling.as_ref().ok_or_else(|| {
            Error::InvalidModel("assembler was built without an inter-replica coupling".into())
        })?;
        let (ci, t) = self.model.term(&c.c_term)?;
        Ok((0..t.family.len())
            .map(|ri| {
                if c.g0_shared_with_base {
                    self.model.draw_key(ci, ri)
                } else {
                    DrawKey::Term {
                        term: format!("coupling:{}", c.c_term),
                        range: ri,
                    }
                }
            })
            .collect())
    }

    /// H_tot = Σ_α H(S^α, g) + Σ_X (J1⁰ g⁰_X + J0⁰) P_X.
    ///
    /// `sample0` supplies g⁰; it is required when the coupling has J1⁰ ≠ 0
    /// and an independent g⁰ family, and ignored when g⁰ is identified with
    /// the base draws.
    pub fn assemble(
        &self,
        sample: &DisorderSample,
        sample0: Option<&DisorderSample>,
    ) -> Result<OperatorMatrix> {
        let h_single = assemble_from_ops(&self.model, &self.ops, sample)?;
        let d = self.dim_single;
        let mut h = DMatrix::<Complex64>::zeros(self.dim_total, self.dim_total);
        for alpha in 0..self.n {
            let embedded = linalg::kron_embed(h_single.matrix(), alpha, self.n, d);
            h += &embedded;
        }
        if let Some(c) = &self.coupling {
            let slots = self.coupling_draw_slots()?;
            for (ri, p) in self.coupling_ops.iter().enumerate() {
                let g0 = if c.j1 != 0.0 {
                    let source = if c.g0_shared_with_base {
                        Some(sample)
                    } else {
                        sample0
                    };
                    let s = source.ok_or_else(|| Error::MissingDraw(slots[ri].to_string()))?;
                    s.get(&slots[ri])
                        .ok_or_else(|| Error::MissingDraw(slots[ri].to_string()))?
                } else {
                    0.0
                };
                let coeff = c.j1 * g0 + c.j0;
                if coeff != 0.0 {
                    linalg::add_scaled(&mut h, p, coeff);
                }
            }
        }
        Ok(OperatorMatrix::new_unchecked(h))
    }

    /// The coupling density m⁰ = (1/|C⁰|) Σ_X P_X on the replicated space:
    /// the term-0 analogue of [`ModelOperators::term_density`]. For the
    /// overlap identification this equals R^c_{1,2} by construction, but it
    /// is assembled through the Hamiltonian-term path rather than the overlap
    /// path, so equality is a meaningful consistency check.
    pub fn coupling_density(&self) -> Result<OperatorMatrix> {
        if self.coupling_ops.is_empty() {
            return Err(Error::InvalidModel(
                "assembler was built without an inter-replica coupling".into(),
            ));
        }
        let mut acc = DMatrix::<Complex64>::zeros(self.dim_total, self.dim_total);
        let norm = 1.0 / self.coupling_ops.len() as f64;
        for p in &self.coupling_ops {
            linalg::add_scaled(&mut acc, p, norm);
        }
        Ok(OperatorMatrix::new_unchecked(acc))
    }

    /// Overlap operator R^a_{α,β} = (1/|C^a|) Σ_X O_X^{a,α} O_X^{a,β} on the
    /// replicated space. Replica indices are 1-based.
    pub fn overlap_operator(&self, term: &str, alpha: usize, beta: usize) -> Result<OperatorMatrix> {
        if alpha < 1 || beta < 1 || alpha > self.n || beta > self.n || alpha == beta {
            return Err(Error::InvalidMonomial(format!(
                "overlap needs two distinct replicas in 1..={}, got ({alpha},{beta})",
                self.n
            )));
        }
        let (ti, t) = self.model.term(term)?;
        let d = self.dim_single;
        let mut acc = DMatrix::<Complex64>::zeros(self.dim_total, self.dim_total);
        let norm = 1.0 / t.family.len() as f64;
        for op in self.ops.term_ops(ti) {
            let a = linalg::kron_embed(op.matrix(), alpha - 1, self.n, d);
            let b = linalg::kron_embed(op.matrix(), beta - 1, self.n, d);
            let prod = linalg::matmul(&a, &b);
            linalg::add_scaled(&mut acc, &prod, norm);
        }
        Ok(OperatorMatrix::new_unchecked(acc))
    }
}

/// Permutation matrix swapping replicas α and β (0-based) of an n-replica
/// space with single-copy dimension d. Used to verify replica symmetry.
pub fn replica_swap_matrix(d: usize, n: usize, alpha: usize, beta: usize) -> DMatrix<Complex64> {
    let total = d.pow(n as u32);
    let mut p = DMatrix::<Complex64>::zeros(total, total);
    for idx in 0..total {
        // decode replica-local indices, slot 0 slowest
        let mut rem = idx;
        let mut locals = vec![0usize; n];
        for k in (0..n).rev() {
            locals[k] = rem % d;
            rem /= d;
        }
        locals.swap(alpha, beta);
        let mut to = 0usize;
        for k in 0..n {
            to = to * d + locals[k];
        }
        p[(to, idx)] = Complex64::ONE;
    }
    p
}
