//! Transverse-field Ising chain with depolarizing Lindblad noise, split into
//! nearest-neighbour bond terms for Trotterized evolution.
//!
//! H = −½ [ Σ_i (J_z σᶻ_i σᶻ_{i+1} + J_x σˣ_i σˣ_{i+1}) + Σ_i h_x σˣ_i ]
//!
//! with open boundaries and jump operators σˣ, σʸ, σᶻ on every site at a
//! uniform rate γ.
//!
//! # Vectorization convention
//!
//! A single-site operator ρ is stored as the 4-vector `p = σ·2 + σ'` (row
//! index first). Multi-site superoperators in this module use the *pair*
//! ordering, where site `i` contributes the base-4 digit `p_i` and site 0 is
//! the most significant digit. This is the physical-index layout of the MPDO
//! site tensors. [`pair_to_rowmajor`] maps it to the ordinary row-major
//! vectorization of the full `2^n × 2^n` matrix.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{expm, kron, Tensor, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Tensor {
        let i = C64::new(0.0, 1.0);
        let rows: [[C64; 2]; 2] = match self {
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -i], [i, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        };
        Tensor::new(vec![2, 2], rows.concat()).expect("2x2 literal")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianParams {
    pub n: usize,
    pub jz: f64,
    pub jx: f64,
    pub hx: f64,
}

impl HamiltonianParams {
    pub fn new(n: usize, jz: f64, jx: f64, hx: f64) -> Result<Self> {
        let p = HamiltonianParams { n, jz, jx, hx };
        p.validate()?;
        Ok(p)
    }

    /// J_z = 1, J_x = 0.1, h_x = 0.1 in units of J.
    pub fn standard_chain(n: usize) -> Self {
        HamiltonianParams {
            n,
            jz: 1.0,
            jx: 0.1,
            hx: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("chain needs N >= 2 sites, got {}", self.n)));
        }
        if ![self.jz, self.jx, self.hx].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn n_bonds(&self) -> usize {
        self.n - 1
    }

    fn check_bond(&self, bond: usize) -> Result<()> {
        if bond + 1 >= self.n {
            return Err(Error::OutOfRange(format!(
                "bond {bond} on a chain of {} sites (valid 0..={})",
                self.n,
                self.n - 2
            )));
        }
        Ok(())
    }

    /// Share of a site's single-site terms carried by each adjacent bond.
    pub fn site_weight(&self, site: usize) -> f64 {
        if site == 0 || site + 1 == self.n {
            1.0
        } else {
            0.5
        }
    }

    fn bond_class(&self, bond: usize) -> BondClass {
        match (bond == 0, bond + 2 == self.n) {
            (true, true) => BondClass::Whole,
            (true, false) => BondClass::LeftEdge,
            (false, true) => BondClass::RightEdge,
            (false, false) => BondClass::Interior,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub gamma: f64,
}

impl NoiseParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(NoiseParams { gamma })
    }

    pub fn noiseless() -> Self {
        NoiseParams { gamma: 0.0 }
    }
}

/// Bond position relative to the chain ends; together with the couplings it
/// fully determines the bond generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum BondClass {
    Whole,
    LeftEdge,
    Interior,
    RightEdge,
}

pub fn two_site_hamiltonian(params: &HamiltonianParams, bond: usize) -> Result<Tensor> {
    params.check_bond(bond)?;
    let (wl, wr) = (params.site_weight(bond), params.site_weight(bond + 1));
    let x = Pauli::X.matrix();
    let z = Pauli::Z.matrix();
    let id = Tensor::identity(2);
    let c = |v: f64| C64::from(-0.5 * v);
    let terms = [
        kron(&z, &z)?.scale(c(params.jz)),
        kron(&x, &x)?.scale(c(params.jx)),
        kron(&x, &id)?.scale(c(params.hx * wl)),
        kron(&id, &x)?.scale(c(params.hx * wr)),
    ];
    terms[1..]
        .iter()
        .try_fold(terms[0].clone(), |acc, t| acc.add(t))
}

/// Row-major vectorized dissipator γ Σ_L (L⊗L* − ½L†L⊗I − ½I⊗(L†L)ᵀ).
pub(crate) fn dissipator_rowmajor(jumps: &[Tensor], gamma: f64) -> Result<Tensor> {
    let d = jumps[0].shape()[0];
    let id = Tensor::identity(d);
    let mut out = Tensor::zeros(vec![d * d, d * d]);
    for l in jumps {
        let ldl = l.adjoint()?.matmul(l)?;
        let term = kron(l, &l.conj())?
            .sub(&kron(&ldl, &id)?.scale(C64::from(0.5)))?
            .sub(&kron(&id, &ldl.transpose()?)?.scale(C64::from(0.5)))?;
        out = out.add(&term)?;
    }
    Ok(out.scale(C64::from(gamma)))
}

/// Row-major vectorized Hamiltonian part −i(H⊗I − I⊗Hᵀ).
pub(crate) fn commutator_rowmajor(h: &Tensor) -> Result<Tensor> {
    let d = h.shape()[0];
    let id = Tensor::identity(d);
    Ok(kron(h, &id)?
        .sub(&kron(&id, &h.transpose()?)?)?
        .scale(C64::new(0.0, -1.0)))
}

/// Index map from the pair ordering of `n` sites to the row-major
/// vectorization of a `2^n × 2^n` matrix: `out[pair] = rowmajor`.
pub fn pair_to_rowmajor(n: usize) -> Vec<usize> {
    let dim = 1usize << n;
    (0..1usize << (2 * n))
        .map(|pair| {
            let (mut row, mut col) = (0usize, 0usize);
            for site in 0..n {
                let p = (pair >> (2 * (n - 1 - site))) & 3;
                row = (row << 1) | (p >> 1);
                col = (col << 1) | (p & 1);
            }
            row * dim + col
        })
        .collect()
}

/// Re-index a row-major superoperator on `n` sites into pair ordering.
pub fn rowmajor_to_pair_superop(l: &Tensor, n: usize) -> Result<Tensor> {
    let map = pair_to_rowmajor(n);
    let dim = map.len();
    if l.shape() != [dim, dim] {
        return Err(Error::Dimension(format!(
            "superoperator on {n} sites must be {dim}x{dim}, got {:?}",
            l.shape()
        )));
    }
    let src = l.data();
    Ok(Tensor::from_fn(vec![dim, dim], |ix| src[map[ix[0]] * dim + map[ix[1]]]))
}

/// Depolarizing generator of a single site in pair ordering (4×4).
pub fn single_site_dissipator(gamma: f64) -> Tensor {
    let jumps: Vec<Tensor> = Pauli::ALL.iter().map(|p| p.matrix()).collect();
    // a single site has the same ordering in both conventions
    dissipator_rowmajor(&jumps, gamma).expect("2x2 Paulis")
}

/// Two-site vectorized Lindblad generator for `bond`, 16×16 in pair ordering.
pub fn bond_liouvillian(params: &HamiltonianParams, noise: &NoiseParams, bond: usize) -> Result<Tensor> {
    let h = two_site_hamiltonian(params, bond)?;
    let mut l = commutator_rowmajor(&h)?;
    if noise.gamma > 0.0 {
        let id = Tensor::identity(2);
        for (which, w) in [(0usize, params.site_weight(bond)), (1, params.site_weight(bond + 1))] {
            let jumps = Pauli::ALL
                .iter()
                .map(|p| {
                    let m = p.matrix();
                    if which == 0 { kron(&m, &id) } else { kron(&id, &m) }
                })
                .collect::<Result<Vec<_>>>()?;
            l = l.add(&dissipator_rowmajor(&jumps, noise.gamma * w)?)?;
        }
    }
    rowmajor_to_pair_superop(&l, 2)
}

/// One factor of a Trotter sweep: a 16×16 propagator acting on sites
/// `bond_index` and `bond_index + 1`.
#[derive(Clone, Debug)]
pub struct BondGate {
    pub bond_index: usize,
    pub superop: Arc<Tensor>,
    pub sub_step: f64,
}

/// Propagators `expm(sub_step · L#_bond)` keyed on the bond class and step.
/// Uniform couplings leave at most a handful of distinct exponentials.
#[derive(Debug)]
pub struct GateCache {
    params: HamiltonianParams,
    noise: NoiseParams,
    entries: HashMap<(BondClass, u64), Arc<Tensor>>,
}

impl GateCache {
    pub fn new(params: HamiltonianParams, noise: NoiseParams) -> Result<Self> {
        params.validate()?;
        NoiseParams::new(noise.gamma)?;
        Ok(GateCache {
            params,
            noise,
            entries: HashMap::new(),
        })
    }

    pub fn gate(&mut self, bond: usize, sub_step: f64) -> Result<BondGate> {
        self.params.check_bond(bond)?;
        let key = (self.params.bond_class(bond), sub_step.to_bits());
        let superop = match self.entries.get(&key) {
            Some(t) => Arc::clone(t),
            None => {
                let l = bond_liouvillian(&self.params, &self.noise, bond)?;
                let t = Arc::new(expm(&l.scale(C64::from(sub_step)))?);
                self.entries.insert(key, Arc::clone(&t));
                t
            }
        };
        Ok(BondGate {
            bond_index: bond,
            superop,
            sub_step,
        })
    }

    pub fn distinct_gates(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrotterOrder {
    First,
    Second,
}

impl TrotterOrder {
    pub fn from_int(order: u8) -> Result<Self> {
        match order {
            1 => Ok(TrotterOrder::First),
            2 => Ok(TrotterOrder::Second),
            o => Err(Error::InvalidParameter(format!("Trotter order must be 1 or 2, got {o}"))),
        }
    }
}

/// Gate list for one time step `dt`.
///
/// Bonds with even index ((0,1), (2,3), ...) form the even layer. First order
/// applies even then odd bonds; second order is the symmetric sweep
/// odd(dt/2) · even(dt) · odd(dt/2).
pub fn trotter_sequence(
    params: &HamiltonianParams,
    noise: &NoiseParams,
    dt: f64,
    order: TrotterOrder,
) -> Result<Vec<BondGate>> {
    let mut cache = GateCache::new(*params, *noise)?;
    trotter_sequence_cached(&mut cache, dt, order)
}

pub fn trotter_sequence_cached(cache: &mut GateCache, dt: f64, order: TrotterOrder) -> Result<Vec<BondGate>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let n_bonds = cache.params.n_bonds();
    let even: Vec<usize> = (0..n_bonds).step_by(2).collect();
    let odd: Vec<usize> = (1..n_bonds).step_by(2).collect();
    let mut layers: Vec<(&[usize], f64)> = Vec::new();
    match order {
        TrotterOrder::First => {
            layers.push((&even, dt));
            layers.push((&odd, dt));
        }
        TrotterOrder::Second => {
            layers.push((&odd, dt / 2.0));
            layers.push((&even, dt));
            layers.push((&odd, dt / 2.0));
        }
    }
    let mut seq = Vec::new();
    for (bonds, step) in layers {
        for &b in bonds {
            seq.push(cache.gate(b, step)?);
        }
    }
    Ok(seq)
}

/// Gate lists for advancing several steps at once. For second order the
/// trailing odd half step of one step and the leading one of the next are
/// merged into a single full step:
/// `opening · bulk^(k−1) · closing` equals `k` symmetric steps.
#[derive(Clone, Debug)]
pub struct TrotterPlan {
    pub opening: Vec<BondGate>,
    pub bulk: Vec<BondGate>,
    pub closing: Vec<BondGate>,
    pub dt: f64,
}

impl TrotterPlan {
    pub fn new(params: &HamiltonianParams, noise: &NoiseParams, dt: f64, order: TrotterOrder) -> Result<Self> {
        let mut cache = GateCache::new(*params, *noise)?;
        Self::with_cache(&mut cache, dt, order)
    }

    pub fn with_cache(cache: &mut GateCache, dt: f64, order: TrotterOrder) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let n_bonds = cache.params.n_bonds();
        let mut layer = |parity: usize, step: f64| -> Result<Vec<BondGate>> {
            (parity..n_bonds).step_by(2).map(|b| cache.gate(b, step)).collect()
        };
        Ok(match order {
            TrotterOrder::First => {
                let full = [layer(0, dt)?, layer(1, dt)?].concat();
                TrotterPlan {
                    opening: full.clone(),
                    bulk: full,
                    closing: Vec::new(),
                    dt,
                }
            }
            TrotterOrder::Second => {
                let half = layer(1, dt / 2.0)?;
                let even = layer(0, dt)?;
                TrotterPlan {
                    opening: [half.clone(), even.clone()].concat(),
                    bulk: [layer(1, dt)?, even].concat(),
                    closing: half,
                    dt,
                }
            }
        })
    }
}

/// Per-step depolarizing probability equivalent to rate `gamma` over `dt`:
/// `1 − exp(−4γ dt)`.
pub fn lindblad_to_depolarizing_p(gamma: f64, dt: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("need gamma >= 0 and dt >= 0, got {gamma}, {dt}")));
    }
    Ok(-(-4.0 * gamma * dt).exp_m1())
}
