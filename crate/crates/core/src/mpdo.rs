//! Matrix product density operators evolved by TEBD under two-site
//! superoperator gates.
//!
//! The density operator is vectorized site by site: each site tensor has
//! shape `(χ_L, 4, χ_R)` where the middle index is the physical pair
//! `p = σ·2 + σ'` of ρ's row and column indices on that site.
//!
//! ```text
//!   1 ─ M[0] ─ χ ─ M[1] ─ χ ─ ... ─ M[N-1] ─ 1
//!        │          │                 │
//!        p₀         p₁                p_{N-1}
//! ```
//!
//! Positivity is not structurally enforced by this representation; truncation
//! can drive small negative eigenvalues, which [`Mpdo::min_two_site_eigenvalue`]
//! surfaces as a diagnostic.

use std::path::Path;

use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pair_to_rowmajor, BondGate, HamiltonianParams, NoiseParams, TrotterPlan};
use crate::tensor::{contract, hermitian_eigvals, qr, svd_truncate, Tensor, TruncationPolicy, C64, ONE, ZERO};

/// Echo values are clamped to this floor before taking logarithms.
pub const ECHO_FLOOR: f64 = 1e-300;

/// Imaginary residue of an expectation value of a Hermitian observable
/// above which a warning is logged. Truncation leaves the state Hermitian
/// only to about the discarded weight.
pub const IMAG_TOLERANCE: f64 = 1e-8;

/// Imaginary residue treated as a broken state.
pub const IMAG_ERROR: f64 = 1e-4;

static IMAG_WARNED: AtomicBool = AtomicBool::new(false);

/// Two-site reduced density matrices with eigenvalues below this are flagged.
pub const POSITIVITY_WARN: f64 = -1e-6;

pub const DEFAULT_CANONICALIZE_EVERY: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    kets: Vec<[C64; 2]>,
}

impl ProductState {
    pub fn new(kets: Vec<[C64; 2]>) -> Result<Self> {
        if kets.is_empty() {
            return Err(Error::InvalidParameter("product state needs at least one site".into()));
        }
        for (i, k) in kets.iter().enumerate() {
            let norm = k[0].norm_sqr() + k[1].norm_sqr();
            if (norm.sqrt() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("ket on site {i} has norm {}", norm.sqrt())));
            }
        }
        Ok(ProductState { kets })
    }

    pub fn uniform(n: usize, ket: [C64; 2]) -> Result<Self> {
        Self::new(vec![ket; n])
    }

    /// |+⟩ on every site, σˣ eigenstate with eigenvalue +1.
    pub fn plus(n: usize) -> Self {
        let a = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        ProductState { kets: vec![[a, a]; n] }
    }

    pub fn n(&self) -> usize {
        self.kets.len()
    }

    pub fn kets(&self) -> &[[C64; 2]] {
        &self.kets
    }

    /// Full state vector with site 0 as the most significant bit.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut v = vec![ONE];
        for k in &self.kets {
            v = v.iter().flat_map(|a| [a * k[0], a * k[1]]).collect();
        }
        v
    }
}

/// Outcome of one gate application.
#[derive(Clone, Copy, Debug, Default)]
pub struct GateReport {
    pub discarded_weight: f64,
    pub bond_dim: usize,
    pub hit_cutoff: bool,
    pub hit_chi_max: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Trace after all gates, before renormalization.
    pub trace_before_renorm: f64,
    pub step_discarded_weight: f64,
    pub max_bond_dim: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationCounters {
    pub cutoff_hits: u64,
    pub chi_max_hits: u64,
}

#[derive(Clone, Debug)]
pub struct Mpdo {
    sites: Vec<Tensor>,
    cumulative_discarded_weight: f64,
    counters: TruncationCounters,
    steps_taken: u64,
    canonicalize_every: usize,
}

const TRACE_WEIGHTS: [C64; 4] = [ONE, ZERO, ZERO, ONE];

impl Mpdo {
    pub fn from_product_state(psi0: &ProductState) -> Self {
        let sites = psi0
            .kets
            .iter()
            .map(|k| {
                let data = (0..4).map(|p| k[p >> 1] * k[p & 1].conj()).collect();
                Tensor::new(vec![1, 4, 1], data).expect("finite unit ket")
            })
            .collect();
        Self::from_sites_unchecked(sites)
    }

    /// I/2^N.
    pub fn maximally_mixed(n: usize) -> Self {
        let half = C64::from(0.5);
        let sites = (0..n)
            .map(|_| Tensor::new(vec![1, 4, 1], vec![half, ZERO, ZERO, half]).unwrap())
            .collect();
        Self::from_sites_unchecked(sites)
    }

    fn from_sites_unchecked(sites: Vec<Tensor>) -> Self {
        Mpdo {
            sites,
            cumulative_discarded_weight: 0.0,
            counters: TruncationCounters::default(),
            steps_taken: 0,
            canonicalize_every: DEFAULT_CANONICALIZE_EVERY,
        }
    }

    pub fn from_sites(sites: Vec<Tensor>) -> Result<Self> {
        validate_chain(&sites)?;
        Ok(Self::from_sites_unchecked(sites))
    }

    /// Run a canonicalization sweep every `every` steps; 0 disables it.
    pub fn with_canonicalize_every(mut self, every: usize) -> Self {
        self.canonicalize_every = every;
        self
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    /// `bond_dims[0] = bond_dims[N] = 1`.
    pub fn bond_dims(&self) -> Vec<usize> {
        std::iter::once(self.sites[0].shape()[0])
            .chain(self.sites.iter().map(|s| s.shape()[2]))
            .collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn cumulative_discarded_weight(&self) -> f64 {
        self.cumulative_discarded_weight
    }

    pub fn truncation_counters(&self) -> &TruncationCounters {
        &self.counters
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Contract every site's physical pair with a per-site weight vector.
    fn contract_weights(&self, weights: impl Fn(usize) -> [C64; 4]) -> C64 {
        let mut env = vec![ONE];
        for (i, site) in self.sites.iter().enumerate() {
            let w = weights(i);
            let (cl, cr) = (site.shape()[0], site.shape()[2]);
            let data = site.data();
            let mut next = vec![ZERO; cr];
            for (l, e) in env.iter().enumerate().take(cl) {
                if *e == ZERO {
                    continue;
                }
                for (p, wp) in w.iter().enumerate() {
                    if *wp == ZERO {
                        continue;
                    }
                    let f = e * wp;
                    let row = &data[(l * 4 + p) * cr..(l * 4 + p + 1) * cr];
                    for (acc, m) in next.iter_mut().zip(row) {
                        *acc += f * m;
                    }
                }
            }
            env = next;
        }
        env[0]
    }

    pub fn trace_complex(&self) -> C64 {
        self.contract_weights(|_| TRACE_WEIGHTS)
    }

    pub fn trace(&self) -> f64 {
        self.trace_complex().re
    }

    /// ⟨ψ₀|ρ|ψ₀⟩, clamped to `[ECHO_FLOOR, 1]`.
    pub fn loschmidt_echo(&self, psi0: &ProductState) -> Result<f64> {
        if psi0.n() != self.n() {
            return Err(Error::Dimension(format!(
                "initial state has {} sites, MPDO has {}",
                psi0.n(),
                self.n()
            )));
        }
        let v = self.contract_weights(|i| {
            let k = psi0.kets[i];
            std::array::from_fn(|p| k[p >> 1].conj() * k[p & 1])
        });
        check_real(v, "Loschmidt echo")?;
        Ok(v.re.clamp(ECHO_FLOOR, 1.0))
    }

    /// Tr(ρ · Π_k op_k) for single-site Hermitian operators on distinct sites.
    pub fn local_expectation(&self, ops: &[(usize, Tensor)]) -> Result<f64> {
        let mut weights = vec![TRACE_WEIGHTS; self.n()];
        let mut used = vec![false; self.n()];
        for (site, op) in ops {
            if *site >= self.n() {
                return Err(Error::OutOfRange(format!("site {site} on a chain of {}", self.n())));
            }
            if std::mem::replace(&mut used[*site], true) {
                return Err(Error::InvalidParameter(format!("site {site} appears twice")));
            }
            check_hermitian_2x2(op)?;
            // Tr(ρO) = Σ ρ[σ,σ'] O[σ',σ]
            weights[*site] = std::array::from_fn(|p| op.get(&[p & 1, p >> 1]));
        }
        let v = self.contract_weights(|i| weights[i]);
        check_real(v, "local expectation")?;
        Ok(v.re)
    }

    /// Apply a two-site superoperator gate and re-split the bond.
    pub fn apply_gate(&mut self, gate: &BondGate, policy: &TruncationPolicy) -> Result<GateReport> {
        let b = gate.bond_index;
        if b + 1 >= self.n() {
            return Err(Error::OutOfRange(format!("gate on bond {b} for a chain of {}", self.n())));
        }
        if gate.superop.shape() != [16, 16] {
            return Err(Error::Dimension(format!("gate superoperator must be 16x16, got {:?}", gate.superop.shape())));
        }
        let (cl, cr) = (self.sites[b].shape()[0], self.sites[b + 1].shape()[2]);
        let theta = contract(&self.sites[b], &self.sites[b + 1], &[(2, 0)])?;
        let g = (*gate.superop).clone().reshape(vec![4, 4, 4, 4])?;
        let evolved = contract(&g, &theta, &[(2, 1), (3, 2)])?
            .permute(&[2, 0, 1, 3])?
            .reshape(vec![cl * 4, 4 * cr])?;
        let svd = svd_truncate(&evolved, policy)?;
        let k = svd.s.len();
        let roots: Vec<f64> = svd.s.iter().map(|s| s.sqrt()).collect();

        let mut left = svd.u;
        for row in left.data_mut().chunks_mut(k) {
            for (z, r) in row.iter_mut().zip(&roots) {
                *z *= r;
            }
        }
        let mut right = svd.v;
        for (row, r) in right.data_mut().chunks_mut(4 * cr).zip(&roots) {
            row.iter_mut().for_each(|z| *z *= r);
        }
        self.sites[b] = left.reshape(vec![cl, 4, k])?;
        self.sites[b + 1] = right.reshape(vec![k, 4, cr])?;

        self.cumulative_discarded_weight += svd.discarded_weight;
        self.counters.cutoff_hits += u64::from(svd.hit_cutoff);
        self.counters.chi_max_hits += u64::from(svd.hit_chi_max);
        Ok(GateReport {
            discarded_weight: svd.discarded_weight,
            bond_dim: k,
            hit_cutoff: svd.hit_cutoff,
            hit_chi_max: svd.hit_chi_max,
        })
    }

    /// One full Trotter step: apply `seq` in order, then rescale to unit
    /// trace.
    pub fn step(&mut self, seq: &[BondGate], policy: &TruncationPolicy) -> Result<StepDiagnostics> {
        let (tr, mut discarded) = self.apply_sequence(seq, policy)?;
        discarded += self.count_step(policy)?;
        Ok(StepDiagnostics {
            trace_before_renorm: tr,
            step_discarded_weight: discarded,
            max_bond_dim: self.max_bond_dim(),
        })
    }

    /// `steps` Trotter steps with merged half steps. Equivalent to calling
    /// [`Mpdo::step`] `steps` times with the symmetric sequence, at a lower
    /// gate count. The reported trace is the one before the last
    /// renormalization.
    pub fn advance(&mut self, plan: &TrotterPlan, steps: usize, policy: &TruncationPolicy) -> Result<StepDiagnostics> {
        let mut discarded = 0.0;
        let mut tr = 1.0;
        for k in 0..steps {
            let seq = if k == 0 { &plan.opening } else { &plan.bulk };
            let (t, d) = self.apply_sequence(seq, policy)?;
            tr = t;
            discarded += d;
            if k + 1 < steps || plan.closing.is_empty() {
                discarded += self.count_step(policy)?;
            }
        }
        if steps > 0 && !plan.closing.is_empty() {
            let (t, d) = self.apply_sequence(&plan.closing, policy)?;
            tr = t;
            discarded += d + self.count_step(policy)?;
        }
        Ok(StepDiagnostics {
            trace_before_renorm: tr,
            step_discarded_weight: discarded,
            max_bond_dim: self.max_bond_dim(),
        })
    }

    fn apply_sequence(&mut self, seq: &[BondGate], policy: &TruncationPolicy) -> Result<(f64, f64)> {
        let mut discarded = 0.0;
        for gate in seq {
            discarded += self.apply_gate(gate, policy)?.discarded_weight;
        }
        let tr = self.trace_complex();
        if !(tr.re.is_finite() && tr.re.abs() > f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!("trace collapsed to {tr}")));
        }
        let centre = self.sites.len() / 2;
        let site = std::mem::replace(&mut self.sites[centre], Tensor::zeros(vec![0]));
        self.sites[centre] = site.scale(C64::from(1.0 / tr.re));
        Ok((tr.re, discarded))
    }

    fn count_step(&mut self, policy: &TruncationPolicy) -> Result<f64> {
        self.steps_taken += 1;
        if self.canonicalize_every > 0 && self.steps_taken % self.canonicalize_every as u64 == 0 {
            return self.canonicalize(policy);
        }
        Ok(0.0)
    }

    /// Left-to-right QR sweep followed by a right-to-left truncating SVD
    /// sweep. Returns the weight discarded by the second sweep.
    pub fn canonicalize(&mut self, policy: &TruncationPolicy) -> Result<f64> {
        let n = self.n();
        for i in 0..n - 1 {
            let (cl, cr) = (self.sites[i].shape()[0], self.sites[i].shape()[2]);
            let m = self.sites[i].clone().reshape(vec![cl * 4, cr])?;
            let (q, r) = qr(&m)?;
            let k = q.shape()[1];
            self.sites[i] = q.reshape(vec![cl, 4, k])?;
            let next = &self.sites[i + 1];
            self.sites[i + 1] = contract(&r, next, &[(1, 0)])?;
        }
        let mut discarded = 0.0;
        for i in (1..n).rev() {
            let (cl, cr) = (self.sites[i].shape()[0], self.sites[i].shape()[2]);
            let m = self.sites[i].clone().reshape(vec![cl, 4 * cr])?;
            let svd = svd_truncate(&m, policy)?;
            let k = svd.s.len();
            discarded += svd.discarded_weight;
            self.counters.cutoff_hits += u64::from(svd.hit_cutoff);
            self.counters.chi_max_hits += u64::from(svd.hit_chi_max);
            let mut us = svd.u;
            for row in us.data_mut().chunks_mut(k) {
                for (z, s) in row.iter_mut().zip(&svd.s) {
                    *z *= s;
                }
            }
            self.sites[i] = svd.v.reshape(vec![k, 4, cr])?;
            let prev = &self.sites[i - 1];
            self.sites[i - 1] = contract(prev, &us, &[(2, 0)])?;
        }
        self.cumulative_discarded_weight += discarded;
        Ok(discarded)
    }

    /// Vectorized ρ in pair ordering, length 4^N.
    pub fn to_pair_vector(&self) -> Result<Vec<C64>> {
        if self.n() > 10 {
            return Err(Error::Capacity {
                what: "dense MPDO reconstruction",
                max: 10,
                got: self.n(),
            });
        }
        let mut acc = self.sites[0].clone();
        for site in &self.sites[1..] {
            let rank = acc.rank();
            acc = contract(&acc, site, &[(rank - 1, 0)])?;
        }
        Ok(acc.into_data())
    }

    /// Dense `2^N × 2^N` density matrix (site 0 most significant).
    pub fn to_dense_matrix(&self) -> Result<Tensor> {
        let pair = self.to_pair_vector()?;
        let n = self.n();
        let dim = 1usize << n;
        let mut data = vec![ZERO; dim * dim];
        for (p, r) in pair_to_rowmajor(n).into_iter().enumerate() {
            data[r] = pair[p];
        }
        Tensor::new(vec![dim, dim], data)
    }

    /// Reduced density matrix of sites `bond` and `bond + 1`, row-major 4×4.
    pub fn two_site_rdm(&self, bond: usize) -> Result<Tensor> {
        if bond + 1 >= self.n() {
            return Err(Error::OutOfRange(format!("bond {bond} on a chain of {}", self.n())));
        }
        let left = self.trace_env_left(bond);
        let right = self.trace_env_right(bond + 2);
        let theta = contract(&self.sites[bond], &self.sites[bond + 1], &[(2, 0)])?;
        let (cl, cr) = (theta.shape()[0], theta.shape()[3]);
        let data = theta.data();
        let mut out = Tensor::zeros(vec![4, 4]);
        for l in 0..cl {
            for pa in 0..4 {
                for pb in 0..4 {
                    let base = ((l * 4 + pa) * 4 + pb) * cr;
                    let s: C64 = (0..cr).map(|r| data[base + r] * right[r]).sum();
                    let (row, col) = (((pa >> 1) << 1) | (pb >> 1), ((pa & 1) << 1) | (pb & 1));
                    let prev = out.get(&[row, col]);
                    out.set(&[row, col], prev + left[l] * s);
                }
            }
        }
        Ok(out)
    }

    fn trace_env_left(&self, upto: usize) -> Vec<C64> {
        let mut env = vec![ONE];
        for site in &self.sites[..upto] {
            let cr = site.shape()[2];
            let mut next = vec![ZERO; cr];
            for (l, e) in env.iter().enumerate() {
                for p in [0usize, 3] {
                    for (r, acc) in next.iter_mut().enumerate() {
                        *acc += e * site.get(&[l, p, r]);
                    }
                }
            }
            env = next;
        }
        env
    }

    fn trace_env_right(&self, from: usize) -> Vec<C64> {
        let mut env = vec![ONE];
        for site in self.sites[from..].iter().rev() {
            let cl = site.shape()[0];
            let mut next = vec![ZERO; cl];
            for (l, acc) in next.iter_mut().enumerate() {
                for p in [0usize, 3] {
                    for (r, e) in env.iter().enumerate() {
                        *acc += site.get(&[l, p, r]) * e;
                    }
                }
            }
            env = next;
        }
        env
    }

    /// Smallest eigenvalue over all nearest-neighbour two-site reduced
    /// density matrices. Logs a warning below [`POSITIVITY_WARN`].
    pub fn min_two_site_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for bond in 0..self.n() - 1 {
            let ev = hermitian_eigvals(&self.two_site_rdm(bond)?)?;
            min = min.min(ev[0]);
        }
        if min < POSITIVITY_WARN {
            warn!("two-site reduced density matrix has eigenvalue {min:.3e}; truncation is breaking positivity");
        }
        Ok(min)
    }

    pub fn checkpoint(&self, meta: CheckpointMeta) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            meta,
            cumulative_discarded_weight: self.cumulative_discarded_weight,
            counters: self.counters.clone(),
            steps_taken: self.steps_taken,
            sites: self.sites.clone(),
        }
    }

    pub fn from_checkpoint(cp: Checkpoint) -> Result<Self> {
        if cp.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "checkpoint schema {} is not supported (expected {})",
                cp.schema_version, CHECKPOINT_SCHEMA_VERSION
            )));
        }
        for s in &cp.sites {
            s.check_finite()?;
        }
        let mut m = Mpdo::from_sites(cp.sites)?;
        m.cumulative_discarded_weight = cp.cumulative_discarded_weight;
        m.counters = cp.counters;
        m.steps_taken = cp.steps_taken;
        Ok(m)
    }
}

fn validate_chain(sites: &[Tensor]) -> Result<()> {
    if sites.is_empty() {
        return Err(Error::Dimension("MPDO needs at least one site".into()));
    }
    for (i, s) in sites.iter().enumerate() {
        if s.rank() != 3 || s.shape()[1] != 4 {
            return Err(Error::Dimension(format!("site {i} has shape {:?}, expected (χL, 4, χR)", s.shape())));
        }
    }
    if sites[0].shape()[0] != 1 || sites[sites.len() - 1].shape()[2] != 1 {
        return Err(Error::Dimension("outer bonds must have dimension 1".into()));
    }
    for (i, w) in sites.windows(2).enumerate() {
        if w[0].shape()[2] != w[1].shape()[0] {
            return Err(Error::Dimension(format!(
                "bond {i}: right extent {} != left extent {}",
                w[0].shape()[2],
                w[1].shape()[0]
            )));
        }
    }
    Ok(())
}

fn check_real(v: C64, what: &str) -> Result<()> {
    if !v.re.is_finite() || v.im.abs() >= IMAG_ERROR {
        return Err(Error::Numerical(format!("{what} = {v} is not real")));
    }
    if v.im.abs() >= IMAG_TOLERANCE && !IMAG_WARNED.swap(true, Ordering::Relaxed) {
        warn!("{what} = {v} has an imaginary residue above {IMAG_TOLERANCE:e}; truncation is breaking Hermiticity (logged once)");
    }
    Ok(())
}

fn check_hermitian_2x2(op: &Tensor) -> Result<()> {
    if op.shape() != [2, 2] {
        return Err(Error::Dimension(format!("local operator must be 2x2, got {:?}", op.shape())));
    }
    let adj = op.adjoint()?;
    if op.sub(&adj)?.frobenius_norm() > 1e-12 {
        return Err(Error::InvalidParameter("local operator is not Hermitian".into()));
    }
    Ok(())
}

/// λ = −ln(Λ)/n.
pub fn return_rate(echo: f64, n: usize) -> Result<f64> {
    if !(echo > 0.0 && echo <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("echo must lie in (0, 1], got {echo}")));
    }
    if n == 0 {
        return Err(Error::Domain("return rate needs n >= 1".into()));
    }
    // + 0.0 turns −0 at Λ = 1 into 0
    Ok(-echo.ln() / n as f64 + 0.0)
}

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub t: f64,
    pub params: HamiltonianParams,
    pub noise: NoiseParams,
    pub policy: TruncationPolicy,
}

/// Restartable snapshot of an MPDO run, stored as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub meta: CheckpointMeta,
    pub cumulative_discarded_weight: f64,
    pub counters: TruncationCounters,
    pub steps_taken: u64,
    pub sites: Vec<Tensor>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GateCache, Pauli};
    use crate::tensor::expm;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn down() -> [C64; 2] {
        [ZERO, ONE]
    }

    #[test]
    fn product_state_components() {
        let m = Mpdo::from_product_state(&ProductState::uniform(3, down()).unwrap());
        for s in m.sites() {
            assert_eq!(s.data(), &[ZERO, ZERO, ZERO, ONE]);
        }
        let p = Mpdo::from_product_state(&ProductState::plus(3));
        for s in p.sites() {
            for z in s.data() {
                assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(p.trace(), 1.0, epsilon = 1e-15);
        assert_eq!(p.bond_dims(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn product_state_rejects_unnormalized() {
        assert!(ProductState::new(vec![[ONE, ONE]]).is_err());
    }

    #[test]
    fn maximally_mixed_observables() {
        let m = Mpdo::maximally_mixed(5);
        assert_abs_diff_eq!(m.trace(), 1.0, epsilon = 1e-15);
        let echo = m.loschmidt_echo(&ProductState::plus(5)).unwrap();
        assert_abs_diff_eq!(echo, 2f64.powi(-5), epsilon = 1e-16);
        let rate = return_rate(echo, 5).unwrap();
        assert_abs_diff_eq!(rate, std::f64::consts::LN_2, epsilon = 1e-14);
        let zz = m
            .local_expectation(&[(1, Pauli::Z.matrix()), (2, Pauli::Z.matrix())])
            .unwrap();
        assert_abs_diff_eq!(zz, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn plus_state_observables() {
        let n = 6;
        let psi = ProductState::plus(n);
        let m = Mpdo::from_product_state(&psi);
        assert_abs_diff_eq!(m.loschmidt_echo(&psi).unwrap(), 1.0, epsilon = 1e-14);
        let czz = m
            .local_expectation(&[(n / 2 - 1, Pauli::Z.matrix()), (n / 2, Pauli::Z.matrix())])
            .unwrap();
        assert_abs_diff_eq!(czz, 0.0, epsilon = 1e-15);
        let sx = m.local_expectation(&[(2, Pauli::X.matrix())]).unwrap();
        assert_abs_diff_eq!(sx, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expectation_errors() {
        let m = Mpdo::maximally_mixed(3);
        assert!(m.local_expectation(&[(3, Pauli::Z.matrix())]).is_err());
        assert!(m
            .local_expectation(&[(1, Pauli::Z.matrix()), (1, Pauli::X.matrix())])
            .is_err());
        let not_herm = Tensor::new(vec![2, 2], vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!(m.local_expectation(&[(0, not_herm)]).is_err());
        assert!(m.loschmidt_echo(&ProductState::plus(4)).is_err());
    }

    #[test]
    fn return_rate_examples() {
        assert_eq!(return_rate(1.0, 4).unwrap(), 0.0);
        assert_abs_diff_eq!(return_rate((-8.0f64).exp(), 8).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(return_rate(0.0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_gate_leaves_observables() {
        let psi = ProductState::plus(4);
        let mut m = Mpdo::from_product_state(&psi);
        let params = HamiltonianParams::standard_chain(4);
        let mut cache = GateCache::new(params, NoiseParams::new(0.05).unwrap()).unwrap();
        let policy = TruncationPolicy::default();
        for _ in 0..5 {
            for b in 0..3 {
                m.apply_gate(&cache.gate(b, 0.1).unwrap(), &policy).unwrap();
            }
        }
        let before = (
            m.loschmidt_echo(&psi).unwrap(),
            m.local_expectation(&[(1, Pauli::Z.matrix()), (2, Pauli::Z.matrix())]).unwrap(),
            m.trace(),
        );
        let id = BondGate {
            bond_index: 1,
            superop: Arc::new(Tensor::identity(16)),
            sub_step: 0.0,
        };
        m.apply_gate(&id, &TruncationPolicy::exact(1000)).unwrap();
        let after = (
            m.loschmidt_echo(&psi).unwrap(),
            m.local_expectation(&[(1, Pauli::Z.matrix()), (2, Pauli::Z.matrix())]).unwrap(),
            m.trace(),
        );
        assert_abs_diff_eq!(before.0, after.0, epsilon = 1e-12);
        assert_abs_diff_eq!(before.1, after.1, epsilon = 1e-12);
        assert_abs_diff_eq!(before.2, after.2, epsilon = 1e-12);
    }

    #[test]
    fn two_site_unitary_gate_matches_dense_conjugation() {
        let params = HamiltonianParams::new(2, 1.0, 0.3, 0.4).unwrap();
        let psi = ProductState::new(vec![
            [C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
            [C64::from(std::f64::consts::FRAC_1_SQRT_2), C64::from(-std::f64::consts::FRAC_1_SQRT_2)],
        ])
        .unwrap();
        let mut m = Mpdo::from_product_state(&psi);
        let dt = 0.7;
        let mut cache = GateCache::new(params, NoiseParams::noiseless()).unwrap();
        m.apply_gate(&cache.gate(0, dt).unwrap(), &TruncationPolicy::exact(16)).unwrap();

        let h = crate::model::two_site_hamiltonian(&params, 0).unwrap();
        let u = expm(&h.scale(C64::new(0.0, -dt))).unwrap();
        let v = psi.to_dense();
        let uv = u.apply(&v).unwrap();
        let expected = Tensor::from_fn(vec![4, 4], |i| uv[i[0]] * uv[i[1]].conj());
        let got = m.to_dense_matrix().unwrap();
        assert!(got.sub(&expected).unwrap().frobenius_norm() < 1e-13);
        let rdm = m.two_site_rdm(0).unwrap();
        assert!(rdm.sub(&expected).unwrap().frobenius_norm() < 1e-13);
    }

    #[test]
    fn chi_one_truncation_discards_weight() {
        // entangling ZZ evolution of |+>|+> has Schmidt rank > 1 at generic times
        let params = HamiltonianParams::new(2, 1.0, 0.0, 0.0).unwrap();
        let psi = ProductState::plus(2);
        let dt = 0.4;
        let mut cache = GateCache::new(params, NoiseParams::noiseless()).unwrap();
        let gate = cache.gate(0, dt).unwrap();

        // oracle: exact operator-Schmidt spectrum of the evolved two-site ρ
        let mut exact = Mpdo::from_product_state(&psi);
        let rep = exact.apply_gate(&gate, &TruncationPolicy::exact(16)).unwrap();
        assert!(rep.bond_dim > 1);
        assert_eq!(rep.discarded_weight, 0.0);

        let mut m = Mpdo::from_product_state(&psi);
        let rep1 = m.apply_gate(&gate, &TruncationPolicy::new(0.0, 1).unwrap()).unwrap();
        assert!(rep1.discarded_weight > 0.0);
        assert!(rep1.hit_chi_max);
        m.apply_gate(&gate, &TruncationPolicy::new(0.0, 1).unwrap()).unwrap();
        assert!(m.cumulative_discarded_weight() > rep1.discarded_weight);
    }

    #[test]
    fn step_renormalizes_and_zero_duration_is_identity() {
        let params = HamiltonianParams::standard_chain(4);
        let psi = ProductState::plus(4);
        let mut m = Mpdo::from_product_state(&psi);
        let zero = BondGate {
            bond_index: 0,
            superop: Arc::new(expm(&Tensor::zeros(vec![16, 16])).unwrap()),
            sub_step: 0.0,
        };
        let d = m.step(&[zero.clone()], &TruncationPolicy::default()).unwrap();
        assert_abs_diff_eq!(d.trace_before_renorm, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.loschmidt_echo(&psi).unwrap(), 1.0, epsilon = 1e-14);

        // scale a gate by 2 to force a trace mismatch
        let doubled = BondGate {
            superop: Arc::new(Tensor::identity(16).scale(C64::from(2.0))),
            ..zero
        };
        let d = m.step(&[doubled], &TruncationPolicy::default()).unwrap();
        assert_abs_diff_eq!(d.trace_before_renorm, 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m.trace(), 1.0, epsilon = 1e-13);
        let _ = params;
    }

    #[test]
    fn canonicalize_preserves_state() {
        let params = HamiltonianParams::standard_chain(5);
        let psi = ProductState::plus(5);
        let mut m = Mpdo::from_product_state(&psi);
        let mut cache = GateCache::new(params, NoiseParams::new(0.02).unwrap()).unwrap();
        let seq = crate::model::trotter_sequence_cached(&mut cache, 0.2, crate::model::TrotterOrder::Second).unwrap();
        let exact = TruncationPolicy::exact(1024);
        for _ in 0..6 {
            m.step(&seq, &exact).unwrap();
        }
        let before = m.to_dense_matrix().unwrap();
        m.canonicalize(&exact).unwrap();
        let after = m.to_dense_matrix().unwrap();
        assert!(before.sub(&after).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let params = HamiltonianParams::standard_chain(4);
        let psi = ProductState::plus(4);
        let mut m = Mpdo::from_product_state(&psi);
        let mut cache = GateCache::new(params, NoiseParams::new(0.01).unwrap()).unwrap();
        let seq = crate::model::trotter_sequence_cached(&mut cache, 0.1, crate::model::TrotterOrder::Second).unwrap();
        for _ in 0..3 {
            m.step(&seq, &TruncationPolicy::default()).unwrap();
        }
        let meta = CheckpointMeta {
            t: 0.3,
            params,
            noise: NoiseParams::new(0.01).unwrap(),
            policy: TruncationPolicy::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        m.checkpoint(meta.clone()).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.meta, meta);
        let restored = Mpdo::from_checkpoint(back).unwrap();
        assert_eq!(restored.sites(), m.sites());
        assert_eq!(restored.steps_taken(), 3);
    }

    #[test]
    fn merged_advance_matches_single_steps() {
        let params = HamiltonianParams::standard_chain(5);
        let noise = NoiseParams::new(0.03).unwrap();
        let policy = TruncationPolicy::exact(256);
        let psi0 = ProductState::plus(5);
        let seq = crate::model::trotter_sequence(&params, &noise, 0.05, crate::model::TrotterOrder::Second).unwrap();
        let plan = TrotterPlan::new(&params, &noise, 0.05, crate::model::TrotterOrder::Second).unwrap();
        let mut a = Mpdo::from_product_state(&psi0);
        let mut b = Mpdo::from_product_state(&psi0);
        for _ in 0..7 {
            a.step(&seq, &policy).unwrap();
        }
        b.advance(&plan, 4, &policy).unwrap();
        b.advance(&plan, 3, &policy).unwrap();
        assert_eq!(a.steps_taken(), b.steps_taken());
        let diff = a.to_dense_matrix().unwrap().sub(&b.to_dense_matrix().unwrap()).unwrap();
        assert!(diff.frobenius_norm() < 1e-12);
    }
}
