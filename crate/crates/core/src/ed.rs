//! Exact dense reference dynamics for small chains.
//!
//! Basis states are indexed with site 0 as the most significant bit, and bit
//! value 0 is the σᶻ = +1 state. Pure evolution uses a full eigendecomposition
//! of H; open-system evolution acts directly on the `2^N × 2^N` density matrix
//! (or, for N ≤ 4, exponentiates the full vectorized generator).

use std::collections::HashMap;

use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{HamiltonianParams, NoiseParams};
use crate::mpdo::{return_rate, ProductState, ECHO_FLOOR};
use crate::tensor::{expm, hermitian_eigvals, Tensor, C64, ONE, ZERO};

pub const MAX_PURE_SITES: usize = 12;
pub const MAX_LINDBLAD_SITES: usize = 8;
/// Largest chain handled by exponentiating the full 4^N generator.
pub const MAX_EXPM_SITES: usize = 4;
/// Upper bound on the fixed integrator step.
pub const MAX_RK4_STEP: f64 = 0.005;

#[derive(Clone, Debug, PartialEq)]
pub enum DenseState {
    Pure { psi: Vec<C64>, n: usize },
    Mixed { rho: Tensor, n: usize },
}

impl DenseState {
    pub fn pure(psi: Vec<C64>) -> Result<Self> {
        let n = n_from_dim(psi.len())?;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("pure state has norm {norm}")));
        }
        Ok(DenseState::Pure { psi, n })
    }

    pub fn mixed(rho: Tensor) -> Result<Self> {
        let dim = rho.shape()[0];
        if rho.shape() != [dim, dim] {
            return Err(Error::Dimension(format!("density matrix must be square, got {:?}", rho.shape())));
        }
        let n = n_from_dim(dim)?;
        let tr = rho.trace()?;
        if (tr - ONE).norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!("density matrix has trace {tr}")));
        }
        if rho.sub(&rho.adjoint()?)?.frobenius_norm() > 1e-12 {
            return Err(Error::InvalidParameter("density matrix is not Hermitian".into()));
        }
        Ok(DenseState::Mixed { rho, n })
    }

    pub fn n(&self) -> usize {
        match self {
            DenseState::Pure { n, .. } | DenseState::Mixed { n, .. } => *n,
        }
    }

    pub fn to_density_matrix(&self) -> Tensor {
        match self {
            DenseState::Mixed { rho, .. } => rho.clone(),
            DenseState::Pure { psi, .. } => outer(psi),
        }
    }

    /// ⟨φ|ρ|φ⟩ (or |⟨φ|ψ⟩|² for a pure state).
    pub fn overlap(&self, phi: &[C64]) -> Result<f64> {
        match self {
            DenseState::Pure { psi, .. } => {
                check_len(phi.len(), psi.len())?;
                let amp: C64 = phi.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
                Ok(amp.norm_sqr())
            }
            DenseState::Mixed { rho, .. } => {
                check_len(phi.len(), rho.shape()[0])?;
                let r = rho.apply(phi)?;
                let v: C64 = phi.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                Ok(v.re)
            }
        }
    }

    /// ⟨σᶻ_i σᶻ_j⟩.
    pub fn zz(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        if i >= n || j >= n || i == j {
            return Err(Error::OutOfRange(format!("sites ({i}, {j}) on a chain of {n}")));
        }
        let (mi, mj) = (bit(n, i), bit(n, j));
        let sign = |a: usize| if (a & mi != 0) ^ (a & mj != 0) { -1.0 } else { 1.0 };
        Ok(match self {
            DenseState::Pure { psi, .. } => psi.iter().enumerate().map(|(a, z)| sign(a) * z.norm_sqr()).sum(),
            DenseState::Mixed { rho, .. } => {
                let d = rho.shape()[0];
                (0..d).map(|a| sign(a) * rho.data()[a * d + a].re).sum()
            }
        })
    }
}

fn n_from_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!("dimension {dim} is not 2^N")));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { expected: b, got: a });
    }
    Ok(())
}

fn bit(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

fn outer(psi: &[C64]) -> Tensor {
    let d = psi.len();
    Tensor::from_fn(vec![d, d], |ix| psi[ix[0]] * psi[ix[1]].conj())
}

fn check_capacity(what: &'static str, n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::Capacity { what, max, got: n });
    }
    Ok(())
}

/// H as a diagonal plus a list of bit-flip terms, all real.
#[derive(Clone, Debug)]
pub struct IsingOperator {
    n: usize,
    diag: Vec<f64>,
    flips: Vec<(usize, f64)>,
}

impl IsingOperator {
    pub fn new(params: &HamiltonianParams) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        let dim = 1usize << n;
        let diag = (0..dim)
            .map(|a| {
                let zz: f64 = (0..n - 1)
                    .map(|i| {
                        let si = a & bit(n, i) != 0;
                        let sj = a & bit(n, i + 1) != 0;
                        if si == sj { 1.0 } else { -1.0 }
                    })
                    .sum();
                -0.5 * params.jz * zz
            })
            .collect();
        let mut flips = Vec::new();
        if params.jx != 0.0 {
            flips.extend((0..n - 1).map(|i| (bit(n, i) | bit(n, i + 1), -0.5 * params.jx)));
        }
        if params.hx != 0.0 {
            flips.extend((0..n).map(|i| (bit(n, i), -0.5 * params.hx)));
        }
        Ok(IsingOperator { n, diag, flips })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Tensor {
        let d = self.dim();
        let mut h = Tensor::zeros(vec![d, d]);
        let data = h.data_mut();
        for a in 0..d {
            data[a * d + a] += C64::from(self.diag[a]);
            for &(m, c) in &self.flips {
                data[(a ^ m) * d + a] += C64::from(c);
            }
        }
        h
    }
}

pub fn dense_hamiltonian(params: &HamiltonianParams) -> Result<Tensor> {
    check_capacity("dense Hamiltonian", params.n, MAX_PURE_SITES)?;
    Ok(IsingOperator::new(params)?.to_dense())
}

/// Exact unitary evolution through the eigendecomposition of H.
#[derive(Clone, Debug)]
pub struct PureEvolver {
    energies: Vec<f64>,
    vectors: Tensor,
    /// Initial state expressed in the eigenbasis.
    coeffs: Vec<C64>,
    psi0: Vec<C64>,
}

impl PureEvolver {
    pub fn new(params: &HamiltonianParams, psi0: &[C64]) -> Result<Self> {
        check_capacity("pure evolution", params.n, MAX_PURE_SITES)?;
        let h = dense_hamiltonian(params)?;
        check_len(psi0.len(), h.shape()[0])?;
        let (e, v) = h
            .to_array2()
            .eigh(UPLO::Lower)
            .map_err(|err| Error::Numerical(format!("eigh failed: {err}")))?;
        let vectors = Tensor::from_array2(v);
        let coeffs = vectors.adjoint()?.apply(psi0)?;
        Ok(PureEvolver {
            energies: e.to_vec(),
            vectors,
            coeffs,
            psi0: psi0.to_vec(),
        })
    }

    /// State at time `t`; `t = 0` returns the initial state exactly rather
    /// than its round trip through the eigenbasis.
    pub fn state_at(&self, t: f64) -> Result<Vec<C64>> {
        if t == 0.0 {
            return Ok(self.psi0.clone());
        }
        let phased: Vec<C64> = self
            .coeffs
            .iter()
            .zip(&self.energies)
            .map(|(c, e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        self.vectors.apply(&phased)
    }

    /// |⟨ψ₀|e^{−iHt}|ψ₀⟩|² = |Σ_k |c_k|² e^{−iE_k t}|².
    pub fn echo_at(&self, t: f64) -> f64 {
        let amp: C64 = self
            .coeffs
            .iter()
            .zip(&self.energies)
            .map(|(c, e)| c.norm_sqr() * C64::from_polar(1.0, -e * t))
            .sum();
        amp.norm_sqr()
    }
}

pub fn evolve_pure(psi0: &[C64], params: &HamiltonianParams, t: f64) -> Result<DenseState> {
    DenseState::pure(PureEvolver::new(params, psi0)?.state_at(t)?)
}

/// Full vectorized Lindblad generator, row-major (`vec(ρ)[a·d + b] = ρ[a, b]`),
/// built from the global Hamiltonian and embedded Pauli jumps.
pub fn dense_liouvillian(params: &HamiltonianParams, noise: &NoiseParams) -> Result<Tensor> {
    check_capacity("dense Liouvillian", params.n, 5)?;
    let h = dense_hamiltonian(params)?;
    let d = h.shape()[0];
    let dd = d * d;
    let mut l = Tensor::zeros(vec![dd, dd]);
    let hd = h.data();
    let minus_i = C64::new(0.0, -1.0);
    {
        let ld = l.data_mut();
        // −i(H⊗I − I⊗Hᵀ)
        for a in 0..d {
            for b in 0..d {
                let row = a * d + b;
                for k in 0..d {
                    ld[row * dd + k * d + b] += minus_i * hd[a * d + k];
                    ld[row * dd + a * d + k] -= minus_i * hd[k * d + b];
                }
            }
        }
    }
    if noise.gamma > 0.0 {
        let n = params.n;
        let ld = l.data_mut();
        for site in 0..n {
            let m = bit(n, site);
            for a in 0..d {
                for b in 0..d {
                    let row = a * d + b;
                    let (sa, sb) = (a & m != 0, b & m != 0);
                    // X ρ X, Y ρ Y†, Z ρ Z in entrywise form, minus 3ρ
                    let zsign = if sa == sb { 1.0 } else { -1.0 };
                    let flipped = (a ^ m) * d + (b ^ m);
                    ld[row * dd + flipped] += C64::from(noise.gamma * (1.0 + zsign));
                    ld[row * dd + row] += C64::from(noise.gamma * (zsign - 3.0));
                }
            }
        }
    }
    Ok(l)
}

/// dρ/dt for the Ising chain with uniform depolarizing noise.
fn lindblad_rhs(op: &IsingOperator, gamma: f64, rho: &[C64], out: &mut [C64]) {
    let d = op.dim();
    let n = op.n;
    let minus_i = C64::new(0.0, -1.0);
    out.par_chunks_mut(d).enumerate().for_each(|(a, row)| {
        for (b, o) in row.iter_mut().enumerate() {
            let r = rho[a * d + b];
            // Hρ − ρH
            let mut comm = r * (op.diag[a] - op.diag[b]);
            for &(m, c) in &op.flips {
                comm += (rho[(a ^ m) * d + b] - rho[a * d + (b ^ m)]) * c;
            }
            let mut acc = minus_i * comm;
            if gamma > 0.0 {
                for site in 0..n {
                    let m = bit(n, site);
                    if (a & m != 0) == (b & m != 0) {
                        acc += (rho[(a ^ m) * d + (b ^ m)] - r) * (2.0 * gamma);
                    } else {
                        acc -= r * (4.0 * gamma);
                    }
                }
            }
            *o = acc;
        }
    });
}

/// Reference open-system evolution on the full density matrix.
pub struct LindbladEvolver {
    params: HamiltonianParams,
    noise: NoiseParams,
    op: IsingOperator,
    rho: Vec<C64>,
    max_step: f64,
    t: f64,
    propagators: HashMap<u64, Tensor>,
}

impl LindbladEvolver {
    pub fn new(params: &HamiltonianParams, noise: &NoiseParams, rho0: &Tensor, dt: f64) -> Result<Self> {
        check_capacity("dense Lindblad evolution", params.n, MAX_LINDBLAD_SITES)?;
        let noise = NoiseParams::new(noise.gamma)?;
        let op = IsingOperator::new(params)?;
        if rho0.shape() != [op.dim(), op.dim()] {
            return Err(Error::Dimension(format!(
                "initial density matrix {:?} does not match {} sites",
                rho0.shape(),
                params.n
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        Ok(LindbladEvolver {
            params: *params,
            noise,
            op,
            rho: rho0.data().to_vec(),
            max_step: dt.min(MAX_RK4_STEP),
            t: 0.0,
            propagators: HashMap::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn advance(&mut self, duration: f64) -> Result<()> {
        if duration < 0.0 {
            return Err(Error::InvalidParameter("cannot evolve backwards".into()));
        }
        if duration == 0.0 {
            return Ok(());
        }
        if self.params.n <= MAX_EXPM_SITES {
            let key = duration.to_bits();
            if !self.propagators.contains_key(&key) {
                let l = dense_liouvillian(&self.params, &self.noise)?;
                self.propagators.insert(key, expm(&l.scale(C64::from(duration)))?);
            }
            self.rho = self.propagators[&key].apply(&self.rho)?;
        } else {
            let steps = (duration / self.max_step - 1e-9).ceil().max(1.0) as usize;
            let h = duration / steps as f64;
            for _ in 0..steps {
                self.rk4_step(h);
            }
        }
        self.t += duration;
        Ok(())
    }

    fn rk4_step(&mut self, h: f64) {
        let len = self.rho.len();
        let gamma = self.noise.gamma;
        let rhs = |rho: &[C64]| {
            let mut out = vec![ZERO; len];
            lindblad_rhs(&self.op, gamma, rho, &mut out);
            out
        };
        let shifted = |k: &[C64], f: f64| -> Vec<C64> {
            self.rho.par_iter().zip(k).map(|(r, kk)| r + kk * f).collect()
        };
        let k1 = rhs(&self.rho);
        let k2 = rhs(&shifted(&k1, 0.5 * h));
        let k3 = rhs(&shifted(&k2, 0.5 * h));
        let k4 = rhs(&shifted(&k3, h));
        let w = h / 6.0;
        self.rho
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, r)| *r += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * w);
    }

    pub fn density_matrix(&self) -> Tensor {
        let d = self.op.dim();
        Tensor::new(vec![d, d], self.rho.clone()).expect("finite evolution")
    }

    pub fn state(&self) -> Result<DenseState> {
        let mut rho = self.density_matrix();
        // the integrator drifts at ~1e-12; pin trace and Hermiticity before validation
        let adj = rho.adjoint()?;
        rho = rho.add(&adj)?.scale(C64::from(0.5));
        let tr = rho.trace()?.re;
        DenseState::mixed(rho.scale(C64::from(1.0 / tr)))
    }

    pub fn raw_trace(&self) -> f64 {
        let d = self.op.dim();
        (0..d).map(|a| self.rho[a * d + a].re).sum()
    }
}

pub fn evolve_lindblad_dense(
    rho0: &Tensor,
    params: &HamiltonianParams,
    noise: &NoiseParams,
    t: f64,
    dt: f64,
) -> Result<DenseState> {
    let mut ev = LindbladEvolver::new(params, noise, rho0, dt)?;
    ev.advance(t)?;
    ev.state()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenseObservables {
    pub echo: f64,
    pub rate: f64,
    pub czz: f64,
}

/// Loschmidt echo, return rate and the central ⟨σᶻσᶻ⟩ correlator with the
/// same definitions as the MPDO simulator.
pub fn observables_dense(state: &DenseState, psi0: &ProductState) -> Result<DenseObservables> {
    let n = state.n();
    if psi0.n() != n {
        return Err(Error::Dimension(format!("initial state has {} sites, state has {n}", psi0.n())));
    }
    let echo = state.overlap(&psi0.to_dense())?.clamp(ECHO_FLOOR, 1.0);
    let (i, j) = central_pair(n);
    Ok(DenseObservables {
        echo,
        rate: return_rate(echo, n)?,
        czz: state.zz(i, j)?,
    })
}

/// 0-indexed sites of the central bond, (N/2 − 1, N/2).
pub fn central_pair(n: usize) -> (usize, usize) {
    (n / 2 - 1, n / 2)
}

/// ½‖a − b‖₁ for Hermitian matrices.
pub fn trace_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    let ev = hermitian_eigvals(&a.sub(b)?)?;
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

pub fn min_eigenvalue(rho: &Tensor) -> Result<f64> {
    Ok(hermitian_eigvals(rho)?[0])
}

pub fn purity(rho: &Tensor) -> f64 {
    // Tr ρ² = Σ |ρ_ab|² for Hermitian ρ
    rho.data().iter().map(|z| z.norm_sqr()).sum()
}
