//! Gate-level density-matrix simulation of the Trotterized Loschmidt circuit
//!
//! ```text
//! |0⟩ ─ H ─┤ U(δt) ├ ... ┤ U(δt) ├─ H ─ measure all-zeros
//! ```
//!
//! with `U(δt) = RZZ layers · RXX layers · RX layer` (time order), a
//! depolarizing channel after every gate on each qubit it touches, and
//! unitary folding to scale the noise.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ed::DenseState;
use crate::error::{Error, Result};
use crate::model::HamiltonianParams;
use crate::tensor::{expm, kron, Tensor, C64, ONE, ZERO};

pub const MAX_QUBITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    Hadamard,
    Rx,
    Rxx,
    Rzz,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Hadamard | GateKind::Rx => 1,
            GateKind::Rxx | GateKind::Rzz => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Hadamard => "H",
            GateKind::Rx => "RX",
            GateKind::Rxx => "RXX",
            GateKind::Rzz => "RZZ",
        }
    }
}

/// Rotations follow `R_P(θ) = exp(−i θ/2 P)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: f64,
}

impl Gate {
    pub fn h(q: usize) -> Self {
        Gate { kind: GateKind::Hadamard, qubits: vec![q], angle: 0.0 }
    }

    pub fn rx(q: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rx, qubits: vec![q], angle }
    }

    pub fn rxx(a: usize, b: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rxx, qubits: vec![a, b], angle }
    }

    pub fn rzz(a: usize, b: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rzz, qubits: vec![a, b], angle }
    }

    pub fn inverse(&self) -> Self {
        match self.kind {
            GateKind::Hadamard => self.clone(),
            _ => Gate { angle: -self.angle, ..self.clone() },
        }
    }

    pub fn unitary(&self) -> Tensor {
        let x = crate::model::Pauli::X.matrix();
        let z = crate::model::Pauli::Z.matrix();
        let gen = |p: Tensor| expm(&p.scale(C64::new(0.0, -self.angle / 2.0))).expect("small rotation generator");
        match self.kind {
            GateKind::Hadamard => {
                let r = C64::from(std::f64::consts::FRAC_1_SQRT_2);
                Tensor::new(vec![2, 2], vec![r, r, r, -r]).expect("literal")
            }
            GateKind::Rx => gen(x),
            GateKind::Rxx => gen(kron(&x, &x).expect("2x2")),
            GateKind::Rzz => gen(kron(&z, &z).expect("2x2")),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.qubits.len() != self.kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{} acts on {} qubits, got {:?}",
                self.kind.name(),
                self.kind.arity(),
                self.qubits
            )));
        }
        if self.qubits.iter().any(|&q| q >= n_qubits) {
            return Err(Error::OutOfRange(format!("{:?} on {n_qubits} qubits", self.qubits)));
        }
        if self.qubits.len() == 2 && self.qubits[0] == self.qubits[1] {
            return Err(Error::InvalidParameter(format!("repeated qubit in {:?}", self.qubits)));
        }
        if !self.angle.is_finite() {
            return Err(Error::InvalidParameter("non-finite gate angle".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    layers: Vec<Vec<Gate>>,
}

impl Circuit {
    pub fn new(n_qubits: usize, layers: Vec<Vec<Gate>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("circuit needs at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            let mut used = vec![false; n_qubits];
            for g in layer {
                g.validate(n_qubits)?;
                for &q in &g.qubits {
                    if std::mem::replace(&mut used[q], true) {
                        return Err(Error::InvalidParameter(format!("layer {k} uses qubit {q} twice")));
                    }
                }
            }
        }
        Ok(Circuit { n_qubits, layers })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Reversed circuit of inverted gates.
    pub fn inverse(&self) -> Self {
        Circuit {
            n_qubits: self.n_qubits,
            layers: self.layers.iter().rev().map(|l| invert_layer(l)).collect(),
        }
    }

    /// One gate per line: `layer KIND qubits... angle`.
    pub fn to_netlist(&self) -> String {
        let mut out = String::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for g in layer {
                let qs: Vec<String> = g.qubits.iter().map(|q| q.to_string()).collect();
                writeln!(out, "{k} {} {} {:.16e}", g.kind.name(), qs.join(" "), g.angle).unwrap();
            }
        }
        out
    }
}

pub fn invert_layer(layer: &[Gate]) -> Vec<Gate> {
    // gates within a layer are disjoint, so order inside the layer is free
    layer.iter().map(Gate::inverse).collect()
}

/// First-order Trotter circuit for ⟨0|H^⊗N U(t) H^⊗N|0⟩ with `m_steps`
/// steps of `δt = t / m_steps`.
pub fn build_trotter_circuit(params: &HamiltonianParams, t: f64, m_steps: usize) -> Result<Circuit> {
    params.validate()?;
    if m_steps < 1 {
        return Err(Error::InvalidParameter("m_steps must be >= 1".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be finite and >= 0, got {t}")));
    }
    let n = params.n;
    let dt = t / m_steps as f64;
    // exp(−i δt H_zz) = Π exp(+i δt J_z/2 σᶻσᶻ) = Π RZZ(−δt J_z), likewise for XX and X
    let (theta, phi, gx) = (-dt * params.jz, -dt * params.jx, -dt * params.hx);

    let hadamards: Vec<Gate> = (0..n).map(Gate::h).collect();
    let bond_layers = |make: &dyn Fn(usize) -> Gate| -> Vec<Vec<Gate>> {
        [0usize, 1]
            .iter()
            .map(|&parity| (parity..n - 1).step_by(2).map(make).collect::<Vec<_>>())
            .filter(|l| !l.is_empty())
            .collect()
    };
    let mut layers = vec![hadamards.clone()];
    for _ in 0..m_steps {
        layers.extend(bond_layers(&|b| Gate::rzz(b, b + 1, theta)));
        layers.extend(bond_layers(&|b| Gate::rxx(b, b + 1, phi)));
        layers.push((0..n).map(|q| Gate::rx(q, gx)).collect());
    }
    layers.push(hadamards);
    Circuit::new(n, layers)
}

/// `U → U (U† U)^n`; depth becomes `(2n + 1) d`.
pub fn fold_global(c: &Circuit, n: usize) -> Circuit {
    let inv = c.inverse();
    let mut layers = c.layers.clone();
    for _ in 0..n {
        layers.extend(inv.layers.iter().cloned());
        layers.extend(c.layers.iter().cloned());
    }
    Circuit {
        n_qubits: c.n_qubits,
        layers,
    }
}

/// Fold `k` layers chosen by a seeded draw without replacement (cycling
/// through all layers again once `k > d`); each fold replaces a layer `L`
/// with `L L† L`. Returns the folded circuit and `α = 1 + 2k/d`.
pub fn fold_layers(c: &Circuit, k: usize, seed: u64) -> (Circuit, f64) {
    let d = c.depth();
    let folds = layer_fold_counts(d, k, seed);
    let mut layers = Vec::with_capacity(d + 2 * k);
    for (layer, &times) in c.layers.iter().zip(&folds) {
        layers.push(layer.clone());
        let inv = invert_layer(layer);
        for _ in 0..times {
            layers.push(inv.clone());
            layers.push(layer.clone());
        }
    }
    let alpha = (d + 2 * k) as f64 / d as f64;
    (
        Circuit {
            n_qubits: c.n_qubits,
            layers,
        },
        alpha,
    )
}

/// How many times each of `d` layers is folded when `k` folds are drawn
/// with the given seed.
pub fn layer_fold_counts(d: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0usize; d];
    for j in 0..k {
        folds[order[j % d]] += 1;
    }
    folds
}

/// Number of layer folds reaching the scale factor closest to `alpha`.
pub fn folds_for_alpha(depth: usize, alpha: f64) -> Result<usize> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale factor must be >= 1, got {alpha}")));
    }
    Ok(((alpha - 1.0) * depth as f64 / 2.0).round() as usize)
}

/// Apply a `2^k × 2^k` matrix to the given bit positions of a register of
/// `total` bits. `targets[0]` is the most significant bit of the matrix index.
fn apply_matrix(state: &mut [C64], total: usize, targets: &[usize], m: &[C64]) {
    let k = targets.len();
    let dim = 1usize << k;
    let masks: Vec<usize> = targets.iter().map(|&t| 1usize << (total - 1 - t)).collect();
    let all: usize = masks.iter().sum();
    let mut idx = vec![0usize; dim];
    let mut buf = vec![ZERO; dim];
    for base in 0..state.len() {
        if base & all != 0 {
            continue;
        }
        for (j, slot) in idx.iter_mut().enumerate() {
            *slot = masks
                .iter()
                .enumerate()
                .filter(|(bitpos, _)| j & (1 << (k - 1 - bitpos)) != 0)
                .fold(base, |acc, (_, m)| acc | m);
        }
        for (r, out) in buf.iter_mut().enumerate() {
            *out = (0..dim).map(|c| m[r * dim + c] * state[idx[c]]).sum();
        }
        for (j, &i) in idx.iter().enumerate() {
            state[i] = buf[j];
        }
    }
}

fn apply_gate_to_rho(rho: &mut [C64], n: usize, gate: &Gate) {
    let u = gate.unitary();
    // ρ is a 2n-bit register: row qubit q at position q, column qubit q at n + q
    apply_matrix(rho, 2 * n, &gate.qubits, u.data());
    let cols: Vec<usize> = gate.qubits.iter().map(|q| n + q).collect();
    apply_matrix(rho, 2 * n, &cols, u.conj().data());
}

/// ρ → (1 − p) ρ + p · I/2 ⊗ Tr_q ρ on qubit `q`.
fn depolarize(rho: &mut [C64], n: usize, q: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    let d = 1usize << n;
    let m = 1usize << (n - 1 - q);
    for a in 0..d {
        for b in 0..d {
            let i = a * d + b;
            if (a & m != 0) != (b & m != 0) {
                rho[i] *= 1.0 - p;
            } else if a & m == 0 {
                let j = (a | m) * d + (b | m);
                let (x, y) = (rho[i], rho[j]);
                let avg = (x + y) * 0.5;
                rho[i] = x * (1.0 - p) + avg * p;
                rho[j] = y * (1.0 - p) + avg * p;
            }
        }
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Capacity {
            what: "density-matrix circuit simulation",
            max: MAX_QUBITS,
            got: n,
        });
    }
    Ok(())
}

/// Density matrix of `n` qubits, starting in |0…0⟩, with a depolarizing
/// channel of strength `p` after every gate on each qubit it touches.
/// With idle noise on, qubits left alone by a layer get the channel too.
#[derive(Clone, Debug)]
pub struct DensitySimulator {
    n: usize,
    p: f64,
    idle_noise: bool,
    rho: Vec<C64>,
}

impl DensitySimulator {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        check_qubits(n)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("depolarizing probability must be in [0, 1], got {p}")));
        }
        let d = 1usize << n;
        let mut rho = vec![ZERO; d * d];
        rho[0] = ONE;
        Ok(DensitySimulator {
            n,
            p,
            idle_noise: false,
            rho,
        })
    }

    pub fn with_idle_noise(mut self, on: bool) -> Self {
        self.idle_noise = on;
        self
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n)?;
        apply_gate_to_rho(&mut self.rho, self.n, gate);
        for &q in &gate.qubits {
            depolarize(&mut self.rho, self.n, q, self.p);
        }
        Ok(())
    }

    pub fn apply_layer(&mut self, layer: &[Gate]) -> Result<()> {
        layer.iter().try_for_each(|g| self.apply_gate(g))?;
        if self.idle_noise {
            for q in 0..self.n {
                if !layer.iter().any(|g| g.qubits.contains(&q)) {
                    depolarize(&mut self.rho, self.n, q, self.p);
                }
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, c: &Circuit) -> Result<()> {
        if c.n_qubits != self.n {
            return Err(Error::Dimension(format!("circuit on {} qubits, simulator has {}", c.n_qubits, self.n)));
        }
        c.layers.iter().try_for_each(|l| self.apply_layer(l))
    }

    pub fn trace(&self) -> f64 {
        let d = 1usize << self.n;
        (0..d).map(|a| self.rho[a * d + a].re).sum()
    }

    /// Current state, Hermitian-symmetrized and trace-normalized.
    pub fn state(&self) -> Result<DenseState> {
        let d = 1usize << self.n;
        let t = Tensor::new(vec![d, d], self.rho.clone())?;
        let adj = t.adjoint()?;
        let sym = t.add(&adj)?.scale(C64::from(0.5));
        let tr = sym.trace()?.re;
        DenseState::mixed(sym.scale(C64::from(1.0 / tr)))
    }
}

/// Exact output density matrix from |0…0⟩ with a depolarizing channel of
/// strength `p` after every gate on each qubit it touches.
pub fn simulate_noisy(c: &Circuit, p: f64) -> Result<DenseState> {
    let mut sim = DensitySimulator::new(c.n_qubits, p)?;
    sim.apply_circuit(c)?;
    sim.state()
}

/// Noiseless state vector from |0…0⟩.
pub fn simulate_pure(c: &Circuit) -> Result<Vec<C64>> {
    let n = c.n_qubits;
    if n > 20 {
        return Err(Error::Capacity {
            what: "state-vector circuit simulation",
            max: 20,
            got: n,
        });
    }
    let mut psi = vec![ZERO; 1 << n];
    psi[0] = ONE;
    for layer in &c.layers {
        for g in layer {
            apply_matrix(&mut psi, n, &g.qubits, g.unitary().data());
        }
    }
    Ok(psi)
}

/// Probability of the all-zeros outcome, ⟨0…0|ρ|0…0⟩.
pub fn loschmidt_from_circuit(state: &DenseState) -> f64 {
    match state {
        DenseState::Pure { psi, .. } => psi[0].norm_sqr(),
        DenseState::Mixed { rho, .. } => rho.data()[0].re,
    }
}

/// ⟨σˣ_i σˣ_j⟩ of the circuit output, which equals ⟨σᶻ_i σᶻ_j⟩ of the state
/// before the final Hadamard layer.
pub fn xx_correlation(state: &DenseState, i: usize, j: usize) -> Result<f64> {
    let n = state.n();
    if i >= n || j >= n || i == j {
        return Err(Error::OutOfRange(format!("sites ({i}, {j}) on {n} qubits")));
    }
    let m = (1usize << (n - 1 - i)) | (1usize << (n - 1 - j));
    let rho = state.to_density_matrix();
    let d = 1usize << n;
    Ok((0..d).map(|a| rho.data()[(a ^ m) * d + a].re).sum())
}
