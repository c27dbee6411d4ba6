//! Simulators checked against each other and against dense references.

use dqpt::circuit::{build_trotter_circuit, loschmidt_from_circuit, simulate_noisy, Circuit, DensitySimulator, Gate};
use dqpt::ed::{
    dense_hamiltonian, dense_liouvillian, evolve_lindblad_dense, observables_dense, trace_distance, DenseState,
    LindbladEvolver, PureEvolver,
};
use dqpt::experiment::config::circuit_probability;
use dqpt::model::{
    bond_liouvillian, lindblad_to_depolarizing_p, rowmajor_to_pair_superop, trotter_sequence, two_site_hamiltonian,
    HamiltonianParams, NoiseParams, TrotterOrder,
};
use dqpt::mpdo::{return_rate, Mpdo, ProductState};
use dqpt::tensor::{kron, Tensor, TruncationPolicy, C64};
use dqpt::zne::{scale_noise_lindblad, stretch_hamiltonian};

fn embed(op: &Tensor, left: usize, right: usize) -> Tensor {
    let l = kron(&Tensor::identity(left), op).unwrap();
    kron(&l, &Tensor::identity(right)).unwrap()
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.sub(b).unwrap().data().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn generic_params(n: usize) -> HamiltonianParams {
    HamiltonianParams::new(n, 0.9, 0.35, 0.6).unwrap()
}

#[test]
fn bond_hamiltonians_sum_to_dense() {
    for n in 2..=6 {
        let params = generic_params(n);
        let dim = 1 << n;
        let mut total = Tensor::zeros(vec![dim, dim]);
        for b in 0..n - 1 {
            let h = two_site_hamiltonian(&params, b).unwrap();
            total = total.add(&embed(&h, 1 << b, 1 << (n - b - 2))).unwrap();
        }
        let dense = dense_hamiltonian(&params).unwrap();
        assert!(max_abs_diff(&total, &dense) < 1e-13, "n = {n}");
    }
}

#[test]
fn bond_liouvillians_sum_to_dense_generator() {
    let noise = NoiseParams::new(0.07).unwrap();
    for n in 2..=5 {
        let params = generic_params(n);
        let dim = 1 << (2 * n);
        let mut total = Tensor::zeros(vec![dim, dim]);
        for b in 0..n - 1 {
            let l = bond_liouvillian(&params, &noise, b).unwrap();
            total = total.add(&embed(&l, 1 << (2 * b), 1 << (2 * (n - b - 2)))).unwrap();
        }
        let dense = rowmajor_to_pair_superop(&dense_liouvillian(&params, &noise).unwrap(), n).unwrap();
        assert!(max_abs_diff(&total, &dense) < 1e-13, "n = {n}");
    }
}

/// Above the dense-generator limit, compare one short step by action: the
/// exact-truncation MPDO against the dense integrator.
#[test]
fn six_site_generator_by_action() {
    let params = generic_params(6);
    let noise = NoiseParams::new(0.07).unwrap();
    let psi0 = ProductState::new(
        (0..6)
            .map(|k| {
                let th = 0.3 + 0.2 * k as f64;
                [C64::new(th.cos(), 0.0), C64::new(0.0, th.sin())]
            })
            .collect(),
    )
    .unwrap();
    let rho0 = DenseState::pure(psi0.to_dense()).unwrap().to_density_matrix();
    let dt = 1e-3;
    let seq = trotter_sequence(&params, &noise, dt, TrotterOrder::Second).unwrap();
    let mut rho = Mpdo::from_product_state(&psi0);
    for _ in 0..10 {
        rho.step(&seq, &TruncationPolicy::exact(4096)).unwrap();
    }
    let exact = evolve_lindblad_dense(&rho0, &params, &noise, 10.0 * dt, dt).unwrap();
    let d = trace_distance(&rho.to_dense_matrix().unwrap(), &exact.to_density_matrix()).unwrap();
    assert!(d < 1e-7, "trace distance {d}");
}

fn mpdo_error(n: usize, gamma: f64, t: f64, dt: f64, order: TrotterOrder) -> f64 {
    let params = HamiltonianParams::standard_chain(n);
    let noise = NoiseParams::new(gamma).unwrap();
    let psi0 = ProductState::plus(n);
    let seq = trotter_sequence(&params, &noise, dt, order).unwrap();
    let mut rho = Mpdo::from_product_state(&psi0);
    let steps = (t / dt).round() as usize;
    for _ in 0..steps {
        rho.step(&seq, &TruncationPolicy::exact(256)).unwrap();
    }
    let rho0 = DenseState::pure(psi0.to_dense()).unwrap().to_density_matrix();
    let exact = evolve_lindblad_dense(&rho0, &params, &noise, t, 1e-3).unwrap();
    trace_distance(&rho.to_dense_matrix().unwrap(), &exact.to_density_matrix()).unwrap()
}

#[test]
fn first_order_step_converges_linearly() {
    let coarse = mpdo_error(4, 0.05, 1.0, 0.1, TrotterOrder::First);
    let fine = mpdo_error(4, 0.05, 1.0, 0.05, TrotterOrder::First);
    let ratio = coarse / fine;
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn mpdo_tracks_dense_lindblad_at_five_sites() {
    let n = 5;
    let params = HamiltonianParams::standard_chain(n);
    let noise = NoiseParams::new(0.03).unwrap();
    let psi0 = ProductState::plus(n);
    let seq = trotter_sequence(&params, &noise, 0.01, TrotterOrder::Second).unwrap();
    let policy = TruncationPolicy::new(1e-5, 200).unwrap();
    let mut rho = Mpdo::from_product_state(&psi0);
    let rho0 = DenseState::pure(psi0.to_dense()).unwrap().to_density_matrix();
    let mut ev = LindbladEvolver::new(&params, &noise, &rho0, 0.01).unwrap();
    for k in 1..=300 {
        rho.step(&seq, &policy).unwrap();
        if k % 50 == 0 {
            ev.advance(0.5).unwrap();
            let exact = observables_dense(&ev.state().unwrap(), &psi0).unwrap();
            let rate = return_rate(rho.loschmidt_echo(&psi0).unwrap(), n).unwrap();
            assert!((rate - exact.rate).abs() < 1e-3, "t = {}: {rate} vs {}", ev.time(), exact.rate);
            assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn noiseless_mpdo_matches_pure_evolution() {
    let n = 6;
    let params = HamiltonianParams::standard_chain(n);
    let psi0 = ProductState::plus(n);
    let ev = PureEvolver::new(&params, &psi0.to_dense()).unwrap();
    let seq = trotter_sequence(&params, &NoiseParams::noiseless(), 0.01, TrotterOrder::Second).unwrap();
    let mut rho = Mpdo::from_product_state(&psi0);
    for k in 1..=300 {
        rho.step(&seq, &TruncationPolicy::new(1e-5, 200).unwrap()).unwrap();
        if k % 30 == 0 {
            let echo = rho.loschmidt_echo(&psi0).unwrap();
            let exact = ev.echo_at(k as f64 * 0.01);
            assert!((echo - exact).abs() < 1e-3, "step {k}: {echo} vs {exact}");
        }
    }
}

/// The generator is linear in (H, γ): scaling γ by α for time t equals
/// evolving H/α at the original rate for time αt.
#[test]
fn stretch_and_rate_pictures_agree() {
    let params = HamiltonianParams::standard_chain(4);
    let noise = NoiseParams::new(0.04).unwrap();
    let rho0 = DenseState::pure(ProductState::plus(4).to_dense()).unwrap().to_density_matrix();
    let t = 1.5;
    for alpha in [1.0, 1.5, 2.0] {
        let rate = evolve_lindblad_dense(&rho0, &params, &scale_noise_lindblad(&noise, alpha).unwrap(), t, 1e-3).unwrap();
        let stretched = stretch_hamiltonian(&params, alpha).unwrap();
        let stretch = evolve_lindblad_dense(&rho0, &stretched, &noise, alpha * t, 1e-3).unwrap();
        let d = trace_distance(&rate.to_density_matrix(), &stretch.to_density_matrix()).unwrap();
        assert!(d < 1e-6, "alpha = {alpha}: {d}");
    }
}

/// A noisy Hadamard layer is the ideal layer followed by exactly the
/// depolarizing dynamics of the calibrated duration.
#[test]
fn hadamard_layer_noise_matches_lindblad_interval() {
    let (gamma, dt) = (0.025, 0.01);
    let p = lindblad_to_depolarizing_p(gamma, dt).unwrap();
    let c = Circuit::new(2, vec![vec![Gate::h(0), Gate::h(1)]]).unwrap();
    let noisy = simulate_noisy(&c, p).unwrap().to_density_matrix();
    let ideal = simulate_noisy(&c, 0.0).unwrap().to_density_matrix();
    let idle = HamiltonianParams::new(2, 0.0, 0.0, 0.0).unwrap();
    let relaxed = evolve_lindblad_dense(&ideal, &idle, &NoiseParams::new(gamma).unwrap(), dt, dt).unwrap();
    assert!(trace_distance(&noisy, &relaxed.to_density_matrix()).unwrap() < 1e-12);
}

fn circuit_rate(params: &HamiltonianParams, t: f64, m: usize, p: f64, idle: bool) -> f64 {
    let c = build_trotter_circuit(params, t, m).unwrap();
    let mut sim = DensitySimulator::new(params.n, p).unwrap().with_idle_noise(idle);
    sim.apply_circuit(&c).unwrap();
    return_rate(loschmidt_from_circuit(&sim.state().unwrap()), params.n).unwrap()
}

/// With every qubit depolarized in every layer, the calibrated circuit
/// follows the Lindblad evolution it stands in for, and the agreement
/// improves with finer Trotter steps. Without idle noise the edge qubits see
/// fewer channels per step than the bulk.
#[test]
fn noisy_circuit_tracks_lindblad() {
    let n = 4;
    let params = HamiltonianParams::standard_chain(n);
    let gamma = 0.025;
    let psi0 = ProductState::plus(n);
    let rho0 = DenseState::pure(psi0.to_dense()).unwrap().to_density_matrix();
    let t = 3.0;
    let exact = observables_dense(
        &evolve_lindblad_dense(&rho0, &params, &NoiseParams::new(gamma).unwrap(), t, 1e-3).unwrap(),
        &psi0,
    )
    .unwrap()
    .rate;
    let err = |m: usize, idle: bool| {
        let p = circuit_probability(gamma, n, t / m as f64).unwrap();
        (circuit_rate(&params, t, m, p, idle) - exact).abs()
    };
    let (coarse, fine) = (err(30, true), err(60, true));
    assert!(fine < 5e-3, "error {fine}");
    assert!(fine < coarse, "{coarse} -> {fine}");
    assert!(err(60, false) > 10.0 * fine);
}
