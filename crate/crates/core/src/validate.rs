//! Quick cross-checks of every simulator against an independent oracle.
//! Used by `dqpt validate`; each check runs in well under a minute.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

use crate::circuit::{build_trotter_circuit, fold_layers, loschmidt_from_circuit, simulate_noisy, simulate_pure};
use crate::ed::{evolve_lindblad_dense, observables_dense, trace_distance, DenseState, PureEvolver};
use crate::error::Result;
use crate::model::{lindblad_to_depolarizing_p, trotter_sequence, HamiltonianParams, NoiseParams, TrotterOrder};
use crate::mpdo::{return_rate, Mpdo, ProductState};
use crate::tensor::{Tensor, TruncationPolicy, C64};
use crate::zne::richardson_coefficients;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64, what: &str) -> CheckResult {
    CheckResult {
        name,
        passed: value < bound,
        detail: format!("{what} = {value:.3e} (bound {bound:.0e})"),
    }
}

/// One qubit under the depolarizing dissipator for `dt` against the channel
/// `(1 − p)ρ + p I/2` with the calibrated `p`.
pub fn depolarizing_calibration() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    // with all couplings off the two sites evolve independently, so the
    // exact dynamics is the channel applied to each qubit
    let params = HamiltonianParams::new(2, 0.0, 0.0, 0.0)?;
    let psi = ProductState::new(vec![
        [C64::new(0.8, 0.0), C64::new(0.0, 0.6)],
        [C64::new(0.6, 0.0), C64::new(0.8, 0.0)],
    ])?;
    let rho0 = DenseState::pure(psi.to_dense())?.to_density_matrix();
    for gamma in [0.005, 0.025, 0.1] {
        for dt in [0.01, 0.1] {
            let evolved = evolve_lindblad_dense(&rho0, &params, &NoiseParams::new(gamma)?, dt, dt)?.to_density_matrix();
            let p = lindblad_to_depolarizing_p(gamma, dt)?;
            let channel = depolarize_all(&rho0, 2, p)?;
            worst = worst.max(trace_distance(&evolved, &channel)?);
        }
    }
    Ok(check("depolarizing calibration", worst, 1e-10, "max trace distance"))
}

/// Apply `(1 − p)ρ + p I/2 ⊗ Tr_q ρ` to each of `n` qubits.
pub fn depolarize_all(rho: &Tensor, n: usize, p: f64) -> Result<Tensor> {
    let d = 1usize << n;
    let mut out = rho.clone();
    for q in 0..n {
        let m = 1usize << (n - 1 - q);
        let src = out.clone();
        for a in 0..d {
            for b in 0..d {
                let v = src.get(&[a, b]);
                let same = (a & m != 0) == (b & m != 0);
                let mixed = if same {
                    0.5 * (src.get(&[a & !m, b & !m]) + src.get(&[a | m, b | m]))
                } else {
                    C64::from(0.0)
                };
                out.set(&[a, b], v * (1.0 - p) + mixed * p);
            }
        }
    }
    Ok(out)
}

/// MPDO against dense Lindblad evolution at N = 6.
pub fn mpdo_vs_dense() -> Result<CheckResult> {
    let params = HamiltonianParams::standard_chain(6);
    let noise = NoiseParams::new(0.05)?;
    let psi0 = ProductState::plus(6);
    let dt = 0.01;
    let seq = trotter_sequence(&params, &noise, dt, TrotterOrder::Second)?;
    let policy = TruncationPolicy::new(1e-8, 256)?;
    let mut rho = Mpdo::from_product_state(&psi0);
    let rho0 = DenseState::pure(psi0.to_dense())?.to_density_matrix();
    let mut ev = crate::ed::LindbladEvolver::new(&params, &noise, &rho0, dt)?;
    let mut worst = 0.0f64;
    for k in 1..=200 {
        rho.step(&seq, &policy)?;
        if k % 20 == 0 {
            ev.advance(0.2)?;
            let exact = observables_dense(&ev.state()?, &psi0)?.rate;
            worst = worst.max((return_rate(rho.loschmidt_echo(&psi0)?, 6)? - exact).abs());
        }
    }
    Ok(check("MPDO vs dense Lindblad (N=6, t<=2)", worst, 1e-4, "max |dlambda|"))
}

/// Closed-form Richardson weights against a direct linear solve.
pub fn richardson_vs_solve() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for alphas in [vec![1.0f64, 2.0], vec![1.0, 1.5, 2.0], vec![1.0, 1.3, 2.1, 3.7]] {
        let n = alphas.len();
        let a = Array2::from_shape_fn((n, n), |(j, k)| alphas[k].powi(j as i32));
        let mut rhs = Array1::zeros(n);
        rhs[0] = 1.0;
        let solved = a
            .solve_into(rhs)
            .map_err(|e| crate::Error::Numerical(e.to_string()))?;
        for (x, y) in richardson_coefficients(&alphas)?.iter().zip(solved.iter()) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(check("Richardson weights vs linear solve", worst, 1e-12, "max |dbeta|"))
}

/// Noiseless Trotter circuit converging to exact pure evolution.
pub fn circuit_vs_exact() -> Result<CheckResult> {
    let params = HamiltonianParams::standard_chain(4);
    let t = 2.0;
    let exact = PureEvolver::new(&params, &ProductState::plus(4).to_dense())?.echo_at(t);
    let err = |m: usize| -> Result<f64> {
        let psi = simulate_pure(&build_trotter_circuit(&params, t, m)?)?;
        Ok((psi[0].norm_sqr() - exact).abs())
    };
    let (coarse, fine) = (err(50)?, err(100)?);
    let ratio = coarse / fine;
    Ok(CheckResult {
        name: "noiseless circuit vs exact evolution (N=4)",
        passed: fine < 1e-3 && ratio > 1.8,
        detail: format!("error {fine:.3e} at 100 steps, halving ratio {ratio:.2}"),
    })
}

/// Folded circuits act like the original without noise.
pub fn folding_neutrality() -> Result<CheckResult> {
    let c = build_trotter_circuit(&HamiltonianParams::standard_chain(4), 1.0, 4)?;
    let base = simulate_noisy(&c, 0.0)?.to_density_matrix();
    let mut worst = 0.0f64;
    for k in [1, 5, c.depth(), 2 * c.depth() + 3] {
        let (f, _) = fold_layers(&c, k, 11);
        let folded = simulate_noisy(&f, 0.0)?.to_density_matrix();
        worst = worst.max(folded.sub(&base)?.frobenius_norm());
    }
    let noisy = loschmidt_from_circuit(&simulate_noisy(&c, 0.01)?);
    let folded = loschmidt_from_circuit(&simulate_noisy(&fold_layers(&c, c.depth(), 11).0, 0.01)?);
    Ok(CheckResult {
        name: "folding neutrality",
        passed: worst < 1e-10 && folded < noisy,
        detail: format!("max ||drho|| = {worst:.3e}; noisy echo {noisy:.4} -> {folded:.4} at alpha = 3"),
    })
}

/// Run every check, converting errors into failures.
pub fn run_all() -> Vec<CheckResult> {
    let checks: [(&'static str, fn() -> Result<CheckResult>); 5] = [
        ("depolarizing calibration", depolarizing_calibration),
        ("Richardson weights vs linear solve", richardson_vs_solve),
        ("folding neutrality", folding_neutrality),
        ("noiseless circuit vs exact evolution (N=4)", circuit_vs_exact),
        ("MPDO vs dense Lindblad (N=6, t<=2)", mpdo_vs_dense),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
