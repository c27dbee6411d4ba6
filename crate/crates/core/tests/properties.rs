//! Invariants over randomized inputs.

use proptest::prelude::*;

use dqpt::circuit::{build_trotter_circuit, fold_global, fold_layers, DensitySimulator};
use dqpt::experiment::{error_surface, TimeSeries};
use dqpt::model::{bond_liouvillian, trotter_sequence, HamiltonianParams, NoiseParams, TrotterOrder};
use dqpt::mpdo::{return_rate, Mpdo, ProductState};
use dqpt::tensor::{contract, expm, svd_truncate, Tensor, TruncationPolicy, C64};
use dqpt::zne::{extrapolate, richardson_coefficients, ZneSchedule};

fn complex() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(complex(), rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

fn sized_matrix() -> impl Strategy<Value = Tensor> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| matrix(r, c))
}

fn max_abs(t: &Tensor) -> f64 {
    t.data().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn params() -> impl Strategy<Value = HamiltonianParams> {
    (2usize..5, -1.5f64..1.5, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(n, jz, jx, hx)| HamiltonianParams::new(n, jz, jx, hx).unwrap())
}

/// Strictly increasing nodes starting at 1, at least 0.2 apart.
fn nodes() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..0.8, 0..4).prop_map(|gaps| {
        let mut v = vec![1.0];
        for g in gaps {
            let last = *v.last().unwrap();
            v.push(last + g);
        }
        v
    })
}

/// Trace of a two-site operator vectorized in pair ordering.
fn pair_trace(v: &[C64]) -> C64 {
    // diagonal pairs have σ = σ' on both sites: p ∈ {0, 3}
    [0usize, 3].iter().flat_map(|&a| [0usize, 3].map(|b| v[a * 4 + b])).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_is_bilinear(a in matrix(3, 4), b in matrix(3, 4), c in matrix(4, 2), x in complex(), y in complex()) {
        let lhs = contract(&a.clone().scale(x).add(&b.clone().scale(y)).unwrap(), &c, &[(1, 0)]).unwrap();
        let rhs = contract(&a, &c, &[(1, 0)]).unwrap().scale(x)
            .add(&contract(&b, &c, &[(1, 0)]).unwrap().scale(y)).unwrap();
        prop_assert!(max_abs(&lhs.sub(&rhs).unwrap()) < 1e-12);
    }

    #[test]
    fn untruncated_svd_reconstructs(m in sized_matrix()) {
        let svd = svd_truncate(&m, &TruncationPolicy::exact(64)).unwrap();
        prop_assert!(max_abs(&svd.reconstruct().sub(&m).unwrap()) < 1e-12);
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.discarded_weight.abs() < 1e-12);
    }

    #[test]
    fn truncation_weight_matches_dropped_spectrum(m in sized_matrix(), chi in 1usize..4) {
        let full = svd_truncate(&m, &TruncationPolicy::exact(64)).unwrap();
        let cut = svd_truncate(&m, &TruncationPolicy::exact(chi)).unwrap();
        let total: f64 = full.s.iter().map(|s| s * s).sum();
        let dropped: f64 = full.s.iter().skip(cut.s.len()).map(|s| s * s).sum();
        prop_assert!(cut.s.len() == chi.min(full.s.len()));
        prop_assert!((cut.discarded_weight - dropped / total).abs() < 1e-12);
        // the residual norm is exactly the dropped weight
        let residual = m.sub(&cut.reconstruct()).unwrap().frobenius_norm().powi(2);
        prop_assert!((residual - dropped).abs() < 1e-10 * total.max(1.0));
    }

    #[test]
    fn expm_inverse(m in (1usize..6).prop_flat_map(|n| matrix(n, n))) {
        let a = m.scale(C64::from(1.5));
        let prod = expm(&a).unwrap().matmul(&expm(&a.clone().scale(C64::from(-1.0))).unwrap()).unwrap();
        let n = a.shape()[0];
        prop_assert!(max_abs(&prod.sub(&Tensor::identity(n)).unwrap()) < 1e-10);
    }

    #[test]
    fn bond_generator_annihilates_trace(p in params(), gamma in 0.0f64..0.3, v in prop::collection::vec(complex(), 16)) {
        let l = bond_liouvillian(&p, &NoiseParams::new(gamma).unwrap(), 0).unwrap();
        prop_assert!(pair_trace(&l.apply(&v).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn bond_gate_preserves_trace_and_hermiticity(p in params(), gamma in 0.0f64..0.3, dt in 0.001f64..0.3,
                                                 h in matrix(4, 4)) {
        // a random Hermitian two-site operator in pair ordering
        let herm = h.add(&h.adjoint().unwrap()).unwrap();
        let v: Vec<C64> = (0..16).map(|pair| {
            let (row, col) = (((pair >> 3) & 1) << 1 | ((pair >> 1) & 1), ((pair >> 2) & 1) << 1 | (pair & 1));
            herm.get(&[row, col])
        }).collect();
        let l = bond_liouvillian(&p, &NoiseParams::new(gamma).unwrap(), 0).unwrap();
        let g = expm(&l.scale(C64::from(dt))).unwrap();
        let out = g.apply(&v).unwrap();
        prop_assert!((pair_trace(&out) - pair_trace(&v)).norm() < 1e-12);
        for pair in 0..16usize {
            // swapping σ and σ' on both sites conjugates the entry
            let swapped = ((pair >> 2) & 1) << 3 | ((pair >> 3) & 1) << 2 | (pair & 1) << 1 | ((pair >> 1) & 1);
            prop_assert!((out[pair] - out[swapped].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn mpdo_step_keeps_unit_trace(n in 2usize..6, gamma in 0.0f64..0.2, steps in 1usize..20) {
        let params = HamiltonianParams::standard_chain(n);
        let seq = trotter_sequence(&params, &NoiseParams::new(gamma).unwrap(), 0.05, TrotterOrder::Second).unwrap();
        let psi0 = ProductState::plus(n);
        let mut rho = Mpdo::from_product_state(&psi0);
        for _ in 0..steps {
            rho.step(&seq, &TruncationPolicy::default()).unwrap();
        }
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        let echo = rho.loschmidt_echo(&psi0).unwrap();
        prop_assert!(echo > 0.0 && echo <= 1.0 + 1e-12);
    }

    #[test]
    fn return_rate_inverts_echo(n in 1usize..40, rate in 0.0f64..3.0) {
        let echo = (-(n as f64) * rate).exp();
        prop_assert!((return_rate(echo, n).unwrap() - rate).abs() < 1e-12);
    }

    #[test]
    fn channels_preserve_trace(t in 0.0f64..2.0, m in 1usize..4, p in 0.0f64..1.0) {
        let c = build_trotter_circuit(&HamiltonianParams::standard_chain(3), t, m).unwrap();
        let mut sim = DensitySimulator::new(3, p).unwrap();
        for layer in c.layers() {
            for gate in layer {
                sim.apply_gate(gate).unwrap();
                prop_assert!((sim.trace() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_folding_is_neutral_and_accounted(t in 0.1f64..2.0, m in 1usize..4, k in 0usize..40, seed in any::<u64>()) {
        let c = build_trotter_circuit(&HamiltonianParams::standard_chain(3), t, m).unwrap();
        let (f, alpha) = fold_layers(&c, k, seed);
        let d = c.depth();
        prop_assert_eq!(f.depth(), d + 2 * k);
        prop_assert!((alpha - (d + 2 * k) as f64 / d as f64).abs() < 1e-15);
        let run = |c: &dqpt::circuit::Circuit| {
            let mut sim = DensitySimulator::new(3, 0.0).unwrap();
            sim.apply_circuit(c).unwrap();
            sim.state().unwrap().to_density_matrix()
        };
        prop_assert!(run(&f).sub(&run(&c)).unwrap().frobenius_norm() < 1e-10);
        let g = fold_global(&c, k % 3);
        prop_assert_eq!(g.depth(), (2 * (k % 3) + 1) * d);
        prop_assert!(run(&g).sub(&run(&c)).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn richardson_weights_sum_to_one(a in nodes()) {
        let betas = richardson_coefficients(&a).unwrap();
        prop_assert!((betas.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        // and cancel every power up to the node count
        for j in 1..a.len() {
            let s: f64 = betas.iter().zip(&a).map(|(b, x)| b * x.powi(j as i32)).sum();
            prop_assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn extrapolation_is_linear(a in nodes(), x in -2.0f64..2.0, y in -2.0f64..2.0, seed in prop::collection::vec(-1.0f64..1.0, 8)) {
        let s = ZneSchedule::new(a.clone()).unwrap();
        let u = &seed[..a.len()];
        let v: Vec<f64> = seed[4..4 + a.len()].to_vec();
        let combo: Vec<f64> = u.iter().zip(&v).map(|(p, q)| x * p + y * q).collect();
        let lhs = extrapolate(&s, &combo).unwrap();
        let rhs = x * extrapolate(&s, u).unwrap() + y * extrapolate(&s, &v).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn self_comparison_has_zero_error(values in prop::collection::vec(-1.0f64..1.0, 3..30), gamma in 0.001f64..0.2) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let grid: Vec<f64> = (0..values.len()).map(|k| 0.1 * k as f64).collect();
        let s = TimeSeries::new(grid.clone()).unwrap().with("Czz", values).unwrap();
        let surface = error_surface(&s, &[(gamma, &s)], "Czz", 0.04).unwrap();
        prop_assert!(surface.epsilon[0].iter().all(|e| *e == 0.0));
        prop_assert_eq!(surface.threshold_curve[0].1, *grid.last().unwrap());
    }

    #[test]
    fn csv_round_trip_is_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
        let grid: Vec<f64> = (0..values.len()).map(|k| k as f64 / 3.0).collect();
        let s = TimeSeries::new(grid).unwrap().with("lambda", values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        prop_assert_eq!(TimeSeries::read_csv(&path).unwrap(), s);
    }
}
