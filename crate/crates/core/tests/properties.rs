use isinglab::graph::{analytic_ground_state, build_mobius_ladder, build_ring_with_cross, GroundClass, MobiusParams};
use isinglab::master::{anneal_master, ca_generator_apply, sa_generator_apply, transition_rate, MasterConfig, Mode};
use isinglab::oracle::exhaustive_ground_state;
use isinglab::quantum::{
    bloch_vector, build_diagonal, initial_state, reduced_density_matrix, run_qa, QaConfig, QuantumState, RootSchedule,
    StrangPropagator,
};
use isinglab::softspin::{descend, soft_energy, soft_gradient};
use num_complex::Complex64;
use proptest::prelude::*;

fn even_n() -> impl Strategy<Value = usize> {
    (2usize..=5).prop_map(|h| 2 * h)
}

fn evolve(n: usize, j: f64, dt: f64, steps: usize) -> QuantumState {
    let d = build_diagonal(&build_mobius_ladder(MobiusParams::new(n, j).unwrap()), &vec![0.0; n]).unwrap();
    let prop = StrangPropagator::new(&d, RootSchedule::new(5.0, 0.5).unwrap(), dt).unwrap();
    let mut psi = initial_state(n).unwrap();
    for _ in 0..steps {
        prop.step(&mut psi);
    }
    psi
}

fn distance(a: &QuantumState, b: &QuantumState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_finite_differences(
        n in even_n(),
        j in 0.05f64..1.0,
        p in -2.0f64..2.5,
        raw in prop::collection::vec(-1.5f64..1.5, 10),
    ) {
        let m = build_mobius_ladder(MobiusParams::new(n, j).unwrap());
        let x = &raw[..n];
        let flow = soft_gradient(x, p, 1.0, &m).unwrap();
        let scale = flow.iter().fold(1e-3f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            let h = 1e-5;
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            let fd = (soft_energy(&a, p, 1.0, &m).unwrap() - soft_energy(&b, p, 1.0, &m).unwrap()) / (2.0 * h);
            prop_assert!((fd + flow[i]).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn rate_detailed_balance(a in -20.0f64..20.0, b in -20.0f64..20.0, t in 0.2f64..10.0) {
        let ratio = transition_rate(a, b, t) / transition_rate(b, a, t);
        prop_assert!((ratio / (-(a - b) / t).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generators_conserve_probability(
        j in 0.05f64..1.0,
        t in 0.05f64..10.0,
        raw in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let d = build_diagonal(&build_mobius_ladder(MobiusParams::new(6, j).unwrap()), &[0.0; 6]).unwrap();
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        for out in [sa_generator_apply(&p, &d, t).unwrap(), ca_generator_apply(&p, &d, t).unwrap()] {
            prop_assert!(out.iter().sum::<f64>().abs() < 1e-8);
        }
    }

    #[test]
    fn bloch_vectors_stay_in_ball(
        re in prop::collection::vec(-1.0f64..1.0, 16),
        im in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt().max(1e-6);
        let amps: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(a / norm, b / norm)).collect();
        let psi = QuantumState::from_amplitudes(4, amps, 0.0).unwrap();
        for k in 0..4 {
            prop_assert!(bloch_vector(&reduced_density_matrix(&psi, k).unwrap()).magnitude() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn product_states_are_on_the_sphere(angles in prop::collection::vec((0.0f64..3.2, 0.0f64..6.3), 4)) {
        let mut amps = vec![Complex64::new(1.0, 0.0); 16];
        for (idx, a) in amps.iter_mut().enumerate() {
            for (k, &(theta, phi)) in angles.iter().enumerate() {
                let up = idx >> k & 1 == 0;
                *a *= if up {
                    Complex64::new((theta / 2.0).cos(), 0.0)
                } else {
                    Complex64::from_polar((theta / 2.0).sin(), phi)
                };
            }
        }
        let psi = QuantumState::from_amplitudes(4, amps, 0.0).unwrap();
        for k in 0..4 {
            let u = bloch_vector(&reduced_density_matrix(&psi, k).unwrap()).magnitude();
            prop_assert!((u - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn descent_commutes_with_flip(j in 0.05f64..1.0, p in -1.0f64..2.5, raw in prop::collection::vec(-1.0f64..1.0, 8)) {
        let m = build_mobius_ladder(MobiusParams::new(8, j).unwrap());
        let neg: Vec<f64> = raw.iter().map(|v| -v).collect();
        let (a, b) = (descend(&m, p, 1.0, &raw), descend(&m, p, 1.0, &neg));
        prop_assert!(a.x.iter().zip(&b.x).all(|(u, v)| (u + v).abs() < 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn strang_conserves_norm(n in prop::sample::select(vec![4usize, 6]), j in 0.05f64..1.0, dt in 0.01f64..0.2) {
        let psi = evolve(n, j, dt, 10_000);
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn strang_is_second_order(j in 0.1f64..1.0) {
        let reference = evolve(6, j, 0.1 / 64.0, 64 * 20);
        let coarse = distance(&evolve(6, j, 0.1, 20), &reference);
        let fine = distance(&evolve(6, j, 0.05, 40), &reference);
        let ratio = coarse / fine;
        prop_assert!((3.5..=4.5).contains(&ratio), "ratio {}", ratio);
    }

    #[test]
    fn zero_field_evolutions_are_flip_symmetric(j in 0.0f64..1.0, sa in any::<bool>()) {
        let m = build_ring_with_cross(8, j).unwrap();
        let mask = 255usize;
        let qa = run_qa(&m, &QaConfig { t_end: 10.0, ..QaConfig::new(8) }, &[0]).unwrap();
        let amps = qa.final_state.amplitudes();
        prop_assert!((0..256).all(|i| (amps[i] - amps[i ^ mask]).norm() < 1e-10));
        let mode = if sa { Mode::Sa } else { Mode::Ca };
        let cfg = MasterConfig { t_end: 10.0, sample_every: 100, ..MasterConfig::new(mode) };
        let run = anneal_master(&m, &[0.0; 8], &cfg, &[0]).unwrap();
        let p = &run.final_state.p;
        prop_assert!((0..256).all(|i| (p[i] - p[i ^ mask]).abs() < 1e-10));
        prop_assert!((run.final_state.total() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn oracle_agrees_with_closed_form(n in prop::sample::select(vec![8usize, 12]), k in -20i32..=20) {
        let j = 4.0 / n as f64 + k as f64 * 1e-3;
        let truth = analytic_ground_state(n, j).unwrap();
        let oracle = exhaustive_ground_state(&build_mobius_ladder(MobiusParams::new(n, j).unwrap())).unwrap();
        prop_assert!((oracle.ground_energy - truth.energy).abs() < 1e-9);
        let expected = match truth.class {
            GroundClass::S0 => 2,
            GroundClass::S1 => n,
            GroundClass::Tie => n + 2,
        };
        prop_assert_eq!(oracle.ground_states.len(), expected);
    }
}
