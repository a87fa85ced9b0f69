mod common;

use ocp_pinn::autodiff::Tape;
use ocp_pinn::loss::{
    boundary_loss, evaluate_loss, recorded_data_loss, residual_loss, LossBreakdown, LossWeights,
};
use ocp_pinn::network::NetworkParams;
use ocp_pinn::problems::{make_problem, BoundaryLocation, ProblemId};
use ocp_pinn::sampling::{boundary_points, BoundaryPoint};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn layout_ids() -> impl Strategy<Value = ProblemId> {
    prop::sample::select(ProblemId::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn total_is_the_weighted_sum(
        id in layout_ids(),
        seed in any::<u64>(),
        w_d in 0.1..20.0f64,
        w_r in 0.1..20.0f64,
        w_b in 0.1..20.0f64,
    ) {
        let spec = make_problem(id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = common::random_network(spec.output_dim(), &mut rng);
        let model = common::random_model(&spec, &mut rng);
        let dataset = common::random_dataset(&spec, &mut rng);
        let w = LossWeights { w_d, w_r, w_b };
        let b = evaluate_loss(&spec, &params, &model, &dataset, &w).unwrap();
        prop_assert!(common::loss_identity_gap(&b, &w) < 1e-12);
        prop_assert!(b.terms().iter().all(|&v| v >= 0.0));
        if spec.uses_uncontrolled {
            prop_assert!(b.l_r_unc > 0.0);
        } else {
            prop_assert_eq!(b.l_r_unc, 0.0);
        }
        if id == ProblemId::Test3 {
            prop_assert_eq!(b.l_ro, 0.0);
        }
        if matches!(id, ProblemId::Test1a | ProblemId::Test1b) {
            prop_assert_eq!(b.l_ba, 0.0);
        }
    }
}

#[test]
fn breakdown_identity_examples() {
    let w = LossWeights::default();
    let only = |k: usize| {
        let mut t = [0.0; 7];
        t[k] = 1.0;
        LossBreakdown::from_terms(t, &w).total
    };
    assert_eq!(LossBreakdown::from_terms([0.0; 7], &w).total, 0.0);
    assert_eq!(only(0), 10.0);
    assert_eq!(only(1) + only(2) + only(3), 3.0);
}

/// `y ≈ tanh(εx)/ε ≈ x`, with the other channels zero.
fn rigged_linear(output_dim: usize, eps: f64) -> NetworkParams {
    let mut p = NetworkParams::zeros(&[2, 1, output_dim]).unwrap();
    p.weights_mut(0)[0] = eps;
    p.weights_mut(1)[0] = 1.0 / eps;
    p
}

#[test]
fn rigged_linear_state_gives_known_residual() {
    let spec = make_problem(ProblemId::Test1a);
    let params = rigged_linear(3, 1e-4);
    let mut model = spec.true_model();
    model.nu = 0.5;
    let mut ds = common::random_dataset(&spec, &mut ChaCha8Rng::seed_from_u64(0));
    ds.residual_points = vec![(2.0, 0.3), (-2.0, 0.7)];
    let b = evaluate_loss(&spec, &params, &model, &ds, &LossWeights::default()).unwrap();
    // Residual y y_x = ±2 at the two points.
    assert!((b.l_rf - 4.0).abs() < 1e-6, "{}", b.l_rf);
}

#[test]
fn zero_network_is_an_allen_cahn_equilibrium() {
    let spec = make_problem(ProblemId::Test2a);
    let params = NetworkParams::zeros(&[2, 64, 64, 64, 3]).unwrap();
    let ds = common::random_dataset(&spec, &mut ChaCha8Rng::seed_from_u64(1));
    let b = evaluate_loss(&spec, &params, &spec.initial_model(), &ds, &LossWeights::default()).unwrap();
    assert_eq!([b.l_rf, b.l_ra, b.l_ro, b.l_r_unc], [0.0; 4]);
    assert_eq!([b.l_bf, b.l_ba], [0.0; 2]);
}

#[test]
fn constant_adjoint_on_test3_boundary() {
    let spec = make_problem(ProblemId::Test3);
    let mut params = NetworkParams::zeros(&[2, 4, 2]).unwrap();
    params.bias_mut(1)[1] = 0.1;
    let mut ds = common::random_dataset(&spec, &mut ChaCha8Rng::seed_from_u64(2));
    ds.boundary_points = boundary_points(&spec).unwrap();
    let b = evaluate_loss(&spec, &params, &spec.initial_model(), &ds, &LossWeights::default()).unwrap();
    assert!((b.l_ba - 0.01).abs() < 1e-15, "{}", b.l_ba);
    assert_eq!(b.l_bf, 0.0);
}

#[test]
fn terminal_points_are_rejected_outside_test3() {
    let spec = make_problem(ProblemId::Test1a);
    let params = NetworkParams::zeros(&[2, 4, 3]).unwrap();
    let tape = Tape::new();
    let p = [BoundaryPoint {
        x: 0.0,
        t: spec.domain.t_final,
        location: BoundaryLocation::Terminal,
    }];
    assert!(boundary_loss(&tape, &spec, &params, &p).is_err());
    let off = [BoundaryPoint {
        x: 0.3,
        t: 0.2,
        location: BoundaryLocation::Left,
    }];
    assert!(boundary_loss(&tape, &spec, &params, &off).is_err());
}

#[test]
fn point_order_and_duplication_do_not_matter() {
    let w = LossWeights::default();
    for id in ProblemId::ALL {
        let spec = make_problem(id);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = common::random_network(spec.output_dim(), &mut rng);
        let model = common::random_model(&spec, &mut rng);
        let ds = common::random_dataset(&spec, &mut rng);
        let base = evaluate_loss(&spec, &params, &model, &ds, &w).unwrap();

        let mut shuffled = ds.clone();
        shuffled.data_points.shuffle(&mut rng);
        shuffled.boundary_points.shuffle(&mut rng);
        shuffled.residual_points.shuffle(&mut rng);
        let perm = evaluate_loss(&spec, &params, &model, &shuffled, &w).unwrap();

        let mut doubled = ds.clone();
        doubled.residual_points.extend(ds.residual_points.clone());
        let dup = evaluate_loss(&spec, &params, &model, &doubled, &w).unwrap();

        for (a, b) in base.terms().iter().zip(perm.terms()) {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{id}: {a} vs {b}");
        }
        for (a, b) in base.terms()[1..5].iter().zip(&dup.terms()[1..5]) {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{id}: {a} vs {b}");
        }
    }
}

#[test]
fn nu_enters_only_the_residual_terms() {
    for id in ProblemId::ALL {
        let spec = make_problem(id);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = common::random_network(spec.output_dim(), &mut rng);
        let ds = common::random_dataset(&spec, &mut rng);

        let tape = Tape::new();
        let nu = tape.parameter(0.7);
        let l_d = recorded_data_loss(&tape, &spec, &params, &ds.data_points).unwrap();
        let b = boundary_loss(&tape, &spec, &params, &ds.boundary_points).unwrap();
        let r = residual_loss(&tape, &spec, &params, nu, &ds.residual_points).unwrap();
        for term in [l_d, b.state, b.adjoint] {
            assert_eq!(tape.gradient(term).unwrap().d_xi, vec![0.0], "{id}");
        }
        assert_ne!(tape.gradient(r.state).unwrap().d_xi[0], 0.0, "{id}");
        assert_ne!(tape.gradient(r.adjoint).unwrap().d_xi[0], 0.0, "{id}");

        // The same by differences of the evaluated terms.
        let at = |nu: f64| {
            let m = ocp_pinn::network::ModelParams { nu, ..spec.true_model() };
            evaluate_loss(&spec, &params, &m, &ds, &LossWeights::default()).unwrap()
        };
        let (lo, hi) = (at(0.7 - 1e-3), at(0.7 + 1e-3));
        assert_eq!((lo.l_d, lo.l_bf, lo.l_ba), (hi.l_d, hi.l_bf, hi.l_ba));
        assert_ne!(lo.l_rf, hi.l_rf);
    }
}
