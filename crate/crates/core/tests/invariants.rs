use csa_lab_core::es::{
    csa_log_step_change, csa_log_step_change_full, sample_feasible_step, select_step,
    step_constant_sigma, step_csa, step_csa_c1, AlgoParams, ChainState, SampleBlock,
    SamplingMethod, StepSample,
};
use csa_lab_core::problem::ProblemGeometry;
use csa_lab_core::rng::stream_rng;
use proptest::prelude::*;

fn theta() -> impl Strategy<Value = f64> {
    0.001f64..1.57
}

fn block_strategy(max_lambda: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1e-12f64..=1.0, -8.0f64..8.0), 1..=max_lambda)
}

fn to_block(raw: &[(f64, f64)], k: f64) -> SampleBlock {
    SampleBlock::from_parts(
        raw.iter().map(|&(u, z)| StepSample::new(u, z).unwrap()).collect(),
        k,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn every_candidate_is_feasible(
        t in theta(),
        delta in prop_oneof![1e-12f64..1e-3, 1e-3f64..10.0, 10.0f64..1e12],
        u in 1e-15f64..=1.0,
        z in -10.0f64..10.0,
    ) {
        let g = ProblemGeometry::new(t, 2).unwrap();
        let s = StepSample::new(u, z).unwrap();
        let mut rng = stream_rng(0, 0);
        let v = sample_feasible_step(delta, &s, &g, SamplingMethod::InverseCdf, &mut rng).unwrap();
        if u < 1.0 {
            prop_assert!(delta - v.along > 0.0);
        } else {
            prop_assert_eq!(v.along, delta);
        }
    }

    #[test]
    fn selection_is_exact_argmax(
        t in theta(),
        delta in 1e-6f64..50.0,
        raw in block_strategy(40),
    ) {
        let g = ProblemGeometry::new(t, 2).unwrap();
        let b = to_block(&raw, 0.0);
        let sel = select_step(delta, &b, &g).unwrap();
        let mut rng = stream_rng(0, 0);
        let mut best = f64::NEG_INFINITY;
        let mut best_i = usize::MAX;
        for (i, s) in b.samples().iter().enumerate() {
            let v = sample_feasible_step(delta, s, &g, SamplingMethod::InverseCdf, &mut rng).unwrap();
            if v.v[0] > best {
                best = v.v[0];
                best_i = i;
            }
        }
        prop_assert_eq!(sel.v[0], best);
        prop_assert_eq!(sel.index, best_i);
    }

    #[test]
    fn transitions_stay_in_state_space(
        t in theta(),
        delta in 1e-6f64..50.0,
        c in 0.01f64..=1.0,
        d_sigma in 0.2f64..5.0,
        raw in block_strategy(20),
        k in 0.0f64..20.0,
    ) {
        let g = ProblemGeometry::new(t, 5).unwrap();
        let p = AlgoParams::new(raw.len(), c, d_sigma, 1.0).unwrap();
        let b = to_block(&raw, k);
        let mut a = ChainState::new(delta).unwrap();
        if step_constant_sigma(&mut a, &b, &g).is_ok() {
            prop_assert!(a.delta > 0.0);
        }
        let mut s = ChainState::new(delta).unwrap();
        if step_csa(&mut s, &b, &g, &p).is_ok() {
            prop_assert!(s.delta > 0.0 && s.delta.is_finite());
        }
    }

    #[test]
    fn c_one_transitions_agree_bitwise(
        t in theta(),
        delta in 1e-6f64..50.0,
        d_sigma in 0.2f64..5.0,
        raw in block_strategy(20),
        k in 0.0f64..20.0,
        dim in 2usize..12,
        p0 in (-3.0f64..3.0, -3.0f64..3.0),
    ) {
        let g = ProblemGeometry::new(t, dim).unwrap();
        let p = AlgoParams::new(raw.len(), 1.0, d_sigma, 1.0).unwrap();
        let b = to_block(&raw, if dim == 2 { 0.0 } else { k });
        let mut s = ChainState::new(delta).unwrap();
        s.path = [p0.0, p0.1];
        let full = step_csa(&mut s, &b, &g, &p);
        let c1 = step_csa_c1(delta, &b, &g, &p);
        match (full, c1) {
            (Ok(_), Ok(d)) => prop_assert_eq!(d.to_bits(), s.delta.to_bits()),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one transition failed alone"),
        }
    }

    #[test]
    fn split_and_full_path_forms_agree(
        path in prop::collection::vec(-5.0f64..5.0, 2..40),
        c in 0.01f64..=1.0,
        d_sigma in 0.05f64..5.0,
    ) {
        let p = AlgoParams::new(5, c, d_sigma, 1.0).unwrap();
        let n = path.len();
        let direct = c / (2.0 * d_sigma)
            * (path.iter().map(|v| v * v).sum::<f64>() / n as f64 - 1.0);
        let k: f64 = path[2..].iter().map(|v| v * v).sum();
        let split = csa_log_step_change([path[0], path[1]], k, &p, n);
        prop_assert_eq!(split.to_bits(), csa_log_step_change_full(&path, &p).to_bits());
        prop_assert!((direct - split).abs() <= 1e-13 * (1.0 + direct.abs()));
    }
}

#[test]
fn feasibility_over_long_runs() {
    let mut rng = stream_rng(77, 0);
    for &(t, lambda, c) in &[(0.01, 5, 1.0), (0.3, 10, 0.5), (1.5, 20, 0.05)] {
        let g = ProblemGeometry::new(t, 3).unwrap();
        let p = AlgoParams::new(lambda, c, 1.0, 1.0).unwrap();
        let mut a = ChainState::new(1.0).unwrap();
        let mut s = ChainState::initial(&p, &mut rng);
        let mut b = SampleBlock::draw(lambda, 3, &mut rng);
        for _ in 0..1_000_000 / 3 {
            b.redraw(3, &mut rng);
            let r = step_constant_sigma(&mut a, &b, &g).unwrap();
            assert!(r.delta - r.step.along > 0.0 && a.delta > 0.0);
            let r = step_csa(&mut s, &b, &g, &p).unwrap();
            assert!(r.delta - r.step.along > 0.0 && s.delta > 0.0);
        }
    }
}
