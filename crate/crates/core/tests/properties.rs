//! Structural properties: identity at init, symmetries, batch independence.

mod common;

use common::{dyadic, permutation, permute_positions, uniform};
use srblock::baselines::{nonlocal_forward, nonlocal_trace, se_forward, se_trace, NlWeights, SeWeights};
use srblock::sr::{
    init_weights, reason_correlation, sr_forward, sr_trace, GateActivation, NodeMatrix, SqueezeKind,
    SrConfig, SrWeights,
};
use srblock::Tensor;

fn all_variants(c: usize, k: usize) -> [SrConfig; 4] {
    SrConfig::new(c).with_nodes(k).variants()
}

#[test]
fn fresh_block_is_the_identity_bit_for_bit() {
    for (v, cfg) in all_variants(32, 4).into_iter().enumerate() {
        let w = init_weights(&cfg, v as u64).unwrap();
        for seed in 0..50 {
            let x = uniform(&[2, 32, 5, 3], seed).map(|t| t * 10.0);
            let y = sr_forward(&x, &w, &cfg).unwrap();
            assert_eq!(y.data(), x.data(), "{} seed {seed}", cfg.label());
        }
    }
}

#[test]
fn fresh_block_with_sigmoid_gate_scales_by_one_and_a_half() {
    let cfg = SrConfig::new(8).with_nodes(2).with_gate(GateActivation::Sigmoid);
    let x = uniform(&[1, 8, 2, 2], 3);
    let y = sr_forward(&x, &init_weights(&cfg, 0).unwrap(), &cfg).unwrap();
    assert_eq!(y, x.map(|v| 1.5 * v));
}

/// Weights with dyadic entries so that pooling is exact in any order.
fn dyadic_weights(cfg: &SrConfig, seed: u64) -> SrWeights {
    let template = SrWeights::<f64>::random(cfg, seed).unwrap();
    let tensors = template
        .named()
        .iter()
        .enumerate()
        .map(|(i, (_, t))| dyadic(t.shape(), seed * 31 + i as u64, 16.0))
        .collect();
    SrWeights::from_ordered(cfg, tensors).unwrap()
}

#[test]
fn gate_is_exactly_invariant_to_spatial_permutation() {
    for cfg in all_variants(16, 4) {
        for seed in 0..10 {
            let x = dyadic(&[2, 16, 4, 5], seed, 8.0);
            let w = dyadic_weights(&cfg, seed + 1);
            let perm = permutation(20, seed + 2);
            let xp = permute_positions(&x, &perm);
            let a = sr_trace(&x, &w, &cfg).unwrap();
            let b = sr_trace(&xp, &w, &cfg).unwrap();
            assert_eq!(a.gate(), b.gate(), "{} seed {seed}", cfg.label());
            assert_eq!(permute_positions(&a.output, &perm), b.output);
        }
    }
}

#[test]
fn correlation_reasoning_is_exactly_node_equivariant() {
    let (m, k) = (4, 6);
    for seed in 0..20 {
        let g = dyadic(&[m, k], seed, 4.0);
        let ws: Vec<Tensor> = (0..3).map(|i| dyadic(&[m, m], seed * 7 + i, 4.0)).collect();
        let perm = permutation(k, seed + 100);
        let gp = Tensor::from_fn(&[m, k], |i| g.data()[(i / k) * k + perm[i % k]]).unwrap();
        let out = reason_correlation(&NodeMatrix::from_tensor(g).unwrap(), &ws[0], &ws[1], &ws[2]).unwrap();
        let outp = reason_correlation(&NodeMatrix::from_tensor(gp).unwrap(), &ws[0], &ws[1], &ws[2]).unwrap();
        let expected = Tensor::from_fn(&[m, k], |i| out.values().data()[(i / k) * k + perm[i % k]]).unwrap();
        assert_eq!(outp.values(), &expected, "seed {seed}");
    }
}

#[test]
fn nonlocal_is_equivariant_to_spatial_permutation() {
    for seed in 0..10 {
        let x = uniform(&[2, 8, 3, 4], seed);
        let w = NlWeights::<f64>::init(8, seed + 1).unwrap();
        let perm = permutation(12, seed + 2);
        let y = nonlocal_forward(&x, &w).unwrap();
        let yp = nonlocal_forward(&permute_positions(&x, &perm), &w).unwrap();
        let err = permute_positions(&y, &perm).max_abs_diff(&yp).unwrap();
        assert!(err <= 1e-12, "seed {seed}: {err}");
    }
}

#[test]
fn nonlocal_affinity_rows_sum_to_one() {
    let x = uniform(&[2, 8, 4, 4], 5).map(|v| 5.0 * v);
    let trace = nonlocal_trace(&x, &NlWeights::<f64>::init(8, 6).unwrap()).unwrap();
    for a in &trace.affinity {
        assert_eq!(a.shape(), [16, 16]);
        for r in 0..16 {
            let s: f64 = a.data()[r * 16..(r + 1) * 16].iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn nonlocal_with_zero_output_projection_is_identity() {
    let x = uniform(&[1, 6, 3, 3], 8);
    let mut w = NlWeights::<f64>::init(6, 9).unwrap();
    w.w_out = Tensor::zeros(&[6, 3]).unwrap();
    assert_eq!(nonlocal_forward(&x, &w).unwrap(), x);
}

#[test]
fn se_with_zero_excitation_halves_the_input() {
    let x = uniform(&[2, 16, 3, 3], 1);
    let mut w = SeWeights::<f64>::init(16, 4, 2).unwrap();
    w.w2 = Tensor::zeros(&[16, 4]).unwrap();
    assert_eq!(se_forward(&x, &w).unwrap(), x.map(|v| 0.5 * v));
}

#[test]
fn se_gate_lies_strictly_between_zero_and_one() {
    for seed in 0..20 {
        let x = uniform(&[2, 32, 4, 4], seed).map(|v| 20.0 * v);
        let t = se_trace(&x, &SeWeights::<f64>::init(32, 16, seed).unwrap()).unwrap();
        assert!(t.gate.data().iter().all(|&g| g > 0.0 && g < 1.0));
    }
}

#[test]
fn se_gate_is_shared_by_identical_items() {
    let one = uniform(&[1, 16, 3, 3], 4);
    let x = Tensor::from_fn(&[3, 16, 3, 3], |i| one.data()[i % one.len()]).unwrap();
    let t = se_trace(&x, &SeWeights::<f64>::init(16, 4, 5).unwrap()).unwrap();
    let g = t.gate.data();
    assert_eq!(&g[..16], &g[16..32]);
    assert_eq!(&g[..16], &g[32..48]);
}

fn item(x: &Tensor, i: usize) -> Tensor {
    let (_, c, h, w) = x.nchw().unwrap();
    let len = c * h * w;
    Tensor::new(&[1, c, h, w], x.data()[i * len..(i + 1) * len].to_vec()).unwrap()
}

#[test]
fn batch_items_are_evaluated_independently() {
    let x = uniform(&[3, 16, 3, 4], 12);
    let check = |y: &Tensor, f: &dyn Fn(&Tensor) -> Tensor| {
        for i in 0..3 {
            let err = item(y, i).max_abs_diff(&f(&item(&x, i))).unwrap();
            assert!(err <= 1e-12, "{err}");
        }
    };
    for cfg in all_variants(16, 4) {
        let w = SrWeights::<f64>::random(&cfg, 3).unwrap();
        check(&sr_forward(&x, &w, &cfg).unwrap(), &|xi| sr_forward(xi, &w, &cfg).unwrap());
    }
    let se = SeWeights::<f64>::init(16, 4, 1).unwrap();
    check(&se_forward(&x, &se).unwrap(), &|xi| se_forward(xi, &se).unwrap());
    let nl = NlWeights::<f64>::init(16, 1).unwrap();
    check(&nonlocal_forward(&x, &nl).unwrap(), &|xi| nonlocal_forward(xi, &nl).unwrap());
}

#[test]
fn single_precision_tracks_double() {
    let x = uniform(&[1, 32, 6, 6], 3);
    for cfg in all_variants(32, 4) {
        let w = SrWeights::<f64>::random(&cfg, 4).unwrap();
        let y64 = sr_forward(&x, &w, &cfg).unwrap();
        let y32 = sr_forward(&x.cast::<f32>(), &w.cast::<f32>(), &cfg).unwrap();
        let err = y32.cast::<f64>().max_abs_diff(&y64).unwrap();
        assert!(err < 1e-4, "{}: {err}", cfg.label());
    }
}

#[test]
fn weights_are_deterministic_in_the_seed() {
    let cfg = SrConfig::new(16).with_nodes(4).with_squeeze(SqueezeKind::Ghp);
    assert_eq!(SrWeights::<f64>::random(&cfg, 7).unwrap(), SrWeights::<f64>::random(&cfg, 7).unwrap());
    assert_ne!(SrWeights::<f64>::random(&cfg, 7).unwrap(), SrWeights::<f64>::random(&cfg, 8).unwrap());
}

#[test]
fn mismatched_shapes_are_rejected() {
    let cfg = SrConfig::new(16).with_nodes(4);
    let w = SrWeights::<f64>::random(&cfg, 0).unwrap();
    assert!(sr_forward(&uniform(&[1, 8, 2, 2], 0), &w, &cfg).is_err());
    assert!(sr_forward(&uniform(&[16, 2, 2], 0), &w, &cfg).is_err());
    let nl = NlWeights::<f64>::init(8, 0).unwrap();
    assert!(nonlocal_forward(&uniform(&[1, 6, 2, 2], 0), &nl).is_err());
    assert!(NlWeights::<f64>::init(7, 0).is_err());
    assert!(SeWeights::<f64>::init(16, 5, 0).is_err());
}
