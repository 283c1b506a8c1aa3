//! The closed-form cost model against instrumented forward passes and the
//! published table.

mod common;

use common::uniform;
use proptest::prelude::*;
use srblock::baselines::{nonlocal_forward, nonlocal_forward_tiled, se_forward, NlWeights, SeWeights};
use srblock::cost::{self, asymptotic, reference, scaling_check, BlockKind, BlockSpec, MacConvention};
use srblock::counter::count;
use srblock::sr::{sr_forward, GateActivation, SrConfig, SrWeights};

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target
}

#[test]
fn sr_cost_equals_instrumented_forward() {
    for gate in [GateActivation::None, GateActivation::Sigmoid] {
        for cfg in SrConfig::new(32).with_nodes(4).with_gate(gate).variants() {
            for (h, w) in [(1, 1), (5, 7), (8, 8)] {
                let x = uniform(&[1, 32, h, w], 1);
                let weights = SrWeights::<f64>::random(&cfg, 2).unwrap();
                let (_, measured) = count(|| sr_forward(&x, &weights, &cfg).unwrap());
                let report = cost::cost(&BlockSpec::from_sr(&cfg), h, w).unwrap();
                assert_eq!(report.count(), measured, "{} {h}x{w}", cfg.label());
                assert_eq!(report.params as usize, weights.parameter_count());
            }
        }
    }
}

#[test]
fn se_cost_equals_instrumented_forward() {
    for (h, w) in [(1, 1), (3, 9)] {
        let x = uniform(&[1, 64, h, w], 1);
        let weights = SeWeights::<f64>::init(64, 16, 2).unwrap();
        let (_, measured) = count(|| se_forward(&x, &weights).unwrap());
        let report = cost::cost(&BlockSpec::new(BlockKind::Se, 64), h, w).unwrap();
        assert_eq!(report.count(), measured);
        assert_eq!(report.params, 2 * 64 * 4);
    }
}

#[test]
fn nl_cost_equals_instrumented_forward_tiled_or_not() {
    for (h, w) in [(1, 1), (4, 6), (7, 7)] {
        let x = uniform(&[1, 16, h, w], 1);
        let weights = NlWeights::<f64>::init(16, 2).unwrap();
        let report = cost::cost(&BlockSpec::new(BlockKind::Nl, 16), h, w).unwrap();
        let (_, full) = count(|| nonlocal_forward(&x, &weights).unwrap());
        let (_, tiled) = count(|| nonlocal_forward_tiled(&x, &weights, 2 * h * w + 1).unwrap());
        assert_eq!(report.count(), full);
        assert_eq!(report.count(), tiled);
        assert_eq!(report.affinity_memory_elems as usize, (h * w) * (h * w));
    }
}

#[test]
fn published_parameter_counts() {
    let gap = cost::cost(&BlockSpec::new(BlockKind::SrGap, 512), 96, 96).unwrap();
    let ghp = cost::cost(&BlockSpec::new(BlockKind::SrGhp, 512), 96, 96).unwrap();
    let se = cost::cost(&BlockSpec::new(BlockKind::Se, 512), 96, 96).unwrap();
    assert!(within(gap.params as f64, 0.26e6, 0.05), "{}", gap.params);
    assert!(within(ghp.params as f64, 0.40e6, 0.05), "{}", ghp.params);
    assert!(within(se.params as f64, 0.03e6, 0.10), "{}", se.params);
}

#[test]
fn published_flop_counts() {
    let gap = cost::cost(&BlockSpec::new(BlockKind::SrGap, 512), 96, 96).unwrap();
    assert!(within(gap.flops() as f64, 2.43e9, 0.10), "{}", gap.flops());
    let nl = cost::cost(&BlockSpec::new(BlockKind::Nl, 512), 96, 96).unwrap();
    assert!(within(nl.flops_mac1() as f64, 48.36e9, 0.10), "{}", nl.flops_mac1());
    let ghp = cost::cost(&BlockSpec::new(BlockKind::SrGhp, 512), 96, 96).unwrap();
    let r = reference(BlockKind::SrGhp).unwrap();
    assert!(r.flagged);
    assert!(within(ghp.flops() as f64, 3.64e9, 0.35), "{}", ghp.flops());
}

#[test]
fn every_reference_row_holds_under_its_own_convention() {
    for kind in BlockKind::ALL {
        let Some(r) = reference(kind) else { continue };
        let report = cost::cost(&BlockSpec::new(kind, 512), 96, 96).unwrap();
        let flops = r.convention.flops(&report) as f64;
        assert!(within(flops, r.flops, r.flops_tol), "{kind:?}: {flops}");
        assert!(within(report.params as f64, r.params, r.params_tol), "{kind:?}: {}", report.params);
    }
    assert_eq!(reference(BlockKind::SrGap).unwrap().convention, MacConvention::Mac2);
    assert_eq!(reference(BlockKind::Nl).unwrap().convention, MacConvention::Mac1);
}

const SIZES: [(usize, usize); 4] = [(24, 24), (48, 48), (96, 96), (192, 192)];

#[test]
fn scaling_exponents() {
    for kind in [BlockKind::SrGap, BlockKind::SrGhp, BlockKind::Se] {
        let fit = scaling_check(&BlockSpec::new(kind, 512), &SIZES).unwrap();
        assert!((fit.exponent - 1.0).abs() <= 0.05, "{kind:?}: {fit:?}");
    }
    let mut corr = BlockSpec::new(BlockKind::SrGap, 512);
    corr.reasoning = srblock::sr::ReasoningKind::Correlation;
    assert!((scaling_check(&corr, &SIZES).unwrap().exponent - 1.0).abs() <= 0.05);
    let nl = scaling_check(&BlockSpec::new(BlockKind::Nl, 512), &SIZES).unwrap();
    assert!((nl.exponent - 2.0).abs() <= 0.05, "{nl:?}");
    assert!(nl.total_exponent < nl.exponent);
}

#[test]
fn affinity_memory() {
    for (h, w) in SIZES {
        let sr = cost::cost(&BlockSpec::new(BlockKind::SrGap, 512), h, w).unwrap();
        assert_eq!(sr.affinity_memory_elems, 16 * 16 + 16 * 16);
        let nl = cost::cost(&BlockSpec::new(BlockKind::Nl, 512), h, w).unwrap();
        assert_eq!(nl.affinity_memory_elems, ((h * w) * (h * w)) as u64);
    }
}

#[test]
fn table_only_kinds_are_marked_coarse() {
    for kind in [BlockKind::A2, BlockKind::Cgnl, BlockKind::Ccnet, BlockKind::Danet] {
        let r = cost::cost(&BlockSpec::new(kind, 512), 96, 96).unwrap();
        assert!(!r.exact);
        assert!(!asymptotic(kind).computation.is_empty());
    }
    assert_eq!(asymptotic(BlockKind::Ccnet).computation, "O(CHW(H+W))");
    assert_eq!(asymptotic(BlockKind::A2).affinity, "O(C^2)");
}

proptest! {
    #[test]
    fn params_do_not_depend_on_spatial_size(kind_index in 0usize..8, h in 1usize..300, w in 1usize..300) {
        let kind = BlockKind::ALL[kind_index];
        let desc = BlockSpec::new(kind, 512);
        let a = cost::cost(&desc, h, w).unwrap();
        let b = cost::cost(&desc, 96, 96).unwrap();
        prop_assert_eq!(a.params, b.params);
        if matches!(kind, BlockKind::SrGap | BlockKind::SrGhp | BlockKind::Se) {
            prop_assert_eq!(a.affinity_memory_elems, b.affinity_memory_elems);
        }
    }
}
