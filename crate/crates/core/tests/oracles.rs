//! Kernels against plain-loop reference evaluations.

mod common;

use common::{dyadic, max_abs_diff, naive_matmul, rows, uniform};
use srblock::baselines::{nonlocal_forward, nonlocal_forward_tiled, nonlocal_trace, NlWeights};
use srblock::ops;
use srblock::sr::{
    bilinear_pool_reference, reason_correlation, reason_learned, sr_forward, squeeze_ghp, NodeMatrix,
    ReasoningWeights, SqueezeKind, SrConfig, SrWeights,
};
use srblock::Tensor;

const TOL: f64 = 1e-10;

fn at(x: &Tensor, n: usize, c: usize, p: usize) -> f64 {
    let (_, ch, h, w) = x.nchw().unwrap();
    x.data()[(n * ch + c) * h * w + p]
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// `v_c = Σ_i (Σ_a wb[c,a] x[a,i]) (Σ_a wc[c,a] x[a,i])`, one loop per index.
fn ghp_direct(x: &Tensor, wb: &Tensor, wc: &Tensor) -> Vec<f64> {
    let (n, ch, h, w) = x.nchw().unwrap();
    let cr = wb.shape()[0];
    let mut out = vec![0.0; n * cr];
    for item in 0..n {
        for c in 0..cr {
            for p in 0..h * w {
                let (mut b, mut cc) = (0.0, 0.0);
                for a in 0..ch {
                    b += wb.data()[c * ch + a] * at(x, item, a, p);
                    cc += wc.data()[c * ch + a] * at(x, item, a, p);
                }
                out[item * cr + c] += b * cc;
            }
        }
    }
    out
}

#[test]
fn hadamard_pooling_matches_direct_summation() {
    for seed in 0..10 {
        let x = uniform(&[2, 12, 3, 5], seed);
        let wb = uniform(&[6, 12], seed + 100);
        let wc = uniform(&[6, 12], seed + 200);
        let got = squeeze_ghp(&x, &wb, Some(&wc)).unwrap();
        assert_eq!(got.shape(), [2, 6]);
        let err = max_abs_diff(got.data(), &ghp_direct(&x, &wb, &wc));
        assert!(err <= 1e-12, "seed {seed}: {err}");
    }
}

#[test]
fn hadamard_pooling_is_the_bilinear_diagonal() {
    let x = uniform(&[1, 8, 4, 4], 7);
    let wb = uniform(&[5, 8], 8);
    let wc = uniform(&[5, 8], 9);
    let b = ops::conv1x1(&x, &wb, None).unwrap().item_matrix(0).unwrap();
    let c = ops::conv1x1(&x, &wc, None).unwrap().item_matrix(0).unwrap();
    let full = bilinear_pool_reference(&b, &c).unwrap();
    let ghp = squeeze_ghp(&x, &wb, Some(&wc)).unwrap();
    for i in 0..5 {
        assert!((full.get(&[i, i]) - ghp.get(&[0, i])).abs() <= 1e-12);
    }
}

#[test]
fn hadamard_pooling_requires_second_projection() {
    let x = uniform(&[1, 4, 2, 2], 1);
    let wb = uniform(&[2, 4], 2);
    assert!(squeeze_ghp(&x, &wb, None).is_err());
}

fn node_matrix(m: usize, k: usize, seed: u64) -> NodeMatrix {
    NodeMatrix::from_tensor(uniform(&[m, k], seed)).unwrap()
}

#[test]
fn learned_reasoning_matches_loops() {
    for seed in 0..10 {
        let (m, k) = (5, 7);
        let g = node_matrix(m, k, seed);
        let w_g = uniform(&[m, m], seed + 1);
        let a_g = uniform(&[k, k], seed + 2);
        let got = reason_learned(&g, &w_g, &a_g).unwrap();

        let gv = rows(g.values());
        let (wg, ag) = (rows(&w_g), rows(&a_g));
        let mut want = vec![0.0; m * k];
        for i in 0..m {
            for j in 0..k {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..k {
                        let lap = if b == j { 1.0 } else { 0.0 } - ag[b][j];
                        acc += wg[i][a] * gv[a][b] * lap;
                    }
                }
                want[i * k + j] = relu(acc);
            }
        }
        let err = max_abs_diff(got.values().data(), &want);
        assert!(err <= TOL, "seed {seed}: {err}");
    }
}

#[test]
fn correlation_reasoning_matches_loops() {
    for seed in 0..10 {
        let (m, k) = (4, 6);
        let g = node_matrix(m, k, seed);
        let (w_phi, w_theta, w_rho) = (
            uniform(&[m, m], seed + 1),
            uniform(&[m, m], seed + 2),
            uniform(&[m, m], seed + 3),
        );
        let got = reason_correlation(&g, &w_phi, &w_theta, &w_rho).unwrap();

        let gv = rows(g.values());
        let q = naive_matmul(&rows(&w_phi), &gv);
        let key = naive_matmul(&rows(&w_theta), &gv);
        let v = naive_matmul(&rows(&w_rho), &gv);
        let mut want = vec![0.0; m * k];
        for i in 0..m {
            for j in 0..k {
                let mut acc = 0.0;
                for p in 0..k {
                    let mut adj = 0.0;
                    for a in 0..m {
                        adj += q[a][p] * key[a][j];
                    }
                    acc += v[i][p] * adj;
                }
                want[i * k + j] = relu(acc);
            }
        }
        let err = max_abs_diff(got.values().data(), &want);
        assert!(err <= TOL, "seed {seed}: {err}");
    }
}

/// Pairwise evaluation over every pair of positions with an explicit
/// max-shifted exponential.
fn nonlocal_brute_force(x: &Tensor, w: &NlWeights) -> Vec<f64> {
    let (n, c, h, wd) = x.nchw().unwrap();
    let hw = h * wd;
    let ci = w.inner();
    let proj = |m: &Tensor, item: usize, p: usize| -> Vec<f64> {
        (0..ci)
            .map(|o| (0..c).map(|a| m.data()[o * c + a] * at(x, item, a, p)).sum())
            .collect()
    };
    let mut out = x.data().to_vec();
    for item in 0..n {
        let theta: Vec<_> = (0..hw).map(|p| proj(&w.w_theta, item, p)).collect();
        let phi: Vec<_> = (0..hw).map(|p| proj(&w.w_phi, item, p)).collect();
        let g: Vec<_> = (0..hw).map(|p| proj(&w.w_g, item, p)).collect();
        for i in 0..hw {
            let scores: Vec<f64> = (0..hw)
                .map(|j| (0..ci).map(|d| theta[i][d] * phi[j][d]).sum())
                .collect();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            let z: f64 = e.iter().sum();
            let mut agg = vec![0.0; ci];
            for j in 0..hw {
                for d in 0..ci {
                    agg[d] += e[j] / z * g[j][d];
                }
            }
            for o in 0..c {
                let add: f64 = (0..ci).map(|d| w.w_out.data()[o * ci + d] * agg[d]).sum();
                out[(item * c + o) * hw + i] += add;
            }
        }
    }
    out
}

#[test]
fn nonlocal_matches_pairwise_oracle_on_3x3() {
    for seed in 0..10 {
        let x = uniform(&[1, 8, 3, 3], seed);
        let w = NlWeights::init(8, seed + 50).unwrap();
        let got = nonlocal_forward(&x, &w).unwrap();
        let err = max_abs_diff(got.data(), &nonlocal_brute_force(&x, &w));
        assert!(err <= TOL, "seed {seed}: {err}");
    }
}

#[test]
fn nonlocal_tiling_and_trace_match_oracle() {
    let x = uniform(&[2, 6, 4, 5], 3);
    let w = NlWeights::init(6, 4).unwrap();
    let want = nonlocal_brute_force(&x, &w);
    for tile in [1, 7, 20, 57, 400] {
        let got = nonlocal_forward_tiled(&x, &w, tile).unwrap();
        assert!(max_abs_diff(got.data(), &want) <= TOL, "tile {tile}");
    }
    let trace = nonlocal_trace(&x, &w).unwrap();
    assert!(max_abs_diff(trace.output.data(), &want) <= TOL);
}

#[test]
fn nonlocal_uniform_affinity_averages_values() {
    let x = uniform(&[1, 4, 3, 3], 11);
    let mut w = NlWeights::init(4, 12).unwrap();
    w.w_theta = Tensor::zeros(&[2, 4]).unwrap();
    w.w_phi = Tensor::zeros(&[2, 4]).unwrap();
    let trace = nonlocal_trace(&x, &w).unwrap();
    let g = &trace.g[0];
    for d in 0..2 {
        let mean = (0..9).map(|p| g.get(&[d, p])).sum::<f64>() / 9.0;
        for p in 0..9 {
            assert!((trace.aggregated.data()[d * 9 + p] - mean).abs() <= 1e-14);
        }
    }
}

/// Full SR evaluation written out as loops, for every variant.
fn sr_reference(x: &Tensor, w: &SrWeights, cfg: &SrConfig) -> Vec<f64> {
    let (n, c, h, wd) = x.nchw().unwrap();
    let hw = h * wd;
    let (cr, m, k) = (cfg.c_reduced(), cfg.m(), cfg.k);
    let mut out = x.data().to_vec();
    for item in 0..n {
        let pooled: Vec<f64> = match cfg.squeeze {
            SqueezeKind::Gap => (0..cr)
                .map(|r| {
                    (0..hw)
                        .map(|p| (0..c).map(|a| w.reduce_b.data()[r * c + a] * at(x, item, a, p)).sum::<f64>())
                        .sum::<f64>()
                        / hw as f64
                })
                .collect(),
            SqueezeKind::Ghp => {
                let single = Tensor::from_fn(&[1, c, h, wd], |i| x.data()[item * c * hw + i]).unwrap();
                ghp_direct(&single, &w.reduce_b, w.reduce_c.as_ref().unwrap())
            }
        };
        // node j holds channels j*m .. (j+1)*m
        let g: Vec<Vec<f64>> = (0..m).map(|i| (0..k).map(|j| pooled[j * m + i]).collect()).collect();
        let reasoned = match &w.reasoning {
            ReasoningWeights::Learned { w_g, a_g } => {
                let lap: Vec<Vec<f64>> = (0..k)
                    .map(|a| (0..k).map(|b| (a == b) as u8 as f64 - a_g.get(&[a, b])).collect())
                    .collect();
                naive_matmul(&naive_matmul(&rows(w_g), &g), &lap)
            }
            ReasoningWeights::Correlation { w_phi, w_theta, w_rho } => {
                let q = naive_matmul(&rows(w_phi), &g);
                let kk = naive_matmul(&rows(w_theta), &g);
                let qt: Vec<Vec<f64>> = (0..k).map(|j| (0..m).map(|i| q[i][j]).collect()).collect();
                naive_matmul(&naive_matmul(&rows(w_rho), &g), &naive_matmul(&qt, &kk))
            }
        };
        let flat: Vec<f64> = (0..cr).map(|ch| relu(reasoned[ch % m][ch / m])).collect();
        for o in 0..c {
            let gate: f64 = (0..cr).map(|r| w.w_r.data()[o * cr + r] * flat[r]).sum();
            for p in 0..hw {
                let idx = (item * c + o) * hw + p;
                out[idx] = x.data()[idx] * gate + x.data()[idx];
            }
        }
    }
    out
}

#[test]
fn sr_forward_matches_loop_reference_for_every_variant() {
    for (v, cfg) in SrConfig::new(16).with_nodes(4).variants().into_iter().enumerate() {
        for seed in 0..4 {
            let x = uniform(&[2, 16, 3, 4], seed);
            let w = SrWeights::random(&cfg, seed + 10 * v as u64).unwrap();
            let got = sr_forward(&x, &w, &cfg).unwrap();
            let err = max_abs_diff(got.data(), &sr_reference(&x, &w, &cfg));
            assert!(err <= TOL, "{}: {err}", cfg.label());
        }
    }
}

#[test]
fn conv1x1_with_identity_weights_is_exact() {
    let x = uniform(&[2, 5, 3, 3], 4);
    let y = ops::conv1x1(&x, &Tensor::eye(5).unwrap(), None).unwrap();
    assert_eq!(y, x);
}

#[test]
fn conv1x1_matches_loops() {
    let x = uniform(&[2, 5, 3, 2], 5);
    let w = uniform(&[4, 5], 6);
    let b = uniform(&[4], 7);
    let y = ops::conv1x1(&x, &w, Some(&b)).unwrap();
    let mut want = vec![0.0; 2 * 4 * 6];
    for n in 0..2 {
        for o in 0..4 {
            for p in 0..6 {
                want[(n * 4 + o) * 6 + p] =
                    b.data()[o] + (0..5).map(|a| w.data()[o * 5 + a] * at(&x, n, a, p)).sum::<f64>();
            }
        }
    }
    assert!(max_abs_diff(y.data(), &want) <= 1e-14);
}

#[test]
fn softmax_rows_sum_to_one() {
    let x = uniform(&[6, 9], 3).map(|v| 30.0 * v);
    let y = ops::softmax(&x, 1).unwrap();
    for r in rows(&y) {
        assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(r.iter().all(|&v| v > 0.0));
    }
    let cols = ops::softmax(&x, 0).unwrap();
    for j in 0..9 {
        let s: f64 = (0..6).map(|i| cols.get(&[i, j])).sum();
        assert!((s - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn softmax_survives_huge_logits() {
    let x: Tensor = Tensor::new(&[1, 3], vec![1000.0, 1000.0, -1000.0]).unwrap();
    let y = ops::softmax(&x, 1).unwrap();
    assert!(y.is_all_finite());
    assert!((y.data()[0] - 0.5).abs() < 1e-15);
}

#[test]
fn average_pool_is_exactly_permutation_invariant_on_dyadic_data() {
    let x = dyadic(&[2, 3, 4, 4], 9, 8.0);
    let perm = common::permutation(16, 10);
    let a = ops::global_avg_pool(&x).unwrap();
    let b = ops::global_avg_pool(&common::permute_positions(&x, &perm)).unwrap();
    assert_eq!(a, b);
}
