use causal_transfer::value_bounds::{
    robust_value_bounds, robust_value_iteration, weighted_state_bounds, Direction, Interval, PairBounds, StateWeights, SuccessorBound,
};
use causal_transfer::BoundedMdpModel;
use proptest::prelude::*;

const GAMMA: f64 = 0.9;

fn pair(r: (f64, f64), succ: &[(usize, f64, f64)]) -> PairBounds {
    PairBounds {
        reward: Interval::new(r.0, r.1),
        successors: succ.iter().map(|&(next, lo, hi)| SuccessorBound { next, lo, hi }).collect(),
    }
}

/// Exact optimal values of a 3-state, 2-action MDP by enumerating all
/// deterministic policies and solving each policy's linear system.
fn optimal_values(r: &[[f64; 2]; 3], p: &[[[f64; 3]; 2]; 3]) -> [f64; 3] {
    let mut best = [f64::NEG_INFINITY; 3];
    for code in 0..8 {
        let act = [code & 1, (code >> 1) & 1, (code >> 2) & 1];
        // (I - γ P_π) v = r_π by Gaussian elimination.
        let mut m = [[0.0; 4]; 3];
        for s in 0..3 {
            for t in 0..3 {
                m[s][t] = if s == t { 1.0 } else { 0.0 } - GAMMA * p[s][act[s]][t];
            }
            m[s][3] = r[s][act[s]];
        }
        for col in 0..3 {
            let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            for row in 0..3 {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for k in col..4 {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
        for s in 0..3 {
            best[s] = best[s].max(m[s][3] / m[s][s]);
        }
    }
    best
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Toy interval model: two uncertain pairs, the rest known.
fn toy_model() -> BoundedMdpModel {
    let pairs = vec![
        pair((0.0, 0.2), &[(1, 0.2, 0.6), (2, 0.4, 0.8)]),
        pair((-0.5, -0.5), &[(0, 1.0, 1.0)]),
        pair((0.3, 0.3), &[(2, 1.0, 1.0)]),
        pair((0.5, 0.6), &[(0, 0.0, 0.3), (1, 0.5, 1.0)]),
        pair((1.0, 1.0), &[(0, 1.0, 1.0)]),
        pair((-1.0, -1.0), &[(2, 1.0, 1.0)]),
    ];
    BoundedMdpModel::new(3, 2, pairs, GAMMA, (-1.0, 1.0)).unwrap()
}

#[test]
fn weighted_program_matches_brute_force() {
    let model = toy_model();
    let weights = [1.0, 2.0, 0.5];
    let step = 1e-2;
    let (mut best, mut worst) = (f64::NEG_INFINITY, f64::INFINITY);
    for ra in grid(0.0, 0.2, step) {
        for pa in grid(0.2, 0.6, step) {
            if !(0.4 - 1e-12..=0.8 + 1e-12).contains(&(1.0 - pa)) {
                continue;
            }
            for rb in grid(0.5, 0.6, step) {
                for pb in grid(0.0, 0.3, step) {
                    if 1.0 - pb < 0.5 - 1e-12 {
                        continue;
                    }
                    let r = [[ra, -0.5], [0.3, rb], [1.0, -1.0]];
                    let p = [
                        [[0.0, pa, 1.0 - pa], [1.0, 0.0, 0.0]],
                        [[0.0, 0.0, 1.0], [pb, 1.0 - pb, 0.0]],
                        [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
                    ];
                    let v = optimal_values(&r, &p);
                    let total: f64 = (0..3).map(|s| weights[s] * v[s]).sum();
                    best = best.max(total);
                    worst = worst.min(total);
                }
            }
        }
    }
    let w = StateWeights::new(weights.to_vec()).unwrap();
    let hi = w.weighted_sum(&robust_value_bounds(&model, Direction::Optimistic, 1e-12).unwrap());
    let lo = w.weighted_sum(&robust_value_bounds(&model, Direction::Pessimistic, 1e-12).unwrap());
    assert!((hi - best).abs() < 1e-6, "{hi} vs {best}");
    assert!((lo - worst).abs() < 1e-6, "{lo} vs {worst}");
}

#[test]
fn residuals_shrink_by_at_least_gamma() {
    let model = toy_model();
    for dir in [Direction::Optimistic, Direction::Pessimistic] {
        let sol = robust_value_iteration(&model, dir, 1e-12).unwrap();
        for w in sol.residuals.windows(2) {
            assert!(w[1] <= GAMMA * w[0] + 1e-12, "{} after {}", w[1], w[0]);
        }
    }
}

fn interval_model() -> impl Strategy<Value = BoundedMdpModel> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(ns, na)| {
        let pairs = prop::collection::vec(
            (
                -1.0f64..1.0,
                0.0f64..0.5,
                prop::collection::vec((0.01f64..1.0, 0.0f64..0.3), ns),
            ),
            ns * na,
        );
        pairs.prop_map(move |raw| {
            let pairs = raw
                .into_iter()
                .map(|(r, width, succ)| {
                    let total: f64 = succ.iter().map(|x| x.0).sum();
                    PairBounds {
                        reward: Interval::new(r, (r + width).min(1.0)),
                        successors: succ
                            .iter()
                            .enumerate()
                            .map(|(next, &(w, slack))| {
                                let p = w / total;
                                SuccessorBound {
                                    next,
                                    lo: (p - slack).max(0.0),
                                    hi: (p + slack).min(1.0),
                                }
                            })
                            .collect(),
                    }
                })
                .collect();
            BoundedMdpModel::new(ns, na, pairs, GAMMA, (-1.0, 1.0)).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn weighted_bounds_contain_pointwise_bounds(model in interval_model()) {
        let hi = robust_value_bounds(&model, Direction::Optimistic, 1e-11).unwrap();
        let lo = robust_value_bounds(&model, Direction::Pessimistic, 1e-11).unwrap();
        for s in 0..model.n_states() {
            prop_assert!(lo[s] <= hi[s] + 1e-9);
            for focus in [1.0, 10.0, 1e3] {
                let w = StateWeights::emphasize(model.n_states(), s, focus).unwrap();
                let b = weighted_state_bounds(&model, &w, s, 1e-11).unwrap();
                prop_assert!(b.upper >= hi[s] - 1e-9 && b.lower <= lo[s] + 1e-9);
            }
        }
    }
}
