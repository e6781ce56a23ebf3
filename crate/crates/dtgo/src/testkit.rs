//! Shared fixtures and independent oracles for the unit tests.

use crate::graph::DirectedGraph;
use nalgebra::{DMatrix, DVector};

/// Fixed 5-node strongly connected digraph used across the test suite
/// (zero-based edges): 2->3, 3->1, 1->2, 1->0, 0->2, 4->2, 2->4 plus loops.
/// In-degrees are (2, 2, 4, 2, 2).
pub fn demo_graph() -> DirectedGraph {
    DirectedGraph::new(5, &[(2, 3), (3, 1), (1, 2), (1, 0), (0, 2), (4, 2), (2, 4)]).unwrap()
}

/// Inverse in-degree weights of `demo_graph`, written out by hand.
pub fn demo_weights() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            0.5, 0.5, 0.0, 0.0, 0.0, //
            0.0, 0.5, 0.0, 0.5, 0.0, //
            0.25, 0.25, 0.25, 0.0, 0.25, //
            0.0, 0.0, 0.5, 0.5, 0.0, //
            0.0, 0.0, 0.5, 0.0, 0.5,
        ],
    )
}

/// Stationary weighting of `demo_weights`, pinned from an independent
/// 50-digit power iteration: (1/8, 1/4, 1/4, 1/4, 1/8).
pub const DEMO_PI: [f64; 5] = [0.125, 0.25, 0.25, 0.25, 0.125];

/// `demo_weights` with the edge 3->1 delayed by two rounds through virtual
/// relays 5 and 6, written out by hand. Virtual rows are pure relays with a
/// single unit entry and zero diagonal.
pub fn demo_weights_delay2() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        7,
        7,
        &[
            0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, //
            0.25, 0.25, 0.25, 0.0, 0.25, 0.0, 0.0, //
            0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        ],
    )
}

/// Stationary weighting of `demo_weights_delay2`, pinned from an independent
/// 50-digit power iteration: (1/10, 1/5, 1/5, 1/5, 1/10, 1/10, 1/10).
pub const DEMO_PI_DELAY2: [f64; 7] = [0.1, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1];

/// Squared modulus of the second eigenvalue of `demo_weights_delay2`, pinned
/// from an independent dense eigensolve.
pub const DEMO_RHO_DELAY2: f64 = 0.533_718_039_282_790_4;

/// Independent stationary-vector oracle: long left power iteration with
/// compensated summation. Deliberately avoids the repeated-squaring path the
/// implementation uses.
pub fn brute_pi(w: &DMatrix<f64>, iters: usize) -> DVector<f64> {
    let n = w.nrows();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..iters {
        let mut next = vec![0.0f64; n];
        let mut comp = vec![0.0f64; n];
        for i in 0..n {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..n {
                let wij = w[(i, j)];
                if wij != 0.0 {
                    let y = vi * wij - comp[j];
                    let t = next[j] + y;
                    comp[j] = (t - next[j]) - y;
                    next[j] = t;
                }
            }
        }
        v = next;
    }
    DVector::from_vec(v)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
