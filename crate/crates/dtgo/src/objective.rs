//! Local objectives: ℓ2-regularized logistic regression over sparse
//! datasets, a quadratic family with closed-form minimizer for exact checks,
//! plus sample partitioning and heterogeneity/noise diagnostics.

use crate::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;
use std::sync::Arc;

/// Sparse samples in the usual text wire format: `label idx:val idx:val ...`
/// with 1-based feature indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// Per sample, (1-based index, value) pairs sorted by index.
    pub samples: Vec<Vec<(usize, f64)>>,
    /// Labels in {-1.0, +1.0}.
    pub labels: Vec<f64>,
    /// Feature dimension: the largest index observed.
    pub dim: usize,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Sparse dot product of a dense weight vector with sample `i`.
    pub fn dot(&self, x: &DVector<f64>, i: usize) -> f64 {
        let mut acc = 0.0;
        for &(idx, val) in &self.samples[i] {
            assert!(idx <= x.len(), "weight vector shorter than feature index {idx}");
            acc += x[idx - 1] * val;
        }
        acc
    }
}

/// Parses the sparse text format. Blank lines are skipped; labels are mapped
/// onto {-1,+1} (datasets shipping {1,2} read as 1 -> +1, 2 -> -1); indices
/// may arrive out of order but a duplicate index within one line is an
/// error. All errors carry the offending 1-based line number.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut ds = Dataset::default();
    for (line_no, raw) in text.lines().enumerate() {
        let line = line_no + 1;
        let mut tokens = raw.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let label_val: f64 = label_tok
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad label {label_tok:?}") })?;
        let label = if label_val == 1.0 {
            1.0
        } else if label_val == 2.0 || label_val == -1.0 {
            -1.0
        } else {
            return Err(Error::Parse { line, msg: format!("unsupported label {label_tok}") });
        };

        let mut features = Vec::new();
        let mut seen = BTreeSet::new();
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected idx:val, got {tok:?}") })?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("bad feature index {idx_s:?}") })?;
            if idx == 0 {
                return Err(Error::Parse { line, msg: "feature indices are 1-based".into() });
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("bad feature value {val_s:?}") })?;
            if !seen.insert(idx) {
                return Err(Error::Parse { line, msg: format!("duplicate feature index {idx}") });
            }
            features.push((idx, val));
            ds.dim = ds.dim.max(idx);
        }
        features.sort_unstable_by_key(|&(idx, _)| idx);
        ds.samples.push(features);
        ds.labels.push(label);
    }
    Ok(ds)
}

/// Canonical text form: one line per sample, indices ascending. Parsing the
/// output reproduces the dataset exactly.
pub fn serialize_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (sample, &label) in ds.samples.iter().zip(&ds.labels) {
        out.push_str(if label > 0.0 { "1" } else { "-1" });
        for &(idx, val) in sample {
            out.push_str(&format!(" {idx}:{val}"));
        }
        out.push('\n');
    }
    out
}

/// Splits sample indices into `n_nodes` random near-equal shards (sizes
/// differ by at most one). Deterministic per generator state. Shards come
/// out empty only when there are more nodes than samples; the caller decides
/// whether that deserves a warning.
pub fn partition_uniform(n_samples: usize, n_nodes: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    assert!(n_nodes >= 1, "need at least one shard");
    let mut order: Vec<usize> = (0..n_samples).collect();
    // Fisher-Yates, swapping each slot with a not-yet-fixed one.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let base = n_samples / n_nodes;
    let extra = n_samples % n_nodes;
    let mut shards = Vec::with_capacity(n_nodes);
    let mut cursor = 0;
    for node in 0..n_nodes {
        let size = base + usize::from(node < extra);
        shards.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }
    shards
}

/// log(1 + exp(z)) without overflow for large positive z.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Standard sigmoid, evaluated on the branch that never exponentiates a
/// large positive argument.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss over a shard plus the ridge term (lambda/2)·||x||².
/// An empty shard contributes only the ridge term.
pub fn logistic_value(x: &DVector<f64>, ds: &Dataset, shard: &[usize], lambda: f64) -> f64 {
    let ridge = 0.5 * lambda * x.norm_squared();
    if shard.is_empty() {
        return ridge;
    }
    let mut acc = 0.0;
    for &i in shard {
        let margin = ds.labels[i] * ds.dot(x, i);
        acc += log1p_exp(-margin);
    }
    acc / shard.len() as f64 + ridge
}

/// Mean over the batch of -y·sigma(-y·<x,s>)·s, plus lambda·x.
pub fn logistic_stochastic_gradient(
    x: &DVector<f64>,
    ds: &Dataset,
    batch: &[usize],
    lambda: f64,
) -> DVector<f64> {
    assert!(!batch.is_empty(), "gradient batch must be nonempty");
    let mut g = DVector::zeros(x.len());
    for &i in batch {
        let y = ds.labels[i];
        let coeff = -y * sigmoid(-y * ds.dot(x, i));
        for &(idx, val) in &ds.samples[i] {
            g[idx - 1] += coeff * val;
        }
    }
    g /= batch.len() as f64;
    g + lambda * x
}

/// A node's local objective.
#[derive(Debug, Clone)]
pub enum NodeObjective {
    /// Mean logistic loss over a shard of a shared dataset, ridge-regularized.
    Logistic {
        data: Arc<Dataset>,
        shard: Vec<usize>,
        lambda: f64,
        /// Samples drawn per stochastic gradient; 0 means the full shard
        /// (deterministic).
        batch_size: usize,
        /// Weight dimension, at least the dataset's.
        dim: usize,
    },
    /// f(x) = ½·||x - center||², optionally with additive Gaussian gradient
    /// noise of the given per-component standard deviation.
    Quadratic { center: DVector<f64>, noise_std: f64 },
}

impl NodeObjective {
    pub fn logistic(data: Arc<Dataset>, shard: Vec<usize>, lambda: f64, batch_size: usize) -> Self {
        let dim = data.dim.max(1);
        NodeObjective::Logistic { data, shard, lambda, batch_size, dim }
    }

    pub fn quadratic(center: DVector<f64>) -> Self {
        NodeObjective::Quadratic { center, noise_std: 0.0 }
    }

    pub fn quadratic_noisy(center: DVector<f64>, noise_std: f64) -> Self {
        NodeObjective::Quadratic { center, noise_std }
    }

    pub fn dim(&self) -> usize {
        match self {
            NodeObjective::Logistic { dim, .. } => *dim,
            NodeObjective::Quadratic { center, .. } => center.len(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            NodeObjective::Logistic { data, shard, lambda, .. } => {
                logistic_value(x, data, shard, *lambda)
            }
            NodeObjective::Quadratic { center, .. } => 0.5 * (x - center).norm_squared(),
        }
    }

    /// Exact gradient of the local mean objective.
    pub fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            NodeObjective::Logistic { data, shard, lambda, .. } => {
                if shard.is_empty() {
                    return *lambda * x;
                }
                logistic_stochastic_gradient(x, data, shard, *lambda)
            }
            NodeObjective::Quadratic { center, .. } => x - center,
        }
    }

    /// Stochastic gradient: a uniform with-replacement batch for logistic
    /// shards, the exact gradient plus Gaussian noise for quadratics. The
    /// number of generator draws per call depends only on the objective, so
    /// paired runs stay aligned.
    pub fn stochastic_gradient(&self, x: &DVector<f64>, rng: &mut impl Rng) -> DVector<f64> {
        match self {
            NodeObjective::Logistic { data, shard, lambda, batch_size, .. } => {
                if shard.is_empty() {
                    return *lambda * x;
                }
                if *batch_size == 0 || *batch_size >= shard.len() {
                    return logistic_stochastic_gradient(x, data, shard, *lambda);
                }
                let batch: Vec<usize> =
                    (0..*batch_size).map(|_| shard[rng.gen_range(0..shard.len())]).collect();
                logistic_stochastic_gradient(x, data, &batch, *lambda)
            }
            NodeObjective::Quadratic { center, noise_std } => {
                let mut g = x - center;
                if *noise_std > 0.0 {
                    for v in g.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v += noise_std * z;
                    }
                }
                g
            }
        }
    }
}

/// Mean of the local objective values: the global objective.
pub fn average_value(objectives: &[NodeObjective], x: &DVector<f64>) -> f64 {
    objectives.iter().map(|o| o.value(x)).sum::<f64>() / objectives.len() as f64
}

/// Mean of the exact local gradients.
pub fn average_gradient(objectives: &[NodeObjective], x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    for o in objectives {
        g += o.full_gradient(x);
    }
    g / objectives.len() as f64
}

/// Closed-form minimizer when every objective is quadratic: the mean of the
/// centers. `None` if any objective is not quadratic.
pub fn quadratic_minimizer(objectives: &[NodeObjective]) -> Option<DVector<f64>> {
    let mut acc: Option<DVector<f64>> = None;
    for o in objectives {
        match o {
            NodeObjective::Quadratic { center, .. } => match &mut acc {
                Some(sum) => *sum += center,
                None => acc = Some(center.clone()),
            },
            _ => return None,
        }
    }
    acc.map(|sum| sum / objectives.len() as f64)
}

/// Random binary classification data for hermetic experiments: a hidden
/// separator, sparse-ish standard-normal features, labels flipped with
/// probability `flip_prob`.
pub fn synthetic_classification(
    n_samples: usize,
    dim: usize,
    flip_prob: f64,
    rng: &mut impl Rng,
) -> Dataset {
    assert!(dim >= 1, "need at least one feature");
    let separator: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut ds = Dataset { samples: Vec::new(), labels: Vec::new(), dim };
    for _ in 0..n_samples {
        let mut sample = Vec::new();
        let mut margin = 0.0;
        for idx in 1..=dim {
            // Keep roughly half the coordinates so the sparse path is real.
            if rng.gen::<f64>() < 0.5 {
                let v: f64 = rng.sample(StandardNormal);
                sample.push((idx, v));
                margin += separator[idx - 1] * v;
            }
        }
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen::<f64>() < flip_prob {
            label = -label;
        }
        ds.samples.push(sample);
        ds.labels.push(label);
    }
    ds
}

/// Measures objective heterogeneity and gradient noise at a reference point,
/// normally the global minimizer.
///
/// Returns `(zeta_sq, sigma_sq)`: the mean squared deviation of the local
/// gradients from their average (zero when all objectives are identical),
/// and the Monte-Carlo mean squared deviation of stochastic gradients from
/// the exact local gradients (zero for deterministic gradients).
pub fn heterogeneity_noise_diagnostics(
    objectives: &[NodeObjective],
    x_star: &DVector<f64>,
    mc_samples: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let n = objectives.len();
    let grads: Vec<DVector<f64>> = objectives.iter().map(|o| o.full_gradient(x_star)).collect();
    let mut mean = DVector::zeros(x_star.len());
    for g in &grads {
        mean += g;
    }
    mean /= n as f64;
    let zeta_sq = grads.iter().map(|g| (g - &mean).norm_squared()).sum::<f64>() / n as f64;

    let mut sigma_sq = 0.0;
    if mc_samples > 0 {
        for (o, g) in objectives.iter().zip(&grads) {
            let mut acc = 0.0;
            for _ in 0..mc_samples {
                acc += (o.stochastic_gradient(x_star, rng) - g).norm_squared();
            }
            sigma_sq += acc / mc_samples as f64;
        }
        sigma_sq /= n as f64;
    }
    (zeta_sq, sigma_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{rng_for, StreamKind};

    fn hand_dataset() -> Dataset {
        parse_libsvm("1 1:0.5 2:-1\n2 1:-0.25\n").unwrap()
    }

    #[test]
    fn parse_single_line() {
        let ds = parse_libsvm("1 3:0.5").unwrap();
        assert_eq!(ds.n_samples(), 1);
        assert_eq!(ds.labels, vec![1.0]);
        assert_eq!(ds.samples[0], vec![(3, 0.5)]);
        assert_eq!(ds.dim, 3);
    }

    #[test]
    fn parse_empty_input() {
        let ds = parse_libsvm("").unwrap();
        assert_eq!(ds.n_samples(), 0);
        assert_eq!(ds.dim, 0);
    }

    #[test]
    fn parse_maps_labels_and_skips_blanks() {
        let ds = parse_libsvm("1 1:1\n\n2 1:1\n-1 1:1\n+1 1:1\n").unwrap();
        assert_eq!(ds.labels, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn parse_accepts_out_of_order_indices() {
        let ds = parse_libsvm("1 5:2 2:3").unwrap();
        assert_eq!(ds.samples[0], vec![(2, 3.0), (5, 2.0)], "stored sorted");
        assert_eq!(ds.dim, 5);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("1 1:1\nbogus 1:1", 2, "label"),
            ("1 3:abc", 1, "value"),
            ("1 x:1", 1, "index"),
            ("1 0:4", 1, "1-based"),
            ("1 2:1 2:3", 1, "duplicate"),
            ("1 2=1", 1, "idx:val"),
            ("3 1:1", 1, "unsupported"),
        ];
        for (text, want_line, want_msg) in cases {
            match parse_libsvm(text) {
                Err(Error::Parse { line, msg }) => {
                    assert_eq!(line, want_line, "case {text:?}");
                    assert!(msg.contains(want_msg), "case {text:?}: got {msg:?}");
                }
                other => panic!("case {text:?}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let ds = parse_libsvm("1 5:2 2:-0.125\n2 1:1e-3\n-1\n").unwrap();
        let text = serialize_libsvm(&ds);
        let back = parse_libsvm(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(serialize_libsvm(&back), text, "canonical form is a fixed point");
    }

    #[test]
    fn partition_small_counts() {
        let mut rng = rng_for(1, StreamKind::Partition, 0);
        let shards = partition_uniform(4, 2, &mut rng);
        assert_eq!(shards.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2]);
        let shards = partition_uniform(5, 2, &mut rng);
        assert_eq!(shards.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn partition_is_a_partition_and_deterministic() {
        let mut rng = rng_for(9, StreamKind::Partition, 0);
        let shards = partition_uniform(101, 7, &mut rng);
        let mut all: Vec<usize> = shards.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>(), "disjoint and covering");

        let mut rng2 = rng_for(9, StreamKind::Partition, 0);
        assert_eq!(partition_uniform(101, 7, &mut rng2), shards);
    }

    #[test]
    fn partition_8124_over_100_nodes() {
        // 8124 = 81*100 + 24: the remainder nodes carry one extra sample.
        let mut rng = rng_for(2024, StreamKind::Partition, 0);
        let shards = partition_uniform(8124, 100, &mut rng);
        let of_82 = shards.iter().filter(|s| s.len() == 82).count();
        let of_81 = shards.iter().filter(|s| s.len() == 81).count();
        assert_eq!((of_82, of_81), (24, 76));
        assert_eq!(shards.iter().map(Vec::len).sum::<usize>(), 8124);
    }

    #[test]
    fn partition_more_nodes_than_samples_leaves_empties() {
        let mut rng = rng_for(3, StreamKind::Partition, 0);
        let shards = partition_uniform(3, 5, &mut rng);
        assert_eq!(shards.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 1, 1, 0, 0]);
    }

    #[test]
    fn logistic_value_at_zero_is_log_two() {
        let ds = hand_dataset();
        let x = DVector::zeros(2);
        let v = logistic_value(&x, &ds, &[0, 1], 0.0);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn logistic_loss_vanishes_for_confident_correct_predictions() {
        let ds = parse_libsvm("1 1:1").unwrap();
        let x = DVector::from_vec(vec![50.0, 0.0]);
        let lambda = 0.1;
        let v = logistic_value(&x, &ds, &[0], lambda);
        assert!((v - 0.5 * lambda * 2500.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn logistic_value_matches_high_precision_reference() {
        // Independently computed with 50-digit arithmetic for this exact
        // dataset, x = (1, -1), lambda = 0.1.
        let ds = hand_dataset();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        let v = logistic_value(&x, &ds, &[0, 1], 0.1);
        assert!((v - 0.488_676_348_930_798).abs() < 1e-15, "got {v:.17}");

        // Gradient components sit under a 0.1-magnitude cancellation with
        // the ridge term, so allow a few ulps of that.
        let g = logistic_stochastic_gradient(&x, &ds, &[0, 1], 0.1);
        assert!((g[0] - -3.343_183_408_643_221e-4).abs() < 5e-16, "got {:.17e}", g[0]);
        assert!((g[1] - -8.787_238_096_821_83e-3).abs() < 5e-16, "got {:.17e}", g[1]);
    }

    #[test]
    fn gradient_at_zero_is_half_signed_sample() {
        let ds = parse_libsvm("1 1:0.5 2:-1").unwrap();
        let x = DVector::zeros(2);
        let g = logistic_stochastic_gradient(&x, &ds, &[0], 0.0);
        assert_eq!(g.as_slice(), &[-0.25, 0.5], "sigma(0) = 1/2 exactly");
    }

    #[test]
    fn gradient_of_empty_sample_is_pure_ridge() {
        let ds = parse_libsvm("1\n").unwrap();
        let x = DVector::from_vec(vec![2.0]);
        let g = logistic_stochastic_gradient(&x, &ds, &[0], 0.25);
        assert_eq!(g.as_slice(), &[0.5]);
    }

    #[test]
    fn logistic_gradient_passes_finite_difference_check() {
        let mut rng = rng_for(17, StreamKind::Gradient, 0);
        let ds = synthetic_classification(40, 20, 0.1, &mut rng);
        let shard: Vec<usize> = (0..40).collect();
        let lambda = 0.05;
        for case in 0..5u64 {
            let mut xr = rng_for(17, StreamKind::Init, case);
            let x = DVector::from_fn(20, |_, _| xr.sample::<f64, _>(StandardNormal));
            let g = logistic_stochastic_gradient(&x, &ds, &shard, lambda);
            let h = 1e-5 * (1.0 + x.norm());
            for i in 0..20 {
                let mut plus = x.clone();
                plus[i] += h;
                let mut minus = x.clone();
                minus[i] -= h;
                let fd = (logistic_value(&plus, &ds, &shard, lambda)
                    - logistic_value(&minus, &ds, &shard, lambda))
                    / (2.0 * h);
                let rel = (g[i] - fd).abs() / g[i].abs().max(1e-8);
                assert!(rel < 1e-6, "case {case} coord {i}: grad {} vs fd {fd}", g[i]);
            }
        }
    }

    #[test]
    fn logistic_value_is_convex_on_segments() {
        let mut rng = rng_for(23, StreamKind::Init, 0);
        let ds = synthetic_classification(30, 8, 0.1, &mut rng);
        let shard: Vec<usize> = (0..30).collect();
        for _ in 0..20 {
            let a = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mid = (&a + &b) * 0.5;
            let lhs = logistic_value(&mid, &ds, &shard, 0.01);
            let rhs = 0.5
                * (logistic_value(&a, &ds, &shard, 0.01)
                    + logistic_value(&b, &ds, &shard, 0.01));
            assert!(lhs <= rhs + 1e-12, "midpoint {lhs} above chord {rhs}");
        }
    }

    #[test]
    fn quadratic_value_gradient_and_minimizer() {
        let c0 = DVector::from_vec(vec![0.0]);
        let c2 = DVector::from_vec(vec![2.0]);
        let objs = vec![NodeObjective::quadratic(c0), NodeObjective::quadratic(c2)];
        let xstar = quadratic_minimizer(&objs).unwrap();
        assert_eq!(xstar.as_slice(), &[1.0]);
        assert_eq!(average_value(&objs, &xstar), 0.5, "f* = mean of (1/2)|1-0|^2 and (1/2)|1-2|^2");
        assert_eq!(average_gradient(&objs, &xstar).as_slice(), &[0.0]);

        let single = NodeObjective::quadratic(DVector::from_vec(vec![3.0, -1.0]));
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(single.value(&x), 0.5 * (4.0 + 4.0));
        assert_eq!(single.full_gradient(&x).as_slice(), &[-2.0, 2.0]);
    }

    #[test]
    fn quadratic_minimizer_is_mean_of_random_centers() {
        let mut rng = rng_for(4, StreamKind::Init, 0);
        let centers: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let objs: Vec<NodeObjective> =
            centers.iter().cloned().map(NodeObjective::quadratic).collect();
        let xstar = quadratic_minimizer(&objs).unwrap();
        let mean = centers.iter().fold(DVector::zeros(3), |acc, c| acc + c) / 5.0;
        assert!((xstar - &mean).norm() < 1e-15);
        assert!(average_gradient(&objs, &mean).norm() < 1e-15);
    }

    #[test]
    fn quadratic_finite_difference_check() {
        let o = NodeObjective::quadratic(DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let x = DVector::from_vec(vec![0.3, 0.7, -1.1]);
        let g = o.full_gradient(&x);
        let h = 1e-5 * (1.0 + x.norm());
        for i in 0..3 {
            let mut plus = x.clone();
            plus[i] += h;
            let mut minus = x.clone();
            minus[i] -= h;
            let fd = (o.value(&plus) - o.value(&minus)) / (2.0 * h);
            assert!((g[i] - fd).abs() / g[i].abs().max(1e-8) < 1e-6);
        }
    }

    #[test]
    fn identical_objectives_have_zero_heterogeneity() {
        let data = Arc::new(hand_dataset());
        let objs: Vec<NodeObjective> = (0..4)
            .map(|_| NodeObjective::logistic(data.clone(), vec![0, 1], 0.1, 0))
            .collect();
        let x = DVector::from_vec(vec![0.4, -0.2]);
        let mut rng = rng_for(5, StreamKind::Gradient, 0);
        let (zeta_sq, sigma_sq) = heterogeneity_noise_diagnostics(&objs, &x, 50, &mut rng);
        assert_eq!(zeta_sq, 0.0, "identical local objectives");
        assert_eq!(sigma_sq, 0.0, "full-batch gradients are deterministic");
    }

    #[test]
    fn noisy_quadratic_recovers_noise_variance() {
        let noise_std = 0.3;
        let objs: Vec<NodeObjective> = (0..4)
            .map(|n| NodeObjective::quadratic_noisy(DVector::from_vec(vec![n as f64]), noise_std))
            .collect();
        let xstar = quadratic_minimizer(&[
            NodeObjective::quadratic(DVector::from_vec(vec![0.0])),
            NodeObjective::quadratic(DVector::from_vec(vec![1.0])),
            NodeObjective::quadratic(DVector::from_vec(vec![2.0])),
            NodeObjective::quadratic(DVector::from_vec(vec![3.0])),
        ])
        .unwrap();
        let mut rng = rng_for(6, StreamKind::Gradient, 0);
        let mc = 20_000;
        let (zeta_sq, sigma_sq) = heterogeneity_noise_diagnostics(&objs, &xstar, mc, &mut rng);
        // Centers 0..3 around mean 1.5: mean squared gradient deviation
        // (1/4)(1.5^2 + 0.5^2 + 0.5^2 + 1.5^2) = 1.25.
        assert!((zeta_sq - 1.25).abs() < 1e-12, "got {zeta_sq}");
        // Squared-noise estimator std is sigma^2 sqrt(2/(N*mc)).
        let band = 4.0 * noise_std * noise_std * (2.0 / (4.0 * mc as f64)).sqrt();
        assert!((sigma_sq - noise_std * noise_std).abs() < band, "got {sigma_sq}");
    }

    #[test]
    fn synthetic_data_is_deterministic_and_learnable_shape() {
        let mut a = rng_for(7, StreamKind::Graph, 9);
        let mut b = rng_for(7, StreamKind::Graph, 9);
        let da = synthetic_classification(50, 6, 0.05, &mut a);
        let db = synthetic_classification(50, 6, 0.05, &mut b);
        assert_eq!(da, db);
        assert_eq!(da.n_samples(), 50);
        assert_eq!(da.dim, 6);
        assert!(da.labels.iter().all(|&y| y == 1.0 || y == -1.0));
    }

    #[test]
    fn stochastic_batches_draw_from_the_shard() {
        let mut rng = rng_for(8, StreamKind::Gradient, 1);
        let data = Arc::new(synthetic_classification(20, 4, 0.1, &mut rng));
        let obj = NodeObjective::logistic(data, (0..20).collect(), 0.01, 4);
        let x = DVector::zeros(4);
        let g1 = obj.stochastic_gradient(&x, &mut rng);
        let g2 = obj.stochastic_gradient(&x, &mut rng);
        assert_ne!(g1, g2, "independent batches should differ");
        let full = obj.full_gradient(&x);
        let mut mean = DVector::zeros(4);
        let reps = 4000;
        for _ in 0..reps {
            mean += obj.stochastic_gradient(&x, &mut rng);
        }
        mean /= reps as f64;
        assert!((mean - full).norm() < 0.05, "batch gradients are unbiased");
    }
}
