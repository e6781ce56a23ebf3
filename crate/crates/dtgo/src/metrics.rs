//! Per-round run metrics, baseline pairing, replication averaging, and the
//! CSV trace format.

use crate::objective::NodeObjective;
use crate::{Error, Result};
use nalgebra::DVector;
use std::path::Path;

/// Metrics of one optimization round, computed over real nodes only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundMetrics {
    pub round: usize,
    /// (1/N) sum of local objective values at the local models.
    pub cost: f64,
    /// (1/N) sum of squared distances from the plain average.
    pub consensus: f64,
    /// `cost` minus the paired baseline's cost; 0 until a baseline is applied.
    pub cost_subopt: f64,
    /// `consensus` minus the paired baseline's consensus.
    pub consensus_subopt: f64,
    /// (1/N) sum of squared distances from the stationary-weighted average.
    pub g_weighted: f64,
    /// Residual of the weighted-average descent identity for the transition
    /// into this round; 0 for round 0.
    pub weighted_avg_drift: f64,
}

/// A full per-round metric trace, row k describing the state after k rounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub rows: Vec<RoundMetrics>,
}

pub const TRACE_HEADER: &str =
    "round,cost,consensus,cost_suboptimality,consensus_suboptimality,g_weighted,weighted_avg_drift";

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fills the suboptimality columns as differences against a paired
    /// baseline trace, which must cover every round.
    pub fn apply_baseline(&mut self, baseline: &RunTrace) {
        assert!(
            baseline.rows.len() >= self.rows.len(),
            "baseline trace shorter than run trace"
        );
        for (row, base) in self.rows.iter_mut().zip(&baseline.rows) {
            assert_eq!(row.round, base.round, "baseline rounds misaligned");
            row.cost_subopt = row.cost - base.cost;
            row.consensus_subopt = row.consensus - base.consensus;
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.round,
                r.cost,
                r.consensus,
                r.cost_subopt,
                r.consensus_subopt,
                r.g_weighted,
                r.weighted_avg_drift
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<RunTrace> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == TRACE_HEADER => {}
            _ => return Err(Error::Parse { line: 1, msg: "bad or missing trace header".into() }),
        }
        let mut rows = Vec::new();
        for (line_no, raw) in lines {
            let line = line_no + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Parse { line, msg: format!("expected 7 fields, got {}", fields.len()) });
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") })
            };
            rows.push(RoundMetrics {
                round: fields[0]
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("bad round {:?}", fields[0]) })?,
                cost: num(fields[1])?,
                consensus: num(fields[2])?,
                cost_subopt: num(fields[3])?,
                consensus_subopt: num(fields[4])?,
                g_weighted: num(fields[5])?,
                weighted_avg_drift: num(fields[6])?,
            });
        }
        Ok(RunTrace { rows })
    }
}

/// Metrics of one round. `models` holds every node of the (possibly
/// extended) network; the averages run over the first `n_real` entries while
/// the weighted average uses the full stationary vector. `drift` is supplied
/// by the caller because it compares two consecutive rounds.
pub fn compute_round_metrics(
    models: &[DVector<f64>],
    objectives: &[NodeObjective],
    stationary: &DVector<f64>,
    n_real: usize,
    round: usize,
    drift: f64,
) -> RoundMetrics {
    assert_eq!(objectives.len(), n_real, "one objective per real node");
    assert_eq!(models.len(), stationary.len(), "stationary weight per model");
    let dim = models[0].len();
    let inv_n = 1.0 / n_real as f64;

    let cost = objectives.iter().zip(models).map(|(o, x)| o.value(x)).sum::<f64>() * inv_n;

    let mut plain = DVector::zeros(dim);
    for x in &models[..n_real] {
        plain += x;
    }
    plain *= inv_n;

    let mut weighted = DVector::zeros(dim);
    for (x, &p) in models.iter().zip(stationary.iter()) {
        weighted += x * p;
    }

    let consensus = models[..n_real].iter().map(|x| (x - &plain).norm_squared()).sum::<f64>() * inv_n;
    let g_weighted =
        models[..n_real].iter().map(|x| (x - &weighted).norm_squared()).sum::<f64>() * inv_n;

    RoundMetrics {
        round,
        cost,
        consensus,
        cost_subopt: 0.0,
        consensus_subopt: 0.0,
        g_weighted,
        weighted_avg_drift: drift,
    }
}

/// Pointwise mean of equally long traces, in the order given. Subopt columns
/// are averaged like the rest.
pub fn average_traces(traces: &[RunTrace]) -> RunTrace {
    assert!(!traces.is_empty(), "nothing to average");
    let len = traces[0].rows.len();
    assert!(traces.iter().all(|t| t.rows.len() == len), "trace lengths differ");
    let inv = 1.0 / traces.len() as f64;
    let mut rows = Vec::with_capacity(len);
    for k in 0..len {
        let mut acc = RoundMetrics { round: traces[0].rows[k].round, ..Default::default() };
        for t in traces {
            let r = &t.rows[k];
            assert_eq!(r.round, acc.round, "trace rounds misaligned");
            acc.cost += r.cost;
            acc.consensus += r.consensus;
            acc.cost_subopt += r.cost_subopt;
            acc.consensus_subopt += r.consensus_subopt;
            acc.g_weighted += r.g_weighted;
            acc.weighted_avg_drift += r.weighted_avg_drift;
        }
        acc.cost *= inv;
        acc.consensus *= inv;
        acc.cost_subopt *= inv;
        acc.consensus_subopt *= inv;
        acc.g_weighted *= inv;
        acc.weighted_avg_drift *= inv;
        rows.push(acc);
    }
    RunTrace { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::NodeObjective;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_vec(vec![v])
    }

    #[test]
    fn identical_models_have_zero_spread() {
        let objs = vec![
            NodeObjective::quadratic(scalar(0.0)),
            NodeObjective::quadratic(scalar(2.0)),
        ];
        let models = vec![scalar(1.5), scalar(1.5)];
        let pi = DVector::from_vec(vec![0.25, 0.75]);
        let m = compute_round_metrics(&models, &objs, &pi, 2, 0, 0.0);
        assert_eq!(m.consensus, 0.0);
        assert_eq!(m.g_weighted, 0.0);
        // (1/2)(0.5*1.5^2 + 0.5*0.5^2)
        assert!((m.cost - 0.5 * (0.5 * 2.25 + 0.5 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn two_scalar_models_unit_consensus() {
        let objs = vec![
            NodeObjective::quadratic(scalar(0.0)),
            NodeObjective::quadratic(scalar(0.0)),
        ];
        let models = vec![scalar(0.0), scalar(2.0)];
        let pi = DVector::from_vec(vec![0.5, 0.5]);
        let m = compute_round_metrics(&models, &objs, &pi, 2, 3, 0.0);
        assert_eq!(m.consensus, 1.0, "mean 1, deviations (1,1): ((1)^2+(1)^2)/2");
        assert_eq!(m.round, 3);
    }

    #[test]
    fn virtual_models_weight_the_average_but_not_the_spread() {
        let objs = vec![NodeObjective::quadratic(scalar(0.0))];
        // One real node at 1, one relay at 5.
        let models = vec![scalar(1.0), scalar(5.0)];
        let pi = DVector::from_vec(vec![0.75, 0.25]);
        let m = compute_round_metrics(&models, &objs, &pi, 1, 0, 0.0);
        assert_eq!(m.consensus, 0.0, "plain average sees only the real node");
        // Weighted average is 0.75*1 + 0.25*5 = 2, real node sits 1 away.
        assert_eq!(m.g_weighted, 1.0);
    }

    #[test]
    fn baseline_subtraction_fills_subopt_columns() {
        let mk = |cost: f64, consensus: f64, round| RoundMetrics {
            round,
            cost,
            consensus,
            ..Default::default()
        };
        let mut run = RunTrace { rows: vec![mk(3.0, 1.0, 0), mk(2.0, 0.5, 1)] };
        let base = RunTrace { rows: vec![mk(2.5, 0.0, 0), mk(1.0, 0.0, 1), mk(0.5, 0.0, 2)] };
        run.apply_baseline(&base);
        assert_eq!(run.rows[0].cost_subopt, 0.5);
        assert_eq!(run.rows[1].cost_subopt, 1.0);
        assert_eq!(run.rows[1].consensus_subopt, 0.5);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            RoundMetrics {
                round: 0,
                cost: std::f64::consts::PI,
                consensus: 1e-17,
                cost_subopt: -3.141e300,
                consensus_subopt: 0.1 + 0.2,
                g_weighted: 5e-324,
                weighted_avg_drift: -0.0,
            },
            RoundMetrics { round: 1, cost: 1.0 / 3.0, ..Default::default() },
        ];
        let trace = RunTrace { rows };
        let text = trace.to_csv_string();
        let back = RunTrace::parse_csv(&text).unwrap();
        assert_eq!(back, trace, "default float formatting round-trips exactly");
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        assert!(matches!(
            RunTrace::parse_csv("nope\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = format!("{TRACE_HEADER}\n0,1,2,3,4,5,6\n1,1,2\n");
        assert!(matches!(RunTrace::parse_csv(&text), Err(Error::Parse { line: 3, .. })));
        let text = format!("{TRACE_HEADER}\n0,1,x,3,4,5,6\n");
        assert!(matches!(RunTrace::parse_csv(&text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn averaging_traces_is_pointwise() {
        let mk = |cost: f64, round| RoundMetrics { round, cost, ..Default::default() };
        let a = RunTrace { rows: vec![mk(1.0, 0), mk(3.0, 1)] };
        let b = RunTrace { rows: vec![mk(2.0, 0), mk(5.0, 1)] };
        let avg = average_traces(&[a, b]);
        assert_eq!(avg.rows[0].cost, 1.5);
        assert_eq!(avg.rows[1].cost, 4.0);
        assert_eq!(avg.rows[1].round, 1);
    }
}
