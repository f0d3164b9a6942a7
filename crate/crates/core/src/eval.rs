//! Localization metrics: convergence, success, trajectory error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::StageTimings;
use crate::models::Pose2D;

/// Position error below which the estimate counts as converged, meters.
pub const CONVERGENCE_DISTANCE: f64 = 0.2;
/// Yaw error below which the estimate counts as converged: 36°.
pub const CONVERGENCE_YAW: f64 = 36.0 * std::f64::consts::PI / 180.0;
/// Largest position error tolerated after convergence, meters.
pub const SUCCESS_DISTANCE: f64 = 1.0;

/// Estimate, ground truth and stage timings of one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickResult {
    pub estimate: Pose2D<f64>,
    pub truth: Pose2D<f64>,
    pub timings: StageTimings,
}

/// One localization run over a sequence with its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub ticks: Vec<TickResult>,
    pub rate_hz: f64,
    pub convergence: Option<usize>,
    pub success: bool,
    /// Position RMSE from convergence on; absent if never converged.
    pub ate: Option<f64>,
}

impl RunResult {
    pub fn new(ticks: Vec<TickResult>, rate_hz: f64) -> Self {
        let (est, truth): (Vec<_>, Vec<_>) = ticks.iter().map(|t| (t.estimate, t.truth)).unzip();
        let convergence = detect_convergence(&est, &truth);
        let success = classify_success(&est, &truth);
        let ate = ate_after_convergence(&est, &truth).ok();
        Self {
            ticks,
            rate_hz,
            convergence,
            success,
            ate,
        }
    }

    /// Seconds from the first tick to convergence.
    pub fn convergence_time(&self) -> Option<f64> {
        self.convergence.map(|k| k as f64 / self.rate_hz)
    }

    pub fn position_errors(&self) -> Vec<f64> {
        self.ticks
            .iter()
            .map(|t| t.estimate.distance(&t.truth))
            .collect()
    }

    /// Total step times in nanoseconds, one per tick.
    pub fn step_times_ns(&self) -> Vec<u64> {
        self.ticks.iter().map(|t| t.timings.total_ns).collect()
    }
}

fn check_aligned(estimates: &[Pose2D<f64>], truth: &[Pose2D<f64>]) {
    assert_eq!(
        estimates.len(),
        truth.len(),
        "estimate and truth streams must be aligned"
    );
}

/// First tick within both convergence thresholds.
pub fn detect_convergence(estimates: &[Pose2D<f64>], truth: &[Pose2D<f64>]) -> Option<usize> {
    check_aligned(estimates, truth);
    estimates.iter().zip(truth).position(|(e, t)| {
        e.distance(t) <= CONVERGENCE_DISTANCE && e.heading_error(t) <= CONVERGENCE_YAW
    })
}

/// Converged, and no later position error above [`SUCCESS_DISTANCE`].
pub fn classify_success(estimates: &[Pose2D<f64>], truth: &[Pose2D<f64>]) -> bool {
    match detect_convergence(estimates, truth) {
        Some(k) => estimates[k..]
            .iter()
            .zip(&truth[k..])
            .all(|(e, t)| e.distance(t) <= SUCCESS_DISTANCE),
        None => false,
    }
}

/// Root-mean-square position error over the ticks from convergence on.
pub fn ate_after_convergence(estimates: &[Pose2D<f64>], truth: &[Pose2D<f64>]) -> Result<f64> {
    let k = detect_convergence(estimates, truth).ok_or_else(|| {
        Error::UndefinedMetric(
            "trajectory error is undefined for a run that never converged".into(),
        )
    })?;
    let n = estimates.len() - k;
    let sum: f64 = estimates[k..]
        .iter()
        .zip(&truth[k..])
        .map(|(e, t)| e.distance(t).powi(2))
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// Fraction of runs converged by each tick `0..len`; `None` never converged.
pub fn convergence_curve(convergence: &[Option<usize>], len: usize) -> Result<Vec<f64>> {
    if convergence.is_empty() {
        return Err(Error::input("convergence curve needs at least one run"));
    }
    let mut per_tick = vec![0usize; len];
    for k in convergence.iter().flatten() {
        if *k < len {
            per_tick[*k] += 1;
        }
    }
    let total = convergence.len() as f64;
    let mut acc = 0;
    Ok(per_tick
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / total
        })
        .collect())
}

/// Median of the values; `None` for an empty slice. Infinite values sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linearly interpolated quantile `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi || v[lo] == v[hi] {
        return Some(v[lo]);
    }
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// Aggregate metrics of a batch of runs under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Median ATE (RMSE) over converged runs.
    pub median_ate: Option<f64>,
    /// Median convergence time over all runs, counting runs that never
    /// converged as infinitely late.
    pub median_convergence_time: Option<f64>,
}

impl BatchSummary {
    pub fn of(runs: &[RunResult]) -> Result<Self> {
        Self::from_outcomes(runs.iter().map(|r| (r.success, r.ate, r.convergence_time())))
    }

    /// The summary of the runs behind `rows`.
    pub fn from_rows(rows: &[ReportRow]) -> Result<Self> {
        Self::from_outcomes(
            rows.iter()
                .map(|r| (r.success, r.ate_rmse_m, r.convergence_time_s)),
        )
    }

    /// From `(success, ate, convergence time)` of every run.
    fn from_outcomes(
        outcomes: impl Iterator<Item = (bool, Option<f64>, Option<f64>)>,
    ) -> Result<Self> {
        let (mut runs, mut successes) = (0, 0);
        let (mut ates, mut times) = (Vec::new(), Vec::new());
        for (success, ate, time) in outcomes {
            runs += 1;
            successes += success as usize;
            ates.extend(ate);
            times.push(time.unwrap_or(f64::INFINITY));
        }
        if runs == 0 {
            return Err(Error::input("cannot summarize an empty batch"));
        }
        Ok(Self {
            runs,
            successes,
            success_rate: successes as f64 / runs as f64,
            median_ate: median(&ates),
            median_convergence_time: median(&times).filter(|t| t.is_finite()),
        })
    }
}

/// One row of the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sequence: String,
    pub seed: u64,
    pub particles: usize,
    pub policy: String,
    pub sensors: String,
    pub convergence_tick: Option<usize>,
    pub convergence_time_s: Option<f64>,
    pub success: bool,
    pub ate_rmse_m: Option<f64>,
    pub step_p10_ns: f64,
    pub step_p50_ns: f64,
    pub step_p90_ns: f64,
}

impl ReportRow {
    pub fn new(
        sequence: &str,
        seed: u64,
        particles: usize,
        policy: &str,
        sensors: &str,
        run: &RunResult,
    ) -> Self {
        let steps: Vec<f64> = run.step_times_ns().into_iter().map(|t| t as f64).collect();
        let q = |p| quantile(&steps, p).unwrap_or(0.0);
        Self {
            sequence: sequence.into(),
            seed,
            particles,
            policy: policy.into(),
            sensors: sensors.into(),
            convergence_tick: run.convergence,
            convergence_time_s: run.convergence_time(),
            success: run.success,
            ate_rmse_m: run.ate,
            step_p10_ns: q(0.1),
            step_p50_ns: q(0.5),
            step_p90_ns: q(0.9),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poses(errs: &[(f64, f64)]) -> (Vec<Pose2D<f64>>, Vec<Pose2D<f64>>) {
        let truth: Vec<_> = (0..errs.len())
            .map(|k| Pose2D::new(k as f64 * 0.1, 1.0, 0.5))
            .collect();
        let est = truth
            .iter()
            .zip(errs)
            .map(|(t, &(d, a))| Pose2D::new(t.x, t.y + d, t.theta + a))
            .collect();
        (est, truth)
    }

    #[test]
    fn perfect_estimate() {
        let (e, t) = poses(&[(0.0, 0.0); 10]);
        assert_eq!(detect_convergence(&e, &t), Some(0));
        assert!(classify_success(&e, &t));
        assert_eq!(ate_after_convergence(&e, &t).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_never_converges() {
        let (e, t) = poses(&[(0.3, 0.0); 10]);
        assert_eq!(detect_convergence(&e, &t), None);
        assert!(!classify_success(&e, &t));
        assert!(matches!(
            ate_after_convergence(&e, &t),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn threshold_crossing() {
        let mut errs = vec![(0.25, 0.0); 40];
        errs.extend(vec![(0.1, 10f64.to_radians()); 20]);
        let (e, t) = poses(&errs);
        assert_eq!(detect_convergence(&e, &t), Some(40));
        let mut errs = vec![(0.1, 0.7); 5];
        errs.push((0.1, 0.6));
        let (e, t) = poses(&errs);
        assert_eq!(detect_convergence(&e, &t), Some(5));
    }

    #[test]
    fn success_bound() {
        let (e, t) = poses(&[(0.0, 0.0), (0.9, 0.0), (0.5, 0.0)]);
        assert!(classify_success(&e, &t));
        let (e, t) = poses(&[(0.0, 0.0), (1.2, 0.0), (0.0, 0.0)]);
        assert!(!classify_success(&e, &t));
    }

    #[test]
    fn ate_examples() {
        let (e, t) = poses(&[(0.5, 0.0), (0.1, 0.0), (0.1, 0.0), (0.1, 0.0)]);
        assert!((ate_after_convergence(&e, &t).unwrap() - 0.1).abs() < 1e-12);
        let (e, t) = poses(&[(0.1, 0.0), (0.2, 0.0), (0.2, 0.0), (0.1, 0.0)]);
        // Hand RMSE: sqrt((0.01 + 0.04 + 0.04 + 0.01) / 4).
        assert!((ate_after_convergence(&e, &t).unwrap() - 0.025f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn curves() {
        assert_eq!(
            convergence_curve(&[Some(0), Some(0)], 3).unwrap(),
            vec![1.0; 3]
        );
        assert_eq!(convergence_curve(&[None, None], 3).unwrap(), vec![0.0; 3]);
        let c = convergence_curve(&[Some(10), Some(20)], 25).unwrap();
        assert!(c[..10].iter().all(|&p| p == 0.0));
        assert!(c[10..20].iter().all(|&p| p == 0.5));
        assert!(c[20..].iter().all(|&p| p == 1.0));
        assert!(convergence_curve(&[], 3).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0]), Some(1.5));
        assert_eq!(
            median(&[1.0, f64::INFINITY, f64::INFINITY]),
            Some(f64::INFINITY)
        );
        assert_eq!(median(&[]), None);
        assert_eq!(quantile(&[0.0, 10.0], 0.1), Some(1.0));
    }

    #[test]
    fn batch_summary_counts_unconverged_as_late() {
        let (e, t) = poses(&[(0.0, 0.0); 4]);
        let ticks = |e: &[Pose2D<f64>]| {
            e.iter()
                .zip(&t)
                .map(|(e, t)| TickResult {
                    estimate: *e,
                    truth: *t,
                    timings: StageTimings::default(),
                })
                .collect()
        };
        let good = RunResult::new(ticks(&e), 1.0);
        let (bad_e, _) = poses(&[(0.5, 0.0); 4]);
        let bad = RunResult::new(ticks(&bad_e), 1.0);
        let s = BatchSummary::of(&[good.clone(), bad.clone(), bad.clone()]).unwrap();
        assert_eq!(s.successes, 1);
        assert_eq!(s.median_ate, Some(0.0));
        assert_eq!(s.median_convergence_time, None);
        assert!(BatchSummary::of(&[]).is_err());

        let rows: Vec<ReportRow> = [&good, &bad]
            .iter()
            .map(|r| ReportRow::new("s", 0, 10, "fp32", "both", r))
            .collect();
        let direct = BatchSummary::of(&[good.clone(), bad.clone()]).unwrap();
        assert_eq!(BatchSummary::from_rows(&rows).unwrap(), direct);
        assert!(BatchSummary::from_rows(&[]).is_err());
    }

    proptest! {
        #[test]
        fn curve_is_monotone_and_bounded(ticks in prop::collection::vec(prop::option::of(0usize..50), 1..20)) {
            let c = convergence_curve(&ticks, 60).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn success_implies_convergence(errs in prop::collection::vec((0.0f64..1.5, -1.0f64..1.0), 1..40)) {
            let (e, t) = poses(&errs);
            if classify_success(&e, &t) {
                prop_assert!(detect_convergence(&e, &t).is_some());
            }
        }

        #[test]
        fn ate_invariant_to_delayed_start(errs in prop::collection::vec((0.0f64..0.5, -0.5f64..0.5), 2..30), shift in 0usize..10) {
            let (e, t) = poses(&errs);
            let mut pre = vec![(0.5, 0.0); shift];
            pre.extend_from_slice(&errs);
            let (e2, t2) = poses(&pre);
            match (ate_after_convergence(&e, &t), ate_after_convergence(&e2, &t2)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }
    }
}
