//! Systematic resampling split across workers by weight partial sums.
//!
//! The wheel is evaluated in fixed point: every weight becomes an integer
//! multiple of 2⁻⁵², so cumulative sums are exact and associative. Any split
//! of the input therefore selects exactly the particles a single sequential
//! pass selects, which is what makes the parallel resampler deterministic.
//!
//! With `T = Σ qᵢ`, arrow `k` sits at `U₀ + k·T` on a wheel of circumference
//! `N·T`, and particle `i` owns `[N·Cᵢ₋₁, N·Cᵢ)` where `Cᵢ` is the inclusive
//! prefix sum of `q`.

use std::ops::Range;

use super::parallel::even_split;

const FIXED_SCALE: f64 = (1u64 << 52) as f64;

/// Fixed-point image of a normalized weight.
#[inline]
pub fn to_fixed(w: f64) -> u64 {
    if w > 0.0 {
        (w * FIXED_SCALE).round() as u64
    } else {
        0
    }
}

/// What one worker does during resampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerShare {
    /// Input particles this worker scans.
    pub input: Range<usize>,
    /// Output slots (arrow indices) this worker fills.
    pub output: Range<usize>,
    /// Fixed-point cumulative weight before `input.start`.
    pub offset: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    pub n: usize,
    /// First arrow position, fixed point, in `[0, total)`.
    pub arrow0: u128,
    /// Fixed-point weight total.
    pub total: u128,
    pub shares: Vec<WorkerShare>,
}

impl ResamplePlan {
    /// Builds the plan from per-worker fixed-point partial sums.
    ///
    /// `u` is the uniform draw in `[0, 1)`; the first arrow sits at `u / N`.
    pub fn from_partial_sums(
        n: usize,
        inputs: Vec<Range<usize>>,
        partial: &[u128],
        u: f64,
    ) -> Self {
        assert_eq!(inputs.len(), partial.len());
        let total: u128 = partial.iter().sum();
        let arrow0 = if total == 0 {
            0
        } else {
            ((u * total as f64).floor().max(0.0) as u128).min(total - 1)
        };
        let first_arrow_at = |boundary: u128| -> usize {
            let target = n as u128 * boundary;
            if total == 0 || target <= arrow0 {
                0
            } else {
                ((target - arrow0).div_ceil(total)).min(n as u128) as usize
            }
        };
        let mut offset = 0u128;
        let mut shares = Vec::with_capacity(inputs.len());
        for (j, input) in inputs.into_iter().enumerate() {
            let start = first_arrow_at(offset);
            let next = offset + partial[j];
            let end = if j + 1 == partial.len() {
                n
            } else {
                first_arrow_at(next)
            };
            shares.push(WorkerShare {
                input,
                output: start..end,
                offset,
            });
            offset = next;
        }
        Self {
            n,
            arrow0,
            total,
            shares,
        }
    }

    #[inline]
    fn arrow(&self, k: usize) -> u128 {
        self.arrow0 + k as u128 * self.total
    }

    /// Walks one share: calls `emit(k, i)` for each of its arrows `k`, where
    /// `i` is the selected input index. `q` is the share's slice of
    /// fixed-point weights.
    #[inline]
    pub fn walk(&self, share: &WorkerShare, q: &[u64], mut emit: impl FnMut(usize, usize)) {
        debug_assert_eq!(q.len(), share.input.len());
        if share.output.is_empty() {
            return;
        }
        let n = self.n as u128;
        let mut local = 0usize;
        // Cumulative weight through the current particle.
        let mut cum = share.offset + q.first().copied().unwrap_or(0) as u128;
        for k in share.output.clone() {
            let a = self.arrow(k);
            while n * cum <= a && local + 1 < q.len() {
                local += 1;
                cum += q[local] as u128;
            }
            emit(k, share.input.start + local);
        }
    }
}

/// Plans resampling of normalized `weights` over `workers` workers, each
/// owning an even share of the input particles.
pub fn resample_partition(weights: &[f64], workers: usize, u0: f64) -> ResamplePlan {
    let n = weights.len();
    let inputs = even_split(n, workers.max(1), 1);
    let partial: Vec<u128> = inputs
        .iter()
        .map(|r| {
            weights[r.clone()]
                .iter()
                .map(|&w| to_fixed(w) as u128)
                .sum()
        })
        .collect();
    ResamplePlan::from_partial_sums(n, inputs, &partial, u0 * n as f64)
}

/// Selected input index for every output slot.
pub fn systematic_indices(weights: &[f64], workers: usize, u0: f64) -> Vec<usize> {
    let plan = resample_partition(weights, workers, u0);
    let q: Vec<u64> = weights.iter().map(|&w| to_fixed(w)).collect();
    let mut out = vec![usize::MAX; weights.len()];
    for share in &plan.shares {
        plan.walk(share, &q[share.input.clone()], |k, i| out[k] = i);
    }
    out
}

/// Number of copies of each input in a resampling result.
pub fn copy_counts(indices: &[usize], n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    indices.iter().for_each(|&i| counts[i] += 1);
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    /// Plain floating point resampling wheel.
    fn scalar_reference(weights: &[f64], u0: f64) -> Vec<usize> {
        let n = weights.len();
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        let mut cum = weights[0];
        for k in 0..n {
            let arrow = u0 + k as f64 / n as f64;
            while cum <= arrow && i + 1 < n {
                i += 1;
                cum += weights[i];
            }
            out.push(i);
        }
        out
    }

    fn random_weights(rng: &mut RandomStream, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.uniform().powi(3)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / s).collect()
    }

    #[test]
    fn equal_weights_copy_each_once() {
        let w = vec![0.125; 8];
        for u0 in [0.0, 0.05, 0.1249] {
            assert_eq!(systematic_indices(&w, 3, u0), (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn half_half_zero_zero() {
        let w = [0.5, 0.5, 0.0, 0.0];
        for u0 in [0.0, 0.1, 0.2499] {
            let idx = systematic_indices(&w, 2, u0);
            assert_eq!(copy_counts(&idx, 4), vec![2, 2, 0, 0]);
        }
    }

    #[test]
    fn single_worker_plan_covers_all_arrows() {
        let plan = resample_partition(&[0.2, 0.3, 0.5], 1, 0.1);
        assert_eq!(plan.shares.len(), 1);
        assert_eq!(plan.shares[0].output, 0..3);
        assert_eq!(plan.shares[0].input, 0..3);
    }

    #[test]
    fn two_per_core_with_equal_weights() {
        let w = vec![1.0 / 16.0; 16];
        for u0 in [0.0, 0.03, 0.0624] {
            let plan = resample_partition(&w, 8, u0);
            for (j, s) in plan.shares.iter().enumerate() {
                assert_eq!(s.output.len(), 2, "worker {j} at u0={u0}: {s:?}");
                assert_eq!(s.input, 2 * j..2 * j + 2);
            }
        }
    }

    #[test]
    fn matches_scalar_reference_on_random_weights() {
        let mut rng = RandomStream::new(11, 0);
        for _ in 0..20 {
            let w = random_weights(&mut rng, 1024);
            let u0 = rng.uniform() / 1024.0;
            let reference = scalar_reference(&w, u0);
            for workers in [1, 2, 3, 8] {
                assert_eq!(systematic_indices(&w, workers, u0), reference);
            }
        }
    }

    #[test]
    fn mean_copy_count_is_n_times_weight() {
        let mut rng = RandomStream::new(5, 2);
        let n = 16;
        let w = random_weights(&mut rng, n);
        let trials = 10_000;
        let mut sum = vec![0.0; n];
        let mut sum_sq = vec![0.0; n];
        for _ in 0..trials {
            let u0 = rng.uniform() / n as f64;
            for (i, c) in copy_counts(&systematic_indices(&w, 2, u0), n).into_iter().enumerate() {
                sum[i] += c as f64;
                sum_sq[i] += (c * c) as f64;
            }
        }
        for i in 0..n {
            let mean = sum[i] / trials as f64;
            let var = (sum_sq[i] / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt();
            let expected = n as f64 * w[i];
            assert!((mean - expected).abs() <= 3.0 * se + 1e-6, "particle {i}: {mean} vs {expected}");
        }
    }

    proptest! {
        #[test]
        fn outputs_are_disjoint_and_complete(n in 1usize..300, workers in 1usize..10, seed in any::<u64>()) {
            let mut rng = RandomStream::new(seed, 0);
            let w = random_weights(&mut rng, n);
            let u0 = rng.uniform() / n as f64;
            let plan = resample_partition(&w, workers, u0);
            let mut next = 0;
            for s in &plan.shares {
                prop_assert_eq!(s.output.start, next);
                next = s.output.end;
            }
            prop_assert_eq!(next, n);
            let idx = systematic_indices(&w, workers, u0);
            prop_assert!(idx.iter().all(|&i| i < n));
            prop_assert_eq!(idx, systematic_indices(&w, 1, u0));
        }

        #[test]
        fn copy_count_bounds(n in 1usize..500, seed in any::<u64>()) {
            let mut rng = RandomStream::new(seed, 1);
            let w = random_weights(&mut rng, n);
            let u0 = rng.uniform() / n as f64;
            let counts = copy_counts(&systematic_indices(&w, 4, u0), n);
            for (c, wi) in counts.iter().zip(&w) {
                let e = wi * n as f64;
                prop_assert!((*c as f64) >= e.floor() - 1e-9 && (*c as f64) <= e.ceil() + 1e-9, "count {} for N*w {}", c, e);
            }
        }
    }
}
