//! Participation planning: binary scheduling matrices, relative
//! participation frequencies, the greedy scheduler and staleness
//! window checks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// K x n binary participation plan. Every row sums to exactly
/// `participants_per_round`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingMatrix {
    rounds: usize,
    population: usize,
    entries: Vec<u8>,
    participants_per_round: usize,
    staleness_bound: usize,
}

impl SchedulingMatrix {
    /// Builds a matrix from row-major 0/1 entries, validating the
    /// structural invariants (entries binary, row sums equal to
    /// `participants`, `participants <= population`, `staleness >= 1`).
    /// Staleness-window feasibility is checked separately by
    /// [`check_staleness`] so that violating plans can be inspected.
    pub fn from_entries(
        rounds: usize,
        population: usize,
        entries: Vec<u8>,
        participants: usize,
        staleness_bound: usize,
    ) -> Result<Self> {
        if entries.len() != rounds * population {
            return Err(Error::ShapeMismatch("scheduling entries vs rounds * population"));
        }
        if participants > population {
            return Err(Error::TooManyParticipants {
                participants,
                population,
            });
        }
        if staleness_bound < 1 {
            return Err(Error::InvalidParameter {
                name: "staleness_bound",
                value: staleness_bound as f64,
            });
        }
        for (idx, &e) in entries.iter().enumerate() {
            if e > 1 {
                return Err(Error::InvalidParameter {
                    name: "scheduling entry",
                    value: e as f64,
                });
            }
            let _ = idx;
        }
        for k in 0..rounds {
            let sum: usize = entries[k * population..(k + 1) * population]
                .iter()
                .map(|&e| e as usize)
                .sum();
            if sum != participants {
                return Err(Error::InvalidRunConfig("row sum differs from participants per round"));
            }
        }
        Ok(Self {
            rounds,
            population,
            entries,
            participants_per_round: participants,
            staleness_bound,
        })
    }

    /// Number of rounds K.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Population size n.
    pub fn population(&self) -> usize {
        self.population
    }

    /// Participants per round A.
    pub fn participants_per_round(&self) -> usize {
        self.participants_per_round
    }

    /// Staleness bound S the plan was built for.
    pub fn staleness_bound(&self) -> usize {
        self.staleness_bound
    }

    /// Whether UE `ue` is scheduled in round `round`.
    pub fn scheduled(&self, round: usize, ue: usize) -> bool {
        self.entries[round * self.population + ue] == 1
    }

    /// Row of 0/1 entries for one round.
    pub fn row(&self, round: usize) -> &[u8] {
        &self.entries[round * self.population..(round + 1) * self.population]
    }

    /// Indices scheduled in one round, ascending.
    pub fn scheduled_set(&self, round: usize) -> Vec<usize> {
        self.row(round)
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Achieved vs target participation frequencies. Counts are kept as
/// integers so the achieved frequencies sum to exactly one over A*K
/// slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationStats {
    counts: Vec<u64>,
    slots: u64,
    target_eta: Vec<f64>,
}

impl ParticipationStats {
    /// Per-UE participation counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total aggregation slots A*K.
    pub fn slots(&self) -> u64 {
        self.slots
    }

    /// Achieved frequency of one UE.
    pub fn achieved(&self, ue: usize) -> f64 {
        self.counts[ue] as f64 / self.slots as f64
    }

    /// Achieved frequencies for all UEs.
    pub fn achieved_eta(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.slots as f64).collect()
    }

    /// Target frequencies the stats are compared against.
    pub fn target_eta(&self) -> &[f64] {
        &self.target_eta
    }

    /// Exact (integer) check that the achieved frequencies sum to one.
    pub fn counts_fill_slots(&self) -> bool {
        self.counts.iter().sum::<u64>() == self.slots
    }

    /// Largest |achieved - target| over the population.
    pub fn max_deviation(&self) -> f64 {
        self.counts
            .iter()
            .zip(&self.target_eta)
            .map(|(&c, &t)| (c as f64 / self.slots as f64 - t).abs())
            .fold(0.0, f64::max)
    }
}

/// Computes per-UE participation counts over A*K slots.
pub fn relative_frequency(matrix: &SchedulingMatrix, target_eta: &[f64]) -> Result<ParticipationStats> {
    if target_eta.len() != matrix.population() {
        return Err(Error::DimensionMismatch {
            expected: matrix.population(),
            got: target_eta.len(),
        });
    }
    let mut counts = vec![0u64; matrix.population()];
    for k in 0..matrix.rounds() {
        for (i, &e) in matrix.row(k).iter().enumerate() {
            counts[i] += e as u64;
        }
    }
    Ok(ParticipationStats {
        counts,
        slots: (matrix.participants_per_round() * matrix.rounds()) as u64,
        target_eta: target_eta.to_vec(),
    })
}

/// Greedy scheduler.
///
/// Each round takes a snapshot of the achieved frequencies (zero before
/// the first update), sorts UEs by (achieved frequency, index) and
/// admits those whose achieved frequency has not overshot their target.
/// Any shortfall is filled with the lowest-indexed UEs not yet in the
/// row. For rational targets the produced rows become periodic after a
/// warm-up of one period.
pub fn greedy_schedule(
    target_eta: &[f64],
    participants: usize,
    rounds: usize,
    staleness_bound: usize,
) -> Result<SchedulingMatrix> {
    let population = target_eta.len();
    if participants == 0 || participants > population {
        return Err(Error::TooManyParticipants {
            participants,
            population,
        });
    }
    if rounds < 1 {
        return Err(Error::InvalidParameter {
            name: "rounds",
            value: rounds as f64,
        });
    }
    let sum: f64 = target_eta.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::EtaSum(sum));
    }

    let mut entries = vec![0u8; rounds * population];
    let mut counts = vec![0u64; population];
    let mut total = 0u64;
    let mut order: Vec<usize> = (0..population).collect();

    for k in 0..rounds {
        let achieved = |i: usize| {
            if total == 0 {
                0.0
            } else {
                counts[i] as f64 / total as f64
            }
        };
        order.sort_by(|&a, &b| {
            achieved(a)
                .partial_cmp(&achieved(b))
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let row = &mut entries[k * population..(k + 1) * population];
        let mut picked = 0usize;
        for &i in order.iter() {
            if picked == participants {
                break;
            }
            if achieved(i) <= target_eta[i] {
                row[i] = 1;
                picked += 1;
            }
        }
        if picked < participants {
            for i in 0..population {
                if picked == participants {
                    break;
                }
                if row[i] == 0 {
                    row[i] = 1;
                    picked += 1;
                }
            }
        }
        for i in 0..population {
            counts[i] += row[i] as u64;
        }
        total += participants as u64;
    }

    SchedulingMatrix::from_entries(rounds, population, entries, participants, staleness_bound)
}

/// A staleness window with no participation for one UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StalenessViolation {
    /// Offending UE.
    pub ue: usize,
    /// First round of the violating window.
    pub window_start: usize,
}

/// Scans every window of `staleness_bound + 1` consecutive rounds and
/// reports the ones in which a UE never participates, i.e. the UE would
/// carry an update older than the bound. Equivalently: at most
/// `staleness_bound` consecutive unscheduled rounds are allowed per UE.
pub fn check_staleness(matrix: &SchedulingMatrix, staleness_bound: usize) -> Vec<StalenessViolation> {
    let window = staleness_bound + 1;
    let mut violations = Vec::new();
    if window > matrix.rounds() {
        return violations;
    }
    for ue in 0..matrix.population() {
        let mut in_window: usize = (0..window)
            .map(|k| matrix.scheduled(k, ue) as usize)
            .sum();
        if in_window == 0 {
            violations.push(StalenessViolation { ue, window_start: 0 });
        }
        for start in 1..=(matrix.rounds() - window) {
            in_window -= matrix.scheduled(start - 1, ue) as usize;
            in_window += matrix.scheduled(start + window - 1, ue) as usize;
            if in_window == 0 {
                violations.push(StalenessViolation { ue, window_start: start });
            }
        }
    }
    violations.sort_by_key(|v| (v.ue, v.window_start));
    violations
}

/// Horizon feasibility per UE: `eta_i >= S / K` (closed inequality).
pub fn eta_lower_bound_check(target_eta: &[f64], staleness_bound: usize, rounds: usize) -> Vec<bool> {
    let bound = staleness_bound as f64 / rounds as f64;
    target_eta.iter().map(|&eta| eta >= bound).collect()
}

/// Smallest period `P` with `eta_i * A * P` integral for all UEs, given
/// the targets as exact fractions `numer_i / denom`. Returns `None` if
/// no period below `max_period` exists.
pub fn rational_period(
    numerators: &[u64],
    denominator: u64,
    participants: usize,
    max_period: usize,
) -> Option<usize> {
    'outer: for period in 1..=max_period {
        for &a in numerators {
            if (a as u128 * participants as u128 * period as u128) % denominator as u128 != 0 {
                continue 'outer;
            }
        }
        return Some(period);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// The worked 5x4 example matrix with A = 2.
    fn example_matrix() -> SchedulingMatrix {
        let entries = vec![
            1, 1, 0, 0, //
            0, 1, 1, 0, //
            1, 0, 0, 1, //
            0, 1, 1, 0, //
            1, 0, 0, 1,
        ];
        SchedulingMatrix::from_entries(5, 4, entries, 2, 2).unwrap()
    }

    #[test]
    fn example_matrix_frequencies() {
        let m = example_matrix();
        let stats = relative_frequency(&m, &[0.3, 0.3, 0.2, 0.2]).unwrap();
        assert_eq!(stats.counts(), &[3, 3, 2, 2]);
        assert_eq!(stats.slots(), 10);
        let eta = stats.achieved_eta();
        assert_eq!(eta, vec![0.3, 0.3, 0.2, 0.2]);
        assert!(stats.counts_fill_slots());
    }

    #[test]
    fn all_ones_column_frequency() {
        let m = SchedulingMatrix::from_entries(3, 2, vec![1, 0, 1, 0, 1, 0], 1, 1).unwrap();
        let stats = relative_frequency(&m, &[1.0, 0.0]).unwrap();
        assert_eq!(stats.achieved(0), 1.0);
    }

    #[test]
    fn round_robin_frequency() {
        let m = greedy_schedule(&[0.25; 4], 2, 4, 2).unwrap();
        let stats = relative_frequency(&m, &[0.25; 4]).unwrap();
        assert_eq!(stats.achieved_eta(), vec![0.25; 4]);
    }

    #[test]
    fn greedy_reproduces_period_two_pattern() {
        // Equal targets, n = 4, A = 2, K = 4: the period-2 pattern.
        let m = greedy_schedule(&[0.25; 4], 2, 4, 2).unwrap();
        assert_eq!(m.row(0), &[1, 1, 0, 0]);
        assert_eq!(m.row(1), &[0, 0, 1, 1]);
        assert_eq!(m.row(2), &[1, 1, 0, 0]);
        assert_eq!(m.row(3), &[0, 0, 1, 1]);
    }

    #[test]
    fn greedy_single_ue() {
        let m = greedy_schedule(&[1.0], 1, 5, 1).unwrap();
        for k in 0..5 {
            assert_eq!(m.row(k), &[1]);
        }
    }

    #[test]
    fn greedy_weighted_hand_trace() {
        // Hand trace with targets (0.5, 0.25, 0.25), A = 1, K = 4:
        // picks are UE0, UE1, UE2, UE0.
        let m = greedy_schedule(&[0.5, 0.25, 0.25], 1, 4, 2).unwrap();
        assert_eq!(m.row(0), &[1, 0, 0]);
        assert_eq!(m.row(1), &[0, 1, 0]);
        assert_eq!(m.row(2), &[0, 0, 1]);
        assert_eq!(m.row(3), &[1, 0, 0]);
        let stats = relative_frequency(&m, &[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(stats.counts(), &[2, 1, 1]);
    }

    #[test]
    fn greedy_rejects_oversized_a() {
        assert!(matches!(
            greedy_schedule(&[0.5, 0.5], 3, 4, 1),
            Err(Error::TooManyParticipants { .. })
        ));
    }

    #[test]
    fn staleness_example_matrix_clean() {
        // Longest unscheduled run in the example matrix is 2 rounds,
        // so the bound S = 2 holds.
        let m = example_matrix();
        assert!(check_staleness(&m, 2).is_empty());
    }

    #[test]
    fn staleness_never_scheduled() {
        let m = SchedulingMatrix::from_entries(4, 2, vec![1, 0, 1, 0, 1, 0, 1, 0], 1, 1).unwrap();
        let v = check_staleness(&m, 1);
        let for_ue1: Vec<_> = v.iter().filter(|x| x.ue == 1).collect();
        // One violation per window of S+1 = 2 rounds: starts 0, 1, 2.
        assert_eq!(for_ue1.len(), 3);
        assert!(v.iter().all(|x| x.ue == 1));
    }

    #[test]
    fn staleness_window_equal_horizon() {
        // S = K leaves no complete window, so any matrix passes.
        let m = example_matrix();
        assert!(check_staleness(&m, 5).is_empty());
    }

    #[test]
    fn eta_lower_bound_examples() {
        assert_eq!(eta_lower_bound_check(&[0.3], 2, 10), vec![true]);
        assert_eq!(eta_lower_bound_check(&[0.1], 2, 10), vec![false]);
        assert_eq!(eta_lower_bound_check(&[0.2], 2, 10), vec![true]);
    }

    #[test]
    fn periodicity_after_warmup_for_rational_targets() {
        // Targets (1/2, 1/4, 1/4), A = 1: period 4; rows repeat exactly
        // one period after warm-up.
        let eta = [0.5, 0.25, 0.25];
        let period = rational_period(&[2, 1, 1], 4, 1, 64).unwrap();
        assert_eq!(period, 4);
        let k = 6 * period;
        let m = greedy_schedule(&eta, 1, k, 2).unwrap();
        for start in period..(k - period) {
            assert_eq!(m.row(start), m.row(start + period), "row {start}");
        }
    }

    proptest! {
        #[test]
        fn rows_always_sum_to_a(
            n in 2usize..12,
            a_seed in 1usize..12,
            k in 1usize..40,
            weights in proptest::collection::vec(1u64..6, 2..12),
        ) {
            let n = n.min(weights.len());
            let a = 1 + a_seed % n;
            let total: u64 = weights[..n].iter().sum();
            let eta: alloc::vec::Vec<f64> =
                weights[..n].iter().map(|&w| w as f64 / total as f64).collect();
            // Renormalize exactly enough for the 1e-12 gate.
            let m = greedy_schedule(&eta, a, k, 1);
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            for round in 0..k {
                let sum: usize = m.row(round).iter().map(|&e| e as usize).sum();
                prop_assert_eq!(sum, a);
            }
            // Appendix Cauchy-Schwarz step: sum of target frequencies of
            // any scheduled set is at most sqrt(A).
            for round in 0..k {
                let s: f64 = m.scheduled_set(round).iter().map(|&i| eta[i]).sum();
                prop_assert!(s <= (a as f64).sqrt() + 1e-12);
            }
        }
    }
}
