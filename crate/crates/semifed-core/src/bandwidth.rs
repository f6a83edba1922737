//! Per-round bandwidth allocation.
//!
//! The optimal allocations form a family between two extremes: all
//! bandwidth to the UEs scheduled this round, or the whole population
//! sharing it. Within a round, shares are chosen so the realized
//! rate-to-frequency ratio `r_i / eta_i` is equal across the UEs that
//! transmit (the per-draw form of the weighted-rate equalization
//! condition). The closed-form lower bound on a share is expressed via
//! the Lambert-W function.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scheduling::SchedulingMatrix;
use crate::wireless::{
    compute_delay, rate_from_snr, snr_hz, ChannelParams, ChannelTrace, UEProfile,
};

/// `-1/e`, the branch point of the Lambert-W function.
pub const NEG_INV_E: f64 = -0.367_879_441_171_442_33;

/// Real branches of the Lambert-W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambertBranch {
    /// W0: increasing branch, `w >= -1`, defined for `x >= -1/e`.
    Principal,
    /// W-1: decreasing branch, `w <= -1`, defined for `-1/e <= x < 0`.
    Lower,
}

impl LambertBranch {
    fn name(self) -> &'static str {
        match self {
            LambertBranch::Principal => "principal",
            LambertBranch::Lower => "lower",
        }
    }
}

/// Lambert-W on a real branch, accurate to `|w e^w - x| <= 1e-12` over
/// moderate arguments.
///
/// Inputs within one ulp below the branch point `-1/e` are treated as
/// the branch point itself (both branches return -1 there); anything
/// further out is a domain error.
pub fn lambert_w(x: f64, branch: LambertBranch) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::LambertDomain {
            branch: branch.name(),
            value: x,
        });
    }
    if x < NEG_INV_E {
        if x > NEG_INV_E - 1e-15 {
            return Ok(-1.0);
        }
        return Err(Error::LambertDomain {
            branch: branch.name(),
            value: x,
        });
    }
    match branch {
        LambertBranch::Principal => {
            if x == 0.0 {
                return Ok(0.0);
            }
            let guess = if x < -0.32 {
                branch_point_series(x, true)
            } else if x < 1.0 {
                // Series around zero.
                x * (1.0 - x + 1.5 * x * x)
            } else {
                let l1 = Float::ln(x);
                if l1 > 1.0 {
                    l1 - Float::ln(l1)
                } else {
                    0.5
                }
            };
            Ok(halley(x, guess.max(-1.0), branch))
        }
        LambertBranch::Lower => {
            if x >= 0.0 {
                return Err(Error::LambertDomain {
                    branch: branch.name(),
                    value: x,
                });
            }
            if x <= NEG_INV_E {
                return Ok(-1.0);
            }
            let guess = if x > -0.27 {
                // Asymptotic form for x -> 0-.
                let l1 = Float::ln(-x);
                l1 - Float::ln(-l1)
            } else {
                branch_point_series(x, false)
            };
            Ok(halley(x, guess.min(-1.0), branch))
        }
    }
}

/// Series around the branch point `x = -1/e` in terms of
/// `p = sqrt(2 (e x + 1))`; the sign of `p` selects the branch.
fn branch_point_series(x: f64, principal: bool) -> f64 {
    let q = 2.0 * (core::f64::consts::E * x + 1.0);
    let p = Float::sqrt(q.max(0.0)) * if principal { 1.0 } else { -1.0 };
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
}

fn halley(x: f64, guess: f64, branch: LambertBranch) -> f64 {
    let mut w = guess;
    for _ in 0..60 {
        let ew = Float::exp(w);
        let f = w * ew - x;
        if f == 0.0 {
            return w;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = w - step;
        let next = match branch {
            // Keep iterates on their branch.
            LambertBranch::Principal => next.max(-1.0),
            LambertBranch::Lower => next.min(-1.0),
        };
        if (next - w).abs() <= 1e-16 * w.abs().max(1e-3) {
            w = next;
            break;
        }
        w = next;
    }
    let resid = w * Float::exp(w) - x;
    if resid.abs() > 1e-13 * (1.0 + x.abs()) {
        return bisect_lambert(x, branch);
    }
    w
}

/// Plain bisection fallback; also serves as a slow reference.
fn bisect_lambert(x: f64, branch: LambertBranch) -> f64 {
    let (mut lo, mut hi) = match branch {
        LambertBranch::Principal => {
            // w e^w increasing on [-1, inf).
            let mut hi = 1.0f64;
            while hi * Float::exp(hi) < x {
                hi *= 2.0;
            }
            (-1.0f64, hi)
        }
        LambertBranch::Lower => {
            // w e^w decreasing in w on (-inf, -1]; f(w) = w e^w - x has
            // f(-1) <= 0 and f -> -x > 0 as w -> -inf.
            let mut lo = -2.0f64;
            while lo * Float::exp(lo) - x <= 0.0 && lo > -746.0 {
                lo *= 2.0;
            }
            (lo, -1.0f64)
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f = mid * Float::exp(mid) - x;
        let increasing = matches!(branch, LambertBranch::Principal);
        if (f > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form lower bound on the bandwidth share of a UE that must
/// deliver `payload_units` within `total_time_s` of wall clock,
/// `b > B n eta Z / ((T - Tcmp) |W(-G e^-G) + G|)` with
/// `G = Z / ((T - Tcmp) * snr)`.
///
/// The principal branch makes `W(-G e^-G) = -G` for `G <= 1`, which
/// zeroes the denominator, so the lower branch is used for `G < 1` and
/// the principal branch for `G > 1`; the denominator enters in absolute
/// value. At `G = 1` both branches meet and the bound degenerates.
pub fn min_share_bound(
    profile: &UEProfile,
    params: &ChannelParams,
    population: usize,
    h: f64,
    total_time_s: f64,
    payload_units: f64,
) -> Result<f64> {
    if !(payload_units > 0.0) {
        return Err(Error::InvalidParameter {
            name: "payload_units",
            value: payload_units,
        });
    }
    let tcmp = compute_delay(profile);
    if total_time_s <= tcmp {
        return Err(Error::InfeasibleTime {
            total_s: total_time_s,
            compute_s: tcmp,
        });
    }
    let snr = snr_hz(profile, h, params);
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter { name: "snr", value: snr });
    }
    let gamma = payload_units / ((total_time_s - tcmp) * snr);
    let arg = -gamma * Float::exp(-gamma);
    let w = if gamma > 1.0 {
        lambert_w(arg, LambertBranch::Principal)?
    } else {
        lambert_w(arg, LambertBranch::Lower)?
    };
    let factor = w + gamma;
    if factor.abs() < 1e-12 {
        return Err(Error::DegenerateBranch(factor));
    }
    Ok(params.total_bandwidth_hz * population as f64 * profile.eta * payload_units
        / ((total_time_s - tcmp) * factor.abs()))
}

/// Derivative of `b ln(1 + s/b)` with respect to `b`.
fn rate_slope(bandwidth: f64, snr: f64) -> f64 {
    Float::ln(1.0 + snr / bandwidth) - snr / (bandwidth + snr)
}

/// Solves `rate(b) = target` for `b` in `(0, hi]`, assuming
/// `rate(hi) >= target`. The rate is increasing and concave, so Newton
/// from `hi` descends monotonically onto the root.
fn bandwidth_for_rate(snr: f64, target: f64, hi: f64) -> f64 {
    debug_assert!(target > 0.0);
    let mut b = hi;
    for _ in 0..128 {
        let f = rate_from_snr(b, snr) - target;
        if f.abs() <= 1e-16 * target {
            break;
        }
        let slope = rate_slope(b, snr);
        if slope <= 0.0 {
            break;
        }
        let next = b - f / slope;
        if !(next > 0.0) {
            b *= 0.5;
            continue;
        }
        if (next - b).abs() <= 1e-17 * b {
            b = next;
            break;
        }
        b = next;
    }
    b.min(hi)
}

/// Equalizes `r_i / eta_i` across `indices`, spending exactly the full
/// bandwidth. Solved by a safeguarded Newton iteration on the common
/// ratio; the bandwidth sum is matched to 1e-12 relative.
fn equalize_rates(
    indices: &[usize],
    profiles: &[UEProfile],
    hs: &[f64],
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    let total = params.total_bandwidth_hz;
    let mut shares = vec![0.0; profiles.len()];
    if indices.is_empty() {
        return Err(Error::EmptySchedule(0));
    }
    if indices.len() == 1 {
        shares[indices[0]] = total;
        return Ok(shares);
    }
    let snrs: Vec<f64> = indices
        .iter()
        .map(|&i| snr_hz(&profiles[i], hs[i], params))
        .collect();
    if snrs.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter { name: "snr", value: 0.0 });
    }
    let etas: Vec<f64> = indices.iter().map(|&i| profiles[i].eta).collect();

    // At ratio_hi the most constrained UE would need the whole band.
    let ratio_hi = indices
        .iter()
        .enumerate()
        .map(|(j, _)| rate_from_snr(total, snrs[j]) / etas[j])
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0f64;
    let mut hi = ratio_hi;
    let mut ratio = ratio_hi * (indices.len() as f64).recip();
    let mut bw = vec![0.0; indices.len()];
    for _ in 0..256 {
        let mut sum = 0.0;
        let mut dsum = 0.0;
        for j in 0..indices.len() {
            let b = bandwidth_for_rate(snrs[j], ratio * etas[j], total);
            bw[j] = b;
            sum += b;
            dsum += etas[j] / rate_slope(b, snrs[j]);
        }
        let gap = sum - total;
        if gap.abs() <= 1e-13 * total {
            break;
        }
        if gap > 0.0 {
            hi = ratio;
        } else {
            lo = ratio;
        }
        let newton = ratio - gap / dsum;
        ratio = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let sum: f64 = bw.iter().sum();
    if (sum - total).abs() > 1e-12 * total {
        return Err(Error::SolverFailure("bandwidth equalization did not converge"));
    }
    // Guarantee the band is never exceeded after rounding.
    let scale = if sum > total { total / sum } else { 1.0 };
    for (j, &i) in indices.iter().enumerate() {
        shares[i] = bw[j] * scale;
    }
    Ok(shares)
}

/// Extreme allocation that hands the whole band to the UEs scheduled in
/// this round, equalizing their rate-to-frequency ratios.
pub fn allocate_extreme_active(
    schedule_row: &[u8],
    profiles: &[UEProfile],
    hs: &[f64],
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    if schedule_row.len() != profiles.len() || hs.len() != profiles.len() {
        return Err(Error::ShapeMismatch("schedule row vs profiles vs channel draws"));
    }
    let indices: Vec<usize> = schedule_row
        .iter()
        .enumerate()
        .filter(|(_, &e)| e == 1)
        .map(|(i, _)| i)
        .collect();
    equalize_rates(&indices, profiles, hs, params)
}

/// Extreme allocation in which the whole population shares the band,
/// equalizing rate-to-frequency ratios across all UEs.
pub fn allocate_extreme_all(
    profiles: &[UEProfile],
    hs: &[f64],
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    if hs.len() != profiles.len() {
        return Err(Error::ShapeMismatch("profiles vs channel draws"));
    }
    let indices: Vec<usize> = (0..profiles.len()).collect();
    equalize_rates(&indices, profiles, hs, params)
}

/// Linear blend between the two extremes, re-normalized so the round
/// never exceeds the band. Exposes the interior of the optimal family.
pub fn allocate_interpolated(
    theta: f64,
    schedule_row: &[u8],
    profiles: &[UEProfile],
    hs: &[f64],
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter { name: "theta", value: theta });
    }
    let active = allocate_extreme_active(schedule_row, profiles, hs, params)?;
    let all = allocate_extreme_all(profiles, hs, params)?;
    let mut blend: Vec<f64> = active
        .iter()
        .zip(&all)
        .map(|(&a, &b)| (1.0 - theta) * a + theta * b)
        .collect();
    let sum: f64 = blend.iter().sum();
    if sum > params.total_bandwidth_hz {
        let scale = params.total_bandwidth_hz / sum;
        for b in &mut blend {
            *b *= scale;
        }
    }
    Ok(blend)
}

/// Allocation rule applied per round by the engine.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum BandwidthPolicy {
    /// Only the scheduled UEs of the round receive bandwidth.
    ActiveExtreme,
    /// The whole population shares the band every round.
    AllShareExtreme,
    /// Blend of the extremes with weight `theta` on the all-share end.
    Interpolated(f64),
}

impl BandwidthPolicy {
    /// Shares for one round. `schedule_row` is required by the
    /// active-only and interpolated rules.
    pub fn round_shares(
        &self,
        schedule_row: Option<&[u8]>,
        profiles: &[UEProfile],
        hs: &[f64],
        params: &ChannelParams,
    ) -> Result<Vec<f64>> {
        match self {
            BandwidthPolicy::ActiveExtreme => {
                let row = schedule_row.ok_or(Error::InvalidRunConfig(
                    "active-extreme allocation needs a schedule",
                ))?;
                allocate_extreme_active(row, profiles, hs, params)
            }
            BandwidthPolicy::AllShareExtreme => allocate_extreme_all(profiles, hs, params),
            BandwidthPolicy::Interpolated(theta) => {
                let row = schedule_row.ok_or(Error::InvalidRunConfig(
                    "interpolated allocation needs a schedule",
                ))?;
                allocate_interpolated(*theta, row, profiles, hs, params)
            }
        }
    }

    /// Tag recorded on plans produced by this policy.
    pub fn tag(&self) -> PolicyTag {
        match self {
            BandwidthPolicy::ActiveExtreme => PolicyTag::ActiveExtreme,
            BandwidthPolicy::AllShareExtreme => PolicyTag::AllShareExtreme,
            BandwidthPolicy::Interpolated(_) => PolicyTag::Interpolated,
        }
    }
}

/// Provenance of a bandwidth plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PolicyTag {
    /// Produced by [`allocate_extreme_active`].
    ActiveExtreme,
    /// Produced by [`allocate_extreme_all`].
    AllShareExtreme,
    /// Produced by [`allocate_interpolated`].
    Interpolated,
    /// Imported or hand-built shares.
    Custom,
}

/// K x n matrix of per-round bandwidth shares in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan {
    rounds: usize,
    population: usize,
    shares: Vec<f64>,
    /// Provenance of the shares.
    pub policy: PolicyTag,
}

impl BandwidthPlan {
    /// Wraps row-major shares; only shape and finiteness are enforced
    /// here so that invalid plans can be loaded and reported by
    /// [`verify_plan`].
    pub fn from_shares(
        rounds: usize,
        population: usize,
        shares: Vec<f64>,
        policy: PolicyTag,
    ) -> Result<Self> {
        if shares.len() != rounds * population {
            return Err(Error::ShapeMismatch("plan shares vs rounds * population"));
        }
        if shares.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "share",
                value: f64::NAN,
            });
        }
        Ok(Self {
            rounds,
            population,
            shares,
            policy,
        })
    }

    /// Builds the full plan for a schedule under one policy and a fixed
    /// channel realization.
    pub fn from_policy(
        policy: BandwidthPolicy,
        schedule: &SchedulingMatrix,
        profiles: &[UEProfile],
        trace: &ChannelTrace,
        params: &ChannelParams,
    ) -> Result<Self> {
        if trace.rounds() < schedule.rounds() || trace.population() != schedule.population() {
            return Err(Error::ShapeMismatch("channel trace vs schedule"));
        }
        let mut shares = Vec::with_capacity(schedule.rounds() * schedule.population());
        for k in 0..schedule.rounds() {
            let row = policy.round_shares(Some(schedule.row(k)), profiles, trace.row(k), params)?;
            shares.extend_from_slice(&row);
        }
        Ok(Self {
            rounds: schedule.rounds(),
            population: schedule.population(),
            shares,
            policy: policy.tag(),
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

    /// Share for `(round, ue)` in Hz.
    pub fn share(&self, round: usize, ue: usize) -> f64 {
        self.shares[round * self.population + ue]
    }

    /// Row of shares for one round.
    pub fn row(&self, round: usize) -> &[f64] {
        &self.shares[round * self.population..(round + 1) * self.population]
    }
}

/// K x n record of transmitted payload units, segmented into local
/// iterations. An iteration's entries accumulate to the total payload
/// exactly when the upload completes.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadLedger {
    rounds: usize,
    population: usize,
    units: Vec<f64>,
    iteration: Vec<u32>,
    /// Payload of one complete upload, Z.
    pub total_payload: f64,
}

impl PayloadLedger {
    /// Empty ledger for a run of `rounds` rounds.
    pub fn new(rounds: usize, population: usize, total_payload: f64) -> Self {
        Self {
            rounds,
            population,
            units: vec![0.0; rounds * population],
            iteration: vec![0; rounds * population],
            total_payload,
        }
    }

    /// Builds a ledger from a raw units matrix, inferring iteration
    /// boundaries by accumulating entries until the total payload is
    /// reached.
    pub fn from_units(
        rounds: usize,
        population: usize,
        units: Vec<f64>,
        total_payload: f64,
    ) -> Result<Self> {
        if units.len() != rounds * population {
            return Err(Error::ShapeMismatch("ledger units vs rounds * population"));
        }
        let mut iteration = vec![0u32; rounds * population];
        for ue in 0..population {
            let mut iter_id = 1u32;
            let mut acc = 0.0;
            for k in 0..rounds {
                let u = units[k * population + ue];
                if u > 0.0 {
                    iteration[k * population + ue] = iter_id;
                    acc += u;
                    if acc >= total_payload * (1.0 - 1e-12) {
                        iter_id += 1;
                        acc = 0.0;
                    }
                }
            }
        }
        Ok(Self {
            rounds,
            population,
            units,
            iteration,
            total_payload,
        })
    }

    /// Records `units` transmitted by `ue` during round `round` as part
    /// of local iteration `iteration_id` (1-based).
    pub fn add(&mut self, round: usize, ue: usize, units: f64, iteration_id: u32) {
        let idx = round * self.population + ue;
        self.units[idx] += units;
        self.iteration[idx] = iteration_id;
    }

    /// Units transmitted at `(round, ue)`.
    pub fn units(&self, round: usize, ue: usize) -> f64 {
        self.units[round * self.population + ue]
    }

    /// Number of rounds covered.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Population size covered.
    pub fn population(&self) -> usize {
        self.population
    }

    /// Sum of transmitted units per (ue, iteration id).
    pub fn iteration_totals(&self) -> Vec<(usize, u32, f64)> {
        let mut totals: Vec<(usize, u32, f64)> = Vec::new();
        for ue in 0..self.population {
            let mut current: Option<(u32, f64)> = None;
            for k in 0..self.rounds {
                let idx = k * self.population + ue;
                let id = self.iteration[idx];
                if id == 0 {
                    continue;
                }
                match current {
                    Some((cid, acc)) if cid == id => current = Some((cid, acc + self.units[idx])),
                    Some((cid, acc)) => {
                        totals.push((ue, cid, acc));
                        current = Some((id, self.units[idx]));
                    }
                    None => current = Some((id, self.units[idx])),
                }
            }
            if let Some((cid, acc)) = current {
                totals.push((ue, cid, acc));
            }
        }
        totals
    }
}

/// One defect found by [`verify_plan`].
#[derive(Debug, Clone, PartialEq)]
pub enum PlanViolation {
    /// Round spends more than the available band (C2.2).
    BandwidthExceeded { round: usize, total_hz: f64 },
    /// Negative share.
    NegativeShare { round: usize, ue: usize },
    /// A scheduled UE holds no bandwidth in its round.
    ZeroScheduledShare { round: usize, ue: usize },
    /// A local iteration transmits more than one payload (C2.3/C1.4).
    PayloadExceeded { ue: usize, iteration: u32, units: f64 },
    /// Scheduled UEs of a round deviate from rate/frequency
    /// equalization (the per-draw equal-finish condition).
    RateSkew { round: usize, relative_deviation: f64 },
}

/// Checks a plan and its ledger against the bandwidth constraints and
/// the equal-finish structure. An empty report means the plan is valid.
pub fn verify_plan(
    plan: &BandwidthPlan,
    ledger: &PayloadLedger,
    schedule: &SchedulingMatrix,
    profiles: &[UEProfile],
    trace: &ChannelTrace,
    params: &ChannelParams,
) -> Result<Vec<PlanViolation>> {
    let (rounds, population) = (plan.rounds(), plan.population());
    if schedule.rounds() != rounds
        || schedule.population() != population
        || ledger.rounds() != rounds
        || ledger.population() != population
        || trace.rounds() < rounds
        || trace.population() != population
        || profiles.len() != population
    {
        return Err(Error::ShapeMismatch("plan, ledger, schedule and trace must agree"));
    }
    let mut report = Vec::new();
    let band = params.total_bandwidth_hz;
    for k in 0..rounds {
        let row = plan.row(k);
        let mut total = 0.0;
        for (i, &share) in row.iter().enumerate() {
            if share < 0.0 {
                report.push(PlanViolation::NegativeShare { round: k, ue: i });
            }
            if schedule.scheduled(k, i) && !(share > 0.0) {
                report.push(PlanViolation::ZeroScheduledShare { round: k, ue: i });
            }
            total += share;
        }
        if total > band * (1.0 + 1e-12) {
            report.push(PlanViolation::BandwidthExceeded { round: k, total_hz: total });
        }
        // Rate/frequency equalization across the scheduled set.
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut scheduled = 0usize;
        for i in 0..population {
            if schedule.scheduled(k, i) && row[i] > 0.0 {
                let r = rate_from_snr(row[i], snr_hz(&profiles[i], trace.h(k, i), params));
                let ratio = r / profiles[i].eta;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                scheduled += 1;
            }
        }
        if scheduled >= 2 && hi > 0.0 {
            let dev = (hi - lo) / hi;
            if dev > 1e-9 {
                report.push(PlanViolation::RateSkew {
                    round: k,
                    relative_deviation: dev,
                });
            }
        }
    }
    for (ue, iteration, units) in ledger.iteration_totals() {
        if units > ledger.total_payload * (1.0 + 1e-12) {
            report.push(PlanViolation::PayloadExceeded { ue, iteration, units });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wireless::ChannelTrace;

    /// Independent bisection oracle for W on both branches.
    pub(crate) fn lambert_oracle(x: f64, branch: LambertBranch) -> f64 {
        bisect_lambert(x, branch)
    }

    fn profile(id: usize, eta: f64, dist: f64) -> UEProfile {
        UEProfile::new(id, 0.01, dist, 1e4, 1e9, 100, eta).unwrap()
    }

    fn params() -> ChannelParams {
        ChannelParams::from_dbm(1e6, 3.8, -174.0, 40.0).unwrap()
    }

    #[test]
    fn lambert_fixed_points() {
        assert_eq!(lambert_w(0.0, LambertBranch::Principal).unwrap(), 0.0);
        let w = lambert_w(core::f64::consts::E, LambertBranch::Principal).unwrap();
        assert!((w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lambert_lower_frozen_value() {
        // Oracle (bisection on w e^w over w < -1):
        // W_-1(-0.1 e^-0.1) = -3.7149504270875306.
        let x = -0.1 * (-0.1f64).exp();
        let w = lambert_w(x, LambertBranch::Lower).unwrap();
        assert!((w - (-3.7149504270875306)).abs() < 1e-12, "w = {w}");
        assert!((w - lambert_oracle(x, LambertBranch::Lower)).abs() < 1e-12);
    }

    #[test]
    fn lambert_domain_errors() {
        assert!(lambert_w(-0.5, LambertBranch::Principal).is_err());
        assert!(lambert_w(0.1, LambertBranch::Lower).is_err());
        assert!(lambert_w(f64::NAN, LambertBranch::Principal).is_err());
    }

    #[test]
    fn lambert_residuals_small_on_grids() {
        for j in 0..2000 {
            let t = j as f64 / 1999.0;
            let x = NEG_INV_E + t * (50.0 - NEG_INV_E);
            let w = lambert_w(x, LambertBranch::Principal).unwrap();
            let resid = (w * w.exp() - x).abs();
            assert!(resid <= 1e-12, "principal x={x} resid={resid}");
            assert!(w >= -1.0);
        }
        for j in 0..2000 {
            let t = (j + 1) as f64 / 2001.0;
            let x = NEG_INV_E * (1.0 - t * (1.0 - 1e-9));
            let w = lambert_w(x, LambertBranch::Lower).unwrap();
            let resid = (w * w.exp() - x).abs();
            assert!(resid <= 1e-12, "lower x={x} resid={resid}");
            assert!(w <= -1.0);
        }
    }

    #[test]
    fn min_share_degenerates_at_gamma_one() {
        // Choose the payload so gamma = Z / ((T - Tcmp) snr) is exactly
        // 1.0: the branch-point factor W(-1/e) + 1 vanishes.
        let p = params();
        let ue = profile(0, 0.25, 100.0);
        let total_time = 1.0 + compute_delay(&ue);
        let h = 30.0;
        let payload = (total_time - compute_delay(&ue)) * snr_hz(&ue, h, &p);
        let err = min_share_bound(&ue, &p, 4, h, total_time, payload);
        assert!(matches!(err, Err(Error::DegenerateBranch(_))), "{err:?}");
    }

    #[test]
    fn min_share_frozen_gamma_point_one() {
        // gamma = 0.1 puts the denominator factor at
        // |W_-1(-0.1 e^-0.1) + 0.1| = 3.6149504270875306 (oracle value).
        let p = params();
        let ue = profile(0, 0.25, 100.0);
        let payload = 1e4f64;
        let total_time = 1.0 + compute_delay(&ue);
        let h = payload / (0.1 * snr_hz(&ue, 1.0, &p));
        let bound = min_share_bound(&ue, &p, 4, h, total_time, payload).unwrap();
        let expected = p.total_bandwidth_hz * 4.0 * 0.25 * payload / (1.0 * 3.6149504270875306);
        assert!((bound - expected).abs() <= 1e-9 * expected, "{bound} vs {expected}");
    }

    #[test]
    fn min_share_linear_in_eta() {
        let p = params();
        let payload = 1e4f64;
        let a = profile(0, 0.2, 100.0);
        let mut b = profile(0, 0.2, 100.0);
        b.eta = 0.4;
        let t = 1.0 + compute_delay(&a);
        let h = payload / (0.3 * snr_hz(&a, 1.0, &p));
        let ba = min_share_bound(&a, &p, 4, h, t, payload).unwrap();
        let bb = min_share_bound(&b, &p, 4, h, t, payload).unwrap();
        assert!((bb / ba - 2.0).abs() < 1e-12);
    }

    #[test]
    fn min_share_rejects_tight_budget() {
        let p = params();
        let ue = profile(0, 0.25, 100.0);
        let t = compute_delay(&ue);
        assert!(matches!(
            min_share_bound(&ue, &p, 4, 30.0, t, 1e4),
            Err(Error::InfeasibleTime { .. })
        ));
    }

    #[test]
    fn active_extreme_identical_ues_split_evenly() {
        let p = params();
        let profiles: Vec<UEProfile> = (0..4).map(|i| profile(i, 0.25, 100.0)).collect();
        let hs = [30.0; 4];
        let shares = allocate_extreme_active(&[1, 1, 0, 0], &profiles, &hs, &p).unwrap();
        assert!((shares[0] - 5e5).abs() < 1e-3, "{shares:?}");
        assert!((shares[1] - 5e5).abs() < 1e-3);
        assert_eq!(shares[2], 0.0);
        assert_eq!(shares[3], 0.0);
    }

    #[test]
    fn active_extreme_single_ue_gets_band() {
        let p = params();
        let profiles: Vec<UEProfile> = vec![profile(0, 0.5, 100.0), profile(1, 0.5, 150.0)];
        let shares = allocate_extreme_active(&[0, 1], &profiles, &[30.0, 30.0], &p).unwrap();
        assert_eq!(shares[1], p.total_bandwidth_hz);
        assert_eq!(shares[0], 0.0);
    }

    #[test]
    fn active_extreme_rate_ratio_follows_eta() {
        // eta ratio 2:1 with identical channels: rates must satisfy
        // r(b0)/r(b1) = 2 (one-dimensional root-find oracle below).
        let p = params();
        let mut profiles = vec![profile(0, 0.5, 100.0), profile(1, 0.25, 100.0), profile(2, 0.25, 100.0)];
        profiles[2].eta = 0.25;
        let hs = [30.0; 3];
        let shares = allocate_extreme_active(&[1, 1, 0], &profiles, &hs, &p).unwrap();
        let r0 = rate_from_snr(shares[0], snr_hz(&profiles[0], 30.0, &p));
        let r1 = rate_from_snr(shares[1], snr_hz(&profiles[1], 30.0, &p));
        assert!((r0 / r1 - 2.0).abs() < 1e-9, "ratio {}", r0 / r1);
        let total: f64 = shares.iter().sum();
        assert!((total - p.total_bandwidth_hz).abs() <= 1e-12 * p.total_bandwidth_hz);

        // Oracle: bisection on the share x of UE0 such that
        // r(x)/2 = r(B - x).
        let snr = snr_hz(&profiles[0], 30.0, &p);
        let (mut lo, mut hi) = (1.0, p.total_bandwidth_hz - 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let f = rate_from_snr(mid, snr) / 2.0 - rate_from_snr(p.total_bandwidth_hz - mid, snr);
            if f > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((shares[0] - 0.5 * (lo + hi)).abs() < 1e-3, "{} vs {}", shares[0], 0.5 * (lo + hi));
    }

    #[test]
    fn all_share_identical_ues_split_evenly() {
        let p = params();
        let profiles: Vec<UEProfile> = (0..4).map(|i| profile(i, 0.25, 100.0)).collect();
        let shares = allocate_extreme_all(&profiles, &[30.0; 4], &p).unwrap();
        for &s in &shares {
            assert!((s - 2.5e5).abs() < 1e-3, "{shares:?}");
        }
    }

    #[test]
    fn all_share_single_ue() {
        let p = params();
        let profiles = vec![profile(0, 1.0, 100.0)];
        let shares = allocate_extreme_all(&profiles, &[30.0], &p).unwrap();
        assert_eq!(shares[0], p.total_bandwidth_hz);
    }

    #[test]
    fn all_share_nearer_ue_needs_less_band() {
        // Equal eta but a nearer (stronger) UE reaches the common rate
        // with a smaller share.
        let p = params();
        let profiles = vec![profile(0, 0.5, 50.0), profile(1, 0.5, 200.0)];
        let hs = [30.0, 30.0];
        let shares = allocate_extreme_all(&profiles, &hs, &p).unwrap();
        assert!(shares[0] < shares[1], "{shares:?}");
        let r0 = rate_from_snr(shares[0], snr_hz(&profiles[0], hs[0], &p));
        let r1 = rate_from_snr(shares[1], snr_hz(&profiles[1], hs[1], &p));
        assert!(((r0 / profiles[0].eta) / (r1 / profiles[1].eta) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_schedule_row_is_rejected() {
        let p = params();
        let profiles: Vec<UEProfile> = (0..2).map(|i| profile(i, 0.5, 100.0)).collect();
        assert!(allocate_extreme_active(&[0, 0], &profiles, &[30.0, 30.0], &p).is_err());
    }

    #[test]
    fn verify_plan_reports_constructed_violations() {
        let p = params();
        let profiles: Vec<UEProfile> = (0..4).map(|i| profile(i, 0.25, 100.0)).collect();
        let schedule = crate::scheduling::greedy_schedule(&[0.25; 4], 2, 4, 2).unwrap();
        let trace = ChannelTrace::generate(9, 4, 4, &p);
        let plan = BandwidthPlan::from_policy(BandwidthPolicy::ActiveExtreme, &schedule, &profiles, &trace, &p).unwrap();
        let ledger = PayloadLedger::new(4, 4, 1e4);
        assert!(verify_plan(&plan, &ledger, &schedule, &profiles, &trace, &p)
            .unwrap()
            .is_empty());

        // Over-spend round 3 by 10%.
        let mut bad = plan.clone();
        let row = 3 * bad.population;
        for i in 0..bad.population {
            bad.shares[row + i] *= 1.1;
        }
        let report = verify_plan(&bad, &ledger, &schedule, &profiles, &trace, &p).unwrap();
        assert!(report.iter().any(|v| matches!(
            v,
            PlanViolation::BandwidthExceeded { round: 3, .. }
        )), "{report:?}");

        // A ledger iteration carrying 1.2 Z.
        let mut units = vec![0.0; 16];
        units[0] = 0.7e4;
        units[4] = 0.5e4;
        let fat = PayloadLedger::from_units(4, 4, units, 1e4).unwrap();
        let report = verify_plan(&plan, &fat, &schedule, &profiles, &trace, &p).unwrap();
        assert!(report.iter().any(|v| matches!(
            v,
            PlanViolation::PayloadExceeded { ue: 0, .. }
        )), "{report:?}");
    }

    #[test]
    fn interpolated_preserves_budget() {
        let p = params();
        let profiles: Vec<UEProfile> = (0..4).map(|i| profile(i, 0.25, 100.0)).collect();
        let hs = [30.0; 4];
        for theta in [0.0, 0.3, 1.0] {
            let shares = allocate_interpolated(theta, &[1, 1, 0, 0], &profiles, &hs, &p).unwrap();
            let total: f64 = shares.iter().sum();
            assert!(total <= p.total_bandwidth_hz * (1.0 + 1e-12));
        }
    }
}
