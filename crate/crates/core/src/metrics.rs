//! PAPR and sensing error statistics.

use crate::channel::{cyclic_distance, ChannelRealization, PhysicalConfig};
use crate::faor::Detection;
use crate::modem::TimeSignal;
use crate::{Error, Result};

fn papr_of(samples: &[num_complex::Complex64]) -> Option<f64> {
    let (peak, total) = samples
        .iter()
        .map(|z| z.norm_sqr())
        .fold((0.0f64, 0.0f64), |(p, t), v| (p.max(v), t + v));
    (total > 0.0).then(|| 10.0 * (peak * samples.len() as f64 / total).log10())
}

/// `10 log10(max |s|^2 / mean |s|^2)` over the whole serialized frame.
pub fn papr_db(signal: &TimeSignal) -> Result<f64> {
    papr_of(signal.samples()).ok_or(Error::ZeroSignal)
}

/// Worst per-time-symbol PAPR (each symbol is `M` consecutive samples).
/// All-zero symbols are skipped.
pub fn papr_db_per_symbol(signal: &TimeSignal) -> Result<f64> {
    (0..signal.dims().n())
        .filter_map(|t| papr_of(signal.symbol(t)))
        .reduce(f64::max)
        .ok_or(Error::ZeroSignal)
}

/// Error of one truth target against its matched detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetError {
    /// Index into the truth path list.
    pub target: usize,
    /// `None` when no detection was left to assign to this target.
    pub matched: Option<MatchedError>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedError {
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub range_m: f64,
    pub speed_mps: f64,
}

impl TargetError {
    /// Detected means both bin errors are zero.
    pub fn detected(&self) -> bool {
        matches!(self.matched, Some(e) if e.delay_bins == 0 && e.doppler_bins == 0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct TargetAccum {
    trials: usize,
    matched: usize,
    detected: usize,
    abs_delay_bins: f64,
    abs_doppler_bins: f64,
    sq_range_m: f64,
    sq_speed_mps: f64,
}

/// Per-target sensing error statistics accumulated over trials.
///
/// Bin errors are mean absolute errors on the cyclic grid; physical errors
/// are RMS in meters and m/s. Both are taken over trials where the target was
/// matched to a detection. The detection rate counts trials where the matched
/// detection hit the exact bin.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensingErrorStats {
    targets: Vec<TargetAccum>,
}

impl SensingErrorStats {
    pub fn from_errors(errors: &[TargetError]) -> Self {
        let n = errors.iter().map(|e| e.target + 1).max().unwrap_or(0);
        let mut targets = vec![TargetAccum::default(); n];
        for e in errors {
            let t = &mut targets[e.target];
            t.trials += 1;
            if let Some(m) = e.matched {
                t.matched += 1;
                t.abs_delay_bins += m.delay_bins as f64;
                t.abs_doppler_bins += m.doppler_bins as f64;
                t.sq_range_m += m.range_m * m.range_m;
                t.sq_speed_mps += m.speed_mps * m.speed_mps;
            }
            if e.detected() {
                t.detected += 1;
            }
        }
        Self { targets }
    }

    /// Adds another batch of trials.
    pub fn merge(&mut self, other: &Self) {
        if self.targets.len() < other.targets.len() {
            self.targets
                .resize(other.targets.len(), TargetAccum::default());
        }
        for (a, b) in self.targets.iter_mut().zip(&other.targets) {
            a.trials += b.trials;
            a.matched += b.matched;
            a.detected += b.detected;
            a.abs_delay_bins += b.abs_delay_bins;
            a.abs_doppler_bins += b.abs_doppler_bins;
            a.sq_range_m += b.sq_range_m;
            a.sq_speed_mps += b.sq_speed_mps;
        }
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn trials(&self, target: usize) -> usize {
        self.targets[target].trials
    }

    fn per_matched(&self, target: usize, f: impl Fn(&TargetAccum) -> f64) -> f64 {
        let t = &self.targets[target];
        if t.matched == 0 {
            f64::NAN
        } else {
            f(t) / t.matched as f64
        }
    }

    pub fn delay_bin_mae(&self, target: usize) -> f64 {
        self.per_matched(target, |t| t.abs_delay_bins)
    }

    pub fn doppler_bin_mae(&self, target: usize) -> f64 {
        self.per_matched(target, |t| t.abs_doppler_bins)
    }

    pub fn range_rmse_m(&self, target: usize) -> f64 {
        self.per_matched(target, |t| t.sq_range_m).sqrt()
    }

    pub fn speed_rmse_mps(&self, target: usize) -> f64 {
        self.per_matched(target, |t| t.sq_speed_mps).sqrt()
    }

    pub fn detection_rate(&self, target: usize) -> f64 {
        let t = &self.targets[target];
        if t.trials == 0 {
            0.0
        } else {
            t.detected as f64 / t.trials as f64
        }
    }
}

/// Assignment of truth targets to detections.
///
/// Up to eight targets are matched exhaustively, minimizing the total cyclic
/// bin distance `|Δl| + |Δk|`; equal-cost assignments are broken by the
/// assigned bins themselves so the result does not depend on detection order.
/// Larger sets fall back to greedy nearest matching.
pub fn match_detections(
    detections: &[(usize, usize)],
    truth: &[(usize, usize)],
    dims: (usize, usize),
) -> Vec<Option<usize>> {
    let dist = |d: (usize, usize), t: (usize, usize)| {
        cyclic_distance(d.0, t.0, dims.0) + cyclic_distance(d.1, t.1, dims.1)
    };
    if truth.len() <= 8 {
        let mut best: Option<Candidate> = None;
        let mut current = vec![None; truth.len()];
        let mut used = vec![false; detections.len()];
        search(
            0,
            detections,
            truth,
            &dist,
            &mut current,
            &mut used,
            0,
            &mut best,
        );
        best.map(|b| b.2).unwrap_or_else(|| vec![None; truth.len()])
    } else {
        let mut used = vec![false; detections.len()];
        truth
            .iter()
            .map(|&t| {
                let pick = (0..detections.len())
                    .filter(|&i| !used[i])
                    .min_by_key(|&i| (dist(detections[i], t), detections[i]));
                if let Some(i) = pick {
                    used[i] = true;
                }
                pick
            })
            .collect()
    }
}

/// Cost, tie-break key and assignment of the best matching found so far.
type Candidate = (usize, Vec<(usize, usize)>, Vec<Option<usize>>);

#[allow(clippy::too_many_arguments)]
fn search(
    t: usize,
    detections: &[(usize, usize)],
    truth: &[(usize, usize)],
    dist: &dyn Fn((usize, usize), (usize, usize)) -> usize,
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    cost: usize,
    best: &mut Option<Candidate>,
) {
    if t == truth.len() {
        let key: Vec<(usize, usize)> = current
            .iter()
            .map(|c| c.map_or((usize::MAX, usize::MAX), |i| detections[i]))
            .collect();
        let better = match best {
            None => true,
            Some((c, k, _)) => cost < *c || (cost == *c && key < *k),
        };
        if better {
            *best = Some((cost, key, current.clone()));
        }
        return;
    }
    let remaining = detections.len() - used.iter().filter(|&&u| u).count();
    let need = truth.len() - t;
    for i in 0..detections.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        current[t] = Some(i);
        search(
            t + 1,
            detections,
            truth,
            dist,
            current,
            used,
            cost + dist(detections[i], truth[t]),
            best,
        );
        used[i] = false;
        current[t] = None;
    }
    // Leave this target unmatched only when detections run short.
    if remaining < need {
        search(t + 1, detections, truth, dist, current, used, cost, best);
    }
}

/// Per-target errors for one trial.
pub fn target_errors(
    detections: &[Detection],
    truth: &ChannelRealization,
    cfg: &PhysicalConfig,
) -> Vec<TargetError> {
    let det_bins: Vec<(usize, usize)> = detections.iter().map(Detection::bins).collect();
    let truth_bins = truth.bins();
    let assignment = match_detections(&det_bins, &truth_bins, (cfg.m, cfg.n));
    truth_bins
        .iter()
        .zip(assignment)
        .enumerate()
        .map(|(target, (&(l, k), a))| TargetError {
            target,
            matched: a.map(|i| {
                let (dl, dk) = det_bins[i];
                let delay_bins = cyclic_distance(dl, l, cfg.m);
                let doppler_bins = cyclic_distance(dk, k, cfg.n);
                MatchedError {
                    delay_bins,
                    doppler_bins,
                    range_m: cfg.bin_to_range(delay_bins),
                    speed_mps: cfg.bin_to_speed(doppler_bins),
                }
            }),
        })
        .collect()
}

/// Sensing statistics for a single trial.
pub fn sensing_errors(
    detections: &[Detection],
    truth: &ChannelRealization,
    cfg: &PhysicalConfig,
) -> SensingErrorStats {
    SensingErrorStats::from_errors(&target_errors(detections, truth, cfg))
}
