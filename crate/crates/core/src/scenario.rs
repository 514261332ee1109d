//! Scenario configuration and Monte-Carlo sweeps.
//!
//! A [`ScenarioConfig`] is a TOML document:
//!
//! ```toml
//! name = "desk-s1"
//! scenario = "S1"            # selects the per-target delay intervals
//! mode = "bistatic"          # monostatic | bistatic (sensing sweeps)
//! seed = 1
//! trials = 200
//! qam_order = 4
//!
//! [physical]
//! fc_hz = 60e9
//! delta_f_hz = 480e3
//! m = 256
//! n = 32
//!
//! [pilot]
//! size = [55, 15]            # or: fraction = 0.125 -> round(M * f) x N block
//! seed = 7                   # origin = [m0, n0] optional, default centered
//!                            # fraction_cols = n sets the block width with fraction
//!
//! [baseline]                 # optional; defaults to the pilot footprint
//! l_tau = 27
//! k_v = 7
//!
//! [snr]
//! start_db = -20.0
//! stop_db = -4.0
//! step_db = 2.0
//!
//! [detection]
//! exclusion = [2, 2]
//!
//! [chanest]
//! bins = "truth"             # truth | detected
//! frames = ["data", "pilot_only"]
//!
//! [[targets]]
//! power_db = 0.0
//! doppler_bins = [1, 4]      # or speed_kmh = [5.4, 37.8]
//! delay_bins = { s1 = [3, 15], s2 = [3, 103] }   # or range_m = { s1 = [..], s2 = [..] }
//! ```
//!
//! Per trial, each target's delay and Doppler are drawn uniformly from its
//! interval (continuous for physical units, then quantized to the nearest
//! bin; integer-uniform for bin intervals), the gain magnitude follows
//! `power_db` and the phase is uniform on `[0, 2π)`. Draws that put two
//! targets on the same bin are redrawn.
//!
//! Trial `t` draws its scene from `derive_seed(seed, [t, 1])` and its data
//! symbols from `derive_seed(seed, [t, 2])`, so every SNR point sees the same
//! scenes; noise at SNR point `s` comes from `derive_seed(seed, [t, 3, s])`.
//! Trials run on the rayon pool of the caller and are reduced in trial order,
//! so outputs do not depend on thread count.
//!
//! SNR is per DD cell: noise variance is the mean cell power of the clean
//! received frame divided by `10^(snr/10)`. In channel estimation sweeps the
//! reference is taken from the data-bearing proposed frame and the same noise
//! realization is added to every compared frame.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chanest::{build_xc, ls_estimate, observation_cells, single_pilot_estimate};
use crate::channel::{
    add_awgn, apply_dd_channel, ChannelRealization, PathParams, PhysicalConfig, KMH_PER_MPS,
};
use crate::faor::{
    detect_peaks, rdm_bistatic, rdm_monostatic, Detection, RadarMode, RangeDopplerMap,
};
use crate::frame::{
    embed_pilot, make_data_frame, make_pilot_grid, make_single_pilot_frame, pilot_only_frame,
    DDFrame, PilotGrid, QamConstellation,
};
use crate::metrics::{match_detections, target_errors, SensingErrorStats, TargetError};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::{Error, Result};

const STREAM_SCENE: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scenario {
    /// Delay spread stays within the baseline guard.
    #[default]
    S1,
    /// Delay spread may exceed the baseline guard.
    S2,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Scenario::S1),
            "S2" => Ok(Scenario::S2),
            other => Err(Error::ConfigInvalid(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerScenario<T> {
    pub s1: T,
    pub s2: T,
}

impl<T: Copy> PerScenario<T> {
    pub fn get(&self, s: Scenario) -> T {
        match s {
            Scenario::S1 => self.s1,
            Scenario::S2 => self.s2,
        }
    }

    pub fn same(v: T) -> Self {
        Self { s1: v, s2: v }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub power_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_bins: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<PerScenario<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_bins: Option<PerScenario<[usize; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    /// Block width when `fraction` is used; defaults to the full Doppler axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction_cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[usize; 2]>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub l_tau: usize,
    pub k_v: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
    /// Runs a single noiseless point instead of the sweep.
    #[serde(default)]
    pub noiseless: bool,
}

impl Default for SnrSweep {
    fn default() -> Self {
        Self {
            start_db: -20.0,
            stop_db: -4.0,
            step_db: 2.0,
            noiseless: false,
        }
    }
}

impl SnrSweep {
    pub fn range(start_db: f64, stop_db: f64, step_db: f64) -> Self {
        Self {
            start_db,
            stop_db,
            step_db,
            noiseless: false,
        }
    }

    pub fn noiseless() -> Self {
        Self {
            noiseless: true,
            ..Self::default()
        }
    }

    /// Sweep points; `+inf` for the noiseless sentinel.
    pub fn points(&self) -> Vec<f64> {
        if self.noiseless {
            return vec![f64::INFINITY];
        }
        let count = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start_db + i as f64 * self.step_db)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.noiseless {
            return Ok(());
        }
        let finite = [self.start_db, self.stop_db, self.step_db]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.step_db <= 0.0 || self.stop_db < self.start_db {
            return Err(Error::ConfigInvalid(format!(
                "SNR sweep needs finite start <= stop and a positive step, got {}..{} step {}",
                self.start_db, self.stop_db, self.step_db
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub exclusion: [usize; 2],
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { exclusion: [2, 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BinSource {
    /// Estimators are given the true path bins.
    #[default]
    Truth,
    /// Bins come from bistatic sensing on the proposed frame.
    Detected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// Pilot (or guarded impulse) surrounded by live QAM data.
    Data,
    /// Pilot alone, every other cell zero.
    PilotOnly,
}

impl FrameKind {
    fn label(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::PilotOnly => "pilot_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChanestMethod {
    /// Random ±1 pilot block, least squares over the shifted pilot supports.
    Proposed,
    /// Guarded single-impulse baseline.
    SinglePilot,
}

impl ChanestMethod {
    fn label(self) -> &'static str {
        match self {
            ChanestMethod::Proposed => "proposed",
            ChanestMethod::SinglePilot => "single_pilot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanestConfig {
    #[serde(default)]
    pub bins: BinSource,
    #[serde(default = "default_frames")]
    pub frames: Vec<FrameKind>,
}

fn default_frames() -> Vec<FrameKind> {
    vec![FrameKind::Data, FrameKind::PilotOnly]
}

impl Default for ChanestConfig {
    fn default() -> Self {
        Self {
            bins: BinSource::Truth,
            frames: default_frames(),
        }
    }
}

fn default_name() -> String {
    "custom".into()
}

fn default_trials() -> usize {
    200
}

fn default_qam() -> usize {
    4
}

fn default_mode() -> RadarMode {
    RadarMode::Monostatic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default = "default_mode")]
    pub mode: RadarMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_qam")]
    pub qam_order: usize,
    pub physical: PhysicalConfig,
    pub pilot: PilotConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub snr: SnrSweep,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub chanest: ChanestConfig,
    pub targets: Vec<TargetConfig>,
}

/// Resolved pilot geometry and the matching single-impulse baseline.
#[derive(Debug, Clone)]
pub struct PilotLayout {
    pub pilot: PilotGrid,
    pub center: (usize, usize),
    pub amplitude: f64,
    pub guard: (usize, usize),
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::ConfigInvalid(msg));
        self.physical.validate()?;
        QamConstellation::new(self.qam_order)?;
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        self.snr.validate()?;
        if self.targets.is_empty() {
            return invalid("at least one target is required".into());
        }
        self.pilot_layout()?;
        let dims = self.physical.dims();
        let mut slots = 1usize;
        for (i, t) in self.targets.iter().enumerate() {
            if !t.power_db.is_finite() {
                return invalid(format!("target {}: power_db must be finite", i + 1));
            }
            let (l_lo, l_hi) = self.delay_interval(i, self.scenario)?;
            let (k_lo, k_hi) = self.doppler_interval(i)?;
            slots = slots.max((l_hi - l_lo + 1) * (k_hi - k_lo + 1));
        }
        if slots < self.targets.len() {
            return invalid("target intervals leave no room for distinct bins".into());
        }
        if self
            .detection
            .exclusion
            .iter()
            .any(|&e| e >= dims.m().max(dims.n()))
        {
            return invalid("detection exclusion window larger than the frame".into());
        }
        Ok(())
    }

    /// Inclusive delay-bin interval of target `i` under `scenario`.
    pub fn delay_interval(&self, i: usize, scenario: Scenario) -> Result<(usize, usize)> {
        let t = &self.targets[i];
        let cfg = &self.physical;
        let (lo, hi) = match (&t.range_m, &t.delay_bins) {
            (Some(r), None) => {
                let [a, b] = r.get(scenario);
                (
                    bin_or_invalid(cfg.range_to_bin(a), i)?,
                    bin_or_invalid(cfg.range_to_bin(b), i)?,
                )
            }
            (None, Some(b)) => (b.get(scenario)[0], b.get(scenario)[1]),
            _ => {
                return Err(Error::ConfigInvalid(format!(
                    "target {}: give exactly one of range_m or delay_bins",
                    i + 1
                )))
            }
        };
        if lo > hi || hi >= cfg.m {
            return Err(Error::ConfigInvalid(format!(
                "target {}: delay bins [{lo}, {hi}] invalid for M = {}",
                i + 1,
                cfg.m
            )));
        }
        Ok((lo, hi))
    }

    /// Inclusive Doppler-bin interval of target `i`.
    pub fn doppler_interval(&self, i: usize) -> Result<(usize, usize)> {
        let t = &self.targets[i];
        let cfg = &self.physical;
        let (lo, hi) = match (&t.speed_kmh, &t.doppler_bins) {
            (Some([a, b]), None) => (
                bin_or_invalid(cfg.speed_to_bin(a / KMH_PER_MPS), i)?,
                bin_or_invalid(cfg.speed_to_bin(b / KMH_PER_MPS), i)?,
            ),
            (None, Some([a, b])) => (*a, *b),
            _ => {
                return Err(Error::ConfigInvalid(format!(
                    "target {}: give exactly one of speed_kmh or doppler_bins",
                    i + 1
                )))
            }
        };
        if lo > hi || hi >= cfg.n || 2 * hi > cfg.n {
            return Err(Error::ConfigInvalid(format!(
                "target {}: Doppler bins [{lo}, {hi}] must lie in [0, N/2] for N = {}",
                i + 1,
                cfg.n
            )));
        }
        Ok((lo, hi))
    }

    /// Pilot block and baseline geometry, or `None` when no pilot is configured.
    pub fn pilot_layout(&self) -> Result<Option<PilotLayout>> {
        let dims = self.physical.dims();
        let size = match (self.pilot.size, self.pilot.fraction) {
            (Some([mp, np]), None) => (mp, np),
            (None, Some(f)) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::ConfigInvalid(format!(
                        "pilot fraction {f} not in (0, 1]"
                    )));
                }
                let cols = self.pilot.fraction_cols.unwrap_or(dims.n());
                if cols == 0 || cols > dims.n() {
                    return Err(Error::ConfigInvalid(format!(
                        "pilot fraction_cols {cols} not in 1..={}",
                        dims.n()
                    )));
                }
                let rows = (dims.cells() as f64 * f / cols as f64).round() as usize;
                (rows.max(1), cols)
            }
            (None, None) => return Ok(None),
            (Some(_), Some(_)) => {
                return Err(Error::ConfigInvalid(
                    "give pilot size or fraction, not both".into(),
                ))
            }
        };
        let pilot = match self.pilot.origin {
            Some([m0, n0]) => make_pilot_grid(dims, (m0, n0), size, self.pilot.seed),
            None => PilotGrid::centered(dims, size, self.pilot.seed),
        }
        .map_err(|e| Error::ConfigInvalid(format!("pilot: {e}")))?;
        let center = pilot.center();
        let guard = match self.baseline {
            Some(b) => (b.l_tau, b.k_v),
            None => ((size.0 - 1) / 2, (size.1 - 1) / 2),
        };
        let amplitude = pilot.energy().sqrt();
        make_single_pilot_frame(&DDFrame::zeros(dims), center, amplitude, guard.0, guard.1)
            .map_err(|e| Error::ConfigInvalid(format!("baseline guard: {e}")))?;
        Ok(Some(PilotLayout {
            pilot,
            center,
            amplitude,
            guard,
        }))
    }

    fn require_pilot(&self) -> Result<PilotLayout> {
        self.pilot_layout()?
            .ok_or_else(|| Error::ConfigInvalid("this run needs a [pilot] block".into()))
    }

    /// S1 promises every delay stays inside the baseline guard.
    fn check_s1_guard(&self, layout: &PilotLayout) -> Result<()> {
        if self.scenario != Scenario::S1 {
            return Ok(());
        }
        for i in 0..self.targets.len() {
            let (_, l_hi) = self.delay_interval(i, Scenario::S1)?;
            if l_hi > layout.guard.0 {
                return Err(Error::ConfigInvalid(format!(
                    "target {}: S1 delay bin {l_hi} exceeds the baseline guard reach {}",
                    i + 1,
                    layout.guard.0
                )));
            }
        }
        Ok(())
    }

    /// Draws one channel realization.
    pub fn draw_channel(&self, rng: &mut SimRng) -> Result<ChannelRealization> {
        let dims = self.physical.dims();
        let cfg = &self.physical;
        for _ in 0..1000 {
            let mut paths: Vec<PathParams> = Vec::with_capacity(self.targets.len());
            for (i, t) in self.targets.iter().enumerate() {
                let l = match (&t.range_m, &t.delay_bins) {
                    (Some(r), _) => {
                        let [a, b] = r.get(self.scenario);
                        cfg.range_to_bin(uniform(rng, a, b))?
                    }
                    _ => {
                        let (lo, hi) = self.delay_interval(i, self.scenario)?;
                        rng.random_range(lo..=hi)
                    }
                };
                let k = match (&t.speed_kmh, &t.doppler_bins) {
                    (Some([a, b]), _) => cfg.speed_to_bin(uniform(rng, *a, *b) / KMH_PER_MPS)?,
                    _ => {
                        let (lo, hi) = self.doppler_interval(i)?;
                        rng.random_range(lo..=hi)
                    }
                };
                let mag = 10f64.powf(t.power_db / 20.0);
                let phase = rng.random_range(0.0..2.0 * PI);
                paths.push(PathParams::new(Complex64::from_polar(mag, phase), l, k)?);
            }
            match ChannelRealization::new(dims, paths) {
                Ok(ch) => return Ok(ch),
                Err(Error::DuplicatePath { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ConfigInvalid(
            "could not draw distinct target bins".into(),
        ))
    }

    fn constellation(&self) -> QamConstellation {
        QamConstellation::new(self.qam_order).expect("validated")
    }
}

fn bin_or_invalid(r: Result<usize>, i: usize) -> Result<usize> {
    r.map_err(|e| Error::ConfigInvalid(format!("target {}: {e}", i + 1)))
}

fn uniform(rng: &mut SimRng, a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        rng.random_range(a.min(b)..=a.max(b))
    }
}

fn trial_seed(cfg: &ScenarioConfig, snr_index: usize, trial: usize, stream: u64) -> u64 {
    if stream == STREAM_NOISE {
        derive_seed(cfg.seed, &[trial as u64, stream, snr_index as u64])
    } else {
        derive_seed(cfg.seed, &[trial as u64, stream])
    }
}

fn fmt_snr(snr: f64) -> String {
    if snr.is_infinite() {
        "inf".into()
    } else {
        format!("{snr:.2}")
    }
}

fn fmt_val(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6e}")
    }
}

/// Aggregated sensing results at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingPoint {
    pub snr_db: f64,
    pub stats: SensingErrorStats,
}

pub fn sensing_csv_header(num_targets: usize) -> String {
    let mut h = String::from("snr_db");
    for t in 1..=num_targets {
        h.push_str(&format!(
            ",t{t}_delay_bin_mae,t{t}_doppler_bin_mae,t{t}_range_rmse_m,t{t}_speed_rmse_mps,t{t}_detection_rate"
        ));
    }
    h
}

fn sensing_csv_row(point: &SensingPoint) -> String {
    let s = &point.stats;
    let mut row = fmt_snr(point.snr_db);
    for t in 0..s.num_targets() {
        for v in [
            s.delay_bin_mae(t),
            s.doppler_bin_mae(t),
            s.range_rmse_m(t),
            s.speed_rmse_mps(t),
            s.detection_rate(t),
        ] {
            row.push(',');
            row.push_str(&fmt_val(v));
        }
    }
    row
}

/// One sensing trial, kept whole for inspection and export.
#[derive(Debug, Clone)]
pub struct SensingSnapshot {
    pub channel: ChannelRealization,
    pub rdm: RangeDopplerMap,
    pub detections: Vec<Detection>,
}

impl ScenarioConfig {
    /// Reproduces trial `trial` of SNR point `snr_index` of a sensing sweep,
    /// run at `snr_db`.
    pub fn sensing_snapshot(
        &self,
        snr_db: f64,
        snr_index: usize,
        trial: usize,
    ) -> Result<SensingSnapshot> {
        self.validate()?;
        let layout = self.pilot_layout()?;
        sensing_trial(self, layout.as_ref(), snr_db, snr_index, trial)
    }
}

fn sensing_trial(
    cfg: &ScenarioConfig,
    layout: Option<&PilotLayout>,
    snr_db: f64,
    snr_index: usize,
    trial: usize,
) -> Result<SensingSnapshot> {
    let dims = cfg.physical.dims();
    let mut scene = rng_from_seed(trial_seed(cfg, snr_index, trial, STREAM_SCENE));
    let channel = cfg.draw_channel(&mut scene)?;
    let data = make_data_frame(
        dims,
        &cfg.constellation(),
        trial_seed(cfg, snr_index, trial, STREAM_DATA),
    );
    let x = match layout {
        Some(l) => embed_pilot(&data, &l.pilot)?,
        None => data,
    };
    let clean = apply_dd_channel(&x, &channel)?;
    let y = add_awgn(
        &clean,
        snr_db,
        clean.mean_power(),
        trial_seed(cfg, snr_index, trial, STREAM_NOISE),
    );
    let rdm = match cfg.mode {
        RadarMode::Monostatic => rdm_monostatic(&y, &x)?,
        RadarMode::Bistatic => {
            let l =
                layout.ok_or_else(|| Error::ConfigInvalid("bistatic mode needs a pilot".into()))?;
            rdm_bistatic(&y, &l.pilot)?
        }
    };
    let [dl, dk] = cfg.detection.exclusion;
    let detections = detect_peaks(&rdm, channel.paths().len(), (dl, dk), &cfg.physical);
    Ok(SensingSnapshot {
        channel,
        rdm,
        detections,
    })
}

/// Sensing error sweep. Writes a CSV header, then one row per SNR point as
/// soon as it completes.
pub fn run_sensing_sweep<W: Write>(cfg: &ScenarioConfig, mut out: W) -> Result<Vec<SensingPoint>> {
    cfg.validate()?;
    let layout = cfg.pilot_layout()?;
    if cfg.mode == RadarMode::Bistatic && layout.is_none() {
        return Err(Error::ConfigInvalid(
            "bistatic mode needs a [pilot] block".into(),
        ));
    }
    writeln!(out, "{}", sensing_csv_header(cfg.targets.len()))?;
    let mut points = Vec::new();
    for (si, snr) in cfg.snr.points().into_iter().enumerate() {
        let trials: Vec<Vec<TargetError>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let snap = sensing_trial(cfg, layout.as_ref(), snr, si, t)?;
                Ok(target_errors(
                    &snap.detections,
                    &snap.channel,
                    &cfg.physical,
                ))
            })
            .collect::<Result<_>>()?;
        let mut stats = SensingErrorStats::default();
        for errs in &trials {
            stats.merge(&SensingErrorStats::from_errors(errs));
        }
        let point = SensingPoint { snr_db: snr, stats };
        writeln!(out, "{}", sensing_csv_row(&point))?;
        out.flush()?;
        points.push(point);
    }
    Ok(points)
}

/// Lowest sweep SNR from which `target`'s detection rate stays at or above
/// `min_rate` for every higher point.
pub fn stability_threshold(points: &[SensingPoint], target: usize, min_rate: f64) -> Option<f64> {
    let mut threshold = None;
    for p in points.iter().rev() {
        if p.stats.detection_rate(target) >= min_rate {
            threshold = Some(p.snr_db);
        } else {
            break;
        }
    }
    threshold
}

/// Mean squared error of one estimator/frame combination at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanestPoint {
    pub snr_db: f64,
    pub method: ChanestMethod,
    pub frame: FrameKind,
    /// Mean over trials of `Σ_p |h_p - ĥ_p|^2`.
    pub mse_h: f64,
    /// Mean over trials of `|h_p - ĥ_p|^2`, per path.
    pub mse_paths: Vec<f64>,
    /// Trials where the least-squares system was singular (estimate set to 0).
    pub singular: usize,
}

pub fn chanest_csv_header(num_paths: usize) -> String {
    let mut h = String::from("snr_db,method,frame,mse_h");
    for p in 1..=num_paths {
        h.push_str(&format!(",mse_path{p}"));
    }
    h.push_str(",singular_trials");
    h
}

fn chanest_csv_row(p: &ChanestPoint) -> String {
    let mut row = format!(
        "{},{},{},{}",
        fmt_snr(p.snr_db),
        p.method.label(),
        p.frame.label(),
        fmt_val(p.mse_h)
    );
    for v in &p.mse_paths {
        row.push(',');
        row.push_str(&fmt_val(*v));
    }
    row.push_str(&format!(",{}", p.singular));
    row
}

/// Per-path squared errors for one trial, for every `(method, frame)` pair.
type TrialErrors = Vec<(Vec<f64>, bool)>;

fn chanest_trial(
    cfg: &ScenarioConfig,
    layout: &PilotLayout,
    combos: &[(ChanestMethod, FrameKind)],
    snr_db: f64,
    snr_index: usize,
    trial: usize,
) -> Result<TrialErrors> {
    let dims = cfg.physical.dims();
    let mut scene = rng_from_seed(trial_seed(cfg, snr_index, trial, STREAM_SCENE));
    let channel = cfg.draw_channel(&mut scene)?;
    let data = make_data_frame(
        dims,
        &cfg.constellation(),
        trial_seed(cfg, snr_index, trial, STREAM_DATA),
    );
    let noise_seed = trial_seed(cfg, snr_index, trial, STREAM_NOISE);

    let proposed_data = embed_pilot(&data, &layout.pilot)?;
    let clean_ref = apply_dd_channel(&proposed_data, &channel)?;
    let power_ref = clean_ref.mean_power();
    let receive = |x: &DDFrame| -> Result<DDFrame> {
        Ok(add_awgn(
            &apply_dd_channel(x, &channel)?,
            snr_db,
            power_ref,
            noise_seed,
        ))
    };

    let truth_bins = channel.bins();
    let bins = match cfg.chanest.bins {
        BinSource::Truth => truth_bins.clone(),
        BinSource::Detected => {
            let y = add_awgn(&clean_ref, snr_db, power_ref, noise_seed);
            let rdm = rdm_bistatic(&y, &layout.pilot)?;
            let [dl, dk] = cfg.detection.exclusion;
            let dets = detect_peaks(&rdm, truth_bins.len(), (dl, dk), &cfg.physical);
            let det_bins: Vec<_> = dets.iter().map(|d| d.bins()).collect();
            match_detections(&det_bins, &truth_bins, dims.shape())
                .into_iter()
                .map(|a| det_bins[a.expect("as many detections as targets")])
                .collect()
        }
    };

    let pilot_frame = pilot_only_frame(&layout.pilot);
    let h_true = channel.gains();
    let mut results = Vec::with_capacity(combos.len());
    for &(method, frame) in combos {
        let estimate = match method {
            ChanestMethod::Proposed => {
                let x = match frame {
                    FrameKind::Data => proposed_data.clone(),
                    FrameKind::PilotOnly => pilot_frame.clone(),
                };
                let y = receive(&x)?;
                let xc = build_xc(&pilot_frame, &bins, &observation_cells(&pilot_frame, &bins))?;
                ls_estimate(&xc, &xc.observe(&y))
            }
            ChanestMethod::SinglePilot => {
                let base = match frame {
                    FrameKind::Data => data.clone(),
                    FrameKind::PilotOnly => DDFrame::zeros(dims),
                };
                let x = make_single_pilot_frame(
                    &base,
                    layout.center,
                    layout.amplitude,
                    layout.guard.0,
                    layout.guard.1,
                )?;
                let y = receive(&x)?;
                single_pilot_estimate(&y, layout.center, layout.amplitude, layout.guard, &bins)
            }
        };
        let (h_hat, singular) = match estimate {
            Ok(e) => (e.h_hat, false),
            Err(Error::SingularSystem { .. }) => {
                (vec![Complex64::new(0.0, 0.0); h_true.len()], true)
            }
            Err(e) => return Err(e),
        };
        let errs = h_true
            .iter()
            .zip(&h_hat)
            .map(|(a, b)| (a - b).norm_sqr())
            .collect();
        results.push((errs, singular));
    }
    Ok(results)
}

/// Paired channel estimation sweep over `methods` and the configured frame
/// kinds. Every combination sees the same channel, data and noise in each
/// trial. Writes one CSV row per (SNR, method, frame).
pub fn run_chanest_sweep<W: Write>(
    cfg: &ScenarioConfig,
    methods: &[ChanestMethod],
    mut out: W,
) -> Result<Vec<ChanestPoint>> {
    cfg.validate()?;
    let layout = cfg.require_pilot()?;
    cfg.check_s1_guard(&layout)?;
    if methods.is_empty() || cfg.chanest.frames.is_empty() {
        return Err(Error::ConfigInvalid(
            "need at least one method and one frame kind".into(),
        ));
    }
    let combos: Vec<(ChanestMethod, FrameKind)> = methods
        .iter()
        .flat_map(|&m| cfg.chanest.frames.iter().map(move |&f| (m, f)))
        .collect();
    let num_paths = cfg.targets.len();
    writeln!(out, "{}", chanest_csv_header(num_paths))?;
    let mut points = Vec::new();
    for (si, snr) in cfg.snr.points().into_iter().enumerate() {
        let trials: Vec<TrialErrors> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| chanest_trial(cfg, &layout, &combos, snr, si, t))
            .collect::<Result<_>>()?;
        for (ci, &(method, frame)) in combos.iter().enumerate() {
            let mut sums = vec![0.0; num_paths];
            let mut singular = 0;
            for trial in &trials {
                let (errs, sing) = &trial[ci];
                for (s, e) in sums.iter_mut().zip(errs) {
                    *s += e;
                }
                singular += usize::from(*sing);
            }
            let n = cfg.trials as f64;
            let mse_paths: Vec<f64> = sums.iter().map(|s| s / n).collect();
            let point = ChanestPoint {
                snr_db: snr,
                method,
                frame,
                mse_h: mse_paths.iter().sum(),
                mse_paths,
                singular,
            };
            writeln!(out, "{}", chanest_csv_row(&point))?;
            points.push(point);
        }
        out.flush()?;
    }
    Ok(points)
}

/// Built-in configurations.
pub mod presets {
    use super::*;

    fn full_targets(count: usize) -> Vec<TargetConfig> {
        let rows = [
            (0.0, [5.4, 37.8], [3.66, 18.3], [3.66, 125.73]),
            (-3.0, [16.2, 48.6], [8.54, 23.2], [8.54, 130.6]),
            (-6.0, [27.0, 59.4], [13.4, 28.0], [13.4, 135.5]),
        ];
        rows.iter()
            .take(count)
            .map(|&(power_db, speed, s1, s2)| TargetConfig {
                power_db,
                speed_kmh: Some(speed),
                doppler_bins: None,
                range_m: Some(PerScenario { s1, s2 }),
                delay_bins: None,
            })
            .collect()
    }

    /// Full-scale numerology: 60 GHz carrier, 30 kHz spacing, 4096 x 100 grid.
    pub fn full(scenario: Scenario, mode: RadarMode) -> ScenarioConfig {
        let sensing = matches!(mode, RadarMode::Bistatic);
        ScenarioConfig {
            name: "full".into(),
            scenario,
            mode,
            seed: 1,
            trials: 200,
            qam_order: 4,
            physical: PhysicalConfig::full_scale(),
            pilot: PilotConfig {
                size: Some([55, 55]),
                seed: 7,
                ..PilotConfig::default()
            },
            baseline: None,
            snr: if sensing {
                SnrSweep::range(-30.0, -10.0, 2.0)
            } else {
                SnrSweep::range(-40.0, -20.0, 2.0)
            },
            detection: DetectionConfig::default(),
            chanest: ChanestConfig::default(),
            targets: full_targets(3),
        }
    }

    /// Two-target sensing scene of the full-scale figures. Bistatic mode uses
    /// a pilot block covering one eighth of the frame.
    pub fn full_sensing(mode: RadarMode) -> ScenarioConfig {
        let mut cfg = full(Scenario::S1, mode);
        cfg.name = format!("full-sensing-{mode}");
        cfg.targets.truncate(2);
        if mode == RadarMode::Bistatic {
            cfg.pilot = PilotConfig {
                fraction: Some(0.125),
                seed: 7,
                ..PilotConfig::default()
            };
        }
        cfg
    }

    fn desk_targets() -> Vec<TargetConfig> {
        let rows = [
            (0.0, [1, 4], [3, 15], [3, 103]),
            (-3.0, [2, 5], [7, 19], [7, 107]),
            (-6.0, [3, 7], [11, 23], [11, 111]),
        ];
        rows.iter()
            .map(|&(power_db, dop, s1, s2)| TargetConfig {
                power_db,
                speed_kmh: None,
                doppler_bins: Some(dop),
                range_m: None,
                delay_bins: Some(PerScenario { s1, s2 }),
            })
            .collect()
    }

    /// 256 x 32 analog of the channel estimation scenarios.
    ///
    /// The sampling rate matches the full-scale grid (122.88 MHz), so delay
    /// bins keep their full-scale values. The pilot is 55 x 15 (guard l_tau = 27,
    /// k_v = 7) and the Doppler intervals are scaled to fit that guard.
    pub fn desk(scenario: Scenario) -> ScenarioConfig {
        ScenarioConfig {
            name: format!("desk-{scenario:?}").to_lowercase(),
            scenario,
            mode: RadarMode::Bistatic,
            seed: 1,
            trials: 200,
            qam_order: 4,
            physical: PhysicalConfig::new(60e9, 480e3, 256, 32).expect("valid constants"),
            pilot: PilotConfig {
                size: Some([55, 15]),
                seed: 7,
                ..PilotConfig::default()
            },
            baseline: None,
            snr: SnrSweep::range(-20.0, -4.0, 2.0),
            detection: DetectionConfig::default(),
            chanest: ChanestConfig::default(),
            targets: desk_targets(),
        }
    }

    /// Desk-scale two-target sensing scene; bistatic uses a 1/8 pilot block.
    pub fn desk_sensing(mode: RadarMode) -> ScenarioConfig {
        let mut cfg = desk(Scenario::S1);
        cfg.name = format!("desk-sensing-{mode}");
        cfg.mode = mode;
        cfg.targets.truncate(2);
        cfg.snr = SnrSweep::range(-36.0, -10.0, 2.0);
        if mode == RadarMode::Bistatic {
            cfg.pilot = PilotConfig {
                fraction: Some(0.125),
                seed: 7,
                ..PilotConfig::default()
            };
        }
        cfg
    }

    /// Looks up a preset by name: `desk`, `desk-sensing`, `full`,
    /// `full-sensing`.
    pub fn by_name(name: &str, scenario: Scenario, mode: RadarMode) -> Result<ScenarioConfig> {
        let mut cfg = match name {
            "desk" => desk(scenario),
            "desk-sensing" => desk_sensing(mode),
            "full" => full(scenario, mode),
            "full-sensing" => full_sensing(mode),
            other => return Err(Error::ConfigInvalid(format!("unknown preset {other:?}"))),
        };
        cfg.scenario = scenario;
        cfg.mode = mode;
        Ok(cfg)
    }
}
