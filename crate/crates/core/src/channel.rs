//! Delay-Doppler channel model, AWGN and physical unit conversions.
//!
//! A path with gain `h`, delay bin `l` and Doppler bin `k` maps the
//! transmitted frame `X` to
//!
//! ```text
//! h * exp(j2π (m - l)/M * k/N) * a(m, n) * X(<m - l>_M, <n - k>_N)
//! ```
//!
//! where `a(m, n) = 1` for `m >= l` and `a(m, n) = (N-1)/N * exp(-j2π (n - k)/N)`
//! for the rows `m < l` that wrap around the delay axis. The received frame is
//! the sum over paths plus noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::frame::{DDFrame, FrameDims};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Propagation speed used for all conversions, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One propagation path on the integer DD grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub h: Complex64,
    pub l: usize,
    pub k: usize,
}

impl PathParams {
    pub fn new(h: Complex64, l: usize, k: usize) -> Result<Self> {
        let mag = h.norm();
        if !mag.is_finite() || mag <= 0.0 {
            return Err(Error::InvalidPath(format!(
                "gain {h} must be finite and nonzero"
            )));
        }
        Ok(Self { h, l, k })
    }

    pub fn bins(&self) -> (usize, usize) {
        (self.l, self.k)
    }
}

/// A set of paths with distinct `(l, k)` bins, validated against a frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    dims: FrameDims,
    paths: Vec<PathParams>,
}

impl ChannelRealization {
    pub fn new(dims: FrameDims, paths: Vec<PathParams>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidPath("channel needs at least one path".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            check_bins(dims, p.l, p.k)?;
            if paths[..i].iter().any(|q| q.bins() == p.bins()) {
                return Err(Error::DuplicatePath { l: p.l, k: p.k });
            }
        }
        Ok(Self { dims, paths })
    }

    pub fn single(dims: FrameDims, h: Complex64, l: usize, k: usize) -> Result<Self> {
        Self::new(dims, vec![PathParams::new(h, l, k)?])
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn paths(&self) -> &[PathParams] {
        &self.paths
    }

    pub fn gains(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.h).collect()
    }

    pub fn bins(&self) -> Vec<(usize, usize)> {
        self.paths.iter().map(PathParams::bins).collect()
    }
}

fn check_bins(dims: FrameDims, l: usize, k: usize) -> Result<()> {
    if l >= dims.m() {
        return Err(Error::BinOutOfRange {
            value: l as f64,
            max: dims.m() - 1,
        });
    }
    if k >= dims.n() {
        return Err(Error::BinOutOfRange {
            value: k as f64,
            max: dims.n() - 1,
        });
    }
    Ok(())
}

/// Deterministic part of a path's response at received cell `(m, n)`: the
/// delay-Doppler phase twist times the wrap factor `a(m, n)`.
pub fn path_coefficient(dims: FrameDims, l: usize, k: usize, m: usize, n: usize) -> Complex64 {
    let (mm, nn) = (dims.m() as f64, dims.n() as f64);
    let twist = Complex64::from_polar(
        1.0,
        2.0 * PI * ((m as f64 - l as f64) / mm) * (k as f64 / nn),
    );
    if m >= l {
        twist
    } else {
        let wrap = Complex64::from_polar((nn - 1.0) / nn, -2.0 * PI * (n as f64 - k as f64) / nn);
        twist * wrap
    }
}

/// Noiseless received frame for `x` through `channel`.
pub fn apply_dd_channel(x: &DDFrame, channel: &ChannelRealization) -> Result<DDFrame> {
    let dims = x.dims();
    for p in channel.paths() {
        check_bins(dims, p.l, p.k)?;
    }
    let (m_len, n_len) = dims.shape();
    let (mm, nn) = (m_len as f64, n_len as f64);
    let mut y = DDFrame::zeros(dims);
    let src = x.grid();
    for p in channel.paths() {
        // Row wrap factors depend only on n, so precompute them once per path.
        let wrap: Vec<Complex64> = (0..n_len)
            .map(|n| {
                Complex64::from_polar((nn - 1.0) / nn, -2.0 * PI * (n as f64 - p.k as f64) / nn)
            })
            .collect();
        for m in 0..m_len {
            let twist = p.h
                * Complex64::from_polar(
                    1.0,
                    2.0 * PI * ((m as f64 - p.l as f64) / mm) * (p.k as f64 / nn),
                );
            let src_m = (m + m_len - p.l) % m_len;
            for (n, w) in wrap.iter().enumerate() {
                let src_n = (n + n_len - p.k) % n_len;
                let mut c = twist * src[[src_m, src_n]];
                if m < p.l {
                    c *= w;
                }
                let cur = y.get(m, n);
                y.set(m, n, cur + c);
            }
        }
    }
    Ok(y)
}

/// Unit-variance circular complex Gaussian samples, one per cell.
pub fn unit_noise(dims: FrameDims, seed: u64) -> DDFrame {
    let mut rng = rng_from_seed(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let grid = ndarray::Array2::from_shape_simple_fn(dims.shape(), || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    DDFrame::from_grid_unchecked(grid)
}

/// Per-cell noise variance for a given SNR and signal power reference.
pub fn noise_variance(snr_db: f64, signal_power_ref: f64) -> f64 {
    signal_power_ref / 10f64.powf(snr_db / 10.0)
}

/// Adds complex AWGN with per-cell variance `signal_power_ref / 10^(snr_db/10)`.
///
/// `snr_db = f64::INFINITY` is the noiseless sentinel and returns `y` as is.
pub fn add_awgn(y: &DDFrame, snr_db: f64, signal_power_ref: f64, seed: u64) -> DDFrame {
    assert!(!snr_db.is_nan(), "SNR must not be NaN");
    if snr_db == f64::INFINITY {
        return y.clone();
    }
    let sigma = noise_variance(snr_db, signal_power_ref).sqrt();
    let noise = unit_noise(y.dims(), seed);
    let grid = y.grid() + &noise.grid().mapv(|z| z * sigma);
    DDFrame::from_grid_unchecked(grid)
}

/// Carrier, numerology and frame size of the simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Carrier frequency, Hz.
    pub fc_hz: f64,
    /// Subcarrier spacing, Hz.
    pub delta_f_hz: f64,
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_c")]
    pub c_mps: f64,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

impl PhysicalConfig {
    pub fn new(fc_hz: f64, delta_f_hz: f64, m: usize, n: usize) -> Result<Self> {
        let cfg = Self {
            fc_hz,
            delta_f_hz,
            m,
            n,
            c_mps: SPEED_OF_LIGHT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 60 GHz carrier, 30 kHz spacing, 4096 x 100 grid (122.88 MHz sampling).
    pub fn full_scale() -> Self {
        Self::new(60e9, 30e3, 4096, 100).expect("valid constants")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.fc_hz, self.delta_f_hz, self.c_mps]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(Error::ConfigInvalid(
                "carrier, subcarrier spacing and propagation speed must be positive".into(),
            ));
        }
        FrameDims::new(self.m, self.n)?;
        Ok(())
    }

    pub fn dims(&self) -> FrameDims {
        FrameDims::new(self.m, self.n).expect("validated at construction")
    }

    /// Sample period `Ts = 1 / (M Δf)`.
    pub fn ts(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f_hz)
    }

    /// Duration of one time symbol, `T = 1/Δf = M Ts`.
    pub fn t_block(&self) -> f64 {
        1.0 / self.delta_f_hz
    }

    pub fn sample_rate(&self) -> f64 {
        self.m as f64 * self.delta_f_hz
    }

    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.t_block()
    }

    /// Meters per delay bin (two-way).
    pub fn range_resolution(&self) -> f64 {
        self.c_mps * self.ts() / 2.0
    }

    /// m/s per Doppler bin (two-way).
    pub fn speed_resolution(&self) -> f64 {
        self.c_mps * self.delta_f_hz / (2.0 * self.n as f64 * self.fc_hz)
    }

    /// Round-trip delay of a target at `range_m`.
    pub fn range_to_delay(&self, range_m: f64) -> f64 {
        2.0 * range_m / self.c_mps
    }

    /// Two-way Doppler shift of a target closing at `speed_mps`.
    pub fn speed_to_doppler(&self, speed_mps: f64) -> f64 {
        2.0 * speed_mps * self.fc_hz / self.c_mps
    }

    /// `l = round(τ / Ts)`.
    pub fn delay_to_bin(&self, tau_s: f64) -> Result<usize> {
        let x = (tau_s / self.ts()).round();
        if !(x >= 0.0 && x <= (self.m - 1) as f64) {
            return Err(Error::BinOutOfRange {
                value: tau_s / self.ts(),
                max: self.m - 1,
            });
        }
        Ok(x as usize)
    }

    /// `k = round(N fd / Δf)`, reduced modulo N so negative shifts land near N-1.
    pub fn doppler_to_bin(&self, fd_hz: f64) -> Result<usize> {
        let raw = self.n as f64 * fd_hz / self.delta_f_hz;
        let x = raw.round();
        let limit = (self.n - 1) as f64;
        if !(x >= -limit && x <= limit) {
            return Err(Error::BinOutOfRange {
                value: raw,
                max: self.n - 1,
            });
        }
        Ok((x as i64).rem_euclid(self.n as i64) as usize)
    }

    pub fn range_to_bin(&self, range_m: f64) -> Result<usize> {
        self.delay_to_bin(self.range_to_delay(range_m))
    }

    pub fn speed_to_bin(&self, speed_mps: f64) -> Result<usize> {
        self.doppler_to_bin(self.speed_to_doppler(speed_mps))
    }

    /// `R = c l Ts / 2`.
    pub fn bin_to_range(&self, l: usize) -> f64 {
        l as f64 * self.range_resolution()
    }

    /// `v = c k Δf / (2 N fc)`.
    pub fn bin_to_speed(&self, k: usize) -> f64 {
        k as f64 * self.speed_resolution()
    }

    /// Like [`Self::bin_to_speed`] but bins above N/2 read as receding targets.
    pub fn bin_to_speed_signed(&self, k: usize) -> f64 {
        signed_bin(k, self.n) as f64 * self.speed_resolution()
    }
}

/// Centered representative of `k` modulo `n`, in `(-n/2, n/2]`.
pub fn signed_bin(k: usize, n: usize) -> i64 {
    let k = (k % n) as i64;
    let n = n as i64;
    if 2 * k > n {
        k - n
    } else {
        k
    }
}

/// Shortest cyclic distance between two bins modulo `n`.
pub fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

pub const KMH_PER_MPS: f64 = 3.6;
