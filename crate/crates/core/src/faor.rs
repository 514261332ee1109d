//! Range-Doppler maps by 2D cyclic correlation, and peak extraction.
//!
//! The map is
//!
//! ```text
//! Z(k, l) = Σ_m Σ_n Y(m, n) conj(X(<m - k>_M, <n - l>_N))
//! ```
//!
//! computed as `IFFT2(FFT2(Y) * conj(FFT2(X)))` with an unnormalized forward
//! transform and a `1/(MN)` inverse, so `Z` is exactly the double sum above.
//! Row index of `Z` is the delay shift, column index the Doppler shift.
//!
//! Monostatic sensing correlates against the full transmitted frame; bistatic
//! sensing only knows the pilot block and correlates against the pilot-only
//! mask. Data symbols around the pilot then act as uncancelled interference.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftDirection;

use crate::channel::PhysicalConfig;
use crate::fft::fft2;
use crate::frame::{embed_pilot, DDFrame, FrameDims, PilotGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadarMode {
    Monostatic,
    Bistatic,
}

impl std::fmt::Display for RadarMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadarMode::Monostatic => "monostatic",
            RadarMode::Bistatic => "bistatic",
        })
    }
}

impl std::str::FromStr for RadarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "monostatic" | "mono" => Ok(RadarMode::Monostatic),
            "bistatic" | "bi" => Ok(RadarMode::Bistatic),
            other => Err(Error::ConfigInvalid(format!(
                "unknown radar mode {other:?}"
            ))),
        }
    }
}

/// Complex correlation surface indexed `[delay, doppler]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    dims: FrameDims,
    z: Array2<Complex64>,
    mode: RadarMode,
}

impl RangeDopplerMap {
    pub fn new(z: Array2<Complex64>, mode: RadarMode) -> Result<Self> {
        let (m, n) = z.dim();
        let dims = FrameDims::new(m, n)?;
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::DimsMismatch(
                "range-Doppler map contains non-finite values".into(),
            ));
        }
        Ok(Self {
            dims,
            z: z.as_standard_layout().into_owned(),
            mode,
        })
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn z(&self) -> &Array2<Complex64> {
        &self.z
    }

    pub fn mode(&self) -> RadarMode {
        self.mode
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.z.mapv(|v| v.norm())
    }

    /// Bin `(delay, doppler)` of the largest magnitude; the first one in
    /// row-major order wins ties.
    pub fn argmax(&self) -> (usize, usize) {
        argmax(&self.magnitude())
    }

    /// Largest magnitude outside the `(2 dl + 1) x (2 dk + 1)` cyclic windows
    /// around `peaks`.
    pub fn max_sidelobe(&self, peaks: &[(usize, usize)], exclusion: (usize, usize)) -> f64 {
        let mut mag = self.magnitude();
        for &p in peaks {
            zero_window(&mut mag, p, exclusion);
        }
        mag.iter().copied().fold(0.0, f64::max)
    }
}

fn argmax(mag: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_val = f64::NEG_INFINITY;
    for ((m, n), &v) in mag.indexed_iter() {
        if v > best_val {
            best_val = v;
            best = (m, n);
        }
    }
    best
}

fn zero_window(mag: &mut Array2<f64>, center: (usize, usize), exclusion: (usize, usize)) {
    let (m_len, n_len) = mag.dim();
    let rows = (2 * exclusion.0 + 1).min(m_len);
    let cols = (2 * exclusion.1 + 1).min(n_len);
    let m_start = center.0 + m_len - exclusion.0.min(m_len - 1);
    let n_start = center.1 + n_len - exclusion.1.min(n_len - 1);
    for i in 0..rows {
        for j in 0..cols {
            mag[[(m_start + i) % m_len, (n_start + j) % n_len]] = 0.0;
        }
    }
}

/// 2D cyclic cross-correlation of `y` against `xref` through the 2D FFT.
pub fn cyclic_corr_fft(y: &DDFrame, xref: &DDFrame) -> Result<RangeDopplerMap> {
    if y.dims() != xref.dims() {
        return Err(Error::DimsMismatch(format!(
            "received {:?} vs reference {:?}",
            y.dims().shape(),
            xref.dims().shape()
        )));
    }
    let mut y_hat = y.grid().as_standard_layout().into_owned();
    let mut x_hat = xref.grid().as_standard_layout().into_owned();
    fft2(&mut y_hat, FftDirection::Forward);
    fft2(&mut x_hat, FftDirection::Forward);
    y_hat.zip_mut_with(&x_hat, |a, b| *a *= b.conj());
    fft2(&mut y_hat, FftDirection::Inverse);
    let scale = 1.0 / y.dims().cells() as f64;
    y_hat.mapv_inplace(|v| v * scale);
    Ok(RangeDopplerMap {
        dims: y.dims(),
        z: y_hat,
        mode: RadarMode::Monostatic,
    })
}

/// Range-Doppler map with the complete transmitted frame as reference.
pub fn rdm_monostatic(y: &DDFrame, x: &DDFrame) -> Result<RangeDopplerMap> {
    cyclic_corr_fft(y, x)
}

/// Range-Doppler map with only the pilot block known at the receiver.
///
/// The reference is the pilot-only frame: pilot symbols inside the block,
/// zero elsewhere.
pub fn rdm_bistatic(y: &DDFrame, pilot: &PilotGrid) -> Result<RangeDopplerMap> {
    let reference = embed_pilot(&DDFrame::zeros(y.dims()), pilot)?;
    let mut rdm = cyclic_corr_fft(y, &reference)?;
    rdm.mode = RadarMode::Bistatic;
    Ok(rdm)
}

/// One extracted target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Delay bin.
    pub l: usize,
    /// Doppler bin.
    pub k: usize,
    pub magnitude: f64,
    pub range_m: f64,
    pub speed_mps: f64,
}

impl Detection {
    pub fn bins(&self) -> (usize, usize) {
        (self.l, self.k)
    }
}

/// Greedy peak extraction: take the global maximum of `|Z|`, record it, zero
/// its `(2 dl + 1) x (2 dk + 1)` cyclic neighbourhood and repeat.
///
/// Always returns `num_targets` detections in descending magnitude; once the
/// map is exhausted the trailing entries have magnitude zero.
pub fn detect_peaks(
    rdm: &RangeDopplerMap,
    num_targets: usize,
    exclusion: (usize, usize),
    cfg: &PhysicalConfig,
) -> Vec<Detection> {
    let mut mag = rdm.magnitude();
    (0..num_targets)
        .map(|_| {
            let (l, k) = argmax(&mag);
            let magnitude = mag[[l, k]];
            zero_window(&mut mag, (l, k), exclusion);
            Detection {
                l,
                k,
                magnitude,
                range_m: cfg.bin_to_range(l),
                speed_mps: cfg.bin_to_speed(k),
            }
        })
        .collect()
}
