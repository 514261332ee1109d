//! Simplified OTFS (Zak) modulator.
//!
//! Each delay row of a DD frame is taken through a unitary inverse DFT along
//! the Doppler axis, giving delay-time samples `x[m][t]`. The time signal is
//! serialized one time symbol after another: sample `t * M + m` carries delay
//! bin `m` of time symbol `t`. No cyclic prefix is modeled; the channel acts
//! directly on the DD grid, see [`crate::channel`].

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftDirection;

use crate::fft::fft_rows;
use crate::frame::{DDFrame, FrameDims};
use crate::{Error, Result};

/// Serialized delay-time samples of one OTFS frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    dims: FrameDims,
    samples: Vec<Complex64>,
    sample_period: f64,
}

impl TimeSignal {
    /// Wraps raw samples; the length must be exactly `M * N`.
    pub fn new(dims: FrameDims, samples: Vec<Complex64>, sample_period: f64) -> Result<Self> {
        if samples.len() != dims.cells() {
            return Err(Error::LengthMismatch {
                expected: dims.cells(),
                actual: samples.len(),
            });
        }
        Ok(Self {
            dims,
            samples,
            sample_period,
        })
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Sample period in seconds (1.0 when not tied to a physical config).
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn with_sample_period(mut self, ts: f64) -> Self {
        self.sample_period = ts;
        self
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Samples belonging to time symbol `t`, i.e. `M` consecutive samples.
    pub fn symbol(&self, t: usize) -> &[Complex64] {
        let m = self.dims.m();
        &self.samples[t * m..(t + 1) * m]
    }
}

/// DD frame to serialized delay-time samples.
pub fn otfs_modulate(frame: &DDFrame) -> TimeSignal {
    let dims = frame.dims();
    let (m, n) = dims.shape();
    let mut rows = frame.grid().as_standard_layout().into_owned();
    let buf = rows.as_slice_mut().expect("standard layout");
    fft_rows(buf, n, FftDirection::Inverse);
    let scale = (n as f64).sqrt().recip();
    // Transposed read gives the time-major serialization.
    let samples = rows.t().iter().map(|z| z * scale).collect::<Vec<_>>();
    debug_assert_eq!(samples.len(), m * n);
    TimeSignal {
        dims,
        samples,
        sample_period: 1.0,
    }
}

/// Inverse of [`otfs_modulate`].
pub fn otfs_demodulate(signal: &TimeSignal) -> Result<DDFrame> {
    let dims = signal.dims;
    let (m, n) = dims.shape();
    if signal.samples.len() != m * n {
        return Err(Error::LengthMismatch {
            expected: m * n,
            actual: signal.samples.len(),
        });
    }
    let time_major =
        Array2::from_shape_vec((n, m), signal.samples.clone()).expect("length checked above");
    let mut rows = time_major.t().as_standard_layout().into_owned();
    fft_rows(
        rows.as_slice_mut().expect("standard layout"),
        n,
        FftDirection::Forward,
    );
    let scale = (n as f64).sqrt().recip();
    rows.mapv_inplace(|z| z * scale);
    Ok(DDFrame::from_grid_unchecked(rows))
}
