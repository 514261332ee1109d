//! Delay-Doppler (OTFS) integrated sensing and communication simulator.
//!
//! The crate covers the whole link used for joint radar sensing and channel
//! estimation on an OTFS waveform:
//!
//! ```text
//! data + pilot ──► DDFrame ──► otfs_modulate ──► TimeSignal (PAPR)
//!                     │
//!                     └─► apply_dd_channel ──► add_awgn ──► Y
//!                                                          │
//!   rdm_monostatic(Y, X) / rdm_bistatic(Y, pilot) ◄────────┤
//!         │                                                │
//!         └─► detect_peaks ──► (l, k) ──► build_xc ──► ls_estimate
//! ```
//!
//! Range-Doppler maps are computed by 2D cyclic correlation through the 2D
//! FFT; [`oracle`] keeps a literal quadruple-loop implementation around for
//! verification and complexity benchmarking.

pub mod chanest;
pub mod channel;
pub mod export;
pub mod faor;
mod fft;
pub mod frame;
pub mod metrics;
pub mod modem;
pub mod oracle;
pub mod rng;
pub mod scenario;

pub use num_complex::Complex64;

pub use chanest::{
    build_xc, ls_estimate, mse_h, observation_cells, single_pilot_estimate, ChannelEstimate,
    RegressorMatrix,
};
pub use channel::{
    add_awgn, apply_dd_channel, ChannelRealization, PathParams, PhysicalConfig, SPEED_OF_LIGHT,
};
pub use faor::{
    cyclic_corr_fft, detect_peaks, rdm_bistatic, rdm_monostatic, Detection, RadarMode,
    RangeDopplerMap,
};
pub use frame::{
    embed_pilot, make_data_frame, make_pilot_grid, make_single_pilot_frame, pilot_mask_frame,
    DDFrame, FrameDims, PilotGrid, QamConstellation,
};
pub use metrics::{papr_db, sensing_errors, SensingErrorStats, TargetError};
pub use modem::{otfs_demodulate, otfs_modulate, TimeSignal};
pub use scenario::{run_chanest_sweep, run_sensing_sweep, ChanestMethod, Scenario, ScenarioConfig};

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frame dimensions must be positive, got {m}x{n}")]
    InvalidDims { m: usize, n: usize },
    #[error("block at ({m0},{n0}) of size {mp}x{np} does not fit in a {m}x{n} frame")]
    BlockOutOfBounds {
        m0: usize,
        n0: usize,
        mp: usize,
        np: usize,
        m: usize,
        n: usize,
    },
    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("bin {value} outside [0, {max}]")]
    BinOutOfRange { value: f64, max: usize },
    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),
    #[error("duplicate path at delay bin {l}, Doppler bin {k}")]
    DuplicatePath { l: usize, k: usize },
    #[error("observation cell set is empty")]
    EmptyObservation,
    #[error("least-squares system is singular (condition number {cond:e})")]
    SingularSystem { cond: f64 },
    #[error("signal has zero power")]
    ZeroSignal,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
