//! Delay-Doppler frame construction: QAM data, embedded ±1 pilot blocks, the
//! guarded single-impulse baseline and the pilot-only reference mask.

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Grid size: `m` delay bins (subcarriers) by `n` Doppler bins (time symbols).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameDims {
    m: usize,
    n: usize,
}

impl FrameDims {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidDims { m, n });
        }
        Ok(Self { m, n })
    }

    /// Number of delay bins.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn check_block(&self, origin: (usize, usize), size: (usize, usize)) -> Result<()> {
        let (m0, n0) = origin;
        let (mp, np) = size;
        if mp == 0 || np == 0 || m0 + mp > self.m || n0 + np > self.n {
            return Err(Error::BlockOutOfBounds {
                m0,
                n0,
                mp,
                np,
                m: self.m,
                n: self.n,
            });
        }
        Ok(())
    }
}

/// An `M x N` grid of complex symbols indexed `[delay, doppler]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DDFrame {
    dims: FrameDims,
    grid: Array2<Complex64>,
}

impl DDFrame {
    pub fn zeros(dims: FrameDims) -> Self {
        Self {
            dims,
            grid: Array2::zeros(dims.shape()),
        }
    }

    /// Wraps an existing grid. Fails if any entry is NaN or infinite.
    pub fn from_grid(grid: Array2<Complex64>) -> Result<Self> {
        let (m, n) = grid.dim();
        let dims = FrameDims::new(m, n)?;
        if grid.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DimsMismatch(
                "frame contains non-finite values".into(),
            ));
        }
        // Force standard layout so row slices are contiguous.
        let grid = grid.as_standard_layout().into_owned();
        Ok(Self { dims, grid })
    }

    pub(crate) fn from_grid_unchecked(grid: Array2<Complex64>) -> Self {
        let (m, n) = grid.dim();
        Self {
            dims: FrameDims { m, n },
            grid,
        }
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn grid(&self) -> &Array2<Complex64> {
        &self.grid
    }

    pub fn into_grid(self) -> Array2<Complex64> {
        self.grid
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.grid[[m, n]]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.grid[[m, n]] = value;
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.grid.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        self.energy() / self.dims.cells() as f64
    }

    /// Number of cells with a nonzero value.
    pub fn support(&self) -> usize {
        self.grid
            .iter()
            .filter(|z| **z != Complex64::new(0.0, 0.0))
            .count()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            dims: self.dims,
            grid: self.grid.mapv(|z| z * factor),
        }
    }
}

/// Square QAM alphabet normalized to unit mean power.
#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation {
    order: usize,
    points: Vec<Complex64>,
}

impl QamConstellation {
    /// Builds a 4-, 16- or 64-QAM constellation.
    pub fn new(order: usize) -> Result<Self> {
        let side = match order {
            4 => 2,
            16 => 4,
            64 => 8,
            _ => {
                return Err(Error::ConfigInvalid(format!(
                    "unsupported QAM order {order} (expected 4, 16 or 64)"
                )))
            }
        };
        let levels: Vec<f64> = (0..side)
            .map(|i| (2 * i) as f64 - (side - 1) as f64)
            .collect();
        let mut points: Vec<Complex64> = levels
            .iter()
            .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im)))
            .collect();
        let mean_power = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        let scale = mean_power.sqrt().recip();
        for p in &mut points {
            *p *= scale;
        }
        Ok(Self { order, points })
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("4-QAM is always valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
}

/// Fills every cell with a uniformly drawn constellation point.
pub fn make_data_frame(dims: FrameDims, constellation: &QamConstellation, seed: u64) -> DDFrame {
    let mut rng = rng_from_seed(seed);
    let points = constellation.points();
    let grid =
        Array2::from_shape_simple_fn(dims.shape(), || points[rng.random_range(0..points.len())]);
    DDFrame::from_grid_unchecked(grid)
}

/// A rectangular block of ±1 pilot symbols at a fixed position in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotGrid {
    dims: FrameDims,
    origin: (usize, usize),
    size: (usize, usize),
    symbols: Array2<f64>,
    seed: u64,
}

impl PilotGrid {
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn size(&self) -> (usize, usize) {
        self.size
    }

    pub fn symbols(&self) -> &Array2<f64> {
        &self.symbols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Frame dimensions the block was validated against.
    pub fn frame_dims(&self) -> FrameDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.size.0 * self.size.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total pilot energy (each symbol has unit magnitude).
    pub fn energy(&self) -> f64 {
        self.len() as f64
    }

    /// Fraction of the frame occupied by pilot symbols.
    pub fn overhead(&self) -> f64 {
        self.len() as f64 / self.dims.cells() as f64
    }

    pub fn contains(&self, m: usize, n: usize) -> bool {
        let (m0, n0) = self.origin;
        (m0..m0 + self.size.0).contains(&m) && (n0..n0 + self.size.1).contains(&n)
    }

    /// Symbol at frame coordinates `(m, n)`, if inside the block.
    pub fn symbol_at(&self, m: usize, n: usize) -> Option<f64> {
        self.contains(m, n)
            .then(|| self.symbols[[m - self.origin.0, n - self.origin.1]])
    }

    /// Frame coordinates of every pilot cell, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (m0, n0) = self.origin;
        let (mp, np) = self.size;
        (m0..m0 + mp).flat_map(move |m| (n0..n0 + np).map(move |n| (m, n)))
    }

    /// Same placement with every symbol replaced by +1.
    pub fn with_constant_symbols(&self) -> Self {
        Self {
            symbols: Array2::from_elem(self.size, 1.0),
            ..self.clone()
        }
    }

    /// Block of `size` centered in the frame.
    pub fn centered(dims: FrameDims, size: (usize, usize), seed: u64) -> Result<Self> {
        let origin = (
            dims.m().saturating_sub(size.0) / 2,
            dims.n().saturating_sub(size.1) / 2,
        );
        make_pilot_grid(dims, origin, size, seed)
    }

    /// Center cell of the block (rounded toward the origin for even sizes).
    pub fn center(&self) -> (usize, usize) {
        (
            self.origin.0 + (self.size.0 - 1) / 2,
            self.origin.1 + (self.size.1 - 1) / 2,
        )
    }

    fn check_fits(&self, dims: FrameDims) -> Result<()> {
        dims.check_block(self.origin, self.size)
    }
}

/// Draws an `Mp x Np` block of random ±1 symbols.
///
/// Each sign is one bit from a ChaCha8 stream seeded with `seed`, taken in
/// row-major order over the block.
pub fn make_pilot_grid(
    dims: FrameDims,
    origin: (usize, usize),
    size: (usize, usize),
    seed: u64,
) -> Result<PilotGrid> {
    dims.check_block(origin, size)?;
    let mut rng = rng_from_seed(seed);
    let symbols =
        Array2::from_shape_simple_fn(size, || if rng.random::<bool>() { 1.0 } else { -1.0 });
    Ok(PilotGrid {
        dims,
        origin,
        size,
        symbols,
        seed,
    })
}

/// Overwrites the pilot cells of `frame`; every other cell is left untouched.
pub fn embed_pilot(frame: &DDFrame, pilot: &PilotGrid) -> Result<DDFrame> {
    pilot.check_fits(frame.dims())?;
    let mut out = frame.clone();
    let (m0, n0) = pilot.origin;
    let (mp, np) = pilot.size;
    out.grid
        .slice_mut(s![m0..m0 + mp, n0..n0 + np])
        .zip_mut_with(&pilot.symbols, |cell, &sym| {
            *cell = Complex64::new(sym, 0.0)
        });
    Ok(out)
}

/// Baseline embedded-impulse frame: zeroes the `(2 l_tau + 1) x (2 k_v + 1)`
/// guard rectangle around `center` in `frame` and places a single pilot of
/// `amplitude` at `center`.
pub fn make_single_pilot_frame(
    frame: &DDFrame,
    center: (usize, usize),
    amplitude: f64,
    l_tau: usize,
    k_v: usize,
) -> Result<DDFrame> {
    let dims = frame.dims();
    let (mc, nc) = center;
    let size = (2 * l_tau + 1, 2 * k_v + 1);
    if mc < l_tau || nc < k_v {
        return Err(Error::BlockOutOfBounds {
            m0: mc.saturating_sub(l_tau),
            n0: nc.saturating_sub(k_v),
            mp: size.0,
            np: size.1,
            m: dims.m(),
            n: dims.n(),
        });
    }
    let origin = (mc - l_tau, nc - k_v);
    dims.check_block(origin, size)?;
    let mut out = frame.clone();
    out.grid
        .slice_mut(s![origin.0..origin.0 + size.0, origin.1..origin.1 + size.1])
        .fill(Complex64::new(0.0, 0.0));
    out.grid[[mc, nc]] = Complex64::new(amplitude, 0.0);
    Ok(out)
}

/// Pilot-only reference `X1`: pilot cells copied from `frame`, zero elsewhere.
pub fn pilot_mask_frame(frame: &DDFrame, pilot: &PilotGrid) -> Result<DDFrame> {
    pilot.check_fits(frame.dims())?;
    let mut out = DDFrame::zeros(frame.dims());
    let (m0, n0) = pilot.origin;
    let (mp, np) = pilot.size;
    let block = s![m0..m0 + mp, n0..n0 + np];
    out.grid.slice_mut(block).assign(&frame.grid.slice(block));
    Ok(out)
}

/// Pilot-only frame: the pilot block embedded in an otherwise empty frame.
pub fn pilot_only_frame(pilot: &PilotGrid) -> DDFrame {
    embed_pilot(&DDFrame::zeros(pilot.dims), pilot).expect("pilot validated against its dims")
}
