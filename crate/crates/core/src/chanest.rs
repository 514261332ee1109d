//! Pilot-aided least-squares channel estimation.
//!
//! Once sensing has produced the delay/Doppler bins of the paths, the
//! received pilot cells are linear in the unknown gains:
//!
//! ```text
//! y = Xc h,   Xc[(m, n), p] = exp(j2π (m - l_p)/M * k_p/N) a_p(m, n) X1(<m - l_p>, <n - k_p>)
//! ```
//!
//! with `X1` the pilot-only frame. The observation rows are the union of the
//! pilot block's images under every path shift, ordered by flat index
//! `m * N + n`. The system is solved by Householder QR with a condition number
//! guard rather than through explicit normal equations.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

use crate::channel::{path_coefficient, signed_bin};
use crate::frame::{DDFrame, FrameDims};
use crate::{Error, Result};

/// Systems with a larger 2-norm condition number are reported as singular.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMatrix {
    entries: Array2<Complex64>,
    cells: Vec<(usize, usize)>,
    paths: Vec<(usize, usize)>,
}

impl RegressorMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// DD cell observed by each row.
    pub fn row_cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn paths(&self) -> &[(usize, usize)] {
        &self.paths
    }

    /// Picks the observation vector for this system out of a received frame.
    pub fn observe(&self, y: &DDFrame) -> Vec<Complex64> {
        self.cells.iter().map(|&(m, n)| y.get(m, n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: Vec<Complex64>,
    pub paths: Vec<(usize, usize)>,
    pub residual_norm: f64,
}

fn check_paths(dims: FrameDims, paths: &[(usize, usize)]) -> Result<()> {
    for (i, &(l, k)) in paths.iter().enumerate() {
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
        if paths[..i].contains(&(l, k)) {
            return Err(Error::DuplicatePath { l, k });
        }
    }
    Ok(())
}

/// Cells where at least one path carries a shifted pilot symbol, in flat
/// index order.
pub fn observation_cells(pilot_frame: &DDFrame, paths: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let (m_len, n_len) = pilot_frame.dims().shape();
    let mut hit = Array2::from_elem((m_len, n_len), false);
    let zero = Complex64::new(0.0, 0.0);
    for ((m, n), v) in pilot_frame.grid().indexed_iter() {
        if *v == zero {
            continue;
        }
        for &(l, k) in paths {
            hit[[(m + l) % m_len, (n + k) % n_len]] = true;
        }
    }
    hit.indexed_iter()
        .filter_map(|(cell, &h)| h.then_some(cell))
        .collect()
}

/// Regressor matrix for the given paths over `obs_cells`.
///
/// Rows are sorted by flat index regardless of the order of `obs_cells`.
pub fn build_xc(
    pilot_frame: &DDFrame,
    paths: &[(usize, usize)],
    obs_cells: &[(usize, usize)],
) -> Result<RegressorMatrix> {
    let dims = pilot_frame.dims();
    check_paths(dims, paths)?;
    if obs_cells.is_empty() {
        return Err(Error::EmptyObservation);
    }
    let (m_len, n_len) = dims.shape();
    let mut cells = obs_cells.to_vec();
    if let Some(&(m, n)) = cells.iter().find(|&&(m, n)| m >= m_len || n >= n_len) {
        return Err(Error::DimsMismatch(format!(
            "observation cell ({m},{n}) outside frame"
        )));
    }
    cells.sort_by_key(|&(m, n)| m * n_len + n);
    cells.dedup();
    let entries = Array2::from_shape_fn((cells.len(), paths.len()), |(row, p)| {
        let (m, n) = cells[row];
        let (l, k) = paths[p];
        let src = pilot_frame.get((m + m_len - l) % m_len, (n + n_len - k) % n_len);
        if src == Complex64::new(0.0, 0.0) {
            src
        } else {
            path_coefficient(dims, l, k, m, n) * src
        }
    });
    Ok(RegressorMatrix {
        entries,
        cells,
        paths: paths.to_vec(),
    })
}

/// Least-squares gains `argmin ||y - Xc h||`.
pub fn ls_estimate(xc: &RegressorMatrix, y: &[Complex64]) -> Result<ChannelEstimate> {
    let (rows, cols) = (xc.rows(), xc.cols());
    if y.len() != rows {
        return Err(Error::DimsMismatch(format!(
            "observation has {} entries, regressor has {rows} rows",
            y.len()
        )));
    }
    if cols == 0 {
        return Ok(ChannelEstimate {
            h_hat: Vec::new(),
            paths: Vec::new(),
            residual_norm: y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
        });
    }
    if rows < cols {
        return Err(Error::SingularSystem {
            cond: f64::INFINITY,
        });
    }
    let a = DMatrix::from_fn(rows, cols, |r, c| xc.entries[[r, c]]);
    let b = DVector::from_column_slice(y);
    let qr = a.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| {
        (hi.max(s), lo.min(s))
    });
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(Error::SingularSystem { cond });
    }
    let qhb = qr.q().adjoint() * &b;
    let h = r
        .solve_upper_triangular(&qhb)
        .ok_or(Error::SingularSystem { cond })?;
    let residual = &b - &a * &h;
    Ok(ChannelEstimate {
        h_hat: h.iter().copied().collect(),
        paths: xc.paths.clone(),
        residual_norm: residual.norm(),
    })
}

/// Combined squared error `Σ_p |h_p - ĥ_p|^2`.
pub fn mse_h(h_true: &[Complex64], h_hat: &[Complex64]) -> Result<f64> {
    if h_true.len() != h_hat.len() {
        return Err(Error::DimsMismatch(format!(
            "{} true gains vs {} estimates",
            h_true.len(),
            h_hat.len()
        )));
    }
    Ok(h_true
        .iter()
        .zip(h_hat)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum())
}

/// Embedded single-impulse baseline estimator.
///
/// The receiver only inspects the `(2 l_tau + 1) x (2 k_v + 1)` guard window
/// around the impulse. A path whose response cell `center + (l, k)` falls in
/// the window (`l <= l_tau`, `|k| <= k_v` in signed Doppler) is estimated by
/// least squares over the window, which for an impulse reduces to reading
/// the response cell. Paths outside the window are invisible and get `ĥ = 0`.
pub fn single_pilot_estimate(
    y: &DDFrame,
    center: (usize, usize),
    amplitude: f64,
    guard: (usize, usize),
    paths: &[(usize, usize)],
) -> Result<ChannelEstimate> {
    let dims = y.dims();
    check_paths(dims, paths)?;
    let (l_tau, k_v) = guard;
    let (mc, nc) = center;
    if mc < l_tau || nc < k_v || mc + l_tau >= dims.m() || nc + k_v >= dims.n() {
        return Err(Error::BlockOutOfBounds {
            m0: mc.saturating_sub(l_tau),
            n0: nc.saturating_sub(k_v),
            mp: 2 * l_tau + 1,
            np: 2 * k_v + 1,
            m: dims.m(),
            n: dims.n(),
        });
    }
    let mut impulse = DDFrame::zeros(dims);
    impulse.set(mc, nc, Complex64::new(amplitude, 0.0));
    let window: Vec<(usize, usize)> = (mc - l_tau..=mc + l_tau)
        .flat_map(|m| (nc - k_v..=nc + k_v).map(move |n| (m, n)))
        .collect();
    let visible: Vec<usize> = (0..paths.len())
        .filter(|&i| {
            let (l, k) = paths[i];
            l <= l_tau && signed_bin(k, dims.n()).unsigned_abs() as usize <= k_v
        })
        .collect();
    let vis_paths: Vec<(usize, usize)> = visible.iter().map(|&i| paths[i]).collect();
    let xc = build_xc(&impulse, &vis_paths, &window)?;
    let est = ls_estimate(&xc, &xc.observe(y))?;
    let mut h_hat = vec![Complex64::new(0.0, 0.0); paths.len()];
    for (slot, h) in visible.iter().zip(est.h_hat) {
        h_hat[*slot] = h;
    }
    Ok(ChannelEstimate {
        h_hat,
        paths: paths.to_vec(),
        residual_norm: est.residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_dd_channel, ChannelRealization, PathParams};
    use crate::frame::{make_pilot_grid, pilot_only_frame, PilotGrid};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dims(m: usize, n: usize) -> FrameDims {
        FrameDims::new(m, n).unwrap()
    }

    fn channel(d: FrameDims, paths: &[(Complex64, usize, usize)]) -> ChannelRealization {
        ChannelRealization::new(
            d,
            paths
                .iter()
                .map(|&(h, l, k)| PathParams::new(h, l, k).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_shift_column_is_pilot() {
        let d = dims(16, 8);
        let p = make_pilot_grid(d, (4, 2), (3, 3), 5).unwrap();
        let x1 = pilot_only_frame(&p);
        let obs: Vec<_> = p.cells().collect();
        let xc = build_xc(&x1, &[(0, 0)], &obs).unwrap();
        assert_eq!(xc.rows(), 9);
        for (row, &(m, n)) in xc.row_cells().iter().enumerate() {
            assert_eq!(xc.entries()[[row, 0]], c(p.symbol_at(m, n).unwrap(), 0.0));
        }
    }

    #[test]
    fn single_pilot_shift_by_hand() {
        let d = dims(8, 4);
        let mut x1 = DDFrame::zeros(d);
        x1.set(0, 0, c(1.0, 0.0));
        let all: Vec<_> = (0..8).flat_map(|m| (0..4).map(move |n| (m, n))).collect();
        let xc = build_xc(&x1, &[(2, 1)], &all).unwrap();
        let nonzero: Vec<_> = xc
            .row_cells()
            .iter()
            .zip(xc.entries().column(0))
            .filter(|(_, v)| v.norm() > 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(*nonzero[0].0, (2, 1));
        assert!((nonzero[0].1 - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(observation_cells(&x1, &[(2, 1)]), vec![(2, 1)]);
        // Rows come out in flat-index order.
        let cells = xc.row_cells();
        assert!(cells
            .windows(2)
            .all(|w| w[0].0 * 4 + w[0].1 < w[1].0 * 4 + w[1].1));
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let d = dims(16, 8);
        let p = make_pilot_grid(d, (0, 0), (2, 2), 1).unwrap();
        let x1 = pilot_only_frame(&p);
        let paths = [(0, 0), (5, 3)];
        let xc = build_xc(&x1, &paths, &observation_cells(&x1, &paths)).unwrap();
        let dot: Complex64 = xc
            .entries()
            .column(0)
            .iter()
            .zip(xc.entries().column(1))
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert_eq!(dot, c(0.0, 0.0));
    }

    #[test]
    fn build_errors() {
        let d = dims(8, 8);
        let x1 = DDFrame::zeros(d);
        assert!(matches!(
            build_xc(&x1, &[(1, 1), (1, 1)], &[(0, 0)]),
            Err(Error::DuplicatePath { .. })
        ));
        assert!(matches!(
            build_xc(&x1, &[(1, 1)], &[]),
            Err(Error::EmptyObservation)
        ));
        assert!(build_xc(&x1, &[(9, 1)], &[(0, 0)]).is_err());
        assert!(build_xc(&x1, &[(1, 1)], &[(8, 0)]).is_err());
    }

    #[test]
    fn exact_single_path() {
        let d = dims(32, 16);
        let p = PilotGrid::centered(d, (8, 6), 3).unwrap();
        let x1 = pilot_only_frame(&p);
        let h = c(0.7, -0.2);
        let y = apply_dd_channel(&x1, &channel(d, &[(h, 4, 3)])).unwrap();
        let xc = build_xc(&x1, &[(4, 3)], &observation_cells(&x1, &[(4, 3)])).unwrap();
        let est = ls_estimate(&xc, &xc.observe(&y)).unwrap();
        assert!((est.h_hat[0] - h).norm() < 1e-9);
        assert!(est.residual_norm < 1e-9);
    }

    #[test]
    fn exact_three_paths_with_wrap() {
        // Pilot at the top of the frame so the delayed images wrap and pick
        // up the a_p factor.
        let d = dims(64, 16);
        let p = make_pilot_grid(d, (0, 2), (10, 6), 8).unwrap();
        let x1 = pilot_only_frame(&p);
        let gains = [
            Complex64::from_polar(1.0, 0.3),
            Complex64::from_polar(10f64.powf(-3.0 / 20.0), 2.1),
            Complex64::from_polar(10f64.powf(-6.0 / 20.0), -1.4),
        ];
        let bins = [(3, 2), (7, 5), (60, 9)];
        let ch = channel(d, &[(gains[0], 3, 2), (gains[1], 7, 5), (gains[2], 60, 9)]);
        let y = apply_dd_channel(&x1, &ch).unwrap();
        let xc = build_xc(&x1, &bins, &observation_cells(&x1, &bins)).unwrap();
        let est = ls_estimate(&xc, &xc.observe(&y)).unwrap();
        let err: f64 = gains
            .iter()
            .zip(&est.h_hat)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn zero_observation_gives_zero_gains() {
        let d = dims(16, 8);
        let p = PilotGrid::centered(d, (4, 4), 1).unwrap();
        let x1 = pilot_only_frame(&p);
        let bins = [(1, 1), (3, 2)];
        let xc = build_xc(&x1, &bins, &observation_cells(&x1, &bins)).unwrap();
        let est = ls_estimate(&xc, &vec![c(0.0, 0.0); xc.rows()]).unwrap();
        assert!(est.h_hat.iter().all(|h| h.norm() == 0.0));
    }

    #[test]
    fn singular_and_mismatched_systems() {
        let d = dims(8, 8);
        let mut x1 = DDFrame::zeros(d);
        x1.set(0, 0, c(1.0, 0.0));
        // Second path has no pilot energy on the chosen rows: zero column.
        let xc = build_xc(&x1, &[(0, 0), (3, 3)], &[(0, 0), (1, 1)]).unwrap();
        assert!(matches!(
            ls_estimate(&xc, &[c(1.0, 0.0), c(0.0, 0.0)]),
            Err(Error::SingularSystem { .. })
        ));
        assert!(matches!(
            ls_estimate(&xc, &[c(1.0, 0.0)]),
            Err(Error::DimsMismatch(_))
        ));
        let under = build_xc(&x1, &[(0, 0), (3, 3)], &[(0, 0)]).unwrap();
        assert!(ls_estimate(&under, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_h(&[c(1.0, 2.0)], &[c(1.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(mse_h(&[c(1.0, 0.0)], &[c(0.0, 0.0)]).unwrap(), 1.0);
        let v = mse_h(&[c(1.0, 1.0), c(0.5, 0.0)], &[c(1.0, 0.0), c(0.5, 0.0)]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(mse_h(&[c(1.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn single_pilot_reads_response_cells() {
        let d = dims(64, 32);
        let data = crate::frame::make_data_frame(d, &crate::frame::QamConstellation::qpsk(), 4);
        let center = (32, 16);
        let x = crate::frame::make_single_pilot_frame(&data, center, 8.0, 10, 6).unwrap();
        let gains = [c(0.8, 0.1), c(-0.2, 0.4)];
        let ch = channel(d, &[(gains[0], 2, 1), (gains[1], 9, 5)]);
        let y = apply_dd_channel(&x, &ch).unwrap();
        let est = single_pilot_estimate(&y, center, 8.0, (10, 6), &[(2, 1), (9, 5)]).unwrap();
        for (a, b) in gains.iter().zip(&est.h_hat) {
            assert!((a - b).norm() < 1e-12);
        }
        // A path beyond the guard's delay reach is invisible to the baseline.
        let ch = channel(d, &[(gains[0], 2, 1), (gains[1], 20, 5)]);
        let y = apply_dd_channel(&x, &ch).unwrap();
        let est = single_pilot_estimate(&y, center, 8.0, (10, 6), &[(2, 1), (20, 5)]).unwrap();
        assert_eq!(est.h_hat[1], c(0.0, 0.0));
        assert!(single_pilot_estimate(&y, (5, 16), 8.0, (10, 6), &[(2, 1)]).is_err());
    }

    proptest! {
        #[test]
        fn residual_orthogonal_and_order_invariant(seed in 0u64..1000, noise_seed in any::<u64>()) {
            let d = dims(32, 16);
            let p = PilotGrid::centered(d, (6, 5), seed).unwrap();
            let x1 = pilot_only_frame(&p);
            let bins = [(1, 0), (4, 3), (9, 6)];
            let gains = [c(1.0, 0.0), c(0.0, 0.7), c(-0.3, 0.3)];
            let ch = channel(d, &[(gains[0], 1, 0), (gains[1], 4, 3), (gains[2], 9, 6)]);
            let y = crate::channel::add_awgn(&apply_dd_channel(&x1, &ch).unwrap(), 5.0, 1.0, noise_seed);

            let xc = build_xc(&x1, &bins, &observation_cells(&x1, &bins)).unwrap();
            let obs = xc.observe(&y);
            let est = ls_estimate(&xc, &obs).unwrap();
            let a = xc.entries();
            let scale: f64 = obs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
                * a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for col in 0..3 {
                let mut g = c(0.0, 0.0);
                for row in 0..xc.rows() {
                    let fit: Complex64 = (0..3).map(|p| a[[row, p]] * est.h_hat[p]).sum();
                    g += a[[row, col]].conj() * (obs[row] - fit);
                }
                prop_assert!(g.norm() <= 1e-8 * scale);
            }

            let rev = [bins[2], bins[0], bins[1]];
            let xc2 = build_xc(&x1, &rev, &observation_cells(&x1, &rev)).unwrap();
            let est2 = ls_estimate(&xc2, &xc2.observe(&y)).unwrap();
            prop_assert!((est2.h_hat[0] - est.h_hat[2]).norm() < 1e-10);
            prop_assert!((est2.h_hat[1] - est.h_hat[0]).norm() < 1e-10);
            prop_assert!((est2.h_hat[2] - est.h_hat[1]).norm() < 1e-10);
        }
    }
}
