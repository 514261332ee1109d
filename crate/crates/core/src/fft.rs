//! Thin wrappers over `rustfft` for row-wise and 2D transforms.
//!
//! Plans are cached per thread, so repeated transforms of the same size do not
//! pay planning cost. All transforms here are unnormalized.

use std::cell::RefCell;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Transforms every consecutive chunk of `row_len` samples in `data`.
pub(crate) fn fft_rows(data: &mut [Complex64], row_len: usize, direction: FftDirection) {
    debug_assert_eq!(data.len() % row_len, 0);
    if row_len == 1 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(row_len, direction));
    fft.process(data);
}

/// In-place 2D DFT of a standard-layout `M x N` array.
pub(crate) fn fft2(grid: &mut Array2<Complex64>, direction: FftDirection) {
    let (m, n) = grid.dim();
    {
        let rows = grid
            .as_slice_mut()
            .expect("grids are kept in standard layout");
        fft_rows(rows, n, direction);
    }
    let mut cols = grid.t().as_standard_layout().into_owned();
    fft_rows(
        cols.as_slice_mut().expect("freshly allocated"),
        m,
        direction,
    );
    grid.assign(&cols.t());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft2_matches_direct_dft() {
        let (m, n) = (5, 3);
        let input = Array2::from_shape_fn((m, n), |(a, b)| {
            Complex64::new((a * 3 + b) as f64 * 0.25 - 1.0, (a as f64 - b as f64).sin())
        });
        let mut fast = input.clone();
        fft2(&mut fast, FftDirection::Forward);
        for u in 0..m {
            for v in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..m {
                    for b in 0..n {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((u * a) as f64 / m as f64 + (v * b) as f64 / n as f64);
                        acc += input[[a, b]] * Complex64::from_polar(1.0, ang);
                    }
                }
                assert!((acc - fast[[u, v]]).norm() < 1e-12);
            }
        }
    }
}
