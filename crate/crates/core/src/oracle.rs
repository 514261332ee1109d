//! Brute-force references and the correlation complexity benchmark.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::faor::{cyclic_corr_fft, RadarMode, RangeDopplerMap};
use crate::frame::{DDFrame, FrameDims};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Literal quadruple loop over the 2D cyclic correlation sum, O((MN)^2).
pub fn naive_cyclic_corr(y: &DDFrame, xref: &DDFrame) -> Result<RangeDopplerMap> {
    if y.dims() != xref.dims() {
        return Err(Error::DimsMismatch(format!(
            "received {:?} vs reference {:?}",
            y.dims().shape(),
            xref.dims().shape()
        )));
    }
    let (m_len, n_len) = y.dims().shape();
    let yg = y.grid();
    let xg = xref.grid();
    let mut z = Array2::zeros((m_len, n_len));
    for k in 0..m_len {
        for l in 0..n_len {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..m_len {
                let xm = (m + m_len - k) % m_len;
                for n in 0..n_len {
                    let xn = (n + n_len - l) % n_len;
                    acc += yg[[m, n]] * xg[[xm, xn]].conj();
                }
            }
            z[[k, l]] = acc;
        }
    }
    RangeDopplerMap::new(z, RadarMode::Monostatic)
}

/// Median timings of both correlation paths at one frame size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub t_naive_s: f64,
    pub t_fft_s: f64,
}

impl BenchRow {
    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    pub fn ratio(&self) -> f64 {
        self.t_naive_s / self.t_fft_s
    }
}

pub const BENCH_CSV_HEADER: &str = "M,N,MN,t_naive_s,t_fft_s,ratio";

fn random_frame(dims: FrameDims, seed: u64) -> DDFrame {
    let mut rng = rng_from_seed(seed);
    DDFrame::from_grid(Array2::from_shape_simple_fn(dims.shape(), || {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }))
    .expect("finite samples")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn time_median<F: FnMut()>(repetitions: usize, warmup: usize, mut f: F) -> f64 {
    for _ in 0..warmup {
        f();
    }
    let samples = (0..repetitions.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64()
        })
        .collect();
    median(samples)
}

/// Times the naive and FFT correlation paths on the calling thread.
///
/// Each size gets one discarded warmup call, then the median of
/// `repetitions` timed calls. The FFT path is cheap enough that its timed
/// call is an inner loop sized to run at least about a millisecond, divided
/// back down, so clock resolution does not flatten small sizes.
pub fn benchmark_corr(sizes: &[(usize, usize)], repetitions: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    let mut prev = 0;
    for (i, &(m, n)) in sizes.iter().enumerate() {
        let dims = FrameDims::new(m, n)?;
        if dims.cells() < prev {
            return Err(Error::ConfigInvalid(
                "benchmark sizes must be sorted by M*N".into(),
            ));
        }
        prev = dims.cells();
        let y = random_frame(dims, 2 * i as u64);
        let x = random_frame(dims, 2 * i as u64 + 1);

        let t_naive_s = time_median(repetitions, 1, || {
            std::hint::black_box(naive_cyclic_corr(&y, &x).expect("dims match"));
        });

        let single = time_median(3, 1, || {
            std::hint::black_box(cyclic_corr_fft(&y, &x).expect("dims match"));
        });
        let inner = ((1e-3 / single.max(1e-9)).ceil() as usize).clamp(1, 10_000);
        let t_fft_s = time_median(repetitions, 1, || {
            for _ in 0..inner {
                std::hint::black_box(cyclic_corr_fft(&y, &x).expect("dims match"));
            }
        }) / inner as f64;

        rows.push(BenchRow {
            m,
            n,
            t_naive_s,
            t_fft_s,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log(t)` against `log(MN)`.
pub fn scaling_exponent(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    linear_fit_slope(&logs)
}

/// Ordinary least-squares slope through `(x, y)` pairs.
pub fn linear_fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn write_bench_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "{BENCH_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.9e},{:.9e},{:.4}",
            r.m,
            r.n,
            r.cells(),
            r.t_naive_s,
            r.t_fft_s,
            r.ratio()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_and_zero() {
        let d = FrameDims::new(6, 4).unwrap();
        let mut x = DDFrame::zeros(d);
        x.set(0, 0, Complex64::new(1.0, 0.0));
        let z = naive_cyclic_corr(&x, &x).unwrap();
        assert_eq!(z.z()[[0, 0]], Complex64::new(1.0, 0.0));
        assert_eq!(z.z().iter().filter(|v| v.norm() > 0.0).count(), 1);

        let zero = naive_cyclic_corr(&DDFrame::zeros(d), &random_frame(d, 1)).unwrap();
        assert!(zero.z().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn literal_sum_on_tiny_case() {
        // 2 x 1 grid: Z(k) = Σ_m Y(m) conj(X(m - k)).
        let y = DDFrame::from_grid(ndarray::array![
            [Complex64::new(1.0, 0.0)],
            [Complex64::new(0.0, 2.0)]
        ])
        .unwrap();
        let x = DDFrame::from_grid(ndarray::array![
            [Complex64::new(3.0, 0.0)],
            [Complex64::new(0.0, 1.0)]
        ])
        .unwrap();
        let z = naive_cyclic_corr(&y, &x).unwrap();
        // k=0: 1*3 + 2j*(-j) = 5; k=1: 1*conj(j) + 2j*3 = -j + 6j = 5j.
        assert!((z.z()[[0, 0]] - Complex64::new(5.0, 0.0)).norm() < 1e-15);
        assert!((z.z()[[1, 0]] - Complex64::new(0.0, 5.0)).norm() < 1e-15);
    }

    #[test]
    fn fit_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powi(2)))
            .collect();
        assert!((scaling_exponent(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn benchmark_emits_rows() {
        let rows = benchmark_corr(&[(4, 4), (8, 4)], 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.t_naive_s > 0.0 && r.t_fft_s > 0.0));
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("M,N,MN,t_naive_s,t_fft_s,ratio\n4,4,16,"));
        assert!(benchmark_corr(&[(8, 8), (4, 4)], 1).is_err());
    }
}
