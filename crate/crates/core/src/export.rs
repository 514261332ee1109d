//! Range-Doppler map export: magnitude CSV and 8-bit PGM image.
//!
//! CSV columns follow the correlation's own index names: `k` is the delay
//! shift (row), `l` the Doppler shift (column). The PGM is `N` pixels wide
//! and `M` tall, with `20 log10 |Z|` min-max scaled to 0..=255. Magnitudes
//! more than 240 dB below the peak are clamped to the floor.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::faor::RangeDopplerMap;
use crate::{Error, Result};

pub const RDM_CSV_HEADER: &str = "k,l,magnitude";

const FLOOR_DB: f64 = -240.0;

pub fn write_rdm_csv<W: Write>(mut out: W, rdm: &RangeDopplerMap) -> std::io::Result<()> {
    writeln!(out, "{RDM_CSV_HEADER}")?;
    for ((k, l), v) in rdm.z().indexed_iter() {
        writeln!(out, "{k},{l},{}", v.norm())?;
    }
    Ok(())
}

/// Grayscale log-magnitude pixels in row-major order.
pub fn rdm_pixels(rdm: &RangeDopplerMap) -> Vec<u8> {
    let mag = rdm.magnitude();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return vec![0; mag.len()];
    }
    let db: Vec<f64> = mag
        .iter()
        .map(|&v| (20.0 * (v / peak).log10()).max(FLOOR_DB))
        .collect();
    let lo = db.iter().copied().fold(f64::INFINITY, f64::min);
    let span = -lo;
    if span <= 0.0 {
        return vec![255; mag.len()];
    }
    db.iter()
        .map(|&d| (255.0 * (d - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn write_rdm_pgm<W: Write>(mut out: W, rdm: &RangeDopplerMap) -> std::io::Result<()> {
    let (m, n) = rdm.dims().shape();
    write!(out, "P5\n{n} {m}\n255\n")?;
    out.write_all(&rdm_pixels(rdm))
}

/// Writes `<stem>.csv` and `<stem>.pgm`, returning both paths.
pub fn export_rdm(rdm: &RangeDopplerMap, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv = stem.with_extension("csv");
    let pgm = stem.with_extension("pgm");
    let mut w = BufWriter::new(File::create(&csv)?);
    write_rdm_csv(&mut w, rdm)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&pgm)?);
    write_rdm_pgm(&mut w, rdm)?;
    w.flush()?;
    Ok((csv, pgm))
}

/// Reads a magnitude CSV written by [`write_rdm_csv`] back into an `M x N` array.
pub fn read_rdm_csv(path: &Path) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == RDM_CSV_HEADER => {}
        _ => {
            return Err(Error::ConfigInvalid(format!(
                "{}: missing CSV header",
                path.display()
            )))
        }
    }
    let mut cells = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::ConfigInvalid(format!("malformed RDM row {line:?}"));
        let mut it = line.split(',');
        let k: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let l: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        cells.push((k, l, v));
    }
    let m = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let n = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let mut out = Array2::zeros((m, n));
    for (k, l, v) in cells {
        out[[k, l]] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faor::RadarMode;
    use num_complex::Complex64;

    fn delta(m: usize, n: usize, at: (usize, usize)) -> RangeDopplerMap {
        let mut z = Array2::zeros((m, n));
        z[[at.0, at.1]] = Complex64::new(0.0, 2.5);
        RangeDopplerMap::new(z, RadarMode::Monostatic).unwrap()
    }

    #[test]
    fn csv_rows_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let z = Array2::from_shape_fn((4, 4), |(a, b)| {
            Complex64::new(a as f64 * 0.3, b as f64 / 7.0)
        });
        let rdm = RangeDopplerMap::new(z, RadarMode::Bistatic).unwrap();
        let (csv, _) = export_rdm(&rdm, &dir.path().join("map")).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,l,magnitude");
        assert_eq!(lines.len(), 17);
        let back = read_rdm_csv(&csv).unwrap();
        for (a, b) in back.iter().zip(rdm.magnitude().iter()) {
            assert!((a - b).abs() <= 1e-6 * b.max(1.0));
        }
    }

    #[test]
    fn delta_pgm_has_one_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let rdm = delta(8, 5, (3, 2));
        let (_, pgm) = export_rdm(&rdm, &dir.path().join("d")).unwrap();
        let bytes = std::fs::read(pgm).unwrap();
        let header = b"P5\n5 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let pixels = &bytes[header.len()..];
        assert_eq!(pixels.len(), 40);
        assert_eq!(pixels.iter().filter(|&&p| p == 255).count(), 1);
        assert_eq!(pixels[3 * 5 + 2], 255);
    }

    #[test]
    fn zero_map_is_black() {
        let rdm = RangeDopplerMap::new(Array2::zeros((3, 3)), RadarMode::Monostatic).unwrap();
        assert!(rdm_pixels(&rdm).iter().all(|&p| p == 0));
    }

    #[test]
    fn io_error_surfaces() {
        let rdm = delta(2, 2, (0, 0));
        let err = export_rdm(&rdm, Path::new("/nonexistent/dir/map")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
