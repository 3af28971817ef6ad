//! PSD point sets: `freq_hz,level_db` CSV with strictly increasing frequencies.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One spectrum sample, level in dB of the two-sided density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdPoint {
    pub freq_hz: f64,
    pub level_db: f64,
}

/// Checks that frequencies are finite, positive and strictly increasing.
pub fn validate_points(points: &[PsdPoint]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Format("point set is empty".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.freq_hz > 0.0 && p.freq_hz.is_finite()) {
            return Err(Error::Format(format!("row {}: frequency must be finite and > 0, got {}", i + 1, p.freq_hz)));
        }
        if !p.level_db.is_finite() {
            return Err(Error::Format(format!("row {}: level must be finite", i + 1)));
        }
        if i > 0 && p.freq_hz <= points[i - 1].freq_hz {
            return Err(Error::Format(format!(
                "row {}: frequencies must be strictly increasing ({} after {})",
                i + 1,
                p.freq_hz,
                points[i - 1].freq_hz
            )));
        }
    }
    Ok(())
}

pub fn read_points<R: Read>(reader: R) -> Result<Vec<PsdPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["freq_hz", "level_db"] {
        return Err(Error::Format(format!("expected header `freq_hz,level_db`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let points = rdr.deserialize().collect::<std::result::Result<Vec<PsdPoint>, _>>()?;
    validate_points(&points)?;
    Ok(points)
}

pub fn read_points_file(path: &std::path::Path) -> Result<Vec<PsdPoint>> {
    read_points(std::fs::File::open(path)?)
}

pub fn write_points<W: Write>(writer: W, points: &[PsdPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// `n` log-spaced frequencies from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pts = vec![
            PsdPoint { freq_hz: 10.0, level_db: -40.5 },
            PsdPoint { freq_hz: 1e6, level_db: -120.0 },
        ];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("freq_hz,level_db\n"));
        assert_eq!(read_points(&buf[..]).unwrap(), pts);
    }

    #[test]
    fn rejects_unsorted_and_bad_header() {
        assert!(read_points("freq_hz,level_db\n10,-1\n10,-2\n".as_bytes()).is_err());
        assert!(read_points("freq_hz,level_db\n0,-1\n".as_bytes()).is_err());
        assert!(read_points("f,l\n1,2\n".as_bytes()).is_err());
        assert!(read_points("freq_hz,level_db\n".as_bytes()).is_err());
    }

    #[test]
    fn comments_and_whitespace() {
        let pts = read_points("# mask\nfreq_hz, level_db\n1e3, -80\n".as_bytes()).unwrap();
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(10.0, 1e9, 81);
        assert_eq!(g.len(), 81);
        assert!((g[0] - 10.0).abs() < 1e-12);
        assert!((g[80] / 1e9 - 1.0).abs() < 1e-12);
        assert!((g[10] / 100.0 - 1.0).abs() < 1e-12);
    }
}
