//! Readers for dense CSV matrices, scaling-point tables and CIFAR-10
//! binary batches.

use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

/// Bytes per CIFAR-10 record: one label byte and 3×32×32 pixel bytes.
pub const CIFAR_RECORD_LEN: usize = 3073;

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

/// Numeric rows of a CSV file. A first line that does not parse as numbers
/// is taken as a header; `#` starts a comment line.
fn numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(k as u64 + 1, |p| p.line());
            Error::format(path, format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if first.len() != values.len() {
                        return Err(Error::format(
                            path,
                            format!("line {line}"),
                            format!("expected {} fields, found {}", first.len(), values.len()),
                        ));
                    }
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::format(path, format!("line {line}"), format!("non-finite value {v}")));
                }
                rows.push(values);
            }
            Err(_) if rows.is_empty() && line == 1 => continue,
            Err(e) => {
                return Err(Error::format(path, format!("line {line}"), e.to_string()));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::format(path, "end of file", "no numeric rows"));
    }
    Ok(rows)
}

/// Dense matrix, one CSV row per sample (or token).
pub fn read_csv_matrix(path: &Path) -> Result<Matrix> {
    let rows = numeric_rows(path)?;
    let cols = rows[0].len();
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// `(x, y)` pairs from a two-column CSV, e.g. spike count and error.
pub fn read_points_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = numeric_rows(path)?;
    if rows[0].len() != 2 {
        return Err(Error::format(
            path,
            "line 1",
            format!("expected 2 columns, found {}", rows[0].len()),
        ));
    }
    Ok(rows.into_iter().map(|r| (r[0], r[1])).collect())
}

/// Concatenates CIFAR-10 binary batches into a `records × 3072` matrix of
/// raw pixel values in `[0, 255]`, plus the labels.
pub fn read_cifar_batches<P: AsRef<Path>>(paths: &[P]) -> Result<(Matrix, Vec<u8>)> {
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
            let whole = bytes.len() / CIFAR_RECORD_LEN * CIFAR_RECORD_LEN;
            return Err(Error::format(
                path,
                format!("byte {whole}"),
                format!(
                    "file length {} is not a positive multiple of the {CIFAR_RECORD_LEN}-byte record",
                    bytes.len()
                ),
            ));
        }
        for (r, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
            if record[0] > 9 {
                return Err(Error::format(
                    path,
                    format!("byte {}", r * CIFAR_RECORD_LEN),
                    format!("label {} is not in 0..=9", record[0]),
                ));
            }
            labels.push(record[0]);
            pixels.extend(record[1..].iter().map(|&b| f64::from(b)));
        }
    }
    if labels.is_empty() {
        return Err(Error::domain("no CIFAR batch files given"));
    }
    let n = labels.len();
    Ok((Matrix::from_row_iterator(n, CIFAR_RECORD_LEN - 1, pixels), labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, content: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(content).unwrap();
        p
    }

    #[test]
    fn csv_with_header_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "x.csv", b"a,b,c\n# note\n1,2,3\n4, 5 ,6\n");
        let m = read_csv_matrix(&p).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 1)], 5.0);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", b"1,2\n3,x\n");
        let err = read_csv_matrix(&p).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let p = write(&dir, "ragged.csv", b"1,2\n3\n");
        assert!(read_csv_matrix(&p).unwrap_err().to_string().contains("line 2"));
        let p = write(&dir, "empty.csv", b"");
        assert!(read_csv_matrix(&p).is_err());
        assert!(read_csv_matrix(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn points() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", b"spikes,error\n1000,1.02\n2000,0.73\n");
        assert_eq!(read_points_csv(&p).unwrap(), vec![(1000.0, 1.02), (2000.0, 0.73)]);
        let p = write(&dir, "three.csv", b"1,2,3\n");
        assert!(read_points_csv(&p).is_err());
    }

    #[test]
    fn cifar_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for r in 0..3u8 {
            bytes.push(r);
            bytes.extend((0..3072).map(|i| ((i + r as usize) % 256) as u8));
        }
        let p = write(&dir, "data_batch_1.bin", &bytes);
        let (x, labels) = read_cifar_batches(&[&p, &p]).unwrap();
        assert_eq!(x.shape(), (6, 3072));
        assert_eq!(labels, vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(x[(1, 0)], 1.0);
        assert_eq!(x[(2, 3071)], ((3071 + 2) % 256) as f64);

        let p = write(&dir, "short.bin", &bytes[..5000]);
        let err = read_cifar_batches(&[&p]).unwrap_err().to_string();
        assert!(err.contains("byte 3073"), "{err}");
    }
}
