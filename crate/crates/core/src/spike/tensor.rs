use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::train::SpikeTrain;
use crate::error::{Error, Result};

/// Binary spikes indexed `(row, col, t)`, stored as one train per cell in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct SpikeTensor {
    rows: usize,
    cols: usize,
    steps: usize,
    trains: Vec<SpikeTrain>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    rows: usize,
    cols: usize,
    steps: usize,
    trains: Vec<SpikeTrain>,
}

impl TryFrom<TensorRepr> for SpikeTensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        SpikeTensor::from_trains(r.rows, r.cols, r.trains)
            .and_then(|t| {
                if t.steps == r.steps {
                    Ok(t)
                } else {
                    Err(Error::domain(format!(
                        "declared {} timesteps but trains hold {}",
                        r.steps, t.steps
                    )))
                }
            })
    }
}

impl From<SpikeTensor> for TensorRepr {
    fn from(t: SpikeTensor) -> Self {
        TensorRepr {
            rows: t.rows,
            cols: t.cols,
            steps: t.steps,
            trains: t.trains,
        }
    }
}

/// Magic bytes opening a binary spike-tensor file.
pub const SPKT_MAGIC: [u8; 4] = *b"SPKT";
/// Current binary format version.
pub const SPKT_VERSION: u16 = 1;
const SPKT_HEADER_LEN: usize = 4 + 2 + 4 * 3;

impl SpikeTensor {
    pub fn zeros(rows: usize, cols: usize, steps: usize) -> Result<Self> {
        check_dims(rows, cols, steps)?;
        Ok(SpikeTensor {
            rows,
            cols,
            steps,
            trains: vec![SpikeTrain::zeros(steps); rows * cols],
        })
    }

    /// Assembles a tensor from `rows * cols` equal-length trains in row-major
    /// order.
    pub fn from_trains(rows: usize, cols: usize, trains: Vec<SpikeTrain>) -> Result<Self> {
        if trains.len() != rows * cols {
            return Err(Error::domain(format!(
                "expected {} trains for a {rows}x{cols} tensor, got {}",
                rows * cols,
                trains.len()
            )));
        }
        let steps = trains.first().map_or(0, SpikeTrain::len);
        check_dims(rows, cols, steps)?;
        if let Some(bad) = trains.iter().position(|t| t.len() != steps) {
            return Err(Error::domain(format!(
                "train {bad} has {} timesteps, expected {steps}",
                trains[bad].len()
            )));
        }
        Ok(SpikeTensor {
            rows,
            cols,
            steps,
            trains,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn train(&self, row: usize, col: usize) -> &SpikeTrain {
        assert!(row < self.rows && col < self.cols);
        &self.trains[row * self.cols + col]
    }

    pub fn train_mut(&mut self, row: usize, col: usize) -> &mut SpikeTrain {
        assert!(row < self.rows && col < self.cols);
        &mut self.trains[row * self.cols + col]
    }

    /// The trains of one row, in column order.
    pub fn row(&self, row: usize) -> &[SpikeTrain] {
        &self.trains[row * self.cols..(row + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize, t: usize) -> bool {
        self.train(row, col).get(t)
    }

    pub fn trains(&self) -> &[SpikeTrain] {
        &self.trains
    }

    /// Total number of spike events.
    pub fn count(&self) -> u64 {
        self.trains.iter().map(SpikeTrain::count).sum()
    }

    /// Time-averaged rate of each cell.
    pub fn rates(&self) -> crate::Matrix {
        crate::Matrix::from_fn(self.rows, self.cols, |i, j| {
            self.train(i, j).count() as f64 / self.steps as f64
        })
    }

    /// Writes the binary container: `SPKT`, version (u16), rows, cols and
    /// steps (u32), then `rows*cols*steps` bits in `(row, col, t)` order,
    /// least-significant bit first, zero-padded to a whole byte. All integers
    /// are little-endian.
    pub fn write_spkt<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = |v: usize| {
            u32::try_from(v).map_err(|_| {
                std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32")
            })
        };
        out.write_all(&SPKT_MAGIC)?;
        out.write_all(&SPKT_VERSION.to_le_bytes())?;
        out.write_all(&dim(self.rows)?.to_le_bytes())?;
        out.write_all(&dim(self.cols)?.to_le_bytes())?;
        out.write_all(&dim(self.steps)?.to_le_bytes())?;

        let total_bits = self.rows * self.cols * self.steps;
        let mut payload = vec![0u8; total_bits.div_ceil(8)];
        let mut pos = 0usize;
        for train in &self.trains {
            for t in 0..self.steps {
                if train.get(t) {
                    payload[pos / 8] |= 1 << (pos % 8);
                }
                pos += 1;
            }
        }
        out.write_all(&payload)
    }

    pub fn to_spkt_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_spkt(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses the binary container written by [`SpikeTensor::write_spkt`].
    /// `source` names the input in error messages.
    pub fn read_spkt<R: Read>(mut input: R, source: &std::path::Path) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(source, e))?;
        Self::parse_spkt(&bytes, source)
    }

    pub fn parse_spkt(bytes: &[u8], source: &std::path::Path) -> Result<Self> {
        let bad = |offset: usize, msg: String| Error::format(source, format!("byte {offset}"), msg);
        if bytes.len() < SPKT_HEADER_LEN {
            return Err(bad(
                bytes.len(),
                format!("truncated header ({} of {SPKT_HEADER_LEN} bytes)", bytes.len()),
            ));
        }
        if bytes[..4] != SPKT_MAGIC {
            return Err(bad(0, "missing SPKT magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SPKT_VERSION {
            return Err(bad(4, format!("unsupported version {version}")));
        }
        let read_u32 = |at: usize| {
            u32::from_le_bytes(bytes[at..at + 4].try_into().expect("slice of 4")) as usize
        };
        let (rows, cols, steps) = (read_u32(6), read_u32(10), read_u32(14));
        check_dims(rows, cols, steps).map_err(|e| bad(6, e.to_string()))?;

        let total_bits = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(steps))
            .ok_or_else(|| bad(6, "dimensions overflow".into()))?;
        let payload = &bytes[SPKT_HEADER_LEN..];
        let expected = total_bits.div_ceil(8);
        if payload.len() != expected {
            return Err(bad(
                SPKT_HEADER_LEN + payload.len().min(expected),
                format!("payload is {} bytes, expected {expected}", payload.len()),
            ));
        }

        let mut trains = Vec::with_capacity(rows * cols);
        let mut pos = 0usize;
        for _ in 0..rows * cols {
            let train = SpikeTrain::from_bits((0..steps).map(|k| {
                let p = pos + k;
                payload[p / 8] >> (p % 8) & 1 == 1
            }));
            pos += steps;
            trains.push(train);
        }
        SpikeTensor::from_trains(rows, cols, trains)
    }
}

fn check_dims(rows: usize, cols: usize, steps: usize) -> Result<()> {
    if rows == 0 || cols == 0 || steps == 0 {
        return Err(Error::domain(format!(
            "spike tensor dimensions must be positive, got {rows}x{cols}x{steps}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn sample() -> SpikeTensor {
        let trains = (0..6)
            .map(|k| SpikeTrain::from_bits((0..5).map(|t| (t + k) % 3 == 0)))
            .collect();
        SpikeTensor::from_trains(2, 3, trains).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_spkt_bytes();
        assert_eq!(&bytes[..4], b"SPKT");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &3u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &5u32.to_le_bytes());
        // 30 bits -> 4 payload bytes
        assert_eq!(bytes.len(), 18 + 4);
    }

    #[test]
    fn payload_bit_order() {
        // Single cell, bits 1,0,1,1 -> 0b1101 in the first byte.
        let t = SpikeTensor::from_trains(1, 1, vec![SpikeTrain::from_bits([true, false, true, true])])
            .unwrap();
        let bytes = t.to_spkt_bytes();
        assert_eq!(bytes[18], 0b1101);
    }

    #[test]
    fn binary_roundtrip() {
        let t = sample();
        let back = SpikeTensor::parse_spkt(&t.to_spkt_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_corrupt_inputs() {
        let p = Path::new("mem");
        let mut bytes = sample().to_spkt_bytes();
        assert!(SpikeTensor::parse_spkt(&bytes[..10], p).is_err());
        bytes.push(0);
        let err = SpikeTensor::parse_spkt(&bytes, p).unwrap_err().to_string();
        assert!(err.contains("payload"), "{err}");
        let mut bad_magic = sample().to_spkt_bytes();
        bad_magic[0] = b'X';
        assert!(SpikeTensor::parse_spkt(&bad_magic, p).is_err());
        let mut zero_dim = sample().to_spkt_bytes();
        zero_dim[6..10].copy_from_slice(&0u32.to_le_bytes());
        assert!(SpikeTensor::parse_spkt(&zero_dim, p).is_err());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let t = sample();
        let json = serde_json::to_string(&t).unwrap();
        let back: SpikeTensor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"rows":1,"cols":2,"steps":2,"trains":["01","011"]}"#;
        assert!(serde_json::from_str::<SpikeTensor>(bad).is_err());
    }

    #[test]
    fn dims_must_be_positive() {
        assert!(SpikeTensor::zeros(0, 1, 1).is_err());
        assert!(SpikeTensor::zeros(1, 1, 0).is_err());
    }
}
