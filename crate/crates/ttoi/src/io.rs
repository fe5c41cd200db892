//! Binary tensor persistence, trajectory file parsing, and CSV reporting.
//!
//! Tensor files are platform independent and little-endian throughout:
//! 8 magic bytes `TTOITNSR`, a u32 version (currently 1), a u32 order d,
//! d u64 dimensions, then ∏dims f64 payload values in vectorize order.
//! Malformed files produce format errors naming the byte offset.
//!
//! Trajectory files are UTF-8 with one 1-based integer state per line;
//! blank lines are ignored. CSV output uses a header row, comma separators,
//! LF line endings, and floats at full round-trip precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::markov::Trajectory;
use crate::simlab::{ExperimentRecord, RankSelectionRecord};
use crate::tensor::{checked_product, DenseTensor};

pub const TENSOR_MAGIC: [u8; 8] = *b"TTOITNSR";
pub const TENSOR_VERSION: u32 = 1;

/// Serialize a tensor to the binary format.
pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&TENSOR_MAGIC)?;
    w.write_all(&TENSOR_VERSION.to_le_bytes())?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &p in t.dims() {
        w.write_all(&(p as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn take<'a>(buf: &'a [u8], offset: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    if buf.len() < *offset + n {
        return Err(Error::format(
            *offset as u64,
            format!(
                "truncated file: expected {} bytes for {} at offset {}, only {} remain",
                n,
                what,
                *offset,
                buf.len() - *offset
            ),
        ));
    }
    let slice = &buf[*offset..*offset + n];
    *offset += n;
    Ok(slice)
}

/// Deserialize a tensor, validating magic, version, and payload length.
pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    read_tensor_bytes(&buf)
}

pub fn read_tensor_bytes(buf: &[u8]) -> Result<DenseTensor> {
    let mut offset = 0usize;
    let magic = take(buf, &mut offset, 8, "magic")?;
    if magic != TENSOR_MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected {:?}", magic, TENSOR_MAGIC),
        ));
    }
    let version_at = offset;
    let version = u32::from_le_bytes(take(buf, &mut offset, 4, "version")?.try_into().unwrap());
    if version != TENSOR_VERSION {
        return Err(Error::format(
            version_at as u64,
            format!("unsupported version {}, expected {}", version, TENSOR_VERSION),
        ));
    }
    let order_at = offset;
    let order = u32::from_le_bytes(take(buf, &mut offset, 4, "order")?.try_into().unwrap());
    if order == 0 {
        return Err(Error::format(order_at as u64, "order must be >= 1".to_string()));
    }
    let mut dims = Vec::with_capacity(order as usize);
    for k in 0..order {
        let at = offset;
        let p = u64::from_le_bytes(
            take(buf, &mut offset, 8, "dimension")?.try_into().unwrap(),
        );
        if p == 0 || p > usize::MAX as u64 {
            return Err(Error::format(
                at as u64,
                format!("dimension {} has invalid value {}", k + 1, p),
            ));
        }
        dims.push(p as usize);
    }
    let count = checked_product(&dims)?;
    let payload_at = offset;
    let expected = count
        .checked_mul(8)
        .ok_or_else(|| Error::format(payload_at as u64, "payload length overflows".to_string()))?;
    let remaining = buf.len() - offset;
    if remaining != expected {
        return Err(Error::format(
            payload_at as u64,
            format!(
                "payload length mismatch: header dims {:?} require {} bytes, found {}",
                dims, expected, remaining
            ),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in buf[offset..].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    DenseTensor::new(dims, data)
}

/// Parse a trajectory file: one 1-based state per line, blank lines ignored.
pub fn read_trajectory(path: &Path, p: usize) -> Result<Trajectory> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let label: u64 = trimmed.parse().map_err(|_| {
            Error::format(
                (lineno + 1) as u64,
                format!("line {}: expected a positive integer, got {:?}", lineno + 1, trimmed),
            )
        })?;
        labels.push(label);
    }
    Trajectory::from_one_based(p, &labels)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for label in traj.one_based() {
        writeln!(w, "{}", label)?;
    }
    w.flush()?;
    Ok(())
}

/// Format a float at full round-trip precision for CSV output.
pub fn csv_float(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Write experiment records with the stable schema
/// `method,cell,replication,error,wall_ms`.
pub fn write_experiment_csv<W: Write>(out: &mut W, records: &[ExperimentRecord]) -> Result<()> {
    out.write_all(b"method,cell,replication,error,wall_ms\n")?;
    for r in records {
        for (rep, (err, wall)) in r.errors.iter().zip(&r.wall_ms).enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.method.name(),
                r.cell,
                rep,
                csv_float(*err),
                csv_float(*wall)
            )?;
        }
        if let Some(msg) = &r.failure {
            writeln!(out, "{},{},failed,{:?},", r.method.name(), r.cell, msg)?;
        }
    }
    Ok(())
}

/// Write rank-selection records with the stable schema
/// `cell,replication,selected,hit,wall_ms`.
pub fn write_rank_selection_csv<W: Write>(
    out: &mut W,
    records: &[RankSelectionRecord],
) -> Result<()> {
    out.write_all(b"cell,replication,selected,hit,wall_ms\n")?;
    for r in records {
        for (rep, (sel, wall)) in r.selections.iter().zip(&r.wall_ms).enumerate() {
            let selected = sel
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(
                out,
                "{},{},{},{},{}",
                r.cell,
                rep,
                selected,
                (sel == &r.true_ranks) as u8,
                csv_float(*wall)
            )?;
        }
        if let Some(msg) = &r.failure {
            writeln!(out, "{},failed,{:?},,", r.cell, msg)?;
        }
    }
    Ok(())
}

/// Write an objective trace as `iteration,objective` rows.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[f64]) -> Result<()> {
    out.write_all(b"iteration,objective\n")?;
    for (t, obj) in trace.iter().enumerate() {
        writeln!(out, "{},{}", t, csv_float(*obj))?;
    }
    Ok(())
}
