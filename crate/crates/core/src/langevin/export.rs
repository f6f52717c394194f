//! Trajectory export.
//!
//! CSV: a comment line `# model_fingerprint=<hex>, seed=<u64>, dt=<s>`, a
//! column header `time,u_1,v_1,u_2,v_2,…`, then one row per sample.
//!
//! Binary: no header; rows of `1 + 2N` little-endian IEEE-754 binary64
//! values in the same column order, rows stored consecutively.

use std::io::{self, Read, Write};

use super::Trajectory;
use crate::scalar::Real;

pub fn write_csv<T: Real, W: Write>(trajectory: &Trajectory<T>, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "# model_fingerprint={}, seed={}, dt={}",
        trajectory.fingerprint,
        trajectory.seed,
        trajectory.dt.as_f64()
    )?;
    let n = trajectory.n_oscillators();
    let mut header = String::from("time");
    for i in 1..=n {
        header.push_str(&format!(",u_{i},v_{i}"));
    }
    writeln!(out, "{header}")?;
    for (k, t) in trajectory.times.iter().enumerate() {
        write!(out, "{}", t.as_f64())?;
        for i in 0..n {
            write!(out, ",{},{}", trajectory.u[i][k].as_f64(), trajectory.v[i][k].as_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_binary<T: Real, W: Write>(trajectory: &Trajectory<T>, mut out: W) -> io::Result<()> {
    let n = trajectory.n_oscillators();
    for (k, t) in trajectory.times.iter().enumerate() {
        out.write_all(&t.as_f64().to_le_bytes())?;
        for i in 0..n {
            out.write_all(&trajectory.u[i][k].as_f64().to_le_bytes())?;
            out.write_all(&trajectory.v[i][k].as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads rows written by [`write_binary`] for a model of `n_oscillators`.
pub fn read_binary<R: Read>(mut input: R, n_oscillators: usize) -> io::Result<Vec<Vec<f64>>> {
    let width = 1 + 2 * n_oscillators;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % (8 * width) != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated trajectory record"));
    }
    Ok(bytes
        .chunks_exact(8 * width)
        .map(|row| row.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
        .collect())
}
