//! Field snapshots: little-endian binary and CSV.
//!
//! Binary layout: `u32` ndim, `ndim` x `u64` shape, `ndim` x `f64` lo,
//! `ndim` x `f64` hi, then the values as `f64` in row-major order.

use std::io::{Read, Write};

use crate::error::{invalid, Result};
use crate::heat::grid::GridChart;
use crate::scalar::Real;

pub fn write_binary<T: Real, W: Write>(chart: &GridChart<T>, values: &[T], mut w: W) -> Result<()> {
    w.write_all(&(chart.ndim() as u32).to_le_bytes())?;
    for &s in chart.shape() {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for &v in chart.lo().iter().chain(chart.hi()) {
        w.write_all(&v.f64().to_le_bytes())?;
    }
    for &v in values {
        w.write_all(&v.f64().to_le_bytes())?;
    }
    Ok(())
}

/// Snapshot read back from [`write_binary`].
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let ndim = u32::from_le_bytes(b4) as usize;
    if ndim == 0 || ndim > 16 {
        return invalid("snapshot header has an implausible dimension");
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        r.read_exact(&mut b8)?;
        shape.push(u64::from_le_bytes(b8) as usize);
    }
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            out.push(f64::from_le_bytes(b8));
        }
        Ok(out)
    };
    let lo = read_f64s(ndim)?;
    let hi = read_f64s(ndim)?;
    let values = read_f64s(shape.iter().product())?;
    Ok(Snapshot { shape, lo, hi, values })
}

/// One row per node: coordinates followed by the value.
pub fn write_csv<T: Real, W: Write>(chart: &GridChart<T>, values: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..chart.ndim()).map(|k| format!("x{k}")).collect();
    header.push("value".into());
    wr.write_record(&header)?;
    let mut p = vec![T::zero(); chart.ndim()];
    for (i, v) in values.iter().enumerate() {
        chart.node_into(i, &mut p);
        let mut rec: Vec<String> = p.iter().map(|c| format!("{}", c.f64())).collect();
        rec.push(format!("{}", v.f64()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
