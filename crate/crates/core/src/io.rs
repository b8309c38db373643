//! CMF1 field files.
//!
//! Layout, little-endian: magic `CMF1`, `u32` n, `u32` representation
//! (0 = space, 1 = frequency), `f64` period, then n^2 `(re, im)` f64 pairs in
//! row-major order. Frequency files use the centered ordering of
//! [`crate::spectral`]: row `c1`, column `c2` hold wavenumber
//! `(c1 - n/2, c2 - n/2)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Field, GridSpec, Repr};

const MAGIC: &[u8; 4] = b"CMF1";

pub fn write_field<W: Write>(mut w: W, field: &Field) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    let flag: u32 = match field.repr() {
        Repr::Space => 0,
        Repr::Frequency => 1,
    };
    w.write_all(&flag.to_le_bytes())?;
    w.write_all(&grid.period().to_le_bytes())?;
    for v in field.samples() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let repr = match u32::from_le_bytes(b4) {
        0 => Repr::Space,
        1 => Repr::Frequency,
        other => return Err(Error::Format(format!("unknown representation flag {other}"))),
    };
    r.read_exact(&mut b8)?;
    let period = f64::from_le_bytes(b8);
    let grid = GridSpec::new(n, period).map_err(|e| Error::Format(e.to_string()))?;
    let mut samples = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        samples.push(Complex64::new(re, f64::from_le_bytes(b8)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after samples".into()));
    }
    Field::new(grid, samples, repr)
}

pub fn save_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    read_field(BufReader::new(File::open(path)?))
}
