//! Binary checkpoints and CSV dumps of field states.
//!
//! Checkpoint layout, all little-endian: the 8-byte magic `RADSCAT1`, then
//! `n: u32`, `k: i64` (`-1` for `k = ∞`), `m: u64`, `r_max: f64`, `t: f64`,
//! followed by `m` pairs `(re w_i, im w_i)` of `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use super::{FieldState, RadialGrid};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldProfile, Order};

const MAGIC: &[u8; 8] = b"RADSCAT1";

/// Decoded checkpoint contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub profile: ManifoldProfile,
    pub r_max: f64,
    pub t: f64,
    pub w: Vec<Complex64>,
}

impl Checkpoint {
    /// Attaches the samples to `grid`, which must match the stored header.
    pub fn into_state(self, grid: Arc<RadialGrid>) -> Result<FieldState> {
        if *grid.profile() != self.profile || grid.r_max() != self.r_max || grid.m() != self.w.len() {
            return Err(Error::Domain(format!(
                "checkpoint for {} (r_max = {}, m = {}) does not match grid {} (r_max = {}, m = {})",
                self.profile,
                self.r_max,
                self.w.len(),
                grid.profile(),
                grid.r_max(),
                grid.m()
            )));
        }
        Ok(FieldState { grid, t: self.t, w: self.w })
    }
}

pub fn write_checkpoint(path: &Path, state: &FieldState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint_to(&mut out, state)?;
    out.flush()?;
    Ok(())
}

pub fn write_checkpoint_to(out: &mut impl Write, state: &FieldState) -> Result<()> {
    let profile = state.grid.profile();
    out.write_all(MAGIC)?;
    out.write_all(&profile.n.to_le_bytes())?;
    let k: i64 = match profile.k {
        Order::Finite(k) => k as i64,
        Order::Infinite => -1,
    };
    out.write_all(&k.to_le_bytes())?;
    out.write_all(&(state.w.len() as u64).to_le_bytes())?;
    out.write_all(&state.grid.r_max().to_le_bytes())?;
    out.write_all(&state.t.to_le_bytes())?;
    for z in &state.w {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint_from(&mut BufReader::new(File::open(path)?))
}

fn take<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_checkpoint_from(input: &mut impl Read) -> Result<Checkpoint> {
    if &take::<8>(input)? != MAGIC {
        return Err(Error::Domain("not a checkpoint file (bad magic)".into()));
    }
    let n = u32::from_le_bytes(take(input)?);
    let k = match i64::from_le_bytes(take(input)?) {
        -1 => Order::Infinite,
        k if k >= 0 && k <= u32::MAX as i64 => Order::Finite(k as u32),
        k => return Err(Error::Domain(format!("corrupt checkpoint: order {k}"))),
    };
    let profile = ManifoldProfile::new(n, k)?;
    let m = u64::from_le_bytes(take(input)?) as usize;
    let r_max = f64::from_le_bytes(take(input)?);
    let t = f64::from_le_bytes(take(input)?);
    let mut w = Vec::with_capacity(m.min(1 << 24));
    for _ in 0..m {
        let re = f64::from_le_bytes(take(input)?);
        let im = f64::from_le_bytes(take(input)?);
        w.push(Complex64::new(re, im));
    }
    Ok(Checkpoint { profile, r_max, t, w })
}

/// Header of [`write_state_csv`].
pub const STATE_CSV_HEADER: &str = "r,u_re,u_im,abs_u,w_re,w_im";

/// One row per node with `u` and `w`.
pub fn write_state_csv(path: &Path, state: &FieldState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{STATE_CSV_HEADER}")?;
    let u = state.u();
    for ((r, ui), wi) in state.grid.nodes().iter().zip(&u).zip(&state.w) {
        writeln!(out, "{r},{},{},{},{},{}", ui.re, ui.im, ui.norm(), wi.re, wi.im)?;
    }
    out.flush()?;
    Ok(())
}
