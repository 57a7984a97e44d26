//! Binary checkpoints of grid states.
//!
//! Little-endian layout: magic `FLCK`, format version (u32), dimension
//! (u32, always 2), cells per axis (u32), domain side (f64), time (f64),
//! model id (u32), kernel family id (u32), kernel parameter (f64), horizon
//! flag (u32), horizon (f64), then `rho`, `u1`, `u2` as row-major f64. The
//! far-field velocity is recovered from the pinned boundary ring.

use std::io::{Read, Write};

use super::{Grid, GridParams, GridState2D};
use crate::error::{FlockError, Result};
use crate::kernels::{InfluenceKernel, KernelFamily};
use crate::Model;

const MAGIC: &[u8; 4] = b"FLCK";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(state: &GridState2D, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [VERSION, 2, state.grid.n as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&state.grid.l.to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&state.model.id().to_le_bytes())?;
    w.write_all(&state.kernel.family.id().to_le_bytes())?;
    w.write_all(&state.kernel.family.param().to_le_bytes())?;
    w.write_all(&u32::from(state.kernel.horizon.is_some()).to_le_bytes())?;
    w.write_all(&state.kernel.horizon.unwrap_or(0.0).to_le_bytes())?;
    for field in [&state.rho, &state.u1, &state.u2] {
        for v in field.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads a checkpoint back into a state with the given solver parameters.
pub fn read_checkpoint<R: Read>(mut r: R, params: GridParams) -> Result<GridState2D> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FlockError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(FlockError::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut r)?;
    if dim != 2 {
        return Err(FlockError::Checkpoint(format!("unsupported dimension {dim}")));
    }
    let n = read_u32(&mut r)? as usize;
    let l = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let model = Model::from_id(read_u32(&mut r)?).ok_or_else(|| FlockError::Checkpoint("unknown model id".into()))?;
    let family_id = read_u32(&mut r)?;
    let param = read_f64(&mut r)?;
    let family = KernelFamily::from_id(family_id, param)
        .ok_or_else(|| FlockError::Checkpoint(format!("unknown kernel family {family_id}")))?;
    let has_horizon = read_u32(&mut r)? != 0;
    let horizon = read_f64(&mut r)?;
    let mut kernel = InfluenceKernel::new(family)?;
    if has_horizon {
        kernel = kernel.with_horizon(horizon)?;
    }
    let grid = Grid::new(n, l)?;
    let mut fields = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
    for field in &mut fields {
        for v in field.iter_mut() {
            *v = read_f64(&mut r)?;
        }
    }
    let [rho, u1, u2] = fields;
    let u_inf = [u1[0], u2[0]];
    let mut s = GridState2D::new(model, kernel, grid, rho, u1, u2, u_inf, params)?;
    s.t = t;
    Ok(s)
}
