//! Binary kernel dumps.
//!
//! Layout: magic "WKAM", version u32 little-endian, then dim, N, S, t_start,
//! t_end as little-endian IEEE-754 doubles, followed by the row-major
//! effective entries.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::kernel::CostKernel;

pub const KERNEL_MAGIC: &[u8; 4] = b"WKAM";
pub const KERNEL_VERSION: u32 = 1;

pub fn write_kernel<W: Write>(
    w: &mut W,
    kernel: &CostKernel,
    steps_per_period: usize,
) -> std::io::Result<()> {
    w.write_all(KERNEL_MAGIC)?;
    w.write_all(&KERNEL_VERSION.to_le_bytes())?;
    for v in [
        kernel.grid().dim() as f64,
        kernel.grid().n_per_axis() as f64,
        steps_per_period as f64,
        kernel.t_start(),
        kernel.t_end(),
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in kernel.effective_matrix() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub struct KernelDump {
    pub kernel: CostKernel,
    pub steps_per_period: usize,
}

pub fn read_kernel<R: Read>(r: &mut R) -> Result<KernelDump> {
    let bad = |m: &str| Error::InvalidArgument(format!("kernel dump: {m}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| bad(&format!("short read: {e}")))?;
    if &magic != KERNEL_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut vbuf = [0u8; 4];
    r.read_exact(&mut vbuf)
        .map_err(|e| bad(&format!("short read: {e}")))?;
    if u32::from_le_bytes(vbuf) != KERNEL_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut f = [0u8; 8];
    let mut next = || -> Result<f64> {
        r.read_exact(&mut f)
            .map_err(|e| bad(&format!("short read: {e}")))?;
        Ok(f64::from_le_bytes(f))
    };
    let dim = next()? as usize;
    let n = next()? as usize;
    let s = next()? as usize;
    let t_start = next()?;
    let t_end = next()?;
    let grid = TorusGrid::new(dim, n)?;
    let m = grid.node_count();
    let mut entries = Vec::with_capacity(m * m);
    for _ in 0..m * m {
        entries.push(next()?);
    }
    Ok(KernelDump {
        kernel: CostKernel::from_matrix(grid, t_start, t_end, entries),
        steps_per_period: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrip() {
        let g = TorusGrid::new(1, 8).unwrap();
        let entries: Vec<f64> = (0..64).map(|i| i as f64 * 0.25).collect();
        let k = CostKernel::from_matrix(g, 0.0, 1.0, entries.clone());
        let mut buf = Vec::new();
        write_kernel(&mut buf, &k, 16).unwrap();
        assert_eq!(&buf[..4], b"WKAM");
        let dump = read_kernel(&mut buf.as_slice()).unwrap();
        assert_eq!(dump.steps_per_period, 16);
        assert_eq!(dump.kernel.effective_matrix(), entries);
        assert_eq!(dump.kernel.t_end(), 1.0);
    }

    #[test]
    fn rejects_garbage() {
        let mut buf = b"NOPE".to_vec();
        buf.extend_from_slice(&[0u8; 64]);
        assert!(read_kernel(&mut buf.as_slice()).is_err());
    }
}
