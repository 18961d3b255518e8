//! Binary field dump, little-endian:
//!
//! ```text
//! header: nx u64 | dx f64 | dt f64 | config_hash [u8; 32]
//! frame:  step u64 | eta[0..nx] f64
//! ```

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub nx: u64,
    pub dx: f64,
    pub dt: f64,
    /// Raw SHA-256 of the run configuration; zeros when there is none.
    pub config_hash: [u8; 32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: u64,
    pub eta: Vec<f64>,
}

pub struct DumpWriter<W: Write> {
    inner: W,
    nx: usize,
}

impl<W: Write> DumpWriter<W> {
    pub fn new(mut inner: W, header: DumpHeader) -> Result<Self> {
        inner.write_all(&header.nx.to_le_bytes())?;
        inner.write_all(&header.dx.to_le_bytes())?;
        inner.write_all(&header.dt.to_le_bytes())?;
        inner.write_all(&header.config_hash)?;
        Ok(Self { inner, nx: header.nx as usize })
    }

    pub fn write_frame(&mut self, step: u64, eta: &[f64]) -> Result<()> {
        if eta.len() != self.nx {
            return Err(Error::Numerical(format!("frame has {} values, header says {}", eta.len(), self.nx)));
        }
        let mut buf = Vec::with_capacity(8 * (eta.len() + 1));
        buf.extend_from_slice(&step.to_le_bytes());
        for v in eta {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a whole dump. A truncated trailing frame is an error.
pub fn read_dump(mut r: impl Read) -> Result<(DumpHeader, Vec<Frame>)> {
    let nx = read_u64(&mut r)?;
    let dx = f64::from_bits(read_u64(&mut r)?);
    let dt = f64::from_bits(read_u64(&mut r)?);
    let mut config_hash = [0u8; 32];
    r.read_exact(&mut config_hash)?;
    let header = DumpHeader { nx, dx, dt, config_hash };
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let frame_bytes = 8 * (nx as usize + 1);
    if rest.len() % frame_bytes != 0 {
        return Err(Error::Numerical(format!("dump body of {} bytes is not a whole number of frames", rest.len())));
    }
    let word = |c: &[u8]| u64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let frames = rest
        .chunks_exact(frame_bytes)
        .map(|chunk| {
            let mut words = chunk.chunks_exact(8).map(word);
            let step = words.next().expect("frame has a step");
            Frame { step, eta: words.map(f64::from_bits).collect() }
        })
        .collect();
    Ok((header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let header = DumpHeader { nx: 3, dx: 0.5, dt: 1e-4, config_hash: [7; 32] };
        let mut w = DumpWriter::new(Vec::new(), header).unwrap();
        w.write_frame(0, &[1.0, -2.0, 3.5]).unwrap();
        w.write_frame(7, &[0.0, f64::MIN_POSITIVE, -0.0]).unwrap();
        assert!(w.write_frame(8, &[1.0]).is_err());
        let bytes = w.finish().unwrap();
        assert_eq!(bytes.len(), 56 + 2 * 32);
        let (h, frames) = read_dump(bytes.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(frames[1].step, 7);
        assert_eq!(frames[1].eta[2].to_bits(), (-0.0f64).to_bits());
        assert!(read_dump(&bytes[..bytes.len() - 1]).is_err());
    }
}
