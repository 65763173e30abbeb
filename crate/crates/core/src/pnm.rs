//! Binary netpbm writers: PGM (P5) for single-mode frames, PPM (P6) for
//! mixed frames, 8-bit.

use std::io::{self, Write};

use crate::framing::{MixedFrame, ModeFrame};

/// Write a mode frame as binary PGM (P5, maxval 255).
pub fn write_pgm<W: Write>(frame: &ModeFrame, w: &mut W) -> io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", frame.width, frame.height)?;
    w.write_all(&frame.pixels)
}

/// Write a mixed frame as binary PPM (P6, maxval 255).
pub fn write_ppm<W: Write>(frame: &MixedFrame, w: &mut W) -> io::Result<()> {
    write!(w, "P6\n{} {}\n255\n", frame.width, frame.height)?;
    w.write_all(&frame.pixels)
}

/// Canonical frame filename, `frame_%06d.<ext>`.
pub fn frame_filename(index: u64, ext: &str) -> String {
    format!("frame_{index:06}.{ext}")
}
