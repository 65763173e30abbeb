//! Per-frame detections: a connected-components blob baseline over binary
//! frames, and CSV ingestion for detections produced by an external detector.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::framing::ModeFrame;

/// Default blob area bounds in pixels², sized for the default simulated fish.
pub const DEFAULT_MIN_AREA: usize = 30;
pub const DEFAULT_MAX_AREA: usize = 5000;
/// Header line of the detection CSV format. `id` is -1 for detections; the
/// same shape with `id >= 0` serves as a ground-truth track file.
pub const DETECTION_CSV_HEADER: &str = "frame,id,x,y,w,h,conf,class";

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("line {line}: non-positive extent w={w} h={h}")]
    NegativeExtent { line: usize, w: f64, h: f64 },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for DetectError {
    fn from(e: std::io::Error) -> Self {
        DetectError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionClass {
    /// A real target.
    Target,
    /// A mirror-reflection artifact; accepted in files, filtered before
    /// tracking.
    Negative,
}

impl DetectionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionClass::Target => "target",
            DetectionClass::Negative => "negative",
        }
    }
}

/// An axis-aligned detection box with center-point convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Window index the detection belongs to.
    pub frame: u64,
    /// Box center, pixels.
    pub x: f64,
    pub y: f64,
    /// Box extent, pixels; always positive.
    pub w: f64,
    pub h: f64,
    /// Confidence in [0, 1].
    pub confidence: f64,
    pub class: DetectionClass,
}

/// 8-connected components of nonzero pixels with area inside
/// `[min_area, max_area]` become detections with tight bounding boxes.
/// Output is sorted by (y, x) of the box center.
pub fn detect_blobs(
    frame: &ModeFrame,
    frame_index: u64,
    min_area: usize,
    max_area: usize,
) -> Vec<Detection> {
    let w = frame.width as usize;
    let h = frame.height as usize;
    let mut visited = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::new();

    for start_y in 0..h {
        for start_x in 0..w {
            let idx = start_y * w + start_x;
            if visited[idx] || frame.pixels[idx] == 0 {
                continue;
            }
            visited[idx] = true;
            stack.push((start_x, start_y));
            let (mut minx, mut maxx, mut miny, mut maxy) = (start_x, start_x, start_y, start_y);
            let mut area = 0usize;
            while let Some((x, y)) = stack.pop() {
                area += 1;
                minx = minx.min(x);
                maxx = maxx.max(x);
                miny = miny.min(y);
                maxy = maxy.max(y);
                let x0 = x.saturating_sub(1);
                let y0 = y.saturating_sub(1);
                for ny in y0..=(y + 1).min(h - 1) {
                    for nx in x0..=(x + 1).min(w - 1) {
                        let nidx = ny * w + nx;
                        if !visited[nidx] && frame.pixels[nidx] != 0 {
                            visited[nidx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            if area < min_area || area > max_area {
                continue;
            }
            let bw = (maxx - minx + 1) as f64;
            let bh = (maxy - miny + 1) as f64;
            out.push(Detection {
                frame: frame_index,
                x: (minx + maxx) as f64 / 2.0,
                y: (miny + maxy) as f64 / 2.0,
                w: bw,
                h: bh,
                confidence: 1.0,
                class: DetectionClass::Target,
            });
        }
    }
    out.sort_by(|a, b| (a.y, a.x).partial_cmp(&(b.y, b.x)).unwrap());
    out
}

fn parse_f64(field: &str, line: usize, name: &str) -> Result<f64, DetectError> {
    let v: f64 = field.trim().parse().map_err(|e| DetectError::ParseError {
        line,
        msg: format!("{name}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(DetectError::ParseError {
            line,
            msg: format!("{name}: non-finite value"),
        });
    }
    Ok(v)
}

/// Read a detection CSV, grouping by frame index and preserving in-frame
/// file order.
pub fn read_detections<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<u64, Vec<Detection>>, DetectError> {
    let mut lines = reader.lines();
    let first = lines.next().transpose()?.ok_or(DetectError::ParseError {
        line: 1,
        msg: "empty file, expected header line".into(),
    })?;
    if first.trim_end_matches('\r') != DETECTION_CSV_HEADER {
        return Err(DetectError::ParseError {
            line: 1,
            msg: format!("expected header \"{DETECTION_CSV_HEADER}\""),
        });
    }
    let mut by_frame: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(DetectError::ParseError {
                line: line_no,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let frame: u64 = fields[0].trim().parse().map_err(|e| DetectError::ParseError {
            line: line_no,
            msg: format!("frame: {e}"),
        })?;
        let _id: i64 = fields[1].trim().parse().map_err(|e| DetectError::ParseError {
            line: line_no,
            msg: format!("id: {e}"),
        })?;
        let x = parse_f64(fields[2], line_no, "x")?;
        let y = parse_f64(fields[3], line_no, "y")?;
        let w = parse_f64(fields[4], line_no, "w")?;
        let h = parse_f64(fields[5], line_no, "h")?;
        let confidence = parse_f64(fields[6], line_no, "conf")?;
        if w <= 0.0 || h <= 0.0 {
            return Err(DetectError::NegativeExtent { line: line_no, w, h });
        }
        let class = match fields[7].trim() {
            "target" => DetectionClass::Target,
            "negative" => DetectionClass::Negative,
            other => {
                return Err(DetectError::ParseError {
                    line: line_no,
                    msg: format!("class: unknown value \"{other}\""),
                })
            }
        };
        by_frame.entry(frame).or_default().push(Detection {
            frame,
            x,
            y,
            w,
            h,
            confidence,
            class,
        });
    }
    Ok(by_frame)
}

/// Write detections in the detection CSV format with `id = -1`.
pub fn write_detections<W: Write>(w: &mut W, detections: &[Detection]) -> Result<(), DetectError> {
    writeln!(w, "{DETECTION_CSV_HEADER}")?;
    for d in detections {
        writeln!(
            w,
            "{},-1,{},{},{},{},{},{}",
            d.frame,
            d.x,
            d.y,
            d.w,
            d.h,
            d.confidence,
            d.class.as_str()
        )?;
    }
    Ok(())
}
