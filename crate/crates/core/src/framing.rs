//! Windowed rendering of event streams into the four image modes and their
//! fused mixed-mode frame.
//!
//! Per window: binary marks any-event pixels white, count scales per-pixel
//! firing counts to the window maximum, gray keeps the last event's gray
//! value, and accumulate carries the latest gray value across windows.
//! The mixed frame screen-blends all four (`C = 1 - (1 - A)(1 - B)` per
//! channel) with the binary layer recolored green on top.
//!
//! Windows are half-open `[start, end)` intervals of `1/fps` seconds indexed
//! from the time origin; an event at `t` belongs to window
//! `floor(t * fps / 1e6)`. Boundaries are derived from that index rule, so
//! windowing is exact in integer arithmetic for any fps.

use thiserror::Error;

use crate::event_io::{Event, StreamHeader};

/// Default window rate, frames per second.
pub const DEFAULT_FPS: u32 = 30;

#[derive(Debug, Error, PartialEq)]
pub enum FramingError {
    #[error("event at t={t} lies outside window {window} [{start}, {end})")]
    EventOutOfWindow { t: u64, window: u64, start: u64, end: u64 },
    #[error("event at ({x}, {y}) outside frame geometry {width}x{height}")]
    EventOutOfGeometry { x: u16, y: u16, width: u16, height: u16 },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("fps must be positive")]
    ZeroFps,
}

/// The four single-channel render modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    Binary,
    Count,
    Gray,
    Accumulate,
}

/// A single-channel 8-bit frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeFrame {
    pub mode: FrameMode,
    pub width: u16,
    pub height: u16,
    /// Row-major intensities, `height * width` entries.
    pub pixels: Vec<u8>,
}

impl ModeFrame {
    pub fn zeros(mode: FrameMode, width: u16, height: u16) -> Self {
        ModeFrame {
            mode,
            width,
            height,
            pixels: vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u16, y: u16, v: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = v;
    }
}

/// An RGB frame, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedFrame {
    pub width: u16,
    pub height: u16,
    /// Row-major RGB triplets, `3 * height * width` entries.
    pub pixels: Vec<u8>,
}

impl MixedFrame {
    #[inline]
    pub fn get(&self, x: u16, y: u16) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Per-pixel most recent gray value, carried across windows. A pixel only
/// changes when an event arrives there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulateState {
    pub width: u16,
    pub height: u16,
    last_gray: Vec<u8>,
}

impl AccumulateState {
    pub fn new(geometry: &StreamHeader) -> Self {
        AccumulateState {
            width: geometry.width,
            height: geometry.height,
            last_gray: vec![0; geometry.pixel_count()],
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> u8 {
        self.last_gray[y as usize * self.width as usize + x as usize]
    }
}

/// The co-registered frames for one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub window_index: u64,
    /// Window start, microseconds (inclusive).
    pub t_start: u64,
    /// Window end, microseconds (exclusive).
    pub t_end: u64,
    pub binary: ModeFrame,
    pub count: ModeFrame,
    pub gray: ModeFrame,
    pub accumulate: ModeFrame,
    pub mixed: MixedFrame,
}

/// Index of the window containing timestamp `t` (microseconds).
#[inline]
pub fn window_index_of(t: u64, fps: u32) -> u64 {
    (t as u128 * fps as u128 / 1_000_000) as u64
}

/// First timestamp belonging to window `index`.
pub fn window_start(index: u64, fps: u32) -> u64 {
    // smallest t with t * fps >= index * 1e6
    let num = index as u128 * 1_000_000;
    num.div_ceil(fps as u128) as u64
}

/// One past the last timestamp belonging to window `index`.
pub fn window_end(index: u64, fps: u32) -> u64 {
    window_start(index + 1, fps)
}

/// Screen blend of two normalized channel values.
#[inline]
pub fn screen(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b)
}

/// Quantize a normalized channel value to 8 bits, rounding half away from
/// zero.
#[inline]
pub fn quantize_channel(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Render one window's events into a [`FrameStack`], folding the window into
/// the accumulate state.
///
/// Events must fall inside the window and be time-ordered.
pub fn render_window(
    events: &[Event],
    window_index: u64,
    fps: u32,
    geometry: &StreamHeader,
    state: &mut AccumulateState,
) -> Result<FrameStack, FramingError> {
    if fps == 0 {
        return Err(FramingError::ZeroFps);
    }
    if state.width != geometry.width || state.height != geometry.height {
        return Err(FramingError::GeometryMismatch(format!(
            "accumulate state {}x{} vs geometry {}x{}",
            state.width, state.height, geometry.width, geometry.height
        )));
    }
    let t_start = window_start(window_index, fps);
    let t_end = window_end(window_index, fps);

    let (w, h) = (geometry.width, geometry.height);
    let mut binary = ModeFrame::zeros(FrameMode::Binary, w, h);
    let mut gray = ModeFrame::zeros(FrameMode::Gray, w, h);
    let mut counts = vec![0u32; geometry.pixel_count()];

    for e in events {
        if window_index_of(e.t, fps) != window_index {
            return Err(FramingError::EventOutOfWindow {
                t: e.t,
                window: window_index,
                start: t_start,
                end: t_end,
            });
        }
        if !geometry.contains(e.x, e.y) {
            return Err(FramingError::EventOutOfGeometry {
                x: e.x,
                y: e.y,
                width: w,
                height: h,
            });
        }
        let i = e.y as usize * w as usize + e.x as usize;
        binary.pixels[i] = 255;
        counts[i] += 1;
        gray.pixels[i] = e.gray;
        state.last_gray[i] = e.gray;
    }

    let mut count = ModeFrame::zeros(FrameMode::Count, w, h);
    let n_max = counts.iter().copied().max().unwrap_or(0);
    if n_max > 0 {
        for (dst, &n) in count.pixels.iter_mut().zip(&counts) {
            *dst = (255.0 * n as f64 / n_max as f64).round() as u8;
        }
    }

    let accumulate = ModeFrame {
        mode: FrameMode::Accumulate,
        width: w,
        height: h,
        pixels: state.last_gray.clone(),
    };
    let mixed = fuse(&binary, &count, &gray, &accumulate)?;

    Ok(FrameStack {
        window_index,
        t_start,
        t_end,
        binary,
        count,
        gray,
        accumulate,
        mixed,
    })
}

/// Screen-blend the four mode frames into the mixed RGB frame.
///
/// Each mode is normalized to [0, 1]; binary is recolored pure green and the
/// other three replicate to gray RGB. The per-channel screen blend is
/// commutative and associative, so the layer stack reduces to
/// `1 - prod(1 - v)` per channel.
pub fn fuse(
    binary: &ModeFrame,
    count: &ModeFrame,
    gray: &ModeFrame,
    accumulate: &ModeFrame,
) -> Result<MixedFrame, FramingError> {
    let (w, h) = (binary.width, binary.height);
    for f in [count, gray, accumulate] {
        if f.width != w || f.height != h {
            return Err(FramingError::GeometryMismatch(format!(
                "{}x{} vs {}x{}",
                f.width, f.height, w, h
            )));
        }
    }
    let n = w as usize * h as usize;
    let mut pixels = vec![0u8; 3 * n];
    for i in 0..n {
        let b = binary.pixels[i] as f64 / 255.0;
        let c = count.pixels[i] as f64 / 255.0;
        let g = gray.pixels[i] as f64 / 255.0;
        let a = accumulate.pixels[i] as f64 / 255.0;
        // binary contributes (0, b, 0); the rest contribute (v, v, v)
        let rb = screen(screen(c, g), a);
        let gc = screen(rb, b);
        let q = quantize_channel(rb);
        pixels[3 * i] = q;
        pixels[3 * i + 1] = quantize_channel(gc);
        pixels[3 * i + 2] = q;
    }
    Ok(MixedFrame {
        width: w,
        height: h,
        pixels,
    })
}

/// Iterator over contiguous [`FrameStack`]s covering an event stream.
///
/// Partitions the time axis from the first event's window to the last,
/// threading accumulate state across windows. Empty interior windows are
/// rendered; an empty stream yields no windows.
pub fn windows<'a>(
    events: &'a [Event],
    geometry: &StreamHeader,
    fps: u32,
) -> Result<Windows<'a>, FramingError> {
    if fps == 0 {
        return Err(FramingError::ZeroFps);
    }
    let (next_window, last_window) = match (events.first(), events.last()) {
        (Some(first), Some(last)) => (window_index_of(first.t, fps), window_index_of(last.t, fps)),
        _ => (1, 0), // empty stream: iterator yields nothing
    };
    Ok(Windows {
        events,
        geometry: *geometry,
        fps,
        state: AccumulateState::new(geometry),
        pos: 0,
        next_window,
        last_window,
        failed: false,
    })
}

pub struct Windows<'a> {
    events: &'a [Event],
    geometry: StreamHeader,
    fps: u32,
    state: AccumulateState,
    pos: usize,
    next_window: u64,
    last_window: u64,
    failed: bool,
}

impl Iterator for Windows<'_> {
    type Item = Result<FrameStack, FramingError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next_window > self.last_window {
            return None;
        }
        let start = self.pos;
        while self.pos < self.events.len()
            && window_index_of(self.events[self.pos].t, self.fps) == self.next_window
        {
            self.pos += 1;
        }
        let result = render_window(
            &self.events[start..self.pos],
            self.next_window,
            self.fps,
            &self.geometry,
            &mut self.state,
        );
        if result.is_err() {
            self.failed = true;
        }
        self.next_window += 1;
        Some(result)
    }
}
