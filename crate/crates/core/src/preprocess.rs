//! Fixed-pattern-noise suppression and lens undistortion.
//!
//! FPN shows up as hot pixels that keep firing with the lens covered. A dark
//! capture gives a per-pixel event rate; pixels above a rate threshold are
//! masked out of live streams. Undistortion applies supplied Brown-Conrady
//! calibration parameters per event; it never estimates them.

use thiserror::Error;

use crate::event_io::{Event, StreamHeader};

/// Default hot-pixel threshold in events per second.
pub const DEFAULT_FPN_THRESHOLD: f64 = 2.0;
/// Iteration cap for the fixed-point distortion inversion.
pub const UNDISTORT_MAX_ITERS: usize = 20;
/// Convergence tolerance for the inversion, in normalized coordinates.
pub const UNDISTORT_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("dark-capture duration {0} s must be positive")]
    NonPositiveDuration(f64),
    #[error("geometry mismatch: event at ({x}, {y}) outside model {width}x{height}")]
    GeometryMismatch { x: u16, y: u16, width: u16, height: u16 },
    #[error("distortion inversion did not converge at ({x}, {y}) after {iters} iterations")]
    NonConvergence { x: f64, y: f64, iters: usize },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
}

/// Brown-Conrady intrinsics: focal lengths, principal point, radial
/// (k1, k2, k3) and tangential (p1, p2) distortion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
}

impl CalibrationParams {
    /// Parameters that map every pixel to itself.
    pub fn identity() -> Self {
        CalibrationParams {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            p1: 0.0,
            p2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.fx > 0.0) || !(self.fy > 0.0) {
            return Err(PreprocessError::InvalidCalibration(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0 || self.k3 != 0.0 || self.p1 != 0.0 || self.p2 != 0.0
    }

    /// Forward model: distort a point given in normalized image coordinates.
    pub fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        let xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        (xd, yd)
    }

    /// Invert the distortion by fixed-point iteration. Input and output are
    /// normalized coordinates.
    pub fn undistort_normalized(&self, xd: f64, yd: f64) -> Result<(f64, f64), PreprocessError> {
        if !self.has_distortion() {
            return Ok((xd, yd));
        }
        let (mut x, mut y) = (xd, yd);
        for _ in 0..UNDISTORT_MAX_ITERS {
            let r2 = x * x + y * y;
            let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
            let dx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
            let dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
            let nx = (xd - dx) / radial;
            let ny = (yd - dy) / radial;
            if !nx.is_finite() || !ny.is_finite() {
                break;
            }
            let step = (nx - x).abs().max((ny - y).abs());
            x = nx;
            y = ny;
            if step < UNDISTORT_TOL {
                return Ok((x, y));
            }
        }
        Err(PreprocessError::NonConvergence {
            x: xd,
            y: yd,
            iters: UNDISTORT_MAX_ITERS,
        })
    }

    /// Undistort a pixel coordinate; returns the real-valued remapped pixel.
    pub fn undistort_pixel(&self, px: f64, py: f64) -> Result<(f64, f64), PreprocessError> {
        let xd = (px - self.cx) / self.fx;
        let yd = (py - self.cy) / self.fy;
        let (xu, yu) = self.undistort_normalized(xd, yd)?;
        Ok((xu * self.fx + self.cx, yu * self.fy + self.cy))
    }
}

/// Per-pixel dark-capture event rates plus the derived hot mask.
#[derive(Debug, Clone)]
pub struct HotPixelModel {
    width: u16,
    height: u16,
    rate: Vec<f64>,
    hot: Vec<bool>,
    threshold: f64,
}

impl HotPixelModel {
    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Dark-capture event rate at a pixel, events per second.
    pub fn rate(&self, x: u16, y: u16) -> f64 {
        self.rate[y as usize * self.width as usize + x as usize]
    }

    pub fn is_hot(&self, x: u16, y: u16) -> bool {
        self.hot[y as usize * self.width as usize + x as usize]
    }

    pub fn hot_pixel_count(&self) -> usize {
        self.hot.iter().filter(|&&h| h).count()
    }
}

/// Build the hot-pixel model from a covered-lens capture of the given
/// duration. A pixel is hot when its rate strictly exceeds `threshold`.
pub fn build_hot_pixel_model(
    dark_events: &[Event],
    duration_s: f64,
    geometry: &StreamHeader,
    threshold: f64,
) -> Result<HotPixelModel, PreprocessError> {
    if !(duration_s > 0.0) {
        return Err(PreprocessError::NonPositiveDuration(duration_s));
    }
    let mut counts = vec![0u64; geometry.pixel_count()];
    for e in dark_events {
        if !geometry.contains(e.x, e.y) {
            return Err(PreprocessError::GeometryMismatch {
                x: e.x,
                y: e.y,
                width: geometry.width,
                height: geometry.height,
            });
        }
        counts[e.y as usize * geometry.width as usize + e.x as usize] += 1;
    }
    let rate: Vec<f64> = counts.iter().map(|&c| c as f64 / duration_s).collect();
    let hot: Vec<bool> = rate.iter().map(|&r| r > threshold).collect();
    Ok(HotPixelModel {
        width: geometry.width,
        height: geometry.height,
        rate,
        hot,
        threshold,
    })
}

/// Drop every event that falls on a hot pixel, preserving relative order.
pub fn suppress_fpn(events: &[Event], model: &HotPixelModel) -> Result<Vec<Event>, PreprocessError> {
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if e.x >= model.width || e.y >= model.height {
            return Err(PreprocessError::GeometryMismatch {
                x: e.x,
                y: e.y,
                width: model.width,
                height: model.height,
            });
        }
        if !model.is_hot(e.x, e.y) {
            out.push(*e);
        }
    }
    Ok(out)
}

/// Undistort one event. `Ok(None)` means the remapped pixel left the sensor;
/// [`undistort_stream`] drops those.
pub fn undistort_event(
    event: &Event,
    params: &CalibrationParams,
    geometry: &StreamHeader,
) -> Result<Option<Event>, PreprocessError> {
    let (px, py) = params.undistort_pixel(event.x as f64, event.y as f64)?;
    // round half away from zero onto the integer pixel grid
    let rx = px.round();
    let ry = py.round();
    if rx < 0.0 || ry < 0.0 || rx >= geometry.width as f64 || ry >= geometry.height as f64 {
        return Ok(None);
    }
    Ok(Some(Event {
        x: rx as u16,
        y: ry as u16,
        ..*event
    }))
}

/// Undistort a stream, dropping events that land outside the sensor.
pub fn undistort_stream(
    events: &[Event],
    params: &CalibrationParams,
    geometry: &StreamHeader,
) -> Result<Vec<Event>, PreprocessError> {
    params.validate()?;
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if let Some(mapped) = undistort_event(e, params, geometry)? {
            out.push(mapped);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::Polarity;
    use proptest::prelude::*;

    fn ev(t: u64, x: u16, y: u16) -> Event {
        Event {
            t,
            x,
            y,
            polarity: Polarity::On,
            gray: 100,
        }
    }

    #[test]
    fn no_dark_events_means_empty_mask() {
        let g = StreamHeader::new(16, 16).unwrap();
        let m = build_hot_pixel_model(&[], 5.0, &g, DEFAULT_FPN_THRESHOLD).unwrap();
        assert_eq!(m.hot_pixel_count(), 0);
        assert_eq!(m.rate(3, 3), 0.0);
    }

    #[test]
    fn rate_is_count_over_duration_with_strict_threshold() {
        let g = StreamHeader::new(16, 16).unwrap();
        let mut dark = Vec::new();
        for i in 0..100 {
            dark.push(ev(i, 5, 5));
        }
        for i in 0..40 {
            dark.push(ev(100 + i, 9, 2));
        }
        dark.sort_by_key(|e| e.t);
        let m = build_hot_pixel_model(&dark, 10.0, &g, 5.0).unwrap();
        assert_eq!(m.rate(5, 5), 10.0);
        assert!(m.is_hot(5, 5));
        assert_eq!(m.rate(9, 2), 4.0);
        assert!(!m.is_hot(9, 2));
        assert_eq!(m.hot_pixel_count(), 1);
    }

    #[test]
    fn zero_threshold_marks_any_firing_pixel_hot() {
        let g = StreamHeader::new(8, 8).unwrap();
        let m = build_hot_pixel_model(&[ev(0, 1, 1)], 3.0, &g, 0.0).unwrap();
        assert!(m.is_hot(1, 1));
        assert!(!m.is_hot(0, 0));
    }

    #[test]
    fn non_positive_duration_is_rejected() {
        let g = StreamHeader::new(8, 8).unwrap();
        assert_eq!(
            build_hot_pixel_model(&[], 0.0, &g, 1.0),
            Err(PreprocessError::NonPositiveDuration(0.0))
        );
    }

    #[test]
    fn suppression_removes_exactly_hot_pixel_hits() {
        let g = StreamHeader::new(16, 16).unwrap();
        let dark: Vec<Event> = (0..50).map(|i| ev(i, 4, 4)).collect();
        let m = build_hot_pixel_model(&dark, 1.0, &g, DEFAULT_FPN_THRESHOLD).unwrap();

        let live: Vec<Event> = (0..30)
            .map(|i| if i % 3 == 0 { ev(i, 4, 4) } else { ev(i, (i % 16) as u16, 7) })
            .collect();
        let hot_hits = live.iter().filter(|e| e.x == 4 && e.y == 4).count();
        let out = suppress_fpn(&live, &m).unwrap();
        assert_eq!(out.len(), live.len() - hot_hits);
        assert!(out.iter().all(|e| !(e.x == 4 && e.y == 4)));
        // idempotent, and a subsequence of the input
        assert_eq!(suppress_fpn(&out, &m).unwrap(), out);
        let mut it = live.iter();
        assert!(out.iter().all(|e| it.any(|l| l == e)));
    }

    #[test]
    fn empty_mask_is_identity_and_full_mask_empties() {
        let g = StreamHeader::new(4, 4).unwrap();
        let live: Vec<Event> = (0..16).map(|i| ev(i, (i % 4) as u16, (i / 4) as u16)).collect();
        let empty = build_hot_pixel_model(&[], 1.0, &g, 0.0).unwrap();
        assert_eq!(suppress_fpn(&live, &empty).unwrap(), live);

        let all: Vec<Event> = (0..16)
            .flat_map(|p| (0..5).map(move |k| ev(p * 5 + k, (p % 4) as u16, (p / 4) as u16)))
            .collect();
        let full = build_hot_pixel_model(&all, 1.0, &g, 0.5).unwrap();
        assert!(suppress_fpn(&live, &full).unwrap().is_empty());
    }

    #[test]
    fn geometry_mismatch_is_reported() {
        let g = StreamHeader::new(8, 8).unwrap();
        let m = build_hot_pixel_model(&[], 1.0, &g, 1.0).unwrap();
        let err = suppress_fpn(&[ev(0, 8, 0)], &m).unwrap_err();
        assert!(matches!(err, PreprocessError::GeometryMismatch { x: 8, .. }), "{err}");
    }

    #[test]
    fn zero_coefficients_leave_coordinates_identical() {
        let params = CalibrationParams {
            fx: 500.0,
            fy: 480.0,
            cx: 640.0,
            cy: 400.0,
            ..CalibrationParams::identity()
        };
        let g = StreamHeader::DEFAULT;
        for &(x, y) in &[(0u16, 0u16), (640, 400), (1279, 799), (17, 503)] {
            let e = ev(0, x, y);
            let out = undistort_event(&e, &params, &g).unwrap().unwrap();
            assert_eq!((out.x, out.y), (x, y));
        }
    }

    #[test]
    fn principal_point_is_a_fixed_point() {
        let params = CalibrationParams {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 200.0,
            k1: 0.3,
            ..CalibrationParams::identity()
        };
        let g = StreamHeader::new(640, 400).unwrap();
        let e = ev(0, 320, 200);
        let out = undistort_event(&e, &params, &g).unwrap().unwrap();
        assert_eq!((out.x, out.y), (320, 200));
    }

    /// Independent oracle: forward-distort a dense grid of undistorted pixel
    /// positions and invert by nearest neighbor over the grid.
    fn grid_inversion_oracle(params: &CalibrationParams, px: f64, py: f64) -> (f64, f64) {
        let step = 0.05;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let mut gx = px - 40.0;
        while gx <= px + 40.0 {
            let mut gy = py - 40.0;
            while gy <= py + 40.0 {
                let xn = (gx - params.cx) / params.fx;
                let yn = (gy - params.cy) / params.fy;
                let (xd, yd) = params.distort_normalized(xn, yn);
                let dpx = xd * params.fx + params.cx;
                let dpy = yd * params.fy + params.cy;
                let d2 = (dpx - px).powi(2) + (dpy - py).powi(2);
                if d2 < best.0 {
                    best = (d2, gx, gy);
                }
                gy += step;
            }
            gx += step;
        }
        (best.1, best.2)
    }

    #[test]
    fn inversion_matches_grid_oracle_within_half_pixel() {
        let params = CalibrationParams {
            fx: 500.0,
            fy: 500.0,
            cx: 640.0,
            cy: 400.0,
            k1: 0.1,
            ..CalibrationParams::identity()
        };
        let (ux, uy) = params.undistort_pixel(740.0, 400.0).unwrap();
        let (ox, oy) = grid_inversion_oracle(&params, 740.0, 400.0);
        assert!((ux - ox).abs() < 0.5 && (uy - oy).abs() < 0.5, "({ux},{uy}) vs ({ox},{oy})");
    }

    proptest! {
        #[test]
        fn forward_of_inverse_reproduces_the_observation(
            px in 100.0f64..1180.0,
            py in 100.0f64..700.0,
            k1 in -0.2f64..0.2,
            k2 in -0.02f64..0.02,
            p1 in -0.005f64..0.005,
            p2 in -0.005f64..0.005,
        ) {
            let params = CalibrationParams {
                fx: 900.0, fy: 900.0, cx: 640.0, cy: 400.0,
                k1, k2, k3: 0.0, p1, p2,
            };
            let xd = (px - params.cx) / params.fx;
            let yd = (py - params.cy) / params.fy;
            let (xu, yu) = params.undistort_normalized(xd, yd).unwrap();
            let (rx, ry) = params.distort_normalized(xu, yu);
            prop_assert!((rx - xd).abs() <= 1e-6 && (ry - yd).abs() <= 1e-6);
        }
    }
}
