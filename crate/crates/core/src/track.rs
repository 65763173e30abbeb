//! Tracking-by-detection: constant-velocity Kalman prediction and update,
//! Hungarian association on center distance with a gate, and ID lifecycle
//! with a bounded coast through missed detections.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use thiserror::Error;

use crate::assignment::min_cost_assignment;
use crate::detect::{Detection, DETECTION_CSV_HEADER};

/// Frames an unmatched track survives on prediction alone.
pub const DEFAULT_MAX_COAST: u32 = 15;
/// Matched detections required to confirm a tentative track.
pub const DEFAULT_MIN_HITS: u32 = 3;
/// Association gate in pixels; costlier matches are dissolved.
pub const DEFAULT_GATE_PX: f64 = 50.0;
/// Process noise diagonal, pixels².
pub const DEFAULT_Q_DIAG: [f64; 4] = [1.0, 1.0, 0.25, 0.25];
/// Measurement noise diagonal, pixels².
pub const DEFAULT_R_DIAG: [f64; 2] = [4.0, 4.0];
/// Initial state covariance diagonal for new tracks.
pub const DEFAULT_P0_DIAG: [f64; 4] = [10.0, 10.0, 100.0, 100.0];
/// Header line of the track CSV format.
pub const TRACK_CSV_HEADER: &str = "frame,id,x,y,w,h,status";

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("innovation covariance is singular")]
    SingularInnovationCovariance,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for TrackError {
    fn from(e: std::io::Error) -> Self {
        TrackError::Io(e.to_string())
    }
}

/// Constant-velocity motion model over the state [x, y, vx, vy] with a
/// position-only measurement. The control term `B * u` is carried but fixed
/// at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    pub f: Matrix4<f64>,
    pub h: Matrix2x4<f64>,
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
    pub b: Matrix4<f64>,
    pub u: Vector4<f64>,
}

impl KalmanModel {
    /// Unit-frame-step constant-velocity model with the default noise
    /// diagonals.
    pub fn constant_velocity() -> Self {
        Self::with_noise(DEFAULT_Q_DIAG, DEFAULT_R_DIAG)
    }

    pub fn with_noise(q_diag: [f64; 4], r_diag: [f64; 2]) -> Self {
        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let h = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        KalmanModel {
            f,
            h,
            q: Matrix4::from_diagonal(&Vector4::from(q_diag)),
            r: Matrix2::from_diagonal(&Vector2::new(r_diag[0], r_diag[1])),
            b: Matrix4::zeros(),
            u: Vector4::zeros(),
        }
    }

    /// Q and R must be symmetric PSD with R strictly positive definite, and
    /// the control term must vanish.
    pub fn validate(&self) -> Result<(), TrackError> {
        let sym = |name: &str, d: f64| -> Result<(), TrackError> {
            if d > 1e-9 {
                Err(TrackError::InvalidModel(format!("{name} is not symmetric")))
            } else {
                Ok(())
            }
        };
        sym("Q", (self.q - self.q.transpose()).abs().max())?;
        sym("R", (self.r - self.r.transpose()).abs().max())?;
        let q_eigs = self.q.symmetric_eigenvalues();
        if q_eigs.min() < -1e-9 {
            return Err(TrackError::InvalidModel("Q is not PSD".into()));
        }
        let r_eigs = self.r.symmetric_eigenvalues();
        if r_eigs.min() <= 0.0 {
            return Err(TrackError::InvalidModel(
                "R must be positive definite".into(),
            ));
        }
        if (self.b * self.u).norm() != 0.0 {
            return Err(TrackError::InvalidModel("B * u must be zero".into()));
        }
        Ok(())
    }
}

/// Kalman state: mean [x, y, vx, vy] and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// A persistent identity with its motion state and lifecycle counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    /// Last observed box extent (w, h); not part of the Kalman state.
    pub extent: (f64, f64),
    pub frames_since_update: u32,
    pub hits: u32,
    pub status: TrackStatus,
}

impl Track {
    pub fn position(&self) -> (f64, f64) {
        (self.state.mean[0], self.state.mean[1])
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Time-update a track: mean through F (plus the zero control term),
/// covariance through F P Fᵀ + Q.
pub fn predict(track: &Track, model: &KalmanModel) -> Track {
    let mean = model.f * track.state.mean + model.b * model.u;
    let covariance = symmetrize(&(model.f * track.state.covariance * model.f.transpose() + model.q));
    Track {
        state: TrackState { mean, covariance },
        ..track.clone()
    }
}

/// Measurement-update a predicted track with an observed position.
pub fn update(track: &Track, z: (f64, f64), model: &KalmanModel) -> Result<Track, TrackError> {
    let p = track.state.covariance;
    let innovation = Vector2::new(z.0, z.1) - model.h * track.state.mean;
    let s = model.h * p * model.h.transpose() + model.r;
    let s_inv = s
        .try_inverse()
        .ok_or(TrackError::SingularInnovationCovariance)?;
    let gain = p * model.h.transpose() * s_inv;
    let mean = track.state.mean + gain * innovation;
    let covariance = symmetrize(&((Matrix4::identity() - gain * model.h) * p));
    Ok(Track {
        state: TrackState { mean, covariance },
        frames_since_update: 0,
        hits: track.hits + 1,
        ..track.clone()
    })
}

/// Result of one frame's track-to-detection association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// (track index, detection index) pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Associate predicted tracks with detections by minimizing total Euclidean
/// center distance, then dissolve any pair costlier than the gate.
pub fn assign(tracks: &[Track], detections: &[Detection], gate: f64) -> Assignment {
    let n = tracks.len();
    let m = detections.len();
    let mut cost = vec![0.0f64; n * m];
    for (i, t) in tracks.iter().enumerate() {
        let (tx, ty) = t.position();
        for (j, d) in detections.iter().enumerate() {
            cost[i * m + j] = ((d.x - tx).powi(2) + (d.y - ty).powi(2)).sqrt();
        }
    }
    let row_to_col = min_cost_assignment(&cost, n, m);

    let mut matches = Vec::new();
    let mut unmatched_tracks = Vec::new();
    let mut matched_dets = vec![false; m];
    for (i, assigned) in row_to_col.iter().enumerate() {
        match assigned {
            Some(j) if cost[i * m + j] <= gate => {
                matches.push((i, *j));
                matched_dets[*j] = true;
            }
            _ => unmatched_tracks.push(i),
        }
    }
    let unmatched_detections = (0..m).filter(|&j| !matched_dets[j]).collect();
    Assignment {
        matches,
        unmatched_tracks,
        unmatched_detections,
    }
}

/// Tracker configuration knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerParams {
    pub gate: f64,
    pub min_hits: u32,
    pub max_coast: u32,
    pub p0_diag: [f64; 4],
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            gate: DEFAULT_GATE_PX,
            min_hits: DEFAULT_MIN_HITS,
            max_coast: DEFAULT_MAX_COAST,
            p0_diag: DEFAULT_P0_DIAG,
        }
    }
}

/// One live track's state as recorded in a frame snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub status: TrackStatus,
    /// Whether a detection was matched to this track in this frame.
    pub matched: bool,
}

/// Per-frame record of every live track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSnapshot {
    pub frame: u64,
    pub entries: Vec<SnapshotEntry>,
}

/// Sequential tracking state machine over frames.
pub struct Tracker {
    model: KalmanModel,
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(model: KalmanModel, params: TrackerParams) -> Result<Self, TrackError> {
        model.validate()?;
        if !(params.gate > 0.0) {
            return Err(TrackError::InvalidModel(format!(
                "gate {} must be positive",
                params.gate
            )));
        }
        Ok(Tracker {
            model,
            params,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advance one frame: predict all tracks, associate, update matches,
    /// coast or kill the unmatched, and open tentative tracks for unmatched
    /// detections. Detections of class `negative` must already be filtered.
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> TrackSnapshot {
        for track in &mut self.tracks {
            *track = predict(track, &self.model);
        }
        let assignment = assign(&self.tracks, detections, self.params.gate);

        for &(ti, di) in &assignment.matches {
            let d = &detections[di];
            // S = H P Hᵀ + R is invertible: the constructor enforces R
            // positive definite and P stays PSD
            let mut t = update(&self.tracks[ti], (d.x, d.y), &self.model)
                .expect("innovation covariance invertible under validated model");
            t.extent = (d.w, d.h);
            if t.status == TrackStatus::Tentative && t.hits >= self.params.min_hits {
                t.status = TrackStatus::Confirmed;
            }
            self.tracks[ti] = t;
        }
        for &ti in &assignment.unmatched_tracks {
            let t = &mut self.tracks[ti];
            t.frames_since_update += 1;
            if t.frames_since_update > self.params.max_coast {
                t.status = TrackStatus::Dead;
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);

        for &di in &assignment.unmatched_detections {
            let d = &detections[di];
            let status = if self.params.min_hits <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            };
            self.tracks.push(Track {
                id: self.next_id,
                state: TrackState {
                    mean: Vector4::new(d.x, d.y, 0.0, 0.0),
                    covariance: Matrix4::from_diagonal(&Vector4::from(self.params.p0_diag)),
                },
                extent: (d.w, d.h),
                frames_since_update: 0,
                hits: 1,
                status,
            });
            self.next_id += 1;
        }

        let entries = self
            .tracks
            .iter()
            .map(|t| SnapshotEntry {
                id: t.id,
                x: t.state.mean[0],
                y: t.state.mean[1],
                w: t.extent.0,
                h: t.extent.1,
                status: t.status,
                matched: t.frames_since_update == 0,
            })
            .collect();
        TrackSnapshot { frame, entries }
    }
}

fn matched_placeholder(_ti: usize) -> bool {
    false
}
