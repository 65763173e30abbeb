//! Event-stream fish counting pipeline.
//!
//! The crate turns a raw event-camera stream into a fish count and a tracking
//! evaluation: stream I/O ([`event_io`]), fixed-pattern-noise suppression and
//! lens undistortion ([`preprocess`]), windowed rendering of the four event
//! image modes plus their screen-blend fusion ([`framing`]), blob or file-fed
//! detection ([`detect`]), Kalman + Hungarian tracking with occlusion coasting
//! ([`track`]), windowed statistical counting ([`count`]), CLEAR-MOT and
//! count-accuracy evaluation ([`eval`]), and a deterministic synthetic scene
//! generator ([`simgen`]) so the whole pipeline runs without hardware.

pub mod assignment;
pub mod count;
pub mod detect;
pub mod eval;
pub mod event_io;
pub mod framing;
pub mod pnm;
pub mod preprocess;
pub mod simgen;
pub mod track;

pub use event_io::{Event, Polarity, StreamHeader};
