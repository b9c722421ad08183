//! Patch-based video consistency toolkit.
//!
//! The crate estimates dense correspondence fields between frames
//! ([`nnf`]), rebuilds frames through them by patch averaging ([`remap`]),
//! and uses both to deflicker or re-render sequences ([`blend`]) and to
//! spread edited keyframes across a video ([`interp`]). All heavy paths are
//! deterministic for a given seed, independent of thread count.

pub mod blend;
pub mod error;
pub mod frame;
pub mod interp;
pub mod io;
pub mod nnf;
pub mod remap;

mod pyramid;
mod rng;
mod track;

pub use error::{Error, Result};
pub use frame::{Frame, FrameSource, Role, Video, CHANNELS};
