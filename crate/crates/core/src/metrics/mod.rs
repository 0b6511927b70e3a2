//! Episode return and FFT-based action smoothness.

mod fft;
mod smoothness;

pub use fft::fft_real;
pub use smoothness::{cumulative_return, smoothness_score, ActionTrace, SmoothnessReport};
