pub mod denoise;
pub mod error;
pub mod gft;
pub mod graph;
pub mod io;
pub mod spectral;
