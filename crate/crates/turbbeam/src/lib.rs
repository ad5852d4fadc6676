pub mod error;
pub mod fft;
pub mod interp;
pub mod io;
pub mod ito_solver;
pub mod moment_theory;
pub mod paraxial_direct;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spectrum_medium;
