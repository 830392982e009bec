pub mod boundary;
pub mod config;
pub mod connection;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod grid;
pub mod harmonics;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod phantom;
pub mod quadrature;
pub mod surface;
pub mod transport;
pub mod validation;
pub mod xray;

pub use error::{GeoError, Result};
