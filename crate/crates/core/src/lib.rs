pub mod analytic;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod params;
pub mod sum;
pub mod descent;
pub mod minimize;
pub mod micro;
pub mod nonlocal1d;
pub mod verify;
