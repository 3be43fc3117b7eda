//! Rooftop photovoltaic potential engine.
//!
//! Given vectorized roof sections, building footprints, hourly weather and a
//! terrain raster, the pipeline regularizes roof geometry, estimates pitch and
//! azimuth, packs rectangular modules onto each section, computes two-scale
//! horizon shading masks and runs a PVWatts-style energy chain to produce the
//! yearly solar potential of every section:
//!
//! `potential (kWh/year) = n_modules * module power (kWp) * specific yield (kWh/kWp/yr)`

pub mod error;
pub mod geom;
pub mod ingest;
pub mod packing;
pub mod pipeline;
pub mod pitch;
pub mod roofs;
pub mod shading;
pub mod solar;

pub use error::{Error, Result};
