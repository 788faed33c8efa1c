pub mod distance;
pub mod error;
pub mod pointset;
pub mod raster;
pub mod regions;
pub mod stroke;
pub mod select;
pub mod engine;
pub mod params;
pub mod protocol;
pub mod replay;
pub mod bench;
pub mod cli;
