//! File formats: the raster container, PNG export, key=value configs and
//! the dataset manifest.

pub mod config;
pub mod dataset;
pub mod png;
pub mod raster_file;

pub use config::RunConfig;
pub use dataset::{read_dataset, write_dataset, Dataset, MANIFEST_NAME};
pub use png::{default_rgb, export_png, heat_color, PngMapping};
pub use raster_file::{
    decode_raster, encode_raster, read_file, read_raster, read_raster_expect, read_raster_with_dtype, write_atomic,
    write_raster, write_raster_as, Dtype,
};
