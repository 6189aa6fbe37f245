//! On-disk formats: the weight file, netpbm images and depth maps, and the
//! key=value model configuration.

pub mod config;
pub mod netpbm;
pub mod weights;

pub use config::{config_to_text, parse_config};
pub use netpbm::{read_image, read_map, write_image, write_map};
pub use weights::{load_weights, save_weights};
