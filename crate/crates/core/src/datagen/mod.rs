//! Deterministic synthetic data: rotated glyphs, rotated tetracubes,
//! stratified dataset splits, and volume/image file I/O.

mod dataset;
mod glyph;
mod grid;
mod resample;
mod tetromino;
mod volume;

pub use dataset::{build_dataset, canonical_exemplar, DatasetConfig, DatasetKind, DatasetManifest, LabelledSample, Split};
pub use glyph::{canonical_glyph, make_glyph, parse_symbol, rotate_binary, GLYPH_ROSTER};
pub use grid::Grid;
pub use resample::{cos_sin_deg, gaussian_blur_2d, resize, rotate_2d, rotation_matrix, transform_3d};
pub use tetromino::{
    fuse_cubes, is_face_connected, make_cube_shape, make_tetromino, make_unseen_fusion, render_cubes, Cube, CubeShape,
    TetrominoShape,
};
pub use volume::{decode_pgm, decode_volume, encode_pgm, encode_volume, read_volume, write_pgm, write_volume};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("unknown class `{0}`")]
    Roster(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("placement error: {0}")]
    Placement(String),
    #[error("fusion error: {0}")]
    Fusion(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
