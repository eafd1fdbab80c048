//! The deterministic reference embedder recipe.
//!
//! Text: lowercase, pad with one space on each side, take every window of
//! three Unicode scalar values, hash its UTF-8 bytes with 64-bit FNV-1a into
//! one of 4096 buckets, count, project through a seeded Gaussian matrix and
//! normalize.
//!
//! Images: convert RGB to luma `(0.299 r + 0.587 g + 0.114 b) / 255`,
//! average-pool onto a 16×16 grid, subtract 0.5, project through a second
//! seeded Gaussian matrix and normalize.
//!
//! Matrices are filled row-major (`rows × dim`) with standard normals drawn
//! from SplitMix64 seeded with `seed ^ family_salt` (see [`MatrixFamily`]).
//! The vectors carry no semantics beyond character overlap and pixel layout;
//! they make every pipeline testable without a model.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::Embedding;
use crate::error::CoreError;
use crate::rng::SplitMix64;

pub const TEXT_BUCKETS: usize = 4096;
pub const IMAGE_GRID: usize = 16;
pub const IMAGE_FEATURES: usize = IMAGE_GRID * IMAGE_GRID;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Which projection matrix of the family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFamily {
    Text,
    Image,
}

impl MatrixFamily {
    /// XORed into the seed before the matrix stream starts.
    pub const fn salt(self) -> u64 {
        match self {
            MatrixFamily::Text => 0,
            MatrixFamily::Image => 0x494d_4147, // "IMAG"
        }
    }

    pub const fn rows(self) -> usize {
        match self {
            MatrixFamily::Text => TEXT_BUCKETS,
            MatrixFamily::Image => IMAGE_FEATURES,
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Sparse trigram bucket counts, ascending by bucket.
pub fn text_features(text: &str) -> Vec<(usize, f64)> {
    let mut padded = String::with_capacity(text.len() + 2);
    padded.push(' ');
    padded.push_str(&text.to_lowercase());
    padded.push(' ');
    let chars: Vec<char> = padded.chars().collect();
    let mut counts = vec![0u32; TEXT_BUCKETS];
    let mut buf = [0u8; 12];
    for window in chars.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let bucket = (fnv1a64(&buf[..len]) % TEXT_BUCKETS as u64) as usize;
        counts[bucket] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &c)| (b, c as f64))
        .collect()
}

/// Centered 16×16 mean-luma grid of an RGB8 buffer, flattened row-major.
///
/// Cell `(gy, gx)` averages rows `[gy·h/16, max((gy+1)·h/16, gy·h/16 + 1))`
/// and the analogous columns (integer division), so images smaller than the
/// grid repeat their pixels.
pub fn luma_grid(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<f64>, CoreError> {
    if width == 0 || height == 0 {
        return Err(CoreError::InvalidConfig("image has no pixels".into()));
    }
    if rgb.len() != width * height * 3 {
        return Err(CoreError::DimensionMismatch {
            expected: width * height * 3,
            actual: rgb.len(),
        });
    }
    let span = |cell: usize, extent: usize| {
        let lo = cell * extent / IMAGE_GRID;
        let hi = ((cell + 1) * extent / IMAGE_GRID).max(lo + 1).min(extent);
        (lo, hi)
    };
    let mut grid = Vec::with_capacity(IMAGE_FEATURES);
    for gy in 0..IMAGE_GRID {
        let (y0, y1) = span(gy, height);
        for gx in 0..IMAGE_GRID {
            let (x0, x1) = span(gx, width);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = (y * width + x) * 3;
                    sum += (0.299 * rgb[p] as f64 + 0.587 * rgb[p + 1] as f64 + 0.114 * rgb[p + 2] as f64)
                        / 255.0;
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            grid.push(sum / n - 0.5);
        }
    }
    Ok(grid)
}

/// A seeded Gaussian projection, `rows × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    rows: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl Projection {
    pub fn generate(family: MatrixFamily, dim: usize, seed: u64) -> Self {
        let rows = family.rows();
        let mut weights = vec![0.0; rows * dim];
        SplitMix64::new(seed ^ family.salt()).fill_gaussian(&mut weights);
        Projection { rows, dim, weights }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.dim..(r + 1) * self.dim]
    }

    /// `x · W` for a sparse `x`, summed in the order given.
    pub fn project_sparse(&self, features: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(r, x) in features {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += x * w;
            }
        }
        out
    }

    /// `x · W` for a dense `x` of length `rows`.
    pub fn project_dense(&self, features: &[f64]) -> Vec<f64> {
        debug_assert_eq!(features.len(), self.rows);
        let mut out = vec![0.0; self.dim];
        for (r, &x) in features.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += x * w;
            }
        }
        out
    }

    /// `W · y`: maps an output-space vector back onto the feature space.
    pub fn back_project(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.dim);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(y).map(|(w, v)| w * v).sum())
            .collect()
    }
}

/// Both projection matrices for one `(dim, seed)` pair.
#[derive(Debug, Clone)]
pub struct ReferenceRecipe {
    seed: u64,
    text: Projection,
    image: Projection,
}

impl ReferenceRecipe {
    pub fn new(dim: usize, seed: u64) -> Self {
        ReferenceRecipe {
            seed,
            text: Projection::generate(MatrixFamily::Text, dim, seed),
            image: Projection::generate(MatrixFamily::Image, dim, seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.text.dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn image_projection(&self) -> &Projection {
        &self.image
    }

    pub fn embed_text(&self, text: &str) -> Result<Embedding, CoreError> {
        Embedding::from_unnormalized(self.text.project_sparse(&text_features(text)))
    }

    pub fn embed_rgb(&self, width: usize, height: usize, rgb: &[u8]) -> Result<Embedding, CoreError> {
        self.embed_grid(&luma_grid(width, height, rgb)?)
    }

    pub fn embed_grid(&self, grid: &[f64]) -> Result<Embedding, CoreError> {
        if grid.len() != IMAGE_FEATURES {
            return Err(CoreError::DimensionMismatch {
                expected: IMAGE_FEATURES,
                actual: grid.len(),
            });
        }
        Embedding::from_unnormalized(self.image.project_dense(grid))
    }
}
