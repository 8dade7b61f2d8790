use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::graph::{GraphModel, ModelError};
use super::grid::{grid_edge_count, grid_model};

/// Binary image, row-major, pixels in `{+1, -1}` (+1 = white).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<i8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<i8>) -> Result<Self, ModelError> {
        if pixels.len() != width * height {
            return Err(ModelError::DimensionMismatch {
                what: "pixels",
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(&p) = pixels.iter().find(|&&p| p != 1 && p != -1) {
            return Err(ModelError::NotASign(p));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[i8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.pixels[row * self.width + col]
    }

    /// Fraction of pixels that differ from `other`.
    pub fn disagreement(&self, other: &BinaryImage) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let d = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .filter(|(a, b)| a != b)
            .count();
        d as f64 / self.pixels.len() as f64
    }
}

/// Pixel corruption process applied by [`add_noise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Each pixel flips independently with probability `p`.
    Bernoulli,
    /// Each pixel is independently chosen as a block center with
    /// probability `p`; the 3x3 block around every center (clipped at
    /// the borders) flips. A pixel covered by one or more blocks flips
    /// exactly once.
    Blockwise,
}

/// Corrupts `image` with the given noise process. Draws are made in
/// row-major pixel order from a ChaCha stream, so output is a pure
/// function of `(image, kind, p, seed)`.
pub fn add_noise(image: &BinaryImage, kind: NoiseKind, p: f64, seed: u64) -> BinaryImage {
    assert!((0.0..=1.0).contains(&p), "flip probability must be in [0, 1]");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (w, h) = (image.width(), image.height());
    let mut flip = vec![false; w * h];
    match kind {
        NoiseKind::Bernoulli => {
            for f in flip.iter_mut() {
                *f = rng.random::<f64>() < p;
            }
        }
        NoiseKind::Blockwise => {
            let mut centers = Vec::new();
            for idx in 0..w * h {
                if rng.random::<f64>() < p {
                    centers.push(idx);
                }
            }
            for idx in centers {
                let (r, c) = (idx / w, idx % w);
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        if (0..h as i64).contains(&rr) && (0..w as i64).contains(&cc) {
                            flip[rr as usize * w + cc as usize] = true;
                        }
                    }
                }
            }
        }
    }
    let pixels = image
        .pixels()
        .iter()
        .zip(&flip)
        .map(|(&px, &f)| if f { -px } else { px })
        .collect();
    BinaryImage::new(w, h, pixels).expect("flips preserve signs")
}

/// Denoising model on the pixel grid of a square observation `y`:
/// every grid edge gets weight +1 (smoothness) and each vertex gets
/// `θᵛ_i = θ₀ · y_i` (data fidelity). MAP assignments are denoised
/// reconstructions.
pub fn gen_denoise_model(observed: &BinaryImage, theta0: f64) -> Result<GraphModel, ModelError> {
    let side = observed.width();
    if observed.height() != side {
        return Err(ModelError::DimensionMismatch {
            what: "square image rows",
            expected: side,
            got: observed.height(),
        });
    }
    assert!(side >= 2, "denoising grid needs side >= 2");
    let edge_weights = vec![1.0; grid_edge_count(side)];
    let vertex_weights: Vec<f64> = observed
        .pixels()
        .iter()
        .map(|&y| theta0 * f64::from(y))
        .collect();
    grid_model(side, &edge_weights, &vertex_weights)
}
