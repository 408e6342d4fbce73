//! Complex PSNR over the hot (texture) region.
//!
//! The squared map difference is pooled over hot pixels and normalized by
//! the largest magnitude seen there on either side, so the score is
//! homogeneous of degree zero in the common map scale. Dividing by the hot
//! pixel count makes the value resolution-independent.

use serde::{Deserialize, Serialize};

use crate::edge::RegionPartition;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vrf::VisualMap;

/// MSE values below this floor report the capped score.
pub const MSE_FLOOR: f64 = 1e-10;

/// Cap in dB; equals `-10 log10(MSE_FLOOR)`.
pub const CPSNR_CAP_DB: f64 = 100.0;

/// Texture score for one image pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureScore {
    /// `-10 log10(mse)`, capped at [`CPSNR_CAP_DB`].
    pub cpsnr_db: f64,
    /// Normalized mean squared map error over the hot region.
    pub mse: f64,
    /// Number of hot pixels pooled; 0 flags a degenerate (all-cold) pair.
    pub n_hot: usize,
}

/// Complex PSNR between two visual maps over the hot region.
///
/// `mse = sum |y_ref - y_dist|^2 / (n_hot * max_hot(|y_ref|^2, |y_dist|^2))`.
/// Symmetric in its map arguments. An empty hot region returns the capped
/// score with `n_hot = 0`.
pub fn cpsnr<T: Scalar>(
    ref_map: &VisualMap<T>,
    dist_map: &VisualMap<T>,
    region: &RegionPartition<T>,
) -> Result<TextureScore> {
    if ref_map.width() != dist_map.width() || ref_map.height() != dist_map.height() {
        return Err(Error::Dimension(format!(
            "cpsnr needs equal map shapes, got {}x{} vs {}x{}",
            ref_map.width(),
            ref_map.height(),
            dist_map.width(),
            dist_map.height()
        )));
    }
    let hot = region.hot();
    if hot.is_empty() {
        return Ok(TextureScore { cpsnr_db: CPSNR_CAP_DB, mse: 0.0, n_hot: 0 });
    }
    let mut numerator = 0.0f64;
    let mut peak = 0.0f64;
    for &idx in hot {
        let a = ref_map.values()[idx];
        let b = dist_map.values()[idx];
        numerator += (a - b).norm_sqr().to_f64().unwrap_or(f64::NAN);
        peak = peak.max(a.norm_sqr().to_f64().unwrap_or(0.0));
        peak = peak.max(b.norm_sqr().to_f64().unwrap_or(0.0));
    }
    if peak <= 0.0 {
        // Both maps vanish on the hot set; nothing to normalize against.
        return Ok(TextureScore { cpsnr_db: CPSNR_CAP_DB, mse: 0.0, n_hot: hot.len() });
    }
    let mse = numerator / (hot.len() as f64 * peak);
    let cpsnr_db = if mse < MSE_FLOOR { CPSNR_CAP_DB } else { -10.0 * mse.log10() };
    Ok(TextureScore { cpsnr_db, mse, n_hot: hot.len() })
}
