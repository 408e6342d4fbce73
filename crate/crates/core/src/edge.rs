//! Certainty-region partitioning and the blur-equivalent edge estimator.
//!
//! The certainty map `M(p) = |y(p)| / |y_ref(p)|` compares distorted and
//! reference visual-map magnitudes. Pixels at or above the natural-vision
//! threshold `M_bar` form the cold region of strong isolated edges; valid
//! pixels below it form the hot region of textures. The edge score combines
//! a generic distortion term with a focusing term computed on a copy of the
//! reference re-blurred at the equivalent blur level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::{LuminanceImage, ScalarField};
use crate::model::{
    certainty_threshold, equivalent_blur_clamped, CanonicalParams, DmosScore, NormalizedBlur,
    ViewerGeometry,
};
use crate::scalar::{lit, Scalar};
use crate::vrf::{
    gaussian_blur, gradient_energy, kernel_sigma, visual_map, KernelSpec, VisualMap, WindowSpec,
};

/// Reference magnitudes below `floor = RELATIVE_MAGNITUDE_FLOOR * max |y_ref|`
/// mark a pixel invalid: the ratio there is noise-dominated.
pub const RELATIVE_MAGNITUDE_FLOOR: f64 = 1e-3;

/// Energy ratios are clamped to `[0, LAMBDA_RATIO_CLAMP]` before
/// exponentiation so sharpening-type distortions cannot let single pixels
/// dominate the pooled mean.
pub const LAMBDA_RATIO_CLAMP: f64 = 4.0;

/// Exponent of the generic distortion term.
pub const DISTORTION_EXPONENT: f64 = 0.65;

/// Exponent of the focusing term.
pub const FOCUSING_EXPONENT: f64 = 1.35;

/// Normalized blur assumed for the provisional first-pass partition, before
/// an equivalent blur is known. A mild prior keeps the cold set inclusive.
pub const FIRST_PASS_XI: f64 = 0.5;

/// Per-pixel magnitude ratio plus the validity mask.
#[derive(Clone, Debug)]
pub struct CertaintyMap<T> {
    values: ScalarField<T>,
    valid: Vec<bool>,
}

impl<T: Scalar> CertaintyMap<T> {
    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    /// Ratio values; only meaningful where [`Self::is_valid`] holds.
    pub fn values(&self) -> &ScalarField<T> {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    /// Test/diagnostic constructor.
    pub fn from_parts(values: ScalarField<T>, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != values.samples().len() {
            return Err(Error::Dimension(
                "validity mask must match the value field".into(),
            ));
        }
        Ok(Self { values, valid })
    }
}

/// Cold/hot pixel split induced by a certainty threshold.
#[derive(Clone, Debug)]
pub struct RegionPartition<T> {
    cold: Vec<usize>,
    hot: Vec<usize>,
    threshold: T,
}

impl<T: Scalar> RegionPartition<T> {
    /// Indices with `M >= threshold` (strong isolated edges).
    pub fn cold(&self) -> &[usize] {
        &self.cold
    }

    /// Valid indices with `M < threshold` (textures).
    pub fn hot(&self) -> &[usize] {
        &self.hot
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }
}

/// Output of the edge pipeline for one image pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore<T> {
    /// Combined score on the DMOS scale.
    pub bele_cold: T,
    /// Generic distortion term, in `[0, 1]`.
    pub d_distortion: T,
    /// Focusing term, in `[0, 1]`.
    pub d_focus: T,
    /// Equivalent blur used for the focusing pass.
    pub xi_eq: T,
    /// Provisional score that seeded the equivalent-blur inversion.
    pub first_pass_dmos: T,
}

/// Certainty map `M(p) = |y_dist(p)| / |y_ref(p)|` over pixels whose
/// reference magnitude clears the relative floor.
pub fn certainty_map<T: Scalar>(
    ref_map: &VisualMap<T>,
    dist_map: &VisualMap<T>,
) -> Result<CertaintyMap<T>> {
    if ref_map.width() != dist_map.width() || ref_map.height() != dist_map.height() {
        return Err(Error::Dimension(format!(
            "certainty map needs equal shapes, got {}x{} vs {}x{}",
            ref_map.width(),
            ref_map.height(),
            dist_map.width(),
            dist_map.height()
        )));
    }
    let ref_mag: Vec<T> = ref_map.values().iter().map(|v| v.norm()).collect();
    let max_mag = ref_mag.iter().fold(T::zero(), |acc, &v| acc.max(v));
    let floor = max_mag * lit(RELATIVE_MAGNITUDE_FLOOR);

    let mut values = vec![T::zero(); ref_mag.len()];
    let mut valid = vec![false; ref_mag.len()];
    for (i, (&rm, dv)) in ref_mag.iter().zip(dist_map.values()).enumerate() {
        if rm >= floor && rm > T::zero() {
            values[i] = dv.norm() / rm;
            valid[i] = true;
        }
    }
    Ok(CertaintyMap {
        values: ScalarField::new(ref_map.width(), ref_map.height(), values)?,
        valid,
    })
}

/// Split valid pixels at threshold `m_bar`; the cold set must be nonempty.
pub fn partition<T: Scalar>(cmap: &CertaintyMap<T>, m_bar: T) -> Result<RegionPartition<T>> {
    if !m_bar.is_finite() || m_bar <= T::zero() || m_bar > T::one() {
        return Err(Error::Domain(format!("threshold must lie in (0, 1], got {m_bar:?}")));
    }
    let mut cold = Vec::new();
    let mut hot = Vec::new();
    for (i, &v) in cmap.values.samples().iter().enumerate() {
        if !cmap.valid[i] {
            continue;
        }
        if v >= m_bar {
            cold.push(i);
        } else {
            hot.push(i);
        }
    }
    if cold.is_empty() {
        return Err(Error::Degenerate(
            "cold region is empty: no pixel reaches the certainty threshold".into(),
        ));
    }
    Ok(RegionPartition { cold, hot, threshold: m_bar })
}

fn check_field_pair<T: Scalar>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "energy fields must share shape, got {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean of clamped `lambda/lambda_ref` ratios raised to `exponent`, over the
/// cold region.
fn pooled_ratio<T: Scalar>(
    lambda_dist: &ScalarField<T>,
    lambda_ref: &ScalarField<T>,
    region: &RegionPartition<T>,
    exponent: f64,
) -> Result<T> {
    check_field_pair(lambda_dist, lambda_ref)?;
    if region.cold.is_empty() {
        return Err(Error::Degenerate("cold region is empty".into()));
    }
    let clamp = lit::<T>(LAMBDA_RATIO_CLAMP);
    let exp = lit::<T>(exponent);
    let mut acc = T::zero();
    for &idx in &region.cold {
        let denom = lambda_ref.samples()[idx];
        if denom <= T::zero() {
            return Err(Error::Degenerate(
                "reference gradient energy vanishes on a cold pixel".into(),
            ));
        }
        let ratio = (lambda_dist.samples()[idx] / denom).max(T::zero()).min(clamp);
        acc += ratio.powf(exp);
    }
    Ok(acc / T::from_usize(region.cold.len()).unwrap())
}

/// Empirical DMOS estimator `100*Q*(1 - sqrt(R))` with `R` the mean energy
/// ratio over the cold region.
pub fn empirical_dmos<T: Scalar>(
    params: &CanonicalParams<T>,
    lambda_dist: &ScalarField<T>,
    lambda_ref: &ScalarField<T>,
    region: &RegionPartition<T>,
) -> Result<DmosScore<T>> {
    let mean = pooled_ratio(lambda_dist, lambda_ref, region, 1.0)?;
    let raw = params.anchor() * (T::one() - mean.sqrt());
    DmosScore::new(raw.max(T::zero()).min(params.anchor()))
}

/// Generic distortion term `1 - sqrt(mean (lambda/lambda_ref)^0.65)`,
/// clamped to `[0, 1]`.
pub fn distortion_term<T: Scalar>(
    lambda_dist: &ScalarField<T>,
    lambda_ref: &ScalarField<T>,
    region: &RegionPartition<T>,
) -> Result<T> {
    let mean = pooled_ratio(lambda_dist, lambda_ref, region, DISTORTION_EXPONENT)?;
    Ok((T::one() - mean.sqrt()).max(T::zero()).min(T::one()))
}

/// Focusing term `1 - sqrt(mean (lambda_w/lambda_ref)^1.35)` where
/// `lambda_w` comes from the equivalent-blur image, clamped to `[0, 1]`.
pub fn focusing_term<T: Scalar>(
    lambda_blur_eq: &ScalarField<T>,
    lambda_ref: &ScalarField<T>,
    region: &RegionPartition<T>,
) -> Result<T> {
    let mean = pooled_ratio(lambda_blur_eq, lambda_ref, region, FOCUSING_EXPONENT)?;
    Ok((T::one() - mean.sqrt()).max(T::zero()).min(T::one()))
}

/// Everything the two-pass pipeline produced for one pair, for consumers
/// that also need the maps and final partition (e.g. the texture index).
pub struct PairAnalysis<T> {
    pub score: EdgeScore<T>,
    pub ref_map: VisualMap<T>,
    pub dist_map: VisualMap<T>,
    pub certainty: CertaintyMap<T>,
    pub partition: RegionPartition<T>,
}

/// Blur-equivalent edge score over the cold region.
///
/// Two-pass pipeline: visual maps and energies at the distance-scaled kernel;
/// a provisional distortion score over an inclusive first-pass partition; the
/// equivalent blur from inverting the canonical model on that score; the
/// reference re-blurred at the equivalent level for the focusing term; and a
/// final partition at the equivalent-blur threshold combining both terms.
pub fn bele_cold<T: Scalar>(
    reference: &LuminanceImage<T>,
    distorted: &LuminanceImage<T>,
    params: &CanonicalParams<T>,
    geometry: &ViewerGeometry<T>,
) -> Result<EdgeScore<T>> {
    analyze_pair(reference, distorted, params, geometry).map(|a| a.score)
}

/// Full pipeline behind [`bele_cold`], exposing the intermediate products.
pub fn analyze_pair<T: Scalar>(
    reference: &LuminanceImage<T>,
    distorted: &LuminanceImage<T>,
    params: &CanonicalParams<T>,
    geometry: &ViewerGeometry<T>,
) -> Result<PairAnalysis<T>> {
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::Dimension(format!(
            "image pair must share dimensions, got {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    let sigma = kernel_sigma(geometry);
    let kernel = KernelSpec::from_sigma(sigma)?;
    let window = WindowSpec::gaussian(sigma)?;

    // Pass 1: maps, energies, provisional partition and score.
    let ref_map = visual_map(reference, &kernel)?;
    let dist_map = visual_map(distorted, &kernel)?;
    let lambda_ref = gradient_energy(&ref_map, &window)?;
    let lambda_dist = gradient_energy(&dist_map, &window)?;
    let certainty = certainty_map(&ref_map, &dist_map)?;

    let first_bar = certainty_threshold(NormalizedBlur::new(lit::<T>(FIRST_PASS_XI)).unwrap());
    let provisional = partition(&certainty, first_bar)?;
    let d_hat = distortion_term(&lambda_dist, &lambda_ref, &provisional)?;
    let first_pass_dmos = DmosScore::new(params.anchor() * d_hat)?;

    // Pass 2: equivalent blur, focusing energies, final partition.
    let xi_eq = equivalent_blur_clamped(first_pass_dmos, params);
    let s_eq = xi_eq.value() * geometry.s_g_pixels();
    let focused = gaussian_blur(reference, s_eq)?;
    let focus_map = visual_map(&focused, &kernel)?;
    let lambda_focus = gradient_energy(&focus_map, &window)?;

    let final_bar = certainty_threshold(xi_eq);
    let final_partition = partition(&certainty, final_bar)?;

    let d_distortion = distortion_term(&lambda_dist, &lambda_ref, &final_partition)?;
    let d_focus = focusing_term(&lambda_focus, &lambda_ref, &final_partition)?;
    let combined = combine_terms(params, d_distortion, d_focus);

    Ok(PairAnalysis {
        score: EdgeScore {
            bele_cold: combined,
            d_distortion,
            d_focus,
            xi_eq: xi_eq.value(),
            first_pass_dmos: first_pass_dmos.value(),
        },
        ref_map,
        dist_map,
        certainty,
        partition: final_partition,
    })
}

/// Combination rule `100*Q*(1 - (1 - d_distortion)*(1 - d_focus))`.
pub fn combine_terms<T: Scalar>(params: &CanonicalParams<T>, d_distortion: T, d_focus: T) -> T {
    params.anchor() * (T::one() - (T::one() - d_distortion) * (T::one() - d_focus))
}
