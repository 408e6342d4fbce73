//! Complex visual maps, Gaussian blurring and smoothed gradient energy.
//!
//! The receptive-field filter is realized as a pair of separable
//! derivative-of-Gaussian kernels: the x-derivative of a Gaussian-smoothed
//! image forms the real part of the map, the y-derivative the imaginary
//! part. Magnitude then encodes local edge strength and phase encodes
//! gradient orientation.
//!
//! All convolutions use symmetric (reflect) padding so that image borders do
//! not produce spurious edge responses. Kernels are truncated at radius
//! `ceil(3*sigma)` and renormalized. Small kernels run as direct separable
//! passes; spreads above [`DIRECT_SIGMA_LIMIT`] switch to a frequency-domain
//! path that matches the direct one to high precision (tested).

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image_io::{LuminanceImage, ScalarField};
use crate::model::ViewerGeometry;
use crate::scalar::{lit, Scalar};

/// Largest spread handled by direct separable convolution.
pub const DIRECT_SIGMA_LIMIT: f64 = 8.0;

/// Which convolution engine to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConvolutionStrategy {
    /// Direct below [`DIRECT_SIGMA_LIMIT`], frequency-domain above.
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Receptive-field kernel: spread in pixels plus truncation radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec<T> {
    sigma_pixels: T,
    radius: usize,
}

impl<T: Scalar> KernelSpec<T> {
    /// Kernel with the standard truncation radius `ceil(3*sigma)`.
    pub fn from_sigma(sigma_pixels: T) -> Result<Self> {
        let radius = default_radius(sigma_pixels)?;
        Self::new(sigma_pixels, radius)
    }

    /// Kernel with an explicit radius, which must cover `ceil(3*sigma)`.
    pub fn new(sigma_pixels: T, radius: usize) -> Result<Self> {
        if !sigma_pixels.is_finite() || sigma_pixels <= T::zero() {
            return Err(Error::Domain(format!(
                "kernel sigma must be positive, got {sigma_pixels:?}"
            )));
        }
        if radius < default_radius(sigma_pixels)? {
            return Err(Error::Domain(format!(
                "kernel radius {radius} below ceil(3*sigma)"
            )));
        }
        Ok(Self { sigma_pixels, radius })
    }

    pub fn sigma_pixels(&self) -> T {
        self.sigma_pixels
    }

    pub fn radius(&self) -> usize {
        self.radius
    }
}

fn default_radius<T: Scalar>(sigma: T) -> Result<usize> {
    let s = sigma.to_f64().unwrap_or(f64::NAN);
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain(format!("sigma must be positive, got {s}")));
    }
    Ok(((3.0 * s).ceil() as usize).max(1))
}

/// Sampling window for gradient-energy pooling.
///
/// Separable and normalized so the squared taps sum to one, which makes the
/// energy of a unit-magnitude map exactly 1.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec<T> {
    axis: Vec<T>,
    radius: usize,
}

impl<T: Scalar> WindowSpec<T> {
    /// Isotropic Gaussian window with std `sigma` and radius `ceil(3*sigma)`.
    pub fn gaussian(sigma: T) -> Result<Self> {
        let radius = default_radius(sigma)?;
        let mut axis = sampled_gaussian(sigma, radius);
        normalize_sq(&mut axis);
        Ok(Self { axis, radius })
    }

    /// Flat window over a `(2r+1)^2` support.
    pub fn boxcar(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Domain("boxcar window needs radius >= 1".into()));
        }
        let n = 2 * radius + 1;
        let tap = T::one() / T::from_usize(n).unwrap().sqrt();
        Ok(Self { axis: vec![tap; n], radius })
    }

    /// Raised-cosine (Hann) window.
    pub fn raised_cosine(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Domain("raised-cosine window needs radius >= 1".into()));
        }
        let mut axis: Vec<T> = (-(radius as isize)..=radius as isize)
            .map(|t| {
                let phase = lit::<T>(std::f64::consts::PI) * T::from_isize(t).unwrap()
                    / T::from_usize(radius + 1).unwrap();
                lit::<T>(0.5) * (T::one() + phase.cos())
            })
            .collect();
        normalize_sq(&mut axis);
        Ok(Self { axis, radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Full square tap grid `w(q)`, row-major over `(2r+1)^2`.
    pub fn weights(&self) -> Vec<T> {
        let n = self.axis.len();
        let mut out = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                out.push(self.axis[y] * self.axis[x]);
            }
        }
        out
    }
}

fn normalize_sq<T: Scalar>(axis: &mut [T]) {
    let sum_sq = axis.iter().fold(T::zero(), |acc, &v| acc + v * v);
    let scale = T::one() / sum_sq.sqrt();
    for v in axis.iter_mut() {
        *v *= scale;
    }
}

/// Complex field produced by the receptive-field filter.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualMap<T> {
    width: usize,
    height: usize,
    values: Vec<Complex<T>>,
    sigma_pixels: T,
}

impl<T: Scalar> VisualMap<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Kernel spread used to produce this map.
    pub fn sigma_pixels(&self) -> T {
        self.sigma_pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex<T> {
        self.values[y * self.width + x]
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Test/diagnostic constructor for synthetic maps.
    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<Complex<T>>,
        sigma_pixels: T,
    ) -> Result<Self> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "expected {width}x{height} = {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("visual map values must be finite".into()));
        }
        Ok(Self { width, height, values, sigma_pixels })
    }
}

/// Receptive-field spread in pixels at viewing distance `tau`:
/// `sigma = s_g_pixels * tau^2`.
pub fn kernel_sigma<T: Scalar>(geometry: &ViewerGeometry<T>) -> T {
    geometry.s_g_pixels() * geometry.tau * geometry.tau
}

/// Compute the complex visual map of `image`, choosing the engine by kernel size.
pub fn visual_map<T: Scalar>(
    image: &LuminanceImage<T>,
    kernel: &KernelSpec<T>,
) -> Result<VisualMap<T>> {
    visual_map_with_strategy(image, kernel, ConvolutionStrategy::Auto)
}

/// [`visual_map`] with an explicit engine choice (the two agree to high
/// precision; the split exists for speed only).
pub fn visual_map_with_strategy<T: Scalar>(
    image: &LuminanceImage<T>,
    kernel: &KernelSpec<T>,
    strategy: ConvolutionStrategy,
) -> Result<VisualMap<T>> {
    let (w, h) = (image.width(), image.height());
    let radius = kernel.radius();
    if radius > w.min(h) / 2 {
        return Err(Error::Dimension(format!(
            "kernel radius {radius} exceeds half the smaller image side of {w}x{h}"
        )));
    }
    let (smooth, deriv) = kernel_taps(kernel.sigma_pixels(), radius);
    let values = match resolve(strategy, kernel.sigma_pixels()) {
        Engine::Direct => {
            let re = separable_corr(image.samples(), w, h, &deriv, &smooth);
            let im = separable_corr(image.samples(), w, h, &smooth, &deriv);
            re.into_iter().zip(im).map(|(r, i)| Complex::new(r, i)).collect()
        }
        Engine::Fft => {
            complex_corr_fft(image.samples(), w, h, radius, (&deriv, &smooth), (&smooth, &deriv))
        }
    };
    Ok(VisualMap { width: w, height: h, values, sigma_pixels: kernel.sigma_pixels() })
}

/// Isotropic Gaussian blur with spread `s_b_pixels`; zero spread returns the
/// image unchanged.
pub fn gaussian_blur<T: Scalar>(image: &LuminanceImage<T>, s_b_pixels: T) -> Result<LuminanceImage<T>> {
    gaussian_blur_with_strategy(image, s_b_pixels, ConvolutionStrategy::Auto)
}

pub fn gaussian_blur_with_strategy<T: Scalar>(
    image: &LuminanceImage<T>,
    s_b_pixels: T,
    strategy: ConvolutionStrategy,
) -> Result<LuminanceImage<T>> {
    if !s_b_pixels.is_finite() || s_b_pixels < T::zero() {
        return Err(Error::Domain(format!("blur spread must be >= 0, got {s_b_pixels:?}")));
    }
    if s_b_pixels == T::zero() {
        return Ok(image.clone());
    }
    let (w, h) = (image.width(), image.height());
    let radius = default_radius(s_b_pixels)?;
    let mut taps = sampled_gaussian(s_b_pixels, radius);
    normalize_sum(&mut taps);
    let blurred = match resolve(strategy, s_b_pixels) {
        Engine::Direct => separable_corr(image.samples(), w, h, &taps, &taps),
        Engine::Fft => {
            let zero = vec![T::zero(); taps.len()];
            let complex =
                complex_corr_fft(image.samples(), w, h, radius, (&taps, &taps), (&zero, &zero));
            complex.into_iter().map(|v| v.re).collect()
        }
    };
    // Convex combinations of [0,1] samples can only leave the range by
    // floating-point dust.
    let clamped: Vec<T> = blurred.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect();
    LuminanceImage::new(w, h, clamped)
}

/// Smoothed gradient energy `lambda(p) = sum_q w(q)^2 |y(p - q)|^2`.
pub fn gradient_energy<T: Scalar>(
    map: &VisualMap<T>,
    window: &WindowSpec<T>,
) -> Result<ScalarField<T>> {
    let (w, h) = (map.width(), map.height());
    if window.radius() > w.min(h) / 2 {
        return Err(Error::Dimension(format!(
            "window radius {} exceeds half the smaller map side of {w}x{h}",
            window.radius()
        )));
    }
    let energy: Vec<T> = map.values().iter().map(|v| v.norm_sqr()).collect();
    // Convolution with the squared window taps; per-axis taps are w^2 of the
    // separable factor. Taps are reversed to honor the p - q indexing.
    let mut sq: Vec<T> = window.axis.iter().map(|&v| v * v).collect();
    sq.reverse();
    let pooled = separable_corr(&energy, w, h, &sq, &sq);
    ScalarField::new(w, h, pooled)
}

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

/// Unnormalized Gaussian samples over `[-radius, radius]`.
fn sampled_gaussian<T: Scalar>(sigma: T, radius: usize) -> Vec<T> {
    let two = lit::<T>(2.0);
    (-(radius as isize)..=radius as isize)
        .map(|t| {
            let x = T::from_isize(t).unwrap();
            (-(x * x) / (two * sigma * sigma)).exp()
        })
        .collect()
}

fn normalize_sum<T: Scalar>(taps: &mut [T]) {
    let sum = taps.iter().fold(T::zero(), |acc, &v| acc + v);
    for v in taps.iter_mut() {
        *v /= sum;
    }
}

/// Smoothing taps (sum 1) and derivative taps `t/sigma^2 * g(t)`.
///
/// Correlating rows with the derivative taps and columns with the smoothing
/// taps yields the x-derivative of the Gaussian-smoothed image, positive on a
/// rising edge.
fn kernel_taps<T: Scalar>(sigma: T, radius: usize) -> (Vec<T>, Vec<T>) {
    let mut smooth = sampled_gaussian(sigma, radius);
    normalize_sum(&mut smooth);
    let deriv: Vec<T> = smooth
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let t = T::from_isize(i as isize - radius as isize).unwrap();
            t / (sigma * sigma) * g
        })
        .collect();
    (smooth, deriv)
}

// ---------------------------------------------------------------------------
// direct engine
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Engine {
    Direct,
    Fft,
}

fn resolve<T: Scalar>(strategy: ConvolutionStrategy, sigma: T) -> Engine {
    match strategy {
        ConvolutionStrategy::Direct => Engine::Direct,
        ConvolutionStrategy::Fft => Engine::Fft,
        ConvolutionStrategy::Auto => {
            if sigma.to_f64().unwrap_or(0.0) <= DIRECT_SIGMA_LIMIT {
                Engine::Direct
            } else {
                Engine::Fft
            }
        }
    }
}

/// Symmetric (half-sample) reflection, folded until in range.
#[inline]
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Row pass then column pass, correlation semantics with reflect padding.
fn separable_corr<T: Scalar>(src: &[T], w: usize, h: usize, row_taps: &[T], col_taps: &[T]) -> Vec<T> {
    let row_r = (row_taps.len() / 2) as isize;
    let mut tmp = vec![T::zero(); src.len()];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &tap) in row_taps.iter().enumerate() {
                let t = k as isize - row_r;
                acc += tap * row[reflect(x as isize + t, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let col_r = (col_taps.len() / 2) as isize;
    let mut out = vec![T::zero(); src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &tap) in col_taps.iter().enumerate() {
                let t = k as isize - col_r;
                acc += tap * tmp[reflect(y as isize + t, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// frequency-domain engine
// ---------------------------------------------------------------------------

/// Correlation of `src` with the complex separable kernel whose real part is
/// `re.0 (rows) x re.1 (cols)` and imaginary part `im.0 x im.1`, matching the
/// direct engine up to rounding. The image is reflect-padded by the kernel
/// radius so circular wrap-around never reaches valid output pixels.
fn complex_corr_fft<T: Scalar>(
    src: &[T],
    w: usize,
    h: usize,
    radius: usize,
    re: (&[T], &[T]),
    im: (&[T], &[T]),
) -> Vec<Complex<T>> {
    let pw = w + 2 * radius;
    let ph = h + 2 * radius;

    // Reflect-padded copy of the image.
    let mut padded = vec![Complex::new(T::zero(), T::zero()); pw * ph];
    for py in 0..ph {
        let sy = reflect(py as isize - radius as isize, h);
        for px in 0..pw {
            let sx = reflect(px as isize - radius as isize, w);
            padded[py * pw + px] = Complex::new(src[sy * w + sx], T::zero());
        }
    }

    // Correlation kernel embedded as a convolution kernel (flipped), wrapped
    // so the origin sits at index (0, 0).
    let r = radius as isize;
    let mut kern = vec![Complex::new(T::zero(), T::zero()); pw * ph];
    let wrap = |t: isize, n: usize| -> usize {
        let n = n as isize;
        (((t % n) + n) % n) as usize
    };
    let at = |taps: &[T], t: isize| taps[(t + r) as usize];
    for qy in -r..=r {
        for qx in -r..=r {
            // conv kernel k(q) = corr taps c(-q)
            let re_val = at(re.0, -qx) * at(re.1, -qy);
            let im_val = at(im.0, -qx) * at(im.1, -qy);
            kern[wrap(qy, ph) * pw + wrap(qx, pw)] = Complex::new(re_val, im_val);
        }
    }

    fft2d(&mut padded, pw, ph, false);
    fft2d(&mut kern, pw, ph, false);
    for (p, k) in padded.iter_mut().zip(&kern) {
        *p *= *k;
    }
    fft2d(&mut padded, pw, ph, true);
    let scale = T::one() / T::from_usize(pw * ph).unwrap();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(padded[(y + radius) * pw + (x + radius)] * scale);
        }
    }
    out
}

fn fft2d<T: Scalar>(data: &mut [Complex<T>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let row_fft = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut transposed = vec![Complex::new(T::zero(), T::zero()); data.len()];
    for y in 0..h {
        for x in 0..w {
            transposed[x * h + y] = data[y * w + x];
        }
    }
    let col_fft = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    for col in transposed.chunks_exact_mut(h) {
        col_fft.process(col);
    }
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = transposed[x * h + y];
        }
    }
}
