//! Bounded source generation, linear mixing, standardization, and whitening.
//!
//! The pipeline implemented here produces the white, zero-mean inputs consumed
//! by the online separation network: bounded sources are drawn (or ingested),
//! mixed through a full-rank linear map, and the mixtures are whitened with a
//! batch two-pass transform (mean removal, then covariance inverse square
//! root).

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::la;

/// Relative eigenvalue floor used for rank decisions while whitening.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Source distribution families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFamily {
    /// Independent draws, uniform between the per-source bounds.
    Uniform,
}

/// Specification of a bounded source ensemble.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub dim: usize,
    pub family: SourceFamily,
    /// Per-source lower bounds.
    pub low: Array1<f64>,
    /// Per-source upper bounds.
    pub high: Array1<f64>,
    pub rng_seed: u64,
}

impl SourceSpec {
    /// Uniform sources on `[low_i, high_i]` per component.
    pub fn uniform(low: Array1<f64>, high: Array1<f64>, rng_seed: u64) -> Result<Self> {
        let spec = Self {
            dim: low.len(),
            family: SourceFamily::Uniform,
            low,
            high,
            rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform sources sharing the same `[low, high]` interval.
    pub fn uniform_same(dim: usize, low: f64, high: f64, rng_seed: u64) -> Result<Self> {
        Self::uniform(
            Array1::from_elem(dim, low),
            Array1::from_elem(dim, high),
            rng_seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("source dimension must be >= 1".into()));
        }
        if self.low.len() != self.dim || self.high.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "bound vectors must have length {}, got low {} / high {}",
                self.dim,
                self.low.len(),
                self.high.len()
            )));
        }
        for i in 0..self.dim {
            let (lo, hi) = (self.low[i], self.high[i]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite(format!("bounds of source {i}")));
            }
            if lo >= hi {
                return Err(Error::InvalidParameter(format!(
                    "source {i} has degenerate range: low {lo} >= high {hi}"
                )));
            }
        }
        Ok(())
    }

    /// Analytic per-source moments `(mean, std)` for this family.
    fn analytic_moments(&self) -> (Array1<f64>, Array1<f64>) {
        match self.family {
            SourceFamily::Uniform => {
                let sqrt12 = 12.0_f64.sqrt();
                let mean = (&self.low + &self.high) * 0.5;
                let std = (&self.high - &self.low) / sqrt12;
                (mean, std)
            }
        }
    }
}

/// A batch of ground-truth sources with their standardized and scaled forms.
///
/// `standardized` has zero-mean, unit-variance rows; `scaled` divides each
/// standardized row by its bound `b_i = (r_i / 2) / sigma_i`, confining every
/// entry to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct SourceBatch {
    /// Raw samples, one row per source, one column per time step.
    pub raw: Array2<f64>,
    /// Per-source means used for centering.
    pub mean: Array1<f64>,
    /// Per-source standard deviations used for variance normalization.
    pub std: Array1<f64>,
    /// Per-source bounds of the standardized signal (always >= 1).
    pub bounds_b: Array1<f64>,
    /// Zero-mean, unit-variance rows.
    pub standardized: Array2<f64>,
    /// Standardized rows divided by their bounds; entries lie in `[-1, 1]`.
    pub scaled: Array2<f64>,
}

impl SourceBatch {
    pub fn dim(&self) -> usize {
        self.raw.nrows()
    }

    pub fn len(&self) -> usize {
        self.raw.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.ncols() == 0
    }
}

/// Draws `count` samples of uniform bounded sources.
///
/// Moments are analytic (`(low+high)/2`, `range/sqrt(12)`), so the
/// standardized and scaled fields are exact rather than estimated. The draw
/// is deterministic in `spec.rng_seed`.
pub fn generate_uniform_sources(spec: &SourceSpec, count: usize) -> Result<SourceBatch> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let d = spec.dim;
    let (mean, std) = spec.analytic_moments();
    let half_range = (&spec.high - &spec.low) * 0.5;
    let bounds_b = &half_range / &std;

    // Draw the scaled signal u in [-1, 1) first; raw and standardized follow
    // from it, which keeps the [-1, 1] bound exact by construction.
    let mut rng = ChaCha12Rng::seed_from_u64(spec.rng_seed);
    let mut scaled = Array2::zeros((d, count));
    for i in 0..d {
        for t in 0..count {
            scaled[[i, t]] = rng.random_range(-1.0..1.0);
        }
    }
    let mut raw = Array2::zeros((d, count));
    let mut standardized = Array2::zeros((d, count));
    for i in 0..d {
        for t in 0..count {
            let u = scaled[[i, t]];
            raw[[i, t]] = mean[i] + u * half_range[i];
            standardized[[i, t]] = u * bounds_b[i];
        }
    }
    Ok(SourceBatch {
        raw,
        mean,
        std,
        bounds_b,
        standardized,
        scaled,
    })
}

/// Recomputes the standardized and scaled signals of a batch from its raw
/// samples and stored moments.
///
/// Returns `(standardized, scaled)` with `standardized = (raw - mean) / std`
/// and `scaled = standardized / b` (evaluated through the half-range so the
/// extreme raw values map to exactly +-1).
pub fn standardize_known(batch: &SourceBatch) -> Result<(Array2<f64>, Array2<f64>)> {
    let d = batch.dim();
    if batch.mean.len() != d || batch.std.len() != d || batch.bounds_b.len() != d {
        return Err(Error::DimensionMismatch(
            "batch moment vectors do not match its row count".into(),
        ));
    }
    for i in 0..d {
        if batch.std[i] <= 0.0 || !batch.std[i].is_finite() {
            return Err(Error::InvalidParameter(format!(
                "source {i} has non-positive standard deviation"
            )));
        }
    }
    let t = batch.len();
    let mut standardized = Array2::zeros((d, t));
    let mut scaled = Array2::zeros((d, t));
    for i in 0..d {
        let half = batch.std[i] * batch.bounds_b[i];
        for k in 0..t {
            let u = (batch.raw[[i, k]] - batch.mean[i]) / half;
            scaled[[i, k]] = u;
            standardized[[i, k]] = u * batch.bounds_b[i];
        }
    }
    Ok((standardized, scaled))
}

/// Builds a batch from raw samples using per-row sample moments.
///
/// Intended for data with unknown analytic moments (for example image pixel
/// streams): `mean` and `std` are the sample mean and population standard
/// deviation of each row, and the bound `b_i` is derived from the observed
/// range, so it is approximate metadata rather than a distributional fact.
pub fn standardize_samples(raw: Array2<f64>) -> Result<SourceBatch> {
    let d = raw.nrows();
    let t = raw.ncols();
    if d == 0 || t < 2 {
        return Err(Error::InvalidParameter(
            "sample standardization needs at least one row and two columns".into(),
        ));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("raw samples".into()));
    }
    let mean = raw.mean_axis(Axis(1)).expect("t >= 2");
    let mut std = Array1::zeros(d);
    let mut half = Array1::zeros(d);
    for i in 0..d {
        let mut ss = 0.0;
        let mut dev = 0.0_f64;
        for k in 0..t {
            let c = raw[[i, k]] - mean[i];
            ss += c * c;
            dev = dev.max(c.abs());
        }
        std[i] = (ss / t as f64).sqrt();
        half[i] = dev;
        if std[i] <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "source {i} has zero sample variance"
            )));
        }
    }
    // max_t |s - mean| >= rms deviation, so b >= 1 holds automatically.
    let bounds_b = &half / &std;
    let mut standardized = Array2::zeros((d, t));
    let mut scaled = Array2::zeros((d, t));
    for i in 0..d {
        for k in 0..t {
            let u = (raw[[i, k]] - mean[i]) / half[i];
            scaled[[i, k]] = u;
            standardized[[i, k]] = u * bounds_b[i];
        }
    }
    Ok(SourceBatch {
        raw,
        mean,
        std,
        bounds_b,
        standardized,
        scaled,
    })
}

/// Appends the `2^d` sign-corner columns of the scaled signal to a batch.
///
/// The appended raw columns sit at the extreme of every source
/// simultaneously, so the scaled signal afterwards contains every corner of
/// the unit infinity-norm ball exactly.
pub fn append_sign_corners(batch: &SourceBatch) -> Result<SourceBatch> {
    let d = batch.dim();
    if d > 20 {
        return Err(Error::InvalidParameter(format!(
            "corner injection is limited to 20 sources (2^d columns), got {d}"
        )));
    }
    let t = batch.len();
    let corners = 1usize << d;
    let total = t + corners;
    let mut raw = Array2::zeros((d, total));
    let mut standardized = Array2::zeros((d, total));
    let mut scaled = Array2::zeros((d, total));
    raw.slice_mut(ndarray::s![.., ..t]).assign(&batch.raw);
    standardized
        .slice_mut(ndarray::s![.., ..t])
        .assign(&batch.standardized);
    scaled.slice_mut(ndarray::s![.., ..t]).assign(&batch.scaled);
    for code in 0..corners {
        for i in 0..d {
            let u = if code >> i & 1 == 1 { 1.0 } else { -1.0 };
            let col = t + code;
            scaled[[i, col]] = u;
            standardized[[i, col]] = u * batch.bounds_b[i];
            raw[[i, col]] = batch.mean[i] + u * batch.std[i] * batch.bounds_b[i];
        }
    }
    Ok(SourceBatch {
        raw,
        mean: batch.mean.clone(),
        std: batch.std.clone(),
        bounds_b: batch.bounds_b.clone(),
        standardized,
        scaled,
    })
}

/// A full-rank linear mixing system.
#[derive(Debug, Clone)]
pub struct MixingModel {
    /// Mixing matrix, `q x d` with `q >= d`.
    pub a: Array2<f64>,
    /// Mean of the mixtures (metadata for centering).
    pub mu_m: Array1<f64>,
}

impl MixingModel {
    pub fn new(a: Array2<f64>, mu_m: Array1<f64>) -> Result<Self> {
        let (q, d) = (a.nrows(), a.ncols());
        if d == 0 || q == 0 {
            return Err(Error::InvalidParameter("mixing matrix must be non-empty".into()));
        }
        if q < d {
            return Err(Error::InvalidParameter(format!(
                "underdetermined mixing is unsupported: {q} mixtures of {d} sources"
            )));
        }
        if mu_m.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "mixture mean must have length {q}, got {}",
                mu_m.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixing matrix".into()));
        }
        if la::rank(&a, 1e-12) < d {
            return Err(Error::RankDeficient(format!(
                "mixing matrix must have full column rank {d}"
            )));
        }
        Ok(Self { a, mu_m })
    }

    /// Mixing model with the mixture mean implied by a source mean:
    /// `mu_m = A * mu_s`.
    pub fn from_source_mean(a: Array2<f64>, mu_s: &Array1<f64>) -> Result<Self> {
        if a.ncols() != mu_s.len() {
            return Err(Error::DimensionMismatch(format!(
                "mixing matrix has {} columns but source mean has length {}",
                a.ncols(),
                mu_s.len()
            )));
        }
        let mu_m = a.dot(mu_s);
        Self::new(a, mu_m)
    }
}

/// Draws a Haar-distributed real orthogonal matrix, deterministic in `seed`.
pub fn random_orthogonal(dim: usize, seed: u64) -> Result<Array2<f64>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("orthogonal matrix dimension must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let g = nalgebra::DMatrix::from_fn(dim, dim, |_, _| -> f64 {
        StandardNormal.sample(&mut rng)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fixing the sign of R's diagonal makes the distribution Haar and the
    // factorization unique.
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(la::to_nd(&q))
}

/// Applies the mixing matrix: output column `t` is `A * s_t`.
pub fn mix(model: &MixingModel, sources: &Array2<f64>) -> Result<Array2<f64>> {
    if model.a.ncols() != sources.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "mixing matrix expects {} sources, got {}",
            model.a.ncols(),
            sources.nrows()
        )));
    }
    Ok(model.a.dot(sources))
}

/// Batch whitening transform: `x = W_pre * (m - mu_m)`.
#[derive(Debug, Clone)]
pub struct WhiteningTransform {
    pub w_pre: Array2<f64>,
    pub mu_m: Array1<f64>,
}

impl WhiteningTransform {
    /// Applies the transform to a batch of mixtures.
    pub fn apply(&self, mixtures: &Array2<f64>) -> Result<Array2<f64>> {
        if mixtures.nrows() != self.mu_m.len() {
            return Err(Error::DimensionMismatch(format!(
                "whitening transform expects {} channels, got {}",
                self.mu_m.len(),
                mixtures.nrows()
            )));
        }
        let centered = mixtures - &self.mu_m.view().insert_axis(Axis(1));
        Ok(self.w_pre.dot(&centered))
    }
}

/// Two-pass batch whitening: subtract the sample mean, then map through the
/// inverse square root of the sample covariance (normalized by the sample
/// count), keeping the `target_dim` leading eigenpairs.
///
/// For `target_dim == q` the symmetric inverse square root is used; when the
/// output dimension is reduced the transform is the leading-eigenpair
/// projection (a symmetric map cannot change dimension).
///
/// Returns the whitened batch together with the fitted transform. On the
/// batch it was fitted to, the output has zero row means and identity sample
/// covariance up to numerical precision.
pub fn whiten_batch(
    mixtures: &Array2<f64>,
    target_dim: usize,
) -> Result<(Array2<f64>, WhiteningTransform)> {
    let q = mixtures.nrows();
    let t = mixtures.ncols();
    if target_dim == 0 || target_dim > q {
        return Err(Error::InvalidParameter(format!(
            "target dimension must be in 1..={q}, got {target_dim}"
        )));
    }
    if t <= q {
        return Err(Error::InvalidParameter(format!(
            "whitening needs more samples than channels, got {t} <= {q}"
        )));
    }
    if mixtures.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mixtures".into()));
    }

    let mu_m = mixtures.mean_axis(Axis(1)).expect("t >= 1");
    let centered = mixtures - &mu_m.view().insert_axis(Axis(1));
    let cov = centered.dot(&centered.t()) / t as f64;

    let (eigenvalues, eigenvectors) = la::symmetric_eigen_sorted(&cov)?;
    let lambda_max = eigenvalues[0];
    if !(lambda_max > 0.0) {
        return Err(Error::RankDeficient("covariance has no positive eigenvalue".into()));
    }
    let floor = EIGENVALUE_FLOOR * lambda_max;
    let usable = eigenvalues.iter().filter(|&&l| l > floor).count();
    if usable < target_dim {
        return Err(Error::RankDeficient(format!(
            "covariance has only {usable} usable eigenvalues, need {target_dim}"
        )));
    }

    let w_pre = if target_dim == q {
        // Symmetric inverse square root: U diag(1/sqrt(lambda)) U^T.
        let mut scaled = eigenvectors.clone();
        for j in 0..q {
            let s = 1.0 / eigenvalues[j].sqrt();
            for i in 0..q {
                scaled[[i, j]] *= s;
            }
        }
        scaled.dot(&eigenvectors.t())
    } else {
        // Leading-eigenpair whitening: diag(1/sqrt(lambda)) U_d^T.
        let mut w = Array2::zeros((target_dim, q));
        for j in 0..target_dim {
            let s = 1.0 / eigenvalues[j].sqrt();
            for i in 0..q {
                w[[j, i]] = s * eigenvectors[[i, j]];
            }
        }
        w
    };

    let x = w_pre.dot(&centered);
    Ok((x, WhiteningTransform { w_pre, mu_m }))
}
