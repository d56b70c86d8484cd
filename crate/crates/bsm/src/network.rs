//! Online bounded-similarity separation network.
//!
//! Each sample is processed in two phases. First the recurrent dynamics
//!
//! ```text
//! du/dtau = -u + W x - Mbar D y,    y_i = act(u_i / (Upsilon_ii D_ii))
//! ```
//!
//! are run to a fixed point with forward Euler, where `W` is the feedforward
//! (Hebbian) weight matrix, `Mbar` and `Upsilon` are the off-diagonal and
//! diagonal parts of the lateral (anti-Hebbian) matrix `M`, and `D` holds the
//! per-neuron inner-product weights acting as inverse activation gains. Then
//! the weights are updated locally:
//!
//! ```text
//! W  <- g W + (1-g) y x^T
//! M  <- g M + (1-g) y y^T
//! D_i <- (1-beta) D_i + eta (|W_i|_2^2 - sum_j D_j M_ij^2)
//! ```
//!
//! with `g` the squared forgetting factor. The gain update is a leaky
//! integrator driven by the balance between feedforward (excitatory) and
//! lateral (inhibitory) weight norms.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output nonlinearity of the recurrent dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Projection onto `[-1, 1]`.
    Clip,
    /// Clipped soft threshold: dead zone of half-width `threshold`, slope-one
    /// ramps, saturation at `+-ceiling`.
    Sparse { ceiling: f64, threshold: f64 },
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Clip => Ok(()),
            Activation::Sparse { ceiling, threshold } => {
                if !(ceiling > 0.0) || !ceiling.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "sparse activation ceiling must be positive, got {ceiling}"
                    )));
                }
                if !(threshold >= 0.0) || !threshold.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "sparse activation threshold must be non-negative, got {threshold}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Applies the activation; NaN input is rejected.
    pub fn apply(&self, z: f64) -> Result<f64> {
        match *self {
            Activation::Clip => clip(z),
            Activation::Sparse { ceiling, threshold } => sparse_activation(z, ceiling, threshold),
        }
    }

    /// Largest attainable output magnitude.
    pub fn range_bound(&self) -> f64 {
        match *self {
            Activation::Clip => 1.0,
            Activation::Sparse { ceiling, .. } => ceiling,
        }
    }

    fn apply_raw(&self, z: f64) -> f64 {
        match *self {
            Activation::Clip => clip_raw(z),
            Activation::Sparse { ceiling, threshold } => sparse_raw(z, ceiling, threshold),
        }
    }
}

#[inline]
fn clip_raw(z: f64) -> f64 {
    if z > 1.0 {
        1.0
    } else if z < -1.0 {
        -1.0
    } else {
        z
    }
}

#[inline]
fn sparse_raw(z: f64, ceiling: f64, threshold: f64) -> f64 {
    if z >= ceiling + threshold {
        ceiling
    } else if z >= threshold {
        z - threshold
    } else if z > -threshold {
        0.0
    } else if z > -(ceiling + threshold) {
        z + threshold
    } else {
        -ceiling
    }
}

/// Projection of a scalar onto `[-1, 1]`: identity inside, sign outside.
pub fn clip(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::NonFinite("clip input".into()));
    }
    Ok(clip_raw(z))
}

/// Clipped soft-threshold activation.
///
/// Zero on `(-threshold, threshold)`, the slope-one ramps `z -+ threshold`
/// on the intermediate bands, and saturated at `+-ceiling` beyond
/// `+-(ceiling + threshold)`. Odd, continuous, and 1-Lipschitz.
pub fn sparse_activation(z: f64, ceiling: f64, threshold: f64) -> Result<f64> {
    Activation::Sparse { ceiling, threshold }.validate()?;
    if z.is_nan() {
        return Err(Error::NonFinite("sparse activation input".into()));
    }
    Ok(sparse_raw(z, ceiling, threshold))
}

/// Effective averaging window `1 / (1 - gamma_sq)` of the exponential
/// forgetting recursion.
pub fn effective_window(gamma_sq: f64) -> Result<f64> {
    if !(gamma_sq > 0.0 && gamma_sq < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "squared forgetting factor must lie in (0, 1), got {gamma_sq}"
        )));
    }
    Ok(1.0 / (1.0 - gamma_sq))
}

/// Fixed-point solver settings for the recurrent dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Euler step for the membrane integration.
    pub step: f64,
    /// Convergence tolerance on the infinity norm of the output change.
    pub tol: f64,
    /// Iteration cap; the current output is returned when it is reached.
    pub max_iters: usize,
    /// Start each sample from the previous sample's internal state instead
    /// of zero.
    pub warm_start: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            tol: 1e-6,
            max_iters: 500,
            warm_start: false,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Euler step must lie in (0, 1], got {}",
                self.step
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("iteration cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hyperparameters of the online network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Squared forgetting factor of the weight recursions, in (0, 1).
    pub gamma_sq: f64,
    /// Gain update step.
    pub eta: f64,
    /// Gain leak (`beta = 2 * eta * alpha_D`).
    pub beta: f64,
    pub activation: Activation,
    pub dynamics: DynamicsConfig,
    /// Seed of the feedforward weight initialization.
    pub init_seed: u64,
    /// Lower bound kept on the gains.
    pub d_floor: f64,
    /// Lower bound kept on the lateral diagonal.
    pub upsilon_floor: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            gamma_sq: 0.996,
            eta: 1e-3,
            beta: 1e-6,
            activation: Activation::Clip,
            dynamics: DynamicsConfig::default(),
            init_seed: 0,
            d_floor: 1e-6,
            upsilon_floor: 1e-8,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_sq > 0.0 && self.gamma_sq < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma_sq must lie in (0, 1), got {}",
                self.gamma_sq
            )));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.d_floor > 0.0) {
            return Err(Error::InvalidParameter("gain floor must be positive".into()));
        }
        if !(self.upsilon_floor > 0.0) {
            return Err(Error::InvalidParameter(
                "lateral diagonal floor must be positive".into(),
            ));
        }
        self.activation.validate()?;
        self.dynamics.validate()
    }

    /// Effective averaging window `1 / (1 - gamma_sq)`.
    pub fn kappa(&self) -> f64 {
        1.0 / (1.0 - self.gamma_sq)
    }

    /// Regularization weight implied by the leak: `alpha_D = beta / (2 eta)`.
    pub fn alpha_d(&self) -> f64 {
        self.beta / (2.0 * self.eta)
    }
}

/// Synaptic state of the online network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Feedforward (Hebbian) weights, one row per neuron.
    pub feedforward: Array2<f64>,
    /// Lateral (anti-Hebbian) weight matrix; kept symmetric.
    pub lateral: Array2<f64>,
    /// Per-neuron inner-product weights (inverse activation gains).
    pub gains: Array1<f64>,
    /// Samples processed so far.
    pub t: u64,
    /// Internal state of the last converged dynamics, used for warm starts.
    /// Not part of persisted snapshots.
    pub(crate) last_internal: Option<Array1<f64>>,
}

impl NetworkState {
    /// Fresh state: small random feedforward weights, identity lateral
    /// matrix, unit gains.
    pub fn init(dim: usize, cfg: &NetworkConfig) -> Result<Self> {
        Self::init_inner(dim, cfg, false)
    }

    /// Fresh state with zero feedforward weights. A network initialized this
    /// way never produces output (the Hebbian update cannot bootstrap), which
    /// is why [`NetworkState::init`] draws random weights; exposed for
    /// diagnostics.
    pub fn init_zero_feedforward(dim: usize, cfg: &NetworkConfig) -> Result<Self> {
        Self::init_inner(dim, cfg, true)
    }

    fn init_inner(dim: usize, cfg: &NetworkConfig, zero_w: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("network dimension must be >= 1".into()));
        }
        cfg.validate()?;
        let feedforward = if zero_w {
            Array2::zeros((dim, dim))
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.init_seed);
            Array2::from_shape_fn((dim, dim), |_| rng.random_range(-0.1..0.1))
        };
        Ok(Self {
            feedforward,
            lateral: Array2::eye(dim),
            gains: Array1::ones(dim),
            t: 0,
            last_internal: None,
        })
    }

    /// Reconstructs a state from its persisted parts.
    pub fn from_parts(
        feedforward: Array2<f64>,
        lateral: Array2<f64>,
        gains: Array1<f64>,
        t: u64,
    ) -> Result<Self> {
        let d = gains.len();
        if feedforward.nrows() != d
            || feedforward.ncols() != d
            || lateral.nrows() != d
            || lateral.ncols() != d
        {
            return Err(Error::DimensionMismatch(
                "state matrices must be square and match the gain vector".into(),
            ));
        }
        let state = Self {
            feedforward,
            lateral,
            gains,
            t,
            last_internal: None,
        };
        state.check_symmetry()?;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.gains.len()
    }

    /// Diagonal of the lateral matrix (the self-inhibition strengths).
    pub fn lateral_diag(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.dim(), |i| self.lateral[[i, i]])
    }

    fn check_symmetry(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.lateral[[i, j]] - self.lateral[[j, i]]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "lateral matrix is asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_floors(&self, cfg: &NetworkConfig) -> Result<()> {
        for i in 0..self.dim() {
            if !(self.lateral[[i, i]] >= cfg.upsilon_floor) {
                return Err(Error::InvalidParameter(format!(
                    "lateral diagonal {i} below its floor: {}",
                    self.lateral[[i, i]]
                )));
            }
            if !(self.gains[i] >= cfg.d_floor) {
                return Err(Error::InvalidParameter(format!(
                    "gain {i} below its floor: {}",
                    self.gains[i]
                )));
            }
        }
        Ok(())
    }
}

/// Result of one dynamics solve.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    /// Converged output.
    pub output: Array1<f64>,
    /// Final internal (membrane) state.
    pub internal: Array1<f64>,
    /// Euler iterations used.
    pub iterations: usize,
    /// Largest activation input magnitude `|u_i / (Upsilon_ii D_ii)|` at
    /// convergence.
    pub max_preactivation: f64,
    /// Online cost at the converged output.
    pub cost: f64,
}

fn check_dims(state: &NetworkState, len: usize, what: &str) -> Result<()> {
    if len != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {len}, state dimension is {}",
            state.dim()
        )));
    }
    Ok(())
}

/// Online cost of an output `y` for input `x` under the current weights:
///
/// ```text
/// h = k Tr(M D M D) - 2 k Tr(W^T D W) + 2 y^T D M D y - 4 y^T D W x
///     + 2 alpha_d sum_i D_ii^2
/// ```
pub fn online_cost(
    state: &NetworkState,
    input: &Array1<f64>,
    output: &Array1<f64>,
    kappa: f64,
    alpha_d: f64,
) -> Result<f64> {
    check_dims(state, input.len(), "input")?;
    check_dims(state, output.len(), "output")?;
    let d = state.dim();
    let w = &state.feedforward;
    let m = &state.lateral;
    let g = &state.gains;

    // Tr(M D M D) = sum_ij D_i D_j M_ij^2 for symmetric M.
    let mut tr_mdmd = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr_mdmd += g[i] * g[j] * m[[i, j]] * m[[j, i]];
        }
    }
    // Tr(W^T D W) = sum_i D_i |W_i|^2.
    let mut tr_wdw = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr_wdw += g[i] * w[[i, j]] * w[[i, j]];
        }
    }
    let mut quad = 0.0; // y^T D M D y
    for i in 0..d {
        for j in 0..d {
            quad += output[i] * g[i] * m[[i, j]] * g[j] * output[j];
        }
    }
    let mut drive = 0.0; // y^T D W x
    for i in 0..d {
        let mut wx = 0.0;
        for j in 0..d {
            wx += w[[i, j]] * input[j];
        }
        drive += output[i] * g[i] * wx;
    }
    let reg: f64 = g.iter().map(|v| v * v).sum();
    Ok(kappa * tr_mdmd - 2.0 * kappa * tr_wdw + 2.0 * quad - 4.0 * drive + 2.0 * alpha_d * reg)
}

/// Quarter-gradient of the online cost with respect to the output:
/// `D M D y - D W x`.
pub fn output_gradient(
    state: &NetworkState,
    input: &Array1<f64>,
    output: &Array1<f64>,
) -> Result<Array1<f64>> {
    check_dims(state, input.len(), "input")?;
    check_dims(state, output.len(), "output")?;
    let d = state.dim();
    let g = &state.gains;
    let mut grad = Array1::zeros(d);
    for i in 0..d {
        let mut mdy = 0.0;
        let mut wx = 0.0;
        for j in 0..d {
            mdy += state.lateral[[i, j]] * g[j] * output[j];
            wx += state.feedforward[[i, j]] * input[j];
        }
        grad[i] = g[i] * mdy - g[i] * wx;
    }
    Ok(grad)
}

/// Quarter-gradient of the weight-dependent part of the online cost with
/// respect to the gains, per coordinate:
///
/// ```text
/// (kappa / 2) (sum_j D_j M_ij^2 - |W_i|_2^2) + alpha_d D_ii
/// ```
///
/// This is the drive behind the leaky gain update; it does not depend on the
/// current sample.
pub fn gain_gradient(state: &NetworkState, kappa: f64, alpha_d: f64) -> Result<Array1<f64>> {
    let d = state.dim();
    for i in 0..d {
        if !(state.gains[i] > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gain {i} must be positive, got {}",
                state.gains[i]
            )));
        }
    }
    let mut grad = Array1::zeros(d);
    for i in 0..d {
        let mut lateral_norm = 0.0;
        let mut ff_norm = 0.0;
        for j in 0..d {
            lateral_norm += state.gains[j] * state.lateral[[i, j]] * state.lateral[[i, j]];
            ff_norm += state.feedforward[[i, j]] * state.feedforward[[i, j]];
        }
        grad[i] = 0.5 * kappa * (lateral_norm - ff_norm) + alpha_d * state.gains[i];
    }
    Ok(grad)
}

/// Runs the recurrent dynamics to a fixed point for one input sample.
///
/// Forward Euler on the internal state with the output refreshed through the
/// activation after every step; terminates when the output change drops
/// below `tol` in the infinity norm and the membrane derivative has settled
/// below `tol` as well (the settle guard is what makes the fixed-point
/// contract below scale-free), or when the iteration cap is reached.
/// At an interior fixed point the returned output satisfies `M D y = W x`
/// within `10 * tol`; saturated components satisfy the projection optimality
/// sign condition instead.
pub fn run_dynamics(
    state: &NetworkState,
    input: &Array1<f64>,
    cfg: &NetworkConfig,
) -> Result<StepDiagnostics> {
    cfg.validate()?;
    check_dims(state, input.len(), "input")?;
    state.check_floors(cfg)?;
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dynamics input".into()));
    }
    let d = state.dim();
    let act = cfg.activation;
    let step = cfg.dynamics.step;

    // Per-neuron activation gain 1 / (Upsilon_ii D_ii).
    let mut gain = vec![0.0; d];
    for i in 0..d {
        gain[i] = 1.0 / (state.lateral[[i, i]] * state.gains[i]);
    }
    let mut drive = vec![0.0; d];
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += state.feedforward[[i, j]] * input[j];
        }
        drive[i] = acc;
    }

    let mut u: Vec<f64> = match (&state.last_internal, cfg.dynamics.warm_start) {
        (Some(prev), true) if prev.len() == d => prev.to_vec(),
        _ => vec![0.0; d],
    };
    let mut y = vec![0.0; d];
    for i in 0..d {
        y[i] = act.apply_raw(u[i] * gain[i]);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.dynamics.max_iters {
        iterations += 1;
        let mut delta = 0.0_f64;
        for i in 0..d {
            // Off-diagonal lateral feedback only; the diagonal is absorbed
            // into the activation gain.
            let mut recur = 0.0;
            for j in 0..d {
                if j != i {
                    recur += state.lateral[[i, j]] * state.gains[j] * y[j];
                }
            }
            u[i] += step * (-u[i] + drive[i] - recur);
        }
        if !crate::la::all_finite(&u) {
            return Err(Error::NonFinite(
                "dynamics diverged to a non-finite internal state (step too large?)".into(),
            ));
        }
        for i in 0..d {
            let next = act.apply_raw(u[i] * gain[i]);
            delta = delta.max((next - y[i]).abs());
            y[i] = next;
        }
        if delta < cfg.dynamics.tol {
            converged = true;
            break;
        }
    }
    let _ = converged;

    let max_preactivation = (0..d).fold(0.0_f64, |acc, i| acc.max((u[i] * gain[i]).abs()));
    let output = Array1::from(y);
    let internal = Array1::from(u);
    let cost = online_cost(state, input, &output, cfg.kappa(), cfg.alpha_d())?;
    Ok(StepDiagnostics {
        output,
        internal,
        iterations,
        max_preactivation,
        cost,
    })
}

/// Applies the local learning rules for one `(input, output)` pair.
///
/// Order: feedforward, lateral (symmetrized, diagonal floored), then the
/// gains using the pre-update gain vector as the norm weight, floored at the
/// configured minimum.
pub fn update_weights(
    state: &NetworkState,
    input: &Array1<f64>,
    output: &Array1<f64>,
    cfg: &NetworkConfig,
) -> Result<NetworkState> {
    cfg.validate()?;
    check_dims(state, input.len(), "input")?;
    check_dims(state, output.len(), "output")?;
    let d = state.dim();
    let g = cfg.gamma_sq;
    let one_minus = 1.0 - g;

    let mut feedforward = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            feedforward[[i, j]] = g * state.feedforward[[i, j]] + one_minus * output[i] * input[j];
        }
    }

    let mut lateral = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            lateral[[i, j]] = g * state.lateral[[i, j]] + one_minus * output[i] * output[j];
        }
    }
    // Symmetrize to stop asymmetry drift, then keep the diagonal above its
    // floor so the activation gain stays defined.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (lateral[[i, j]] + lateral[[j, i]]);
            lateral[[i, j]] = avg;
            lateral[[j, i]] = avg;
        }
        if lateral[[i, i]] < cfg.upsilon_floor {
            lateral[[i, i]] = cfg.upsilon_floor;
        }
    }

    let mut gains = Array1::zeros(d);
    for i in 0..d {
        let mut ff_norm = 0.0;
        let mut lateral_norm = 0.0;
        for j in 0..d {
            ff_norm += feedforward[[i, j]] * feedforward[[i, j]];
            // Weighted by the pre-update gains.
            lateral_norm += state.gains[j] * lateral[[i, j]] * lateral[[i, j]];
        }
        let next = (1.0 - cfg.beta) * state.gains[i] + cfg.eta * (ff_norm - lateral_norm);
        gains[i] = next.max(cfg.d_floor);
    }

    Ok(NetworkState {
        feedforward,
        lateral,
        gains,
        t: state.t + 1,
        last_internal: state.last_internal.clone(),
    })
}

/// Processes one sample: dynamics to convergence, then the weight updates.
///
/// Returns the advanced state and the dynamics diagnostics. On error the
/// input state is untouched.
pub fn step(
    state: &NetworkState,
    input: &Array1<f64>,
    cfg: &NetworkConfig,
) -> Result<(NetworkState, StepDiagnostics)> {
    let diagnostics = run_dynamics(state, input, cfg)?;
    let mut next = update_weights(state, input, &diagnostics.output, cfg)?;
    next.last_internal = Some(diagnostics.internal.clone());
    Ok((next, diagnostics))
}
