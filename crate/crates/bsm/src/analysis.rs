//! Offline optimality checks and separation-quality metrics.
//!
//! The offline program being verified minimizes the sum of squared diagonal
//! weights subject to the weighted Gram constraint `X^T X = Y^T D Y` with the
//! outputs confined to the unit infinity-norm ball. Its global optima are
//! signed permutations of the scaled sources; [`theorem_bound_check`]
//! certifies this on any orthogonal candidate map, and [`wsm_cost`] /
//! [`constraint_residual`] / [`bsm_objective`] evaluate the program's pieces
//! directly. [`sir`], [`align_outputs`], and [`ei_balance`] quantify how well
//! an online run separated.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la;
use crate::network::NetworkState;

/// SIR values above this are reported as the ceiling (interference is
/// numerically zero there).
pub const SIR_CEILING_DB: f64 = 160.0;

/// Off-row mass tolerance (relative to the squared row norm) of the
/// signed-permutation detector.
pub const SIGNED_PERMUTATION_TOL: f64 = 1e-9;

/// Input/output batch with per-neuron weights for the offline checks.
#[derive(Debug, Clone)]
pub struct BatchData {
    /// Inputs, one column per sample.
    pub inputs: Array2<f64>,
    /// Outputs, one column per sample.
    pub outputs: Array2<f64>,
    /// Positive diagonal weights.
    pub gains: Array1<f64>,
    /// Squared forgetting factor weighting the columns; 1 means unweighted.
    pub gamma_sq: f64,
}

impl BatchData {
    pub fn new(
        inputs: Array2<f64>,
        outputs: Array2<f64>,
        gains: Array1<f64>,
        gamma_sq: f64,
    ) -> Result<Self> {
        if inputs.ncols() != outputs.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} columns, outputs {}",
                inputs.ncols(),
                outputs.ncols()
            )));
        }
        if gains.len() != outputs.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "gain vector length {} does not match {} output rows",
                gains.len(),
                outputs.nrows()
            )));
        }
        if gains.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidParameter("gains must be positive".into()));
        }
        if !(gamma_sq > 0.0 && gamma_sq <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma_sq must lie in (0, 1], got {gamma_sq}"
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            gains,
            gamma_sq,
        })
    }

    /// Effective window of the finite weighted batch:
    /// `sum_{k=0}^{T-1} gamma^{2k}`.
    fn kappa(&self) -> f64 {
        let t = self.inputs.ncols() as f64;
        if (1.0 - self.gamma_sq).abs() < 1e-12 {
            t
        } else {
            (1.0 - self.gamma_sq.powf(t)) / (1.0 - self.gamma_sq)
        }
    }

    /// Per-column weights `gamma^(T-1-j)`.
    fn column_weights(&self) -> Vec<f64> {
        let t = self.inputs.ncols();
        let gamma = self.gamma_sq.sqrt();
        (0..t).map(|j| gamma.powi((t - 1 - j) as i32)).collect()
    }
}

/// Weighted similarity-matching cost:
/// `(1 / kappa^2) * |Xw^T Xw - Yw^T D Yw|_F^2` where `Xw`, `Yw` carry the
/// exponential column weights and `kappa` is the effective window of the
/// batch.
///
/// Evaluated definitionally on the Gram matrices; memory is `O(T^2)`.
pub fn wsm_cost(batch: &BatchData) -> Result<f64> {
    let weights = batch.column_weights();
    let xw = weighted_columns(&batch.inputs, &weights);
    let yw = weighted_columns(&batch.outputs, &weights);
    let gram_x = xw.t().dot(&xw);
    let gram_y = weighted_output_gram(&yw, &batch.gains);
    let mut acc = 0.0;
    for (a, b) in gram_x.iter().zip(gram_y.iter()) {
        let diff = a - b;
        acc += diff * diff;
    }
    let kappa = batch.kappa();
    Ok(acc / (kappa * kappa))
}

/// Frobenius norm of the unweighted constraint `X^T X - Y^T D Y`.
pub fn constraint_residual(batch: &BatchData) -> Result<f64> {
    let gram_x = batch.inputs.t().dot(&batch.inputs);
    let gram_y = weighted_output_gram(&batch.outputs, &batch.gains);
    let mut acc = 0.0;
    for (a, b) in gram_x.iter().zip(gram_y.iter()) {
        let diff = a - b;
        acc += diff * diff;
    }
    Ok(acc.sqrt())
}

fn weighted_columns(m: &Array2<f64>, weights: &[f64]) -> Array2<f64> {
    let mut out = m.clone();
    for (j, &w) in weights.iter().enumerate() {
        out.column_mut(j).mapv_inplace(|v| v * w);
    }
    out
}

fn weighted_output_gram(y: &Array2<f64>, gains: &Array1<f64>) -> Array2<f64> {
    let mut scaled = y.clone();
    for (i, &g) in gains.iter().enumerate() {
        scaled.row_mut(i).mapv_inplace(|v| v * g);
    }
    y.t().dot(&scaled)
}

/// Objective of the offline program: sum of squared diagonal weights.
pub fn bsm_objective(gains: &Array1<f64>) -> Result<f64> {
    if gains.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidParameter(
            "objective requires positive weights".into(),
        ));
    }
    Ok(gains.iter().map(|g| g * g).sum())
}

/// Outcome of the optimality bound check on one orthogonal candidate map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Minimal feasible objective for this map given corner coverage:
    /// `sum_i |row_i(G Pi_b)|_1^2`.
    pub cost_proxy: f64,
    /// `sum_i b_i^2`; the objective can never fall below this.
    pub lower_bound: f64,
    /// Whether the map is a signed permutation (each row one nonzero).
    pub is_signed_permutation: bool,
}

/// Checks the optimality lower bound on an orthogonal map `G` with
/// standardized-source bounds `b >= 1`.
///
/// `cost_proxy >= lower_bound` always holds, with equality (within 1e-9)
/// exactly when `G` is a signed permutation.
pub fn theorem_bound_check(g: &Array2<f64>, bounds: &Array1<f64>) -> Result<TheoremReport> {
    let d = g.nrows();
    if g.ncols() != d || bounds.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "expected square map matching {} bounds, got {}x{}",
            bounds.len(),
            g.nrows(),
            g.ncols()
        )));
    }
    let gram = g.t().dot(g);
    let mut ortho_err = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho_err = ortho_err.max((gram[[i, j]] - target).abs());
        }
    }
    if ortho_err > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "map is not orthogonal (max Gram deviation {ortho_err:.3e})"
        )));
    }
    if bounds.iter().any(|&b| b < 1.0 - 1e-12) {
        return Err(Error::InvalidParameter(
            "standardized-source bounds must be >= 1".into(),
        ));
    }

    let mut cost_proxy = 0.0;
    for i in 0..d {
        let mut l1 = 0.0;
        for j in 0..d {
            l1 += (g[[i, j]] * bounds[j]).abs();
        }
        cost_proxy += l1 * l1;
    }
    let lower_bound: f64 = bounds.iter().map(|b| b * b).sum();
    Ok(TheoremReport {
        cost_proxy,
        lower_bound,
        is_signed_permutation: is_signed_permutation(g),
    })
}

/// Each row concentrated on a single entry (off-row mass at most
/// [`SIGNED_PERMUTATION_TOL`] of the squared row norm) with distinct pivot
/// columns.
pub fn is_signed_permutation(g: &Array2<f64>) -> bool {
    let d = g.nrows();
    if g.ncols() != d {
        return false;
    }
    let mut used = vec![false; d];
    for i in 0..d {
        let mut norm_sq = 0.0;
        let mut best = 0.0_f64;
        let mut best_j = 0;
        for j in 0..d {
            let v = g[[i, j]] * g[[i, j]];
            norm_sq += v;
            if v > best {
                best = v;
                best_j = j;
            }
        }
        if norm_sq == 0.0 || (norm_sq - best) / norm_sq > SIGNED_PERMUTATION_TOL {
            return false;
        }
        if used[best_j] {
            return false;
        }
        used[best_j] = true;
    }
    true
}

/// Output-to-reference matching up to sign, permutation, and scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// `permutation[i]` is the reference row matched to output row `i`.
    pub permutation: Vec<usize>,
    /// Sign of each matched pair.
    pub signs: Vec<i8>,
    /// Least-squares scale of each output on its sign-corrected reference.
    pub scales: Vec<f64>,
    /// Total squared residual of the per-pair fits.
    pub residual_energy: f64,
}

const ALIGN_DIM_CAP: usize = 12;
const EXHAUSTIVE_DIM_CAP: usize = 8;

fn correlation_matrix(outputs: &Array2<f64>, reference: &Array2<f64>) -> Result<Array2<f64>> {
    let d = outputs.nrows();
    let t = outputs.ncols();
    if reference.nrows() != d || reference.ncols() != t {
        return Err(Error::DimensionMismatch(format!(
            "outputs are {}x{} but reference is {}x{}",
            d,
            t,
            reference.nrows(),
            reference.ncols()
        )));
    }
    if t < 2 {
        return Err(Error::InvalidParameter(
            "alignment needs at least two samples".into(),
        ));
    }
    let center = |m: &Array2<f64>| -> Result<(Array2<f64>, Vec<f64>)> {
        let mut c = m.clone();
        let mut norms = Vec::with_capacity(d);
        for i in 0..d {
            let mean = c.row(i).sum() / t as f64;
            c.row_mut(i).mapv_inplace(|v| v - mean);
            let norm = c.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has zero variance"
                )));
            }
            norms.push(norm);
        }
        Ok((c, norms))
    };
    let (yc, yn) = center(outputs)?;
    let (rc, rn) = center(reference)?;
    let mut corr = yc.dot(&rc.t());
    for i in 0..d {
        for j in 0..d {
            corr[[i, j]] /= yn[i] * rn[j];
        }
    }
    Ok(corr)
}

fn report_from_assignment(
    outputs: &Array2<f64>,
    reference: &Array2<f64>,
    corr: &Array2<f64>,
    assignment: &[usize],
) -> AlignmentReport {
    let d = outputs.nrows();
    let mut signs = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    let mut residual = 0.0;
    for i in 0..d {
        let j = assignment[i];
        let sign: i8 = if corr[[i, j]] < 0.0 { -1 } else { 1 };
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..outputs.ncols() {
            let r = f64::from(sign) * reference[[j, k]];
            num += outputs[[i, k]] * r;
            den += r * r;
        }
        let scale = if den > 0.0 { num / den } else { 0.0 };
        for k in 0..outputs.ncols() {
            let fit = scale * f64::from(sign) * reference[[j, k]];
            let e = outputs[[i, k]] - fit;
            residual += e * e;
        }
        signs.push(sign);
        scales.push(scale);
    }
    AlignmentReport {
        permutation: assignment.to_vec(),
        signs,
        scales,
        residual_energy: residual,
    }
}

/// Matches output rows to reference rows by greedily pairing the largest
/// remaining absolute correlation, then fits per-pair signs and scales.
pub fn align_outputs(outputs: &Array2<f64>, reference: &Array2<f64>) -> Result<AlignmentReport> {
    let d = outputs.nrows();
    if d > ALIGN_DIM_CAP {
        return Err(Error::InvalidParameter(format!(
            "alignment supports up to {ALIGN_DIM_CAP} rows, got {d}"
        )));
    }
    let corr = correlation_matrix(outputs, reference)?;
    let mut assignment = vec![usize::MAX; d];
    let mut row_done = vec![false; d];
    let mut col_done = vec![false; d];
    for _ in 0..d {
        let mut best = -1.0;
        let mut pick = (0, 0);
        for i in 0..d {
            if row_done[i] {
                continue;
            }
            for j in 0..d {
                if col_done[j] {
                    continue;
                }
                if corr[[i, j]].abs() > best {
                    best = corr[[i, j]].abs();
                    pick = (i, j);
                }
            }
        }
        assignment[pick.0] = pick.1;
        row_done[pick.0] = true;
        col_done[pick.1] = true;
    }
    Ok(report_from_assignment(outputs, reference, &corr, &assignment))
}

/// Exhaustive variant of [`align_outputs`]: maximizes the summed absolute
/// correlation over all permutations. Limited to 8 rows.
pub fn align_outputs_exhaustive(
    outputs: &Array2<f64>,
    reference: &Array2<f64>,
) -> Result<AlignmentReport> {
    let d = outputs.nrows();
    if d > EXHAUSTIVE_DIM_CAP {
        return Err(Error::InvalidParameter(format!(
            "exhaustive alignment supports up to {EXHAUSTIVE_DIM_CAP} rows, got {d}"
        )));
    }
    let corr = correlation_matrix(outputs, reference)?;
    let mut best_score = f64::NEG_INFINITY;
    let mut best: Vec<usize> = (0..d).collect();
    let mut current: Vec<usize> = (0..d).collect();
    permute(&mut current, 0, &mut |perm| {
        let score: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| corr[[i, j]].abs())
            .sum();
        if score > best_score {
            best_score = score;
            best = perm.to_vec();
        }
    });
    Ok(report_from_assignment(outputs, reference, &corr, &best))
}

fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Signal-to-interference report for a batch of outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SirReport {
    /// Per-output SIR in dB, capped at [`SIR_CEILING_DB`].
    pub per_output_db: Vec<f64>,
    /// Mean over the outputs.
    pub mean_db: f64,
    /// Estimated transfer matrix (outputs regressed on the reference rows).
    pub transfer: Vec<Vec<f64>>,
}

/// Signal-to-interference ratio of `outputs` against unit-variance reference
/// sources.
///
/// The transfer matrix `H` is the least-squares regression of the outputs on
/// the reference; for each output the matched source is the largest `H`
/// entry by magnitude and the interference is the summed squared remainder
/// of the row: `SIR_i = 10 log10(H_ij*^2 / sum_{j != j*} H_ij^2)`.
pub fn sir(outputs: &Array2<f64>, reference: &Array2<f64>) -> Result<SirReport> {
    let (d_out, t) = (outputs.nrows(), outputs.ncols());
    let d_ref = reference.nrows();
    if reference.ncols() != t {
        return Err(Error::DimensionMismatch(format!(
            "outputs have {} samples, reference {}",
            t,
            reference.ncols()
        )));
    }
    if t < d_ref {
        return Err(Error::InvalidParameter(format!(
            "regression needs at least {d_ref} samples, got {t}"
        )));
    }
    if d_out == 0 || d_ref == 0 {
        return Err(Error::InvalidParameter("empty signal matrices".into()));
    }

    // H = Y S^T (S S^T)^{-1}, solved as (S S^T) H^T = S Y^T.
    let gram = reference.dot(&reference.t());
    let cross = reference.dot(&outputs.t());
    let h_t = la::solve(&gram, &cross)
        .map_err(|_| Error::Numerical("singular reference Gram matrix in SIR regression".into()))?;
    let h = h_t.t().to_owned();

    let mut per_output_db = Vec::with_capacity(d_out);
    for i in 0..d_out {
        let mut best = 0.0_f64;
        let mut total = 0.0;
        for j in 0..d_ref {
            let p = h[[i, j]] * h[[i, j]];
            total += p;
            if p > best {
                best = p;
            }
        }
        let interference = total - best;
        let db = if interference <= 0.0 {
            SIR_CEILING_DB
        } else {
            (10.0 * (best / interference).log10()).min(SIR_CEILING_DB)
        };
        per_output_db.push(db);
    }
    let mean_db = per_output_db.iter().sum::<f64>() / d_out as f64;
    let transfer = (0..d_out)
        .map(|i| (0..d_ref).map(|j| h[[i, j]]).collect())
        .collect();
    Ok(SirReport {
        per_output_db,
        mean_db,
        transfer,
    })
}

/// Excitation/inhibition balance of one neuron.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuronBalance {
    /// Squared feedforward row norm.
    pub excitation: f64,
    /// Gain-weighted squared lateral row norm.
    pub inhibition: f64,
    /// `excitation - inhibition`; the drive of the gain update.
    pub gap: f64,
}

/// Per-neuron excitation and inhibition strengths of a network state.
pub fn ei_balance(state: &NetworkState) -> Vec<NeuronBalance> {
    let d = state.dim();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut excitation = 0.0;
        let mut inhibition = 0.0;
        for j in 0..d {
            excitation += state.feedforward[[i, j]] * state.feedforward[[i, j]];
            inhibition += state.gains[j] * state.lateral[[i, j]] * state.lateral[[i, j]];
        }
        out.push(NeuronBalance {
            excitation,
            inhibition,
            gap: excitation - inhibition,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
    }

    // Oracle: four-loop weighted Gram difference.
    fn wsm_naive(batch: &BatchData) -> f64 {
        let t = batch.inputs.ncols();
        let d_in = batch.inputs.nrows();
        let d_out = batch.outputs.nrows();
        let gamma = batch.gamma_sq.sqrt();
        let w: Vec<f64> = (0..t).map(|j| gamma.powi((t - 1 - j) as i32)).collect();
        let mut acc = 0.0;
        for a in 0..t {
            for b in 0..t {
                let mut gx = 0.0;
                for i in 0..d_in {
                    gx += w[a] * batch.inputs[[i, a]] * w[b] * batch.inputs[[i, b]];
                }
                let mut gy = 0.0;
                for i in 0..d_out {
                    gy += w[a] * batch.outputs[[i, a]] * batch.gains[i] * w[b]
                        * batch.outputs[[i, b]];
                }
                acc += (gx - gy) * (gx - gy);
            }
        }
        let kappa = if (1.0 - batch.gamma_sq).abs() < 1e-12 {
            t as f64
        } else {
            (1.0 - batch.gamma_sq.powi(t as i32)) / (1.0 - batch.gamma_sq)
        };
        acc / (kappa * kappa)
    }

    #[test]
    fn wsm_cost_zero_on_perfect_match() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 3, 10, 1.0);
        let batch = BatchData::new(x.clone(), x, Array1::ones(3), 0.9).unwrap();
        assert!(wsm_cost(&batch).unwrap().abs() < 1e-24);
    }

    #[test]
    fn wsm_cost_scalar_example() {
        let x = array![[1.0]];
        let y = array![[2.0]];
        let batch = BatchData::new(x, y, Array1::ones(1), 1.0).unwrap();
        assert!((wsm_cost(&batch).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn wsm_cost_matches_naive_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let x = random_matrix(&mut rng, 3, 20, 1.0);
        let y = random_matrix(&mut rng, 3, 20, 1.0);
        let gains = Array1::from_shape_fn(3, |_| rng.random_range(0.2..2.0));
        for gamma_sq in [0.8, 1.0] {
            let batch = BatchData::new(x.clone(), y.clone(), gains.clone(), gamma_sq).unwrap();
            let got = wsm_cost(&batch).unwrap();
            let want = wsm_naive(&batch);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn residual_of_zero_output_is_input_gram_norm() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 2, 8, 1.0);
        let y = Array2::zeros((2, 8));
        let batch = BatchData::new(x.clone(), y, Array1::ones(2), 1.0).unwrap();
        let gram = x.t().dot(&x);
        let want = gram.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((constraint_residual(&batch).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn residual_invariant_under_compensated_scaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let x = random_matrix(&mut rng, 2, 8, 1.0);
        let y = random_matrix(&mut rng, 2, 8, 1.0);
        let gains = Array1::from(vec![0.8, 1.3]);
        let base = BatchData::new(x.clone(), y.clone(), gains.clone(), 1.0).unwrap();
        let scaled = BatchData::new(x, y * 2.0, gains / 4.0, 1.0).unwrap();
        let a = constraint_residual(&base).unwrap();
        let b = constraint_residual(&scaled).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn objective_examples() {
        assert_eq!(bsm_objective(&array![3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(bsm_objective(&Array1::ones(5)).unwrap(), 5.0);
        assert_eq!(bsm_objective(&array![3.0, 3.0, 3.0]).unwrap(), 27.0);
        assert!(bsm_objective(&array![1.0, 0.0]).is_err());
        assert!(bsm_objective(&array![1.0, -2.0]).is_err());
    }

    #[test]
    fn bound_check_identity_is_tight() {
        let b = array![3.0_f64.sqrt(), 3.0_f64.sqrt()];
        let report = theorem_bound_check(&Array2::eye(2), &b).unwrap();
        assert!((report.cost_proxy - 6.0).abs() < 1e-12);
        assert!((report.lower_bound - 6.0).abs() < 1e-12);
        assert!(report.is_signed_permutation);
    }

    #[test]
    fn bound_check_rotation_is_loose() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let g = array![[c, -c], [c, c]];
        let b = array![3.0_f64.sqrt(), 3.0_f64.sqrt()];
        let report = theorem_bound_check(&g, &b).unwrap();
        // Each row's weighted l1 norm is sqrt(3) * sqrt(2): proxy = 12.
        assert!((report.cost_proxy - 12.0).abs() < 1e-10);
        assert!((report.lower_bound - 6.0).abs() < 1e-12);
        assert!(!report.is_signed_permutation);
    }

    #[test]
    fn bound_check_rejects_non_orthogonal() {
        let g = array![[1.0, 0.1], [0.0, 1.0]];
        let b = array![1.5, 1.5];
        assert!(theorem_bound_check(&g, &b).is_err());
    }

    #[test]
    fn bound_holds_on_random_orthogonal_sweep() {
        for trial in 0..100u64 {
            let d = 2 + (trial % 4) as usize; // 2..=5
            let g = crate::signals::random_orthogonal(d, 1000 + trial).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(2000 + trial);
            let b = Array1::from_shape_fn(d, |_| rng.random_range(1.0..3.0));
            let report = theorem_bound_check(&g, &b).unwrap();
            assert!(
                report.cost_proxy >= report.lower_bound - 1e-9,
                "bound violated at trial {trial}"
            );
            if (report.cost_proxy - report.lower_bound).abs() <= 1e-9 {
                assert!(report.is_signed_permutation);
            }
        }
    }

    #[test]
    fn alignment_identity_and_reversal() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let s = random_matrix(&mut rng, 4, 50, 1.0);
        let report = align_outputs(&s, &s).unwrap();
        assert_eq!(report.permutation, vec![0, 1, 2, 3]);
        assert!(report.signs.iter().all(|&v| v == 1));
        assert!(report.residual_energy < 1e-18);

        let mut reversed = Array2::zeros((4, 50));
        for i in 0..4 {
            for k in 0..50 {
                reversed[[i, k]] = -s[[3 - i, k]];
            }
        }
        let report = align_outputs(&reversed, &s).unwrap();
        assert_eq!(report.permutation, vec![3, 2, 1, 0]);
        assert!(report.signs.iter().all(|&v| v == -1));
    }

    #[test]
    fn alignment_recovers_random_signed_permutation() {
        // Oracle: exhaustive search over all d! permutations.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let d = 5;
        let s = random_matrix(&mut rng, d, 200, 1.0);
        let perm = [2usize, 0, 4, 1, 3];
        let signs = [1.0, -1.0, -1.0, 1.0, -1.0];
        let scales = [0.5, 2.0, 1.5, 0.8, 1.2];
        let mut y = Array2::zeros((d, 200));
        for i in 0..d {
            for k in 0..200 {
                y[[i, k]] = scales[i] * signs[i] * s[[perm[i], k]];
            }
        }
        let greedy = align_outputs(&y, &s).unwrap();
        let exhaustive = align_outputs_exhaustive(&y, &s).unwrap();
        assert_eq!(greedy.permutation, perm.to_vec());
        assert_eq!(exhaustive.permutation, perm.to_vec());
        for i in 0..d {
            assert_eq!(f64::from(greedy.signs[i]), signs[i]);
            assert!((greedy.scales[i] - scales[i]).abs() < 1e-12);
        }
        assert!(greedy.residual_energy < 1e-18);
    }

    #[test]
    fn alignment_rejects_zero_variance_row() {
        let mut y = Array2::zeros((2, 10));
        y.row_mut(0).fill(1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let s = random_matrix(&mut rng, 2, 10, 1.0);
        assert!(align_outputs(&y, &s).is_err());
    }

    #[test]
    fn sir_perfect_separation_hits_ceiling() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let s = random_matrix(&mut rng, 3, 500, 1.0);
        let report = sir(&s, &s).unwrap();
        assert!(report.per_output_db.iter().all(|&v| v == SIR_CEILING_DB));
        assert_eq!(report.mean_db, SIR_CEILING_DB);
    }

    #[test]
    fn sir_known_transfer_row() {
        // H row (1, 0.1) -> 20 dB.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let s = random_matrix(&mut rng, 2, 20_000, 1.0);
        let h = array![[1.0, 0.1], [0.0, 1.0]];
        let y = h.dot(&s);
        let report = sir(&y, &s).unwrap();
        assert!((report.per_output_db[0] - 20.0).abs() < 1e-9);
        // Recovered transfer matches the construction exactly (same batch).
        for i in 0..2 {
            for j in 0..2 {
                assert!((report.transfer[i][j] - h[[i, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sir_matches_closed_form_for_random_transfer() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let d = 3;
        let s = random_matrix(&mut rng, d, 10_000, 1.0);
        let h = random_matrix(&mut rng, d, d, 1.0);
        let y = h.dot(&s);
        let report = sir(&y, &s).unwrap();
        for i in 0..d {
            let row: Vec<f64> = (0..d).map(|j| h[[i, j]]).collect();
            let best = row.iter().map(|v| v * v).fold(0.0_f64, f64::max);
            let total: f64 = row.iter().map(|v| v * v).sum();
            let want = 10.0 * (best / (total - best)).log10();
            assert!((report.per_output_db[i] - want).abs() < 0.01);
            for j in 0..d {
                assert!((report.transfer[i][j] - h[[i, j]]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn sir_invariant_under_signed_permutation() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let d = 4;
        let s = random_matrix(&mut rng, d, 2_000, 1.0);
        let h = random_matrix(&mut rng, d, d, 1.0);
        let y = h.dot(&s);
        let base = sir(&y, &s).unwrap();
        let perm = [3usize, 1, 0, 2];
        let signs = [-1.0, 1.0, -1.0, 1.0];
        let mut shuffled = Array2::zeros((d, 2_000));
        for i in 0..d {
            for k in 0..2_000 {
                shuffled[[i, k]] = signs[i] * y[[perm[i], k]];
            }
        }
        let permuted = sir(&shuffled, &s).unwrap();
        assert!((base.mean_db - permuted.mean_db).abs() < 1e-9);
    }

    #[test]
    fn sir_rejects_short_batches() {
        let y = Array2::<f64>::zeros((3, 2));
        let s = Array2::<f64>::zeros((3, 2));
        assert!(sir(&y, &s).is_err());
    }

    #[test]
    fn ei_balance_matches_loop_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let d = 4;
        let mut lateral = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                lateral[[i, j]] = v;
                lateral[[j, i]] = v;
            }
        }
        let state = NetworkState::from_parts(
            random_matrix(&mut rng, d, d, 1.0),
            lateral,
            Array1::from_shape_fn(d, |_| rng.random_range(0.3..2.0)),
            7,
        )
        .unwrap();
        let balances = ei_balance(&state);
        for i in 0..d {
            let mut exc = 0.0;
            let mut inh = 0.0;
            for j in 0..d {
                exc += state.feedforward[[i, j]] * state.feedforward[[i, j]];
                inh += state.gains[j] * state.lateral[[i, j]] * state.lateral[[i, j]];
            }
            assert!((balances[i].excitation - exc).abs() < 1e-12);
            assert!((balances[i].inhibition - inh).abs() < 1e-12);
            assert!((balances[i].gap - (exc - inh)).abs() < 1e-12);
        }
        let zero_state = NetworkState::from_parts(
            Array2::zeros((2, 2)),
            Array2::eye(2),
            Array1::ones(2),
            0,
        )
        .unwrap();
        assert_eq!(ei_balance(&zero_state)[0].excitation, 0.0);
    }
}
