//! Penalized Gibbs–SAEM estimation of the latent law, measurement
//! coefficients, and dispersions, with the measurement graph read off the
//! coefficient support.
//!
//! Each outer iteration runs one Gibbs sweep over all subject–coordinate
//! pairs (rank-one updates of a cached linear score), Robbins–Monro-smooths
//! the dense latent law and per-item sufficient statistics, and solves one
//! penalized M-step per item by cyclic coordinate descent (wrapped in IRLS
//! for the count/binary families). The complete-data log-likelihoods of the
//! four response families are affine in per-configuration aggregates
//! `(n_z, sum y, sum y^2)`, so the smoothed statistics reproduce the SAEM
//! surrogate exactly at O(2^K J) M-step cost independent of N.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    expit, log1p_exp, state_index, CoefMatrix, DataMatrix, LatentLaw, LatentMatrix, ModelParams,
    QMatrix, ResponseFamily, DENSE_CAP,
};
use crate::rng::Stream;
use crate::spectral::{spectral_init, InitConfig};

// ---------------------------------------------------------------------------
// Penalties
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Scad,
    Tlp,
}

/// Sparsity penalty applied to every slope coefficient: zero at zero,
/// nondecreasing, and exactly `lambda` for `|b| >= tau`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub tau: f64,
    pub scad_a: f64,
}

impl PenaltySpec {
    /// Default tuning `lambda = 0.5 sqrt(N log J)`, `tau = log(N)/sqrt(N)`.
    pub fn default_for(n: usize, j: usize) -> Self {
        let nf = (n.max(2)) as f64;
        let jf = (j.max(2)) as f64;
        Self {
            kind: PenaltyKind::Tlp,
            lambda: 0.5 * (nf * jf.ln()).sqrt(),
            tau: nf.ln() / nf.sqrt(),
            scad_a: 3.7,
        }
    }

    /// Penalty value at `b`.
    pub fn value(&self, b: f64) -> f64 {
        let x = b.abs();
        if self.lambda == 0.0 {
            return 0.0;
        }
        match self.kind {
            PenaltyKind::Tlp => self.lambda * x.min(self.tau) / self.tau,
            PenaltyKind::Scad => {
                let a = self.scad_a;
                let ls = self.tau / a;
                let scale = 2.0 * self.lambda / ((a + 1.0) * ls * ls);
                let raw = if x <= ls {
                    ls * x
                } else if x <= a * ls {
                    (2.0 * a * ls * x - x * x - ls * ls) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * ls * ls / 2.0
                };
                scale * raw
            }
        }
    }

    /// Total penalty over the slopes of a coefficient row.
    pub fn row_value(&self, b_row: &[f64]) -> f64 {
        b_row[1..].iter().map(|&b| self.value(b)).sum()
    }

    /// Piecewise-quadratic pieces `(lo, hi, c1, c2)` of the penalty on
    /// `[0, inf)`: `pen(x) = const + c1 x + c2 x^2` on each piece.
    fn pieces(&self) -> Vec<(f64, f64, f64, f64)> {
        match self.kind {
            PenaltyKind::Tlp => vec![
                (0.0, self.tau, self.lambda / self.tau, 0.0),
                (self.tau, f64::INFINITY, 0.0, 0.0),
            ],
            PenaltyKind::Scad => {
                let a = self.scad_a;
                let ls = self.tau / a;
                let scale = 2.0 * self.lambda / ((a + 1.0) * ls * ls);
                vec![
                    (0.0, ls, scale * ls, 0.0),
                    (
                        ls,
                        a * ls,
                        scale * a * ls / (a - 1.0),
                        -scale / (2.0 * (a - 1.0)),
                    ),
                    (a * ls, f64::INFINITY, 0.0, 0.0),
                ]
            }
        }
    }

    /// Exact minimizer of `0.5 w (b - btilde)^2 + pen(|b|)` over `b`.
    ///
    /// Evaluates the objective at the stationary point of every penalty
    /// piece plus all breakpoints, so thresholding to exact zero falls out
    /// of the comparison.
    pub fn coordinate_min(&self, w: f64, btilde: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        if self.lambda == 0.0 {
            return btilde;
        }
        let sign = if btilde < 0.0 { -1.0 } else { 1.0 };
        let target = btilde.abs();
        let objective = |b: f64| 0.5 * w * (b - target) * (b - target) + self.value(b);
        let mut best_b = 0.0;
        let mut best_f = objective(0.0);
        let consider = |b: f64, best_b: &mut f64, best_f: &mut f64| {
            if b.is_finite() && b >= 0.0 {
                let f = objective(b);
                if f < *best_f - 0.0 {
                    *best_f = f;
                    *best_b = b;
                }
            }
        };
        for (lo, hi, c1, c2) in self.pieces() {
            let denom = w + 2.0 * c2;
            if denom > 0.0 {
                let stat = (w * target - c1) / denom;
                if stat > lo && stat < hi {
                    consider(stat, &mut best_b, &mut best_f);
                }
            }
            if lo > 0.0 {
                consider(lo, &mut best_b, &mut best_f);
            }
            if hi.is_finite() {
                consider(hi, &mut best_b, &mut best_f);
            }
        }
        consider(target, &mut best_b, &mut best_f);
        sign * best_b
    }
}

// ---------------------------------------------------------------------------
// Step schedule and configuration
// ---------------------------------------------------------------------------

/// Robbins–Monro step sizes: 1 during burn-in, `(t - t0)^(-alpha)` after.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepSchedule {
    pub burn_in: usize,
    pub exponent: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { burn_in: 100, exponent: 0.7 }
    }
}

impl StepSchedule {
    pub fn theta(&self, t: usize) -> f64 {
        if t <= self.burn_in {
            1.0
        } else {
            ((t - self.burn_in) as f64).powf(-self.exponent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Spectral,
    Random,
}

/// Estimator configuration; `penalty = None` picks the sample-size default.
#[derive(Debug, Clone)]
pub struct SaemConfig {
    pub k: usize,
    pub penalty: Option<PenaltySpec>,
    pub schedule: StepSchedule,
    pub max_iter: usize,
    pub tol: f64,
    pub consecutive: usize,
    pub init: InitKind,
    pub init_config: InitConfig,
    pub seed: u64,
    pub dense_cap: usize,
}

impl SaemConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            penalty: None,
            schedule: StepSchedule::default(),
            max_iter: 600,
            tol: 1e-4,
            consecutive: 5,
            init: InitKind::Spectral,
            init_config: InitConfig::default(),
            seed: 0,
            dense_cap: DENSE_CAP,
        }
    }
}

/// Run report for one fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub delta_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

// ---------------------------------------------------------------------------
// Sufficient statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Entry {
    n: f64,
    sy: Vec<f64>,
    syy: Vec<f64>,
}

/// Per-configuration aggregates smoothed by the Robbins–Monro recursion,
/// plus per-item response-constant totals (terms of the complete-data
/// log-likelihood that do not involve the parameters).
#[derive(Debug, Clone)]
pub struct SuffStats {
    j: usize,
    map: HashMap<u64, Entry>,
    consts: Vec<f64>,
}

/// One item's view of the statistics, ready for an M-step.
#[derive(Debug, Clone)]
pub struct ItemStats {
    pub k: usize,
    /// `(config bits, weight, sum y, sum y^2)`.
    pub configs: Vec<(u64, f64, f64, f64)>,
    pub total_n: f64,
    pub const_term: f64,
}

impl SuffStats {
    pub fn empty(j: usize) -> Self {
        Self { j, map: HashMap::new(), consts: vec![0.0; j] }
    }

    /// Batch statistics of the current latent sample.
    fn batch(z: &LatentMatrix, y: &DataMatrix, const_cols: &[f64]) -> Self {
        let j = y.j();
        let mut map: HashMap<u64, Entry> = HashMap::new();
        for i in 0..z.n() {
            let key = state_index(z.row(i)) as u64;
            let e = map.entry(key).or_insert_with(|| Entry {
                n: 0.0,
                sy: vec![0.0; j],
                syy: vec![0.0; j],
            });
            e.n += 1.0;
            let row = y.row(i);
            for (jj, &v) in row.iter().enumerate() {
                e.sy[jj] += v;
                e.syy[jj] += v * v;
            }
        }
        Self { j, map, consts: const_cols.to_vec() }
    }

    /// `s <- (1 - theta) s + theta batch`, pruning negligible weights.
    pub fn sa_update(&mut self, batch: &SuffStats, theta: f64) {
        let keep = 1.0 - theta;
        if keep == 0.0 {
            self.map.clear();
            for c in self.consts.iter_mut() {
                *c = 0.0;
            }
        } else {
            for e in self.map.values_mut() {
                e.n *= keep;
                for v in e.sy.iter_mut() {
                    *v *= keep;
                }
                for v in e.syy.iter_mut() {
                    *v *= keep;
                }
            }
        }
        for (key, be) in &batch.map {
            let e = self.map.entry(*key).or_insert_with(|| Entry {
                n: 0.0,
                sy: vec![0.0; self.j],
                syy: vec![0.0; self.j],
            });
            e.n += theta * be.n;
            for (a, b) in e.sy.iter_mut().zip(&be.sy) {
                *a += theta * b;
            }
            for (a, b) in e.syy.iter_mut().zip(&be.syy) {
                *a += theta * b;
            }
        }
        self.map.retain(|_, e| e.n > 1e-15);
        for (c, b) in self.consts.iter_mut().zip(&batch.consts) {
            *c = keep * *c + theta * b;
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.map.values().map(|e| e.n).sum()
    }

    pub fn item_stats(&self, jj: usize, k: usize) -> ItemStats {
        let mut configs: Vec<(u64, f64, f64, f64)> = self
            .map
            .iter()
            .map(|(&key, e)| (key, e.n, e.sy[jj], e.syy[jj]))
            .collect();
        configs.sort_by_key(|c| c.0);
        let total_n = configs.iter().map(|c| c.1).sum();
        ItemStats { k, configs, total_n, const_term: self.consts[jj] }
    }
}

impl ItemStats {
    fn design(&self, bits: u64, coord: usize) -> f64 {
        if coord == 0 {
            1.0
        } else {
            (((bits >> (self.k - coord)) & 1) as u8) as f64
        }
    }

    fn eta(&self, beta: &[f64], bits: u64) -> f64 {
        let mut eta = beta[0];
        for c in 1..=self.k {
            if (bits >> (self.k - c)) & 1 == 1 {
                eta += beta[c];
            }
        }
        eta
    }

    /// Exact smoothed surrogate `F_j(beta, gamma)` reconstructed from the
    /// statistics.
    pub fn surrogate(&self, family: ResponseFamily, beta: &[f64], gamma: f64) -> f64 {
        const LN_2PI: f64 = 1.837_877_066_409_345_3;
        let mut f = self.const_term;
        match family {
            ResponseFamily::Gaussian | ResponseFamily::Lognormal => {
                for &(bits, n, sy, syy) in &self.configs {
                    let eta = self.eta(beta, bits);
                    f += -0.5 * n * (LN_2PI + gamma.ln())
                        - (syy - 2.0 * eta * sy + n * eta * eta) / (2.0 * gamma);
                }
            }
            ResponseFamily::Poisson => {
                for &(bits, n, sy, _) in &self.configs {
                    let eta = self.eta(beta, bits);
                    f += eta * sy - n * eta.min(30.0).exp();
                }
            }
            ResponseFamily::Bernoulli => {
                for &(bits, n, sy, _) in &self.configs {
                    let eta = self.eta(beta, bits);
                    f += eta * sy - n * log1p_exp(eta);
                }
            }
        }
        f
    }
}

// ---------------------------------------------------------------------------
// M-step
// ---------------------------------------------------------------------------

/// Cyclic coordinate descent on `0.5 sum_z w_z (u_z - eta_z)^2 + pen(b)`
/// with the intercept unpenalized. `etas` holds fitted values per config
/// and is kept coherent. Returns the largest coordinate move.
fn coordinate_descent_pass(
    stats: &ItemStats,
    weights: &[f64],
    targets: &[f64],
    beta: &mut [f64],
    etas: &mut [f64],
    penalty: &PenaltySpec,
) -> f64 {
    let mut max_move = 0.0f64;
    for coord in 0..=stats.k {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (idx, &(bits, ..)) in stats.configs.iter().enumerate() {
            let d = stats.design(bits, coord);
            if d != 0.0 {
                let w = weights[idx];
                s1 += w * d * d;
                s2 += w * d * (targets[idx] - etas[idx] + d * beta[coord]);
            }
        }
        if s1 <= 0.0 {
            continue;
        }
        let btilde = s2 / s1;
        let new = if coord == 0 { btilde } else { penalty.coordinate_min(s1, btilde) };
        let delta = new - beta[coord];
        if delta != 0.0 {
            for (idx, &(bits, ..)) in stats.configs.iter().enumerate() {
                let d = stats.design(bits, coord);
                if d != 0.0 {
                    etas[idx] += delta * d;
                }
            }
            beta[coord] = new;
            max_move = max_move.max(delta.abs());
        }
    }
    max_move
}

fn working_objective(
    weights: &[f64],
    targets: &[f64],
    etas: &[f64],
    beta: &[f64],
    penalty: &PenaltySpec,
) -> f64 {
    let mut f = 0.0;
    for ((&w, &u), &eta) in weights.iter().zip(targets).zip(etas) {
        f += 0.5 * w * (u - eta) * (u - eta);
    }
    f + penalty.row_value(beta)
}

/// Penalized M-step for one item. Returns the new `(beta, gamma)` and a
/// divergence flag (set when IRLS step-halving gave up and the previous
/// coefficients were kept).
pub fn mstep_item(
    stats: &ItemStats,
    family: ResponseFamily,
    penalty: &PenaltySpec,
    current_beta: &[f64],
    current_gamma: f64,
) -> (Vec<f64>, f64, bool) {
    if stats.total_n <= 0.0 {
        return (current_beta.to_vec(), current_gamma, false);
    }
    let mut beta = current_beta.to_vec();
    match family {
        ResponseFamily::Gaussian | ResponseFamily::Lognormal => {
            let mut gamma = current_gamma.max(1e-8);
            let mut etas: Vec<f64> =
                stats.configs.iter().map(|&(bits, ..)| stats.eta(&beta, bits)).collect();
            let targets: Vec<f64> = stats
                .configs
                .iter()
                .map(|&(_, n, sy, _)| if n > 0.0 { sy / n } else { 0.0 })
                .collect();
            for _outer in 0..4 {
                // weights n_z / gamma; penalty held on the original scale
                let weights: Vec<f64> =
                    stats.configs.iter().map(|&(_, n, ..)| n / gamma).collect();
                let mut guard = working_objective(&weights, &targets, &etas, &beta, penalty);
                for _pass in 0..200 {
                    let moved = coordinate_descent_pass(
                        stats, &weights, &targets, &mut beta, &mut etas, penalty,
                    );
                    let obj = working_objective(&weights, &targets, &etas, &beta, penalty);
                    debug_assert!(obj <= guard + 1e-10, "coordinate descent ascended");
                    guard = obj;
                    if moved < 1e-9 {
                        break;
                    }
                }
                // gamma is the weighted mean squared residual
                let mut rss = 0.0;
                for (idx, &(_, n, sy, syy)) in stats.configs.iter().enumerate() {
                    let eta = etas[idx];
                    rss += syy - 2.0 * eta * sy + n * eta * eta;
                }
                let new_gamma = (rss / stats.total_n).max(1e-8);
                let done = (new_gamma - gamma).abs() < 1e-10;
                gamma = new_gamma;
                if done {
                    break;
                }
            }
            (beta, gamma, false)
        }
        ResponseFamily::Poisson | ResponseFamily::Bernoulli => {
            let mut diverged = false;
            let mut f_cur = stats.surrogate(family, &beta, 0.0) - penalty.row_value(&beta);
            for _irls in 0..30 {
                let etas: Vec<f64> =
                    stats.configs.iter().map(|&(bits, ..)| stats.eta(&beta, bits)).collect();
                let mut weights = Vec::with_capacity(stats.configs.len());
                let mut targets = Vec::with_capacity(stats.configs.len());
                for (idx, &(_, n, sy, _)) in stats.configs.iter().enumerate() {
                    let eta = etas[idx];
                    let (mu, v) = match family {
                        ResponseFamily::Poisson => {
                            let m = eta.min(30.0).exp();
                            (m, m.max(1e-10))
                        }
                        ResponseFamily::Bernoulli => {
                            let m = expit(eta);
                            (m, (m * (1.0 - m)).max(1e-10))
                        }
                        _ => unreachable!(),
                    };
                    weights.push(n * v);
                    targets.push(eta + (sy / n.max(1e-300) - mu) / v);
                }
                let mut trial = beta.clone();
                let mut trial_etas = etas.clone();
                let mut guard =
                    working_objective(&weights, &targets, &trial_etas, &trial, penalty);
                for _pass in 0..200 {
                    let moved = coordinate_descent_pass(
                        stats, &weights, &targets, &mut trial, &mut trial_etas, penalty,
                    );
                    let obj = working_objective(&weights, &targets, &trial_etas, &trial, penalty);
                    debug_assert!(obj <= guard + 1e-10, "coordinate descent ascended");
                    guard = obj;
                    if moved < 1e-9 {
                        break;
                    }
                }
                // step-halving against the exact penalized surrogate
                let mut accepted = false;
                for _half in 0..10 {
                    let f_trial =
                        stats.surrogate(family, &trial, 0.0) - penalty.row_value(&trial);
                    if f_trial >= f_cur - 1e-12 {
                        let moved = trial
                            .iter()
                            .zip(&beta)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0f64, f64::max);
                        beta = trial.clone();
                        f_cur = f_trial;
                        accepted = true;
                        if moved < 1e-7 {
                            return (beta, 0.0, diverged);
                        }
                        break;
                    }
                    for (t, b) in trial.iter_mut().zip(&beta) {
                        *t = 0.5 * (*t + *b);
                    }
                }
                if !accepted {
                    diverged = true;
                    break;
                }
            }
            (beta, 0.0, diverged)
        }
    }
}

/// `q_{j,k} = 1` iff `|b_{j,k}| > zero_tol`.
pub fn threshold_q(b: &CoefMatrix, zero_tol: f64) -> QMatrix {
    let mut q = QMatrix::zeros(b.j(), b.k());
    for j in 0..b.j() {
        for k in 0..b.k() {
            q.set(j, k, b.slope(j, k).abs() > zero_tol);
        }
    }
    q
}

// ---------------------------------------------------------------------------
// Gibbs machinery
// ---------------------------------------------------------------------------

/// Mutable sampler state: current latents, cached linear scores, and the
/// dense latent law.
pub struct SaemState {
    pub p: Vec<f64>,
    pub z: LatentMatrix,
    /// `psi[i*j + jj] = b_{jj,0} + sum_k b_{jj,k} z_{ik}`.
    pub psi: Vec<f64>,
    pub iter: usize,
}

impl SaemState {
    pub fn new(p: Vec<f64>, z: LatentMatrix, b: &CoefMatrix) -> Self {
        let psi = compute_psi(&z, b);
        Self { p, z, psi, iter: 0 }
    }
}

fn compute_psi(z: &LatentMatrix, b: &CoefMatrix) -> Vec<f64> {
    let (n, j) = (z.n(), b.j());
    let mut psi = vec![0.0; n * j];
    for i in 0..n {
        let row = z.row(i);
        for jj in 0..j {
            let mut v = b.intercept(jj);
            for (k, &zk) in row.iter().enumerate() {
                if zk == 1 {
                    v += b.slope(jj, k);
                }
            }
            psi[i * j + jj] = v;
        }
    }
    psi
}

/// Log-density difference of one observation when its predictor moves from
/// `eta0` to `eta1`; response-constant terms cancel.
#[inline]
fn density_shift(family: ResponseFamily, y: f64, eta1: f64, eta0: f64, gamma: f64) -> f64 {
    match family {
        ResponseFamily::Gaussian | ResponseFamily::Lognormal => {
            let d1 = y - eta1;
            let d0 = y - eta0;
            (d0 * d0 - d1 * d1) / (2.0 * gamma)
        }
        ResponseFamily::Poisson => y * (eta1 - eta0) - (eta1.min(30.0).exp() - eta0.min(30.0).exp()),
        ResponseFamily::Bernoulli => y * (eta1 - eta0) - (log1p_exp(eta1) - log1p_exp(eta0)),
    }
}

/// Log odds of `Z_{i,k} = 1` versus `0` given all other coordinates and the
/// observations, from the cached scores.
pub fn gibbs_logodds(
    i: usize,
    k: usize,
    state: &SaemState,
    b: &CoefMatrix,
    gamma: &[f64],
    families: &[ResponseFamily],
    y: &DataMatrix,
) -> f64 {
    let kk = state.z.k();
    let j = b.j();
    let idx = state_index(state.z.row(i));
    let bit = 1usize << (kk - 1 - k);
    let idx1 = idx | bit;
    let idx0 = idx & !bit;
    let cur = state.z.get(i, k);
    let mut delta = state.p[idx1].ln() - state.p[idx0].ln();
    for jj in 0..j {
        let slope = b.slope(jj, k);
        if slope == 0.0 {
            continue;
        }
        let psi = state.psi[i * j + jj];
        let (eta1, eta0) = if cur == 1 { (psi, psi - slope) } else { (psi + slope, psi) };
        delta += density_shift(families[jj], y.get(i, jj), eta1, eta0, gamma[jj]);
    }
    delta
}

/// One full sweep: every subject, every coordinate in a fresh random order
/// per subject; accepted flips shift the cached scores by the slope column.
pub fn gibbs_sweep(
    state: &mut SaemState,
    b: &CoefMatrix,
    gamma: &[f64],
    families: &[ResponseFamily],
    y: &DataMatrix,
    rng: &mut Stream,
) {
    let n = state.z.n();
    let kk = state.z.k();
    let j = b.j();
    // items per coordinate with a nonzero slope
    let active: Vec<Vec<(usize, f64)>> = (0..kk)
        .map(|k| {
            (0..j)
                .filter_map(|jj| {
                    let s = b.slope(jj, k);
                    (s != 0.0).then_some((jj, s))
                })
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..kk).collect();
    for i in 0..n {
        // Fisher-Yates
        for pos in (1..kk).rev() {
            let swap = rng.random_range(0..=pos);
            order.swap(pos, swap);
        }
        let mut idx = state_index(state.z.row(i));
        for &k in &order {
            let bit = 1usize << (kk - 1 - k);
            let cur = (idx & bit) != 0;
            let mut delta = state.p[idx | bit].ln() - state.p[idx & !bit].ln();
            for &(jj, slope) in &active[k] {
                let psi = state.psi[i * j + jj];
                let (eta1, eta0) = if cur { (psi, psi - slope) } else { (psi + slope, psi) };
                delta += density_shift(families[jj], y.get(i, jj), eta1, eta0, gamma[jj]);
            }
            let new = rng.random::<f64>() < expit(delta);
            if new != cur {
                let sign = if new { 1.0 } else { -1.0 };
                for &(jj, slope) in &active[k] {
                    state.psi[i * j + jj] += sign * slope;
                }
                idx = if new { idx | bit } else { idx & !bit };
                state.z.set(i, k, u8::from(new));
            }
        }
    }
}

/// `p' = (1 - theta) p + theta empirical`, floored at 1e-12 and
/// renormalized.
pub fn update_latent_law(p: &[f64], empirical: &[f64], theta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = p
        .iter()
        .zip(empirical)
        .map(|(&a, &b)| ((1.0 - theta) * a + theta * b).max(1e-12))
        .collect();
    let total: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

// ---------------------------------------------------------------------------
// Fit driver
// ---------------------------------------------------------------------------

/// Response values on the scale the statistics accumulate: the log for
/// Lognormal items, identity otherwise.
fn transform_responses(x: &DataMatrix, families: &[ResponseFamily]) -> Result<(DataMatrix, Vec<f64>)> {
    let (n, j) = (x.n(), x.j());
    let mut values = Vec::with_capacity(n * j);
    let mut consts = vec![0.0f64; j];
    for i in 0..n {
        for jj in 0..j {
            let v = x.get(i, jj);
            let y = match families[jj] {
                ResponseFamily::Gaussian => v,
                ResponseFamily::Bernoulli => {
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Domain(format!(
                            "item {jj}: bernoulli value {v} at row {i}"
                        )));
                    }
                    v
                }
                ResponseFamily::Poisson => {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::Domain(format!(
                            "item {jj}: poisson value {v} at row {i}"
                        )));
                    }
                    consts[jj] -= statrs::function::gamma::ln_gamma(v + 1.0);
                    v
                }
                ResponseFamily::Lognormal => {
                    if v <= 0.0 {
                        return Err(Error::Domain(format!(
                            "item {jj}: lognormal value {v} at row {i}"
                        )));
                    }
                    consts[jj] -= v.ln();
                    v.ln()
                }
            };
            values.push(y);
        }
    }
    Ok((DataMatrix::new(n, j, values)?, consts))
}

fn random_init(
    y: &DataMatrix,
    k: usize,
    families: &[ResponseFamily],
    rng: &mut Stream,
) -> (Vec<f64>, CoefMatrix, Vec<f64>, LatentMatrix) {
    use rand_distr::{Distribution, Normal};
    let (n, j) = (y.n(), y.j());
    let mut z = LatentMatrix::zeros(n, k);
    for i in 0..n {
        for kk in 0..k {
            z.set(i, kk, u8::from(rng.random::<f64>() < 0.5));
        }
    }
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rows = Vec::with_capacity(j);
    for jj in 0..j {
        let mean = (0..n).map(|i| y.get(i, jj)).sum::<f64>() / n.max(1) as f64;
        let intercept = match families[jj] {
            ResponseFamily::Gaussian | ResponseFamily::Lognormal => mean,
            ResponseFamily::Poisson => mean.max(1e-3).ln(),
            ResponseFamily::Bernoulli => {
                let m = mean.clamp(1e-3, 1.0 - 1e-3);
                (m / (1.0 - m)).ln()
            }
        };
        let mut row = vec![intercept];
        for _ in 0..k {
            row.push(noise.sample(rng));
        }
        rows.push(row);
    }
    let mut b = CoefMatrix::new(k, rows).unwrap();
    for kk in 0..k {
        let s: f64 = (0..j).map(|jj| b.slope(jj, kk)).sum();
        if s < 0.0 {
            for jj in 0..j {
                b.row_mut(jj)[kk + 1] = -b.slope(jj, kk);
            }
        }
    }
    let gamma: Vec<f64> = families
        .iter()
        .enumerate()
        .map(|(jj, f)| {
            if f.has_dispersion() {
                let mean = (0..n).map(|i| y.get(i, jj)).sum::<f64>() / n.max(1) as f64;
                let var = (0..n).map(|i| (y.get(i, jj) - mean).powi(2)).sum::<f64>()
                    / n.max(1) as f64;
                var.max(1e-4)
            } else {
                0.0
            }
        })
        .collect();
    let p = vec![1.0 / (1usize << k) as f64; 1 << k];
    (p, b, gamma, z)
}

/// Fit the model by penalized Gibbs–SAEM. Returns the parameter estimate,
/// the support-thresholded measurement graph, and diagnostics.
pub fn fit(
    x: &DataMatrix,
    k: usize,
    families: &[ResponseFamily],
    config: &SaemConfig,
) -> Result<(ModelParams, QMatrix, FitDiagnostics)> {
    let start = Instant::now();
    if k == 0 || k > config.dense_cap {
        return Err(Error::Capacity(format!(
            "K={k} outside 1..={}",
            config.dense_cap
        )));
    }
    if families.len() != x.j() {
        return Err(Error::InvalidInput(format!(
            "{} families for {} data columns",
            families.len(),
            x.j()
        )));
    }
    let (n, j) = (x.n(), x.j());
    if n == 0 {
        return Err(Error::InvalidInput("empty data".into()));
    }
    let penalty = config.penalty.unwrap_or_else(|| PenaltySpec::default_for(n, j));
    let (y, const_cols) = transform_responses(x, families)?;
    let mut rng = crate::rng::stream(config.seed);
    let mut warnings = Vec::new();

    let (p0, b0, g0, z0) = match config.init {
        InitKind::Spectral => match spectral_init(x, k, families, &config.init_config) {
            Ok(out) => {
                warnings.extend(out.warnings);
                (out.p0, out.b0, out.gamma0, out.z0)
            }
            Err(e) => {
                warnings.push(format!("spectral init failed ({e}); random fallback"));
                random_init(&y, k, families, &mut rng)
            }
        },
        InitKind::Random => random_init(&y, k, families, &mut rng),
    };
    let mut b = b0;
    let mut gamma: Vec<f64> = families
        .iter()
        .zip(&g0)
        .map(|(f, &g)| if f.has_dispersion() { g.max(1e-4) } else { 0.0 })
        .collect();
    let mut state = SaemState::new(p0, z0, &b);
    let mut stats = SuffStats::empty(j);

    let mut delta_trace = Vec::new();
    let mut objective_trace = Vec::new();
    let mut streak = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    let states = 1usize << k;

    for t in 1..=config.max_iter {
        iterations = t;
        let theta = config.schedule.theta(t);

        gibbs_sweep(&mut state, &b, &gamma, families, &y, &mut rng);
        state.iter = t;

        // latent-law update
        let mut empirical = vec![0.0f64; states];
        for i in 0..n {
            empirical[state_index(state.z.row(i))] += 1.0;
        }
        for e in empirical.iter_mut() {
            *e /= n as f64;
        }
        let new_p = update_latent_law(&state.p, &empirical, theta);
        let mut delta = new_p
            .iter()
            .zip(&state.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        state.p = new_p;

        // sufficient statistics and M-steps
        let batch = SuffStats::batch(&state.z, &y, &const_cols);
        stats.sa_update(&batch, theta);

        let mut objective = 0.0;
        let mut psi_dirty = false;
        for jj in 0..j {
            let item = stats.item_stats(jj, k);
            let (new_beta, new_gamma, diverged) =
                mstep_item(&item, families[jj], &penalty, b.row(jj), gamma[jj]);
            if diverged {
                warnings.push(format!("item {jj}: M-step step-halving gave up at t={t}"));
            }
            for (old, new) in b.row(jj).iter().zip(&new_beta) {
                delta = delta.max((old - new).abs());
            }
            delta = delta.max((gamma[jj] - new_gamma).abs());
            if b.row(jj) != new_beta.as_slice() {
                psi_dirty = true;
            }
            *b.row_mut(jj) = new_beta;
            gamma[jj] = new_gamma;
            objective += item.surrogate(families[jj], b.row(jj), gamma[jj].max(1e-8))
                - penalty.row_value(b.row(jj));
        }
        if psi_dirty {
            state.psi = compute_psi(&state.z, &b);
        }

        delta_trace.push(delta);
        objective_trace.push(objective);

        if t > config.schedule.burn_in && delta < config.tol {
            streak += 1;
            if streak >= config.consecutive {
                converged = true;
                break;
            }
        } else {
            streak = 0;
        }
    }

    let q = threshold_q(&b, 1e-8);
    let params = ModelParams {
        law: LatentLaw::Dense { k, probs: state.p.clone() },
        b,
        gamma,
        families: families.to_vec(),
    };
    params.validate()?;
    let diagnostics = FitDiagnostics {
        iterations,
        converged,
        delta_trace,
        objective_trace,
        warnings,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((params, q, diagnostics))
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

/// Minimum-Hamming assignment of estimate columns to truth columns via
/// bitmask dynamic programming; among optimal assignments the
/// lexicographically smallest `perm` is returned (`perm[t]` = estimate
/// column matched to truth column `t`). The aligned matrix is
/// `q_est.permute_columns(&perm)`.
pub fn align_q_columns(q_est: &QMatrix, q_true: &QMatrix) -> (Vec<usize>, QMatrix) {
    let k = q_true.k();
    assert_eq!(q_est.k(), k, "column-count mismatch");
    let cost: Vec<Vec<u32>> = (0..k)
        .map(|e| {
            (0..k)
                .map(|t| {
                    let ce = q_est.column(e);
                    let ct = q_true.column(t);
                    ce.iter().zip(&ct).filter(|(a, b)| a != b).count() as u32
                })
                .collect()
        })
        .collect();
    // dp_back[mask] = min cost of filling truth slots popcount(mask)..K-1
    // with estimate columns outside mask
    let full = (1usize << k) - 1;
    let mut dp_back = vec![u32::MAX; 1 << k];
    dp_back[full] = 0;
    let mut masks: Vec<usize> = (0..(1usize << k)).collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    for &mask in &masks {
        if mask == full {
            continue;
        }
        let t = mask.count_ones() as usize;
        let mut best = u32::MAX;
        for e in 0..k {
            if mask & (1 << e) == 0 {
                let sub = dp_back[mask | (1 << e)];
                if sub != u32::MAX {
                    best = best.min(cost[e][t] + sub);
                }
            }
        }
        dp_back[mask] = best;
    }
    let mut perm = Vec::with_capacity(k);
    let mut mask = 0usize;
    for t in 0..k {
        for e in 0..k {
            if mask & (1 << e) == 0
                && dp_back[mask | (1 << e)] != u32::MAX
                && cost[e][t] + dp_back[mask | (1 << e)] == dp_back[mask]
            {
                perm.push(e);
                mask |= 1 << e;
                break;
            }
        }
        debug_assert_eq!(perm.len(), t + 1, "assignment recovery failed");
    }
    let aligned = q_est.permute_columns(&perm);
    (perm, aligned)
}

/// A latent-relabeled copy of an estimate.
#[derive(Debug, Clone)]
pub struct AlignedEstimate {
    pub perm: Vec<usize>,
    pub params: ModelParams,
    pub q: QMatrix,
}

/// Align an estimate's latent labels to a reference measurement matrix:
/// the permutation minimizes the Hamming distance between the permuted
/// estimate columns and the truth, and is applied simultaneously to the
/// coefficients and the latent-law coordinates.
pub fn align_permutation(
    params: &ModelParams,
    q: &QMatrix,
    q_true: &QMatrix,
) -> Result<AlignedEstimate> {
    let k = params.k();
    if q_true.k() != k || q.k() != k {
        return Err(Error::InvalidInput(format!(
            "latent-count mismatch: params {k}, q {}, truth {}",
            q.k(),
            q_true.k()
        )));
    }
    let (perm, aligned_q) = align_q_columns(q, q_true);
    let b = params.b.permute_columns(&perm);
    let dense = crate::model::densify(&params.law, DENSE_CAP)?;
    let states = 1usize << k;
    let mut probs = vec![0.0f64; states];
    for (s, slot) in probs.iter_mut().enumerate() {
        // aligned coordinate t reads the estimate's coordinate perm[t]
        let mut src = 0usize;
        for t in 0..k {
            if (s >> (k - 1 - t)) & 1 == 1 {
                src |= 1 << (k - 1 - perm[t]);
            }
        }
        *slot = dense[src];
    }
    let aligned = ModelParams {
        law: LatentLaw::Dense { k, probs },
        b,
        gamma: params.gamma.clone(),
        families: params.families.clone(),
    };
    Ok(AlignedEstimate { perm, params: aligned, q: aligned_q })
}
