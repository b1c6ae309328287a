//! Generative-model types and exact likelihood primitives.
//!
//! An observation row is generated by drawing a binary latent vector `z`
//! from a [`LatentLaw`], computing a per-item linear predictor
//! `eta_j = b_{j,0} + sum_k b_{j,k} z_k`, and sampling each item from its
//! [`ResponseFamily`] at that predictor.
//!
//! Conventions fixed here and used everywhere else:
//! * dense latent-state order is lexicographic with `Z_1` (node 0) as the
//!   most significant bit;
//! * CPT parent configurations index parents sorted ascending by label,
//!   lowest label as the most significant bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{topological_order, GraphJson, LatentDag};

/// Maximum latent dimension for dense `2^K` representations.
pub const DENSE_CAP: usize = 20;

/// Observation families supported by the measurement layer.
///
/// The link from the linear predictor to the family's mean parameter is
/// fixed per family: identity (Gaussian mean), exponential (Poisson rate),
/// logistic (Bernoulli success probability), and identity on the log-scale
/// location (Lognormal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseFamily {
    Gaussian,
    Poisson,
    Bernoulli,
    Lognormal,
}

impl ResponseFamily {
    /// Whether the family carries a dispersion parameter.
    pub fn has_dispersion(self) -> bool {
        matches!(self, ResponseFamily::Gaussian | ResponseFamily::Lognormal)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(ResponseFamily::Gaussian),
            "poisson" => Ok(ResponseFamily::Poisson),
            "bernoulli" | "binary" => Ok(ResponseFamily::Bernoulli),
            "lognormal" => Ok(ResponseFamily::Lognormal),
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResponseFamily::Gaussian => "gaussian",
            ResponseFamily::Poisson => "poisson",
            ResponseFamily::Bernoulli => "bernoulli",
            ResponseFamily::Lognormal => "lognormal",
        }
    }
}

/// J x K binary measurement graph; `q[j][k] = 1` iff latent `k` is a direct
/// cause of item `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMatrix {
    j: usize,
    k: usize,
    entries: Vec<u8>,
}

impl QMatrix {
    pub fn new(j: usize, k: usize, entries: Vec<u8>) -> Result<Self> {
        if entries.len() != j * k {
            return Err(Error::InvalidInput(format!(
                "expected {}x{}={} entries, got {}",
                j,
                k,
                j * k,
                entries.len()
            )));
        }
        if entries.iter().any(|&e| e > 1) {
            return Err(Error::InvalidInput("q entries must be 0/1".into()));
        }
        Ok(Self { j, k, entries })
    }

    pub fn zeros(j: usize, k: usize) -> Self {
        Self { j, k, entries: vec![0; j * k] }
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, j: usize, k: usize) -> bool {
        self.entries[j * self.k + k] == 1
    }

    pub fn set(&mut self, j: usize, k: usize, v: bool) {
        self.entries[j * self.k + k] = u8::from(v);
    }

    pub fn row(&self, j: usize) -> &[u8] {
        &self.entries[j * self.k..(j + 1) * self.k]
    }

    pub fn column(&self, k: usize) -> Vec<u8> {
        (0..self.j).map(|j| self.entries[j * self.k + k]).collect()
    }

    pub fn ones(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum()
    }

    pub fn row_sum(&self, j: usize) -> usize {
        self.row(j).iter().map(|&e| e as usize).sum()
    }

    /// Reorder columns: new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> QMatrix {
        let mut out = QMatrix::zeros(self.j, self.k);
        for j in 0..self.j {
            for k in 0..self.k {
                out.set(j, k, self.get(j, perm[k]));
            }
        }
        out
    }

    /// Entrywise Hamming distance.
    pub fn hamming(&self, other: &QMatrix) -> usize {
        self.entries
            .iter()
            .zip(&other.entries)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// J rows of `(intercept, slope_1, ..., slope_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix {
    k: usize,
    rows: Vec<Vec<f64>>,
}

impl CoefMatrix {
    pub fn new(k: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (j, r) in rows.iter().enumerate() {
            if r.len() != k + 1 {
                return Err(Error::InvalidInput(format!(
                    "row {j} has {} entries, expected {}",
                    r.len(),
                    k + 1
                )));
            }
        }
        Ok(Self { k, rows })
    }

    pub fn zeros(j: usize, k: usize) -> Self {
        Self { k, rows: vec![vec![0.0; k + 1]; j] }
    }

    pub fn j(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut Vec<f64> {
        &mut self.rows[j]
    }

    pub fn intercept(&self, j: usize) -> f64 {
        self.rows[j][0]
    }

    /// Slope of latent `k` (0-based) for item `j`.
    pub fn slope(&self, j: usize, k: usize) -> f64 {
        self.rows[j][k + 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Reorder slope columns: new slope `k` is old slope `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> CoefMatrix {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut nr = Vec::with_capacity(self.k + 1);
                nr.push(r[0]);
                for k in 0..self.k {
                    nr.push(r[perm[k] + 1]);
                }
                nr
            })
            .collect();
        CoefMatrix { k: self.k, rows }
    }
}

/// Conditional probability table of one node: `probs[u]` is the success
/// probability given parent configuration `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    /// Parent labels sorted ascending; the lowest label is the most
    /// significant bit of the configuration index.
    pub parents: Vec<usize>,
    pub probs: Vec<f64>,
}

/// Distribution of the binary latent vector: either a Bayesian network over
/// a latent DAG or a dense probability vector over `{0,1}^K`.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentLaw {
    Bn { dag: LatentDag, cpts: Vec<Cpt> },
    Dense { k: usize, probs: Vec<f64> },
}

/// Index of state `z` in the fixed lexicographic order (`Z_1` = node 0 is
/// the most significant bit).
pub fn state_index(z: &[u8]) -> usize {
    z.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b == 1))
}

/// Inverse of [`state_index`].
pub fn index_state(idx: usize, k: usize) -> Vec<u8> {
    (0..k).map(|pos| ((idx >> (k - 1 - pos)) & 1) as u8).collect()
}

impl LatentLaw {
    pub fn k(&self) -> usize {
        match self {
            LatentLaw::Bn { dag, .. } => dag.k(),
            LatentLaw::Dense { k, .. } => *k,
        }
    }

    /// Validate invariants: BN probabilities strictly inside (0,1); dense
    /// vector nonnegative and summing to 1 within 1e-12.
    pub fn validate(&self) -> Result<()> {
        match self {
            LatentLaw::Bn { dag, cpts } => {
                if cpts.len() != dag.k() {
                    return Err(Error::InvalidInput(format!(
                        "expected {} CPTs, got {}",
                        dag.k(),
                        cpts.len()
                    )));
                }
                for (v, cpt) in cpts.iter().enumerate() {
                    let mut pa = dag.parents(v);
                    pa.sort_unstable();
                    if cpt.parents != pa {
                        return Err(Error::InvalidInput(format!(
                            "CPT {v} parents {:?} do not match DAG parents {:?}",
                            cpt.parents, pa
                        )));
                    }
                    if cpt.probs.len() != 1 << cpt.parents.len() {
                        return Err(Error::InvalidInput(format!(
                            "CPT {v} has {} entries, expected {}",
                            cpt.probs.len(),
                            1 << cpt.parents.len()
                        )));
                    }
                    if cpt.probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                        return Err(Error::Parameter(format!(
                            "CPT {v} has probabilities outside (0,1)"
                        )));
                    }
                }
                Ok(())
            }
            LatentLaw::Dense { k, probs } => {
                if probs.len() != 1 << k {
                    return Err(Error::InvalidInput(format!(
                        "dense law has {} entries, expected {}",
                        probs.len(),
                        1 << k
                    )));
                }
                if probs.iter().any(|&p| p < 0.0) {
                    return Err(Error::Parameter("dense law has negative entries".into()));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter(format!("dense law sums to {s}, not 1")));
                }
                Ok(())
            }
        }
    }
}

/// Full parameter set of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub law: LatentLaw,
    pub b: CoefMatrix,
    pub gamma: Vec<f64>,
    pub families: Vec<ResponseFamily>,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        let j = self.b.j();
        if self.gamma.len() != j || self.families.len() != j {
            return Err(Error::InvalidInput(format!(
                "b has {} rows but gamma has {} and families {}",
                j,
                self.gamma.len(),
                self.families.len()
            )));
        }
        if self.b.k() != self.law.k() {
            return Err(Error::InvalidInput(format!(
                "b has {} slopes but law has {} latents",
                self.b.k(),
                self.law.k()
            )));
        }
        for (jj, (&g, &f)) in self.gamma.iter().zip(&self.families).enumerate() {
            if f.has_dispersion() && g <= 0.0 {
                return Err(Error::Parameter(format!(
                    "item {jj}: {} requires positive dispersion, got {g}",
                    f.name()
                )));
            }
            if !f.has_dispersion() && g != 0.0 {
                return Err(Error::Parameter(format!(
                    "item {jj}: {} carries no dispersion but gamma = {g}",
                    f.name()
                )));
            }
        }
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        self.b.j()
    }

    pub fn k(&self) -> usize {
        self.law.k()
    }
}

/// N x J observed responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    j: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, j: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * j {
            return Err(Error::InvalidInput(format!(
                "expected {}x{}={} values, got {}",
                n,
                j,
                n * j,
                values.len()
            )));
        }
        Ok(Self { n, j, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.j + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.j..(i + 1) * self.j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// N x K binary latent configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentMatrix {
    n: usize,
    k: usize,
    bits: Vec<u8>,
}

impl LatentMatrix {
    pub fn new(n: usize, k: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != n * k {
            return Err(Error::InvalidInput(format!(
                "expected {}x{}={} bits, got {}",
                n,
                k,
                n * k,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("latent entries must be 0/1".into()));
        }
        Ok(Self { n, k, bits })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        Self { n, k, bits: vec![0; n * k] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, k: usize) -> u8 {
        self.bits[i * self.k + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: u8) {
        self.bits[i * self.k + k] = v;
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.k..(i + 1) * self.k]
    }

    /// Reorder columns: new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> LatentMatrix {
        let mut out = LatentMatrix::zeros(self.n, self.k);
        for i in 0..self.n {
            for k in 0..self.k {
                out.set(i, k, self.get(i, perm[k]));
            }
        }
        out
    }
}

/// `eta_j(z) = b_0 + sum_k b_k z_k`.
pub fn linear_predictor(b_row: &[f64], z: &[u8]) -> Result<f64> {
    if b_row.len() != z.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "coefficient row has {} entries for z of length {}",
            b_row.len(),
            z.len()
        )));
    }
    let mut eta = b_row[0];
    for (k, &zk) in z.iter().enumerate() {
        if zk == 1 {
            eta += b_row[k + 1];
        }
    }
    Ok(eta)
}

/// Numerically stable `log(1 + e^x)`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Log density/mass of one observation.
///
/// `gamma` is the variance-scale dispersion and is ignored by families
/// without one. Values outside the family support are domain errors.
pub fn log_density(family: ResponseFamily, eta: f64, gamma: f64, x: f64) -> Result<f64> {
    match family {
        ResponseFamily::Gaussian => {
            if gamma <= 0.0 {
                return Err(Error::Parameter(format!("gaussian needs gamma > 0, got {gamma}")));
            }
            let d = x - eta;
            Ok(-0.5 * (LN_2PI + gamma.ln()) - d * d / (2.0 * gamma))
        }
        ResponseFamily::Lognormal => {
            if gamma <= 0.0 {
                return Err(Error::Parameter(format!("lognormal needs gamma > 0, got {gamma}")));
            }
            if x <= 0.0 {
                return Err(Error::Domain(format!("lognormal support is x > 0, got {x}")));
            }
            let lx = x.ln();
            let d = lx - eta;
            Ok(-lx - 0.5 * (LN_2PI + gamma.ln()) - d * d / (2.0 * gamma))
        }
        ResponseFamily::Poisson => {
            if x < 0.0 || x.fract() != 0.0 {
                return Err(Error::Domain(format!(
                    "poisson support is nonnegative integers, got {x}"
                )));
            }
            Ok(x * eta - eta.exp() - statrs::function::gamma::ln_gamma(x + 1.0))
        }
        ResponseFamily::Bernoulli => {
            if x != 0.0 && x != 1.0 {
                return Err(Error::Domain(format!("bernoulli support is {{0,1}}, got {x}")));
            }
            // x*eta - log(1 + e^eta)
            Ok(x * eta - log1p_exp(eta))
        }
    }
}

/// Probability of one latent configuration under a law.
pub fn latent_prob(law: &LatentLaw, z: &[u8]) -> f64 {
    match law {
        LatentLaw::Dense { probs, .. } => probs[state_index(z)],
        LatentLaw::Bn { dag, cpts } => {
            let mut p = 1.0;
            for v in topological_order(dag) {
                let cpt = &cpts[v];
                let u = cpt
                    .parents
                    .iter()
                    .fold(0usize, |acc, &pa| (acc << 1) | usize::from(z[pa] == 1));
                let pv = cpt.probs[u];
                p *= if z[v] == 1 { pv } else { 1.0 - pv };
            }
            p
        }
    }
}

/// Expand a law into the dense probability vector over `{0,1}^K` in the
/// fixed lexicographic state order.
pub fn densify(law: &LatentLaw, cap: usize) -> Result<Vec<f64>> {
    let k = law.k();
    if k > cap {
        return Err(Error::Capacity(format!("K={k} exceeds dense cap {cap}")));
    }
    match law {
        LatentLaw::Dense { probs, .. } => Ok(probs.clone()),
        LatentLaw::Bn { .. } => {
            let states = 1usize << k;
            let mut out = Vec::with_capacity(states);
            for s in 0..states {
                out.push(latent_prob(law, &index_state(s, k)));
            }
            Ok(out)
        }
    }
}

/// Exact marginal log-likelihood by summing over all `2^K` configurations.
pub fn marginal_loglik(params: &ModelParams, x: &DataMatrix) -> Result<f64> {
    let k = params.k();
    let dense = densify(&params.law, DENSE_CAP)?;
    let j = params.n_items();
    if x.n() > 0 && x.j() != j {
        return Err(Error::InvalidInput(format!(
            "data has {} items but params have {j}",
            x.j()
        )));
    }
    // Per-state log prior and per-state eta for each item.
    let states = 1usize << k;
    let mut etas = vec![0.0f64; states * j];
    for s in 0..states {
        let z = index_state(s, k);
        for jj in 0..j {
            etas[s * j + jj] = linear_predictor(params.b.row(jj), &z)?;
        }
    }
    let mut total = 0.0;
    let mut terms = vec![0.0f64; states];
    for i in 0..x.n() {
        for (s, term) in terms.iter_mut().enumerate() {
            let mut t = dense[s].ln();
            for jj in 0..j {
                t += log_density(
                    params.families[jj],
                    etas[s * j + jj],
                    params.gamma[jj],
                    x.get(i, jj),
                )?;
            }
            *term = t;
        }
        total += logsumexp(&terms);
    }
    Ok(total)
}

/// Numerically stable log-sum-exp.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Column-wise check of `sum_j b_{j,k} > 0`.
pub fn check_monotone_sums(b: &CoefMatrix) -> Vec<bool> {
    (0..b.k())
        .map(|k| (0..b.j()).map(|j| b.slope(j, k)).sum::<f64>() > 0.0)
        .collect()
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsJson {
    pub families: Vec<String>,
    pub b: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub law: LawJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawJson {
    Bn { dag: GraphJson, cpts: BTreeMap<String, Vec<f64>> },
    Dense { dense: Vec<f64> },
}

impl From<&ModelParams> for ParamsJson {
    fn from(p: &ModelParams) -> Self {
        let law = match &p.law {
            LatentLaw::Bn { dag, cpts } => LawJson::Bn {
                dag: GraphJson::from(dag),
                cpts: cpts
                    .iter()
                    .enumerate()
                    .map(|(v, c)| (v.to_string(), c.probs.clone()))
                    .collect(),
            },
            LatentLaw::Dense { probs, .. } => LawJson::Dense { dense: probs.clone() },
        };
        ParamsJson {
            families: p.families.iter().map(|f| f.name().to_string()).collect(),
            b: p.b.rows().to_vec(),
            gamma: p.gamma.clone(),
            law,
        }
    }
}

impl ParamsJson {
    pub fn to_params(&self) -> Result<ModelParams> {
        let families: Vec<ResponseFamily> = self
            .families
            .iter()
            .map(|s| ResponseFamily::parse(s))
            .collect::<Result<_>>()?;
        let law = match &self.law {
            LawJson::Dense { dense } => {
                let states = dense.len();
                if states == 0 || (states & (states - 1)) != 0 {
                    return Err(Error::InvalidInput(format!(
                        "dense law length {states} is not a power of two"
                    )));
                }
                let k = states.trailing_zeros() as usize;
                LatentLaw::Dense { k, probs: dense.clone() }
            }
            LawJson::Bn { dag, cpts } => {
                let dag = dag.to_dag()?;
                let mut table = Vec::with_capacity(dag.k());
                for v in 0..dag.k() {
                    let probs = cpts
                        .get(&v.to_string())
                        .ok_or_else(|| Error::InvalidInput(format!("missing CPT for node {v}")))?
                        .clone();
                    let mut parents = dag.parents(v);
                    parents.sort_unstable();
                    table.push(Cpt { parents, probs });
                }
                LatentLaw::Bn { dag, cpts: table }
            }
        };
        let k = law.k();
        let b = CoefMatrix::new(k, self.b.clone())?;
        let params = ModelParams { law, b, gamma: self.gamma.clone(), families };
        params.validate()?;
        Ok(params)
    }
}
