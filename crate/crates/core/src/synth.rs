//! Ground-truth generators for the benchmark experiments: named latent
//! DAGs, banded measurement designs, CPT sampling, coefficient assignment,
//! and ancestral sampling of latents and observations.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{topological_order, LatentDag};
use crate::model::{
    expit, linear_predictor, CoefMatrix, Cpt, DataMatrix, LatentLaw, LatentMatrix, ModelParams,
    QMatrix, ResponseFamily,
};
use crate::rng::Stream;

/// The two banded measurement designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QKind {
    /// Tridiagonal band stacked over two identity blocks.
    Q1,
    /// Pentadiagonal band stacked over two identity blocks.
    Q2,
}

impl QKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(QKind::Q1),
            "q2" => Ok(QKind::Q2),
            other => Err(Error::InvalidInput(format!("unknown q design '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QKind::Q1 => "q1",
            QKind::Q2 => "q2",
        }
    }

    fn half_bandwidth(self) -> usize {
        match self {
            QKind::Q1 => 1,
            QKind::Q2 => 2,
        }
    }
}

/// One benchmark cell: a named DAG, a measurement design, a response
/// family, a sample size, and a seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDesign {
    pub dag_name: String,
    pub q_kind: QKind,
    pub family: ResponseFamily,
    pub n: usize,
    pub seed: u64,
}

/// The benchmark latent DAGs, by figure name.
///
/// Accepted names (case-insensitive, hyphen optional): chain-5, tree-5,
/// model-5, chain-10, tree-10, model-7, model-8, model-13.
pub fn benchmark_dag(name: &str) -> Result<LatentDag> {
    let key = name.to_ascii_lowercase().replace('-', "");
    let (k, edges): (usize, Vec<(usize, usize)>) = match key.as_str() {
        "chain5" => (5, (0..4).map(|i| (i, i + 1)).collect()),
        "tree5" => (5, vec![(0, 1), (0, 2), (1, 3), (1, 4)]),
        "model5" => (5, vec![(0, 1), (2, 3), (4, 3)]),
        "chain10" => (10, (0..9).map(|i| (i, i + 1)).collect()),
        "tree10" => (
            10,
            vec![
                (0, 1),
                (0, 2),
                (1, 3),
                (1, 4),
                (2, 5),
                (2, 6),
                (3, 7),
                (3, 8),
                (4, 9),
            ],
        ),
        "model7" => (
            7,
            vec![
                (0, 1),
                (0, 2),
                (1, 3),
                (1, 4),
                (2, 4),
                (2, 3),
                (3, 5),
                (4, 6),
            ],
        ),
        "model8" => (
            8,
            vec![
                (0, 1),
                (0, 2),
                (1, 3),
                (1, 4),
                (2, 5),
                (2, 6),
                (4, 7),
                (5, 7),
            ],
        ),
        "model13" => (
            13,
            vec![
                (0, 1),
                (0, 2),
                (1, 3),
                (1, 4),
                (2, 5),
                (2, 6),
                (3, 7),
                (3, 8),
                (3, 9),
                (4, 7),
                (4, 8),
                (4, 9),
                (5, 10),
                (5, 11),
                (5, 12),
                (6, 10),
                (6, 11),
                (6, 12),
            ],
        ),
        _ => return Err(Error::InvalidInput(format!("unknown benchmark DAG '{name}'"))),
    };
    LatentDag::new(k, edges)
}

/// All benchmark DAG names in a fixed order.
pub fn benchmark_names() -> &'static [&'static str] {
    &[
        "chain-5", "tree-5", "model-5", "chain-10", "tree-10", "model-7", "model-8", "model-13",
    ]
}

/// Build a measurement matrix: a banded K x K block over two stacked K x K
/// identity blocks, J = 3K rows total.
pub fn build_q(kind: QKind, k: usize) -> Result<QMatrix> {
    if k < 3 {
        return Err(Error::InvalidInput(format!("band design needs k >= 3, got {k}")));
    }
    let w = kind.half_bandwidth();
    let j = 3 * k;
    let mut q = QMatrix::zeros(j, k);
    for row in 0..k {
        let lo = row.saturating_sub(w);
        let hi = (row + w).min(k - 1);
        for col in lo..=hi {
            q.set(row, col, true);
        }
    }
    for col in 0..k {
        q.set(k + col, col, true);
        q.set(2 * k + col, col, true);
    }
    Ok(q)
}

fn draw_split_range(rng: &mut Stream, lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64) -> f64 {
    if rng.random::<bool>() {
        rng.random_range(lo_a..hi_a)
    } else {
        rng.random_range(lo_b..hi_b)
    }
}

/// Sample conditional probability tables for a benchmark DAG.
///
/// Roots and single-parent children draw from [0.3,0.35] or [0.65,0.7] with
/// equal probability (the parent-0 entry is the complement of the parent-1
/// entry). Two-parent children draw (0,0) from [0.2,0.25], (1,1) from
/// [0.6,0.65], (0,1) from [0.35,0.4], and (1,0) from [0.77,0.82]. Nodes with
/// more than two parents are rejected.
pub fn sample_cpts(dag: &LatentDag, rng: &mut Stream) -> Result<LatentLaw> {
    let mut cpts = Vec::with_capacity(dag.k());
    for v in 0..dag.k() {
        let mut parents = dag.parents(v);
        parents.sort_unstable();
        let probs = match parents.len() {
            0 => vec![draw_split_range(rng, 0.3, 0.35, 0.65, 0.7)],
            1 => {
                let p1 = draw_split_range(rng, 0.3, 0.35, 0.65, 0.7);
                vec![1.0 - p1, p1]
            }
            2 => {
                // configuration index: lower-labeled parent is the MSB
                let p00 = rng.random_range(0.2..0.25);
                let p01 = rng.random_range(0.35..0.4);
                let p10 = rng.random_range(0.77..0.82);
                let p11 = rng.random_range(0.6..0.65);
                vec![p00, p01, p10, p11]
            }
            n => {
                return Err(Error::UnsupportedDesign(format!(
                    "node {v} has {n} parents; CPT rules cover at most 2"
                )))
            }
        };
        cpts.push(Cpt { parents, probs });
    }
    let law = LatentLaw::Bn { dag: dag.clone(), cpts };
    law.validate()?;
    Ok(law)
}

/// Assign intercepts, slopes, and dispersions for a measurement design.
///
/// Intercept −1 and slope `3 / row_sum` for Gaussian/Lognormal items;
/// intercept 1 and slope `2 / row_sum` for Poisson/Bernoulli. Dispersion is
/// 1 where the family has one, 0 otherwise.
pub fn assign_betas(q: &QMatrix, family: ResponseFamily) -> Result<(CoefMatrix, Vec<f64>)> {
    let (intercept, scale) = match family {
        ResponseFamily::Gaussian | ResponseFamily::Lognormal => (-1.0, 3.0),
        ResponseFamily::Poisson | ResponseFamily::Bernoulli => (1.0, 2.0),
    };
    let mut rows = Vec::with_capacity(q.j());
    for j in 0..q.j() {
        let s = q.row_sum(j);
        if s == 0 {
            return Err(Error::InvalidInput(format!("q row {j} is all zeros")));
        }
        let slope = scale / s as f64;
        let mut row = vec![0.0; q.k() + 1];
        row[0] = intercept;
        for k in 0..q.k() {
            if q.get(j, k) {
                row[k + 1] = slope;
            }
        }
        rows.push(row);
    }
    let gamma = vec![if family.has_dispersion() { 1.0 } else { 0.0 }; q.j()];
    Ok((CoefMatrix::new(q.k(), rows)?, gamma))
}

/// Draw `n` i.i.d. latent rows by ancestral sampling of a BN-form law.
pub fn sample_latents(law: &LatentLaw, n: usize, rng: &mut Stream) -> Result<LatentMatrix> {
    let LatentLaw::Bn { dag, cpts } = law else {
        return Err(Error::InvalidInput("ancestral sampling needs a BN-form law".into()));
    };
    let k = dag.k();
    let order = topological_order(dag);
    let mut z = LatentMatrix::zeros(n, k);
    for i in 0..n {
        for &v in &order {
            let cpt = &cpts[v];
            let u = cpt
                .parents
                .iter()
                .fold(0usize, |acc, &pa| (acc << 1) | usize::from(z.get(i, pa) == 1));
            let bit = u8::from(rng.random::<f64>() < cpt.probs[u]);
            z.set(i, v, bit);
        }
    }
    Ok(z)
}

/// Draw observed responses given latent rows.
pub fn sample_observed(
    z: &LatentMatrix,
    params: &ModelParams,
    rng: &mut Stream,
) -> Result<DataMatrix> {
    let n = z.n();
    let j = params.n_items();
    if z.k() != params.k() {
        return Err(Error::InvalidInput(format!(
            "latents have {} columns but params have {}",
            z.k(),
            params.k()
        )));
    }
    let mut values = Vec::with_capacity(n * j);
    for i in 0..n {
        for jj in 0..j {
            let eta = linear_predictor(params.b.row(jj), z.row(i))?;
            let x = match params.families[jj] {
                ResponseFamily::Gaussian => {
                    let d = Normal::new(eta, params.gamma[jj].sqrt())
                        .map_err(|e| Error::Parameter(e.to_string()))?;
                    d.sample(rng)
                }
                ResponseFamily::Lognormal => {
                    let d = Normal::new(eta, params.gamma[jj].sqrt())
                        .map_err(|e| Error::Parameter(e.to_string()))?;
                    d.sample(rng).exp()
                }
                ResponseFamily::Poisson => {
                    let d = Poisson::new(eta.exp())
                        .map_err(|e| Error::Parameter(e.to_string()))?;
                    d.sample(rng)
                }
                ResponseFamily::Bernoulli => f64::from(rng.random::<f64>() < expit(eta)),
            };
            values.push(x);
        }
    }
    DataMatrix::new(n, j, values)
}

/// Build the full ground truth for one benchmark cell.
pub struct Truth {
    pub dag: LatentDag,
    pub q: QMatrix,
    pub params: ModelParams,
}

/// Instantiate a design: DAG, Q, CPTs, and coefficients.
pub fn make_truth(design: &SimDesign, rng: &mut Stream) -> Result<Truth> {
    let dag = benchmark_dag(&design.dag_name)?;
    let q = build_q(design.q_kind, dag.k())?;
    let law = sample_cpts(&dag, rng)?;
    let (b, gamma) = assign_betas(&q, design.family)?;
    let params = ModelParams {
        law,
        b,
        gamma,
        families: vec![design.family; q.j()],
    };
    params.validate()?;
    Ok(Truth { dag, q, params })
}

/// Generate latents and observations for a design.
pub fn simulate(design: &SimDesign) -> Result<(Truth, LatentMatrix, DataMatrix)> {
    let mut rng = crate::rng::stream(design.seed);
    let truth = make_truth(design, &mut rng)?;
    let z = sample_latents(&truth.params.law, design.n, &mut rng)?;
    let x = sample_observed(&z, &truth.params, &mut rng)?;
    Ok((truth, z, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{densify, state_index};
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn benchmark_dag_edge_counts() {
        let chain5 = benchmark_dag("Chain-5").unwrap();
        assert_eq!(chain5.edges().len(), 4);
        assert!(chain5.has_edge(0, 1) && chain5.has_edge(3, 4));

        let model5 = benchmark_dag("model-5").unwrap();
        assert_eq!(
            model5.edges().iter().copied().collect::<Vec<_>>(),
            vec![(0, 1), (2, 3), (4, 3)]
        );

        let model8 = benchmark_dag("model8").unwrap();
        assert_eq!(model8.edges().len(), 8);
        assert!(model8.has_edge(4, 7) && model8.has_edge(5, 7));

        assert_eq!(benchmark_dag("model-13").unwrap().edges().len(), 18);
        assert!(benchmark_dag("ring-9").is_err());
    }

    #[test]
    fn build_q_ones_counts() {
        assert_eq!(build_q(QKind::Q1, 10).unwrap().ones(), 48);
        assert_eq!(build_q(QKind::Q2, 10).unwrap().ones(), 64);
        assert_eq!(build_q(QKind::Q1, 5).unwrap().ones(), 23);
        assert!(build_q(QKind::Q1, 2).is_err());
        // anchors present: rows k..3k are two identity blocks
        let q = build_q(QKind::Q1, 5).unwrap();
        for col in 0..5 {
            assert!(q.get(5 + col, col));
            assert!(q.get(10 + col, col));
            assert_eq!(q.row_sum(5 + col), 1);
        }
    }

    #[test]
    fn cpt_rules_hold() {
        let mut rng = stream(11);
        for name in ["chain-5", "model-5", "model-13"] {
            let dag = benchmark_dag(name).unwrap();
            let law = sample_cpts(&dag, &mut rng).unwrap();
            let LatentLaw::Bn { cpts, .. } = &law else { unreachable!() };
            for (v, cpt) in cpts.iter().enumerate() {
                for &p in &cpt.probs {
                    assert!(p > 0.0 && p < 1.0, "node {v} prob {p}");
                }
                match cpt.parents.len() {
                    0 => {
                        let p = cpt.probs[0];
                        assert!((0.3..0.35).contains(&p) || (0.65..0.7).contains(&p));
                    }
                    1 => {
                        let p1 = cpt.probs[1];
                        assert!((0.3..0.35).contains(&p1) || (0.65..0.7).contains(&p1));
                        assert_relative_eq!(cpt.probs[0], 1.0 - p1, epsilon = 1e-15);
                    }
                    2 => {
                        assert!((0.2..0.25).contains(&cpt.probs[0]));
                        assert!((0.35..0.4).contains(&cpt.probs[1]));
                        assert!((0.77..0.82).contains(&cpt.probs[2]));
                        assert!((0.6..0.65).contains(&cpt.probs[3]));
                    }
                    _ => unreachable!(),
                }
            }
            // strictly positive dense law
            let dense = densify(&law, 20).unwrap();
            assert!(dense.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn cpts_reject_three_parents() {
        let dag = LatentDag::new(4, [(0, 3), (1, 3), (2, 3)]).unwrap();
        let mut rng = stream(1);
        assert!(matches!(
            sample_cpts(&dag, &mut rng),
            Err(Error::UnsupportedDesign(_))
        ));
    }

    #[test]
    fn beta_assignment_rules() {
        let q = build_q(QKind::Q1, 5).unwrap();
        let (b, gamma) = assign_betas(&q, ResponseFamily::Gaussian).unwrap();
        // interior band row has 3 ones -> slope 1.0, intercept -1
        assert_relative_eq!(b.intercept(1), -1.0);
        assert_relative_eq!(b.slope(1, 0), 1.0);
        assert_relative_eq!(b.slope(1, 1), 1.0);
        assert_relative_eq!(b.slope(1, 2), 1.0);
        assert_relative_eq!(b.slope(1, 3), 0.0);
        assert!(gamma.iter().all(|&g| g == 1.0));

        let (bb, gb) = assign_betas(&q, ResponseFamily::Bernoulli).unwrap();
        // anchor row (single 1) -> slope 2.0, intercept 1
        assert_relative_eq!(bb.intercept(5), 1.0);
        assert_relative_eq!(bb.slope(5, 0), 2.0);
        assert!(gb.iter().all(|&g| g == 0.0));

        assert!(crate::model::check_monotone_sums(&b).iter().all(|&x| x));
        assert!(crate::model::check_monotone_sums(&bb).iter().all(|&x| x));

        let zero_row = QMatrix::new(1, 3, vec![0, 0, 0]).unwrap();
        assert!(assign_betas(&zero_row, ResponseFamily::Gaussian).is_err());
    }

    #[test]
    fn latent_sampling_matches_dense_law() {
        let dag = benchmark_dag("model-5").unwrap();
        let mut rng = stream(99);
        let law = sample_cpts(&dag, &mut rng).unwrap();
        let dense = densify(&law, 20).unwrap();
        let n = 100_000usize;
        let z = sample_latents(&law, n, &mut rng).unwrap();
        let mut counts = vec![0usize; dense.len()];
        for i in 0..n {
            counts[state_index(z.row(i))] += 1;
        }
        for (s, &p) in dense.iter().enumerate() {
            let freq = counts[s] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma.max(1e-4),
                "state {s}: freq {freq} vs p {p}"
            );
        }
        // determinism and the empty case
        let mut r1 = stream(5);
        let mut r2 = stream(5);
        assert_eq!(
            sample_latents(&law, 50, &mut r1).unwrap(),
            sample_latents(&law, 50, &mut r2).unwrap()
        );
        assert_eq!(sample_latents(&law, 0, &mut r1).unwrap().n(), 0);
    }

    #[test]
    fn observed_moments_match_families() {
        let n = 100_000usize;
        let z = LatentMatrix::zeros(n, 1);
        let mut rng = stream(2024);

        let gauss = ModelParams {
            law: LatentLaw::Dense { k: 1, probs: vec![0.5, 0.5] },
            b: CoefMatrix::new(1, vec![vec![0.3, 0.0]]).unwrap(),
            gamma: vec![1.0],
            families: vec![ResponseFamily::Gaussian],
        };
        let x = sample_observed(&z, &gauss, &mut rng).unwrap();
        let mean = x.values().iter().sum::<f64>() / n as f64;
        let var = x.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.3).abs() < 0.02);
        assert!((var - 1.0).abs() < 0.03);

        let bern = ModelParams {
            law: gauss.law.clone(),
            b: CoefMatrix::new(1, vec![vec![0.0, 0.0]]).unwrap(),
            gamma: vec![0.0],
            families: vec![ResponseFamily::Bernoulli],
        };
        let x = sample_observed(&z, &bern, &mut rng).unwrap();
        let mean = x.values().iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);

        let pois = ModelParams {
            law: gauss.law.clone(),
            b: CoefMatrix::new(1, vec![vec![2.0f64.ln(), 0.0]]).unwrap(),
            gamma: vec![0.0],
            families: vec![ResponseFamily::Poisson],
        };
        let x = sample_observed(&z, &pois, &mut rng).unwrap();
        let mean = x.values().iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.03);

        let logn = ModelParams {
            law: gauss.law.clone(),
            b: CoefMatrix::new(1, vec![vec![0.5, 0.0]]).unwrap(),
            gamma: vec![1.0],
            families: vec![ResponseFamily::Lognormal],
        };
        let x = sample_observed(&z, &logn, &mut rng).unwrap();
        let mean_log = x.values().iter().map(|v| v.ln()).sum::<f64>() / n as f64;
        assert!((mean_log - 0.5).abs() < 0.02);
    }

    #[test]
    fn designs_pass_ident_conditions() {
        use crate::identcheck::{generic_block_condition, strict_condition, subset_condition};
        for k in [3usize, 5, 10, 13] {
            for kind in [QKind::Q1, QKind::Q2] {
                let q = build_q(kind, k).unwrap();
                assert!(strict_condition(&q).holds, "strict {kind:?} k={k}");
                assert!(generic_block_condition(&q).holds, "generic {kind:?} k={k}");
                assert!(subset_condition(&q).holds, "subset {kind:?} k={k}");
            }
        }
    }
}
