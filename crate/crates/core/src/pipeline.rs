//! The three-stage pipeline (estimate, resample, discover), latent-label
//! alignment against a ground truth, and the replicate benchmark harness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ges::{ges, BdeuConfig, ScoreKind};
use crate::graphs::{
    composite_graph, dag_to_cpdag, shd_composite, Cpdag, LatentDag,
};
use crate::model::{densify, DataMatrix, LatentMatrix, ModelParams, QMatrix, DENSE_CAP};
use crate::rng::{derive, stream, Stream};
use crate::saem::{align_permutation, fit, FitDiagnostics, SaemConfig};
use crate::synth::{simulate, QKind, SimDesign, Truth};

/// Resample-size rule for Stage II.
///
/// Consistency needs a strictly increasing rule with `f(N) = o(N log N)`;
/// validation checks `f(N)/(N log N)` is non-increasing over the declared
/// range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SamplingRule {
    /// `f(N) = N`.
    Identity,
    /// `f(N) = c N`.
    Multiple(f64),
    /// Explicit `(N, f(N))` pairs.
    Table(Vec<(usize, usize)>),
}

impl SamplingRule {
    pub fn size(&self, n: usize) -> Result<usize> {
        match self {
            SamplingRule::Identity => Ok(n),
            SamplingRule::Multiple(c) => Ok((c * n as f64).round() as usize),
            SamplingRule::Table(t) => t
                .iter()
                .find(|(nn, _)| *nn == n)
                .map(|(_, f)| *f)
                .ok_or_else(|| Error::InvalidInput(format!("no table entry for N={n}"))),
        }
    }

    /// Check the rule over `[n_lo, n_hi]`.
    pub fn validate(&self, n_lo: usize, n_hi: usize) -> Result<()> {
        let ratio = |n: usize, f: usize| f as f64 / (n as f64 * (n as f64).ln());
        match self {
            SamplingRule::Identity => Ok(()),
            SamplingRule::Multiple(c) => {
                if *c <= 0.0 {
                    return Err(Error::InvalidInput(format!("multiple {c} must be positive")));
                }
                Ok(())
            }
            SamplingRule::Table(t) => {
                if t.is_empty() {
                    return Err(Error::InvalidInput("empty sampling table".into()));
                }
                for w in t.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                        return Err(Error::InvalidInput(
                            "sampling table must be strictly increasing".into(),
                        ));
                    }
                }
                let in_range: Vec<&(usize, usize)> = t
                    .iter()
                    .filter(|(n, _)| *n >= n_lo && *n <= n_hi && *n >= 2)
                    .collect();
                for w in in_range.windows(2) {
                    if ratio(w[1].0, w[1].1) > ratio(w[0].0, w[0].1) + 1e-12 {
                        return Err(Error::InvalidInput(format!(
                            "f(N)/(N log N) increases between N={} and N={}",
                            w[0].0, w[1].0
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Draw `m` i.i.d. configurations from a dense law by inverse CDF over the
/// fixed state order.
pub fn resample_latents(p: &[f64], m: usize, rng: &mut Stream) -> LatentMatrix {
    let states = p.len();
    let k = states.trailing_zeros() as usize;
    let mut cdf = Vec::with_capacity(states);
    let mut acc = 0.0;
    for &v in p {
        acc += v;
        cdf.push(acc);
    }
    let mut z = LatentMatrix::zeros(m, k);
    for i in 0..m {
        let u: f64 = rng.random::<f64>() * acc;
        let s = cdf.partition_point(|&c| c < u).min(states - 1);
        for t in 0..k {
            z.set(i, t, ((s >> (k - 1 - t)) & 1) as u8);
        }
    }
    z
}

/// Pipeline configuration: Stage-I estimator settings, the Stage-II rule,
/// and the Stage-III score.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub saem: SaemConfig,
    pub rule: SamplingRule,
    pub score: ScoreKind,
    pub bdeu: BdeuConfig,
}

impl PipelineConfig {
    pub fn new(k: usize) -> Self {
        Self {
            saem: SaemConfig::new(k),
            rule: SamplingRule::Identity,
            score: ScoreKind::Bdeu,
            bdeu: BdeuConfig::default(),
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageTimings {
    pub fit: f64,
    pub resample: f64,
    pub discover: f64,
}

/// Output of one pipeline run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub params: ModelParams,
    pub q_hat: QMatrix,
    pub g_hat: Cpdag,
    pub diagnostics: FitDiagnostics,
    pub timings: StageTimings,
    pub seed: u64,
}

/// Truth-referenced evaluation of a run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    /// Structural Hamming distance on the aligned composite graph.
    pub shd: usize,
    /// Entrywise Hamming distance of the aligned measurement matrix.
    pub q_hamming: usize,
    pub q_exact_match: bool,
    /// Aligned sup-norm error over latent law, coefficients, dispersions.
    pub param_err_inf: f64,
    pub perm: Vec<usize>,
}

/// Run all three stages on a data matrix.
pub fn run_pipeline(
    x: &DataMatrix,
    k: usize,
    families: &[crate::model::ResponseFamily],
    config: &PipelineConfig,
) -> Result<RunResult> {
    config.rule.validate(x.n(), x.n())?;
    let seed = config.saem.seed;

    let t0 = std::time::Instant::now();
    let (params, q_hat, diagnostics) = fit(x, k, families, &config.saem)?;
    let fit_s = t0.elapsed().as_secs_f64();

    let t1 = std::time::Instant::now();
    let m = config.rule.size(x.n())?;
    let dense = densify(&params.law, DENSE_CAP)?;
    let mut rng = stream(derive(seed, 0x5a17));
    let z_hat = resample_latents(&dense, m, &mut rng);
    let resample_s = t1.elapsed().as_secs_f64();

    let t2 = std::time::Instant::now();
    let g_hat = ges(&z_hat, config.score, &config.bdeu)?;
    let discover_s = t2.elapsed().as_secs_f64();

    Ok(RunResult {
        params,
        q_hat,
        g_hat,
        diagnostics,
        timings: StageTimings { fit: fit_s, resample: resample_s, discover: discover_s },
        seed,
    })
}

/// Align a run against the generating truth and compute recovery metrics.
///
/// The latent part of the estimate is a CPDAG, so the truth DAG is
/// converted to its CPDAG before the composite comparison.
pub fn evaluate(
    result: &RunResult,
    truth_dag: &LatentDag,
    truth_q: &QMatrix,
    truth_params: &ModelParams,
) -> Result<EvalMetrics> {
    let k = truth_dag.k();
    if result.params.k() != k {
        return Err(Error::InvalidInput(format!(
            "estimate has K={} but truth has K={k}",
            result.params.k()
        )));
    }
    let aligned = align_permutation(&result.params, &result.q_hat, truth_q)?;
    // estimate node perm[t] becomes node t
    let mut new_of_old = vec![0usize; k];
    for (t, &e) in aligned.perm.iter().enumerate() {
        new_of_old[e] = t;
    }
    let g_aligned = result.g_hat.relabel(&new_of_old);

    let est_comp = composite_graph(&g_aligned, &aligned.q)?;
    let truth_comp = composite_graph(&dag_to_cpdag(truth_dag), truth_q)?;
    let shd = shd_composite(&est_comp, &truth_comp)?;
    let q_hamming = aligned.q.hamming(truth_q);

    let mut err = 0.0f64;
    let dense_a = densify(&aligned.params.law, DENSE_CAP)?;
    let dense_t = densify(&truth_params.law, DENSE_CAP)?;
    for (a, t) in dense_a.iter().zip(&dense_t) {
        err = err.max((a - t).abs());
    }
    for j in 0..truth_params.n_items() {
        for (a, t) in aligned.params.b.row(j).iter().zip(truth_params.b.row(j)) {
            err = err.max((a - t).abs());
        }
        err = err.max((aligned.params.gamma[j] - truth_params.gamma[j]).abs());
    }

    Ok(EvalMetrics {
        shd,
        q_hamming,
        q_exact_match: q_hamming == 0,
        param_err_inf: err,
        perm: aligned.perm,
    })
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

/// Grid of benchmark cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchGrid {
    pub dags: Vec<String>,
    pub qs: Vec<QKind>,
    pub families: Vec<crate::model::ResponseFamily>,
    pub ns: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

/// One replicate's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dag: String,
    pub q: String,
    pub family: String,
    pub n: usize,
    pub replicate: usize,
    pub shd: Option<usize>,
    pub q_match: Option<bool>,
    pub seconds: f64,
    pub error: Option<String>,
}

/// Per-cell aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCellSummary {
    pub dag: String,
    pub q: String,
    pub family: String,
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    pub mean_shd: f64,
    pub q_match_rate: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchCellSummary>,
}

fn run_replicate(
    dag_name: &str,
    q_kind: QKind,
    family: crate::model::ResponseFamily,
    n: usize,
    rep_seed: u64,
    base: &PipelineConfig,
) -> Result<(usize, bool, Truth)> {
    let design = SimDesign {
        dag_name: dag_name.to_string(),
        q_kind,
        family,
        n,
        seed: derive(rep_seed, 1),
    };
    let (truth, _z, x) = simulate(&design)?;
    let mut config = base.clone();
    config.saem.k = truth.dag.k();
    config.saem.seed = derive(rep_seed, 2);
    let result = run_pipeline(&x, truth.dag.k(), &truth.params.families, &config)?;
    let metrics = evaluate(&result, &truth.dag, &truth.q, &truth.params)?;
    Ok((metrics.shd, metrics.q_exact_match, truth))
}

/// Run the full grid, one task per `(cell, replicate)`, on a bounded rayon
/// pool (`threads = 0` uses the default). Per-replicate failures are
/// recorded and excluded from cell means.
pub fn bench(grid: &BenchGrid, base: &PipelineConfig, threads: usize) -> Result<BenchReport> {
    let mut tasks = Vec::new();
    for dag in &grid.dags {
        for &q in &grid.qs {
            for &family in &grid.families {
                for &n in &grid.ns {
                    for rep in 0..grid.replicates {
                        tasks.push((dag.clone(), q, family, n, rep));
                    }
                }
            }
        }
    }
    let run_all = |tasks: &[(String, QKind, crate::model::ResponseFamily, usize, usize)]| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(idx, (dag, q, family, n, rep))| {
                let start = std::time::Instant::now();
                let rep_seed = derive(grid.seed, idx as u64);
                let outcome = run_replicate(dag, *q, *family, *n, rep_seed, base);
                let seconds = start.elapsed().as_secs_f64();
                match outcome {
                    Ok((shd, q_match, _)) => BenchRow {
                        dag: dag.clone(),
                        q: q.name().to_string(),
                        family: family.name().to_string(),
                        n: *n,
                        replicate: *rep,
                        shd: Some(shd),
                        q_match: Some(q_match),
                        seconds,
                        error: None,
                    },
                    Err(e) => BenchRow {
                        dag: dag.clone(),
                        q: q.name().to_string(),
                        family: family.name().to_string(),
                        n: *n,
                        replicate: *rep,
                        shd: None,
                        q_match: None,
                        seconds,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect::<Vec<BenchRow>>()
    };
    let rows: Vec<BenchRow> = if threads == 0 {
        run_all(&tasks)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        pool.install(|| run_all(&tasks))
    };

    let mut summary = Vec::new();
    for dag in &grid.dags {
        for &q in &grid.qs {
            for &family in &grid.families {
                for &n in &grid.ns {
                    let cell: Vec<&BenchRow> = rows
                        .iter()
                        .filter(|r| {
                            r.dag == *dag
                                && r.q == q.name()
                                && r.family == family.name()
                                && r.n == n
                        })
                        .collect();
                    let ok: Vec<&&BenchRow> =
                        cell.iter().filter(|r| r.shd.is_some()).collect();
                    let failures = cell.len() - ok.len();
                    let mean_shd = if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().map(|r| r.shd.unwrap() as f64).sum::<f64>() / ok.len() as f64
                    };
                    let q_match_rate = if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().filter(|r| r.q_match == Some(true)).count() as f64
                            / ok.len() as f64
                    };
                    let mean_seconds =
                        cell.iter().map(|r| r.seconds).sum::<f64>() / cell.len().max(1) as f64;
                    summary.push(BenchCellSummary {
                        dag: dag.clone(),
                        q: q.name().to_string(),
                        family: family.name().to_string(),
                        n,
                        replicates: cell.len(),
                        failures,
                        mean_shd,
                        q_match_rate,
                        mean_seconds,
                    });
                }
            }
        }
    }
    Ok(BenchReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{state_index, ResponseFamily};
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn sampling_rule_sizes_and_validation() {
        assert_eq!(SamplingRule::Identity.size(500).unwrap(), 500);
        assert_eq!(SamplingRule::Multiple(3.0).size(500).unwrap(), 1500);
        SamplingRule::Identity.validate(100, 10_000).unwrap();
        SamplingRule::Multiple(3.0).validate(100, 10_000).unwrap();
        assert!(SamplingRule::Multiple(-1.0).validate(100, 1000).is_err());
        // quadratic growth is rejected
        let quad = SamplingRule::Table(vec![
            (100, 10_000),
            (1_000, 1_000_000),
            (10_000, 100_000_000),
        ]);
        assert!(quad.validate(100, 10_000).is_err());
        // linear table passes
        let lin = SamplingRule::Table(vec![(100, 200), (1_000, 2_000), (10_000, 20_000)]);
        lin.validate(100, 10_000).unwrap();
        assert_eq!(lin.size(1_000).unwrap(), 2_000);
        assert!(lin.size(555).is_err());
    }

    #[test]
    fn resample_matches_law() {
        let p = vec![0.1, 0.4, 0.3, 0.2];
        let mut rng = stream(8);
        let m = 1_000_000usize;
        let z = resample_latents(&p, m, &mut rng);
        let mut counts = vec![0usize; 4];
        for i in 0..m {
            counts[state_index(z.row(i))] += 1;
        }
        for (s, &prob) in p.iter().enumerate() {
            let freq = counts[s] as f64 / m as f64;
            let sigma = (prob * (1.0 - prob) / m as f64).sqrt();
            assert!((freq - prob).abs() < 3.0 * sigma + 1e-6, "state {s}: {freq} vs {prob}");
        }
        // degenerate law gives a constant matrix
        let degenerate = vec![0.0, 0.0, 1.0, 0.0];
        let z = resample_latents(&degenerate, 50, &mut rng);
        for i in 0..50 {
            assert_eq!(state_index(z.row(i)), 2);
        }
    }

    #[test]
    fn evaluate_identity_is_zero() {
        use crate::synth::{build_q, make_truth, SimDesign};
        let design = SimDesign {
            dag_name: "model-5".into(),
            q_kind: QKind::Q1,
            family: ResponseFamily::Gaussian,
            n: 10,
            seed: 4,
        };
        let mut rng = stream(4);
        let truth = make_truth(&design, &mut rng).unwrap();
        let dense = densify(&truth.params.law, DENSE_CAP).unwrap();
        let fake = RunResult {
            params: ModelParams {
                law: crate::model::LatentLaw::Dense { k: 5, probs: dense },
                b: truth.params.b.clone(),
                gamma: truth.params.gamma.clone(),
                families: truth.params.families.clone(),
            },
            q_hat: truth.q.clone(),
            g_hat: dag_to_cpdag(&truth.dag),
            diagnostics: FitDiagnostics {
                iterations: 0,
                converged: true,
                delta_trace: vec![],
                objective_trace: vec![],
                warnings: vec![],
                seconds: 0.0,
            },
            timings: StageTimings { fit: 0.0, resample: 0.0, discover: 0.0 },
            seed: 0,
        };
        let m = evaluate(&fake, &truth.dag, &truth.q, &truth.params).unwrap();
        assert_eq!(m.shd, 0);
        assert!(m.q_exact_match);
        assert!(m.param_err_inf < 1e-12);
        let _ = build_q(QKind::Q1, 5).unwrap();
    }

    #[test]
    fn evaluate_permuted_truth_is_zero() {
        // estimate = truth with latent labels scrambled: alignment undoes it
        use crate::synth::make_truth;
        let design = SimDesign {
            dag_name: "model-5".into(),
            q_kind: QKind::Q1,
            family: ResponseFamily::Gaussian,
            n: 10,
            seed: 11,
        };
        let mut rng = stream(11);
        let truth = make_truth(&design, &mut rng).unwrap();
        let k = truth.dag.k();
        let scramble = [3usize, 0, 4, 1, 2]; // new col t = old col scramble[t]
        let dense_t = densify(&truth.params.law, DENSE_CAP).unwrap();
        let mut probs = vec![0.0; 1 << k];
        for (s, slot) in probs.iter_mut().enumerate() {
            let mut src = 0usize;
            for t in 0..k {
                if (s >> (k - 1 - t)) & 1 == 1 {
                    src |= 1 << (k - 1 - scramble[t]);
                }
            }
            *slot = dense_t[src];
        }
        // relabel the truth DAG's CPDAG: old node scramble[t] -> t
        let mut new_of_old = vec![0usize; k];
        for (t, &e) in scramble.iter().enumerate() {
            new_of_old[e] = t;
        }
        let fake = RunResult {
            params: ModelParams {
                law: crate::model::LatentLaw::Dense { k, probs },
                b: truth.params.b.permute_columns(&scramble),
                gamma: truth.params.gamma.clone(),
                families: truth.params.families.clone(),
            },
            q_hat: truth.q.permute_columns(&scramble),
            g_hat: dag_to_cpdag(&truth.dag).relabel(&new_of_old),
            diagnostics: FitDiagnostics {
                iterations: 0,
                converged: true,
                delta_trace: vec![],
                objective_trace: vec![],
                warnings: vec![],
                seconds: 0.0,
            },
            timings: StageTimings { fit: 0.0, resample: 0.0, discover: 0.0 },
            seed: 0,
        };
        let m = evaluate(&fake, &truth.dag, &truth.q, &truth.params).unwrap();
        assert_eq!(m.shd, 0, "perm {:?}", m.perm);
        assert!(m.q_exact_match);
        assert!(m.param_err_inf < 1e-12);
    }

    #[test]
    fn pipeline_end_to_end_small() {
        // Gaussian K=3 banded design end to end, fixed seed; the run is
        // deterministic and recovers the chain MEC.
        use crate::synth::{assign_betas, build_q, sample_latents, sample_observed};
        let q_true = build_q(QKind::Q1, 3).unwrap();
        let (b, gamma) = assign_betas(&q_true, ResponseFamily::Gaussian).unwrap();
        let law_dag = LatentDag::new(3, [(0, 1), (1, 2)]).unwrap();
        let mut rng = stream(21);
        let law = crate::synth::sample_cpts(&law_dag, &mut rng).unwrap();
        let truth = ModelParams {
            law,
            b,
            gamma,
            families: vec![ResponseFamily::Gaussian; 9],
        };
        let z = sample_latents(&truth.law, 4000, &mut rng).unwrap();
        let x = sample_observed(&z, &truth, &mut rng).unwrap();
        let mut config = PipelineConfig::new(3);
        config.saem.seed = 33;
        config.saem.max_iter = 300;
        let r1 = run_pipeline(&x, 3, &truth.families, &config).unwrap();
        let r2 = run_pipeline(&x, 3, &truth.families, &config).unwrap();
        assert_eq!(r1.q_hat, r2.q_hat);
        assert_eq!(r1.g_hat, r2.g_hat);
        let metrics = evaluate(&r1, &law_dag, &q_true, &truth).unwrap();
        assert!(metrics.shd <= 1, "shd {}", metrics.shd);
    }

    #[test]
    fn bench_smoke() {
        let grid = BenchGrid {
            dags: vec!["model-5".into()],
            qs: vec![QKind::Q1],
            families: vec![ResponseFamily::Gaussian],
            ns: vec![800],
            replicates: 2,
            seed: 5,
        };
        let mut base = PipelineConfig::new(5);
        base.saem.max_iter = 150;
        let report = bench(&grid, &base, 2).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.summary.len(), 1);
        assert_eq!(report.summary[0].failures, 0);
        assert!(report.summary[0].mean_shd.is_finite());
    }

    #[test]
    fn resample_determinism() {
        let p = vec![0.25; 4];
        let mut r1 = stream(3);
        let mut r2 = stream(3);
        assert_eq!(resample_latents(&p, 100, &mut r1), resample_latents(&p, 100, &mut r2));
    }

    #[test]
    fn inverse_cdf_edges() {
        // probabilities summing slightly under one still land in range
        let p = vec![0.5, 0.49999999];
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-6);
        let mut rng = stream(1);
        let z = resample_latents(&p, 1000, &mut rng);
        for i in 0..1000 {
            assert!(state_index(z.row(i)) < 2);
        }
    }
}
