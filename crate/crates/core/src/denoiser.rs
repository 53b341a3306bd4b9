//! Server-side Bayesian denoising.
//!
//! The noisy degrees give a β-model prior for every pair, the two randomized bits
//! `(Ã_ij, Ã_ji)` give the evidence, and Bayes' rule combines them into the posterior
//! probability that the link exists.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::dataset::write_f64s;
use crate::error::{Error, Result};
use crate::graph::{Adjacency, DegreeSequence};
use crate::numeric::{logistic, softplus};
use crate::randomizer::{flip_probability, MessageBatch, PrivacyBudget};

/// Clamps every degree into `[1, n - 2]`, the range where the β-model MLE can exist.
pub fn clip_degrees(noisy: &DegreeSequence, n: usize) -> Result<DegreeSequence> {
    if n < 4 {
        return Err(Error::invalid(format!("degree clipping needs n >= 4, got {n}")));
    }
    let hi = (n - 2) as f64;
    Ok(DegreeSequence(noisy.values().iter().map(|&d| d.clamp(1.0, hi)).collect()))
}

// Beyond this magnitude products of exp(-x) may overflow and the slow path is used.
const FAST_PATH_LIMIT: f64 = 300.0;

/// The fixed-point map of the β-model likelihood equations:
///
/// `phi(x)_i = log d_i - log sum_{j != i} 1 / (exp(-x_j) + exp(x_i))`.
///
/// Evaluated as `log d_i + x_i - log sum_{j != i} sigma(x_i + x_j)`, which is the same
/// quantity with the `exp(x_i)` factor pulled out.
pub fn phi(d: &DegreeSequence, x: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if x.len() != n {
        return Err(Error::invalid(format!("phi: {} degrees but {} coordinates", n, x.len())));
    }
    if let Some(i) = d.values().iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("phi: degree {i} is {} (must be positive)", d.values()[i])));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "phi input", index: i });
    }
    let fast = x.iter().all(|v| v.abs() <= FAST_PATH_LIMIT);
    let log_sums: Vec<f64> = if fast {
        let a: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        pair_sums(&a).into_iter().map(f64::ln).collect()
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                // log sigma(s) = -softplus(-s), accumulated as a log-sum-exp.
                let terms = (0..n).filter(|&j| j != i).map(|j| -softplus(-(x[i] + x[j])));
                let (max, terms): (f64, Vec<f64>) = {
                    let t: Vec<f64> = terms.collect();
                    (t.iter().copied().fold(f64::NEG_INFINITY, f64::max), t)
                };
                max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
            })
            .collect()
    };
    let out: Vec<f64> = (0..n).map(|i| d.values()[i].ln() + x[i] - log_sums[i]).collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "phi", index: i });
    }
    Ok(out)
}

/// `sum_{j != i} 1 / (1 + a_i a_j)` for every `i`, visiting each pair once.
fn pair_sums(a: &[f64]) -> Vec<f64> {
    const LANES: usize = 4;
    let n = a.len();
    let mut sums = vec![0.0; n];
    for i in 0..n {
        let ai = a[i];
        let (head, tail) = sums.split_at_mut(i + 1);
        let rest = &a[i + 1..];
        let mut acc = [0.0; LANES];
        let mut out = tail.chunks_exact_mut(LANES);
        let mut src = rest.chunks_exact(LANES);
        for (o, x) in (&mut out).zip(&mut src) {
            for k in 0..LANES {
                let s = 1.0 / (1.0 + ai * x[k]);
                o[k] += s;
                acc[k] += s;
            }
        }
        let mut total = acc.iter().sum::<f64>();
        for (o, &aj) in out.into_remainder().iter_mut().zip(src.remainder()) {
            let s = 1.0 / (1.0 + ai * aj);
            *o += s;
            total += s;
        }
        head[i] += total;
    }
    sums
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Stop once the L∞ step falls to this value.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iters: 5000,
        }
    }
}

/// Fitted β-model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// L∞ norm of the last step.
    pub residual: f64,
}

impl PriorModel {
    /// Link probability under the β-model; zero on the diagonal.
    pub fn prior_prob(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            logistic(self.beta[i] + self.beta[j])
        }
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn prior_matrix(&self) -> Array2<f64> {
        let n = self.n();
        Array2::from_shape_fn((n, n), |(i, j)| self.prior_prob(i, j))
    }
}

/// Maximum-likelihood β for a degree sequence by synchronized fixed-point iteration from
/// the zero vector. Degrees must lie strictly inside `(0, n-1)`; clip them first.
///
/// Running out of iterations is not an error: the last iterate comes back with
/// `converged = false`.
pub fn mle_link_probability(d: &DegreeSequence, options: &MleOptions) -> Result<PriorModel> {
    let n = d.len();
    if n < 2 {
        return Err(Error::invalid("the β-model needs at least 2 nodes"));
    }
    let upper = (n - 1) as f64;
    if let Some(i) = d.values().iter().position(|&v| !(v > 0.0 && v < upper)) {
        return Err(Error::invalid(format!(
            "degree {i} = {} outside (0, {upper}); clip the sequence first",
            d.values()[i]
        )));
    }
    let mut beta = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iteration in 1..=options.max_iters {
        let next = phi(d, &beta).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Divergence { iteration },
            other => other,
        })?;
        residual = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = next;
        if residual <= options.tolerance {
            return Ok(PriorModel {
                beta,
                converged: true,
                iterations: iteration,
                residual,
            });
        }
    }
    Ok(PriorModel {
        beta,
        converged: false,
        iterations: options.max_iters,
        residual,
    })
}

/// Log-likelihood of observing degree sequence `d` under the β-model with parameters `beta`:
/// `sum_i beta_i d_i - sum_{i<j} log(1 + exp(beta_i + beta_j))`.
pub fn log_likelihood(d: &DegreeSequence, beta: &[f64]) -> f64 {
    let linear: f64 = d.values().iter().zip(beta).map(|(d, b)| d * b).sum();
    let partition: f64 = (0..beta.len())
        .map(|i| (i + 1..beta.len()).map(|j| softplus(beta[i] + beta[j])).sum::<f64>())
        .sum();
    linear - partition
}

/// Likelihood of the received bit pair given that the link exists (`q`) and given that
/// it does not (`q'`), for flip probability `flip`.
pub fn evidence_likelihoods(bit_ij: bool, bit_ji: bool, flip: f64) -> (f64, f64) {
    let keep = 1.0 - flip;
    match (bit_ij, bit_ji) {
        (false, false) => (flip * flip, keep * keep),
        (true, true) => (keep * keep, flip * flip),
        _ => (flip * keep, flip * keep),
    }
}

pub fn evidence_likelihoods_for(bit_ij: bool, bit_ji: bool, budget: &PrivacyBudget) -> (f64, f64) {
    evidence_likelihoods(bit_ij, bit_ji, flip_probability(budget))
}

/// Bayes' rule: `q p / (q p + q' (1 - p))`.
pub fn bayes_posterior(prior: f64, q: f64, q_prime: f64) -> f64 {
    let num = q * prior;
    let den = num + q_prime * (1.0 - prior);
    if den > 0.0 {
        num / den
    } else {
        // Both terms underflowed; compare them in log space.
        logistic(q.ln() + prior.ln() - q_prime.ln() - (1.0 - prior).ln())
    }
}

/// Which components enter the posterior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Evidence is ignored (`q = q'`), so the posterior equals the prior.
    PriorOnly,
    /// The prior is flat (`p = 1/2`).
    EvidenceOnly,
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "prior_only" | "prior-only" => Ok(Self::PriorOnly),
            "evidence_only" | "evidence-only" => Ok(Self::EvidenceOnly),
            other => Err(Error::invalid(format!("unknown ablation mode `{other}`"))),
        }
    }
}

/// Symmetric matrix of posterior link probabilities with a zero diagonal.
///
/// Stored implicitly as the prior parameters plus the received bits; entries are
/// computed on demand and [`PosteriorMatrix::to_dense`] materializes the whole matrix.
#[derive(Clone, Debug)]
pub struct PosteriorMatrix {
    n: usize,
    /// `None` means a flat prior of 1/2.
    prior: Option<PriorModel>,
    evidence: BitMatrix,
    flip: f64,
    ablation: Ablation,
}

impl PosteriorMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prior(&self) -> Option<&PriorModel> {
        self.prior.as_ref()
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip
    }

    pub fn ablation(&self) -> Ablation {
        self.ablation
    }

    pub fn prior_prob(&self, i: usize, j: usize) -> f64 {
        match (&self.prior, i == j) {
            (_, true) => 0.0,
            (Some(model), false) => model.prior_prob(i, j),
            (None, false) => 0.5,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let p = self.prior_prob(i, j);
        let (q, q_prime) = match self.ablation {
            Ablation::PriorOnly => (1.0, 1.0),
            _ => evidence_likelihoods(self.evidence.get(i, j), self.evidence.get(j, i), self.flip),
        };
        bayes_posterior(p, q, q_prime)
    }

    /// Entries of row `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.get(i, j)).collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let rows: Vec<Vec<f64>> = (0..self.n).into_par_iter().map(|i| self.row(i)).collect();
        Array2::from_shape_vec((self.n, self.n), rows.concat()).expect("n x n")
    }

    /// Sum of all entries.
    pub fn l1_norm(&self) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|i| (0..self.n).map(|j| self.get(i, j)).sum::<f64>())
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// `sum_{i,j} |P_ij - A_ij|`.
    pub fn l1_distance(&self, truth: &Adjacency) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let a = if truth.has_edge(i, j) { 1.0 } else { 0.0 };
                        (self.get(i, j) - a).abs()
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// Dense little-endian `f64` dump, row-major.
    pub fn write_dense(&self, path: &Path) -> Result<()> {
        write_f64s(path, self.to_dense().iter().copied())
    }
}

/// Builds the posterior from one release of messages: clip the noisy degrees, fit the
/// β-model prior, then combine it with the randomized bits.
///
/// With `delta = 0` there are no degrees and the prior is flat.
pub fn posterior(batch: &MessageBatch, options: &MleOptions, ablation: Ablation) -> Result<PosteriorMatrix> {
    let n = batch.n();
    if n < 4 {
        return Err(Error::invalid(format!("posterior estimation needs n >= 4, got {n}")));
    }
    let prior = match (ablation, batch.noisy_degrees()) {
        (Ablation::EvidenceOnly, _) | (_, None) => None,
        (_, Some(noisy)) => {
            let clipped = clip_degrees(&noisy, n)?;
            Some(mle_link_probability(&clipped, options)?)
        }
    };
    Ok(PosteriorMatrix {
        n,
        prior,
        evidence: batch.noisy_matrix()?,
        flip: flip_probability(&batch.budget),
        ablation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_beta_model, degree_sequence};
    use crate::randomizer::perturb_graph;

    #[test]
    fn clipping() {
        let d = DegreeSequence(vec![-3.2, 0.5, 7.0, 15.0]);
        assert_eq!(clip_degrees(&d, 10).unwrap().0, vec![1.0, 1.0, 7.0, 8.0]);
        let interior = DegreeSequence(vec![1.5, 2.0, 8.0]);
        assert_eq!(clip_degrees(&interior, 10).unwrap(), interior);
        assert!(clip_degrees(&d, 3).is_err());
    }

    #[test]
    fn phi_fixed_point_for_regular_sequences() {
        for n in [5usize, 9, 40] {
            let d = DegreeSequence(vec![(n - 1) as f64 / 2.0; n]);
            let out = phi(&d, &vec![0.0; n]).unwrap();
            assert!(out.iter().all(|v| v.abs() < 1e-14), "{out:?}");
        }
        let d = DegreeSequence(vec![2.0; 5]);
        assert!(phi(&d, &[0.0; 5]).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    /// The map written exactly as in its definition, for moderate inputs.
    fn phi_direct(d: &[f64], x: &[f64]) -> Vec<f64> {
        (0..d.len())
            .map(|i| {
                let s: f64 = (0..d.len())
                    .filter(|&j| j != i)
                    .map(|j| 1.0 / ((-x[j]).exp() + x[i].exp()))
                    .sum();
                d[i].ln() - s.ln()
            })
            .collect()
    }

    #[test]
    fn phi_matches_definition() {
        let d = [1.0, 2.5, 3.0, 0.7, 4.2, 2.0];
        let x = [0.3, -1.2, 0.8, -2.0, 1.5, 0.0];
        let fast = phi(&DegreeSequence(d.to_vec()), &x).unwrap();
        for (a, b) in fast.iter().zip(phi_direct(&d, &x)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn phi_slow_path_agrees_and_survives_large_inputs() {
        let d = DegreeSequence(vec![1.0, 2.0, 3.0, 1.5]);
        // Shift one coordinate far out; compare the slow path with the fast path on a
        // point that is just inside the limit.
        let x = [250.0, -1.0, 0.5, 0.0];
        let fast = phi(&d, &x).unwrap();
        let x_far = [400.0, -1.0, 0.5, 0.0];
        let slow = phi(&d, &x_far).unwrap();
        // phi_i ~ log d_i - log((n-1) e^{-x_i}) when x_i dominates.
        let asym = 1f64.ln() - (3.0f64).ln() + 400.0;
        assert!((slow[0] - asym).abs() < 1e-6);
        assert!(fast.iter().chain(&slow).all(|v| v.is_finite()));
        let x_huge = [1e5, -1e5, 0.0, 3.0];
        assert!(phi(&d, &x_huge).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn phi_rejects_bad_input() {
        let d = DegreeSequence(vec![1.0, 0.0, 2.0]);
        assert!(phi(&d, &[0.0; 3]).is_err());
        let d = DegreeSequence(vec![1.0, 1.0, 2.0]);
        assert!(matches!(
            phi(&d, &[0.0, f64::NAN, 0.0]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(phi(&d, &[0.0; 2]).is_err());
    }

    #[test]
    fn mle_on_symmetric_sequence() {
        let d = DegreeSequence(vec![2.0; 5]);
        let model = mle_link_probability(&d, &MleOptions::default()).unwrap();
        assert!(model.converged);
        assert!(model.beta.iter().all(|b| b.abs() < 1e-12));
        assert!((model.prior_prob(0, 3) - 0.5).abs() < 1e-12);
        assert_eq!(model.prior_prob(2, 2), 0.0);
    }

    #[test]
    fn mle_regular_recovers_uniform_probability() {
        let n = 30;
        let k = 4.0;
        let d = DegreeSequence(vec![k; n]);
        let model = mle_link_probability(&d, &MleOptions::default()).unwrap();
        assert!(model.converged);
        for j in 1..n {
            assert!((model.prior_prob(0, j) - k / (n - 1) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn mle_converged_iterate_is_a_fixed_point() {
        let d = DegreeSequence(vec![1.0, 2.0, 3.5, 2.2, 4.0, 1.3, 2.7, 5.0]);
        let opts = MleOptions::default();
        let model = mle_link_probability(&d, &opts).unwrap();
        assert!(model.converged);
        let next = phi(&d, &model.beta).unwrap();
        let step = next.iter().zip(&model.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(step <= opts.tolerance);
        // Fixed point <=> expected degrees match.
        for i in 0..d.len() {
            let expected: f64 = (0..d.len()).map(|j| model.prior_prob(i, j)).sum();
            assert!((expected - d.values()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn mle_reports_non_convergence_softly() {
        let d = DegreeSequence(vec![1.0, 2.0, 3.5, 2.2, 4.0, 1.3, 2.7, 5.0]);
        let model = mle_link_probability(&d, &MleOptions { tolerance: 1e-30, max_iters: 3 }).unwrap();
        assert!(!model.converged);
        assert_eq!(model.iterations, 3);
        assert!(model.residual > 0.0);
    }

    #[test]
    fn mle_requires_interior_degrees() {
        assert!(mle_link_probability(&DegreeSequence(vec![0.0, 1.0, 1.0, 1.0]), &MleOptions::default()).is_err());
        assert!(mle_link_probability(&DegreeSequence(vec![3.0, 1.0, 1.0, 1.0]), &MleOptions::default()).is_err());
    }

    #[test]
    fn log_likelihood_at_zero() {
        let d = DegreeSequence(vec![3.0, 1.0, 0.0, 2.0, 2.0]);
        let ll = log_likelihood(&d, &[0.0; 5]);
        assert!((ll + 10.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_single_pair() {
        let d = DegreeSequence(vec![1.0, 1.0]);
        let mut last = f64::NEG_INFINITY;
        for t in [-1.0, 0.0, 1.0, 3.0, 10.0] {
            let ll = log_likelihood(&d, &[t, t]);
            assert!((ll - (2.0 * t - (1.0 + (2.0 * t).exp()).ln())).abs() < 1e-12);
            assert!(ll > last);
            last = ll;
        }
    }

    #[test]
    fn mle_maximizes_log_likelihood() {
        let d = DegreeSequence(vec![1.0, 2.0, 3.5, 2.2, 4.0, 1.3, 2.7, 5.0]);
        let model = mle_link_probability(&d, &MleOptions::default()).unwrap();
        let best = log_likelihood(&d, &model.beta);
        for k in 0..d.len() {
            for h in [-0.05, 0.05] {
                let mut b = model.beta.clone();
                b[k] += h;
                assert!(log_likelihood(&d, &b) <= best);
            }
        }
    }

    #[test]
    fn evidence_table() {
        let (q, qp) = evidence_likelihoods(true, true, 0.25);
        assert!((q - 9.0 / 16.0).abs() < 1e-15 && (qp - 1.0 / 16.0).abs() < 1e-15);
        let (q, qp) = evidence_likelihoods(false, false, 0.25);
        assert!((q - 1.0 / 16.0).abs() < 1e-15 && (qp - 9.0 / 16.0).abs() < 1e-15);
        for f in [0.01, 0.2, 0.45] {
            let (a, b) = evidence_likelihoods(false, true, f);
            assert_eq!(a, b);
            let (a, b) = evidence_likelihoods(true, false, f);
            assert_eq!(a, b);
        }
        for bits in [(false, false), (false, true), (true, false), (true, true)] {
            let (q, qp) = evidence_likelihoods(bits.0, bits.1, 0.5);
            assert_eq!(q, qp);
        }
        let b = PrivacyBudget::new(3f64.ln() / 0.5, 0.5).unwrap();
        let (q, _) = evidence_likelihoods_for(true, true, &b);
        assert!((q - 9.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn bayes_examples() {
        let p = bayes_posterior(0.01, 0.5625, 0.0625);
        assert!((p - 0.0056250 / (0.0056250 + 0.0625 * 0.99)).abs() < 1e-15);
        assert!((p - 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(bayes_posterior(0.3, 0.2, 0.2), 0.3);
        // Underflowed evidence still yields an ordered answer.
        assert_eq!(bayes_posterior(1e-200, 1e-200, 0.0), 1.0);
    }

    #[test]
    fn posterior_is_symmetric_with_zero_diagonal() {
        let beta: Vec<f64> = (0..40).map(|i| -2.0 + (i % 5) as f64 * 0.3).collect();
        let adj = sample_beta_model(&beta, 2).unwrap();
        let batch = perturb_graph(&adj, &PrivacyBudget::new(2.0, 0.4).unwrap(), 3);
        for ablation in [Ablation::Full, Ablation::PriorOnly, Ablation::EvidenceOnly] {
            let post = posterior(&batch, &MleOptions::default(), ablation).unwrap();
            let dense = post.to_dense();
            for i in 0..40 {
                assert_eq!(dense[[i, i]], 0.0);
                for j in 0..40 {
                    assert_eq!(dense[[i, j]], dense[[j, i]]);
                    assert!((0.0..=1.0).contains(&dense[[i, j]]));
                }
            }
        }
    }

    #[test]
    fn ablation_modes() {
        let adj = sample_beta_model(&[-1.5; 30], 4).unwrap();
        let batch = perturb_graph(&adj, &PrivacyBudget::new(3.0, 0.5).unwrap(), 5);
        let opts = MleOptions::default();
        let prior_only = posterior(&batch, &opts, Ablation::PriorOnly).unwrap();
        let model = prior_only.prior().unwrap();
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(prior_only.get(i, j), model.prior_prob(i, j));
            }
        }
        let evidence_only = posterior(&batch, &opts, Ablation::EvidenceOnly).unwrap();
        assert!(evidence_only.prior().is_none());
        let f = evidence_only.flip_probability();
        let ones = (1.0 - f).powi(2) / ((1.0 - f).powi(2) + f * f);
        let m = batch.noisy_matrix().unwrap();
        for i in 0..30 {
            for j in 0..30 {
                if i != j && m.get(i, j) && m.get(j, i) {
                    assert!((evidence_only.get(i, j) - ones).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn no_degree_channel_means_flat_prior() {
        let adj = sample_beta_model(&[-1.0; 12], 4).unwrap();
        let batch = perturb_graph(&adj, &PrivacyBudget::new(2.0, 0.0).unwrap(), 5);
        let post = posterior(&batch, &MleOptions::default(), Ablation::Full).unwrap();
        assert!(post.prior().is_none());
        assert_eq!(post.prior_prob(0, 1), 0.5);
    }

    #[test]
    fn large_budget_recovers_truth() {
        let beta: Vec<f64> = (0..60).map(|i| -2.5 + (i % 7) as f64 * 0.2).collect();
        let adj = sample_beta_model(&beta, 8).unwrap();
        let batch = perturb_graph(&adj, &PrivacyBudget::new(64.0, 0.1).unwrap(), 1);
        let post = posterior(&batch, &MleOptions::default(), Ablation::Full).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                let a = if adj.has_edge(i, j) { 1.0 } else { 0.0 };
                assert_eq!(post.get(i, j).round(), a);
            }
        }
        assert!(post.l1_distance(&adj) < 1e-6);
        let _ = degree_sequence(&adj);
    }

    #[test]
    fn l1_norm_matches_dense_sum() {
        let adj = sample_beta_model(&[-1.0; 25], 1).unwrap();
        let batch = perturb_graph(&adj, &PrivacyBudget::new(1.5, 0.5).unwrap(), 2);
        let post = posterior(&batch, &MleOptions::default(), Ablation::Full).unwrap();
        assert!((post.l1_norm() - post.to_dense().sum()).abs() < 1e-9);
    }
}
