//! Hardness-unbiased query workloads.
//!
//! Candidates are drawn from a diagonal Gaussian mixture fitted to the base
//! vectors, scored by Steiner-hardness, and then picked evenly from
//! equal-length segments of the hardness range.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::VectorSet;
use crate::error::{invalid, Error, Result};
use crate::graphs::DirectedGraph;
use crate::hardness::{compute_hardness, HardnessParams, Measures};

pub const DEFAULT_COMPONENTS: usize = 16;
pub const DEFAULT_TRIM: (f64, f64) = (0.01, 0.99);
pub const DEFAULT_OVERSAMPLE: usize = 10;
const VARIANCE_FLOOR: f64 = 1e-6;
const CHUNK: usize = 1024;

/// Gaussian mixture with diagonal covariances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Per-component `ln w_j + ln N(x | mu_j, diag var_j)`.
    fn component_log_densities(&self, x: &[f32], out: &mut [f64]) {
        let d = x.len() as f64;
        let c = -0.5 * d * (2.0 * std::f64::consts::PI).ln();
        for (j, o) in out.iter_mut().enumerate() {
            let (mu, var) = (&self.means[j], &self.variances[j]);
            let mut quad = 0.0;
            let mut logdet = 0.0;
            for t in 0..x.len() {
                let diff = x[t] as f64 - mu[t];
                quad += diff * diff / var[t];
                logdet += var[t].ln();
            }
            *o = self.weights[j].ln() + c - 0.5 * (logdet + quad);
        }
    }

    /// Mean log-likelihood per vector.
    pub fn mean_log_likelihood(&self, data: &VectorSet) -> f64 {
        let n = data.count();
        if n == 0 {
            return 0.0;
        }
        let partial: Vec<f64> = (0..n)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut buf = vec![0.0; self.n_components()];
                chunk
                    .iter()
                    .map(|&i| {
                        self.component_log_densities(data.get(i), &mut buf);
                        log_sum_exp(&buf)
                    })
                    .sum::<f64>()
            })
            .collect();
        partial.iter().sum::<f64>() / n as f64
    }

    /// Smallest diagonal Mahalanobis distance from `x` to any component mean.
    pub fn mahalanobis(&self, x: &[f32]) -> f64 {
        (0..self.n_components())
            .map(|j| {
                x.iter()
                    .zip(&self.means[j])
                    .zip(&self.variances[j])
                    .map(|((&a, &m), &v)| {
                        let d = a as f64 - m;
                        d * d / v
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood before each M-step, then of the final model.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Iterations at which an emptied component was reseeded.
    pub reseeded_at: Vec<usize>,
}

fn data_moments(data: &VectorSet) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (data.count() as f64, data.dim());
    let mut mean = vec![0.0; d];
    for row in data.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in data.rows() {
        for t in 0..d {
            let diff = row[t] as f64 - mean[t];
            var[t] += diff * diff;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

fn kmeanspp(data: &VectorSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.count();
    let mut centers: Vec<usize> = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = data
        .rows()
        .map(|r| crate::dataset::squared_l2(r, data.get(centers[0])) as f64)
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
        };
        centers.push(next);
        for (i, row) in data.rows().enumerate() {
            let d = crate::dataset::squared_l2(row, data.get(next)) as f64;
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
        .iter()
        .map(|&c| data.get(c).iter().map(|&x| x as f64).collect())
        .collect()
}

struct Stats {
    nk: Vec<f64>,
    sx: Vec<Vec<f64>>,
    ll: f64,
    worst: (f64, usize),
}

/// Fits a diagonal GMM by EM.
///
/// Stops when the mean log-likelihood improves by less than `tol` or after
/// `max_iter` M-steps. A component whose responsibility mass vanishes is
/// re-centred once on the worst-explained vector; a second collapse is an error.
pub fn gmm_fit(data: &VectorSet, n_components: usize, max_iter: usize, tol: f64, seed: u64) -> Result<GmmFit> {
    let n = data.count();
    if n_components == 0 {
        return Err(invalid!("n_components must be positive"));
    }
    if n < n_components {
        return Err(invalid!("{n} vectors cannot support {n_components} components"));
    }
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, data_var) = data_moments(data);
    let floor: Vec<f64> = data_var
        .iter()
        .map(|v| (v * VARIANCE_FLOOR).max(f64::MIN_POSITIVE))
        .collect();
    let mut model = GmmModel {
        weights: vec![1.0 / n_components as f64; n_components],
        means: kmeanspp(data, n_components, &mut rng),
        variances: vec![data_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect(); n_components],
    };
    let mut reseeded = vec![false; n_components];
    let mut fit = GmmFit {
        model: model.clone(),
        log_likelihoods: Vec::new(),
        iterations: 0,
        converged: false,
        reseeded_at: Vec::new(),
    };
    let ids: Vec<usize> = (0..n).collect();
    let kc = n_components;
    let mut resp = vec![0.0f64; n * kc];

    for iter in 0..=max_iter {
        // E-step: responsibilities, weighted sums and log-likelihood, reduced in chunk order.
        let parts: Vec<Stats> = resp
            .par_chunks_mut(CHUNK * kc)
            .zip(ids.par_chunks(CHUNK))
            .map(|(r, chunk)| {
                let mut s = Stats {
                    nk: vec![0.0; kc],
                    sx: vec![vec![0.0; d]; kc],
                    ll: 0.0,
                    worst: (f64::INFINITY, usize::MAX),
                };
                for (row, &i) in r.chunks_mut(kc).zip(chunk) {
                    let x = data.get(i);
                    model.component_log_densities(x, row);
                    let lse = log_sum_exp(row);
                    s.ll += lse;
                    if lse < s.worst.0 {
                        s.worst = (lse, i);
                    }
                    for j in 0..kc {
                        let w = (row[j] - lse).exp();
                        row[j] = w;
                        s.nk[j] += w;
                        for t in 0..d {
                            s.sx[j][t] += w * x[t] as f64;
                        }
                    }
                }
                s
            })
            .collect();
        let mut nk = vec![0.0; kc];
        let mut sx = vec![vec![0.0; d]; kc];
        let mut ll = 0.0;
        let mut worst = (f64::INFINITY, 0usize);
        for p in &parts {
            ll += p.ll;
            if p.worst.0 < worst.0 {
                worst = p.worst;
            }
            for j in 0..kc {
                nk[j] += p.nk[j];
                for t in 0..d {
                    sx[j][t] += p.sx[j][t];
                }
            }
        }
        let ll = ll / n as f64;
        if !ll.is_finite() {
            return Err(Error::Other(format!("EM diverged at iteration {iter}")));
        }
        fit.log_likelihoods.push(ll);
        fit.model = model.clone();
        fit.iterations = iter;
        if let [.., prev, last] = fit.log_likelihoods[..] {
            if fit.reseeded_at.last() != Some(&iter) && last - prev < tol {
                fit.converged = true;
                break;
            }
        }
        if iter == max_iter {
            break;
        }

        // M-step.
        let mut reseed = None;
        for j in 0..kc {
            if nk[j] < 1e-10 {
                if reseeded[j] {
                    return Err(Error::Other(format!("GMM component {j} emptied twice")));
                }
                reseeded[j] = true;
                reseed = Some(j);
                continue;
            }
            for t in 0..d {
                model.means[j][t] = sx[j][t] / nk[j];
            }
            model.weights[j] = nk[j] / n as f64;
        }
        let means = &model.means;
        let sq: Vec<Vec<Vec<f64>>> = resp
            .par_chunks(CHUNK * kc)
            .zip(ids.par_chunks(CHUNK))
            .map(|(r, chunk)| {
                let mut acc = vec![vec![0.0; d]; kc];
                for (row, &i) in r.chunks(kc).zip(chunk) {
                    let x = data.get(i);
                    for j in 0..kc {
                        let w = row[j];
                        if w == 0.0 {
                            continue;
                        }
                        for t in 0..d {
                            let diff = x[t] as f64 - means[j][t];
                            acc[j][t] += w * diff * diff;
                        }
                    }
                }
                acc
            })
            .collect();
        for j in 0..kc {
            if nk[j] < 1e-10 {
                continue;
            }
            for t in 0..d {
                let s: f64 = sq.iter().map(|a| a[j][t]).sum();
                model.variances[j][t] = (s / nk[j]).max(floor[t]);
            }
        }
        if let Some(j) = reseed {
            model.means[j] = data.get(worst.1).iter().map(|&x| x as f64).collect();
            model.variances[j] = data_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
            model.weights[j] = 1.0 / n as f64;
            fit.reseeded_at.push(iter + 1);
        }
        let total: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(fit)
}

/// Draws `n` vectors: component by weight, then a diagonal Gaussian.
pub fn gmm_sample(model: &GmmModel, n: usize, seed: u64) -> Result<VectorSet> {
    if n == 0 {
        return Err(invalid!("sample size must be positive"));
    }
    let pick = WeightedIndex::new(&model.weights).map_err(|e| invalid!("bad mixture weights: {e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let j = pick.sample(&mut rng);
        for t in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            data.push((model.means[j][t] + z * model.variances[j][t].sqrt()) as f32);
        }
    }
    VectorSet::new(d, data)
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceSummary {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl DistanceSummary {
    fn of(mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: quantile(&v, 0.5),
            p90: quantile(&v, 0.9),
            p99: quantile(&v, 0.99),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MahalanobisReport {
    pub samples: DistanceSummary,
    pub reference: DistanceSummary,
    pub p50_difference: f64,
}

pub fn mahalanobis_report(model: &GmmModel, samples: &VectorSet, reference: &VectorSet) -> Result<MahalanobisReport> {
    for vs in [samples, reference] {
        if vs.dim() != model.dim() {
            return Err(Error::DimMismatch {
                expected: model.dim(),
                found: vs.dim(),
            });
        }
        if vs.is_empty() {
            return Err(invalid!("empty vector set"));
        }
    }
    let dists = |vs: &VectorSet| DistanceSummary::of(vs.rows().map(|r| model.mahalanobis(r)).collect());
    let (s, r) = (dists(samples), dists(reference));
    Ok(MahalanobisReport {
        samples: s,
        reference: r,
        p50_difference: (s.p50 - r.p50).abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub q: usize,
    pub h: usize,
    pub trim_lo: f64,
    pub trim_hi: f64,
    pub seed: u64,
    /// Largest number of empty segments tolerated; `None` accepts any.
    #[serde(default)]
    pub deficit_tolerance: Option<usize>,
}

impl WorkloadSpec {
    pub fn new(q: usize, h: usize, seed: u64) -> Self {
        Self {
            q,
            h,
            trim_lo: DEFAULT_TRIM.0,
            trim_hi: DEFAULT_TRIM.1,
            seed,
            deficit_tolerance: None,
        }
    }

    pub fn untrimmed(mut self) -> Self {
        self.trim_lo = 0.0;
        self.trim_hi = 1.0;
        self
    }

    pub fn per_segment(&self) -> usize {
        self.q.div_ceil(self.h)
    }

    fn validate(&self) -> Result<()> {
        if self.h == 0 || self.q < self.h {
            return Err(invalid!("need Q >= h >= 1, got Q={} h={}", self.q, self.h));
        }
        if !(0.0 <= self.trim_lo && self.trim_lo < self.trim_hi && self.trim_hi <= 1.0) {
            return Err(invalid!("need 0 <= trim_lo < trim_hi <= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkloadSelection {
    /// Selected candidate indices in ascending hardness order.
    pub indices: Vec<usize>,
    /// Hardness range after trimming.
    pub range: (f64, f64),
    /// Candidates available per segment.
    pub available: Vec<usize>,
    /// Selected per segment.
    pub selected: Vec<usize>,
    /// Missing picks per segment.
    pub deficits: Vec<usize>,
}

impl WorkloadSelection {
    pub fn has_deficit(&self) -> bool {
        self.deficits.iter().any(|&d| d > 0)
    }

    pub fn segment_of(&self, value: f64) -> usize {
        segment_index(value, self.range, self.available.len())
    }
}

fn segment_index(v: f64, (lo, hi): (f64, f64), h: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * h as f64).floor() as usize).min(h - 1)
}

/// Trims extreme values, splits the remaining range into `h` equal-length
/// segments and samples `ceil(Q/h)` candidates from each.
pub fn generate_unbiased_workload(hardness: &[f64], spec: &WorkloadSpec) -> Result<WorkloadSelection> {
    spec.validate()?;
    let mut finite: Vec<f64> = hardness.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(invalid!("no finite hardness values"));
    }
    finite.sort_by(f64::total_cmp);
    let lo = quantile(&finite, spec.trim_lo);
    let hi = quantile(&finite, spec.trim_hi);
    let kept: Vec<usize> = (0..hardness.len())
        .filter(|&i| hardness[i].is_finite() && hardness[i] >= lo && hardness[i] <= hi)
        .collect();
    let range = kept.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
        (a.min(hardness[i]), b.max(hardness[i]))
    });
    let h = spec.h;
    let per = spec.per_segment();
    let mut segments: Vec<Vec<usize>> = vec![Vec::new(); h];
    for &i in &kept {
        segments[segment_index(hardness[i], range, h)].push(i);
    }
    let available: Vec<usize> = segments.iter().map(Vec::len).collect();
    let deficits: Vec<usize> = available.iter().map(|&a| per.saturating_sub(a)).collect();
    if kept.len() < spec.q {
        let shortfall: Vec<String> = deficits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(s, d)| format!("segment {s}: {d}"))
            .collect();
        return Err(invalid!(
            "{} candidates after trimming, need {}; shortfall {}",
            kept.len(),
            spec.q,
            shortfall.join(", ")
        ));
    }
    let empty = available.iter().filter(|&&a| a == 0).count();
    if let Some(tol) = spec.deficit_tolerance {
        if empty > tol {
            return Err(invalid!("{empty} empty segments exceed tolerance {tol}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut indices = Vec::with_capacity(per * h);
    let mut selected = Vec::with_capacity(h);
    for seg in &mut segments {
        seg.sort_by(|&a, &b| hardness[a].total_cmp(&hardness[b]).then(a.cmp(&b)));
        if seg.len() <= per {
            indices.extend_from_slice(seg);
            selected.push(seg.len());
        } else {
            let mut pick = rand::seq::index::sample(&mut rng, seg.len(), per).into_vec();
            pick.sort_unstable();
            indices.extend(pick.iter().map(|&p| seg[p]));
            selected.push(per);
        }
    }
    indices.sort_by(|&a, &b| hardness[a].total_cmp(&hardness[b]).then(a.cmp(&b)));
    Ok(WorkloadSelection {
        indices,
        range,
        available,
        selected,
        deficits,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub q: usize,
    pub h: usize,
    pub components: usize,
    pub oversample: usize,
    /// Vectors used to fit the mixture; `None` uses the whole base.
    pub fit_sample: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub trim: (f64, f64),
    pub seed: u64,
}

impl WorkloadParams {
    pub fn new(q: usize, h: usize, seed: u64) -> Self {
        Self {
            q,
            h,
            components: DEFAULT_COMPONENTS,
            oversample: DEFAULT_OVERSAMPLE,
            fit_sample: Some(20_000),
            max_iter: 100,
            tol: 1e-6,
            trim: DEFAULT_TRIM,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub queries: VectorSet,
    /// Steiner-hardness of each selected query.
    pub hardness: Vec<f64>,
    /// Steiner-hardness of every candidate.
    pub candidate_hardness: Vec<f64>,
    pub selection: WorkloadSelection,
    pub validity: MahalanobisReport,
    pub fit: GmmFit,
}

/// Full pipeline: fit, over-sample, score on the MRNG and stratify.
pub fn unbiased_workload(
    base: &VectorSet,
    mrng: &DirectedGraph,
    rev_mrng: &DirectedGraph,
    hardness: &HardnessParams,
    params: &WorkloadParams,
) -> Result<Workload> {
    let train = match params.fit_sample {
        Some(m) if m < base.count() => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
            let mut ids: Vec<u32> = rand::seq::index::sample(&mut rng, base.count(), m)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            ids.sort_unstable();
            base.permuted(&ids)
        }
        _ => base.clone(),
    };
    let fit = gmm_fit(&train, params.components, params.max_iter, params.tol, params.seed)?;
    log::info!(
        "GMM fit: {} iterations, mean log-likelihood {:.4}",
        fit.iterations,
        fit.log_likelihoods.last().copied().unwrap_or(f64::NAN)
    );
    let candidates = gmm_sample(&fit.model, params.q * params.oversample, params.seed.wrapping_add(1))?;
    let measures = Measures::parse("steiner")?;
    let records = compute_hardness(Some((mrng, rev_mrng)), base, &candidates, &measures, hardness)?;
    let candidate_hardness: Vec<f64> = records.iter().map(|r| r.steiner).collect();
    let spec = WorkloadSpec {
        q: params.q,
        h: params.h,
        trim_lo: params.trim.0,
        trim_hi: params.trim.1,
        seed: params.seed.wrapping_add(2),
        deficit_tolerance: None,
    };
    let selection = generate_unbiased_workload(&candidate_hardness, &spec)?;
    let ids: Vec<u32> = selection.indices.iter().map(|&i| i as u32).collect();
    let queries = candidates.permuted(&ids);
    let validity = mahalanobis_report(&fit.model, &queries, &train)?;
    Ok(Workload {
        hardness: selection.indices.iter().map(|&i| candidate_hardness[i]).collect(),
        queries,
        candidate_hardness,
        selection,
        validity,
        fit,
    })
}
