//! Posterior trace: per-kept-iteration cluster states, NDJSON
//! persistence (one meta line, then one record per kept sweep),
//! label-aligned summary tables, and predictive simulation.

use crate::calibration::{vine_params_at, VineCalibration};
use crate::dpm::model::{CenteringMeasure, CovariateParam, VineClusterParam};
use crate::dpm::sampler::{DpConfig, MixtureState};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::stats;
use crate::vine::{self, VineSpec};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Everything needed to reinterpret the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub spec: VineSpec,
    pub calib: VineCalibration,
    pub config: DpConfig,
    pub n_obs: usize,
}

/// One cluster inside one kept sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub count: usize,
    /// Occupancy proportion N_m / N.
    pub weight: f64,
    pub covariates: Vec<CovariateParam>,
    pub betas: Vec<Vec<f64>>,
}

/// One kept sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub n_clusters: usize,
    pub memberships: Vec<usize>,
    pub clusters: Vec<ClusterRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl PosteriorTrace {
    pub fn from_states(
        meta: TraceMeta,
        kept: Vec<(usize, MixtureState<VineClusterParam>)>,
    ) -> Self {
        let records = kept
            .into_iter()
            .map(|(iteration, s)| {
                let counts = s.counts();
                let n = s.assignments.len() as f64;
                let clusters = s
                    .params
                    .iter()
                    .zip(&counts)
                    .map(|(p, &c)| ClusterRecord {
                        count: c,
                        weight: c as f64 / n,
                        covariates: p.covariates.clone(),
                        betas: p.betas.clone(),
                    })
                    .collect();
                TraceRecord {
                    iteration,
                    n_clusters: s.params.len(),
                    memberships: s.assignments,
                    clusters,
                }
            })
            .collect();
        PosteriorTrace { meta, records }
    }

    pub fn write_ndjson(&self, path: &Path) -> Result<()> {
        let mut out = serde_json::to_string(&self.meta)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        atomic_write(path, &out)
    }

    pub fn read_ndjson(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.to_string_lossy(), e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let meta_line = lines
            .next()
            .ok_or_else(|| Error::Data(format!("trace {} is empty", path.display())))?;
        let meta: TraceMeta = serde_json::from_str(meta_line)?;
        let records = lines
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<TraceRecord>, _>>()?;
        Ok(PosteriorTrace { meta, records })
    }

    /// Modal posterior cluster count; the smallest value on ties.
    pub fn modal_cluster_count(&self) -> usize {
        let mut counts = std::collections::BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.n_clusters).or_insert(0usize) += 1;
        }
        counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(k, _)| *k)
            .unwrap_or(0)
    }

    /// Per-parameter summary over records whose cluster count equals
    /// the modal value, after label alignment. Columns follow
    /// cluster-major order: c1_b1..c1_bq, c2_b1, ...
    pub fn cluster_summary_csv(&self) -> String {
        let aligned = match align_modal_records(self) {
            Some(a) => a,
            None => return "stat\n".into(),
        };
        let n_clusters = aligned.modal_n;
        let q: usize = self.meta.calib.per_edge_counts().iter().sum();
        let mut header = vec!["stat".to_string()];
        for m in 0..n_clusters {
            for k in 0..q {
                header.push(format!("c{}_b{}", m + 1, k + 1));
            }
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_clusters * q];
        for rec in &aligned.records {
            for (m, cluster) in rec.iter().enumerate() {
                for (k, b) in cluster.betas.iter().flatten().enumerate() {
                    columns[m * q + k].push(*b);
                }
            }
        }
        summary_table(&header, &columns)
    }

    /// Mixture-weight summary (occupancy proportions) at the modal
    /// cluster count.
    pub fn weight_summary_csv(&self) -> String {
        let aligned = match align_modal_records(self) {
            Some(a) => a,
            None => return "stat\n".into(),
        };
        let mut header = vec!["stat".to_string()];
        for m in 0..aligned.modal_n {
            header.push(format!("w{}", m + 1));
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); aligned.modal_n];
        for rec in &aligned.records {
            for (m, cluster) in rec.iter().enumerate() {
                columns[m].push(cluster.weight);
            }
        }
        summary_table(&header, &columns)
    }
}

fn summary_table(header: &[String], columns: &[Vec<f64>]) -> String {
    let stat_rows: [(&str, fn(&[f64]) -> f64); 4] = [
        ("E", stats::mean),
        ("SD", stats::sd),
        ("q0.025", |v| stats::quantile(v, 0.025)),
        ("q0.975", |v| stats::quantile(v, 0.975)),
    ];
    let mut out = header.join(",") + "\n";
    for (name, f) in stat_rows {
        let vals: Vec<String> = columns.iter().map(|c| format!("{:.6}", f(c))).collect();
        out.push_str(&format!("{},{}\n", name, vals.join(",")));
    }
    out
}

/// Records at the modal cluster count with labels permuted to best
/// match a reference partition, plus a majority-vote consensus
/// membership vector.
pub struct AlignedRecords {
    pub modal_n: usize,
    pub records: Vec<Vec<ClusterRecord>>,
    pub consensus: Vec<usize>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

pub fn align_modal_records(trace: &PosteriorTrace) -> Option<AlignedRecords> {
    let modal = trace.modal_cluster_count();
    if modal == 0 {
        return None;
    }
    let modal_records: Vec<&TraceRecord> = trace
        .records
        .iter()
        .filter(|r| r.n_clusters == modal)
        .collect();
    let reference = modal_records.first()?;
    // Brute-force label matching is fine at the cluster counts a DPM
    // actually visits; bail out of alignment (keep labels as-is) if
    // the count is unexpectedly large.
    let perms = if modal <= 7 {
        permutations(modal)
    } else {
        vec![(0..modal).collect()]
    };
    let n_obs = reference.memberships.len();
    let mut aligned = Vec::with_capacity(modal_records.len());
    let mut votes = vec![vec![0usize; modal]; n_obs];
    for rec in &modal_records {
        let best = perms
            .iter()
            .max_by_key(|perm| {
                rec.memberships
                    .iter()
                    .zip(&reference.memberships)
                    .filter(|(&z, &r)| perm[z] == r)
                    .count()
            })
            .unwrap();
        let mut clusters = vec![None; modal];
        for (old, c) in rec.clusters.iter().enumerate() {
            clusters[best[old]] = Some(c.clone());
        }
        for (i, &z) in rec.memberships.iter().enumerate() {
            votes[i][best[z]] += 1;
        }
        aligned.push(clusters.into_iter().map(|c| c.unwrap()).collect());
    }
    let consensus = votes
        .iter()
        .map(|v| v.iter().enumerate().max_by_key(|(_, &c)| c).unwrap().0)
        .collect();
    Some(AlignedRecords {
        modal_n: modal,
        records: aligned,
        consensus,
    })
}

/// Posterior predictive simulation: pick a kept sweep, then a
/// component with probability N_m / (M + N) or a fresh base-measure
/// component with probability M / (M + N); draw the covariate from the
/// component's covariate model and one u-row from its conditional
/// vine.
pub fn predictive_draws(
    trace: &PosteriorTrace,
    g0: &CenteringMeasure,
    n_draws: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if trace.records.is_empty() {
        return Err(Error::Data("trace has no records".into()));
    }
    let meta = &trace.meta;
    let mass = meta.config.total_mass;
    let n = meta.n_obs as f64;
    let counts = meta.calib.per_edge_counts();
    let mut out = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let rec = &trace.records[rng.gen_range(0..trace.records.len())];
        let fresh;
        let (covariates, betas): (Vec<CovariateParam>, Vec<Vec<f64>>) =
            if rng.gen::<f64>() < mass / (mass + n) {
                fresh = true;
                let cov = (0..meta.calib.covariate_dim)
                    .map(|j| g0.draw_covariate(j, rng))
                    .collect();
                let flat = g0.draw_coefficients(rng);
                let mut betas = Vec::with_capacity(counts.len());
                let mut off = 0;
                for &c in &counts {
                    betas.push(flat.as_slice()[off..off + c].to_vec());
                    off += c;
                }
                (cov, betas)
            } else {
                fresh = false;
                let mut t = rng.gen::<f64>() * rec.memberships.len() as f64;
                let mut pick = rec.clusters.len() - 1;
                for (m, c) in rec.clusters.iter().enumerate() {
                    t -= c.count as f64;
                    if t <= 0.0 {
                        pick = m;
                        break;
                    }
                }
                (
                    rec.clusters[pick].covariates.clone(),
                    rec.clusters[pick].betas.clone(),
                )
            };
        let _ = fresh;
        let x: Vec<f64> = covariates.iter().map(|c| c.sample(rng)).collect();
        let params = vine_params_at(&meta.calib, &betas, &x)?;
        let w: Vec<f64> = (0..meta.spec.dimension).map(|_| rng.gen::<f64>()).collect();
        let u = vine::simulate_row(&meta.spec, &params, &w)?;
        out.push((x, u));
    }
    Ok(out)
}
