//! The marginalized ("Chinese restaurant") Gibbs sampler. Cluster
//! assignments are resampled one observation at a time with a single
//! auxiliary parameter drawn from the base measure — the no-gaps
//! scheme, which keeps labels contiguous and ordered by first
//! appearance — and cluster parameters are then refreshed given their
//! members.

use crate::error::{Error, Result};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What the sampler needs from a mixture model. `Param` is one
/// cluster's full parameter (coefficients plus covariate-model
/// parameters for the vine model; anything enumerable for test
/// doubles).
pub trait ClusterModel {
    type Param: Clone;

    fn n_obs(&self) -> usize;

    /// Draw a cluster parameter from the base measure G0.
    fn draw_base(&mut self, rng: &mut dyn RngCore) -> Self::Param;

    /// Log joint kernel of observation `i` under `param`: covariate
    /// density times the conditional copula density. Return -inf for
    /// numerically unusable parameters.
    fn log_obs_density(&self, i: usize, param: &Self::Param) -> f64;

    /// Refresh a cluster parameter given its members (conjugate draw
    /// or MH, model's choice). `adapt` is true during burn-in so the
    /// model may tune proposal scales.
    fn update_param(
        &mut self,
        members: &[usize],
        param: &mut Self::Param,
        adapt: bool,
        rng: &mut dyn RngCore,
    );
}

/// Clustering state: contiguous labels ordered by first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState<P> {
    pub assignments: Vec<usize>,
    pub params: Vec<P>,
}

impl<P> MixtureState<P> {
    pub fn n_clusters(&self) -> usize {
        self.params.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.params.len()];
        for &z in &self.assignments {
            c[z] += 1;
        }
        c
    }

    /// Occupancy proportions N_m / N.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.assignments.len() as f64;
        self.counts().iter().map(|&c| c as f64 / n).collect()
    }

    fn check_labels(&self) -> bool {
        let counts = self.counts();
        counts.iter().all(|&c| c > 0)
    }
}

impl<P: Clone> MixtureState<P> {
    /// Relabel clusters by order of first appearance. Labels are pure
    /// bookkeeping, so this never changes the sampled partition.
    pub fn canonicalize(&mut self) {
        let k = self.params.len();
        let mut new_label = vec![usize::MAX; k];
        let mut next = 0;
        for &z in &self.assignments {
            if new_label[z] == usize::MAX {
                new_label[z] = next;
                next += 1;
            }
        }
        let mut params = vec![None; k];
        for (old, p) in self.params.iter().enumerate() {
            params[new_label[old]] = Some(p.clone());
        }
        self.params = params.into_iter().map(|p| p.unwrap()).collect();
        for z in self.assignments.iter_mut() {
            *z = new_label[*z];
        }
    }
}

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub total_mass: f64,
    pub iterations: usize,
    pub burnin: usize,
    pub thinning: usize,
    /// Parameter-refresh passes per sweep.
    pub param_steps: usize,
    /// Attempt one split-merge move per sweep. Off by default; the
    /// per-observation scan alone is enough for low-dimensional
    /// kernels, but merges duplicate clusters very slowly once their
    /// parameters have adapted to disjoint subsets.
    #[serde(default)]
    pub split_merge: bool,
    pub seed: u64,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            total_mass: 1.0,
            iterations: 1000,
            burnin: 200,
            thinning: 1,
            param_steps: 2,
            split_merge: false,
            seed: 0,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_mass <= 0.0 {
            return Err(Error::Config("total mass must be positive".into()));
        }
        if self.burnin >= self.iterations {
            return Err(Error::Config("burn-in must be below iterations".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// One reassignment pass over all observations.
///
/// Per observation: if it is currently a singleton, with probability
/// k/(k+1) (k = clusters among the others) its assignment is left
/// unchanged; otherwise its own parameter plays the auxiliary role.
/// Non-singletons get a fresh G0 auxiliary. The observation then picks
/// among existing clusters with weight N_m * f and the auxiliary with
/// weight M/(k+1) * f, all in log space.
pub fn assignment_sweep<Mo: ClusterModel>(
    model: &mut Mo,
    state: &mut MixtureState<Mo::Param>,
    total_mass: f64,
    rng: &mut dyn RngCore,
) -> Result<()> {
    let n = model.n_obs();
    for i in 0..n {
        let c = state.assignments[i];
        let mut counts = state.counts();
        counts[c] -= 1;
        let singleton = counts[c] == 0;
        let k_minus = if singleton {
            state.params.len() - 1
        } else {
            state.params.len()
        };

        // Candidate (auxiliary) parameter for the "new cluster" slot.
        let candidate = if singleton {
            if k_minus > 0 {
                let keep = k_minus as f64 / (k_minus as f64 + 1.0);
                if rng.gen::<f64>() < keep {
                    continue;
                }
            }
            // Detach the singleton's cluster, compacting labels so the
            // remaining ones stay ordered by first appearance.
            let param = state.params.remove(c);
            counts.remove(c);
            for z in state.assignments.iter_mut() {
                if *z > c {
                    *z -= 1;
                }
            }
            param
        } else {
            model.draw_base(rng)
        };

        let mut logw: Vec<f64> = Vec::with_capacity(k_minus + 1);
        for m in 0..k_minus {
            logw.push((counts[m] as f64).ln() + model.log_obs_density(i, &state.params[m]));
        }
        logw.push(
            (total_mass / (k_minus as f64 + 1.0)).ln() + model.log_obs_density(i, &candidate),
        );

        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::numeric(
                "assignment step",
                format!("all cluster weights vanished for observation {i}"),
            ));
        }
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut t = rng.gen::<f64>() * total;
        let mut choice = w.len() - 1;
        for (m, wm) in w.iter().enumerate() {
            t -= wm;
            if t <= 0.0 {
                choice = m;
                break;
            }
        }

        if choice == k_minus {
            // New cluster appears last, preserving appearance order.
            state.params.push(candidate);
            state.assignments[i] = k_minus;
        } else {
            state.assignments[i] = choice;
        }
    }
    state.canonicalize();
    debug_assert!(state.check_labels());
    Ok(())
}

/// One Metropolis–Hastings split-merge move (sequentially allocated).
///
/// Two distinct observations are drawn; if they share a cluster a
/// split is proposed, otherwise a merge. Splits seed two clusters
/// with the anchor observations (the first keeps the old parameter,
/// the second gets a fresh G0 draw) and allocate the rest in index
/// order through a Polya urn weighted by the kernel. The urn's
/// allocation probability cancels the partition-prior ratio in the
/// acceptance, and the G0 density of the fresh parameter cancels its
/// prior factor, so acceptance is driven by the likelihood and the
/// realized allocation path alone. Merges are accepted against the
/// probability that the reverse split reproduces the current pair.
pub fn split_merge_step<Mo: ClusterModel>(
    model: &mut Mo,
    state: &mut MixtureState<Mo::Param>,
    total_mass: f64,
    rng: &mut dyn RngCore,
) -> Result<()> {
    use statrs::function::gamma::ln_gamma;

    let n = model.n_obs();
    if n < 2 {
        return Ok(());
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (ci, cj) = (state.assignments[i], state.assignments[j]);

    if ci == cj {
        // Split: i anchors the old parameter, j a fresh draw.
        let fresh = model.draw_base(rng);
        let mut side_j = vec![j];
        let (mut ni, mut nj) = (1f64, 1f64);
        let mut log_alloc = 0.0;
        let mut log_lik_ratio =
            model.log_obs_density(j, &fresh) - model.log_obs_density(j, &state.params[ci]);
        for l in 0..n {
            if l == i || l == j || state.assignments[l] != ci {
                continue;
            }
            let old = model.log_obs_density(l, &state.params[ci]);
            let new = model.log_obs_density(l, &fresh);
            let wi = ni.ln() + old;
            let wj = nj.ln() + new;
            let max = wi.max(wj);
            let (pi, pj) = ((wi - max).exp(), (wj - max).exp());
            if rng.gen::<f64>() * (pi + pj) < pj {
                log_alloc += (pj / (pi + pj)).ln();
                log_lik_ratio += new - old;
                side_j.push(l);
                nj += 1.0;
            } else {
                log_alloc += (pi / (pi + pj)).ln();
                ni += 1.0;
            }
        }
        let log_accept = total_mass.ln() + ln_gamma(ni) + ln_gamma(nj) - ln_gamma(ni + nj)
            + log_lik_ratio
            - log_alloc;
        if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
            let label = state.params.len();
            state.params.push(fresh);
            for &l in &side_j {
                state.assignments[l] = label;
            }
            state.canonicalize();
        }
    } else {
        // Merge j's cluster into i's, keeping i's parameter. The
        // reverse split must reproduce the current pair exactly; its
        // allocation probability is accumulated in index order.
        let (mut ni, mut nj) = (1f64, 1f64);
        let mut log_alloc = 0.0;
        let mut log_lik_ratio =
            model.log_obs_density(j, &state.params[ci]) - model.log_obs_density(j, &state.params[cj]);
        for l in 0..n {
            if l == i || l == j {
                continue;
            }
            let c = state.assignments[l];
            if c != ci && c != cj {
                continue;
            }
            let wi = ni.ln() + model.log_obs_density(l, &state.params[ci]);
            let wj = nj.ln() + model.log_obs_density(l, &state.params[cj]);
            let max = wi.max(wj);
            let (pi, pj) = ((wi - max).exp(), (wj - max).exp());
            if c == cj {
                log_alloc += (pj / (pi + pj)).ln();
                log_lik_ratio +=
                    model.log_obs_density(l, &state.params[ci]) - model.log_obs_density(l, &state.params[cj]);
                nj += 1.0;
            } else {
                log_alloc += (pi / (pi + pj)).ln();
                ni += 1.0;
            }
        }
        let log_accept = ln_gamma(ni + nj) - ln_gamma(ni) - ln_gamma(nj) - total_mass.ln()
            + log_lik_ratio
            + log_alloc;
        if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
            state.params.remove(cj);
            for z in state.assignments.iter_mut() {
                if *z == cj {
                    *z = ci;
                }
            }
            for z in state.assignments.iter_mut() {
                if *z > cj {
                    *z -= 1;
                }
            }
            state.canonicalize();
        }
    }
    debug_assert!(state.check_labels());
    Ok(())
}

/// Refresh every cluster's parameter given its members.
pub fn param_sweep<Mo: ClusterModel>(
    model: &mut Mo,
    state: &mut MixtureState<Mo::Param>,
    adapt: bool,
    rng: &mut dyn RngCore,
) {
    for m in 0..state.params.len() {
        let members: Vec<usize> = state
            .assignments
            .iter()
            .enumerate()
            .filter(|(_, &z)| z == m)
            .map(|(i, _)| i)
            .collect();
        let mut param = state.params[m].clone();
        model.update_param(&members, &mut param, adapt, rng);
        state.params[m] = param;
    }
}

/// One full sweep: reassignment, then `param_steps` parameter passes.
pub fn sweep<Mo: ClusterModel>(
    model: &mut Mo,
    state: &mut MixtureState<Mo::Param>,
    cfg: &DpConfig,
    adapt: bool,
    rng: &mut dyn RngCore,
) -> Result<()> {
    assignment_sweep(model, state, cfg.total_mass, rng)?;
    if cfg.split_merge {
        // A few attempts per sweep: acceptance depends on where the
        // unidentified parameter directions happen to sit, so repeated
        // tries help without biasing the target.
        for _ in 0..3 {
            split_merge_step(model, state, cfg.total_mass, rng)?;
        }
    }
    for _ in 0..cfg.param_steps {
        param_sweep(model, state, adapt, rng);
    }
    Ok(())
}

/// Run a full chain, deterministically seeded. Returns the kept states
/// in sweep order.
pub fn run_chain<Mo: ClusterModel>(
    model: &mut Mo,
    cfg: &DpConfig,
) -> Result<Vec<(usize, MixtureState<Mo::Param>)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = model.n_obs();
    if n == 0 {
        return Err(Error::Data("no observations".into()));
    }
    // Initial partition drawn from the Chinese-restaurant prior (one
    // shared cluster is a poor start: the singleton retention rule
    // makes escaping it slow, while a prior draw leaves room to merge
    // and split from the first sweep).
    let mut assignments = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..n {
        let total = i as f64 + cfg.total_mass;
        let mut t: f64 = rng.gen::<f64>() * total;
        let mut c = counts.len();
        for (m, &nm) in counts.iter().enumerate() {
            t -= nm as f64;
            if t <= 0.0 {
                c = m;
                break;
            }
        }
        if c == counts.len() {
            counts.push(0);
        }
        counts[c] += 1;
        assignments.push(c);
    }
    let params = (0..counts.len()).map(|_| model.draw_base(&mut rng)).collect();
    let mut state = MixtureState {
        assignments,
        params,
    };
    let mut kept = Vec::new();
    for it in 0..cfg.iterations {
        let adapt = it < cfg.burnin;
        sweep(model, &mut state, cfg, adapt, &mut rng).map_err(|e| Error::Mcmc {
            iteration: it,
            message: e.to_string(),
        })?;
        if it >= cfg.burnin && (it - cfg.burnin) % cfg.thinning == 0 {
            kept.push((it, state.clone()));
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    /// Kernel-free model: assignment weights reduce to the Chinese
    /// restaurant prior.
    struct PriorOnly {
        n: usize,
    }

    impl ClusterModel for PriorOnly {
        type Param = ();
        fn n_obs(&self) -> usize {
            self.n
        }
        fn draw_base(&mut self, _rng: &mut dyn RngCore) -> () {}
        fn log_obs_density(&self, _i: usize, _p: &()) -> f64 {
            0.0
        }
        fn update_param(&mut self, _m: &[usize], _p: &mut (), _a: bool, _r: &mut dyn RngCore) {}
    }

    #[test]
    fn single_observation_always_one_cluster() {
        let mut model = PriorOnly { n: 1 };
        let cfg = DpConfig {
            iterations: 50,
            burnin: 0,
            ..Default::default()
        };
        let kept = run_chain(&mut model, &cfg).unwrap();
        assert_eq!(kept.len(), 50);
        assert!(kept.iter().all(|(_, s)| s.n_clusters() == 1));
    }

    #[test]
    fn one_record_when_iterations_is_burnin_plus_one() {
        let mut model = PriorOnly { n: 3 };
        let cfg = DpConfig {
            iterations: 11,
            burnin: 10,
            ..Default::default()
        };
        assert_eq!(run_chain(&mut model, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn identical_seeds_identical_chains() {
        let cfg = DpConfig {
            iterations: 60,
            burnin: 10,
            seed: 42,
            ..Default::default()
        };
        let a = run_chain(&mut PriorOnly { n: 8 }, &cfg).unwrap();
        let b = run_chain(&mut PriorOnly { n: 8 }, &cfg).unwrap();
        let za: Vec<_> = a.iter().map(|(_, s)| s.assignments.clone()).collect();
        let zb: Vec<_> = b.iter().map(|(_, s)| s.assignments.clone()).collect();
        assert_eq!(za, zb);
    }

    #[test]
    fn prior_recovery_matches_crp() {
        // Kernel disabled: cluster counts must follow the exact CRP
        // distribution (chi-square goodness of fit).
        let n = 20;
        let mut model = PriorOnly { n };
        // Thinned: the chi-square test assumes independent draws, and
        // consecutive sweeps of n are autocorrelated.
        let cfg = DpConfig {
            total_mass: 1.0,
            iterations: 100_500,
            burnin: 500,
            thinning: 10,
            param_steps: 0,
            split_merge: false,
            seed: 3,
        };
        let kept = run_chain(&mut model, &cfg).unwrap();
        let mut observed = vec![0.0; n + 1];
        for (_, s) in &kept {
            observed[s.n_clusters()] += 1.0;
        }
        let pmf = stats::crp_cluster_count_pmf(n, 1.0);
        let total = kept.len() as f64;
        let expected: Vec<f64> = pmf.iter().map(|p| p * total).collect();
        let p = stats::chi_square_gof_p(&observed, &expected);
        assert!(p > 0.01, "chi-square p = {p}");
    }

    #[test]
    fn labels_stay_contiguous_under_churn() {
        let mut model = PriorOnly { n: 12 };
        let cfg = DpConfig {
            total_mass: 4.0,
            iterations: 300,
            burnin: 0,
            ..Default::default()
        };
        let kept = run_chain(&mut model, &cfg).unwrap();
        for (_, s) in kept {
            let counts = s.counts();
            assert!(counts.iter().all(|&c| c > 0), "gap in labels: {counts:?}");
            assert_eq!(counts.iter().sum::<usize>(), 12);
        }
    }

    /// Two-atom parameter space with a tiny likelihood: everything is
    /// exactly enumerable, so the chain's stationary distribution can
    /// be compared to the true posterior.
    #[derive(Clone)]
    struct TwoPoint {
        data: Vec<f64>,
        atoms: [f64; 2],
    }

    impl TwoPoint {
        fn log_lik(&self, y: f64, atom: f64) -> f64 {
            // Gaussian likelihood with unit variance around the atom.
            -0.5 * (y - atom) * (y - atom)
        }
    }

    impl ClusterModel for TwoPoint {
        type Param = usize; // index into atoms
        fn n_obs(&self) -> usize {
            self.data.len()
        }
        fn draw_base(&mut self, rng: &mut dyn RngCore) -> usize {
            (rng.gen::<f64>() < 0.5) as usize
        }
        fn log_obs_density(&self, i: usize, p: &usize) -> f64 {
            self.log_lik(self.data[i], self.atoms[*p])
        }
        fn update_param(
            &mut self,
            members: &[usize],
            param: &mut usize,
            _adapt: bool,
            rng: &mut dyn RngCore,
        ) {
            // Exact Gibbs draw over the two atoms.
            let l0: f64 = members
                .iter()
                .map(|&i| self.log_lik(self.data[i], self.atoms[0]))
                .sum();
            let l1: f64 = members
                .iter()
                .map(|&i| self.log_lik(self.data[i], self.atoms[1]))
                .sum();
            let m = l0.max(l1);
            let p1 = (l1 - m).exp() / ((l0 - m).exp() + (l1 - m).exp());
            *param = (rng.gen::<f64>() < p1) as usize;
        }
    }

    /// All set partitions of {0,1,2} in first-appearance labeling.
    fn partitions3() -> Vec<Vec<usize>> {
        vec![
            vec![0, 0, 0],
            vec![0, 0, 1],
            vec![0, 1, 0],
            vec![0, 1, 1],
            vec![0, 1, 2],
        ]
    }

    fn crp_log_prior(z: &[usize], mass: f64) -> f64 {
        let mut counts: Vec<usize> = Vec::new();
        let mut lp = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            let denom = mass + i as f64;
            if zi == counts.len() {
                lp += (mass / denom).ln();
                counts.push(1);
            } else {
                lp += (counts[zi] as f64 / denom).ln();
                counts[zi] += 1;
            }
        }
        lp
    }

    fn two_point_total_variation(split_merge: bool, seed: u64) -> f64 {
        let model = TwoPoint {
            data: vec![-1.0, -0.8, 1.2],
            atoms: [-1.0, 1.0],
        };
        let mass = 1.0;

        // Enumerate the exact posterior over (partition, atom per
        // cluster).
        let mut states: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let mut logp: Vec<f64> = Vec::new();
        for z in partitions3() {
            let k = z.iter().max().unwrap() + 1;
            for code in 0..(1usize << k) {
                let atoms: Vec<usize> = (0..k).map(|m| (code >> m) & 1).collect();
                let mut lp = crp_log_prior(&z, mass) + (k as f64) * 0.5f64.ln();
                for (i, &zi) in z.iter().enumerate() {
                    lp += model.log_obs_density(i, &atoms[zi]);
                }
                states.push((z.clone(), atoms));
                logp.push(lp);
            }
        }
        let mx = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = logp.iter().map(|l| (l - mx).exp()).collect();
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();

        // Long chain, empirical state frequencies.
        let mut m = model.clone();
        let cfg = DpConfig {
            total_mass: mass,
            iterations: 60_000,
            burnin: 2_000,
            thinning: 1,
            param_steps: 1,
            split_merge,
            seed,
        };
        let kept = run_chain(&mut m, &cfg).unwrap();
        let mut freq = vec![0.0; states.len()];
        for (_, s) in &kept {
            let idx = states
                .iter()
                .position(|(z, a)| *z == s.assignments && *a == s.params)
                .expect("state not in enumeration");
            freq[idx] += 1.0;
        }
        let nk = kept.len() as f64;
        freq.iter()
            .zip(&probs)
            .map(|(f, p)| (f / nk - p).abs())
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn detailed_balance_two_point_enumeration() {
        let tv = two_point_total_variation(false, 11);
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn detailed_balance_two_point_with_split_merge() {
        let tv = two_point_total_variation(true, 13);
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn exchangeability_of_cluster_count_traces() {
        // Permuting rows must leave the n-trace distribution unchanged.
        let data = vec![-1.3, 0.2, 1.7, -0.5, 0.9, 2.2, -2.0, 0.0];
        let mut permuted = data.clone();
        permuted.reverse();
        let cfg = DpConfig {
            iterations: 4_000,
            burnin: 500,
            param_steps: 1,
            split_merge: false,
            seed: 19,
            ..Default::default()
        };
        let run = |d: Vec<f64>, seed: u64| {
            let mut m = TwoPoint {
                data: d,
                atoms: [-1.0, 1.0],
            };
            let c = DpConfig { seed, ..cfg };
            run_chain(&mut m, &c)
                .unwrap()
                .iter()
                .map(|(_, s)| s.n_clusters() as f64)
                .collect::<Vec<f64>>()
        };
        let a = run(data, 19);
        let b = run(permuted, 23);
        let p = stats::ks_two_sample_p(&a, &b);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_mass = DpConfig {
            total_mass: 0.0,
            ..Default::default()
        };
        assert!(bad_mass.validate().is_err());
        let bad_burnin = DpConfig {
            iterations: 10,
            burnin: 10,
            ..Default::default()
        };
        assert!(bad_burnin.validate().is_err());
    }
}
