//! D-vine and C-vine construction: joint copula density via the
//! pair-copula product, the recursive conditional cdf tables, and
//! forward simulation by inverse conditional sampling.

use crate::copula::{CopulaParam, PairCopula, UPair};
use crate::error::{Error, Result};
use crate::numeric::clamp_unit;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VineKind {
    D,
    C,
}

/// Tree structure plus the per-edge family layout.
///
/// Edges are stored tree by tree: for tree level `l` (1-based) the
/// D-vine edge `k` joins variables `(k, k+l)` given `k+1..k+l-1`, the
/// C-vine edge `k` joins `(l, l+k)` given `1..l-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineSpec {
    pub dimension: usize,
    pub kind: VineKind,
    pub families: Vec<PairCopula>,
}

impl VineSpec {
    pub fn new(dimension: usize, kind: VineKind, families: Vec<PairCopula>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Dimension(format!(
                "vine dimension must be at least 2, got {dimension}"
            )));
        }
        let expected = dimension * (dimension - 1) / 2;
        if families.len() != expected {
            return Err(Error::Dimension(format!(
                "vine of dimension {dimension} needs {expected} edges, got {}",
                families.len()
            )));
        }
        Ok(VineSpec {
            dimension,
            kind,
            families,
        })
    }

    /// Same family on every edge.
    pub fn homogeneous(dimension: usize, kind: VineKind, family: PairCopula) -> Result<Self> {
        let n = dimension * (dimension - 1) / 2;
        VineSpec::new(dimension, kind, vec![family; n])
    }

    pub fn edge_count(&self) -> usize {
        self.families.len()
    }

    /// Flat index of edge (tree, index), both 1-based.
    pub fn edge_offset(&self, tree: usize, index: usize) -> usize {
        let d = self.dimension;
        debug_assert!(tree >= 1 && tree < d && index >= 1 && index <= d - tree);
        (1..tree).map(|j| d - j).sum::<usize>() + (index - 1)
    }

    pub fn edge(&self, tree: usize, index: usize) -> PairCopula {
        self.families[self.edge_offset(tree, index)]
    }
}

/// Per-edge parameter values, aligned with `VineSpec::families`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineParams(pub Vec<CopulaParam>);

impl VineParams {
    pub fn validate(&self, spec: &VineSpec) -> Result<()> {
        if self.0.len() != spec.edge_count() {
            return Err(Error::Dimension(format!(
                "expected {} edge parameters, got {}",
                spec.edge_count(),
                self.0.len()
            )));
        }
        for (fam, par) in spec.families.iter().zip(&self.0) {
            fam.validate_param(*par)?;
        }
        Ok(())
    }
}

/// One conditional cdf entry: F(variable | given).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCdf {
    pub variable: usize,
    pub given: Vec<usize>,
    pub value: f64,
}

/// All intermediate conditional cdfs produced while evaluating the
/// pair-copula product at one observation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionalCdfs {
    pub entries: Vec<ConditionalCdf>,
}

impl ConditionalCdfs {
    pub fn lookup(&self, variable: usize, given: &[usize]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.variable == variable && e.given == given)
            .map(|e| e.value)
    }
}

/// Log of the vine copula density at `u`.
pub fn log_density(spec: &VineSpec, params: &VineParams, u: &[f64]) -> Result<f64> {
    Ok(evaluate(spec, params, u)?.0)
}

/// The conditional cdf table at `u` (the h-function values the density
/// recursion passes between trees).
pub fn conditional_cdfs(
    spec: &VineSpec,
    params: &VineParams,
    u: &[f64],
) -> Result<ConditionalCdfs> {
    Ok(evaluate(spec, params, u)?.1)
}

/// Evaluate the pair-copula product tree by tree, returning both the
/// log density and every intermediate conditional cdf.
pub fn evaluate(
    spec: &VineSpec,
    params: &VineParams,
    u: &[f64],
) -> Result<(f64, ConditionalCdfs)> {
    params.validate(spec)?;
    let d = spec.dimension;
    if u.len() != d {
        return Err(Error::Dimension(format!(
            "observation has {} entries, vine dimension is {d}",
            u.len()
        )));
    }
    let u: Vec<f64> = u.iter().map(|&x| clamp_unit(x)).collect();
    match spec.kind {
        VineKind::D => evaluate_dvine(spec, params, &u),
        VineKind::C => evaluate_cvine(spec, params, &u),
    }
}

fn evaluate_dvine(
    spec: &VineSpec,
    params: &VineParams,
    u: &[f64],
) -> Result<(f64, ConditionalCdfs)> {
    let d = spec.dimension;
    // a[l][k] = F(k | k+1..k+l), b[l][k] = F(k+l | k..k+l-1); 1-based
    // variables, a[0][k] = b[0][k] = u_k.
    let mut a = vec![vec![0.0; d + 1]; d];
    let mut b = vec![vec![0.0; d + 1]; d];
    for k in 1..=d {
        a[0][k] = u[k - 1];
        b[0][k] = u[k - 1];
    }
    let mut logdens = 0.0;
    let mut table = ConditionalCdfs::default();
    for l in 1..d {
        for k in 1..=(d - l) {
            let fam = spec.edge(l, k);
            let par = params.0[spec.edge_offset(l, k)];
            let arg = UPair {
                u: a[l - 1][k],
                v: b[l - 1][k + 1],
            };
            logdens += fam.log_density(par, arg)?;
            a[l][k] = clamp_unit(fam.h_function(par, arg)?);
            b[l][k] = clamp_unit(fam.h_function_2(par, arg)?);
            let cond: Vec<usize> = (k + 1..=k + l - 1).collect();
            table.entries.push(ConditionalCdf {
                variable: k,
                given: {
                    let mut g = cond.clone();
                    g.push(k + l);
                    g
                },
                value: a[l][k],
            });
            table.entries.push(ConditionalCdf {
                variable: k + l,
                given: {
                    let mut g = vec![k];
                    g.extend(cond);
                    g
                },
                value: b[l][k],
            });
        }
    }
    Ok((logdens, table))
}

fn evaluate_cvine(
    spec: &VineSpec,
    params: &VineParams,
    u: &[f64],
) -> Result<(f64, ConditionalCdfs)> {
    let d = spec.dimension;
    // w[l][j] = F(j | 1..l-1); w[1][j] = u_j.
    let mut w = vec![vec![0.0; d + 1]; d + 1];
    for j in 1..=d {
        w[1][j] = u[j - 1];
    }
    let mut logdens = 0.0;
    let mut table = ConditionalCdfs::default();
    for l in 1..d {
        for k in 1..=(d - l) {
            let fam = spec.edge(l, k);
            let par = params.0[spec.edge_offset(l, k)];
            let arg = UPair {
                u: w[l][l],
                v: w[l][l + k],
            };
            logdens += fam.log_density(par, arg)?;
            w[l + 1][l + k] = clamp_unit(fam.h_function_2(par, arg)?);
            table.entries.push(ConditionalCdf {
                variable: l + k,
                given: (1..=l).collect(),
                value: w[l + 1][l + k],
            });
        }
    }
    Ok((logdens, table))
}

/// Simulate `n` rows from the vine by inverse conditional sampling.
pub fn simulate<R: Rng + ?Sized>(
    spec: &VineSpec,
    params: &VineParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    params.validate(spec)?;
    let d = spec.dimension;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let w: Vec<f64> = (0..d).map(|_| clamp_unit(rng.gen::<f64>())).collect();
        out.push(simulate_row(spec, params, &w)?);
    }
    Ok(out)
}

/// Deterministic inverse-Rosenblatt map from a vector of independent
/// uniforms to one vine sample.
pub fn simulate_row(spec: &VineSpec, params: &VineParams, w: &[f64]) -> Result<Vec<f64>> {
    let d = spec.dimension;
    if w.len() != d {
        return Err(Error::Dimension(format!(
            "need {d} uniforms, got {}",
            w.len()
        )));
    }
    let mut u = vec![0.0; d];
    u[0] = clamp_unit(w[0]);
    for i in 2..=d {
        let mut t = clamp_unit(w[i - 1]);
        match spec.kind {
            VineKind::D => {
                // Conditioning values F(k | k+1..i-1) from the prefix.
                let a = dvine_a_table(spec, params, &u[..i - 1])?;
                for k in 1..=(i - 1) {
                    let cond = a[i - 1 - k][k];
                    let fam = spec.edge(i - k, k);
                    let par = params.0[spec.edge_offset(i - k, k)];
                    t = fam.h_inverse_2(par, t, cond)?;
                }
            }
            VineKind::C => {
                let wt = cvine_w_table(spec, params, &u[..i - 1])?;
                for l in (1..=(i - 1)).rev() {
                    let cond = wt[l][l];
                    let fam = spec.edge(l, i - l);
                    let par = params.0[spec.edge_offset(l, i - l)];
                    t = fam.h_inverse_2(par, t, cond)?;
                }
            }
        }
        u[i - 1] = clamp_unit(t);
    }
    Ok(u)
}

/// a[l][k] = F(k | k+1..k+l) over a prefix of variables.
fn dvine_a_table(spec: &VineSpec, params: &VineParams, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = u.len();
    let d = spec.dimension;
    let mut a = vec![vec![0.0; d + 1]; d];
    let mut b = vec![vec![0.0; d + 1]; d];
    for k in 1..=m {
        a[0][k] = u[k - 1];
        b[0][k] = u[k - 1];
    }
    for l in 1..m {
        for k in 1..=(m - l) {
            let fam = spec.edge(l, k);
            let par = params.0[spec.edge_offset(l, k)];
            let arg = UPair {
                u: a[l - 1][k],
                v: b[l - 1][k + 1],
            };
            a[l][k] = clamp_unit(fam.h_function(par, arg)?);
            b[l][k] = clamp_unit(fam.h_function_2(par, arg)?);
        }
    }
    Ok(a)
}

/// w[l][j] = F(j | 1..l-1) over a prefix of variables.
fn cvine_w_table(spec: &VineSpec, params: &VineParams, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = u.len();
    let d = spec.dimension;
    let mut w = vec![vec![0.0; d + 1]; d + 1];
    for j in 1..=m {
        w[1][j] = u[j - 1];
    }
    for l in 1..m {
        for k in 1..=(m - l) {
            let fam = spec.edge(l, k);
            let par = params.0[spec.edge_offset(l, k)];
            let arg = UPair {
                u: w[l][l],
                v: w[l][l + k],
            };
            w[l + 1][l + k] = clamp_unit(fam.h_function_2(par, arg)?);
        }
    }
    Ok(w)
}
