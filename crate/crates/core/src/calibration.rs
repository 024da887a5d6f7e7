//! Covariate-to-parameter calibration: a calibration function eta maps
//! covariates to a linear predictor, an inverse link turns it into a
//! valid copula parameter for the edge family.

use crate::copula::{CopulaParam, Family};
use crate::error::{Error, Result};
use crate::vine::{VineParams, VineSpec};
use serde::{Deserialize, Serialize};

/// Saturation cap applied to exp-based links on overflow.
pub const THETA_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    /// eta = b0 + sum_h b_h x_h; q = p + 1 coefficients per edge.
    Linear,
    /// eta = b0 + b1 x + b2 exp(-b3 x); single covariate, q = 4.
    LinearPlusExp,
}

impl CalibrationKind {
    /// Coefficients per edge for covariate dimension p.
    pub fn coefficient_count(&self, covariate_dim: usize) -> Result<usize> {
        match self {
            CalibrationKind::Linear => Ok(covariate_dim + 1),
            CalibrationKind::LinearPlusExp => {
                if covariate_dim != 1 {
                    Err(Error::Config(
                        "the linear-plus-exponential calibration supports exactly one covariate"
                            .into(),
                    ))
                } else {
                    Ok(4)
                }
            }
        }
    }
}

/// Inverse link from the calibration value to the edge parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// rho = tanh(eta), for Gaussian edges.
    FisherGaussian,
    /// theta = exp(eta), for Clayton edges.
    ExpClayton,
    /// theta = 1 + exp(eta), for Gumbel edges.
    OnePlusExpGumbel,
    /// theta = eta, for Frank edges (|eta| < 1e-6 collapses to
    /// independence inside the kernel).
    IdentityFrank,
    /// Always the independence copula.
    Independence,
}

impl Link {
    /// The natural link for each family.
    pub fn for_family(family: Family) -> Link {
        match family {
            Family::Gaussian => Link::FisherGaussian,
            Family::Clayton => Link::ExpClayton,
            Family::Gumbel => Link::OnePlusExpGumbel,
            Family::Frank => Link::IdentityFrank,
            Family::Independence => Link::Independence,
        }
    }

    pub fn compatible_with(&self, family: Family) -> bool {
        matches!(
            (self, family),
            (Link::FisherGaussian, Family::Gaussian)
                | (Link::ExpClayton, Family::Clayton)
                | (Link::OnePlusExpGumbel, Family::Gumbel)
                | (Link::IdentityFrank, Family::Frank)
                | (Link::Independence, Family::Independence)
        )
    }
}

/// Result of an inverse-link evaluation; `saturated` flags an exp
/// overflow clipped at `THETA_CAP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkedParam {
    pub param: CopulaParam,
    pub saturated: bool,
}

/// Calibration value eta(x | beta).
pub fn eta(kind: CalibrationKind, beta: &[f64], x: &[f64]) -> Result<f64> {
    let q = kind.coefficient_count(x.len())?;
    if beta.len() != q {
        return Err(Error::Dimension(format!(
            "calibration expects {q} coefficients, got {}",
            beta.len()
        )));
    }
    Ok(match kind {
        CalibrationKind::Linear => {
            beta[0] + beta[1..].iter().zip(x).map(|(b, xv)| b * xv).sum::<f64>()
        }
        CalibrationKind::LinearPlusExp => {
            beta[0] + beta[1] * x[0] + beta[2] * (-beta[3] * x[0]).exp()
        }
    })
}

/// Map a calibration value to a copula parameter through the link.
pub fn edge_param(link: Link, eta_value: f64) -> LinkedParam {
    let (theta, saturated) = match link {
        // tanh saturates to exactly +-1 in floating point for large
        // |eta|; keep rho strictly inside (-1, 1).
        Link::FisherGaussian => (eta_value.tanh().clamp(-(1.0 - 1e-12), 1.0 - 1e-12), false),
        Link::ExpClayton => {
            let t = eta_value.exp();
            if t > THETA_CAP {
                (THETA_CAP, true)
            } else {
                (t.max(f64::MIN_POSITIVE), false)
            }
        }
        Link::OnePlusExpGumbel => {
            let t = eta_value.exp();
            if t > THETA_CAP {
                (1.0 + THETA_CAP, true)
            } else {
                (1.0 + t, false)
            }
        }
        Link::IdentityFrank => (eta_value, false),
        Link::Independence => (0.0, false),
    };
    LinkedParam {
        param: CopulaParam::new(theta),
        saturated,
    }
}

/// Per-edge calibration layout: kind, coefficients and link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCalibration {
    pub kind: CalibrationKind,
    pub link: Link,
}

/// The full edge layout for a vine: one calibration per edge, aligned
/// with `VineSpec::families`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineCalibration {
    pub edges: Vec<EdgeCalibration>,
    pub covariate_dim: usize,
}

impl VineCalibration {
    /// One calibration kind, links chosen per edge family.
    pub fn for_spec(spec: &VineSpec, kind: CalibrationKind, covariate_dim: usize) -> Result<Self> {
        kind.coefficient_count(covariate_dim)?;
        let edges = spec
            .families
            .iter()
            .map(|f| EdgeCalibration {
                kind,
                link: Link::for_family(f.family),
            })
            .collect();
        Ok(VineCalibration {
            edges,
            covariate_dim,
        })
    }

    pub fn coefficient_count(&self) -> usize {
        self.edges
            .iter()
            .map(|e| e.kind.coefficient_count(self.covariate_dim).unwrap_or(0))
            .sum()
    }

    pub fn per_edge_counts(&self) -> Vec<usize> {
        self.edges
            .iter()
            .map(|e| e.kind.coefficient_count(self.covariate_dim).unwrap_or(0))
            .collect()
    }

    pub fn validate(&self, spec: &VineSpec) -> Result<()> {
        if self.edges.len() != spec.edge_count() {
            return Err(Error::Dimension(format!(
                "calibration covers {} edges, vine has {}",
                self.edges.len(),
                spec.edge_count()
            )));
        }
        for (edge, fam) in self.edges.iter().zip(&spec.families) {
            if !edge.link.compatible_with(fam.family) {
                return Err(Error::Config(format!(
                    "link {:?} is not compatible with family {}",
                    edge.link,
                    fam.family.name()
                )));
            }
        }
        Ok(())
    }
}

/// Apply eta and the inverse link edge by edge, producing the vine
/// parameters at covariate value `x`.
pub fn vine_params_at(
    calib: &VineCalibration,
    betas: &[Vec<f64>],
    x: &[f64],
) -> Result<VineParams> {
    if betas.len() != calib.edges.len() {
        return Err(Error::Dimension(format!(
            "expected {} coefficient blocks, got {}",
            calib.edges.len(),
            betas.len()
        )));
    }
    let mut out = Vec::with_capacity(betas.len());
    for (edge, beta) in calib.edges.iter().zip(betas) {
        let e = eta(edge.kind, beta, x)?;
        out.push(edge_param(edge.link, e).param);
    }
    Ok(VineParams(out))
}
