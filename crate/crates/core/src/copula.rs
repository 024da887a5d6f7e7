//! Bivariate copula kernels: density, cdf, both conditional cdfs
//! (h-functions), their inverses, pair simulation and analytic Kendall
//! tau. These are the building blocks placed on every vine edge.
//!
//! Rotations are implemented by argument reflection. With `(U, V)`
//! distributed as the base copula, the rotated samples are
//! 90: (1-U, V), 180: (1-U, 1-V), 270: (U, 1-V); densities, cdfs and
//! h-functions follow from those maps.

use crate::error::{Error, Result};
use crate::numeric::{clamp_unit, integrate_gl64, norm_cdf, norm_quantile};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Frank parameters inside this band are evaluated as Independence:
/// the closed form is unstable near zero.
pub const FRANK_INDEP_EPS: f64 = 1e-6;

const BISECT_MAX_ITER: usize = 200;
const BISECT_LO: f64 = 1e-12;
const BISECT_HI: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
    Independence,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "Gaussian",
            Family::Clayton => "Clayton",
            Family::Gumbel => "Gumbel",
            Family::Frank => "Frank",
            Family::Independence => "Independence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    #[default]
    None,
    Deg90,
    Deg180,
    Deg270,
}

impl Rotation {
    pub fn degrees(&self) -> u16 {
        match self {
            Rotation::None => 0,
            Rotation::Deg90 => 90,
            Rotation::Deg180 => 180,
            Rotation::Deg270 => 270,
        }
    }
}

/// A copula family tag together with its rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCopula {
    pub family: Family,
    pub rotation: Rotation,
}

/// Scalar family parameter (rho for Gaussian, theta for Archimedean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaParam {
    pub theta: f64,
}

impl CopulaParam {
    pub fn new(theta: f64) -> Self {
        CopulaParam { theta }
    }
}

/// A point strictly inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UPair {
    pub u: f64,
    pub v: f64,
}

impl UPair {
    /// Clamps both coordinates into the open unit interval.
    pub fn new(u: f64, v: f64) -> Self {
        UPair {
            u: clamp_unit(u),
            v: clamp_unit(v),
        }
    }
}

impl PairCopula {
    pub fn new(family: Family, rotation: Rotation) -> Result<Self> {
        if rotation != Rotation::None && !matches!(family, Family::Clayton | Family::Gumbel) {
            return Err(Error::InvalidRotation {
                degrees: rotation.degrees(),
            });
        }
        Ok(PairCopula { family, rotation })
    }

    pub fn unrotated(family: Family) -> Self {
        PairCopula {
            family,
            rotation: Rotation::None,
        }
    }

    pub fn validate_param(&self, par: CopulaParam) -> Result<()> {
        let theta = par.theta;
        let ok = match self.family {
            Family::Gaussian => theta > -1.0 && theta < 1.0,
            Family::Clayton => theta > 0.0,
            Family::Gumbel => theta >= 1.0,
            Family::Frank => theta.is_finite(),
            Family::Independence => true,
        };
        if ok && theta.is_finite() {
            Ok(())
        } else {
            Err(Error::ParameterDomain {
                family: self.family.name().to_string(),
                value: theta,
            })
        }
    }

    /// Copula density c(u, v; theta).
    pub fn density(&self, par: CopulaParam, p: UPair) -> Result<f64> {
        Ok(self.log_density(par, p)?.exp())
    }

    /// Log copula density.
    pub fn log_density(&self, par: CopulaParam, p: UPair) -> Result<f64> {
        self.validate_param(par)?;
        let (u, v) = self.reflect(p.u, p.v);
        Ok(base_log_density(self.family, par.theta, u, v))
    }

    /// Copula cdf C(u, v; theta).
    pub fn cdf(&self, par: CopulaParam, p: UPair) -> Result<f64> {
        self.validate_param(par)?;
        let (u, v) = (p.u, p.v);
        let value = match self.rotation {
            Rotation::None => base_cdf(self.family, par.theta, u, v),
            Rotation::Deg90 => v - base_cdf(self.family, par.theta, 1.0 - u, v),
            Rotation::Deg180 => u + v - 1.0 + base_cdf(self.family, par.theta, 1.0 - u, 1.0 - v),
            Rotation::Deg270 => u - base_cdf(self.family, par.theta, u, 1.0 - v),
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Conditional cdf of the first argument given the second:
    /// h(u | v) = dC(u, v)/dv.
    pub fn h_function(&self, par: CopulaParam, p: UPair) -> Result<f64> {
        self.validate_param(par)?;
        let (u, v) = (p.u, p.v);
        let value = match self.rotation {
            Rotation::None => base_h(self.family, par.theta, u, v),
            Rotation::Deg90 => 1.0 - base_h(self.family, par.theta, 1.0 - u, v),
            Rotation::Deg180 => 1.0 - base_h(self.family, par.theta, 1.0 - u, 1.0 - v),
            Rotation::Deg270 => base_h(self.family, par.theta, u, 1.0 - v),
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Conditional cdf of the second argument given the first:
    /// dC(u, v)/du. Base families are exchangeable, so this reduces to
    /// `h_function` with reflected arguments.
    pub fn h_function_2(&self, par: CopulaParam, p: UPair) -> Result<f64> {
        self.validate_param(par)?;
        let (u, v) = (p.u, p.v);
        let value = match self.rotation {
            Rotation::None => base_h(self.family, par.theta, v, u),
            Rotation::Deg90 => base_h(self.family, par.theta, v, 1.0 - u),
            Rotation::Deg180 => 1.0 - base_h(self.family, par.theta, 1.0 - v, 1.0 - u),
            Rotation::Deg270 => 1.0 - base_h(self.family, par.theta, 1.0 - v, u),
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Inverse of `h_function` in its first argument: the u with
    /// h(u | v) = w.
    pub fn h_inverse(&self, par: CopulaParam, w: f64, v: f64) -> Result<f64> {
        self.validate_param(par)?;
        let w = clamp_unit(w);
        let v = clamp_unit(v);
        match self.rotation {
            Rotation::None => base_h_inverse(self.family, par.theta, w, v),
            Rotation::Deg90 => {
                Ok(1.0 - base_h_inverse(self.family, par.theta, 1.0 - w, v)?)
            }
            Rotation::Deg180 => {
                Ok(1.0 - base_h_inverse(self.family, par.theta, 1.0 - w, 1.0 - v)?)
            }
            Rotation::Deg270 => base_h_inverse(self.family, par.theta, w, 1.0 - v),
        }
        .map(clamp_unit)
    }

    /// Inverse of `h_function_2` in the second argument: the v with
    /// dC/du (u, v) = w.
    pub fn h_inverse_2(&self, par: CopulaParam, w: f64, u: f64) -> Result<f64> {
        self.validate_param(par)?;
        let w = clamp_unit(w);
        let u = clamp_unit(u);
        match self.rotation {
            Rotation::None => base_h_inverse(self.family, par.theta, w, u),
            Rotation::Deg90 => base_h_inverse(self.family, par.theta, w, 1.0 - u),
            Rotation::Deg180 => {
                Ok(1.0 - base_h_inverse(self.family, par.theta, 1.0 - w, 1.0 - u)?)
            }
            Rotation::Deg270 => Ok(1.0 - base_h_inverse(self.family, par.theta, 1.0 - w, u)?),
        }
        .map(clamp_unit)
    }

    /// Draw one pair from the copula: u uniform, then v via the inverse
    /// conditional cdf.
    pub fn sample_pair<R: Rng + ?Sized>(&self, par: CopulaParam, rng: &mut R) -> Result<UPair> {
        let u = clamp_unit(rng.gen::<f64>());
        let w = clamp_unit(rng.gen::<f64>());
        let v = self.h_inverse_2(par, w, u)?;
        Ok(UPair { u, v })
    }

    /// Analytic Kendall tau of the (rotated) copula.
    pub fn tau(&self, par: CopulaParam) -> Result<f64> {
        self.validate_param(par)?;
        let theta = par.theta;
        let base = match self.family {
            Family::Independence => 0.0,
            Family::Gaussian => 2.0 / std::f64::consts::PI * theta.asin(),
            Family::Clayton => theta / (theta + 2.0),
            Family::Gumbel => 1.0 - 1.0 / theta,
            Family::Frank => {
                if theta.abs() < FRANK_INDEP_EPS {
                    0.0
                } else {
                    // 1 - 4/theta (1 - D1(theta)) with the Debye function
                    // D1 evaluated by quadrature.
                    let d1 = integrate_gl64(|t| t / t.exp_m1(), 0.0, theta.abs()) / theta.abs();
                    let t = 1.0 - 4.0 / theta.abs() * (1.0 - d1);
                    t * theta.signum()
                }
            }
        };
        Ok(match self.rotation {
            Rotation::None | Rotation::Deg180 => base,
            Rotation::Deg90 | Rotation::Deg270 => -base,
        })
    }
}

fn base_log_density(family: Family, theta: f64, u: f64, v: f64) -> f64 {
    match family {
        Family::Independence => 0.0,
        Family::Gaussian => {
            let r = theta;
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            let omr2 = 1.0 - r * r;
            -0.5 * omr2.ln() - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * omr2)
        }
        Family::Clayton => {
            let ln_s = clayton_ln_s(theta, u, v);
            (1.0 + theta).ln() - (1.0 + theta) * (u.ln() + v.ln()) - (2.0 + 1.0 / theta) * ln_s
        }
        Family::Gumbel => {
            let xt = -u.ln();
            let yt = -v.ln();
            let ln_s = gumbel_ln_s(theta, xt, yt);
            let t = (ln_s / theta).exp();
            -t + (theta - 1.0) * (xt.ln() + yt.ln()) - u.ln() - v.ln()
                + (2.0 / theta - 2.0) * ln_s
                + (1.0 + (theta - 1.0) / t).ln()
        }
        Family::Frank => {
            if theta.abs() < FRANK_INDEP_EPS {
                return 0.0;
            }
            let g1 = (-theta).exp_m1();
            let gu = (-theta * u).exp_m1();
            let gv = (-theta * v).exp_m1();
            let denom = g1 + gu * gv;
            (-theta * g1).ln() - theta * (u + v) - 2.0 * denom.abs().ln()
        }
    }
}

fn base_cdf(family: Family, theta: f64, u: f64, v: f64) -> f64 {
    let u = clamp_unit(u);
    let v = clamp_unit(v);
    match family {
        Family::Independence => u * v,
        Family::Gaussian => {
            // Phi2(x, y; rho) = Phi(x)Phi(y) + integral over the
            // correlation of the bivariate normal density.
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            let base = u * v;
            let integral = integrate_gl64(
                |r| {
                    let omr2 = 1.0 - r * r;
                    (-(x * x - 2.0 * r * x * y + y * y) / (2.0 * omr2)).exp() / omr2.sqrt()
                },
                0.0,
                theta,
            ) / (2.0 * std::f64::consts::PI);
            base + integral
        }
        Family::Clayton => (-clayton_ln_s(theta, u, v) / theta).exp(),
        Family::Gumbel => {
            let ln_s = gumbel_ln_s(theta, -u.ln(), -v.ln());
            (-(ln_s / theta).exp()).exp()
        }
        Family::Frank => {
            if theta.abs() < FRANK_INDEP_EPS {
                return u * v;
            }
            let g1 = (-theta).exp_m1();
            let gu = (-theta * u).exp_m1();
            let gv = (-theta * v).exp_m1();
            -(1.0 + gu * gv / g1).ln() / theta
        }
    }
}

fn base_h(family: Family, theta: f64, u: f64, v: f64) -> f64 {
    let u = clamp_unit(u);
    let v = clamp_unit(v);
    match family {
        Family::Independence => u,
        Family::Gaussian => {
            let r = theta;
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            norm_cdf((x - r * y) / (1.0 - r * r).sqrt())
        }
        Family::Clayton => {
            let ln_s = clayton_ln_s(theta, u, v);
            ((-theta - 1.0) * v.ln() + (-1.0 - 1.0 / theta) * ln_s).exp()
        }
        Family::Gumbel => {
            let xt = -u.ln();
            let yt = -v.ln();
            let ln_s = gumbel_ln_s(theta, xt, yt);
            let t = (ln_s / theta).exp();
            (-t + (1.0 / theta - 1.0) * ln_s + (theta - 1.0) * yt.ln() - v.ln()).exp()
        }
        Family::Frank => {
            if theta.abs() < FRANK_INDEP_EPS {
                return u;
            }
            let g1 = (-theta).exp_m1();
            let gu = (-theta * u).exp_m1();
            let gv = (-theta * v).exp_m1();
            (-theta * v).exp() * gu / (g1 + gu * gv)
        }
    }
}

fn base_h_inverse(family: Family, theta: f64, w: f64, v: f64) -> Result<f64> {
    match family {
        Family::Independence => Ok(w),
        Family::Gaussian => {
            let r = theta;
            let y = norm_quantile(v);
            let x = norm_quantile(w) * (1.0 - r * r).sqrt() + r * y;
            Ok(clamp_unit(norm_cdf(x)))
        }
        Family::Clayton => {
            // Closed form, evaluated in logs to survive large theta.
            let b = -theta * v.ln();
            let ln_s = -theta / (theta + 1.0) * (w.ln() + (theta + 1.0) * v.ln());
            let m = ln_s.max(b).max(0.0);
            let val = (ln_s - m).exp() - (b - m).exp() + (-m).exp();
            if val <= 0.0 {
                // u^-theta collapsed to zero in floating point; the
                // solution is at the upper clamp boundary.
                return Ok(1.0 - crate::numeric::U_EPS);
            }
            Ok(clamp_unit((-(m + val.ln()) / theta).exp()))
        }
        Family::Gumbel | Family::Frank => bisect_h(family, theta, w, v),
    }
}

/// Safeguarded bisection on u -> h(u | v), used where no closed inverse
/// exists.
fn bisect_h(family: Family, theta: f64, w: f64, v: f64) -> Result<f64> {
    let mut lo = BISECT_LO;
    let mut hi = BISECT_HI;
    let f = |u: f64| base_h(family, theta, u, v) - w;
    let flo = f(lo);
    let fhi = f(hi);
    if flo >= 0.0 {
        return Ok(lo);
    }
    if fhi <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < 1e-12 || (hi - lo) < 1e-14 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (f(mid)).abs() < 1e-10 {
        Ok(mid)
    } else {
        Err(Error::numeric(
            format!("h_inverse[{}]", family.name()),
            format!(
                "bisection did not converge: theta={theta}, w={w}, v={v}, residual={}",
                f(mid)
            ),
        ))
    }
}

/// ln(u^-theta + v^-theta - 1) without overflow.
fn clayton_ln_s(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b).max(0.0);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

/// ln((-ln u)^theta + (-ln v)^theta) for positive xt = -ln u, yt = -ln v.
fn gumbel_ln_s(theta: f64, xt: f64, yt: f64) -> f64 {
    let a = theta * xt.ln();
    let b = theta * yt.ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl PairCopula {
    /// Map a point of the rotated copula onto base-copula coordinates
    /// for density evaluation.
    fn reflect(&self, u: f64, v: f64) -> (f64, f64) {
        match self.rotation {
            Rotation::None => (u, v),
            Rotation::Deg90 => (1.0 - u, v),
            Rotation::Deg180 => (1.0 - u, 1.0 - v),
            Rotation::Deg270 => (u, 1.0 - v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::norm_pdf;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cop(f: Family) -> PairCopula {
        PairCopula::unrotated(f)
    }

    #[test]
    fn gaussian_zero_rho_is_independence() {
        let c = cop(Family::Gaussian);
        let d = c
            .density(CopulaParam::new(0.0), UPair::new(0.3, 0.8))
            .unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-12);
        let h = c
            .h_function(CopulaParam::new(0.0), UPair::new(0.7, 0.2))
            .unwrap();
        assert_abs_diff_eq!(h, 0.7, epsilon = 1e-12);
        let u = c.h_inverse(CopulaParam::new(0.0), 0.25, 0.9).unwrap();
        assert_abs_diff_eq!(u, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_density_matches_bivariate_normal_composition() {
        // Oracle: bivariate normal density at the quantiles divided by
        // the two marginal densities.
        let rho = 0.5;
        let (u, v) = (0.5, 0.5);
        let x = norm_quantile(u);
        let y = norm_quantile(v);
        let omr2: f64 = 1.0 - rho * rho;
        let joint = (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * omr2)).exp()
            / (2.0 * std::f64::consts::PI * omr2.sqrt());
        let oracle = joint / (norm_pdf(x) * norm_pdf(y));
        let d = cop(Family::Gaussian)
            .density(CopulaParam::new(rho), UPair::new(u, v))
            .unwrap();
        assert_abs_diff_eq!(d, oracle, epsilon = 1e-12);
    }

    #[test]
    fn clayton_small_theta_near_independence() {
        let d = cop(Family::Clayton)
            .density(CopulaParam::new(1e-8), UPair::new(0.5, 0.5))
            .unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn clayton_theta_1em6_uniform_on_interior() {
        let c = cop(Family::Clayton);
        for i in 1..10 {
            for j in 1..10 {
                let p = UPair::new(i as f64 / 10.0, j as f64 / 10.0);
                let d = c.density(CopulaParam::new(1e-6), p).unwrap();
                assert!((d - 1.0).abs() < 1e-3, "d={d} at {p:?}");
            }
        }
    }

    #[test]
    fn h_boundary_approaches_one() {
        for f in [
            Family::Gaussian,
            Family::Clayton,
            Family::Gumbel,
            Family::Frank,
        ] {
            let theta = match f {
                Family::Gaussian => 0.4,
                Family::Clayton => 2.0,
                Family::Gumbel => 1.7,
                _ => 3.0,
            };
            let h = cop(f)
                .h_function(CopulaParam::new(theta), UPair::new(1.0 - 1e-12, 0.4))
                .unwrap();
            assert!(h > 1.0 - 1e-6, "{f:?}: {h}");
        }
    }

    #[test]
    fn clayton_h_matches_finite_difference() {
        let c = cop(Family::Clayton);
        let par = CopulaParam::new(2.0);
        let (u, v) = (0.4, 0.6);
        let step = 1e-6;
        let fd = (c.cdf(par, UPair::new(u, v + step)).unwrap()
            - c.cdf(par, UPair::new(u, v - step)).unwrap())
            / (2.0 * step);
        let h = c.h_function(par, UPair::new(u, v)).unwrap();
        assert!((h - fd).abs() <= 1e-5, "h={h} fd={fd}");
    }

    #[test]
    fn gumbel_h_inverse_matches_reference_bisection() {
        // Oracle: plain bisection on h to 1e-12.
        let c = cop(Family::Gumbel);
        let par = CopulaParam::new(1.5);
        let (w, v) = (0.5, 0.5);
        let mut lo = 1e-12;
        let mut hi = 1.0 - 1e-12;
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if c.h_function(par, UPair::new(mid, v)).unwrap() < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let got = c.h_inverse(par, w, v).unwrap();
        assert!((got - oracle).abs() < 1e-10);
    }

    #[test]
    fn h_inverse_round_trip_all_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases = [
            (Family::Gaussian, 0.6),
            (Family::Gaussian, -0.8),
            (Family::Clayton, 3.0),
            (Family::Gumbel, 2.2),
            (Family::Frank, 5.0),
            (Family::Frank, -4.0),
            (Family::Independence, 0.0),
        ];
        for (f, theta) in cases {
            let c = cop(f);
            let par = CopulaParam::new(theta);
            for _ in 0..1000 {
                let u = clamp_unit(rng.gen::<f64>());
                let v = clamp_unit(rng.gen::<f64>());
                let w = c.h_function(par, UPair::new(u, v)).unwrap();
                if w < 1e-9 || w > 1.0 - 1e-9 {
                    continue; // inverse information destroyed by clamping
                }
                let back = c.h_inverse(par, w, v).unwrap();
                assert!(
                    (back - u).abs() < 1e-8,
                    "{f:?} theta={theta}: u={u} v={v} back={back}"
                );
            }
        }
    }

    #[test]
    fn rotation_180_reflects_density() {
        for f in [Family::Clayton, Family::Gumbel] {
            let theta = if f == Family::Clayton { 2.5 } else { 1.8 };
            let base = cop(f);
            let rot = PairCopula::new(f, Rotation::Deg180).unwrap();
            let par = CopulaParam::new(theta);
            for (u, v) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
                let a = rot.density(par, UPair::new(u, v)).unwrap();
                let b = base.density(par, UPair::new(1.0 - u, 1.0 - v)).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rotation_rejected_for_non_archimedean() {
        assert!(PairCopula::new(Family::Gaussian, Rotation::Deg90).is_err());
        assert!(PairCopula::new(Family::Frank, Rotation::Deg180).is_err());
        assert!(PairCopula::new(Family::Clayton, Rotation::Deg270).is_ok());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(cop(Family::Gaussian)
            .density(CopulaParam::new(1.0), UPair::new(0.5, 0.5))
            .is_err());
        assert!(cop(Family::Clayton)
            .density(CopulaParam::new(-0.5), UPair::new(0.5, 0.5))
            .is_err());
        assert!(cop(Family::Gumbel)
            .density(CopulaParam::new(0.9), UPair::new(0.5, 0.5))
            .is_err());
    }

    #[test]
    fn sample_pair_taus_match_analytic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases = [
            (Family::Independence, 0.0, 0.0),
            (Family::Clayton, 2.0, 0.5),
            (Family::Gaussian, 0.5, 2.0 / std::f64::consts::PI * 0.5f64.asin()),
        ];
        for (f, theta, expected) in cases {
            let c = cop(f);
            let par = CopulaParam::new(theta);
            let n = 20_000;
            let samples: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let p = c.sample_pair(par, &mut rng).unwrap();
                    (p.u, p.v)
                })
                .collect();
            let tau = crate::stats::kendall_tau(
                &samples.iter().map(|s| s.0).collect::<Vec<_>>(),
                &samples.iter().map(|s| s.1).collect::<Vec<_>>(),
            );
            assert!(
                (tau - expected).abs() < 0.02,
                "{f:?}: tau={tau} expected={expected}"
            );
        }
    }

    #[test]
    fn rotated_tau_flips_sign() {
        let base = cop(Family::Clayton);
        let rot = PairCopula::new(Family::Clayton, Rotation::Deg90).unwrap();
        let par = CopulaParam::new(2.0);
        assert_abs_diff_eq!(
            rot.tau(par).unwrap(),
            -base.tau(par).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn frank_tau_debye_sanity() {
        // tau(theta) is odd and increasing; spot value from the Debye
        // quadrature itself at theta = 5 lies in (0.4, 0.5).
        let c = cop(Family::Frank);
        let t5 = c.tau(CopulaParam::new(5.0)).unwrap();
        let tm5 = c.tau(CopulaParam::new(-5.0)).unwrap();
        assert!(t5 > 0.4 && t5 < 0.5, "{t5}");
        assert_abs_diff_eq!(t5, -tm5, epsilon = 1e-12);
    }
}
