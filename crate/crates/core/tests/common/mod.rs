//! Shared oracles for the acceptance tests, implemented independently
//! of the library's own recursions.

/// Correlation matrix of a 3-variable Gaussian D-vine (order 1-2-3)
/// from its edge parameters: r12, r23 and the partial correlation
/// r13;2.
pub fn dvine3_correlation(r12: f64, r23: f64, p13_2: f64) -> [[f64; 3]; 3] {
    let r13 = p13_2 * ((1.0 - r12 * r12) * (1.0 - r23 * r23)).sqrt() + r12 * r23;
    [
        [1.0, r12, r13],
        [r12, 1.0, r23],
        [r13, r23, 1.0],
    ]
}

/// Correlation matrix of a 4-variable Gaussian D-vine (order 1-2-3-4)
/// from tree-major edge parameters: r12, r23, r34, r13;2, r24;3,
/// r14;23. Conditioning variables are removed one at a time with the
/// standard partial-correlation recursion.
pub fn dvine4_correlation(
    r12: f64,
    r23: f64,
    r34: f64,
    p13_2: f64,
    p24_3: f64,
    p14_23: f64,
) -> [[f64; 4]; 4] {
    let r13 = p13_2 * ((1.0 - r12 * r12) * (1.0 - r23 * r23)).sqrt() + r12 * r23;
    let r24 = p24_3 * ((1.0 - r23 * r23) * (1.0 - r34 * r34)).sqrt() + r23 * r34;
    // Drop variable 2 from the conditioning set of r14;23.
    let p12_3 = (r12 - r13 * r23) / ((1.0 - r13 * r13) * (1.0 - r23 * r23)).sqrt();
    let p14_3 = p14_23 * ((1.0 - p12_3 * p12_3) * (1.0 - p24_3 * p24_3)).sqrt() + p12_3 * p24_3;
    let r14 = p14_3 * ((1.0 - r13 * r13) * (1.0 - r34 * r34)).sqrt() + r13 * r34;
    [
        [1.0, r12, r13, r14],
        [r12, 1.0, r23, r24],
        [r13, r23, 1.0, r34],
        [r14, r24, r34, 1.0],
    ]
}

/// Lower-triangular Cholesky factor of a small positive-definite
/// matrix.
fn cholesky<const D: usize>(m: &[[f64; D]; D]) -> [[f64; D]; D] {
    let mut l = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (m[i][i] - s).sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Log-density of the multivariate Gaussian copula with correlation
/// matrix `r`, evaluated at the normal scores `z` (z_i = Phi^{-1}(u_i)):
/// -0.5 log det R - 0.5 z' R^{-1} z + 0.5 z' z.
pub fn gaussian_copula_log_density<const D: usize>(r: &[[f64; D]; D], z: &[f64; D]) -> f64 {
    let l = cholesky(r);
    let mut log_det = 0.0;
    for i in 0..D {
        log_det += 2.0 * l[i][i].ln();
    }
    // Forward-solve L w = z; the quadratic form is w' w.
    let mut w = [0.0; D];
    for i in 0..D {
        let s: f64 = (0..i).map(|k| l[i][k] * w[k]).sum();
        w[i] = (z[i] - s) / l[i][i];
    }
    let quad: f64 = w.iter().map(|v| v * v).sum();
    let plain: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * log_det - 0.5 * quad + 0.5 * plain
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn identity_correlation_gives_zero_log_density() {
        let r = dvine3_correlation(0.0, 0.0, 0.0);
        let ld = gaussian_copula_log_density(&r, &[0.3, -1.2, 0.8]);
        assert!(ld.abs() < 1e-14);
    }

    #[test]
    fn bivariate_block_matches_closed_form() {
        // With r23 = r13;2 = 0 the density reduces to the bivariate
        // Gaussian copula in (1,2).
        let rho: f64 = 0.6;
        let r = dvine3_correlation(rho, 0.0, 0.0);
        let (z1, z2) = (0.5, -0.7);
        let ld = gaussian_copula_log_density(&r, &[z1, z2, 1.1]);
        let expected = -0.5 * (1.0 - rho * rho).ln()
            - (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2)
                / (2.0 * (1.0 - rho * rho));
        assert!((ld - expected).abs() < 1e-12);
    }
}
