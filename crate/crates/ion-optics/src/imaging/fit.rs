//! Least-squares fits used by the characterization scans.

/// Affine map fitted from start coordinates to impact coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit2 {
    /// Jacobian [[dX/dx, dX/dy], [dY/dx, dY/dy]].
    pub jac: [[f64; 2]; 2],
    pub offset: [f64; 2],
    /// RMS of the fit residuals over both output components [m].
    pub residual_rms: f64,
    pub n: usize,
}

fn solve3(mut a: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// Fit `impact = offset + jac * start` by least squares. Needs at least
/// three non-collinear starts.
pub fn affine_fit(starts: &[[f64; 2]], impacts: &[[f64; 2]]) -> Option<AffineFit2> {
    let n = starts.len();
    if n < 3 || impacts.len() != n {
        return None;
    }
    // normal equations over basis (1, x, y)
    let mut m = [[0.0f64; 3]; 3];
    let mut bx = [0.0f64; 3];
    let mut by = [0.0f64; 3];
    for (s, im) in starts.iter().zip(impacts) {
        let phi = [1.0, s[0], s[1]];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            bx[i] += phi[i] * im[0];
            by[i] += phi[i] * im[1];
        }
    }
    let aug = |b: [f64; 3]| {
        [
            [m[0][0], m[0][1], m[0][2], b[0]],
            [m[1][0], m[1][1], m[1][2], b[1]],
            [m[2][0], m[2][1], m[2][2], b[2]],
        ]
    };
    let cx = solve3(aug(bx))?;
    let cy = solve3(aug(by))?;
    let jac = [[cx[1], cx[2]], [cy[1], cy[2]]];
    let offset = [cx[0], cy[0]];
    let mut ss = 0.0;
    for (s, im) in starts.iter().zip(impacts) {
        let px = offset[0] + jac[0][0] * s[0] + jac[0][1] * s[1];
        let py = offset[1] + jac[1][0] * s[0] + jac[1][1] * s[1];
        ss += (im[0] - px).powi(2) + (im[1] - py).powi(2);
    }
    Some(AffineFit2 {
        jac,
        offset,
        residual_rms: (ss / (2.0 * n as f64)).sqrt(),
        n,
    })
}

/// Singular values of a 2x2 matrix, largest first.
pub fn singular_values2(j: [[f64; 2]; 2]) -> (f64, f64) {
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = (e * e + h * h).sqrt();
    let r = (f * f + g * g).sqrt();
    (q + r, (q - r).abs())
}

/// Rotation angle of the nearest rotation to `j` (polar decomposition),
/// in degrees.
pub fn rotation_angle_deg(j: [[f64; 2]; 2]) -> f64 {
    (j[1][0] - j[0][1]).atan2(j[0][0] + j[1][1]).to_degrees()
}

/// Principal-axis direction of a point set, degrees in [0, 180).
/// 0 means x-aligned, 90 means y-aligned.
pub fn principal_axis_deg(points: &[[f64; 2]]) -> f64 {
    let n = points.len().max(1) as f64;
    let mean = points.iter().fold([0.0f64; 2], |acc, p| {
        [acc[0] + p[0] / n, acc[1] + p[1] / n]
    });
    let (mut sxx, mut syy, mut sxy) = (0.0f64, 0.0f64, 0.0f64);
    for p in points {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let deg = angle.to_degrees();
    if deg < 0.0 {
        deg + 180.0
    } else {
        deg
    }
}

/// Straight-line least squares with R^2 and the standard error of the
/// slope (normal approximation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub n: usize,
}

impl LineFit {
    /// 95% confidence interval of the slope.
    pub fn slope_ci95(&self) -> (f64, f64) {
        let d = 1.96 * self.slope_stderr;
        (self.slope - d, self.slope + d)
    }
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let variance = if n > 2 { (ss_res / (nf - 2.0)).max(0.0) } else { 0.0 };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        slope_stderr: (variance / sxx).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_fit_recovers_synthetic_map() {
        let jac = [[12.0, 0.3], [-0.2, 11.5]];
        let offset = [1e-3, -2e-3];
        let mut starts = Vec::new();
        let mut impacts = Vec::new();
        for i in -1..=1 {
            for j in -1..=1 {
                let s = [i as f64 * 1e-4, j as f64 * 1e-4];
                starts.push(s);
                impacts.push([
                    offset[0] + jac[0][0] * s[0] + jac[0][1] * s[1],
                    offset[1] + jac[1][0] * s[0] + jac[1][1] * s[1],
                ]);
            }
        }
        let fit = affine_fit(&starts, &impacts).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((fit.jac[r][c] - jac[r][c]).abs() < 1e-9);
            }
        }
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn singular_values_of_scaled_rotation() {
        let th = 0.3f64;
        let s = 5.0;
        let j = [
            [s * th.cos(), -s * th.sin()],
            [s * th.sin(), s * th.cos()],
        ];
        let (s1, s2) = singular_values2(j);
        assert!((s1 - 5.0).abs() < 1e-12 && (s2 - 5.0).abs() < 1e-12);
        assert!((rotation_angle_deg(j) - th.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let (s1, s2) = singular_values2([[200.0, 0.0], [0.0, 3.0]]);
        assert!((s1 - 200.0).abs() < 1e-9 && (s2 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn principal_axis_of_lines() {
        let along_y: Vec<[f64; 2]> = (-5..=5).map(|i| [0.001, i as f64]).collect();
        assert!((principal_axis_deg(&along_y) - 90.0).abs() < 1.0);
        let diag: Vec<[f64; 2]> = (-5..=5).map(|i| [i as f64, i as f64]).collect();
        assert!((principal_axis_deg(&diag) - 45.0).abs() < 1e-9);
    }

    #[test]
    fn linear_fit_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}
