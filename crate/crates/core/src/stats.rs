//! Least-squares line fits.

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Root mean square of the fit residuals.
    pub rms: f64,
}

/// Ordinary least squares fit of `y = slope * x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(LineFit { slope, intercept, r2, rms: (ss_res / nf).sqrt() })
}

/// Least squares fit of `y = slope * x + extra * z + intercept`; returns the fit and `extra`.
pub fn fit_plane(x: &[f64], z: &[f64], y: &[f64]) -> Option<(LineFit, f64)> {
    let n = x.len();
    if n < 3 || y.len() != n || z.len() != n {
        return None;
    }
    let nf = n as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
    let (mx, mz, my) = (mean(x), mean(z), mean(y));
    let (mut sxx, mut szz, mut sxz, mut sxy, mut szy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dz, dy) = (x[i] - mx, z[i] - mz, y[i] - my);
        sxx += dx * dx;
        szz += dz * dz;
        sxz += dx * dz;
        sxy += dx * dy;
        szy += dz * dy;
        syy += dy * dy;
    }
    let det = sxx * szz - sxz * sxz;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let slope = (sxy * szz - szy * sxz) / det;
    let extra = (szy * sxx - sxy * sxz) / det;
    let intercept = my - slope * mx - extra * mz;
    let ss_res: f64 = (0..n)
        .map(|i| {
            let r = y[i] - (slope * x[i] + extra * z[i] + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some((LineFit { slope, intercept, r2, rms: (ss_res / nf).sqrt() }, extra))
}
