//! Small numerical kernels: adaptive Gauss–Kronrod quadrature, natural cubic
//! splines and straight-line least squares.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`: the interval
/// with the largest error estimate is bisected until the summed estimate meets
/// the relative tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            let mut vals: Vec<f64> = parts.iter().map(|p| p.2).collect();
            vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
            return Ok(vals.into_iter().sum());
        }
        let worst = (0..parts.len()).max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3)).expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    Err(Error::Solver(format!("quadrature on [{a}, {b}] did not reach relative tolerance {rel_tol:e}")))
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::Input("spline needs at least 3 points and matching lengths".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("spline abscissae must be strictly increasing".into()));
        }
        // Tridiagonal system for second derivatives with m_0 = m_{n-1} = 0.
        let mut m = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let c = h1 / 6.0;
            let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Ok(CubicSpline { x, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value, first and second derivative at `t` (clamped to the domain).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= self.x.len() => self.x.len() - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let val = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        (val, d1, d2)
    }
}

/// Least-squares line `y ≈ slope·x + intercept` with the 95% half-width of the slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_half_width: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 || !sxx.is_finite() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let half = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
        1.96 * (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, slope_half_width: half })
}

/// Finite-difference weights at `x0` for derivatives `0..=max_order` on the
/// nodes `xs` (Fornberg's recursion); `w[m][j]` multiplies `f(xs[j])`.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut w = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return w;
    }
    w[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for m in (1..=mn).rev() {
                    w[m][i] = c1 * (m as f64 * w[m - 1][i - 1] - c5 * w[m][i - 1]) / c2;
                }
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for m in (1..=mn).rev() {
                w[m][j] = (c4 * w[m][j] - m as f64 * w[m - 1][j]) / c3;
            }
            w[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    w
}

/// Observed convergence order from errors at two resolutions with ratio 2.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_smooth_functions() {
        let v = integrate(|x: f64| x.cos(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1f64.sin()).abs() < 1e-14);
        let v = integrate(|x: f64| (-x).exp(), 0.0, 40.0, 1e-12).unwrap();
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-12);
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-11).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_converges() {
        let x: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        let (v, d1, d2) = s.eval(1.234);
        assert!((v - 1.234f64.sin()).abs() < 1e-8);
        assert!((d1 - 1.234f64.cos()).abs() < 1e-5);
        assert!((d2 + 1.234f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn fd_weights_match_centered_stencils_and_polynomials() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
        let xs = [0.1, 0.35, 0.4, 0.9, 1.3];
        let w = fd_weights(0.5, &xs, 2);
        let f = |x: f64| x.powi(4) - 2.0 * x.powi(3);
        let d2: f64 = xs.iter().zip(&w[2]).map(|(x, c)| c * f(*x)).sum();
        assert!((d2 - (12.0 * 0.25 - 12.0 * 0.5)).abs() < 1e-11);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, -1.0, -3.0, -5.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-15);
        assert!((f.intercept - 1.0).abs() < 1e-15);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
