//! Expanding-type backgrounds.
//!
//! The physical metric is `h = −N²dt² + s(t)² g̃`, conformal to the Gaussian
//! foliated tilde metric `−dτ² + g̃_τ` with `dτ = dt / (N s)`. The tilde
//! spatial metric is homogeneous and diagonal on the flat torus,
//! `g̃_τ = diag(b₁², b₂², b₃²)`. All frame quantities below refer to the
//! orthonormal frame `e_i = b_i⁻¹ ∂_i`, which is parallel along the normal
//! geodesics, so the normal derivative of II is the plain τ-derivative of its
//! frame components.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::{integrate, CubicSpline};
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-13;

/// `s(t)` for `t ≥ 0`.
#[derive(Clone, Debug)]
pub enum ScaleProfile {
    /// `s = a·cosh(t/a)`.
    DeSitter { a: f64 },
    /// `s = exp(rate·t)`.
    Exponential { rate: f64 },
    /// `s = (1 + t/t0)^p`, integrable for `p > 1`.
    Power { exponent: f64, t0: f64 },
    /// `s ≡ c`; its horizon diverges.
    Constant { c: f64 },
    /// Cubic spline through `(t, s)` samples, continued exponentially past the last sample.
    Table(TableProfile),
}

#[derive(Clone, Debug)]
pub struct TableProfile {
    spline: CubicSpline,
    t_end: f64,
    s_end: f64,
    tail_rate: f64,
}

impl TableProfile {
    pub fn new(t: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if t.first().copied() != Some(0.0) {
            return Err(Error::Config("scale-factor table must start at t = 0".into()));
        }
        if s.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::Config("scale-factor table must be positive".into()));
        }
        let n = t.len();
        if n < 3 {
            return Err(Error::Config("scale-factor table needs at least 3 rows".into()));
        }
        let tail_rate = (s[n - 1] / s[n - 2]).ln() / (t[n - 1] - t[n - 2]);
        let (t_end, s_end) = (t[n - 1], s[n - 1]);
        Ok(TableProfile { spline: CubicSpline::new(t, s)?, t_end, s_end, tail_rate })
    }

    /// Two-column CSV `t,s` (a non-numeric header line is skipped).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let cols = read_csv_columns(path, 2)?;
        TableProfile::new(cols[0].clone(), cols[1].clone())
    }
}

impl ScaleProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScaleProfile::DeSitter { a } => a > 0.0 && a.is_finite(),
            ScaleProfile::Exponential { rate } => rate.is_finite() && rate != 0.0,
            ScaleProfile::Power { exponent, t0 } => t0 > 0.0 && exponent.is_finite(),
            ScaleProfile::Constant { c } => c > 0.0 && c.is_finite(),
            ScaleProfile::Table(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid scale-factor parameters: {self:?}")))
        }
    }

    /// `(s, ṡ)` at physical time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            ScaleProfile::DeSitter { a } => (a * (t / a).cosh(), (t / a).sinh()),
            ScaleProfile::Exponential { rate } => {
                let s = (rate * t).exp();
                (s, rate * s)
            }
            ScaleProfile::Power { exponent, t0 } => {
                let base = 1.0 + t / t0;
                (base.powf(*exponent), exponent / t0 * base.powf(exponent - 1.0))
            }
            ScaleProfile::Constant { c } => (*c, 0.0),
            ScaleProfile::Table(tab) => {
                if t <= tab.t_end {
                    let (s, ds, _) = tab.spline.eval(t);
                    (s, ds)
                } else {
                    let s = tab.s_end * (tab.tail_rate * (t - tab.t_end)).exp();
                    (s, tab.tail_rate * s)
                }
            }
        }
    }

    /// `s̈` at physical time `t`.
    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            ScaleProfile::DeSitter { a } => (t / a).cosh() / a,
            ScaleProfile::Exponential { rate } => rate * rate * (rate * t).exp(),
            ScaleProfile::Power { exponent, t0 } => {
                exponent * (exponent - 1.0) / (t0 * t0) * (1.0 + t / t0).powf(exponent - 2.0)
            }
            ScaleProfile::Constant { .. } => 0.0,
            ScaleProfile::Table(tab) => {
                if t <= tab.t_end {
                    tab.spline.eval(t).2
                } else {
                    tab.tail_rate * tab.tail_rate * tab.s_end * (tab.tail_rate * (t - tab.t_end)).exp()
                }
            }
        }
    }

    pub fn s(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Quadrature cutoff beyond which the tail is evaluated in closed form.
    fn cutoff(&self) -> f64 {
        match *self {
            ScaleProfile::DeSitter { a } => 8.0 * a,
            ScaleProfile::Exponential { rate } => 8.0 / rate.abs(),
            ScaleProfile::Power { t0, .. } => 4.0 * t0,
            ScaleProfile::Constant { c } => c,
            ScaleProfile::Table(ref tab) => tab.t_end,
        }
    }

    /// `∫_{t_c}^∞ dt / s`.
    fn tail(&self, tc: f64) -> Result<f64> {
        let divergent = || Error::Config("1/s is not integrable on [0, ∞): the horizon diverges".into());
        match *self {
            ScaleProfile::DeSitter { a } => Ok(std::f64::consts::FRAC_PI_2 - (tc / a).sinh().atan()),
            ScaleProfile::Exponential { rate } if rate > 0.0 => Ok((-rate * tc).exp() / rate),
            ScaleProfile::Power { exponent, t0 } if exponent > 1.0 => {
                Ok(t0 / (exponent - 1.0) * (1.0 + tc / t0).powf(1.0 - exponent))
            }
            ScaleProfile::Table(ref tab) if tab.tail_rate > 0.0 => Ok(1.0 / (tab.s_end * tab.tail_rate)),
            _ => Err(divergent()),
        }
    }

    /// `∫₀ᵗ dt′ / s(t′)`.
    pub fn integral_inverse(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Input(format!("physical time must be non-negative, got {t}")));
        }
        integrate(|x| 1.0 / self.s(x), 0.0, t, QUAD_TOL)
    }

    /// `∫₀^∞ dt / s`.
    pub fn integral_inverse_total(&self) -> Result<f64> {
        let tc = self.cutoff();
        let tail = self.tail(tc)?;
        Ok(self.integral_inverse(tc)? + tail)
    }
}

/// Homogeneous diagonal tilde spatial metric `diag(b_i(τ)²)`.
#[derive(Clone, Debug)]
pub enum SpatialMetric {
    /// `b_i ≡ 1`.
    Static,
    /// `b_i = 1 + rates_i·τ`.
    Bianchi1 { rates: [f64; 3] },
    /// `b_i = exp(rates_i·τ)`.
    Exponential { rates: [f64; 3] },
    /// Splines through `(τ, b₁, b₂, b₃)` samples.
    Table(Box<[CubicSpline; 3]>),
}

impl SpatialMetric {
    /// Four-column CSV `τ,b1,b2,b3`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let cols = read_csv_columns(path, 4)?;
        if cols[1..].iter().flatten().any(|&b| b <= 0.0) {
            return Err(Error::Config("metric table must be positive".into()));
        }
        let mk = |c: usize| CubicSpline::new(cols[0].clone(), cols[c].clone());
        Ok(SpatialMetric::Table(Box::new([mk(1)?, mk(2)?, mk(3)?])))
    }

    /// `(b, ḃ, b̈)` for each axis.
    pub fn eval(&self, tau: f64) -> [(f64, f64, f64); 3] {
        match self {
            SpatialMetric::Static => [(1.0, 0.0, 0.0); 3],
            SpatialMetric::Bianchi1 { rates } => rates.map(|r| (1.0 + r * tau, r, 0.0)),
            SpatialMetric::Exponential { rates } => rates.map(|r| {
                let b = (r * tau).exp();
                (b, r * b, r * r * b)
            }),
            SpatialMetric::Table(s) => [s[0].eval(tau), s[1].eval(tau), s[2].eval(tau)],
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, SpatialMetric::Static)
    }
}

/// Frame quantities at one Gaussian time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub tau: f64,
    pub b: [f64; 3],
    pub db: [f64; 3],
    pub ddb: [f64; 3],
    /// Diagonal second fundamental form in the orthonormal frame, `−ḃ_i/b_i`.
    pub ii: [f64; 3],
    /// Normal derivative of II in the orthonormal frame.
    pub dii: [f64; 3],
    /// `H = ⅓ Tr II`.
    pub h: f64,
    pub scal_g: f64,
    /// Spacetime scalar curvature of the tilde metric.
    pub scal: f64,
}

impl FrameGeometry {
    pub fn from_metric(tau: f64, bvals: [(f64, f64, f64); 3]) -> Self {
        let b = bvals.map(|v| v.0);
        let db = bvals.map(|v| v.1);
        let ddb = bvals.map(|v| v.2);
        let ii: [f64; 3] = std::array::from_fn(|i| -db[i] / b[i]);
        let dii: [f64; 3] = std::array::from_fn(|i| -ddb[i] / b[i] + (db[i] / b[i]).powi(2));
        let h = ii.iter().sum::<f64>() / 3.0;
        let mut frame = FrameGeometry { tau, b, db, ddb, ii, dii, h, scal_g: 0.0, scal: 0.0 };
        frame.scal = scalar_curvature(&frame);
        frame
    }

    /// `√g = b₁b₂b₃`.
    pub fn volume_factor(&self) -> f64 {
        self.b.iter().product()
    }

    /// `|II|² = Σ II_ii²`.
    pub fn ii_norm_sq(&self) -> f64 {
        self.ii.iter().map(|v| v * v).sum()
    }
}

/// `Scal = −2 Tr(∇II/dτ) + |II|² + 9H² + Scal_g`.
pub fn scalar_curvature(frame: &FrameGeometry) -> f64 {
    -2.0 * frame.dii.iter().sum::<f64>() + frame.ii_norm_sq() + 9.0 * frame.h * frame.h + frame.scal_g
}

/// The full orthonormal-frame Riemann tensor of a homogeneous diagonal
/// background, with Ricci `R_μν = Σ_λ η^{λλ} R_{λμνλ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureComponents {
    pub riemann: [[[[f64; 4]; 4]; 4]; 4],
    pub ricci: [[f64; 4]; 4],
    pub scal: f64,
}

/// Frame index 0 is the normal `∂_τ`, 1..=3 the spatial frame.
pub fn riemann_components(frame: &FrameGeometry) -> CurvatureComponents {
    let mut r = [[[[0.0; 4]; 4]; 4]; 4];
    let ii = |i: usize, j: usize| if i == j { frame.ii[i] } else { 0.0 };
    let dii = |i: usize, j: usize| if i == j { frame.dii[i] } else { 0.0 };
    for k in 0..3 {
        for i in 0..3 {
            let a: f64 = -dii(k, i) + (0..3).map(|l| ii(k, l) * ii(l, i)).sum::<f64>();
            r[k + 1][0][i + 1][0] = a;
            r[0][k + 1][i + 1][0] = -a;
            r[k + 1][0][0][i + 1] = -a;
            r[0][k + 1][0][i + 1] = a;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    r[i + 1][j + 1][k + 1][l + 1] = ii(j, k) * ii(i, l) - ii(i, k) * ii(j, l);
                }
            }
        }
    }
    let eta = |m: usize| if m == 0 { -1.0 } else { 1.0 };
    let mut ricci = [[0.0; 4]; 4];
    for (mu, row) in ricci.iter_mut().enumerate() {
        for (nu, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|l| eta(l) * r[l][mu][nu][l]).sum();
        }
    }
    let scal = (0..4).map(|m| eta(m) * ricci[m][m]).sum::<f64>() + frame.scal_g;
    CurvatureComponents { riemann: r, ricci, scal }
}

/// Background: scale factor, lapse and tilde spatial metric.
#[derive(Clone, Debug)]
pub struct Background {
    pub profile: ScaleProfile,
    pub lapse: f64,
    pub spatial: SpatialMetric,
    horizon: f64,
}

impl Background {
    pub fn new(profile: ScaleProfile, lapse: f64, spatial: SpatialMetric) -> Result<Self> {
        profile.validate()?;
        if !(lapse > 0.0 && lapse.is_finite()) {
            return Err(Error::Config(format!("lapse must be positive, got {lapse}")));
        }
        let horizon = profile.integral_inverse_total()? / lapse;
        let bg = Background { profile, lapse, spatial, horizon };
        for k in 0..=64 {
            let tau = bg.horizon * k as f64 / 64.0;
            if bg.spatial.eval(tau).iter().any(|v| !(v.0 > 0.0)) {
                return Err(Error::Config(format!("spatial metric degenerates before the horizon (τ = {tau})")));
            }
        }
        Ok(bg)
    }

    /// de Sitter with `s = a·cosh(t/a)`, unit lapse and static flat slices.
    pub fn de_sitter(a: f64) -> Result<Self> {
        Background::new(ScaleProfile::DeSitter { a }, 1.0, SpatialMetric::Static)
    }

    /// `T = lim τ(t)`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `τ(t) = ∫₀ᵗ dt′/(N s)`.
    pub fn gaussian_time(&self, t: f64) -> Result<f64> {
        Ok(self.profile.integral_inverse(t)? / self.lapse)
    }

    /// Physical time at Gaussian time `τ` (inverse of [`Background::gaussian_time`]).
    pub fn physical_time(&self, tau: f64) -> Result<f64> {
        self.check_tau(tau)?;
        if tau <= 0.0 {
            return Ok(0.0);
        }
        if let ScaleProfile::DeSitter { a } = self.profile {
            return Ok(a * (tau * self.lapse).tan().asinh());
        }
        // Bracket, then Newton safeguarded by bisection; dτ/dt = 1/(N s).
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.gaussian_time(hi)? < tau {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Solver("physical time inversion did not bracket".into()));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.gaussian_time(t)? - tau;
            if f.abs() <= 1e-14 * tau.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - f * self.lapse * self.profile.s(t);
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(t)
    }

    /// `(t, s(t), ṡ(t))` at Gaussian time `τ`.
    pub fn scale_at(&self, tau: f64) -> Result<(f64, f64, f64)> {
        let t = self.physical_time(tau)?;
        let (s, ds) = self.profile.eval(t);
        Ok((t, s, ds))
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau >= -1e-12 && tau < self.horizon) {
            return Err(Error::Input(format!("τ = {tau} outside [0, {})", self.horizon)));
        }
        Ok(())
    }

    /// Second fundamental form, its normal derivative, H and curvature scalars.
    pub fn frame(&self, tau: f64) -> Result<FrameGeometry> {
        self.check_tau(tau)?;
        Ok(FrameGeometry::from_metric(tau, self.spatial.eval(tau)))
    }

    /// `s·max|∇II/dτ|`, the quantity bounded in the extrinsic-boundedness condition.
    pub fn extrinsic_bound(&self, tau: f64) -> Result<f64> {
        let frame = self.frame(tau)?;
        let (_, s, _) = self.scale_at(tau)?;
        Ok(s * frame.dii.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }
}

fn read_csv_columns(path: &Path, ncols: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut cols = vec![Vec::new(); ncols];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == ncols => v.into_iter().zip(cols.iter_mut()).for_each(|(x, c)| c.push(x)),
            Err(_) if lineno == 0 => continue,
            _ => {
                return Err(Error::Format(format!(
                    "{}: line {} must have {ncols} numeric columns",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(cols)
}
