//! Periodic lattice storage and discrete spatial calculus.
//!
//! Every field is stored site-major: the fiber values of site `x` occupy a
//! contiguous block. Spatial 1-forms store their three frame components one
//! after the other, so the value of component `k` at site `x` starts at
//! `(3x + k)·fiber`. Spatial derivatives are taken along the orthonormal frame
//! `e_k = b_k⁻¹ ∂_k` of the homogeneous background.

mod gauge;
mod snapshot;

pub use gauge::{build_automorphism, AutomorphismSeries, GaugeTransform};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotMeta};

use std::ops::{Add, AddAssign, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{GaugeModel, LieData, ReprData};
use crate::clifford::{gamma, project_fer_plus, Monomial};
use crate::geometry::FrameGeometry;
use crate::{Error, Result, C64};

/// Scalars a field can be built from.
pub trait Scalar:
    Copy + Send + Sync + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign
{
}
impl Scalar for f64 {}
impl Scalar for C64 {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(StencilOrder::Second),
            4 => Ok(StencilOrder::Fourth),
            o => Err(Error::Config(format!("stencil order must be 2 or 4, got {o}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }

    /// Antisymmetric first-derivative weights: `f′ ≈ Σ w_m (f(x+m) − f(x−m)) / Δx`.
    pub fn weights(self) -> &'static [(usize, f64)] {
        match self {
            StencilOrder::Second => &[(1, 0.5)],
            StencilOrder::Fourth => &[(1, 2.0 / 3.0), (2, -1.0 / 12.0)],
        }
    }

    /// Symbol of the first-derivative stencil: `∂ e^{iθx/Δx} = i·modified_wavenumber(θ)/Δx · e^{...}`.
    pub fn modified_wavenumber(self, theta: f64) -> f64 {
        self.weights().iter().map(|&(m, w)| 2.0 * w * (m as f64 * theta).sin()).sum()
    }
}

/// Cubic periodic lattice `[0, L)³` with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
    order: StencilOrder,
}

impl Grid {
    pub fn new(n: usize, length: f64, order: StencilOrder) -> Result<Self> {
        if n < 4 {
            return Err(Error::Config(format!("grid needs n ≥ 4 points per axis, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("box length must be positive, got {length}")));
        }
        Ok(Grid { n, length, order })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Grid::new(n, self.length, self.order)
    }

    pub fn sites(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Coordinate volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    #[inline]
    fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    #[inline]
    pub fn coords(&self, site: usize) -> [usize; 3] {
        [site / (self.n * self.n), (site / self.n) % self.n, site % self.n]
    }

    #[inline]
    pub fn site(&self, c: [usize; 3]) -> usize {
        (c[0] * self.n + c[1]) * self.n + c[2]
    }

    /// Site displaced by `offset` along `axis` with periodic wrap.
    #[inline]
    pub fn shift(&self, site: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.n;
        let n = self.n as isize;
        let nc = ((c as isize + offset) % n + n) % n;
        site + nc as usize * stride - c * stride
    }

    pub fn position(&self, site: usize) -> [f64; 3] {
        self.coords(site).map(|c| c as f64 * self.dx())
    }
}

/// Fiber dimensions of the state bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fibers {
    /// Lie algebra dimension.
    pub dg: usize,
    /// Higgs representation dimension.
    pub dw: usize,
    /// Fermion representation dimension `dim V₊ + dim V₋`.
    pub dv: usize,
    /// `dim V₊`.
    pub dvp: usize,
}

impl Fibers {
    pub fn of(model: &GaugeModel) -> Self {
        Fibers { dg: model.dim_g(), dw: model.dim_w(), dv: model.dim_v(), dvp: model.dim_vp }
    }

    /// Complex components of one twisted spinor.
    pub fn spinor(&self) -> usize {
        4 * self.dv
    }
}

/// The nine evolved sectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    Eta,
    Q,
    E,
    Phi,
    PhiDot,
    Z,
    Psi,
    PsiDot,
    S,
}

impl Sector {
    pub const ALL: [Sector; 9] =
        [Sector::Eta, Sector::Q, Sector::E, Sector::Phi, Sector::PhiDot, Sector::Z, Sector::Psi, Sector::PsiDot, Sector::S];

    pub fn name(self) -> &'static str {
        match self {
            Sector::Eta => "eta",
            Sector::Q => "Q",
            Sector::E => "E",
            Sector::Phi => "Phi",
            Sector::PhiDot => "PhiDot",
            Sector::Z => "Z",
            Sector::Psi => "Psi",
            Sector::PsiDot => "PsiDot",
            Sector::S => "S",
        }
    }

    /// Real numbers per site.
    pub fn reals_per_site(self, f: &Fibers) -> usize {
        match self {
            Sector::Eta | Sector::Q | Sector::E => 3 * f.dg,
            Sector::Phi | Sector::PhiDot => 2 * f.dw,
            Sector::Z => 6 * f.dw,
            Sector::Psi | Sector::PsiDot => 2 * f.spinor(),
            Sector::S => 6 * f.spinor(),
        }
    }
}

/// Which physical sectors random initial data populates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorMask {
    pub gauge: bool,
    pub higgs: bool,
    pub dirac: bool,
}

impl Default for SectorMask {
    fn default() -> Self {
        SectorMask { gauge: true, higgs: true, dirac: true }
    }
}

/// The first-order state `(η, Q, E, Φ, Φ̇, Z, Ψ, Ψ̇, S)` at Gaussian time `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub grid: Grid,
    pub fibers: Fibers,
    pub tau: f64,
    pub eta: Vec<f64>,
    pub q: Vec<f64>,
    pub e: Vec<f64>,
    pub phi: Vec<C64>,
    pub phidot: Vec<C64>,
    pub z: Vec<C64>,
    pub psi: Vec<C64>,
    pub psidot: Vec<C64>,
    pub s: Vec<C64>,
}

impl FieldState {
    pub fn zeros(grid: Grid, fibers: Fibers) -> Self {
        let n = grid.sites();
        let c0 = C64::new(0.0, 0.0);
        FieldState {
            grid,
            fibers,
            tau: 0.0,
            eta: vec![0.0; 3 * n * fibers.dg],
            q: vec![0.0; 3 * n * fibers.dg],
            e: vec![0.0; 3 * n * fibers.dg],
            phi: vec![c0; n * fibers.dw],
            phidot: vec![c0; n * fibers.dw],
            z: vec![c0; 3 * n * fibers.dw],
            psi: vec![c0; n * fibers.spinor()],
            psidot: vec![c0; n * fibers.spinor()],
            s: vec![c0; 3 * n * fibers.spinor()],
        }
    }

    /// Every sector viewed as real numbers, in [`Sector::ALL`] order.
    pub fn sectors(&self) -> [&[f64]; 9] {
        [
            &self.eta,
            &self.q,
            &self.e,
            bytemuck::cast_slice(&self.phi),
            bytemuck::cast_slice(&self.phidot),
            bytemuck::cast_slice(&self.z),
            bytemuck::cast_slice(&self.psi),
            bytemuck::cast_slice(&self.psidot),
            bytemuck::cast_slice(&self.s),
        ]
    }

    pub fn sectors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            &mut self.eta,
            &mut self.q,
            &mut self.e,
            bytemuck::cast_slice_mut(&mut self.phi),
            bytemuck::cast_slice_mut(&mut self.phidot),
            bytemuck::cast_slice_mut(&mut self.z),
            bytemuck::cast_slice_mut(&mut self.psi),
            bytemuck::cast_slice_mut(&mut self.psidot),
            bytemuck::cast_slice_mut(&mut self.s),
        ]
    }

    pub fn check_compatible(&self, other: &FieldState) -> Result<()> {
        if self.grid != other.grid || self.fibers != other.fibers {
            return Err(Error::Dimension("field states live on different grids or bundles".into()));
        }
        Ok(())
    }

    /// `self += a·x` on every sector (τ untouched).
    pub fn axpy(&mut self, a: f64, x: &FieldState) {
        for (dst, src) in self.sectors_mut().into_iter().zip(x.sectors()) {
            dst.par_iter_mut().zip(src.par_iter()).for_each(|(d, s)| *d += a * s);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for dst in self.sectors_mut() {
            dst.par_iter_mut().for_each(|d| *d *= a);
        }
    }

    /// Largest absolute real component across all sectors.
    pub fn max_abs(&self) -> f64 {
        self.sectors().iter().map(|s| crate::reduce::max_abs(s)).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.sectors().iter().all(|s| s.par_iter().all(|v| v.is_finite()))
    }

    /// `max |self − other|` over all sectors.
    pub fn max_diff(&self, other: &FieldState) -> f64 {
        self.sectors()
            .iter()
            .zip(other.sectors())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Zero the components of `Ψ`, `Ψ̇`, `S` outside the chirality-matched subbundle.
    pub fn project_fermions(&mut self) {
        let (dvp, dv) = (self.fibers.dvp, self.fibers.dv);
        let sp = self.fibers.spinor();
        if sp == 0 {
            return;
        }
        for field in [&mut self.psi, &mut self.psidot, &mut self.s] {
            field.par_chunks_mut(sp).for_each(|c| project_fer_plus(c, dvp, dv));
        }
    }
}

/// `out[x] = scale·∂_axis data[x·stride + offset .. + len]` (a new `N·len` array).
pub fn diff_block<T: Scalar>(
    grid: &Grid,
    data: &[T],
    stride: usize,
    offset: usize,
    len: usize,
    axis: usize,
    scale: f64,
) -> Vec<T> {
    let mut out = vec![T::default(); grid.sites() * len];
    if len == 0 {
        return out;
    }
    let inv = scale / grid.dx();
    let weights = grid.order().weights();
    out.par_chunks_mut(len).enumerate().for_each(|(site, o)| {
        for &(m, w) in weights {
            let p = grid.shift(site, axis, m as isize) * stride + offset;
            let q = grid.shift(site, axis, -(m as isize)) * stride + offset;
            let c = w * inv;
            for j in 0..len {
                o[j] += (data[p + j] - data[q + j]) * c;
            }
        }
    });
    out
}

/// Centered derivative along `axis` of a field with `comps` values per site.
pub fn diff<T: Scalar>(grid: &Grid, data: &[T], comps: usize, axis: usize) -> Vec<T> {
    diff_block(grid, data, comps, 0, comps, axis, 1.0)
}

/// Fourth-order (or second-order) centered second derivative along `axis`.
pub fn diff2<T: Scalar>(grid: &Grid, data: &[T], comps: usize, axis: usize) -> Vec<T> {
    let mut out = vec![T::default(); data.len()];
    if comps == 0 {
        return out;
    }
    let h2 = grid.dx() * grid.dx();
    let (c0, taps): (f64, &[(isize, f64)]) = match grid.order() {
        StencilOrder::Second => (-2.0, &[(1, 1.0)]),
        StencilOrder::Fourth => (-2.5, &[(1, 4.0 / 3.0), (2, -1.0 / 12.0)]),
    };
    out.par_chunks_mut(comps).enumerate().for_each(|(site, o)| {
        for j in 0..comps {
            o[j] = data[site * comps + j] * (c0 / h2);
        }
        for &(m, w) in taps {
            let p = grid.shift(site, axis, m) * comps;
            let q = grid.shift(site, axis, -m) * comps;
            for j in 0..comps {
                o[j] += (data[p + j] + data[q + j]) * (w / h2);
            }
        }
    });
    out
}

/// `(D_ω ξ)_k = b_k⁻¹ ∂_k ξ + [η_k, ξ]` for a Lie-valued field with `count`
/// Lie vectors per site (count 1 for scalars, 3 for 1-forms). Output layout:
/// site, then direction k, then the `count·dg` block.
pub fn covariant_diff_lie(grid: &Grid, lie: &LieData, field: &[f64], count: usize, eta: &[f64], frame: &FrameGeometry) -> Result<Vec<f64>> {
    let dg = lie.dim();
    let block = count * dg;
    crate::error::check_len("Lie field", field.len(), grid.sites() * block)?;
    crate::error::check_len("connection", eta.len(), grid.sites() * 3 * dg)?;
    let parts: Vec<Vec<f64>> = (0..3).map(|k| diff_block(grid, field, block, 0, block, k, 1.0 / frame.b[k])).collect();
    let mut out = vec![0.0; grid.sites() * 3 * block];
    if block == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(3 * block).enumerate().for_each(|(site, o)| {
        for k in 0..3 {
            let ok = &mut o[k * block..(k + 1) * block];
            ok.copy_from_slice(&parts[k][site * block..(site + 1) * block]);
            let ek = &eta[(site * 3 + k) * dg..(site * 3 + k + 1) * dg];
            for c in 0..count {
                let x = &field[site * block + c * dg..site * block + (c + 1) * dg];
                lie.bracket_add(ek, x, 1.0, &mut ok[c * dg..(c + 1) * dg]);
            }
        }
    });
    Ok(out)
}

/// `(D_ω ξ)_k = b_k⁻¹ ∂_k ξ + ρ*(η_k) ξ` for a field with `count` vectors of
/// the representation per site.
pub fn covariant_diff_repr(
    grid: &Grid,
    repr: &ReprData,
    field: &[C64],
    count: usize,
    eta: &[f64],
    frame: &FrameGeometry,
) -> Result<Vec<C64>> {
    let (dg, dw) = (repr.lie_dim(), repr.dim());
    let block = count * dw;
    crate::error::check_len("representation field", field.len(), grid.sites() * block)?;
    crate::error::check_len("connection", eta.len(), grid.sites() * 3 * dg)?;
    let parts: Vec<Vec<C64>> = (0..3).map(|k| diff_block(grid, field, block, 0, block, k, 1.0 / frame.b[k])).collect();
    let mut out = vec![C64::new(0.0, 0.0); grid.sites() * 3 * block];
    if block == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(3 * block).enumerate().for_each(|(site, o)| {
        for k in 0..3 {
            let ok = &mut o[k * block..(k + 1) * block];
            ok.copy_from_slice(&parts[k][site * block..(site + 1) * block]);
            let ek = &eta[(site * 3 + k) * dg..(site * 3 + k + 1) * dg];
            for c in 0..count {
                let x = &field[site * block + c * dw..site * block + (c + 1) * dw];
                repr.apply_add(ek, x, 1.0, &mut ok[c * dw..(c + 1) * dw]);
            }
        }
    });
    Ok(out)
}

/// `γ₀γ_k` for `k = 0..3` (spatial frame index).
pub fn spin_connection_monomials() -> [Monomial; 3] {
    [1, 2, 3].map(|k| gamma(0).compose(&gamma(k)))
}

/// `out += scale·χ*(ξ)ψ` on a twisted spinor (χ* acts on the V index).
#[inline]
pub fn apply_fermion_add(repr: &ReprData, xi: &[f64], psi: &[C64], scale: f64, out: &mut [C64]) {
    let dv = repr.dim();
    for s in 0..4 {
        repr.apply_add(xi, &psi[s * dv..(s + 1) * dv], scale, &mut out[s * dv..(s + 1) * dv]);
    }
}

/// Spinor covariant derivative along the frame,
/// `(D_ω ψ)_k = b_k⁻¹ ∂_k ψ + ½ II_kk γ₀γ_k ψ + χ*(η_k) ψ`, for `count`
/// twisted spinors per site.
pub fn covariant_diff_spinor(
    grid: &Grid,
    fermion: &ReprData,
    field: &[C64],
    count: usize,
    eta: &[f64],
    frame: &FrameGeometry,
) -> Result<Vec<C64>> {
    let (dg, dv) = (fermion.lie_dim(), fermion.dim());
    let sp = 4 * dv;
    let block = count * sp;
    crate::error::check_len("spinor field", field.len(), grid.sites() * block)?;
    crate::error::check_len("connection", eta.len(), grid.sites() * 3 * dg)?;
    let parts: Vec<Vec<C64>> = (0..3).map(|k| diff_block(grid, field, block, 0, block, k, 1.0 / frame.b[k])).collect();
    let mut out = vec![C64::new(0.0, 0.0); grid.sites() * 3 * block];
    if block == 0 {
        return Ok(out);
    }
    let g0k = spin_connection_monomials();
    out.par_chunks_mut(3 * block).enumerate().for_each(|(site, o)| {
        for k in 0..3 {
            let ok = &mut o[k * block..(k + 1) * block];
            ok.copy_from_slice(&parts[k][site * block..(site + 1) * block]);
            let ek = &eta[(site * 3 + k) * dg..(site * 3 + k + 1) * dg];
            for c in 0..count {
                let x = &field[site * block + c * sp..site * block + (c + 1) * sp];
                let oc = &mut ok[c * sp..(c + 1) * sp];
                if frame.ii[k] != 0.0 {
                    g0k[k].apply_add_re(x, dv, 0.5 * frame.ii[k], oc);
                }
                apply_fermion_add(fermion, ek, x, 1.0, oc);
            }
        }
    });
    Ok(out)
}

/// `B_jk = ε_ijk Q_i` for one Lie-valued 1-form at a site (`3·dg` values in,
/// `9·dg` out, row-major in `(j, k)`).
pub fn hodge_q_to_b(q: &[f64], dg: usize) -> Vec<f64> {
    let mut b = vec![0.0; 9 * dg];
    for (j, k, i) in [(1, 2, 0), (2, 0, 1), (0, 1, 2)] {
        for a in 0..dg {
            b[(j * 3 + k) * dg + a] = q[i * dg + a];
            b[(k * 3 + j) * dg + a] = -q[i * dg + a];
        }
    }
    b
}

/// `Q_i = ½ ε_ijk B_jk`.
pub fn hodge_b_to_q(b: &[f64], dg: usize) -> Vec<f64> {
    let mut q = vec![0.0; 3 * dg];
    for (j, k, i) in [(1, 2, 0), (2, 0, 1), (0, 1, 2)] {
        for a in 0..dg {
            q[i * dg + a] = 0.5 * (b[(j * 3 + k) * dg + a] - b[(k * 3 + j) * dg + a]);
        }
    }
    q
}

/// Fourier modes `m ∈ ℤ³` with `max |m_i| ≤ cutoff`, one representative of each `±m` pair.
pub fn half_space_modes(cutoff: usize) -> Vec<[i64; 3]> {
    let c = cutoff as i64;
    let mut modes = Vec::new();
    for a in -c..=c {
        for b in -c..=c {
            for d in -c..=c {
                let m = [a, b, d];
                if m > [0, 0, 0] {
                    modes.push(m);
                }
            }
        }
    }
    modes
}

/// Band-limited real random field with `comps` values per site:
/// `Σ_m a_m cos(2π m·x/L) + b_m sin(2π m·x/L)` with standard-normal coefficients
/// drawn from `rng` in a fixed order.
pub fn random_real_field<R: Rng>(grid: &Grid, comps: usize, cutoff: usize, rng: &mut R) -> Vec<f64> {
    let modes = half_space_modes(cutoff);
    let coeffs: Vec<(f64, f64)> =
        (0..modes.len() * comps).map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let k0 = 2.0 * std::f64::consts::PI / grid.length();
    let mut out = vec![0.0; grid.sites() * comps];
    if comps == 0 {
        return out;
    }
    out.par_chunks_mut(comps).enumerate().for_each(|(site, o)| {
        let x = grid.position(site);
        for (mi, m) in modes.iter().enumerate() {
            let phase = k0 * (m[0] as f64 * x[0] + m[1] as f64 * x[1] + m[2] as f64 * x[2]);
            let (sn, cs) = phase.sin_cos();
            for (j, oj) in o.iter_mut().enumerate() {
                let (a, b) = coeffs[mi * comps + j];
                *oj += a * cs + b * sn;
            }
        }
    });
    out
}

pub fn random_complex_field<R: Rng>(grid: &Grid, comps: usize, cutoff: usize, rng: &mut R) -> Vec<C64> {
    let re = random_real_field(grid, 2 * comps, cutoff, rng);
    re.chunks(2).map(|p| C64::new(p[0], p[1])).collect()
}

/// Unconstrained random seed fields from which initial data is assembled.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSeedFields {
    pub eta: Vec<f64>,
    pub e_seed: Vec<f64>,
    pub phi: Vec<C64>,
    pub phidot: Vec<C64>,
    pub psi: Vec<C64>,
}

impl RandomSeedFields {
    pub fn generate(grid: &Grid, fibers: Fibers, seed: u64, cutoff: usize, mask: SectorMask) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.sites();
        let mut take_real = |on: bool, comps: usize| {
            let f = random_real_field(grid, comps, cutoff, &mut rng);
            if on {
                f
            } else {
                vec![0.0; n * comps]
            }
        };
        let eta = take_real(mask.gauge, 3 * fibers.dg);
        let e_seed = take_real(mask.gauge, 3 * fibers.dg);
        let mut take_cplx = |on: bool, comps: usize| {
            let f = random_complex_field(grid, comps, cutoff, &mut rng);
            if on {
                f
            } else {
                vec![C64::new(0.0, 0.0); n * comps]
            }
        };
        let phi = take_cplx(mask.higgs, fibers.dw);
        let phidot = take_cplx(mask.higgs, fibers.dw);
        let mut psi = take_cplx(mask.dirac, fibers.spinor());
        if fibers.spinor() > 0 {
            psi.chunks_mut(fibers.spinor()).for_each(|c| project_fer_plus(c, fibers.dvp, fibers.dv));
        }
        RandomSeedFields { eta, e_seed, phi, phidot, psi }
    }

    pub fn scaled(&self, c: f64) -> Self {
        RandomSeedFields {
            eta: self.eta.iter().map(|v| v * c).collect(),
            e_seed: self.e_seed.iter().map(|v| v * c).collect(),
            phi: self.phi.iter().map(|v| v * c).collect(),
            phidot: self.phidot.iter().map(|v| v * c).collect(),
            psi: self.psi.iter().map(|v| v * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize, order: StencilOrder) -> Grid {
        Grid::new(n, 1.0, order).unwrap()
    }

    fn sine(g: &Grid, axis: usize) -> Vec<f64> {
        (0..g.sites()).map(|s| (2.0 * PI * g.position(s)[axis]).sin()).collect()
    }

    #[test]
    fn shift_wraps() {
        let g = grid(5, StencilOrder::Fourth);
        let s = g.site([4, 0, 2]);
        assert_eq!(g.coords(g.shift(s, 0, 1)), [0, 0, 2]);
        assert_eq!(g.coords(g.shift(s, 1, -2)), [4, 3, 2]);
        assert_eq!(g.coords(g.shift(s, 2, 3)), [4, 0, 0]);
    }

    #[test]
    fn diff_of_constant_is_zero() {
        let g = grid(8, StencilOrder::Fourth);
        let f = vec![3.5; g.sites() * 2];
        assert!(diff(&g, &f, 2, 1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn diff_converges_at_stencil_order() {
        for (order, expect) in [(StencilOrder::Second, 2.0), (StencilOrder::Fourth, 4.0)] {
            let errs: Vec<f64> = [16, 32]
                .iter()
                .map(|&n| {
                    let g = grid(n, order);
                    let d = diff(&g, &sine(&g, 2), 1, 2);
                    (0..g.sites())
                        .map(|s| (d[s] - 2.0 * PI * (2.0 * PI * g.position(s)[2]).cos()).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            let p = (errs[0] / errs[1]).log2();
            assert!((p - expect).abs() < 0.1, "order {p}");
        }
    }

    #[test]
    fn modified_wavenumber_is_exact_for_single_modes() {
        let g = grid(12, StencilOrder::Fourth);
        let d = diff(&g, &sine(&g, 0), 1, 0);
        let theta = 2.0 * PI * g.dx();
        let kmod = g.order().modified_wavenumber(theta) / g.dx();
        for s in 0..g.sites() {
            assert!((d[s] - kmod * (2.0 * PI * g.position(s)[0]).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn summation_by_parts() {
        let g = grid(8, StencilOrder::Fourth);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f: Vec<f64> = (0..g.sites()).map(|_| rng.sample(StandardNormal)).collect();
        let h: Vec<f64> = (0..g.sites()).map(|_| rng.sample(StandardNormal)).collect();
        for axis in 0..3 {
            let df = diff(&g, &f, 1, axis);
            let dh = diff(&g, &h, 1, axis);
            let s: f64 = (0..g.sites()).map(|i| df[i] * h[i] + f[i] * dh[i]).sum();
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn hodge_round_trip() {
        let q = [1.0, 0.0, 0.0];
        let b = hodge_q_to_b(&q, 1);
        assert_eq!(b[1 * 3 + 2], 1.0);
        assert_eq!(b[2 * 3 + 1], -1.0);
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 2);
        let q = [0.3, -1.2, 2.5, 0.1, 0.0, 4.0];
        let back = hodge_b_to_q(&hodge_q_to_b(&q, 2), 2);
        assert_eq!(back, q.to_vec());
        let b = hodge_q_to_b(&q, 2);
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>() / 2.0;
        let nq: f64 = q.iter().map(|v| v * v).sum();
        assert!((nb - nq).abs() < 1e-14);
    }

    #[test]
    fn covariant_diff_reduces_to_plain_diff() {
        let g = grid(8, StencilOrder::Fourth);
        let frame = FrameGeometry::from_metric(0.0, [(1.0, 0.0, 0.0); 3]);
        let lie = LieData::u1();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let field = random_real_field(&g, 1, 1, &mut rng);
        let eta = random_real_field(&g, 3, 1, &mut rng);
        let d = covariant_diff_lie(&g, &lie, &field, 1, &eta, &frame).unwrap();
        let plain = diff(&g, &field, 1, 1);
        for s in 0..g.sites() {
            assert_eq!(d[s * 3 + 1], plain[s]);
        }
        let rep = ReprData::su2_fundamental();
        let phi = random_complex_field(&g, 2, 1, &mut rng);
        let zero = vec![0.0; g.sites() * 9];
        let d = covariant_diff_repr(&g, &rep, &phi, 1, &zero, &frame).unwrap();
        let plain = diff(&g, &phi, 2, 0);
        for s in 0..g.sites() {
            assert_eq!(d[s * 6], plain[s * 2]);
        }
    }

    #[test]
    fn random_fields_are_deterministic() {
        let g = grid(6, StencilOrder::Fourth);
        let f = Fibers { dg: 3, dw: 2, dv: 3, dvp: 2 };
        let a = RandomSeedFields::generate(&g, f, 42, 1, SectorMask::default());
        let b = RandomSeedFields::generate(&g, f, 42, 1, SectorMask::default());
        assert_eq!(a, b);
        let c = RandomSeedFields::generate(&g, f, 43, 1, SectorMask::default());
        assert_ne!(a, c);
        let masked = RandomSeedFields::generate(&g, f, 42, 1, SectorMask { gauge: true, higgs: false, dirac: true });
        assert!(masked.phi.iter().all(|z| z.norm() == 0.0));
        assert_eq!(masked.psi, a.psi);
    }
}
