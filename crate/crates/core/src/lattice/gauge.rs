//! Gauge transformations of the trivial bundle and the temporal-gauge automorphism.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{diff_block, random_real_field, FieldState, Grid};
use crate::algebra::{polar_unitary, unitarity_defect, GaugeModel, ReprData};
use crate::geometry::FrameGeometry;
use crate::{Error, Result, C64};

/// A gauge transformation `g : T³ → G`, stored per site in the defining
/// representation together with its images in the Higgs, fermion and adjoint
/// representations.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransform {
    sites: usize,
    dims: [usize; 4],
    defining: Vec<C64>,
    higgs: Vec<C64>,
    fermion: Vec<C64>,
    adjoint: Vec<C64>,
}

fn adjoint_generators(model: &GaugeModel) -> ReprData {
    ReprData::adjoint(&model.lie)
}

fn block(m: &DMatrix<C64>) -> Vec<C64> {
    // Row-major flattening.
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

fn matrix(data: &[C64], n: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(n, n, data)
}

impl GaugeTransform {
    fn reprs(model: &GaugeModel) -> [ReprData; 4] {
        [model.defining.clone(), model.higgs.clone(), model.fermion.clone(), adjoint_generators(model)]
    }

    pub fn identity(model: &GaugeModel, grid: &Grid) -> Self {
        let dims = Self::reprs(model).map(|r| r.dim());
        let eye = |n: usize| {
            let one = block(&DMatrix::identity(n, n));
            one.repeat(grid.sites())
        };
        GaugeTransform {
            sites: grid.sites(),
            dims,
            defining: eye(dims[0]),
            higgs: eye(dims[1]),
            fermion: eye(dims[2]),
            adjoint: eye(dims[3]),
        }
    }

    /// `g(x) = exp(ξ(x))` for a Lie-valued scalar field `ξ` (`dg` reals per site).
    pub fn from_lie_field(model: &GaugeModel, grid: &Grid, xi: &[f64]) -> Result<Self> {
        let dg = model.dim_g();
        crate::error::check_len("gauge generator field", xi.len(), grid.sites() * dg)?;
        let reprs = Self::reprs(model);
        let dims = reprs.clone().map(|r| r.dim());
        let build = |r: &ReprData| -> Vec<C64> {
            let n = r.dim();
            let per_site: Vec<Vec<C64>> = (0..grid.sites())
                .into_par_iter()
                .map(|s| if n == 0 { Vec::new() } else { block(&r.matrix(&xi[s * dg..(s + 1) * dg]).exp()) })
                .collect();
            per_site.concat()
        };
        Ok(GaugeTransform {
            sites: grid.sites(),
            dims,
            defining: build(&reprs[0]),
            higgs: build(&reprs[1]),
            fermion: build(&reprs[2]),
            adjoint: build(&reprs[3]),
        })
    }

    /// Smooth random transformation `exp(amplitude·ξ)` with band-limited `ξ`.
    pub fn smooth_random(model: &GaugeModel, grid: &Grid, seed: u64, amplitude: f64, cutoff: usize) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut xi = random_real_field(grid, model.dim_g(), cutoff, &mut rng);
        xi.iter_mut().for_each(|v| *v *= amplitude);
        GaugeTransform::from_lie_field(model, grid, &xi)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Defining-representation matrix at `site`.
    pub fn defining_at(&self, site: usize) -> DMatrix<C64> {
        let n = self.dims[0];
        matrix(&self.defining[site * n * n..(site + 1) * n * n], n)
    }

    /// `max_x ‖g†g − I‖` over every stored representation.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (data, &n) in [&self.defining, &self.higgs, &self.fermion, &self.adjoint].into_iter().zip(&self.dims) {
            if n == 0 {
                continue;
            }
            let w = data.par_chunks(n * n).map(|c| unitarity_defect(&matrix(c, n))).reduce(|| 0.0, f64::max);
            worst = worst.max(w);
        }
        worst
    }

    /// `(∂_k g) g⁻¹` along the frame, projected onto the Lie algebra; layout site, k, a.
    pub fn maurer_cartan(&self, model: &GaugeModel, grid: &Grid, frame: &FrameGeometry) -> Result<Vec<f64>> {
        let (n, dg) = (self.dims[0], model.dim_g());
        let bb = n * n;
        let derivs: Vec<Vec<C64>> =
            (0..3).map(|k| diff_block(grid, &self.defining, bb, 0, bb, k, 1.0 / frame.b[k])).collect();
        let rows: Vec<Result<Vec<f64>>> = (0..grid.sites())
            .into_par_iter()
            .map(|s| {
                let ginv = self.defining_at(s).adjoint();
                let mut out = Vec::with_capacity(3 * dg);
                for d in &derivs {
                    let m = matrix(&d[s * bb..(s + 1) * bb], n) * &ginv;
                    out.extend(model.defining.project_to_algebra(&m)?);
                }
                Ok(out)
            })
            .collect();
        Ok(rows.into_iter().collect::<Result<Vec<_>>>()?.concat())
    }

    /// Transformed state: matter rotates by its representation, `E` and `Q`
    /// by the adjoint action, and `η ↦ Ad_g η − (∂g)g⁻¹`.
    pub fn apply(&self, state: &FieldState, model: &GaugeModel, frame: &FrameGeometry) -> Result<FieldState> {
        let grid = state.grid;
        if grid.sites() != self.sites {
            return Err(Error::Dimension("gauge transform and state live on different grids".into()));
        }
        let f = state.fibers;
        let mc = self.maurer_cartan(model, &grid, frame)?;
        let mut out = state.clone();
        let dg = f.dg;
        let ad = |site: usize, x: &[f64], o: &mut [f64]| {
            let a = &self.adjoint[site * dg * dg..(site + 1) * dg * dg];
            for r in 0..dg {
                o[r] = (0..dg).map(|c| a[r * dg + c].re * x[c]).sum();
            }
        };
        if dg > 0 {
            out.eta.par_chunks_mut(3 * dg).enumerate().for_each(|(s, o)| {
                for k in 0..3 {
                    ad(s, &state.eta[(s * 3 + k) * dg..(s * 3 + k + 1) * dg], &mut o[k * dg..(k + 1) * dg]);
                    for a in 0..dg {
                        o[k * dg + a] -= mc[(s * 3 + k) * dg + a];
                    }
                }
            });
            for (dst, src) in [(&mut out.e, &state.e), (&mut out.q, &state.q)] {
                dst.par_chunks_mut(3 * dg).enumerate().for_each(|(s, o)| {
                    for k in 0..3 {
                        ad(s, &src[(s * 3 + k) * dg..(s * 3 + k + 1) * dg], &mut o[k * dg..(k + 1) * dg]);
                    }
                });
            }
        }
        let rotate = |mats: &[C64], n: usize, count: usize, src: &[C64], dst: &mut [C64]| {
            if n == 0 {
                return;
            }
            dst.par_chunks_mut(count * n).enumerate().for_each(|(s, o)| {
                let m = &mats[s * n * n..(s + 1) * n * n];
                for c in 0..count {
                    let x = &src[(s * count + c) * n..(s * count + c + 1) * n];
                    for r in 0..n {
                        o[c * n + r] = (0..n).map(|j| m[r * n + j] * x[j]).sum();
                    }
                }
            });
        };
        rotate(&self.higgs, f.dw, 1, &state.phi, &mut out.phi);
        rotate(&self.higgs, f.dw, 1, &state.phidot, &mut out.phidot);
        rotate(&self.higgs, f.dw, 3, &state.z, &mut out.z);
        rotate(&self.fermion, f.dv, 4, &state.psi, &mut out.psi);
        rotate(&self.fermion, f.dv, 4, &state.psidot, &mut out.psidot);
        rotate(&self.fermion, f.dv, 12, &state.s, &mut out.s);
        Ok(out)
    }
}

/// Gauge transformations `g(τ_n)` along a time grid.
#[derive(Clone, Debug)]
pub struct AutomorphismSeries {
    pub taus: Vec<f64>,
    pub transforms: Vec<GaugeTransform>,
}

impl AutomorphismSeries {
    /// Temporal coefficient `−(∂_τ g) g⁻¹` of the transformed connection at
    /// interior sample `i`, by the fourth-order centered difference of the
    /// stored series (uniform time grid), projected onto the algebra.
    pub fn temporal_coefficient(&self, model: &GaugeModel, i: usize) -> Result<Vec<f64>> {
        if i < 2 || i + 2 >= self.taus.len() {
            return Err(Error::Input("temporal coefficient needs two samples on each side".into()));
        }
        let dt = self.taus[i + 1] - self.taus[i];
        let g = &self.transforms;
        let dg = model.dim_g();
        let sites = g[i].sites;
        let rows: Vec<Result<Vec<f64>>> = (0..sites)
            .into_par_iter()
            .map(|s| {
                let d = (g[i - 2].defining_at(s) - g[i + 2].defining_at(s)) * C64::new(1.0 / (12.0 * dt), 0.0)
                    + (g[i + 1].defining_at(s) - g[i - 1].defining_at(s)) * C64::new(8.0 / (12.0 * dt), 0.0);
                let m = -(d * g[i].defining_at(s).adjoint());
                let v = model.defining.project_to_algebra(&m)?;
                debug_assert_eq!(v.len(), dg);
                Ok(v)
            })
            .collect();
        Ok(rows.into_iter().collect::<Result<Vec<_>>>()?.concat())
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.transforms.iter().map(GaugeTransform::unitarity_defect).fold(0.0, f64::max)
    }
}

/// Integrate `∂_τ g = −ρ*(α) g`, `g(τ₀) = e`, with classical RK4 between the
/// given sample times and polar re-projection after every step, in every
/// stored representation. `alpha(τ, site)` returns the Lie vector `α`.
pub fn build_automorphism<F>(model: &GaugeModel, grid: &Grid, taus: &[f64], alpha: F) -> Result<AutomorphismSeries>
where
    F: Fn(f64, usize) -> Vec<f64> + Sync,
{
    if taus.is_empty() {
        return Err(Error::Input("automorphism needs at least one time sample".into()));
    }
    let reprs = GaugeTransform::reprs(model);
    let mut current = GaugeTransform::identity(model, grid);
    let mut transforms = vec![current.clone()];
    for w in taus.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let dt = t1 - t0;
        let th = t0 + 0.5 * dt;
        let step = |r: &ReprData, data: &[C64]| -> Vec<C64> {
            let n = r.dim();
            if n == 0 {
                return Vec::new();
            }
            let per_site: Vec<Vec<C64>> = (0..grid.sites())
                .into_par_iter()
                .map(|s| {
                    let g = matrix(&data[s * n * n..(s + 1) * n * n], n);
                    let a0 = -r.matrix(&alpha(t0, s));
                    let ah = -r.matrix(&alpha(th, s));
                    let a1 = -r.matrix(&alpha(t1, s));
                    let half = C64::new(0.5 * dt, 0.0);
                    let k1 = &a0 * &g;
                    let k2 = &ah * (&g + &k1 * half);
                    let k3 = &ah * (&g + &k2 * half);
                    let k4 = &a1 * (&g + &k3 * C64::new(dt, 0.0));
                    let next = g + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
                    block(&polar_unitary(&next))
                })
                .collect();
            per_site.concat()
        };
        current = GaugeTransform {
            sites: current.sites,
            dims: current.dims,
            defining: step(&reprs[0], &current.defining),
            higgs: step(&reprs[1], &current.higgs),
            fermion: step(&reprs[2], &current.fermion),
            adjoint: step(&reprs[3], &current.adjoint),
        };
        transforms.push(current.clone());
    }
    Ok(AutomorphismSeries { taus: taus.to_vec(), transforms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{GaugeModel, U1Charges};
    use crate::lattice::{RandomSeedFields, SectorMask, StencilOrder};

    fn flat() -> FrameGeometry {
        FrameGeometry::from_metric(0.0, [(1.0, 0.0, 0.0); 3])
    }

    #[test]
    fn identity_leaves_state_unchanged() {
        let model = GaugeModel::su2_electroweak(1.0).unwrap();
        let grid = Grid::new(6, 1.0, StencilOrder::Fourth).unwrap();
        let f = crate::lattice::Fibers::of(&model);
        let seed = RandomSeedFields::generate(&grid, f, 1, 1, SectorMask::default());
        let mut st = FieldState::zeros(grid, f);
        st.eta = seed.eta;
        st.phi = seed.phi;
        st.psi = seed.psi;
        let g = GaugeTransform::identity(&model, &grid);
        let out = g.apply(&st, &model, &flat()).unwrap();
        assert_eq!(out.max_diff(&st), 0.0);
    }

    #[test]
    fn pointwise_invariants_are_preserved() {
        let model = GaugeModel::su3_color(1.0).unwrap();
        let grid = Grid::new(6, 1.0, StencilOrder::Fourth).unwrap();
        let f = crate::lattice::Fibers::of(&model);
        let seed = RandomSeedFields::generate(&grid, f, 5, 1, SectorMask::default());
        let mut st = FieldState::zeros(grid, f);
        st.phi = seed.phi;
        st.psi = seed.psi;
        st.e = seed.e_seed;
        let g = GaugeTransform::smooth_random(&model, &grid, 9, 0.7, 1).unwrap();
        assert!(g.unitarity_defect() < 1e-12);
        let out = g.apply(&st, &model, &flat()).unwrap();
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let normr = |v: &[f64]| v.iter().map(|z| z * z).sum::<f64>();
        for s in 0..grid.sites() {
            let (a, b) = (norm(&st.phi[s * 3..s * 3 + 3]), norm(&out.phi[s * 3..s * 3 + 3]));
            assert!((a - b).abs() < 1e-12 * (1.0 + a));
            let sp = f.spinor();
            let (a, b) = (norm(&st.psi[s * sp..(s + 1) * sp]), norm(&out.psi[s * sp..(s + 1) * sp]));
            assert!((a - b).abs() < 1e-12 * (1.0 + a));
            let (a, b) = (normr(&st.e[s * 24..(s + 1) * 24]), normr(&out.e[s * 24..(s + 1) * 24]));
            assert!((a - b).abs() < 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn u1_constant_alpha_matches_closed_form() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let grid = Grid::new(4, 1.0, StencilOrder::Fourth).unwrap();
        let c = 0.8;
        let taus: Vec<f64> = (0..=40).map(|i| i as f64 * 0.025).collect();
        let series = build_automorphism(&model, &grid, &taus, |_, _| vec![c]).unwrap();
        for (t, g) in taus.iter().zip(&series.transforms) {
            let expect = C64::new(0.0, -c * t).exp();
            assert!((g.defining_at(3)[(0, 0)] - expect).norm() < 1e-8);
        }
        let coeff = series.temporal_coefficient(&model, 10).unwrap();
        assert!(coeff.iter().all(|v| (v - c).abs() < 1e-7));
    }

    #[test]
    fn zero_alpha_gives_identity() {
        let model = GaugeModel::su2_electroweak(1.0).unwrap();
        let grid = Grid::new(4, 1.0, StencilOrder::Fourth).unwrap();
        let series = build_automorphism(&model, &grid, &[0.0, 0.1, 0.2], |_, _| vec![0.0; 3]).unwrap();
        let id = GaugeTransform::identity(&model, &grid);
        assert!(series.transforms.iter().all(|g| *g == id));
    }
}
