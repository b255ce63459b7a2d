//! Constraints of the first-order system, constraint-satisfying initial data
//! and propagation monitoring.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::GaugeModel;
use crate::clifford::gamma;
use crate::dynamics::{charge_density, Dynamics};
use crate::geometry::FrameGeometry;
use crate::lattice::{covariant_diff_lie, covariant_diff_repr, covariant_diff_spinor, diff_block, FieldState, Grid, RandomSeedFields};
use crate::numerics::observed_order;
use crate::reduce::pairwise_sum;
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// `L²` norm with the physical volume element `b₁b₂b₃ dx³`.
pub fn l2_norm(grid: &Grid, frame: &FrameGeometry, values: &[f64]) -> f64 {
    let sq: Vec<f64> = values.par_iter().map(|v| v * v).collect();
    (pairwise_sum(&sq) * grid.cell_volume() * frame.volume_factor()).sqrt()
}

pub fn l2_norm_complex(grid: &Grid, frame: &FrameGeometry, values: &[C64]) -> f64 {
    let sq: Vec<f64> = values.par_iter().map(|v| v.norm_sqr()).collect();
    (pairwise_sum(&sq) * grid.cell_volume() * frame.volume_factor()).sqrt()
}

/// `(F_η)_{jk} = ∂̂_jη_k − ∂̂_kη_j + [η_j, η_k]` in dual form: component `i`
/// holds the pair `(j, k)` cyclic after `i`.
pub fn discrete_curvature(grid: &Grid, model: &GaugeModel, eta: &[f64], frame: &FrameGeometry) -> Vec<f64> {
    let dg = model.dim_g();
    let blk = 3 * dg;
    let mut out = vec![0.0; grid.sites() * blk];
    if dg == 0 {
        return out;
    }
    let d: Vec<Vec<f64>> = (0..3).map(|k| diff_block(grid, eta, blk, 0, blk, k, 1.0 / frame.b[k])).collect();
    out.par_chunks_mut(blk).enumerate().for_each(|(site, o)| {
        let e = &eta[site * blk..(site + 1) * blk];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let oi = &mut o[i * dg..(i + 1) * dg];
            for a in 0..dg {
                oi[a] = d[j][site * blk + k * dg + a] - d[k][site * blk + j * dg + a];
            }
            model.lie.bracket_add(&e[j * dg..(j + 1) * dg], &e[k * dg..(k + 1) * dg], 1.0, oi);
        }
    });
    out
}

/// Curvature constraint `G = ⋆Q − F_η` in dual form.
pub fn curvature_constraint(model: &GaugeModel, state: &FieldState, frame: &FrameGeometry) -> Vec<f64> {
    let mut g = discrete_curvature(&state.grid, model, &state.eta, frame);
    g.par_iter_mut().zip(&state.q).for_each(|(g, q)| *g = q - *g);
    g
}

/// Bianchi residual: the fully antisymmetrized `D_η B`, equal to `Σ_k D_k Q_k`.
pub fn bianchi_constraint(model: &GaugeModel, state: &FieldState, frame: &FrameGeometry) -> Result<Vec<f64>> {
    covariant_divergence(&state.grid, model, &state.q, &state.eta, frame)
}

/// `Σ_k D_k X_k` for a Lie-valued 1-form.
pub fn covariant_divergence(grid: &Grid, model: &GaugeModel, x: &[f64], eta: &[f64], frame: &FrameGeometry) -> Result<Vec<f64>> {
    let dg = model.dim_g();
    let d = covariant_diff_lie(grid, &model.lie, x, 3, eta, frame)?;
    let mut out = vec![0.0; grid.sites() * dg];
    if dg == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(dg).enumerate().for_each(|(site, o)| {
        for k in 0..3 {
            let base = (site * 3 + k) * 3 * dg + k * dg;
            for a in 0..dg {
                o[a] += d[base + a];
            }
        }
    });
    Ok(out)
}

/// Gauss constraint `C₀ = Σ_k D_k E_k − 𝔍₀`.
pub fn gauss_constraint(model: &GaugeModel, state: &FieldState, frame: &FrameGeometry) -> Result<Vec<f64>> {
    let mut c = covariant_divergence(&state.grid, model, &state.e, &state.eta, frame)?;
    let rho = charge_density(model, state);
    c.par_iter_mut().zip(&rho).for_each(|(c, r)| *c -= r);
    Ok(c)
}

/// `γ₀(Σ_k γ_k S_k + Y_Φ Ψ)`, the value of `Ψ̇` demanded by the Dirac equation.
pub fn dirac_velocity(model: &GaugeModel, state: &FieldState, s: &[C64]) -> Vec<C64> {
    let f = state.fibers;
    let (dw, dv, sp) = (f.dw, f.dv, f.spinor());
    let mut out = vec![ZERO; state.grid.sites() * sp];
    if sp == 0 {
        return out;
    }
    let yuk = &model.yukawa;
    let with_yukawa = dw > 0 && !yuk.is_zero();
    let g = [gamma(0), gamma(1), gamma(2), gamma(3)];
    out.par_chunks_mut(sp).enumerate().for_each_init(
        || vec![ZERO; sp],
        |tmp, (site, o)| {
            tmp.iter_mut().for_each(|t| *t = ZERO);
            for k in 0..3 {
                g[k + 1].apply_add_re(&s[(site * 3 + k) * sp..(site * 3 + k + 1) * sp], dv, 1.0, tmp);
            }
            if with_yukawa {
                let z = yuk.z_matrix(&state.phi[site * dw..(site + 1) * dw]);
                yuk.apply_spinor_with(&z, &state.psi[site * sp..(site + 1) * sp], 1.0, tmp);
            }
            g[0].apply_add_re(tmp, dv, 1.0, o);
        },
    );
    out
}

/// Dirac constraint `Θ = Ψ̇ − γ₀(Σ_k γ_k S_k + Y_Φ Ψ)` using the evolved `S`.
pub fn dirac_constraint(model: &GaugeModel, state: &FieldState) -> Vec<C64> {
    let mut v = dirac_velocity(model, state, &state.s);
    v.par_iter_mut().zip(&state.psidot).for_each(|(v, p)| *v = p - *v);
    v
}

/// `Z − D_ηΦ`.
pub fn higgs_consistency(model: &GaugeModel, state: &FieldState, frame: &FrameGeometry) -> Result<Vec<C64>> {
    let mut d = covariant_diff_repr(&state.grid, &model.higgs, &state.phi, 1, &state.eta, frame)?;
    d.par_iter_mut().zip(&state.z).for_each(|(d, z)| *d = z - *d);
    Ok(d)
}

/// `S − D_ηΨ`.
pub fn spinor_consistency(model: &GaugeModel, state: &FieldState, frame: &FrameGeometry) -> Result<Vec<C64>> {
    let mut d = covariant_diff_spinor(&state.grid, &model.fermion, &state.psi, 1, &state.eta, frame)?;
    d.par_iter_mut().zip(&state.s).for_each(|(d, s)| *d = s - *d);
    Ok(d)
}

/// Residual fields of all constraints at one time.
#[derive(Clone, Debug)]
pub struct ConstraintFields {
    pub curvature: Vec<f64>,
    pub bianchi: Vec<f64>,
    pub gauss: Vec<f64>,
    pub dirac: Vec<C64>,
    pub higgs_consistency: Vec<C64>,
    pub spinor_consistency: Vec<C64>,
}

impl ConstraintFields {
    pub fn evaluate(model: &GaugeModel, state: &FieldState, frame: &FrameGeometry) -> Result<Self> {
        Ok(ConstraintFields {
            curvature: curvature_constraint(model, state, frame),
            bianchi: bianchi_constraint(model, state, frame)?,
            gauss: gauss_constraint(model, state, frame)?,
            dirac: dirac_constraint(model, state),
            higgs_consistency: higgs_consistency(model, state, frame)?,
            spinor_consistency: spinor_consistency(model, state, frame)?,
        })
    }
}

/// `L²` norms of the constraint residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub tau: f64,
    pub curvature: f64,
    pub bianchi: f64,
    pub gauss: f64,
    pub dirac: f64,
    pub higgs_consistency: f64,
    pub spinor_consistency: f64,
    /// `‖C₀(τ) − C₀(0)‖`.
    pub gauss_drift: f64,
}

impl ConstraintReport {
    pub const COLUMNS: [&'static str; 8] =
        ["tau", "curvature", "bianchi", "gauss", "dirac", "higgs_consistency", "spinor_consistency", "gauss_drift"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.tau,
            self.curvature,
            self.bianchi,
            self.gauss,
            self.dirac,
            self.higgs_consistency,
            self.spinor_consistency,
            self.gauss_drift,
        ]
    }

    /// The four constraints of the system, in the order curvature, Bianchi, Gauss, Dirac.
    pub fn primary(&self) -> [(&'static str, f64); 4] {
        [("curvature", self.curvature), ("bianchi", self.bianchi), ("gauss", self.gauss), ("dirac", self.dirac)]
    }
}

/// Tracks constraint norms along a run relative to the initial residuals.
#[derive(Clone, Debug)]
pub struct ConstraintMonitor {
    initial_gauss: Vec<f64>,
    pub reports: Vec<ConstraintReport>,
}

impl ConstraintMonitor {
    pub fn new(dynamics: &Dynamics, initial: &FieldState) -> Result<Self> {
        let frame = dynamics.background.frame(initial.tau)?;
        let initial_gauss = gauss_constraint(&dynamics.model, initial, &frame)?;
        Ok(ConstraintMonitor { initial_gauss, reports: Vec::new() })
    }

    pub fn record(&mut self, dynamics: &Dynamics, state: &FieldState) -> Result<ConstraintReport> {
        let frame = dynamics.background.frame(state.tau)?;
        let fields = ConstraintFields::evaluate(&dynamics.model, state, &frame)?;
        let grid = &state.grid;
        let drift: Vec<f64> = fields.gauss.iter().zip(&self.initial_gauss).map(|(a, b)| a - b).collect();
        let report = ConstraintReport {
            tau: state.tau,
            curvature: l2_norm(grid, &frame, &fields.curvature),
            bianchi: l2_norm(grid, &frame, &fields.bianchi),
            gauss: l2_norm(grid, &frame, &fields.gauss),
            dirac: l2_norm_complex(grid, &frame, &fields.dirac),
            higgs_consistency: l2_norm_complex(grid, &frame, &fields.higgs_consistency),
            spinor_consistency: l2_norm_complex(grid, &frame, &fields.spinor_consistency),
            gauss_drift: l2_norm(grid, &frame, &drift),
        };
        self.reports.push(report);
        Ok(report)
    }

    /// Largest ratio `‖C(τ)‖ / max(‖C(0)‖, floor)` per primary constraint.
    pub fn growth_ratios(&self, floor: f64) -> [(&'static str, f64); 4] {
        let Some(first) = self.reports.first() else {
            return ConstraintReport::default().primary().map(|(n, _)| (n, 0.0));
        };
        let base = first.primary();
        let mut out = base.map(|(n, _)| (n, 0.0f64));
        for r in &self.reports {
            for (i, (_, v)) in r.primary().iter().enumerate() {
                out[i].1 = out[i].1.max(v / base[i].1.max(floor));
            }
        }
        out
    }

    pub fn terminal(&self) -> Option<&ConstraintReport> {
        self.reports.last()
    }
}

/// Observed orders of the terminal constraint values between a coarse and a
/// twice-refined run.
pub fn refinement_orders(coarse: &ConstraintReport, fine: &ConstraintReport) -> [(&'static str, f64); 5] {
    [
        ("curvature", observed_order(coarse.curvature, fine.curvature)),
        ("bianchi", observed_order(coarse.bianchi, fine.bianchi)),
        ("gauss", observed_order(coarse.gauss, fine.gauss)),
        ("dirac", observed_order(coarse.dirac, fine.dirac)),
        ("gauss_drift", observed_order(coarse.gauss_drift, fine.gauss_drift)),
    ]
}

/// Settings of the covariant Poisson solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussSolveOptions {
    pub cg_tol: f64,
    /// Iteration cap; `None` means `10·n³`.
    pub max_iterations: Option<usize>,
    /// Adjust `Φ̇` along `ρ*(g)Φ` so the total charge vanishes before solving.
    pub neutralize: bool,
}

impl Default for GaussSolveOptions {
    fn default() -> Self {
        GaussSolveOptions { cg_tol: 1e-10, max_iterations: None, neutralize: true }
    }
}

/// Diagnostics of the initial-data construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialDataReport {
    pub cg_iterations: usize,
    pub gauss_residual: f64,
    /// Total charge per Lie direction before neutralization.
    pub total_charge: Vec<f64>,
    /// `L²` norm of the source component outside the solvable range that was removed.
    pub removed_source: f64,
    pub notes: Vec<String>,
}

/// `A φ = −Σ_k D_k D_k φ`, positive semidefinite under the Euclidean pairing.
fn poisson_apply(grid: &Grid, model: &GaugeModel, eta: &[f64], frame: &FrameGeometry, phi: &[f64]) -> Result<Vec<f64>> {
    let d = covariant_diff_lie(grid, &model.lie, phi, 1, eta, frame)?;
    let mut div = covariant_divergence(grid, model, &d, eta, frame)?;
    div.par_iter_mut().for_each(|v| *v = -*v);
    Ok(div)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let p: Vec<f64> = a.par_iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&p)
}

/// Lie directions on which the adjoint action of every connection component vanishes.
fn central_directions(model: &GaugeModel) -> Vec<usize> {
    let dg = model.dim_g();
    (0..dg)
        .filter(|&a| (0..dg).all(|b| (0..dg).all(|c| model.lie.structure_constant(a, b, c) == 0.0)))
        .collect()
}

/// Sign patterns `(−1)^{ε·x}`, `ε ∈ {0,1}³`, spanning the kernel of the
/// centered difference on even grids.
fn checkerboard_modes(grid: &Grid) -> Vec<Vec<f64>> {
    let n = grid.n();
    let mut modes = Vec::new();
    for mask in 0..8usize {
        if mask != 0 && n % 2 == 1 {
            continue;
        }
        let v: Vec<f64> = (0..grid.sites())
            .map(|s| {
                let c = grid.coords(s);
                let parity: usize = (0..3).filter(|k| mask >> k & 1 == 1).map(|k| c[k]).sum();
                if parity % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        modes.push(v);
    }
    modes
}

/// Solve `A φ = b` by conjugate gradients, stopping when the weighted residual
/// norm drops below `tol`.
fn conjugate_gradient(
    grid: &Grid,
    model: &GaugeModel,
    eta: &[f64],
    frame: &FrameGeometry,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let weight = grid.cell_volume() * frame.volume_factor();
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..=max_iter {
        if (rr * weight).sqrt() <= tol {
            return Ok((x, it));
        }
        if it == max_iter {
            break;
        }
        let ap = poisson_apply(grid, model, eta, frame, &p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("Poisson operator lost positivity at iteration {it} (pᵀAp = {pap:e})")));
        }
        let alpha = rr / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        p.par_iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        rr = rr_new;
    }
    Err(Error::Solver(format!(
        "conjugate gradient did not reach tolerance {tol:e} within {max_iter} iterations (residual {:e})",
        (rr * weight).sqrt()
    )))
}

/// Replace `state.e` by `E_seed − D_ηφ` with `φ` solving the covariant Poisson
/// problem, so that the Gauss constraint holds to `cg_tol`. The charge density
/// must already be final.
pub fn solve_gauss(
    dynamics: &Dynamics,
    state: &mut FieldState,
    e_seed: &[f64],
    opts: &GaussSolveOptions,
) -> Result<InitialDataReport> {
    let model = &dynamics.model;
    let grid = state.grid;
    let frame = dynamics.background.frame(state.tau)?;
    let dg = model.dim_g();
    let mut report = InitialDataReport::default();
    state.e.copy_from_slice(e_seed);
    if dg == 0 {
        return Ok(report);
    }
    let c0 = gauss_constraint(model, state, &frame)?;
    let mut rhs: Vec<f64> = c0.iter().map(|v| -v).collect();

    // Remove the part of the source in the kernel of the operator along central directions.
    let central = central_directions(model);
    let eta_zero = state.eta.iter().all(|v| *v == 0.0);
    let directions: Vec<usize> = if eta_zero { (0..dg).collect() } else { central };
    let mut removed = vec![0.0; rhs.len()];
    for mode in checkerboard_modes(&grid) {
        let norm2 = dot(&mode, &mode);
        for &a in &directions {
            let proj: f64 = pairwise_sum(&(0..grid.sites()).map(|s| mode[s] * rhs[s * dg + a]).collect::<Vec<_>>()) / norm2;
            if proj != 0.0 {
                for s in 0..grid.sites() {
                    rhs[s * dg + a] -= proj * mode[s];
                    removed[s * dg + a] += proj * mode[s];
                }
            }
        }
    }
    report.removed_source = l2_norm(&grid, &frame, &removed);
    if report.removed_source > opts.cg_tol {
        report.notes.push(format!(
            "removed a source component of L² norm {:.3e} outside the range of the covariant Laplacian",
            report.removed_source
        ));
    }
    let max_iter = opts.max_iterations.unwrap_or(10 * grid.n().pow(3));
    let (phi, its) = conjugate_gradient(&grid, model, &state.eta, &frame, &rhs, opts.cg_tol, max_iter)?;
    report.cg_iterations = its;
    let dphi = covariant_diff_lie(&grid, &model.lie, &phi, 1, &state.eta, &frame)?;
    state.e.par_iter_mut().zip(&dphi).for_each(|(e, d)| *e -= d);
    report.gauss_residual = l2_norm(&grid, &frame, &gauss_constraint(model, state, &frame)?);
    Ok(report)
}

/// Shift `Φ̇ ← Φ̇ + Σ_a c_a ρ*(ξ_a)Φ` so that `Σ_x 𝔍₀ = 0` in every Lie direction
/// (least squares when the charge Gram matrix is singular). Returns the total
/// charge before the shift.
pub fn neutralize_charge(model: &GaugeModel, state: &mut FieldState) -> Vec<f64> {
    let dg = model.dim_g();
    let dw = model.dim_w();
    let rho = charge_density(model, state);
    let total: Vec<f64> = (0..dg).map(|a| pairwise_sum(&(0..state.grid.sites()).map(|s| rho[s * dg + a]).collect::<Vec<_>>())).collect();
    if dg == 0 || dw == 0 {
        return total;
    }
    // 𝔍₀^b changes by −Σ_a c_a Re⟨ρ_aΦ, ρ_bΦ⟩.
    let sites = state.grid.sites();
    let mut gram = DMatrix::<f64>::zeros(dg, dg);
    for a in 0..dg {
        for b in a..dg {
            let vals: Vec<f64> = (0..sites)
                .map(|s| {
                    let phi = &state.phi[s * dw..(s + 1) * dw];
                    let mut ra = vec![ZERO; dw];
                    let mut rb = vec![ZERO; dw];
                    model.higgs.apply_basis(a, phi, &mut ra);
                    model.higgs.apply_basis(b, phi, &mut rb);
                    ra.iter().zip(&rb).map(|(x, y)| (x.conj() * y).re).sum()
                })
                .collect();
            let g = pairwise_sum(&vals);
            gram[(a, b)] = g;
            gram[(b, a)] = g;
        }
    }
    let scale = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return total;
    }
    let svd = gram.svd(true, true);
    let Ok(c) = svd.solve(&DVector::from_vec(total.clone()), 1e-12 * scale) else {
        return total;
    };
    let mut ra = vec![ZERO; dw];
    for s in 0..sites {
        let phi: Vec<C64> = state.phi[s * dw..(s + 1) * dw].to_vec();
        for a in 0..dg {
            model.higgs.apply_basis(a, &phi, &mut ra);
            for (p, r) in state.phidot[s * dw..(s + 1) * dw].iter_mut().zip(&ra) {
                *p += r * c[a];
            }
        }
    }
    total
}

/// Assemble constraint-satisfying initial data at `τ = 0` from free seeds:
/// `Q` from the discrete curvature of `η`, `Z = D_ηΦ`, `S = D_ηΨ`, `Ψ̇` from
/// the Dirac constraint and `E` from the Gauss projection of the seed.
pub fn assemble_initial_data(
    dynamics: &Dynamics,
    grid: Grid,
    seeds: &RandomSeedFields,
    opts: &GaussSolveOptions,
) -> Result<(FieldState, InitialDataReport)> {
    let model = &dynamics.model;
    let fibers = dynamics.fibers();
    let frame = dynamics.background.frame(0.0)?;
    let mut u = FieldState::zeros(grid, fibers);
    crate::error::check_len("η seed", seeds.eta.len(), u.eta.len())?;
    crate::error::check_len("Φ seed", seeds.phi.len(), u.phi.len())?;
    crate::error::check_len("Ψ seed", seeds.psi.len(), u.psi.len())?;
    u.eta.copy_from_slice(&seeds.eta);
    u.phi.copy_from_slice(&seeds.phi);
    u.phidot.copy_from_slice(&seeds.phidot);
    u.psi.copy_from_slice(&seeds.psi);
    u.project_fermions();
    u.q = discrete_curvature(&grid, model, &u.eta, &frame);
    u.z = covariant_diff_repr(&grid, &model.higgs, &u.phi, 1, &u.eta, &frame)?;
    u.s = covariant_diff_spinor(&grid, &model.fermion, &u.psi, 1, &u.eta, &frame)?;
    u.psidot = dirac_velocity(model, &u, &u.s);
    let total = if opts.neutralize { neutralize_charge(model, &mut u) } else { Vec::new() };
    let mut report = solve_gauss(dynamics, &mut u, &seeds.e_seed, opts)?;
    report.total_charge = total;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{LieData, U1Charges};
    use crate::dynamics::Couplings;
    use crate::geometry::{Background, ScaleProfile, SpatialMetric};
    use crate::lattice::{diff, random_real_field, Fibers, SectorMask, StencilOrder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dyn_for(model: GaugeModel, spatial: SpatialMetric) -> Dynamics {
        let bg = Background::new(ScaleProfile::DeSitter { a: 1.0 }, 1.0, spatial).unwrap();
        Dynamics::new(model, bg, Couplings::default()).unwrap()
    }

    fn seeds(d: &Dynamics, grid: &Grid, seed: u64, amp: f64) -> RandomSeedFields {
        RandomSeedFields::generate(grid, d.fibers(), seed, 1, SectorMask::default()).scaled(amp)
    }

    #[test]
    fn zero_state_satisfies_all_constraints() {
        let d = dyn_for(GaugeModel::su2_electroweak(0.5).unwrap(), SpatialMetric::Static);
        let grid = Grid::new(6, 1.0, StencilOrder::Fourth).unwrap();
        let u = FieldState::zeros(grid, d.fibers());
        let mut m = ConstraintMonitor::new(&d, &u).unwrap();
        let r = m.record(&d, &u).unwrap();
        assert!(r.values()[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn abelian_curvature_of_eta_has_zero_residual_and_divergence() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let d = dyn_for(model.clone(), SpatialMetric::Static);
        let grid = Grid::new(12, 1.0, StencilOrder::Fourth).unwrap();
        let frame = d.background.frame(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut u = FieldState::zeros(grid, d.fibers());
        u.eta = random_real_field(&grid, 3, 2, &mut rng);
        u.q = discrete_curvature(&grid, &model, &u.eta, &frame);
        assert!(curvature_constraint(&model, &u, &frame).iter().all(|v| v.abs() < 1e-13));
        assert!(bianchi_constraint(&model, &u, &frame).unwrap().iter().all(|v| v.abs() < 1e-11));
        // Negative control: unrelated Q.
        u.q = random_real_field(&grid, 3, 2, &mut rng);
        assert!(l2_norm(&grid, &frame, &curvature_constraint(&model, &u, &frame)) > 1e-2);
        assert!(l2_norm(&grid, &frame, &bianchi_constraint(&model, &u, &frame).unwrap()) > 1e-2);
    }

    #[test]
    fn nonabelian_bianchi_residual_converges() {
        let model = GaugeModel::adjoint_higgs(LieData::su2()).unwrap();
        let d = dyn_for(model.clone(), SpatialMetric::Static);
        let frame = d.background.frame(0.0).unwrap();
        let mut errs = Vec::new();
        for n in [16, 32] {
            let grid = Grid::new(n, 1.0, StencilOrder::Fourth).unwrap();
            let eta: Vec<f64> = (0..grid.sites())
                .flat_map(|s| {
                    let p = grid.position(s).map(|x| 2.0 * std::f64::consts::PI * x);
                    let mut v = vec![0.0; 9];
                    v[0] = p[1].sin();
                    v[4] = (p[2] + p[0]).cos();
                    v[8] = (p[0] - p[1]).sin();
                    v[2] = 0.5 * p[2].cos();
                    v
                })
                .collect();
            let mut u = FieldState::zeros(grid, d.fibers());
            u.eta = eta;
            u.q = discrete_curvature(&grid, &model, &u.eta, &frame);
            errs.push(l2_norm(&grid, &frame, &bianchi_constraint(&model, &u, &frame).unwrap()));
        }
        let order = observed_order(errs[0], errs[1]);
        assert!(order > 3.5, "Bianchi order {order} ({errs:?})");
    }

    #[test]
    fn gauss_of_divergence_free_and_gradient_fields() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let d = dyn_for(model.clone(), SpatialMetric::Static);
        let grid = Grid::new(12, 1.0, StencilOrder::Fourth).unwrap();
        let frame = d.background.frame(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_real_field(&grid, 3, 2, &mut rng);
        let mut u = FieldState::zeros(grid, d.fibers());
        u.e = discrete_curvature(&grid, &model, &a, &frame);
        assert!(gauss_constraint(&model, &u, &frame).unwrap().iter().all(|v| v.abs() < 1e-11));
        let phi = random_real_field(&grid, 1, 2, &mut rng);
        for k in 0..3 {
            let dk = diff(&grid, &phi, 1, k);
            for s in 0..grid.sites() {
                u.e[s * 3 + k] = dk[s];
            }
        }
        assert!(l2_norm(&grid, &frame, &gauss_constraint(&model, &u, &frame).unwrap()) > 1e-1);
    }

    #[test]
    fn poisson_operator_is_symmetric() {
        let model = GaugeModel::su2_electroweak(0.4).unwrap();
        let d = dyn_for(model.clone(), SpatialMetric::Bianchi1 { rates: [0.2, 0.1, -0.1] });
        let grid = Grid::new(8, 1.0, StencilOrder::Fourth).unwrap();
        let frame = d.background.frame(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let eta = random_real_field(&grid, 9, 2, &mut rng);
        let x = random_real_field(&grid, 3, 3, &mut rng);
        let y = random_real_field(&grid, 3, 3, &mut rng);
        let ax = poisson_apply(&grid, &model, &eta, &frame, &x).unwrap();
        let ay = poisson_apply(&grid, &model, &eta, &frame, &y).unwrap();
        let (l, r) = (dot(&y, &ax), dot(&x, &ay));
        assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0), "{l} vs {r}");
        assert!(dot(&x, &ax) >= 0.0);
    }

    #[test]
    fn gauss_solve_of_pure_gradient_seed_gives_zero() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let d = dyn_for(model.clone(), SpatialMetric::Static);
        let grid = Grid::new(12, 1.0, StencilOrder::Fourth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi0 = random_real_field(&grid, 1, 2, &mut rng);
        let mut seed = vec![0.0; grid.sites() * 3];
        for k in 0..3 {
            let dk = diff(&grid, &phi0, 1, k);
            for s in 0..grid.sites() {
                seed[s * 3 + k] = dk[s];
            }
        }
        let mut u = FieldState::zeros(grid, d.fibers());
        let rep = solve_gauss(&d, &mut u, &seed, &GaussSolveOptions::default()).unwrap();
        assert!(u.e.iter().all(|v| v.abs() < 1e-9), "max {}", u.max_abs());
        assert!(rep.gauss_residual <= 1e-10);
        let mut z = FieldState::zeros(grid, d.fibers());
        let zeros = vec![0.0; grid.sites() * 3];
        solve_gauss(&d, &mut z, &zeros, &GaussSolveOptions::default()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn assembled_initial_data_satisfies_constraints() {
        for model in [GaugeModel::u1_toy(U1Charges::default(), 0.7).unwrap(), GaugeModel::su2_electroweak(0.7).unwrap()] {
            let d = dyn_for(model.clone(), SpatialMetric::Static);
            let grid = Grid::new(10, 1.0, StencilOrder::Fourth).unwrap();
            let s = seeds(&d, &grid, 21, 0.2);
            let (u, rep) = assemble_initial_data(&d, grid, &s, &GaussSolveOptions::default()).unwrap();
            assert!(rep.gauss_residual <= 1e-10, "{rep:?}");
            assert!(rep.removed_source < 1e-12, "{rep:?}");
            let mut m = ConstraintMonitor::new(&d, &u).unwrap();
            let r = m.record(&d, &u).unwrap();
            assert!(r.curvature < 1e-14 && r.dirac < 1e-14 && r.higgs_consistency == 0.0 && r.spinor_consistency == 0.0, "{r:?}");
            assert_eq!(Fibers::of(&model), u.fibers);
            let rho = charge_density(&model, &u);
            for a in 0..model.dim_g() {
                let q: f64 = (0..grid.sites()).map(|x| rho[x * model.dim_g() + a]).sum();
                assert!(q.abs() < 1e-12, "residual charge {q}");
            }
        }
    }
}
