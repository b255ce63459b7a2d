//! Discrete Sobolev norms and the gauge-invariant sector energies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::GaugeModel;
use crate::constraints::{assemble_initial_data, GaussSolveOptions, InitialDataReport};
use crate::dynamics::Dynamics;
use crate::geometry::FrameGeometry;
use crate::lattice::{covariant_diff_lie, covariant_diff_repr, FieldState, Grid, RandomSeedFields};
use crate::reduce::pairwise_sum;
use crate::{Error, Result, C64};

/// Highest supported Sobolev order.
pub const MAX_ORDER: usize = 4;

/// How the connection acts on a field whose Sobolev norm is taken.
#[derive(Clone, Copy, Debug)]
pub enum FieldKind<'a> {
    /// Lie-algebra valued, `count` vectors per site.
    Lie { count: usize },
    /// Representation valued (Higgs, or twisted spinors with `count = 4·k`).
    Repr { repr: &'a crate::algebra::ReprData, count: usize },
}

/// A field sampled on the lattice.
#[derive(Clone, Copy, Debug)]
pub enum FieldRef<'a> {
    Real(&'a [f64]),
    Complex(&'a [C64]),
}

fn weighted_sum_sq(values: FieldRef<'_>, weight: f64) -> f64 {
    let sq: Vec<f64> = match values {
        FieldRef::Real(v) => v.par_iter().map(|x| x * x).collect(),
        FieldRef::Complex(v) => v.par_iter().map(|x| x.norm_sqr()).collect(),
    };
    pairwise_sum(&sq) * weight
}

/// `Σ_sites |D^ℓ ξ|² √g Δx³` for `ℓ = 0..=k`, with `D = b_k⁻¹∂_k + ρ*(η_k)`
/// iterated on the growing tensor index.
pub fn sobolev_levels(
    grid: &Grid,
    model: &GaugeModel,
    kind: FieldKind<'_>,
    field: FieldRef<'_>,
    eta: &[f64],
    frame: &FrameGeometry,
    k: usize,
) -> Result<Vec<f64>> {
    if k > MAX_ORDER {
        return Err(Error::Input(format!("Sobolev order {k} exceeds the supported maximum {MAX_ORDER}")));
    }
    let weight = grid.cell_volume() * frame.volume_factor();
    let mut levels = vec![weighted_sum_sq(field, weight)];
    match (kind, field) {
        (FieldKind::Lie { count }, FieldRef::Real(v)) => {
            let mut cur = v.to_vec();
            let mut c = count;
            for _ in 0..k {
                cur = covariant_diff_lie(grid, &model.lie, &cur, c, eta, frame)?;
                c *= 3;
                levels.push(weighted_sum_sq(FieldRef::Real(&cur), weight));
            }
        }
        (FieldKind::Repr { repr, count }, FieldRef::Complex(v)) => {
            let mut cur = v.to_vec();
            let mut c = count;
            for _ in 0..k {
                cur = covariant_diff_repr(grid, repr, &cur, c, eta, frame)?;
                c *= 3;
                levels.push(weighted_sum_sq(FieldRef::Complex(&cur), weight));
            }
        }
        _ => return Err(Error::Input("field kind does not match the sample type".into())),
    }
    Ok(levels)
}

/// `‖ξ‖²_{H^k}`.
pub fn sobolev_norm_sq(
    grid: &Grid,
    model: &GaugeModel,
    kind: FieldKind<'_>,
    field: FieldRef<'_>,
    eta: &[f64],
    frame: &FrameGeometry,
    k: usize,
) -> Result<f64> {
    Ok(sobolev_levels(grid, model, kind, field, eta, frame, k)?.iter().sum())
}

/// Sector energies at one Sobolev order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectorEnergies {
    pub k: usize,
    pub yang_mills: f64,
    pub higgs: f64,
    pub dirac: f64,
    pub total: f64,
}

/// Energies of one state for every order `0..=k`, the reference-connection
/// variant at order `k` and sup-norms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub tau: f64,
    pub k: usize,
    pub by_order: Vec<SectorEnergies>,
    /// Energy taken with the flat reference connection, including `η`.
    pub reference_total: f64,
    pub sup_e: f64,
    pub sup_b: f64,
    pub sup_phi: f64,
    pub sup_psi: f64,
}

impl EnergyReport {
    /// Energies at the report order `k`.
    pub fn at_k(&self) -> SectorEnergies {
        self.by_order[self.k]
    }

    pub fn total(&self) -> f64 {
        self.at_k().total
    }
}

/// `ℓ`-wise sums for a field and its time derivative, combined into
/// `𝔈_k = ‖ξ̇‖²_{H^{k−1}} + ‖ξ‖²_{H^k}` (`𝔈_0 = ‖ξ‖²`).
fn combine(field: &[f64], dot: &[f64], k: usize) -> f64 {
    let f: f64 = field[..=k].iter().sum();
    let d: f64 = if k == 0 { 0.0 } else { dot[..k].iter().sum() };
    f + d
}

fn sup_norm_real(values: &[f64], block: usize) -> f64 {
    if block == 0 {
        return 0.0;
    }
    values.par_chunks(block).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).reduce(|| 0.0, f64::max)
}

fn sup_norm_complex(values: &[C64], block: usize) -> f64 {
    if block == 0 {
        return 0.0;
    }
    values.par_chunks(block).map(|c| c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()).reduce(|| 0.0, f64::max)
}

/// Sector energies of `state`. `rate` is the time derivative of the state
/// (from the right-hand side) and supplies `Ė` and `Q̇`.
pub fn energy_report(dynamics: &Dynamics, state: &FieldState, rate: &FieldState, k: usize) -> Result<EnergyReport> {
    if k > MAX_ORDER {
        return Err(Error::Input(format!("energy order {k} exceeds the supported maximum {MAX_ORDER}")));
    }
    let model = &dynamics.model;
    let frame = dynamics.background.frame(state.tau)?;
    let grid = &state.grid;
    let f = state.fibers;
    let eta = &state.eta;
    let kd = k.saturating_sub(1);
    let lie3 = FieldKind::Lie { count: 3 };
    let higgs = FieldKind::Repr { repr: &model.higgs, count: 1 };
    let spin = FieldKind::Repr { repr: &model.fermion, count: 4 };
    let lv = |kind, field, order| sobolev_levels(grid, model, kind, field, eta, &frame, order);

    let e = lv(lie3, FieldRef::Real(&state.e), k)?;
    let edot = lv(lie3, FieldRef::Real(&rate.e), kd)?;
    let b = lv(lie3, FieldRef::Real(&state.q), k)?;
    let bdot = lv(lie3, FieldRef::Real(&rate.q), kd)?;
    let phi = lv(higgs, FieldRef::Complex(&state.phi), k)?;
    let phidot = lv(higgs, FieldRef::Complex(&state.phidot), kd)?;
    let psi = lv(spin, FieldRef::Complex(&state.psi), k)?;
    let psidot = lv(spin, FieldRef::Complex(&state.psidot), kd)?;

    let by_order = (0..=k)
        .map(|j| {
            let yang_mills = combine(&e, &edot, j) + combine(&b, &bdot, j);
            let higgs = combine(&phi, &phidot, j);
            let dirac = combine(&psi, &psidot, j);
            SectorEnergies { k: j, yang_mills, higgs, dirac, total: yang_mills + higgs + dirac }
        })
        .collect();

    // Reference connection: η = 0 in every derivative, plus the η sector itself.
    let zero_eta = vec![0.0; eta.len()];
    let lr = |kind, field, order| sobolev_levels(grid, model, kind, field, &zero_eta, &frame, order);
    let reference_total = combine(&lr(lie3, FieldRef::Real(&state.eta), k)?, &lr(lie3, FieldRef::Real(&rate.eta), kd)?, k)
        + combine(&lr(lie3, FieldRef::Real(&state.e), k)?, &lr(lie3, FieldRef::Real(&rate.e), kd)?, k)
        + combine(&lr(lie3, FieldRef::Real(&state.q), k)?, &lr(lie3, FieldRef::Real(&rate.q), kd)?, k)
        + combine(&lr(higgs, FieldRef::Complex(&state.phi), k)?, &lr(higgs, FieldRef::Complex(&state.phidot), kd)?, k)
        + combine(&lr(spin, FieldRef::Complex(&state.psi), k)?, &lr(spin, FieldRef::Complex(&state.psidot), kd)?, k);

    Ok(EnergyReport {
        tau: state.tau,
        k,
        by_order,
        reference_total,
        sup_e: sup_norm_real(&state.e, 3 * f.dg),
        sup_b: sup_norm_real(&state.q, 3 * f.dg),
        sup_phi: sup_norm_complex(&state.phi, f.dw),
        sup_psi: sup_norm_complex(&state.psi, f.spinor()),
    })
}

/// Result of checking `𝔈(τ) ≤ 𝔈(0)·e^{Cτ}` along a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateVerdict {
    /// Smallest `C ≥ 0` for which the exponential bound holds at every sample.
    pub growth_rate: f64,
    pub initial: f64,
    pub max_energy: f64,
    /// Whether the energy ever reached 1.
    pub left_small_data_region: bool,
}

/// Fit the exponential growth bound on a series of `(τ, 𝔈)` samples.
pub fn estimate_monitor(series: &[(f64, f64)]) -> EstimateVerdict {
    let Some(&(tau0, e0)) = series.first() else {
        return EstimateVerdict::default();
    };
    let mut c: f64 = 0.0;
    let mut max_energy: f64 = 0.0;
    for &(tau, e) in series {
        max_energy = max_energy.max(e);
        if tau > tau0 && e0 > 0.0 && e > e0 {
            c = c.max((e / e0).ln() / (tau - tau0));
        }
    }
    EstimateVerdict { growth_rate: c, initial: e0, max_energy, left_small_data_region: max_energy >= 1.0 }
}

/// Initial data whose order-`k` total energy equals `target`, obtained by a
/// secant search on the seed amplitude (the energy is not exactly quadratic in
/// it because of the bracket and charge terms).
pub fn scaled_initial_data(
    dynamics: &Dynamics,
    grid: Grid,
    seeds: &RandomSeedFields,
    target: f64,
    k: usize,
    opts: &GaussSolveOptions,
) -> Result<(FieldState, InitialDataReport, f64)> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::Config(format!("target energy must be finite and non-negative, got {target}")));
    }
    let build = |c: f64| -> Result<(FieldState, InitialDataReport, f64)> {
        let (u, rep) = assemble_initial_data(dynamics, grid, &seeds.scaled(c), opts)?;
        let rate = dynamics.rhs(&u)?;
        let e = energy_report(dynamics, &u, &rate, k)?.total();
        Ok((u, rep, e))
    };
    if target == 0.0 {
        let (u, rep, _) = build(0.0)?;
        return Ok((u, rep, 0.0));
    }
    let (_, _, e1) = build(1.0)?;
    if e1 == 0.0 {
        return Err(Error::Input("seed fields have zero energy and cannot be scaled".into()));
    }
    let goal = target.ln();
    let mut c_prev = 1.0;
    let mut f_prev = e1.ln() - goal;
    let mut c = (target / e1).sqrt();
    for _ in 0..40 {
        let (u, rep, e) = build(c)?;
        let fc = e.ln() - goal;
        if fc.abs() < 1e-12 {
            return Ok((u, rep, c));
        }
        let slope = (fc - f_prev) / (c.ln() - f64::ln(c_prev));
        let next = if slope.is_finite() && slope > 0.0 { (c.ln() - fc / slope).exp() } else { c * (-fc / 2.0).exp() };
        c_prev = c;
        f_prev = fc;
        c = next;
    }
    Err(Error::Solver(format!("amplitude search did not reach energy {target:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{GaugeModel, U1Charges};
    use crate::dynamics::Couplings;
    use crate::geometry::Background;
    use crate::lattice::{Fibers, GaugeTransform, SectorMask, StencilOrder};

    fn setup(model: GaugeModel) -> Dynamics {
        Dynamics::new(model, Background::de_sitter(1.0).unwrap(), Couplings { lambda: 0.2, ..Couplings::default() }).unwrap()
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let d = setup(GaugeModel::su2_electroweak(0.5).unwrap());
        let grid = Grid::new(6, 1.0, StencilOrder::Fourth).unwrap();
        let u = FieldState::zeros(grid, d.fibers());
        let r = energy_report(&d, &u, &u, 2).unwrap();
        assert!(r.by_order.iter().all(|s| s.total == 0.0));
        assert_eq!(r.reference_total, 0.0);
        assert!(energy_report(&d, &u, &u, 5).is_err());
    }

    #[test]
    fn constant_scalar_has_unit_norm() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let grid = Grid::new(8, 1.0, StencilOrder::Fourth).unwrap();
        let frame = Background::de_sitter(1.0).unwrap().frame(0.0).unwrap();
        let one = vec![C64::new(1.0, 0.0); grid.sites()];
        let eta = vec![0.0; grid.sites() * 3];
        let kind = FieldKind::Repr { repr: &model.higgs, count: 1 };
        for k in 0..=MAX_ORDER {
            let v = sobolev_norm_sq(&grid, &model, kind, FieldRef::Complex(&one), &eta, &frame, k).unwrap();
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_matches_modified_wavenumber() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let grid = Grid::new(16, 1.0, StencilOrder::Fourth).unwrap();
        let frame = Background::de_sitter(1.0).unwrap().frame(0.0).unwrap();
        let m = [1.0, 2.0, 0.0];
        let field: Vec<C64> = (0..grid.sites())
            .map(|s| {
                let p = grid.position(s);
                C64::new(0.0, 2.0 * std::f64::consts::PI * (m[0] * p[0] + m[1] * p[1] + m[2] * p[2])).exp()
            })
            .collect();
        let eta = vec![0.0; grid.sites() * 3];
        let kind = FieldKind::Repr { repr: &model.higgs, count: 1 };
        let v = sobolev_norm_sq(&grid, &model, kind, FieldRef::Complex(&field), &eta, &frame, 1).unwrap();
        let kt: f64 = m
            .iter()
            .map(|mi| (grid.order().modified_wavenumber(2.0 * std::f64::consts::PI * mi * grid.dx()) / grid.dx()).powi(2))
            .sum();
        assert!((v - (1.0 + kt)).abs() < 1e-10 * (1.0 + kt));
    }

    #[test]
    fn k0_dirac_energy_is_positive_density() {
        let model = GaugeModel::su2_electroweak(0.3).unwrap();
        let d = setup(model.clone());
        let grid = Grid::new(6, 1.0, StencilOrder::Fourth).unwrap();
        let seeds = RandomSeedFields::generate(&grid, Fibers::of(&model), 4, 1, SectorMask::default());
        let mut u = FieldState::zeros(grid, d.fibers());
        u.psi = seeds.psi;
        let r = energy_report(&d, &u, &u, 0).unwrap();
        let direct: f64 = u.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_volume();
        assert!((r.by_order[0].dirac - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn energies_are_gauge_invariant_to_stencil_order() {
        let model = GaugeModel::su2_electroweak(0.6).unwrap();
        let d = setup(model.clone());
        let mut errs = Vec::new();
        for n in [12, 24] {
            let grid = Grid::new(n, 1.0, StencilOrder::Fourth).unwrap();
            let seeds = RandomSeedFields::generate(&grid, Fibers::of(&model), 9, 1, SectorMask::default()).scaled(0.3);
            let (u, _) = assemble_initial_data(&d, grid, &seeds, &GaussSolveOptions::default()).unwrap();
            let frame = d.background.frame(0.0).unwrap();
            let g = GaugeTransform::smooth_random(&model, &grid, 5, 0.5, 1).unwrap();
            let v = g.apply(&u, &model, &frame).unwrap();
            let ru = energy_report(&d, &u, &d.rhs(&u).unwrap(), 2).unwrap();
            let rv = energy_report(&d, &v, &d.rhs(&v).unwrap(), 2).unwrap();
            let a = ru.at_k();
            let b = rv.at_k();
            errs.push(
                [(a.yang_mills, b.yang_mills), (a.higgs, b.higgs), (a.dirac, b.dirac)]
                    .iter()
                    .map(|(x, y)| (x - y).abs() / x)
                    .fold(0.0, f64::max),
            );
        }
        assert!(errs[1] < errs[0] / 8.0, "{errs:?}");
    }

    #[test]
    fn estimate_monitor_fits_growth_and_flags_excursion() {
        let series: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, 1e-4 * (0.5 * i as f64 * 0.1).exp())).collect();
        let v = estimate_monitor(&series);
        assert!((v.growth_rate - 0.5).abs() < 1e-12);
        assert!(!v.left_small_data_region);
        let big: Vec<(f64, f64)> = vec![(0.0, 0.5), (1.0, 2.0)];
        assert!(estimate_monitor(&big).left_small_data_region);
        assert_eq!(estimate_monitor(&[(0.0, 0.0), (1.0, 0.0)]).growth_rate, 0.0);
    }

    #[test]
    fn secant_scaling_hits_target_energy() {
        let model = GaugeModel::su2_electroweak(0.6).unwrap();
        let d = setup(model.clone());
        let grid = Grid::new(8, 1.0, StencilOrder::Fourth).unwrap();
        let seeds = RandomSeedFields::generate(&grid, Fibers::of(&model), 2, 1, SectorMask::default());
        let (u, _, _) = scaled_initial_data(&d, grid, &seeds, 1e-4, 2, &GaussSolveOptions::default()).unwrap();
        let e = energy_report(&d, &u, &d.rhs(&u).unwrap(), 2).unwrap().total();
        assert!((e / 1e-4 - 1.0).abs() < 1e-10);
    }
}
