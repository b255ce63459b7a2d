//! Map between the tilde frame and the physical expanding spacetime, decay
//! fits of physical sup-norms, and the conformal covariance check of the
//! Higgs equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{GaugeModel, Pairing};
use crate::dynamics::wave::{covariant_laplacian, l2_complex};
use crate::dynamics::{fiber, norm_sq, Dynamics, Potential, WaveSnapshots};
use crate::energy::EnergyReport;
use crate::geometry::Background;
use crate::lattice::{FieldState, Grid};
use crate::numerics::{fd_weights, fit_line};
use crate::{Error, Result, C64};

/// Power of `Ns` multiplying the tilde Higgs field to give the physical one.
pub const HIGGS_WEIGHT: f64 = -1.0;
/// Power of `Ns` multiplying the tilde spinor to give the physical one.
pub const SPINOR_WEIGHT: f64 = -1.5;

/// Conformal data at one Gaussian time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMap {
    pub tau: f64,
    pub t: f64,
    pub s: f64,
    pub s_dot: f64,
    pub s_ddot: f64,
    pub lapse: f64,
}

/// Fields carried through the frame change.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorFields {
    pub eta: Vec<f64>,
    pub q: Vec<f64>,
    pub e: Vec<f64>,
    pub phi: Vec<C64>,
    pub psi: Vec<C64>,
}

impl SectorFields {
    pub fn from_state(u: &FieldState) -> Self {
        SectorFields { eta: u.eta.clone(), q: u.q.clone(), e: u.e.clone(), phi: u.phi.clone(), psi: u.psi.clone() }
    }
}

impl FrameMap {
    pub fn at(background: &Background, tau: f64) -> Result<Self> {
        let (t, s, s_dot) = background.scale_at(tau)?;
        let s_ddot = background.profile.second_derivative(t);
        Ok(FrameMap { tau, t, s, s_dot, s_ddot, lapse: background.lapse })
    }

    /// `s = N = 1`, `t = τ`.
    pub fn identity(tau: f64) -> Self {
        FrameMap { tau, t: tau, s: 1.0, s_dot: 0.0, s_ddot: 0.0, lapse: 1.0 }
    }

    /// `Ω = 1/(Ns)`.
    pub fn omega(&self) -> f64 {
        1.0 / (self.lapse * self.s)
    }

    fn rescale(&self, f: &SectorFields, sign: f64) -> SectorFields {
        let ns = self.lapse * self.s;
        let phi_factor = ns.powf(sign * HIGGS_WEIGHT);
        let psi_factor = ns.powf(sign * SPINOR_WEIGHT);
        let e_factor = self.s.powf(-sign);
        SectorFields {
            eta: f.eta.clone(),
            q: f.q.clone(),
            e: f.e.iter().map(|v| v * e_factor).collect(),
            phi: f.phi.iter().map(|v| v * phi_factor).collect(),
            psi: f.psi.iter().map(|v| v * psi_factor).collect(),
        }
    }

    /// `Φ = Φ̃/(Ns)`, `Ψ = Ψ̃/(Ns)^{3/2}`, `E = Ẽ/s`; `η` and `B` unchanged.
    pub fn to_physical(&self, tilde: &SectorFields) -> SectorFields {
        self.rescale(tilde, 1.0)
    }

    pub fn to_tilde(&self, physical: &SectorFields) -> SectorFields {
        self.rescale(physical, -1.0)
    }
}

/// Physical-frame sup- and L²-norms at one report time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub tau: f64,
    pub t: f64,
    pub s: f64,
    pub sup_phi: f64,
    pub sup_e: f64,
    pub sup_psi: f64,
    pub l2_phi: f64,
    pub l2_psi: f64,
}

impl DecaySample {
    /// Physical norms from a tilde-frame energy report. The L² norms use the
    /// physical volume `(Ns)³·√g̃ d³x`.
    pub fn from_report(report: &EnergyReport, map: &FrameMap) -> Self {
        let ns = map.lapse * map.s;
        let k0 = report.by_order[0];
        DecaySample {
            tau: report.tau,
            t: map.t,
            s: map.s,
            sup_phi: report.sup_phi * ns.powf(HIGGS_WEIGHT),
            sup_e: report.sup_e / map.s,
            sup_psi: report.sup_psi * ns.powf(SPINOR_WEIGHT),
            l2_phi: (k0.higgs * ns.powi(3) * ns.powf(2.0 * HIGGS_WEIGHT)).sqrt(),
            l2_psi: (k0.dirac * ns.powi(3) * ns.powf(2.0 * SPINOR_WEIGHT)).sqrt(),
        }
    }
}

/// Least-squares slope of `log value` against `log s` over the asymptotic window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub half_width: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub samples: usize,
    /// False when the series is degenerate (zero or non-finite values, constant `s`).
    pub defined: bool,
}

/// Minimum number of samples in the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fit over the final `fraction` of the run in `τ`; samples are `(τ, s, value)`.
pub fn decay_fit(series: &[(f64, f64, f64)], fraction: f64) -> Result<DecayFit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("decay window fraction must lie in (0, 1], got {fraction}")));
    }
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(Error::Input("decay fit needs a non-empty series".into()));
    };
    let start = last.0 - fraction * (last.0 - first.0);
    let window: Vec<_> = series.iter().filter(|p| p.0 >= start - 1e-12 * last.0.abs()).collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::Input(format!(
            "decay fit needs at least {MIN_FIT_SAMPLES} samples in the window, got {}",
            window.len()
        )));
    }
    let undefined = DecayFit {
        slope: f64::NAN,
        intercept: f64::NAN,
        half_width: f64::NAN,
        window_start: start,
        window_end: last.0,
        samples: window.len(),
        defined: false,
    };
    if window.iter().any(|p| !(p.2 > 0.0 && p.2.is_finite() && p.1 > 0.0)) {
        return Ok(undefined);
    }
    let x: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let y: Vec<f64> = window.iter().map(|p| p.2.ln()).collect();
    Ok(match fit_line(&x, &y) {
        Some(f) => DecayFit { slope: f.slope, intercept: f.intercept, half_width: f.slope_half_width, defined: true, ..undefined },
        None => undefined,
    })
}

/// Decay fits of the physical Higgs, electric and spinor fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub window_fraction: f64,
    pub phi: DecayFit,
    pub e: DecayFit,
    pub psi: DecayFit,
    pub l2_phi: DecayFit,
    pub l2_psi: DecayFit,
}

pub fn decay_report(samples: &[DecaySample], fraction: f64) -> Result<DecayReport> {
    let pick = |f: fn(&DecaySample) -> f64| -> Vec<(f64, f64, f64)> { samples.iter().map(|p| (p.tau, p.s, f(p))).collect() };
    Ok(DecayReport {
        window_fraction: fraction,
        phi: decay_fit(&pick(|p| p.sup_phi), fraction)?,
        e: decay_fit(&pick(|p| p.sup_e), fraction)?,
        psi: decay_fit(&pick(|p| p.sup_psi), fraction)?,
        l2_phi: decay_fit(&pick(|p| p.l2_phi), fraction)?,
        l2_psi: decay_fit(&pick(|p| p.l2_psi), fraction)?,
    })
}

/// Norms of the Higgs-equation residuals in both frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalResidual {
    /// `‖R̃‖` of the tilde-frame equation.
    pub tilde: f64,
    /// `‖Ω⁻³R‖` of the physical-frame equation.
    pub physical_scaled: f64,
    /// `‖R̃ − Ω⁻³R‖`.
    pub mismatch: f64,
    /// `‖ΔΦ̃‖`, the scale against which the mismatch is judged.
    pub reference: f64,
}

impl ConformalResidual {
    pub fn relative_mismatch(&self) -> f64 {
        self.mismatch / self.reference
    }
}

/// Residual of `(□ − Scal/6)Φ = λ|Φ|²Φ + c(Ψ)` for the metric `−dt² + A(t)²δ`,
/// from five samples of `Φ` at times `times` and `Ψ` at the middle one.
#[allow(clippy::too_many_arguments)]
fn higgs_residual(
    grid: &Grid,
    model: &GaugeModel,
    lambda: f64,
    eta: &[f64],
    times: &[f64],
    phis: &[Vec<C64>],
    psi: &[C64],
    a: f64,
    a_dot: f64,
    a_ddot: f64,
) -> Vec<C64> {
    let dw = model.higgs.dim();
    let dg = model.lie.dim();
    let sp = 4 * model.fermion.dim();
    let yuk = &model.yukawa;
    let w = fd_weights(times[2], times, 2);
    let phi = &phis[2];
    let deriv = |m: usize| -> Vec<C64> {
        (0..phi.len()).map(|i| phis.iter().zip(&w[m]).map(|(p, c)| p[i] * *c).sum()).collect()
    };
    let phi_t = deriv(1);
    let phi_tt = deriv(2);
    let lap = covariant_laplacian(grid, phi, dw, 1, eta, dg, |xi, x, s, o| model.higgs.apply_add(xi, x, s, o));
    let hubble = a_dot / a;
    let scal = 6.0 * (a_ddot / a + hubble * hubble);
    let with_yukawa = dw > 0 && sp > 0 && !yuk.is_zero();
    let mut r = vec![C64::new(0.0, 0.0); phi.len()];
    if dw == 0 {
        return r;
    }
    r.par_chunks_mut(dw).enumerate().for_each_init(
        || vec![C64::new(0.0, 0.0); dw],
        |cur, (site, out)| {
            let p = fiber(phi, site, dw);
            let pot = lambda * norm_sq(p) + scal / 6.0;
            for c in 0..dw {
                let i = site * dw + c;
                out[c] = -(phi_tt[i] + phi_t[i] * (3.0 * hubble)) + lap[i] / (a * a) - p[c] * pot;
            }
            if with_yukawa {
                yuk.antilinear_current_into(fiber(psi, site, sp), Pairing::Indefinite, cur);
                for c in 0..dw {
                    out[c] -= cur[c];
                }
            }
        },
    );
    r
}

/// Compare the tilde-frame Higgs residual with the physical-frame residual of
/// the rescaled fields, weighted by `Ω⁻³`. `higgs_weight` is the power of `Ns`
/// used for the Higgs rescaling ([`HIGGS_WEIGHT`] for the correct map).
pub fn conformal_residual_check(
    dynamics: &Dynamics,
    snaps: &WaveSnapshots,
    higgs_weight: f64,
) -> Result<ConformalResidual> {
    if snaps.states.len() != 5 {
        return Err(Error::Input(format!("expected 5 snapshots, got {}", snaps.states.len())));
    }
    if dynamics.couplings.potential != Potential::Conformal {
        return Err(Error::Input("the conformal check requires the conformally coupled potential".into()));
    }
    let bg = &dynamics.background;
    let maps: Vec<FrameMap> = snaps.states.iter().map(|u| FrameMap::at(bg, u.tau)).collect::<Result<_>>()?;
    let physical_times: Vec<f64> = maps.iter().map(|m| m.t).collect();
    residual_pair(dynamics, snaps, &maps, &physical_times, higgs_weight)
}

fn residual_pair(
    dynamics: &Dynamics,
    snaps: &WaveSnapshots,
    maps: &[FrameMap],
    physical_times: &[f64],
    higgs_weight: f64,
) -> Result<ConformalResidual> {
    let center = &snaps.states[2];
    let frame = dynamics.background.frame(center.tau)?;
    if frame.ii.iter().chain(&frame.dii).any(|v| *v != 0.0) || frame.b.iter().any(|b| *b != 1.0) {
        return Err(Error::Input("the conformal check requires static flat slices".into()));
    }
    let grid = center.grid;
    let model = &dynamics.model;
    let lambda = dynamics.couplings.lambda;
    let taus: Vec<f64> = snaps.states.iter().map(|u| u.tau).collect();
    let tilde_phis: Vec<Vec<C64>> = snaps.states.iter().map(|u| u.phi.clone()).collect();
    let r_tilde = higgs_residual(&grid, model, lambda, &center.eta, &taus, &tilde_phis, &center.psi, 1.0, 0.0, 0.0);

    let ns = |m: &FrameMap| m.lapse * m.s;
    let phys_phis: Vec<Vec<C64>> = snaps
        .states
        .iter()
        .zip(maps)
        .map(|(u, m)| {
            let f = ns(m).powf(higgs_weight);
            u.phi.iter().map(|v| v * f).collect()
        })
        .collect();
    let mc = &maps[2];
    let a = ns(mc);
    let psi: Vec<C64> = center.psi.iter().map(|v| v * a.powf(SPINOR_WEIGHT)).collect();
    let r_phys = higgs_residual(
        &grid,
        model,
        lambda,
        &center.eta,
        physical_times,
        &phys_phis,
        &psi,
        a,
        mc.lapse * mc.s_dot,
        mc.lapse * mc.s_ddot,
    );
    let weight = a.powi(3);
    let scaled: Vec<C64> = r_phys.iter().map(|v| v * weight).collect();
    let diff: Vec<C64> = r_tilde.iter().zip(&scaled).map(|(x, y)| x - y).collect();
    let dg = model.lie.dim();
    let dw = model.higgs.dim();
    let lap = covariant_laplacian(&grid, &center.phi, dw, 1, &center.eta, dg, |xi, x, s, o| {
        model.higgs.apply_add(xi, x, s, o)
    });
    Ok(ConformalResidual {
        tilde: l2_complex(&grid, &r_tilde),
        physical_scaled: l2_complex(&grid, &scaled),
        mismatch: l2_complex(&grid, &diff),
        reference: l2_complex(&grid, &lap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::GaugeModel;
    use crate::constraints::{assemble_initial_data, GaussSolveOptions};
    use crate::dynamics::Couplings;
    use crate::lattice::{Fibers, RandomSeedFields, SectorMask, StencilOrder};

    fn sample_fields(n: usize) -> SectorFields {
        let model = GaugeModel::su2_electroweak(0.4).unwrap();
        let grid = Grid::new(n, 1.0, StencilOrder::Fourth).unwrap();
        let s = RandomSeedFields::generate(&grid, Fibers::of(&model), 3, 1, SectorMask::default());
        SectorFields { eta: s.eta.clone(), q: s.eta.clone(), e: s.e_seed.clone(), phi: s.phi, psi: s.psi }
    }

    #[test]
    fn unit_scale_is_the_identity_and_round_trip_is_exact() {
        let f = sample_fields(4);
        assert_eq!(FrameMap::identity(0.3).to_physical(&f), f);
        let bg = Background::de_sitter(0.7).unwrap();
        let map = FrameMap::at(&bg, 0.9).unwrap();
        let back = map.to_tilde(&map.to_physical(&f));
        let err = f.phi.iter().zip(&back.phi).chain(f.psi.iter().zip(&back.psi)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let err_e = f.e.iter().zip(&back.e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14 && err_e < 1e-14);
    }

    #[test]
    fn de_sitter_sup_norm_scales_by_inverse_scale_factor() {
        let bg = Background::de_sitter(1.0).unwrap();
        let map = FrameMap::at(&bg, 1.2).unwrap();
        let t = (1.2f64).tan().asinh();
        assert!((map.s - t.cosh()).abs() < 1e-12);
        let f = sample_fields(4);
        let p = map.to_physical(&f);
        let sup = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((sup(&p.phi) - sup(&f.phi) / map.s).abs() < 1e-15 * sup(&f.phi));
    }

    fn power_series(exponent: f64, c: f64) -> Vec<(f64, f64, f64)> {
        (0..40).map(|i| {
            let tau = i as f64 * 0.03;
            let s = (tau * 2.0).exp();
            (tau, s, c * s.powf(exponent))
        })
        .collect()
    }

    #[test]
    fn power_laws_give_exact_slopes() {
        let f = decay_fit(&power_series(-1.0, 0.3), 0.4).unwrap();
        assert!(f.defined && (f.slope + 1.0).abs() < 1e-6);
        let f = decay_fit(&power_series(-1.5, 2.0), 0.4).unwrap();
        assert!(f.defined && (f.slope + 1.5).abs() < 1e-6);
        assert!(f.samples >= MIN_FIT_SAMPLES);
    }

    #[test]
    fn degenerate_series_are_flagged() {
        let f = decay_fit(&power_series(-1.0, 0.0), 0.4).unwrap();
        assert!(!f.defined);
        let short: Vec<_> = power_series(-1.0, 1.0).into_iter().take(12).collect();
        assert!(decay_fit(&short, 0.4).is_err());
        assert!(decay_fit(&power_series(-1.0, 1.0), 0.0).is_err());
    }

    fn snapshots(n: usize) -> (Dynamics, WaveSnapshots) {
        let model = GaugeModel::su2_electroweak(0.8).unwrap();
        let dynamics =
            Dynamics::new(model.clone(), Background::de_sitter(1.0).unwrap(), Couplings { lambda: 0.5, ..Couplings::default() })
                .unwrap();
        let grid = Grid::new(n, 1.0, StencilOrder::Fourth).unwrap();
        let seeds = RandomSeedFields::generate(&grid, Fibers::of(&model), 5, 1, SectorMask::default()).scaled(0.3);
        let (u, _) = assemble_initial_data(&dynamics, grid, &seeds, &GaussSolveOptions::default()).unwrap();
        let snaps = WaveSnapshots::capture(&dynamics, &u, 0.25, 0.5 * grid.dx()).unwrap();
        (dynamics, snaps)
    }

    #[test]
    fn unit_conformal_factor_gives_zero_mismatch() {
        let (d, snaps) = snapshots(8);
        let maps: Vec<FrameMap> = snaps.states.iter().map(|u| FrameMap::identity(u.tau)).collect();
        let taus: Vec<f64> = snaps.states.iter().map(|u| u.tau).collect();
        let r = residual_pair(&d, &snaps, &maps, &taus, HIGGS_WEIGHT).unwrap();
        assert_eq!(r.mismatch, 0.0);
    }

    #[test]
    fn mismatch_converges_and_wrong_weight_does_not() {
        let (d8, s8) = snapshots(8);
        let (d16, s16) = snapshots(16);
        let coarse = conformal_residual_check(&d8, &s8, HIGGS_WEIGHT).unwrap();
        let fine = conformal_residual_check(&d16, &s16, HIGGS_WEIGHT).unwrap();
        assert!(fine.relative_mismatch() < coarse.relative_mismatch() / 8.0, "{coarse:?} {fine:?}");
        assert!(fine.relative_mismatch() < 1e-3);
        let wrong = conformal_residual_check(&d16, &s16, 0.0).unwrap();
        assert!(wrong.relative_mismatch() > 1e-2, "{wrong:?}");
    }
}
