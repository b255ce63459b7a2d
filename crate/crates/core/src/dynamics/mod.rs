//! First-order evolution in Gaussian time: right-hand side, principal symbol,
//! RK4 stepping and the second-order wave oracles.

pub(crate) mod wave;

pub use wave::{wave_residuals, WaveResiduals, WaveSnapshots};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{GaugeModel, Pairing, ReprData};
use crate::clifford::{gamma, spin_inner, Monomial};
use crate::geometry::{Background, FrameGeometry};
use crate::lattice::{apply_fermion_add, diff_block, spin_connection_monomials, FieldState, Fibers, Grid, Sector};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Higgs self-interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `U = ⅙ Scal |Φ|² + ½λ|Φ|⁴`.
    Conformal,
    /// `U = −μ|Φ|² + ½λ|Φ|⁴`.
    MexicanHat { mu: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub lambda: f64,
    pub potential: Potential,
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings { lambda: 0.0, potential: Potential::Conformal }
    }
}

impl Couplings {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::Config(format!("quartic coupling must be finite, got {}", self.lambda)));
        }
        if let Potential::MexicanHat { mu } = self.potential {
            if !mu.is_finite() {
                return Err(Error::Config(format!("mass parameter must be finite, got {mu}")));
            }
        }
        Ok(())
    }

    /// Coefficient `c` of the linear term `c·Φ` in `∇Φ̇/dτ`.
    fn linear_coefficient(&self, frame: &FrameGeometry) -> f64 {
        match self.potential {
            Potential::Conformal => -frame.scal / 6.0,
            Potential::MexicanHat { mu } => mu,
        }
    }
}

/// Time step selection for a run on `[0, tau_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub dt: f64,
    pub cfl: f64,
    pub steps: usize,
    pub tau_end: f64,
}

impl StepControl {
    /// Uniform steps landing exactly on `tau_end` with `Δτ ≤ cfl·Δx·min b`.
    pub fn new(grid: &Grid, background: &Background, cfl: f64, tau_end: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("CFL factor must lie in (0, 1], got {cfl}")));
        }
        if !(tau_end >= 0.0 && tau_end < background.horizon()) {
            return Err(Error::Config(format!(
                "end time {tau_end} must lie in [0, T) with T = {}",
                background.horizon()
            )));
        }
        let mut bmin = f64::INFINITY;
        for k in 0..=64 {
            let frame = background.frame(tau_end * k as f64 / 64.0)?;
            bmin = frame.b.iter().copied().fold(bmin, f64::min);
        }
        let limit = cfl * grid.dx() * bmin;
        let steps = if tau_end == 0.0 { 0 } else { (tau_end / limit).ceil() as usize };
        let dt = if steps == 0 { 0.0 } else { tau_end / steps as f64 };
        Ok(StepControl { dt, cfl, steps, tau_end })
    }
}

pub(crate) fn fiber<T>(data: &[T], site: usize, block: usize) -> &[T] {
    &data[site * block..(site + 1) * block]
}

/// `Re⟨a, b⟩` for complex vectors.
fn re_inner(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub(crate) fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `out = χ*(ξ_a)ψ` on a twisted spinor.
fn fermion_basis(repr: &ReprData, a: usize, psi: &[C64], out: &mut [C64]) {
    let dv = repr.dim();
    for s in 0..4 {
        repr.apply_basis(a, &psi[s * dv..(s + 1) * dv], &mut out[s * dv..(s + 1) * dv]);
    }
}

/// Per-site current components `−Re⟨w, ρ*(ξ_a)Φ⟩ + ½ Im⟨γ_μΨ, χ*(ξ_a)Ψ⟩` with
/// `w` the Higgs partner (`Z_i` or `Φ̇`) and `μ` the matching frame index.
fn site_current(model: &GaugeModel, w: &[C64], phi: &[C64], psi: &[C64], mu: usize, out: &mut [f64]) {
    let (dw, dv) = (model.higgs.dim(), model.fermion.dim());
    let mut rphi = vec![ZERO; dw];
    let mut gpsi = vec![ZERO; 4 * dv];
    let mut cpsi = vec![ZERO; 4 * dv];
    if dv > 0 {
        gamma(mu).apply_add_re(psi, dv, 1.0, &mut gpsi);
    }
    for (a, o) in out.iter_mut().enumerate() {
        let mut v = 0.0;
        if dw > 0 {
            model.higgs.apply_basis(a, phi, &mut rphi);
            v -= re_inner(w, &rphi);
        }
        if dv > 0 {
            fermion_basis(&model.fermion, a, psi, &mut cpsi);
            v += 0.5 * spin_inner(&gpsi, &cpsi, dv).im;
        }
        *o = v;
    }
}

/// Spatial current `𝔍_i` (site, direction, Lie component).
pub fn currents(model: &GaugeModel, state: &FieldState) -> Vec<f64> {
    let f = state.fibers;
    let (dg, dw, sp) = (f.dg, f.dw, f.spinor());
    let mut out = vec![0.0; state.grid.sites() * 3 * dg];
    if dg == 0 {
        return out;
    }
    out.par_chunks_mut(3 * dg).enumerate().for_each(|(site, o)| {
        let phi = fiber(&state.phi, site, dw);
        let psi = fiber(&state.psi, site, sp);
        for k in 0..3 {
            let zk = &state.z[(site * 3 + k) * dw..(site * 3 + k + 1) * dw];
            site_current(model, zk, phi, psi, k + 1, &mut o[k * dg..(k + 1) * dg]);
        }
    });
    out
}

/// Charge density `𝔍_0` (site, Lie component).
pub fn charge_density(model: &GaugeModel, state: &FieldState) -> Vec<f64> {
    let f = state.fibers;
    let (dg, dw, sp) = (f.dg, f.dw, f.spinor());
    let mut out = vec![0.0; state.grid.sites() * dg];
    if dg == 0 {
        return out;
    }
    out.par_chunks_mut(dg).enumerate().for_each(|(site, o)| {
        site_current(model, fiber(&state.phidot, site, dw), fiber(&state.phi, site, dw), fiber(&state.psi, site, sp), 0, o);
    });
    out
}

/// The Yang–Mills–Higgs–Dirac system on a fixed background.
#[derive(Clone, Debug)]
pub struct Dynamics {
    pub model: GaugeModel,
    pub background: Background,
    pub couplings: Couplings,
}

/// `γ_jγ_k` for the cyclic pair following `i` (so that `χ*(⋆Q)·` pairs `Q_i` with it).
fn hodge_monomials() -> [Monomial; 3] {
    [(2, 3), (3, 1), (1, 2)].map(|(j, k)| gamma(j).compose(&gamma(k)))
}

impl Dynamics {
    pub fn new(model: GaugeModel, background: Background, couplings: Couplings) -> Result<Self> {
        couplings.validate()?;
        Ok(Dynamics { model, background, couplings })
    }

    pub fn fibers(&self) -> Fibers {
        Fibers::of(&self.model)
    }

    /// Time derivative of the state.
    pub fn rhs(&self, u: &FieldState) -> Result<FieldState> {
        if u.fibers != self.fibers() {
            return Err(Error::Dimension(format!("state fibers {:?} do not match the model {:?}", u.fibers, self.fibers())));
        }
        let frame = self.background.frame(u.tau)?;
        let grid = u.grid;
        let f = u.fibers;
        let mut out = FieldState::zeros(grid, f);
        out.tau = u.tau;
        let kappa = frame.b.map(|b| 1.0 / b);
        let h3 = 3.0 * frame.h;

        if f.dg > 0 {
            let j = currents(&self.model, u);
            self.gauge_rhs(u, &frame, &kappa, &j, &mut out);
        }
        if f.dw > 0 {
            self.higgs_rhs(u, &frame, &kappa, h3, &mut out);
        }
        if f.dv > 0 {
            self.dirac_rhs(u, &frame, &kappa, h3, &mut out);
        }
        Ok(out)
    }

    fn gauge_rhs(&self, u: &FieldState, frame: &FrameGeometry, kappa: &[f64; 3], j: &[f64], out: &mut FieldState) {
        let grid = &u.grid;
        let dg = u.fibers.dg;
        let blk = 3 * dg;
        let lie = &self.model.lie;
        let de: Vec<Vec<f64>> = (0..3).map(|k| diff_block(grid, &u.e, blk, 0, blk, k, kappa[k])).collect();
        let dq: Vec<Vec<f64>> = (0..3).map(|k| diff_block(grid, &u.q, blk, 0, blk, k, kappa[k])).collect();
        let h3 = 3.0 * frame.h;
        let ii = frame.ii;
        let FieldState { eta: oeta, q: oq, e: oe, .. } = out;
        oeta.par_chunks_mut(blk).zip(oq.par_chunks_mut(blk)).zip(oe.par_chunks_mut(blk)).enumerate().for_each(
            |(site, ((ce, cq), cel))| {
                let eta = fiber(&u.eta, site, blk);
                let q = fiber(&u.q, site, blk);
                let e = fiber(&u.e, site, blk);
                for i in 0..3 {
                    let r = i * dg..(i + 1) * dg;
                    for a in 0..dg {
                        ce[i * dg + a] = ii[i] * eta[i * dg + a] + e[i * dg + a];
                        cq[i * dg + a] = (h3 - ii[i]) * q[i * dg + a];
                        cel[i * dg + a] = (h3 - ii[i]) * e[i * dg + a] + j[site * blk + i * dg + a];
                    }
                    // Q̇_i += ε_ijk (∂̂_j E_k + [η_j, E_k]),  Ė_i += ε_kij (∂̂_k Q_j + [η_k, Q_j]).
                    for (jj, kk, sign) in [((i + 1) % 3, (i + 2) % 3, 1.0), ((i + 2) % 3, (i + 1) % 3, -1.0)] {
                        let dej = &de[jj][site * blk + kk * dg..site * blk + (kk + 1) * dg];
                        let dqk = &dq[kk][site * blk + jj * dg..site * blk + (jj + 1) * dg];
                        for a in 0..dg {
                            cq[i * dg + a] += sign * dej[a];
                            cel[i * dg + a] += sign * dqk[a];
                        }
                        lie.bracket_add(&eta[jj * dg..(jj + 1) * dg], &e[kk * dg..(kk + 1) * dg], sign, &mut cq[r.clone()]);
                        lie.bracket_add(&eta[kk * dg..(kk + 1) * dg], &q[jj * dg..(jj + 1) * dg], sign, &mut cel[r.clone()]);
                    }
                }
            },
        );
    }

    fn higgs_rhs(&self, u: &FieldState, frame: &FrameGeometry, kappa: &[f64; 3], h3: f64, out: &mut FieldState) {
        let grid = &u.grid;
        let f = u.fibers;
        let (dg, dw, sp) = (f.dg, f.dw, f.spinor());
        let higgs = &self.model.higgs;
        let yuk = &self.model.yukawa;
        let dz: Vec<Vec<C64>> = (0..3).map(|k| diff_block(grid, &u.z, 3 * dw, k * dw, dw, k, kappa[k])).collect();
        let dpd: Vec<Vec<C64>> = (0..3).map(|k| diff_block(grid, &u.phidot, dw, 0, dw, k, kappa[k])).collect();
        let lin = self.couplings.linear_coefficient(frame);
        let lambda = self.couplings.lambda;
        let ii = frame.ii;
        let with_yukawa = f.dv > 0 && !yuk.is_zero();
        out.phi.copy_from_slice(&u.phidot);
        let FieldState { phidot: opd, z: oz, .. } = out;
        opd.par_chunks_mut(dw).zip(oz.par_chunks_mut(3 * dw)).enumerate().for_each_init(
            || vec![ZERO; dw],
            |cur, (site, (cpd, cz))| {
                let phi = fiber(&u.phi, site, dw);
                let pd = fiber(&u.phidot, site, dw);
                let eta = fiber(&u.eta, site, 3 * dg);
                let e = fiber(&u.e, site, 3 * dg);
                let z = fiber(&u.z, site, 3 * dw);
                let quartic = lin - lambda * norm_sq(phi);
                for c in 0..dw {
                    cpd[c] = pd[c] * h3 + phi[c] * quartic;
                }
                for k in 0..3 {
                    let zk = &z[k * dw..(k + 1) * dw];
                    for c in 0..dw {
                        cpd[c] += dz[k][site * dw + c];
                    }
                    higgs.apply_add(&eta[k * dg..(k + 1) * dg], zk, 1.0, cpd);
                    let czk = &mut cz[k * dw..(k + 1) * dw];
                    for c in 0..dw {
                        czk[c] = dpd[k][site * dw + c] + zk[c] * ii[k];
                    }
                    higgs.apply_add(&eta[k * dg..(k + 1) * dg], pd, 1.0, czk);
                    higgs.apply_add(&e[k * dg..(k + 1) * dg], phi, 1.0, czk);
                }
                if with_yukawa {
                    yuk.antilinear_current_into(fiber(&u.psi, site, sp), Pairing::Indefinite, cur);
                    for c in 0..dw {
                        cpd[c] -= cur[c];
                    }
                }
            },
        );
    }

    fn dirac_rhs(&self, u: &FieldState, frame: &FrameGeometry, kappa: &[f64; 3], h3: f64, out: &mut FieldState) {
        let grid = &u.grid;
        let f = u.fibers;
        let (dg, dw, dv, sp) = (f.dg, f.dw, f.dv, f.spinor());
        let ferm = &self.model.fermion;
        let yuk = &self.model.yukawa;
        let with_yukawa = dw > 0 && !yuk.is_zero();
        let ds: Vec<Vec<C64>> = (0..3).map(|k| diff_block(grid, &u.s, 3 * sp, k * sp, sp, k, kappa[k])).collect();
        let dpd: Vec<Vec<C64>> = (0..3).map(|k| diff_block(grid, &u.psidot, sp, 0, sp, k, kappa[k])).collect();
        let g0k = spin_connection_monomials();
        let gjk = hodge_monomials();
        let g = [gamma(0), gamma(1), gamma(2), gamma(3)];
        let ii = frame.ii;
        let dii = frame.dii;
        let quarter_scal = 0.25 * frame.scal;
        out.psi.copy_from_slice(&u.psidot);
        let FieldState { psidot: opd, s: os, .. } = out;
        opd.par_chunks_mut(sp).zip(os.par_chunks_mut(3 * sp)).enumerate().for_each_init(
            || (vec![ZERO; sp], vec![ZERO; sp]),
            |(t1, t2), (site, (cpd, cs))| {
                let psi = fiber(&u.psi, site, sp);
                let pd = fiber(&u.psidot, site, sp);
                let s = fiber(&u.s, site, 3 * sp);
                let eta = fiber(&u.eta, site, 3 * dg);
                let e = fiber(&u.e, site, 3 * dg);
                let q = fiber(&u.q, site, 3 * dg);
                let clear = |t: &mut Vec<C64>| t.iter_mut().for_each(|x| *x = ZERO);
                for c in 0..sp {
                    cpd[c] = pd[c] * h3 - psi[c] * quarter_scal;
                }
                for k in 0..3 {
                    let sk = &s[k * sp..(k + 1) * sp];
                    let etak = &eta[k * dg..(k + 1) * dg];
                    let ek = &e[k * dg..(k + 1) * dg];
                    for c in 0..sp {
                        cpd[c] += ds[k][site * sp + c];
                    }
                    g0k[k].apply_add_re(sk, dv, 0.5 * ii[k], cpd);
                    apply_fermion_add(ferm, etak, sk, 1.0, cpd);
                    // γ₀γ_k χ*(E_k)Ψ
                    clear(t1);
                    apply_fermion_add(ferm, ek, psi, 1.0, t1);
                    g0k[k].apply_add_re(t1, dv, 1.0, cpd);
                    // −γ_jγ_k χ*(Q_i)Ψ
                    clear(t1);
                    apply_fermion_add(ferm, &q[k * dg..(k + 1) * dg], psi, 1.0, t1);
                    gjk[k].apply_add_re(t1, dv, -1.0, cpd);

                    let csk = &mut cs[k * sp..(k + 1) * sp];
                    for c in 0..sp {
                        csk[c] = dpd[k][site * sp + c] + sk[c] * ii[k];
                    }
                    g0k[k].apply_add_re(pd, dv, 0.5 * ii[k], csk);
                    apply_fermion_add(ferm, etak, pd, 1.0, csk);
                    apply_fermion_add(ferm, ek, psi, 1.0, csk);
                    g0k[k].apply_add_re(psi, dv, 0.5 * (dii[k] - ii[k] * ii[k]), csk);
                }
                if with_yukawa {
                    let phi = fiber(&u.phi, site, dw);
                    let phidot = fiber(&u.phidot, site, dw);
                    let z = fiber(&u.z, site, 3 * dw);
                    // γ₀ Y_Φ̇ Ψ
                    clear(t1);
                    yuk.apply_spinor_with(&yuk.z_matrix(phidot), psi, 1.0, t1);
                    g[0].apply_add_re(t1, dv, 1.0, cpd);
                    // −γ_k Y_{Z_k} Ψ
                    for k in 0..3 {
                        clear(t1);
                        yuk.apply_spinor_with(&yuk.z_matrix(&z[k * dw..(k + 1) * dw]), psi, 1.0, t1);
                        g[k + 1].apply_add_re(t1, dv, -1.0, cpd);
                    }
                    // Y_Φ² Ψ
                    let zphi = yuk.z_matrix(phi);
                    clear(t1);
                    clear(t2);
                    yuk.apply_spinor_with(&zphi, psi, 1.0, t1);
                    yuk.apply_spinor_with(&zphi, t1, 1.0, t2);
                    for c in 0..sp {
                        cpd[c] += t2[c];
                    }
                }
            },
        );
    }

    /// One classical RK4 step of size `dt` (which may be negative).
    pub fn step(&self, u: &FieldState, dt: f64) -> Result<FieldState> {
        let k1 = self.rhs(u)?;
        let mut y = u.clone();
        y.axpy(0.5 * dt, &k1);
        y.tau = u.tau + 0.5 * dt;
        let k2 = self.rhs(&y)?;
        y.clone_from(u);
        y.axpy(0.5 * dt, &k2);
        y.tau = u.tau + 0.5 * dt;
        let k3 = self.rhs(&y)?;
        y.clone_from(u);
        y.axpy(dt, &k3);
        y.tau = u.tau + dt;
        let k4 = self.rhs(&y)?;
        let mut next = u.clone();
        next.axpy(dt / 6.0, &k1);
        next.axpy(dt / 3.0, &k2);
        next.axpy(dt / 3.0, &k3);
        next.axpy(dt / 6.0, &k4);
        next.tau = u.tau + dt;
        check_finite(&next)?;
        Ok(next)
    }

    /// Evolve with the given control, calling `observe(step_index, state)` at
    /// step 0, every `every` steps and at the final step.
    pub fn evolve<F>(&self, initial: FieldState, control: &StepControl, every: usize, mut observe: F) -> Result<FieldState>
    where
        F: FnMut(usize, &FieldState) -> Result<()>,
    {
        let every = every.max(1);
        let mut u = initial;
        check_finite(&u)?;
        observe(0, &u)?;
        for n in 1..=control.steps {
            u = self.step(&u, control.dt)?;
            if n == control.steps {
                u.tau = control.tau_end;
            }
            if n % every == 0 || n == control.steps {
                observe(n, &u)?;
            }
        }
        Ok(u)
    }
}

/// Blow-up error naming the first non-finite sector and site.
pub fn check_finite(u: &FieldState) -> Result<()> {
    for (sector, data) in Sector::ALL.iter().zip(u.sectors()) {
        let per = sector.reals_per_site(&u.fibers);
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let site = pos / per.max(1);
            let coords = u.grid.coords(site);
            return Err(Error::BlowUp {
                tau: u.tau,
                detail: format!("non-finite {} at site {:?} (component {})", sector.name(), coords, pos % per.max(1)),
            });
        }
    }
    Ok(())
}

/// Offsets of each sector in the real fiber vector `(η, Q, E, Φ, Φ̇, Z, Ψ, Ψ̇, S)`.
pub fn fiber_offsets(f: &Fibers) -> [usize; 10] {
    let mut off = [0; 10];
    for (i, s) in Sector::ALL.iter().enumerate() {
        off[i + 1] = off[i] + s.reals_per_site(f);
    }
    off
}

/// Principal symbol `σ(ξ) = ξ₀·Id − Σ_k ξ_k A^k` of the first-order operator
/// `∂_τ u − A^k e_k(u) − (lower order)`, acting on the real fiber vector
/// (complex entries split as re, im).
pub fn principal_symbol(f: &Fibers, xi: [f64; 4]) -> DMatrix<f64> {
    let off = fiber_offsets(f);
    let n = off[9];
    let mut m = DMatrix::identity(n, n) * xi[0];
    let (dg, dw, sp) = (f.dg, f.dw, f.spinor());
    // (Q, E) blocks: σ_{Q_i,E_k} = σ_{E_k,Q_i} = −ε_ijk ξ_j.
    let (oq, oe) = (off[1], off[2]);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let eps = crate::algebra::levi_civita(i, j, k);
                if eps == 0.0 {
                    continue;
                }
                for a in 0..dg {
                    m[(oq + i * dg + a, oe + k * dg + a)] -= eps * xi[j + 1];
                    m[(oe + k * dg + a, oq + i * dg + a)] -= eps * xi[j + 1];
                }
            }
        }
    }
    // (Φ̇, Z) and (Ψ̇, S): σ = −ξ_k between the scalar slot and component k.
    for (od, oz, width) in [(off[4], off[5], 2 * dw), (off[7], off[8], 2 * sp)] {
        for k in 0..3 {
            for c in 0..width {
                m[(od + c, oz + k * width + c)] -= xi[k + 1];
                m[(oz + k * width + c, od + c)] -= xi[k + 1];
            }
        }
    }
    m
}
