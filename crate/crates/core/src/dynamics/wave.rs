//! Second-order consistency oracles: the first-order evolution must imply the
//! covariant wave equations for Φ, Ψ, E, B and conservation of the current.
//! Time derivatives are taken from five equally spaced snapshots, spatial
//! second derivatives from the compact second-difference stencil, so the
//! residuals converge at the discretization order without reusing the
//! first-order right-hand side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{charge_density, currents, fiber, fermion_basis, hodge_monomials, norm_sq, re_inner, Dynamics, ZERO};
use crate::algebra::Pairing;
use crate::clifford::{gamma, spin_inner};
use crate::lattice::{
    apply_fermion_add, covariant_diff_lie, covariant_diff_repr, covariant_diff_spinor, diff, diff2, diff_block, hodge_q_to_b,
    spin_connection_monomials, FieldState, Grid, Scalar,
};
use crate::{Error, Result, C64};

/// Five states at `τ_c + mΔτ`, `m = −2..2`.
#[derive(Clone, Debug)]
pub struct WaveSnapshots {
    pub states: Vec<FieldState>,
    pub dt: f64,
}

impl WaveSnapshots {
    /// Evolve `initial` so that the middle snapshot sits at `initial.tau + tau_center`,
    /// with the largest uniform step not exceeding `max_dt`.
    pub fn capture(dynamics: &Dynamics, initial: &FieldState, tau_center: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0 && tau_center >= 2.0 * max_dt) {
            return Err(Error::Input("wave snapshots need at least two steps before the center".into()));
        }
        let center = (tau_center / max_dt).ceil() as usize;
        let dt = tau_center / center as f64;
        let mut u = initial.clone();
        let mut states = Vec::with_capacity(5);
        for n in 0..=center + 2 {
            if n + 2 >= center {
                states.push(u.clone());
            }
            if n < center + 2 {
                u = dynamics.step(&u, dt)?;
            }
        }
        Ok(WaveSnapshots { states, dt })
    }

    fn center(&self) -> &FieldState {
        &self.states[2]
    }

    fn first_derivative<T: Scalar>(&self, pick: impl Fn(&FieldState) -> &[T]) -> Vec<T> {
        let s: Vec<&[T]> = self.states.iter().map(|u| pick(u)).collect();
        let c = 1.0 / (12.0 * self.dt);
        (0..s[2].len()).map(|i| (s[0][i] - s[1][i] * 8.0 + s[3][i] * 8.0 - s[4][i]) * c).collect()
    }

    fn second_derivative<T: Scalar>(&self, pick: impl Fn(&FieldState) -> &[T]) -> Vec<T> {
        let s: Vec<&[T]> = self.states.iter().map(|u| pick(u)).collect();
        let c = 1.0 / (12.0 * self.dt * self.dt);
        (0..s[2].len())
            .map(|i| (s[1][i] * 16.0 + s[3][i] * 16.0 - s[0][i] - s[4][i] - s[2][i] * 30.0) * c)
            .collect()
    }
}

/// L² norms of the wave-equation residuals at the center snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveResiduals {
    pub higgs: f64,
    pub dirac: f64,
    pub electric: f64,
    pub magnetic: f64,
    pub current: f64,
}

impl WaveResiduals {
    pub fn as_array(&self) -> [(&'static str, f64); 5] {
        [
            ("higgs", self.higgs),
            ("dirac", self.dirac),
            ("electric", self.electric),
            ("magnetic", self.magnetic),
            ("current", self.current),
        ]
    }
}

/// `Σ_k D_k D_k X` on static flat slices for `count` vectors of length `len`
/// per site, with the connection acting through `act(ξ, x, scale, out)`.
pub(crate) fn covariant_laplacian<T, A>(grid: &Grid, field: &[T], len: usize, count: usize, eta: &[f64], dg: usize, act: A) -> Vec<T>
where
    T: Scalar,
    A: Fn(&[f64], &[T], f64, &mut [T]) + Sync,
{
    let block = len * count;
    let mut out = vec![T::default(); field.len()];
    if block == 0 {
        return out;
    }
    let d1: Vec<Vec<T>> = (0..3).map(|k| diff(grid, field, block, k)).collect();
    let d2: Vec<Vec<T>> = (0..3).map(|k| diff2(grid, field, block, k)).collect();
    let deta: Vec<Vec<f64>> = (0..3).map(|k| diff_block(grid, eta, 3 * dg, k * dg, dg, k, 1.0)).collect();
    out.par_chunks_mut(block).enumerate().for_each_init(
        || vec![T::default(); len],
        |tmp, (site, o)| {
            for k in 0..3 {
                let ek = &eta[(site * 3 + k) * dg..(site * 3 + k + 1) * dg];
                let dek = &deta[k][site * dg..(site + 1) * dg];
                for j in 0..block {
                    o[j] += d2[k][site * block + j];
                }
                for c in 0..count {
                    let r = c * len..(c + 1) * len;
                    let x = &field[site * block + c * len..site * block + (c + 1) * len];
                    act(ek, &d1[k][site * block + c * len..site * block + (c + 1) * len], 2.0, &mut o[r.clone()]);
                    act(dek, x, 1.0, &mut o[r.clone()]);
                    tmp.iter_mut().for_each(|t| *t = T::default());
                    act(ek, x, 1.0, tmp);
                    act(ek, tmp, 1.0, &mut o[r]);
                }
            }
        },
    );
    out
}

fn l2_real(grid: &Grid, v: &[f64]) -> f64 {
    (crate::reduce::pairwise_sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()) * grid.cell_volume()).sqrt()
}

pub(crate) fn l2_complex(grid: &Grid, v: &[C64]) -> f64 {
    (crate::reduce::pairwise_sum(&v.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>()) * grid.cell_volume()).sqrt()
}

/// Residuals of the second-order system on a static flat background.
pub fn wave_residuals(dynamics: &Dynamics, snaps: &WaveSnapshots) -> Result<WaveResiduals> {
    if snaps.states.len() != 5 {
        return Err(Error::Input(format!("expected 5 snapshots, got {}", snaps.states.len())));
    }
    let u = snaps.center();
    let frame = dynamics.background.frame(u.tau)?;
    if frame.ii.iter().chain(&frame.dii).any(|v| *v != 0.0) || frame.b.iter().any(|b| *b != 1.0) {
        return Err(Error::Input("wave oracles require static flat slices".into()));
    }
    let grid = u.grid;
    let f = u.fibers;
    let (dg, dw, dv, sp) = (f.dg, f.dw, f.dv, f.spinor());
    let model = &dynamics.model;
    let lie = &model.lie;
    let higgs = &model.higgs;
    let ferm = &model.fermion;
    let yuk = &model.yukawa;
    let lambda = dynamics.couplings.lambda;
    let lin = dynamics.couplings.linear_coefficient(&frame);
    let with_yukawa = dw > 0 && dv > 0 && !yuk.is_zero();

    let phi_t = snaps.first_derivative(|s| &s.phi);
    let phi_tt = snaps.second_derivative(|s| &s.phi);
    let psi_t = snaps.first_derivative(|s| &s.psi);
    let psi_tt = snaps.second_derivative(|s| &s.psi);
    let e_tt = snaps.second_derivative(|s| &s.e);
    let q_tt = snaps.second_derivative(|s| &s.q);

    let lap_phi = covariant_laplacian(&grid, &u.phi, dw, 1, &u.eta, dg, |xi, x, s, o| higgs.apply_add(xi, x, s, o));
    let lap_psi = covariant_laplacian(&grid, &u.psi, sp, 1, &u.eta, dg, |xi, x, s, o| apply_fermion_add(ferm, xi, x, s, o));
    let lap_e = covariant_laplacian(&grid, &u.e, dg, 3, &u.eta, dg, |xi, x, s, o| lie.bracket_add(xi, x, s, o));
    let lap_q = covariant_laplacian(&grid, &u.q, dg, 3, &u.eta, dg, |xi, x, s, o| lie.bracket_add(xi, x, s, o));
    let dphi = covariant_diff_repr(&grid, higgs, &u.phi, 1, &u.eta, &frame)?;
    let dpsi = covariant_diff_spinor(&grid, ferm, &u.psi, 1, &u.eta, &frame)?;

    let g = [gamma(0), gamma(1), gamma(2), gamma(3)];
    let g0k = spin_connection_monomials();
    let gjk = hodge_monomials();

    // Higgs: −Φ_tt + ΔΦ = −cΦ + λ|Φ|²Φ + ⟨Ψ, iY⁻Ψ⟩.
    let mut r_phi = vec![ZERO; grid.sites() * dw];
    r_phi.par_chunks_mut(dw.max(1)).enumerate().take(if dw > 0 { grid.sites() } else { 0 }).for_each_init(
        || vec![ZERO; dw],
        |cur, (site, r)| {
            let phi = fiber(&u.phi, site, dw);
            let quartic = lambda * norm_sq(phi) - lin;
            for c in 0..dw {
                r[c] = lap_phi[site * dw + c] - phi_tt[site * dw + c] - phi[c] * quartic;
            }
            if with_yukawa {
                yuk.antilinear_current_into(fiber(&u.psi, site, sp), Pairing::Indefinite, cur);
                for c in 0..dw {
                    r[c] -= cur[c];
                }
            }
        },
    );

    // Dirac: −Ψ_tt + ΔΨ = ¼ScalΨ + χ(F)·Ψ + Y_{∇Φ}·Ψ − Y_Φ²Ψ.
    let mut r_psi = vec![ZERO; grid.sites() * sp];
    if sp > 0 {
        r_psi.par_chunks_mut(sp).enumerate().for_each_init(
            || (vec![ZERO; sp], vec![ZERO; sp], vec![ZERO; sp]),
            |(t1, t2, src), (site, r)| {
                let psi = fiber(&u.psi, site, sp);
                let e = fiber(&u.e, site, 3 * dg);
                let q = fiber(&u.q, site, 3 * dg);
                let clear = |t: &mut Vec<C64>| t.iter_mut().for_each(|x| *x = ZERO);
                clear(src);
                for c in 0..sp {
                    src[c] = psi[c] * (0.25 * frame.scal);
                }
                for k in 0..3 {
                    clear(t1);
                    apply_fermion_add(ferm, &e[k * dg..(k + 1) * dg], psi, 1.0, t1);
                    g0k[k].apply_add_re(t1, dv, -1.0, src);
                    clear(t1);
                    apply_fermion_add(ferm, &q[k * dg..(k + 1) * dg], psi, 1.0, t1);
                    gjk[k].apply_add_re(t1, dv, 1.0, src);
                }
                if with_yukawa {
                    let phi = fiber(&u.phi, site, dw);
                    clear(t1);
                    yuk.apply_spinor_with(&yuk.z_matrix(fiber(&phi_t, site, dw)), psi, 1.0, t1);
                    g[0].apply_add_re(t1, dv, -1.0, src);
                    for k in 0..3 {
                        clear(t1);
                        let dk = &dphi[(site * 3 + k) * dw..(site * 3 + k + 1) * dw];
                        yuk.apply_spinor_with(&yuk.z_matrix(dk), psi, 1.0, t1);
                        g[k + 1].apply_add_re(t1, dv, 1.0, src);
                    }
                    let zphi = yuk.z_matrix(phi);
                    clear(t1);
                    clear(t2);
                    yuk.apply_spinor_with(&zphi, psi, 1.0, t1);
                    yuk.apply_spinor_with(&zphi, t1, 1.0, t2);
                    for c in 0..sp {
                        src[c] -= t2[c];
                    }
                }
                for c in 0..sp {
                    r[c] = lap_psi[site * sp + c] - psi_tt[site * sp + c] - src[c];
                }
            },
        );
    }

    // Yang–Mills: electric and magnetic wave equations.
    let mut r_e = vec![0.0; grid.sites() * 3 * dg];
    let mut r_q = vec![0.0; grid.sites() * 3 * dg];
    if dg > 0 {
        let blk = 3 * dg;
        r_e.par_chunks_mut(blk).zip(r_q.par_chunks_mut(blk)).enumerate().for_each_init(
            || (vec![ZERO; dw], vec![ZERO; dw], vec![ZERO; sp], vec![ZERO; sp]),
            |(w1, w2, s1, s2), (site, (re, rq))| {
                let e = fiber(&u.e, site, blk);
                let b = hodge_q_to_b(fiber(&u.q, site, blk), dg);
                let bij = |i: usize, j: usize| &b[(i * 3 + j) * dg..(i * 3 + j + 1) * dg];
                let ei = |i: usize| &e[i * dg..(i + 1) * dg];
                let phi = fiber(&u.phi, site, dw);
                let pt = fiber(&phi_t, site, dw);
                let psi = fiber(&u.psi, site, sp);
                let pst = fiber(&psi_t, site, sp);
                let dphi_i = |i: usize| &dphi[(site * 3 + i) * dw..(site * 3 + i + 1) * dw];
                let dpsi_i = |i: usize| &dpsi[(site * 3 + i) * sp..(site * 3 + i + 1) * sp];
                // Source terms of the electric equation.
                let mut src_e = vec![0.0; blk];
                let mut src_b = vec![0.0; blk];
                for i in 0..3 {
                    let se = &mut src_e[i * dg..(i + 1) * dg];
                    for k in 0..3 {
                        lie.bracket_add(ei(k), bij(i, k), 2.0, se);
                    }
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    let sb = &mut src_b[i * dg..(i + 1) * dg];
                    for m in 0..3 {
                        lie.bracket_add(bij(m, j), bij(m, k), 2.0, sb);
                    }
                    lie.bracket_add(ei(j), ei(k), -2.0, sb);
                    // Matter contributions, one Lie basis element at a time.
                    let mut ephi = vec![ZERO; dw];
                    let mut bphi = vec![ZERO; dw];
                    higgs.apply_add(ei(i), phi, 1.0, &mut ephi);
                    higgs.apply_add(bij(j, k), phi, 1.0, &mut bphi);
                    let mut gi = vec![ZERO; sp];
                    let mut gj = vec![ZERO; sp];
                    let mut gk = vec![ZERO; sp];
                    let mut g0 = vec![ZERO; sp];
                    if sp > 0 {
                        g[i + 1].apply_add_re(psi, dv, 1.0, &mut gi);
                        g[j + 1].apply_add_re(psi, dv, 1.0, &mut gj);
                        g[k + 1].apply_add_re(psi, dv, 1.0, &mut gk);
                        g[0].apply_add_re(psi, dv, 1.0, &mut g0);
                    }
                    for a in 0..dg {
                        let mut ve = 0.0;
                        let mut vb = 0.0;
                        if dw > 0 {
                            higgs.apply_basis(a, phi, w1);
                            ve += re_inner(&ephi, w1);
                            vb += re_inner(&bphi, w1);
                            higgs.apply_basis(a, dphi_i(i), w2);
                            ve -= 2.0 * re_inner(pt, w2);
                            higgs.apply_basis(a, dphi_i(k), w2);
                            vb -= 2.0 * re_inner(dphi_i(j), w2);
                        }
                        if sp > 0 {
                            fermion_basis(ferm, a, dpsi_i(i), s1);
                            ve += spin_inner(&g0, s1, dv).im;
                            fermion_basis(ferm, a, pst, s2);
                            ve -= spin_inner(&gi, s2, dv).im;
                            fermion_basis(ferm, a, dpsi_i(k), s1);
                            vb += spin_inner(&gj, s1, dv).im;
                            fermion_basis(ferm, a, dpsi_i(j), s2);
                            vb -= spin_inner(&gk, s2, dv).im;
                        }
                        src_e[i * dg + a] += ve;
                        src_b[i * dg + a] += vb;
                    }
                }
                for c in 0..blk {
                    re[c] = lap_e[site * blk + c] - e_tt[site * blk + c] - src_e[c];
                    rq[c] = lap_q[site * blk + c] - q_tt[site * blk + c] - src_b[c];
                }
            },
        );
    }

    // Current conservation: ∂_τ𝔍₀ − Σ_k D_k 𝔍_k = 0.
    let mut r_j = vec![0.0; grid.sites() * dg];
    if dg > 0 {
        let rho: Vec<Vec<f64>> = snaps.states.iter().map(|s| charge_density(model, s)).collect();
        let c = 1.0 / (12.0 * snaps.dt);
        let j = currents(model, u);
        let dj = covariant_diff_lie(&grid, lie, &j, 3, &u.eta, &frame)?;
        r_j.par_chunks_mut(dg).enumerate().for_each(|(site, r)| {
            for a in 0..dg {
                let i = site * dg + a;
                let mut v = (rho[0][i] - 8.0 * rho[1][i] + 8.0 * rho[3][i] - rho[4][i]) * c;
                for k in 0..3 {
                    v -= dj[(site * 3 + k) * 3 * dg + k * dg + a];
                }
                r[a] = v;
            }
        });
    }

    Ok(WaveResiduals {
        higgs: l2_complex(&grid, &r_phi),
        dirac: l2_complex(&grid, &r_psi),
        electric: l2_real(&grid, &r_e),
        magnetic: l2_real(&grid, &r_q),
        current: l2_real(&grid, &r_j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{GaugeModel, U1Charges};
    use crate::constraints::{assemble_initial_data, GaussSolveOptions};
    use crate::dynamics::{Couplings, Potential};
    use crate::geometry::{Background, ScaleProfile, SpatialMetric};
    use crate::lattice::{Fibers, RandomSeedFields, SectorMask, StencilOrder};
    use crate::numerics::observed_order;

    fn residuals(model: &GaugeModel, n: usize, oracle_lambda: f64) -> WaveResiduals {
        let bg = Background::new(ScaleProfile::DeSitter { a: 1.0 }, 1.0, SpatialMetric::Static).unwrap();
        let d = Dynamics::new(model.clone(), bg, Couplings { lambda: 0.5, potential: Potential::Conformal }).unwrap();
        let grid = Grid::new(n, 1.0, StencilOrder::Fourth).unwrap();
        let seeds = RandomSeedFields::generate(&grid, Fibers::of(model), 17, 1, SectorMask::default()).scaled(0.3);
        let (u, _) = assemble_initial_data(&d, grid, &seeds, &GaussSolveOptions::default()).unwrap();
        let snaps = WaveSnapshots::capture(&d, &u, 0.25, 0.5 * grid.dx()).unwrap();
        let mut oracle = d.clone();
        oracle.couplings.lambda = oracle_lambda;
        wave_residuals(&oracle, &snaps).unwrap()
    }

    #[test]
    fn wave_oracles_converge_at_fourth_order() {
        for model in [GaugeModel::u1_toy(U1Charges::default(), 0.8).unwrap()] {
            let coarse = residuals(&model, 16, 0.5);
            let fine = residuals(&model, 32, 0.5);
            for ((name, c), (_, f)) in coarse.as_array().iter().zip(fine.as_array()) {
                let order = observed_order(*c, f);
                assert!(order > 3.5, "{} {name}: {c:e} -> {f:e}, order {order:.2}", model.name);
            }
        }
    }

    #[test]
    fn wrong_coupling_in_oracle_does_not_converge() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.8).unwrap();
        let coarse = residuals(&model, 12, 1.5);
        let fine = residuals(&model, 24, 1.5);
        assert!(observed_order(coarse.higgs, fine.higgs) < 0.5);
    }

    #[test]
    fn non_static_background_is_rejected() {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let bg = Background::new(ScaleProfile::DeSitter { a: 1.0 }, 1.0, SpatialMetric::Exponential { rates: [0.1, 0.0, 0.0] }).unwrap();
        let d = Dynamics::new(model.clone(), bg, Couplings::default()).unwrap();
        let grid = Grid::new(4, 1.0, StencilOrder::Fourth).unwrap();
        let u = FieldState::zeros(grid, Fibers::of(&model));
        let snaps = WaveSnapshots::capture(&d, &u, 0.2, 0.05).unwrap();
        assert!(wave_residuals(&d, &snaps).is_err());
    }
}
