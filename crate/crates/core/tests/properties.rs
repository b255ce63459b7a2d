//! Property tests for the structural invariants of the building blocks.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ymhd::algebra::{random_complex, GaugeModel, LieData, ReprData, U1Charges};
use ymhd::clifford::{chiral_project, clifford_mul, spin_inner, spin_inner_pos, Chirality};
use ymhd::constraints::covariant_divergence;
use ymhd::dynamics::{Couplings, Dynamics, Potential};
use ymhd::energy::energy_report;
use ymhd::geometry::{riemann_components, Background, FrameGeometry};
use ymhd::lattice::{
    covariant_diff_lie, diff, random_complex_field, random_real_field, FieldState, Fibers, GaugeTransform, Grid,
    StencilOrder,
};
use ymhd::C64;

fn lie_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, dim)
}

fn cvec(seed: u64, n: usize) -> Vec<C64> {
    random_complex(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn grid(n: usize) -> Grid {
    Grid::new(n, 1.0, StencilOrder::Fourth).unwrap()
}

fn flat_frame() -> FrameGeometry {
    Background::de_sitter(1.0).unwrap().frame(0.0).unwrap()
}

fn su2_model() -> GaugeModel {
    GaugeModel::su2_electroweak(0.7).unwrap()
}

fn random_state(model: &GaugeModel, g: Grid, seed: u64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Fibers::of(model);
    let mut u = FieldState::zeros(g, f);
    u.eta = random_real_field(&g, 3 * f.dg, 1, &mut rng);
    u.q = random_real_field(&g, 3 * f.dg, 1, &mut rng);
    u.e = random_real_field(&g, 3 * f.dg, 1, &mut rng);
    u.phi = random_complex_field(&g, f.dw, 1, &mut rng);
    u.phidot = random_complex_field(&g, f.dw, 1, &mut rng);
    u.z = random_complex_field(&g, 3 * f.dw, 1, &mut rng);
    u.psi = random_complex_field(&g, f.spinor(), 1, &mut rng);
    u.psidot = random_complex_field(&g, f.spinor(), 1, &mut rng);
    u.s = random_complex_field(&g, 3 * f.spinor(), 1, &mut rng);
    u.project_fermions();
    u
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi(x in lie_vec(8), y in lie_vec(8), z in lie_vec(8)) {
        let lie = LieData::su3();
        let br = |a: &[f64], b: &[f64]| lie.bracket(a, b).unwrap();
        let xy = br(&x, &y);
        let yx = br(&y, &x);
        prop_assert!(xy.iter().zip(&yx).all(|(a, b)| (a + b).abs() < 1e-13));
        let j1 = br(&x, &br(&y, &z));
        let j2 = br(&y, &br(&z, &x));
        let j3 = br(&z, &br(&x, &y));
        for i in 0..8 {
            prop_assert!((j1[i] + j2[i] + j3[i]).abs() < 1e-11);
        }
        // Ad-invariance of the inner product.
        let lhs = lie.inner(&xy, &z);
        let rhs = -lie.inner(&y, &br(&x, &z));
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn representations_preserve_brackets(x in lie_vec(8), y in lie_vec(8)) {
        let lie = LieData::su3();
        for rep in [ReprData::su3_fundamental(), ReprData::adjoint(&lie)] {
            let (mx, my) = (rep.matrix(&x), rep.matrix(&y));
            let comm = &mx * &my - &my * &mx;
            let image = rep.matrix(&lie.bracket(&x, &y).unwrap());
            prop_assert!((comm - image).iter().all(|z| z.norm() < 1e-11));
        }
    }

    #[test]
    fn yukawa_map_is_real_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.9).unwrap();
        let y = &model.yukawa;
        let (w1, w2) = (cvec(seed, y.dim_w()), cvec(seed + 1, y.dim_w()));
        let v = cvec(seed + 2, y.dim_v());
        let comb: Vec<C64> = w1.iter().zip(&w2).map(|(p, q)| p * a + q * b).collect();
        let lhs = y.apply(&comb, &v).unwrap();
        let (r1, r2) = (y.apply(&w1, &v).unwrap(), y.apply(&w2, &v).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (r1[i] * a + r2[i] * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn vector_multiplication_is_symmetric(seed in 0u64..1000, x in prop::array::uniform4(-2.0f64..2.0)) {
        let dv = 3;
        let (psi, phi) = (cvec(seed, 4 * dv), cvec(seed + 7, 4 * dv));
        let lhs = spin_inner(&clifford_mul(x, &psi, dv), &phi, dv);
        let rhs = spin_inner(&psi, &clifford_mul(x, &phi, dv), dv);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn indefinite_pairing_vanishes_on_chiral_subspaces(seed in 0u64..1000) {
        let dv = 2;
        let (psi, phi) = (cvec(seed, 4 * dv), cvec(seed + 3, 4 * dv));
        for c in [Chirality::Plus, Chirality::Minus] {
            let (p, q) = (chiral_project(c, &psi, dv), chiral_project(c, &phi, dv));
            prop_assert!(spin_inner(&p, &q, dv).norm() < 1e-14);
        }
        let pos = spin_inner_pos(&psi, &psi);
        prop_assert!(pos.re > 0.0 && pos.im.abs() < 1e-14);
    }

    #[test]
    fn gaussian_time_is_increasing(a in 0.2f64..5.0, x in 0.0f64..8.0, dx in 0.01f64..4.0) {
        // Times in units of a, kept where π/2 − τ is still resolved in double precision.
        let bg = Background::de_sitter(a).unwrap();
        let (lo, hi) = (bg.gaussian_time(a * x).unwrap(), bg.gaussian_time(a * (x + dx)).unwrap());
        prop_assert!(lo < hi && hi < bg.horizon());
    }

    #[test]
    fn ricci_trace_matches_closed_form(
        b in prop::array::uniform3(0.3f64..3.0),
        db in prop::array::uniform3(-2.0f64..2.0),
        ddb in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let frame = FrameGeometry::from_metric(0.0, [0, 1, 2].map(|i| (b[i], db[i], ddb[i])));
        let trace = riemann_components(&frame).scal;
        prop_assert!((trace - frame.scal).abs() <= 1e-10 * (1.0 + frame.scal.abs()));
    }

    #[test]
    fn centered_differences_sum_by_parts(seed in 0u64..1000, axis in 0usize..3) {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_real_field(&g, 2, 3, &mut rng);
        let h = random_real_field(&g, 2, 3, &mut rng);
        let s = dot(&diff(&g, &f, 2, axis), &h) + dot(&f, &diff(&g, &h, 2, axis));
        prop_assert!(s.abs() < 1e-11 * (1.0 + dot(&f, &f) + dot(&h, &h)));
    }

    #[test]
    fn differences_commute_with_translations(seed in 0u64..1000, axis in 0usize..3, by in 1isize..7) {
        let g = grid(8);
        let f = random_real_field(&g, 1, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let shifted: Vec<f64> = (0..g.sites()).map(|s| f[g.shift(s, 0, by)]).collect();
        let d = diff(&g, &f, 1, axis);
        let d_shifted = diff(&g, &shifted, 1, axis);
        for s in 0..g.sites() {
            prop_assert_eq!(d_shifted[s], d[g.shift(s, 0, by)]);
        }
        let constant = vec![1.7; g.sites()];
        prop_assert!(diff(&g, &constant, 1, axis).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn covariant_laplacian_is_symmetric(seed in 0u64..1000) {
        let g = grid(6);
        let model = su2_model();
        let frame = flat_frame();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = random_real_field(&g, 9, 2, &mut rng);
        let phi = random_real_field(&g, 3, 2, &mut rng);
        let psi = random_real_field(&g, 3, 2, &mut rng);
        let lap = |x: &[f64]| {
            let grad = covariant_diff_lie(&g, &model.lie, x, 1, &eta, &frame).unwrap();
            covariant_divergence(&g, &model, &grad, &eta, &frame).unwrap()
        };
        let (a, b) = (dot(&phi, &lap(&psi)), dot(&lap(&phi), &psi));
        prop_assert!((a - b).abs() < 1e-12 * (a.abs() + b.abs()).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gauge_transform_preserves_pointwise_invariants(seed in 0u64..1000, amp in 0.1f64..1.5) {
        let model = su2_model();
        let g = grid(6);
        let u = random_state(&model, g, seed);
        let frame = flat_frame();
        let t = GaugeTransform::smooth_random(&model, &g, seed + 1, amp, 1).unwrap();
        let v = t.apply(&u, &model, &frame).unwrap();
        let f = u.fibers;
        for s in 0..g.sites() {
            let norm = |x: &[C64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let real = |x: &[f64]| x.iter().map(|z| z * z).sum::<f64>();
            let phi = s * f.dw..(s + 1) * f.dw;
            let psi = s * f.spinor()..(s + 1) * f.spinor();
            let one_form = s * 3 * f.dg..(s + 1) * 3 * f.dg;
            prop_assert!((norm(&u.phi[phi.clone()]) - norm(&v.phi[phi])).abs() < 1e-12);
            prop_assert!((norm(&u.psi[psi.clone()]) - norm(&v.psi[psi])).abs() < 1e-12);
            prop_assert!((real(&u.e[one_form.clone()]) - real(&v.e[one_form.clone()])).abs() < 1e-12);
            prop_assert!((real(&u.q[one_form.clone()]) - real(&v.q[one_form])).abs() < 1e-12);
        }
    }

    #[test]
    fn sector_energies_are_nonnegative_and_separate(seed in 0u64..1000) {
        let model = su2_model();
        let g = grid(6);
        let d = Dynamics::new(model.clone(), Background::de_sitter(1.0).unwrap(), Couplings { lambda: 0.4, potential: Potential::Conformal }).unwrap();
        let u = random_state(&model, g, seed);
        let report = energy_report(&d, &u, &d.rhs(&u).unwrap(), 2).unwrap();
        for s in &report.by_order {
            prop_assert!(s.yang_mills >= 0.0 && s.higgs >= 0.0 && s.dirac >= 0.0);
            prop_assert!((s.total - (s.yang_mills + s.higgs + s.dirac)).abs() <= 1e-14 * s.total);
        }
        // Dropping the spinor sector removes its energy and leaves the Higgs energy untouched.
        let mut w = u.clone();
        w.psi.iter_mut().chain(w.psidot.iter_mut()).chain(w.s.iter_mut()).for_each(|z| *z = C64::new(0.0, 0.0));
        let dropped = energy_report(&d, &w, &d.rhs(&w).unwrap(), 2).unwrap();
        prop_assert_eq!(dropped.at_k().dirac, 0.0);
        prop_assert_eq!(dropped.at_k().higgs, report.at_k().higgs);
        prop_assert!(dropped.at_k().higgs + dropped.at_k().dirac <= report.at_k().higgs + report.at_k().dirac);
    }
}
