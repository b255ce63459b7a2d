//! Weyl-representation gamma matrices and twisted spinor algebra.
//!
//! A twisted spinor value is stored as `4 × dim_v` complex numbers with the
//! spin index outermost: component `(s, v)` lives at `s * dim_v + v`.
//! Gamma matrices act on the spin index only.

use nalgebra::Matrix4;

use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A 4×4 matrix with exactly one nonzero entry per row: `(Mψ)_r = phase_r ψ_{perm_r}`.
/// Every product of gamma matrices has this shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub perm: [usize; 4],
    pub phase: [C64; 4],
}

impl Monomial {
    pub const IDENTITY: Monomial = Monomial { perm: [0, 1, 2, 3], phase: [ONE; 4] };

    /// `self · other`.
    pub fn compose(&self, other: &Monomial) -> Monomial {
        let mut perm = [0; 4];
        let mut phase = [ZERO; 4];
        for r in 0..4 {
            let mid = self.perm[r];
            perm[r] = other.perm[mid];
            phase[r] = self.phase[r] * other.phase[mid];
        }
        Monomial { perm, phase }
    }

    pub fn scaled(&self, c: C64) -> Monomial {
        Monomial { perm: self.perm, phase: self.phase.map(|p| p * c) }
    }

    pub fn to_matrix(&self) -> Matrix4<C64> {
        let mut m = Matrix4::zeros();
        for r in 0..4 {
            m[(r, self.perm[r])] = self.phase[r];
        }
        m
    }

    /// `out += scale · M ψ` on a twisted spinor with `dv` fermion components.
    #[inline]
    pub fn apply_add(&self, psi: &[C64], dv: usize, scale: C64, out: &mut [C64]) {
        for r in 0..4 {
            let c = self.phase[r] * scale;
            let src = &psi[self.perm[r] * dv..(self.perm[r] + 1) * dv];
            for (o, s) in out[r * dv..(r + 1) * dv].iter_mut().zip(src) {
                *o += c * s;
            }
        }
    }

    /// Real-scaled variant of [`Monomial::apply_add`].
    #[inline]
    pub fn apply_add_re(&self, psi: &[C64], dv: usize, scale: f64, out: &mut [C64]) {
        self.apply_add(psi, dv, C64::new(scale, 0.0), out)
    }
}

/// `γ_μ` for `μ = 0..3`.
pub fn gamma(mu: usize) -> Monomial {
    match mu {
        0 => Monomial { perm: [2, 3, 0, 1], phase: [ONE; 4] },
        1 => Monomial { perm: [3, 2, 1, 0], phase: [-ONE, -ONE, ONE, ONE] },
        2 => Monomial { perm: [3, 2, 1, 0], phase: [I, -I, -I, I] },
        3 => Monomial { perm: [2, 3, 0, 1], phase: [-ONE, ONE, ONE, -ONE] },
        _ => panic!("gamma index {mu} out of range"),
    }
}

/// Volume element `ω = iγ₀γ₁γ₂γ₃ = diag(I, −I)`.
pub fn omega() -> Monomial {
    gamma(0).compose(&gamma(1)).compose(&gamma(2)).compose(&gamma(3)).scaled(I)
}

/// The explicit matrices, mainly for tests and diagnostics.
#[derive(Clone, Debug)]
pub struct GammaSet {
    pub gamma: [Matrix4<C64>; 4],
    pub omega: Matrix4<C64>,
    pub proj_plus: Matrix4<C64>,
    pub proj_minus: Matrix4<C64>,
}

impl GammaSet {
    pub fn weyl() -> Self {
        let omega = omega().to_matrix();
        let id = Matrix4::<C64>::identity();
        GammaSet {
            gamma: [0, 1, 2, 3].map(|mu| gamma(mu).to_matrix()),
            omega,
            proj_plus: (id + omega) * C64::new(0.5, 0.0),
            proj_minus: (id - omega) * C64::new(0.5, 0.0),
        }
    }
}

/// Minkowski metric `η = diag(−1, 1, 1, 1)`.
pub fn minkowski(mu: usize, nu: usize) -> f64 {
    match (mu, nu) {
        (0, 0) => -1.0,
        (a, b) if a == b => 1.0,
        _ => 0.0,
    }
}

/// `(Σ X^μ γ_μ) ψ`.
pub fn clifford_mul(x: [f64; 4], psi: &[C64], dv: usize) -> Vec<C64> {
    let mut out = vec![ZERO; psi.len()];
    for (mu, &c) in x.iter().enumerate() {
        if c != 0.0 {
            gamma(mu).apply_add_re(psi, dv, c, &mut out);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chirality {
    Plus,
    Minus,
}

/// `π_± ψ = ½(I ± ω)ψ`; with `ω = diag(I, −I)` this keeps the upper (plus)
/// or lower (minus) spin components.
pub fn chiral_project(sign: Chirality, psi: &[C64], dv: usize) -> Vec<C64> {
    let mut out = psi.to_vec();
    let zeroed = match sign {
        Chirality::Plus => 2 * dv..4 * dv,
        Chirality::Minus => 0..2 * dv,
    };
    out[zeroed].iter_mut().for_each(|z| *z = ZERO);
    out
}

/// `ψ†γ₀φ` tensored with the Hermitian product on V.
#[inline]
pub fn spin_inner(psi: &[C64], phi: &[C64], dv: usize) -> C64 {
    let mut acc = ZERO;
    for v in 0..dv {
        acc += psi[v].conj() * phi[2 * dv + v]
            + psi[dv + v].conj() * phi[3 * dv + v]
            + psi[2 * dv + v].conj() * phi[v]
            + psi[3 * dv + v].conj() * phi[dv + v];
    }
    acc
}

/// `ψ†φ`, the positive-definite product `⟨ψ, e₀·φ⟩`.
#[inline]
pub fn spin_inner_pos(psi: &[C64], phi: &[C64]) -> C64 {
    psi.iter().zip(phi).map(|(a, b)| a.conj() * b).sum()
}

/// Whether spin index `s` and fermion index `v` belong to the chirality-matched
/// subbundle `Σ₊⊗V₊ ⊕ Σ₋⊗V₋`.
#[inline]
pub fn in_fer_plus(s: usize, v: usize, dim_vp: usize) -> bool {
    (s < 2) == (v < dim_vp)
}

/// Zero the components outside `Σ₊⊗V₊ ⊕ Σ₋⊗V₋`.
pub fn project_fer_plus(psi: &mut [C64], dim_vp: usize, dv: usize) {
    for s in 0..4 {
        for v in 0..dv {
            if !in_fer_plus(s, v, dim_vp) {
                psi[s * dv + v] = ZERO;
            }
        }
    }
}

/// Largest modulus of a component outside `Σ₊⊗V₊ ⊕ Σ₋⊗V₋`.
pub fn fer_plus_defect(psi: &[C64], dim_vp: usize, dv: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..4 {
        for v in 0..dv {
            if !in_fer_plus(s, v, dim_vp) {
                worst = worst.max(psi[s * dv + v].norm());
            }
        }
    }
    worst
}
