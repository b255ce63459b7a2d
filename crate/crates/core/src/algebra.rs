//! Compact Lie algebras, unitary representations and Yukawa maps.
//!
//! Lie algebras are stored by structure constants `f[a][b][c]` in a basis that
//! is orthonormal for the Ad-invariant inner product, so `[ξ_a, ξ_b] = f_abc ξ_c`
//! and every inner product on the algebra is Euclidean.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::check_len;
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Tolerance used when validating user-supplied algebraic data.
pub const VALIDATION_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LieData {
    name: String,
    dim: usize,
    f: Vec<f64>,
    terms: Vec<(usize, usize, usize, f64)>,
}

impl LieData {
    /// Build from a dense row-major `f[a][b][c]` array and validate it.
    pub fn new(name: &str, dim: usize, f: Vec<f64>) -> Result<Self> {
        check_len("structure constants", f.len(), dim * dim * dim)?;
        let mut terms = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let v = f[(a * dim + b) * dim + c];
                    if v != 0.0 {
                        terms.push((a, b, c, v));
                    }
                }
            }
        }
        let lie = LieData { name: name.to_string(), dim, f, terms };
        let worst = lie
            .antisymmetry_residual()
            .max(lie.jacobi_residual())
            .max(lie.ad_invariance_residual());
        if worst > VALIDATION_TOL {
            return Err(Error::Input(format!(
                "structure constants for '{name}' violate antisymmetry/Jacobi/Ad-invariance (residual {worst:e})"
            )));
        }
        Ok(lie)
    }

    pub fn u1() -> Self {
        LieData::new("u1", 1, vec![0.0]).expect("u(1) is valid")
    }

    /// su(2) with `f = ε`, basis `ξ_a = -(i/2)σ_a`.
    pub fn su2() -> Self {
        let mut f = vec![0.0; 27];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    f[(a * 3 + b) * 3 + c] = levi_civita(a, b, c);
                }
            }
        }
        LieData::new("su2", 3, f).expect("su(2) is valid")
    }

    /// su(3) in the Gell-Mann basis `ξ_a = -(i/2)λ_a`; constants are computed
    /// from the matrices via `f_abc = -2 Tr([ξ_a, ξ_b] ξ_c)`.
    pub fn su3() -> Self {
        let gens = gell_mann_generators();
        let f = structure_constants_from_matrices(&gens, 3);
        LieData::new("su3", 8, f).expect("su(3) is valid")
    }

    /// Parse the plain-text format: `#` comments, then the dimension, then
    /// `dim³` numbers in row-major `f[a][b][c]` order (any whitespace).
    pub fn from_text(name: &str, text: &str) -> Result<Self> {
        let mut numbers = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>());
        let dim: usize = numbers
            .next()
            .ok_or_else(|| Error::Format("empty structure-constant file".into()))?
            .parse()
            .map_err(|e| Error::Format(format!("bad dimension: {e}")))?;
        if dim == 0 {
            return Err(Error::Format("dimension must be positive".into()));
        }
        let f: Vec<f64> = numbers
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("bad number '{s}': {e}"))))
            .collect::<Result<_>>()?;
        LieData::new(name, dim, f)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
        LieData::from_text(name, &text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_abelian(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn structure_constant(&self, a: usize, b: usize, c: usize) -> f64 {
        self.f[(a * self.dim + b) * self.dim + c]
    }

    /// `[X, Y] = Σ f_abc X_a Y_b ξ_c`.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_len("bracket lhs", x.len(), self.dim)?;
        check_len("bracket rhs", y.len(), self.dim)?;
        let mut out = vec![0.0; self.dim];
        self.bracket_add(x, y, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale·[x, y]` without length checks.
    #[inline]
    pub fn bracket_add(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        for &(a, b, c, v) in &self.terms {
            out[c] += scale * v * x[a] * y[b];
        }
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    worst = worst.max((self.structure_constant(a, b, c) + self.structure_constant(b, a, c)).abs());
                }
            }
        }
        worst
    }

    /// Max over basis triples of `|[ξa,[ξb,ξc]] + [ξb,[ξc,ξa]] + [ξc,[ξa,ξb]]|`.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += self.structure_constant(b, c, m) * self.structure_constant(a, m, e)
                                + self.structure_constant(c, a, m) * self.structure_constant(b, m, e)
                                + self.structure_constant(a, b, m) * self.structure_constant(c, m, e);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Max of `|⟨[ξa,ξb],ξc⟩ + ⟨ξb,[ξa,ξc]⟩|`.
    pub fn ad_invariance_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let s = self.structure_constant(a, b, c) + self.structure_constant(a, c, b);
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }
}

pub fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn pauli() -> [[C64; 4]; 3] {
    let o = C64::new(1.0, 0.0);
    [[ZERO, o, o, ZERO], [ZERO, -I, I, ZERO], [o, ZERO, ZERO, -o]]
}

fn gell_mann() -> Vec<[C64; 9]> {
    let o = C64::new(1.0, 0.0);
    let r3 = 1.0 / 3f64.sqrt();
    let z = ZERO;
    vec![
        [z, o, z, o, z, z, z, z, z],
        [z, -I, z, I, z, z, z, z, z],
        [o, z, z, z, -o, z, z, z, z],
        [z, z, o, z, z, z, o, z, z],
        [z, z, -I, z, z, z, I, z, z],
        [z, z, z, z, z, o, z, o, z],
        [z, z, z, z, z, -I, z, I, z],
        [o * r3, z, z, z, o * r3, z, z, z, o * (-2.0 * r3)],
    ]
}

fn gell_mann_generators() -> Vec<C64> {
    gell_mann().iter().flat_map(|m| m.iter().map(|v| v * C64::new(0.0, -0.5))).collect()
}

fn pauli_generators() -> Vec<C64> {
    pauli().iter().flat_map(|m| m.iter().map(|v| v * C64::new(0.0, -0.5))).collect()
}

fn structure_constants_from_matrices(gens: &[C64], n: usize) -> Vec<f64> {
    let d = gens.len() / (n * n);
    let g = |a: usize| DMatrix::from_row_slice(n, n, &gens[a * n * n..(a + 1) * n * n]);
    let mut f = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            let comm = g(a) * g(b) - g(b) * g(a);
            for c in 0..d {
                let v = -2.0 * (&comm * g(c)).trace().re;
                f[(a * d + b) * d + c] = if v.abs() < 1e-15 { 0.0 } else { v };
            }
        }
    }
    f
}

/// A unitary representation through its skew-Hermitian generators `ρ*(ξ_a)`.
#[derive(Clone, Debug)]
pub struct ReprData {
    name: String,
    dim: usize,
    lie_dim: usize,
    gens: Vec<C64>,
    gram_inv: Option<DMatrix<f64>>,
}

impl ReprData {
    /// Build and validate against `lie` (skew-Hermitian generators, homomorphism).
    pub fn new(name: &str, lie: &LieData, dim: usize, gens: Vec<C64>) -> Result<Self> {
        check_len("generators", gens.len(), lie.dim() * dim * dim)?;
        let lie_dim = lie.dim();
        let gram = DMatrix::from_fn(lie_dim, lie_dim, |a, b| {
            (0..dim * dim).map(|k| (gens[a * dim * dim + k].conj() * gens[b * dim * dim + k]).re).sum::<f64>()
        });
        let gram_inv = gram.clone().try_inverse().filter(|_| gram.determinant().abs() > 1e-12);
        let rep = ReprData { name: name.to_string(), dim, lie_dim, gens, gram_inv };
        let skew = rep.skew_residual();
        let hom = rep.homomorphism_residual(lie);
        if skew > VALIDATION_TOL || hom > VALIDATION_TOL {
            return Err(Error::Input(format!(
                "representation '{name}' invalid: skew residual {skew:e}, homomorphism residual {hom:e}"
            )));
        }
        Ok(rep)
    }

    pub fn trivial(lie: &LieData, dim: usize) -> Self {
        ReprData::new("trivial", lie, dim, vec![ZERO; lie.dim() * dim * dim]).expect("trivial rep is valid")
    }

    /// Charge-`q` representation of u(1): `ρ*(ξ) = iq`.
    pub fn u1_charge(q: f64) -> Self {
        ReprData::new(&format!("u1[q={q}]"), &LieData::u1(), 1, vec![C64::new(0.0, q)]).expect("valid")
    }

    /// Fundamental of su(2), `ρ*(ξ_a) = -(i/2)σ_a`.
    pub fn su2_fundamental() -> Self {
        ReprData::new("su2-fundamental", &LieData::su2(), 2, pauli_generators()).expect("valid")
    }

    /// Fundamental of su(3), `ρ*(ξ_a) = -(i/2)λ_a`.
    pub fn su3_fundamental() -> Self {
        ReprData::new("su3-fundamental", &LieData::su3(), 3, gell_mann_generators()).expect("valid")
    }

    /// Complexified adjoint representation, `ρ*(ξ_a)_{cb} = f_abc`.
    pub fn adjoint(lie: &LieData) -> Self {
        let d = lie.dim();
        let mut gens = vec![ZERO; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    gens[a * d * d + c * d + b] = C64::new(lie.structure_constant(a, b, c), 0.0);
                }
            }
        }
        ReprData::new("adjoint", lie, d, gens).expect("adjoint rep is valid")
    }

    /// Block-diagonal direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &ReprData, lie: &LieData) -> Result<Self> {
        if self.lie_dim != other.lie_dim {
            return Err(Error::Dimension("direct sum of representations of different algebras".into()));
        }
        let n = self.dim + other.dim;
        let mut gens = vec![ZERO; self.lie_dim * n * n];
        for a in 0..self.lie_dim {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    gens[a * n * n + i * n + j] = self.entry(a, i, j);
                }
            }
            for i in 0..other.dim {
                for j in 0..other.dim {
                    gens[a * n * n + (self.dim + i) * n + self.dim + j] = other.entry(a, i, j);
                }
            }
        }
        ReprData::new(&format!("{}+{}", self.name, other.name), lie, n, gens)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lie_dim(&self) -> usize {
        self.lie_dim
    }

    #[inline]
    pub fn entry(&self, a: usize, i: usize, j: usize) -> C64 {
        self.gens[a * self.dim * self.dim + i * self.dim + j]
    }

    pub fn generator_matrix(&self, a: usize) -> DMatrix<C64> {
        let n = self.dim;
        DMatrix::from_row_slice(n, n, &self.gens[a * n * n..(a + 1) * n * n])
    }

    /// `ρ*(ξ)` as a dense matrix.
    pub fn matrix(&self, xi: &[f64]) -> DMatrix<C64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |i, j| (0..self.lie_dim).map(|a| self.entry(a, i, j) * xi[a]).sum())
    }

    /// `ρ*(ξ) w = Σ_a ξ_a ρ*(ξ_a) w`.
    pub fn apply(&self, xi: &[f64], w: &[C64]) -> Result<Vec<C64>> {
        check_len("lie vector", xi.len(), self.lie_dim)?;
        check_len("representation vector", w.len(), self.dim)?;
        let mut out = vec![ZERO; self.dim];
        self.apply_add(xi, w, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale·ρ*(ξ) w` without length checks.
    #[inline]
    pub fn apply_add(&self, xi: &[f64], w: &[C64], scale: f64, out: &mut [C64]) {
        let n = self.dim;
        for (a, &x) in xi.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let g = &self.gens[a * n * n..(a + 1) * n * n];
            let s = x * scale;
            for i in 0..n {
                let row = &g[i * n..(i + 1) * n];
                let mut acc = ZERO;
                for j in 0..n {
                    acc += row[j] * w[j];
                }
                out[i] += acc * s;
            }
        }
    }

    /// `out = ρ*(ξ_a) w` for a single basis element.
    #[inline]
    pub fn apply_basis(&self, a: usize, w: &[C64], out: &mut [C64]) {
        let n = self.dim;
        let g = &self.gens[a * n * n..(a + 1) * n * n];
        for i in 0..n {
            let mut acc = ZERO;
            for j in 0..n {
                acc += g[i * n + j] * w[j];
            }
            out[i] = acc;
        }
    }

    pub fn skew_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.lie_dim {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    worst = worst.max((self.entry(a, i, j) + self.entry(a, j, i).conj()).norm());
                }
            }
        }
        worst
    }

    /// Max over basis pairs of `‖ρ*([ξa,ξb]) − [ρ*(ξa),ρ*(ξb)]‖`.
    pub fn homomorphism_residual(&self, lie: &LieData) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.lie_dim {
            for b in 0..self.lie_dim {
                let ga = self.generator_matrix(a);
                let gb = self.generator_matrix(b);
                let comm = &ga * &gb - &gb * &ga;
                let br: Vec<f64> = (0..self.lie_dim).map(|c| lie.structure_constant(a, b, c)).collect();
                let lhs = self.matrix(&br);
                worst = worst.max((lhs - comm).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Least-squares Lie-algebra coordinates of the matrix `m` in this
    /// representation (exact when `m` lies in the image of `ρ*`).
    pub fn project_to_algebra(&self, m: &DMatrix<C64>) -> Result<Vec<f64>> {
        let gi = self
            .gram_inv
            .as_ref()
            .ok_or_else(|| Error::Input(format!("representation '{}' is not faithful", self.name)))?;
        let n = self.dim;
        let rhs = DVector::from_fn(self.lie_dim, |a, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += (self.entry(a, i, j).conj() * m[(i, j)]).re;
                }
            }
            s
        });
        Ok((gi * rhs).iter().copied().collect())
    }
}

/// Pairing used when contracting twisted spinors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pairing {
    /// `ψ†γ₀φ` tensored with the Hermitian product on V.
    Indefinite,
    /// `ψ†φ`.
    Positive,
}

/// An ℝ-linear map `w ↦ Z_w : V₊ → V₋`, stored as `Z_w = Σ_k (w_k L_k + w̄_k A_k)`.
/// The induced `Y_w = [[0, −Z_w†], [Z_w, 0]]` acts on `V = V₊ ⊕ V₋`.
#[derive(Clone, Debug)]
pub struct YukawaData {
    dim_w: usize,
    dim_vp: usize,
    dim_vm: usize,
    linear: Vec<C64>,
    antilinear: Vec<C64>,
}

impl YukawaData {
    pub fn new(dim_w: usize, dim_vp: usize, dim_vm: usize, linear: Vec<C64>, antilinear: Vec<C64>) -> Result<Self> {
        let block = dim_w * dim_vm * dim_vp;
        check_len("linear Yukawa blocks", linear.len(), block)?;
        check_len("antilinear Yukawa blocks", antilinear.len(), block)?;
        Ok(YukawaData { dim_w, dim_vp, dim_vm, linear, antilinear })
    }

    pub fn zero(dim_w: usize, dim_vp: usize, dim_vm: usize) -> Self {
        let block = dim_w * dim_vm * dim_vp;
        YukawaData { dim_w, dim_vp, dim_vm, linear: vec![ZERO; block], antilinear: vec![ZERO; block] }
    }

    /// `Z_w(v) = y·w†v` with `W = V₊ = ℂⁿ`, `V₋ = ℂ`.
    pub fn fundamental_singlet(n: usize, coupling: f64) -> Self {
        let mut anti = vec![ZERO; n * n];
        for k in 0..n {
            anti[k * n + k] = C64::new(coupling, 0.0);
        }
        YukawaData { dim_w: n, dim_vp: n, dim_vm: 1, linear: vec![ZERO; n * n], antilinear: anti }
    }

    /// `Z_w(v) = y·w·v` on one-dimensional spaces.
    pub fn u1_product(coupling: f64) -> Self {
        YukawaData { dim_w: 1, dim_vp: 1, dim_vm: 1, linear: vec![C64::new(coupling, 0.0)], antilinear: vec![ZERO] }
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn dim_vp(&self) -> usize {
        self.dim_vp
    }

    pub fn dim_vm(&self) -> usize {
        self.dim_vm
    }

    pub fn dim_v(&self) -> usize {
        self.dim_vp + self.dim_vm
    }

    pub fn is_zero(&self) -> bool {
        self.linear.iter().chain(&self.antilinear).all(|z| *z == ZERO)
    }

    /// Row-major `dim_vm × dim_vp` matrix of `Z_w`.
    pub fn z_matrix(&self, w: &[C64]) -> Vec<C64> {
        let blk = self.dim_vm * self.dim_vp;
        let mut z = vec![ZERO; blk];
        for k in 0..self.dim_w {
            let wk = w[k];
            let wc = wk.conj();
            for e in 0..blk {
                z[e] += self.linear[k * blk + e] * wk + self.antilinear[k * blk + e] * wc;
            }
        }
        z
    }

    /// `Y_w v = (−Z_w† v₋, Z_w v₊)`.
    pub fn apply(&self, w: &[C64], v: &[C64]) -> Result<Vec<C64>> {
        check_len("Higgs vector", w.len(), self.dim_w)?;
        check_len("fermion vector", v.len(), self.dim_v())?;
        let z = self.z_matrix(w);
        let mut out = vec![ZERO; self.dim_v()];
        self.apply_with(&z, v, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale·Y v` for a precomputed `Z` matrix, `v ∈ V`.
    #[inline]
    pub fn apply_with(&self, z: &[C64], v: &[C64], scale: f64, out: &mut [C64]) {
        let (p, m) = (self.dim_vp, self.dim_vm);
        for r in 0..m {
            let mut acc = ZERO;
            for c in 0..p {
                acc += z[r * p + c] * v[c];
            }
            out[p + r] += acc * scale;
        }
        for c in 0..p {
            let mut acc = ZERO;
            for r in 0..m {
                acc += z[r * p + c].conj() * v[p + r];
            }
            out[c] -= acc * scale;
        }
    }

    /// `out += scale·Y ψ` on a twisted spinor (`4 × dim_v`, V index fastest).
    #[inline]
    pub fn apply_spinor_with(&self, z: &[C64], psi: &[C64], scale: f64, out: &mut [C64]) {
        let dv = self.dim_v();
        for s in 0..4 {
            self.apply_with(z, &psi[s * dv..(s + 1) * dv], scale, &mut out[s * dv..(s + 1) * dv]);
        }
    }

    /// The W-valued source `½ Σ_k ⟨ψ, (iY_{W_k} − Y_{iW_k})ψ⟩ W_k` for the
    /// standard basis `W_k` of W.
    pub fn antilinear_current(&self, psi: &[C64], pairing: Pairing) -> Result<Vec<C64>> {
        check_len("twisted spinor", psi.len(), 4 * self.dim_v())?;
        let mut out = vec![ZERO; self.dim_w];
        self.antilinear_current_into(psi, pairing, &mut out);
        Ok(out)
    }

    pub fn antilinear_current_into(&self, psi: &[C64], pairing: Pairing, out: &mut [C64]) {
        let dv = self.dim_v();
        let mut tmp = vec![ZERO; 4 * dv];
        let mut basis = vec![ZERO; self.dim_w];
        for k in 0..self.dim_w {
            basis.iter_mut().for_each(|b| *b = ZERO);
            basis[k] = C64::new(1.0, 0.0);
            tmp.iter_mut().for_each(|t| *t = ZERO);
            let z = self.z_matrix(&basis);
            self.apply_spinor_with(&z, psi, 1.0, &mut tmp);
            let a = pair(psi, &tmp, dv, pairing);
            basis[k] = I;
            tmp.iter_mut().for_each(|t| *t = ZERO);
            let z = self.z_matrix(&basis);
            self.apply_spinor_with(&z, psi, 1.0, &mut tmp);
            let b = pair(psi, &tmp, dv, pairing);
            out[k] = (I * a - b) * 0.5;
        }
    }
}

/// `⟨ψ, φ⟩` for twisted spinors with `dv` fermion components per spin index.
#[inline]
pub fn pair(psi: &[C64], phi: &[C64], dv: usize, pairing: Pairing) -> C64 {
    match pairing {
        Pairing::Positive => crate::clifford::spin_inner_pos(psi, phi),
        Pairing::Indefinite => crate::clifford::spin_inner(psi, phi, dv),
    }
}

/// Gauge content: algebra, defining representation, Higgs representation on W,
/// fermion representation on `V = V₊ ⊕ V₋` and the Yukawa map.
#[derive(Clone, Debug)]
pub struct GaugeModel {
    pub name: String,
    pub lie: LieData,
    pub defining: ReprData,
    pub higgs: ReprData,
    pub fermion: ReprData,
    pub dim_vp: usize,
    pub dim_vm: usize,
    pub yukawa: YukawaData,
}

/// Charges of the u(1) toy model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct U1Charges {
    pub higgs: f64,
    pub plus: f64,
    pub minus: f64,
}

impl Default for U1Charges {
    fn default() -> Self {
        U1Charges { higgs: 1.0, plus: 1.0, minus: 2.0 }
    }
}

impl GaugeModel {
    pub fn new(
        name: &str,
        lie: LieData,
        defining: ReprData,
        higgs: ReprData,
        plus: ReprData,
        minus: ReprData,
        yukawa: YukawaData,
    ) -> Result<Self> {
        if yukawa.dim_w() != higgs.dim() || yukawa.dim_vp() != plus.dim() || yukawa.dim_vm() != minus.dim() {
            return Err(Error::Dimension("Yukawa blocks do not match representation dimensions".into()));
        }
        let fermion = plus.direct_sum(&minus, &lie)?;
        Ok(GaugeModel {
            name: name.to_string(),
            dim_vp: plus.dim(),
            dim_vm: minus.dim(),
            lie,
            defining,
            higgs,
            fermion,
            yukawa,
        })
    }

    /// u(1) toy: W, V₊, V₋ one-dimensional with the given charges and `Z_w(v) = y·wv`.
    pub fn u1_toy(charges: U1Charges, yukawa: f64) -> Result<Self> {
        GaugeModel::new(
            "u1",
            LieData::u1(),
            ReprData::u1_charge(1.0),
            ReprData::u1_charge(charges.higgs),
            ReprData::u1_charge(charges.plus),
            ReprData::u1_charge(charges.minus),
            YukawaData::u1_product(yukawa),
        )
    }

    /// su(2) electroweak toy: W = V₊ = ℂ² doublets, V₋ = ℂ singlet, `Z_w(v) = y·w†v`.
    pub fn su2_electroweak(yukawa: f64) -> Result<Self> {
        let lie = LieData::su2();
        GaugeModel::new(
            "su2",
            lie.clone(),
            ReprData::su2_fundamental(),
            ReprData::su2_fundamental(),
            ReprData::su2_fundamental(),
            ReprData::trivial(&lie, 1),
            YukawaData::fundamental_singlet(2, yukawa),
        )
    }

    /// su(3) toy: W = V₊ = ℂ³ triplets, V₋ = ℂ singlet, `Z_w(v) = y·w†v`.
    pub fn su3_color(yukawa: f64) -> Result<Self> {
        let lie = LieData::su3();
        GaugeModel::new(
            "su3",
            lie.clone(),
            ReprData::su3_fundamental(),
            ReprData::su3_fundamental(),
            ReprData::su3_fundamental(),
            ReprData::trivial(&lie, 1),
            YukawaData::fundamental_singlet(3, yukawa),
        )
    }

    /// Any algebra with an adjoint Higgs field and no fermions.
    pub fn adjoint_higgs(lie: LieData) -> Result<Self> {
        let adj = ReprData::adjoint(&lie);
        let d = adj.dim();
        GaugeModel::new(
            &format!("{}-adjoint", lie.name()),
            lie.clone(),
            adj.clone(),
            adj,
            ReprData::trivial(&lie, 0),
            ReprData::trivial(&lie, 0),
            YukawaData::zero(d, 0, 0),
        )
    }

    pub fn dim_g(&self) -> usize {
        self.lie.dim()
    }

    pub fn dim_w(&self) -> usize {
        self.higgs.dim()
    }

    pub fn dim_v(&self) -> usize {
        self.dim_vp + self.dim_vm
    }

    /// Max over random `(ξ, w, v)` of `|[χ*(ξ), Y_w]v − Y_{ρ*(ξ)w}v|`.
    pub fn check_equivariance<R: Rng>(&self, samples: usize, rng: &mut R) -> f64 {
        let (dg, dw, dv) = (self.dim_g(), self.dim_w(), self.dim_v());
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let xi: Vec<f64> = (0..dg).map(|_| rng.sample(StandardNormal)).collect();
            let w = random_complex(rng, dw);
            let v = random_complex(rng, dv);
            let z = self.yukawa.z_matrix(&w);
            let mut yv = vec![ZERO; dv];
            self.yukawa.apply_with(&z, &v, 1.0, &mut yv);
            let mut chi_yv = vec![ZERO; dv];
            self.fermion.apply_add(&xi, &yv, 1.0, &mut chi_yv);
            let mut chi_v = vec![ZERO; dv];
            self.fermion.apply_add(&xi, &v, 1.0, &mut chi_v);
            let mut y_chi_v = vec![ZERO; dv];
            self.yukawa.apply_with(&z, &chi_v, 1.0, &mut y_chi_v);
            let mut rho_w = vec![ZERO; dw];
            self.higgs.apply_add(&xi, &w, 1.0, &mut rho_w);
            let zr = self.yukawa.z_matrix(&rho_w);
            let mut y_rho = vec![ZERO; dv];
            self.yukawa.apply_with(&zr, &v, 1.0, &mut y_rho);
            for i in 0..dv {
                worst = worst.max((chi_yv[i] - y_chi_v[i] - y_rho[i]).norm());
            }
        }
        worst
    }
}

pub fn random_complex<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

/// `exp(ρ*(ξ))` by scaling and squaring.
pub fn exp_algebra(repr: &ReprData, xi: &[f64]) -> DMatrix<C64> {
    repr.matrix(xi).exp()
}

/// Unitary factor of the polar decomposition, `U = W Vᴴ` from the SVD.
pub fn polar_unitary(m: &DMatrix<C64>) -> DMatrix<C64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// `max |(m†m − I)_ij|`.
pub fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let p = m.adjoint() * m;
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn su2_bracket_of_basis() {
        let lie = LieData::su2();
        let out = lie.bracket(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn bracket_dimension_mismatch_is_error() {
        assert!(matches!(LieData::su2().bracket(&[1.0], &[0.0, 1.0, 0.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn u1_is_abelian() {
        let lie = LieData::u1();
        assert_eq!(lie.bracket(&[2.0], &[3.0]).unwrap(), vec![0.0]);
        assert!(lie.is_abelian());
    }

    #[test]
    fn su3_known_constants() {
        let lie = LieData::su3();
        assert!((lie.structure_constant(0, 1, 2) - 1.0).abs() < 1e-14);
        assert!((lie.structure_constant(0, 3, 6) - 0.5).abs() < 1e-14);
        assert!((lie.structure_constant(3, 4, 7) - 3f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((lie.structure_constant(5, 6, 7) - 3f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn shipped_algebras_pass_identities() {
        for lie in [LieData::u1(), LieData::su2(), LieData::su3()] {
            assert!(lie.jacobi_residual() <= 1e-12, "{}", lie.name());
            assert!(lie.ad_invariance_residual() <= 1e-12);
            assert!(lie.antisymmetry_residual() == 0.0);
        }
    }

    #[test]
    fn text_format_round_trip_and_rejection() {
        let lie = LieData::from_text("t", "# su2\n3\n0 0 0  0 0 1  0 -1 0\n0 0 -1  0 0 0  1 0 0\n0 1 0  -1 0 0  0 0 0\n").unwrap();
        assert_eq!(lie.structure_constant(0, 1, 2), 1.0);
        let bad = LieData::from_text("b", "2\n0 1 0 0  0 0 0 0");
        assert!(bad.is_err());
    }

    #[test]
    fn reps_are_homomorphisms() {
        let su2 = LieData::su2();
        let su3 = LieData::su3();
        assert!(ReprData::su2_fundamental().homomorphism_residual(&su2) <= 1e-12);
        assert!(ReprData::su3_fundamental().homomorphism_residual(&su3) <= 1e-12);
        assert!(ReprData::adjoint(&su3).homomorphism_residual(&su3) <= 1e-12);
        assert!(ReprData::su3_fundamental().skew_residual() == 0.0);
    }

    #[test]
    fn positive_sign_pauli_generators_fail_homomorphism() {
        let gens: Vec<C64> = pauli().iter().flat_map(|m| m.iter().map(|v| v * C64::new(0.0, 0.5))).collect();
        assert!(ReprData::new("wrong", &LieData::su2(), 2, gens).is_err());
    }

    #[test]
    fn rho_star_u1_charge() {
        let r = ReprData::u1_charge(3.0);
        let out = r.apply(&[2.0], &[C64::new(1.0, 0.0)]).unwrap();
        assert_eq!(out[0], C64::new(0.0, 6.0));
        let zero = r.apply(&[0.0], &[C64::new(1.0, 0.0)]).unwrap();
        assert_eq!(zero[0], ZERO);
    }

    #[test]
    fn electroweak_toy_example() {
        let y = YukawaData::fundamental_singlet(2, 1.0);
        let one = C64::new(1.0, 0.0);
        let out = y.apply(&[one, ZERO], &[one, ZERO, ZERO]).unwrap();
        assert_eq!(out, vec![ZERO, ZERO, one]);
        let zero = y.apply(&[ZERO, ZERO], &[one, one, one]).unwrap();
        assert!(zero.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn u1_toy_example() {
        let y = YukawaData::u1_product(1.0);
        let out = y.apply(&[C64::new(2.0, 0.0)], &[C64::new(3.0, 0.0), ZERO]).unwrap();
        assert_eq!(out[1], C64::new(6.0, 0.0));
    }

    #[test]
    fn equivariance_of_toys_and_negative_control() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(GaugeModel::su2_electroweak(1.0).unwrap().check_equivariance(100, &mut rng) <= 1e-12);
        assert!(GaugeModel::su3_color(0.7).unwrap().check_equivariance(100, &mut rng) <= 1e-12);
        assert!(GaugeModel::u1_toy(U1Charges::default(), 1.0).unwrap().check_equivariance(100, &mut rng) <= 1e-12);
        let bad = U1Charges { higgs: 1.0, plus: 1.0, minus: 1.0 };
        assert!(GaugeModel::u1_toy(bad, 1.0).unwrap().check_equivariance(100, &mut rng) > 1e-3);
    }

    #[test]
    fn antilinear_current_zero_cases() {
        let y = YukawaData::fundamental_singlet(2, 1.0);
        let out = y.antilinear_current(&[ZERO; 12], Pairing::Indefinite).unwrap();
        assert!(out.iter().all(|z| *z == ZERO));
        let model = GaugeModel::u1_toy(U1Charges::default(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_complex(&mut rng, 8);
        let out = model.yukawa.antilinear_current(&psi, Pairing::Indefinite).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn antilinear_current_defining_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [
            GaugeModel::su2_electroweak(0.8).unwrap(),
            GaugeModel::su3_color(1.3).unwrap(),
            GaugeModel::u1_toy(U1Charges::default(), 0.6).unwrap(),
        ] {
            let (dw, dv) = (model.dim_w(), model.dim_v());
            for _ in 0..100 {
                let w = random_complex(&mut rng, dw);
                let psi = random_complex(&mut rng, 4 * dv);
                let c = model.yukawa.antilinear_current(&psi, Pairing::Indefinite).unwrap();
                let lhs: C64 = w.iter().zip(&c).map(|(a, b)| a.conj() * b).sum::<C64>() * 2.0;
                let z = model.yukawa.z_matrix(&w);
                let mut yp = vec![ZERO; 4 * dv];
                model.yukawa.apply_spinor_with(&z, &psi, 1.0, &mut yp);
                let ip: Vec<C64> = yp.iter().map(|x| I * x).collect();
                let rhs = crate::clifford::spin_inner(&psi, &ip, dv);
                assert!(rhs.im.abs() < 1e-12);
                assert!((lhs.re - rhs.re).abs() < 1e-12 * (1.0 + rhs.re.abs()), "{} vs {}", lhs.re, rhs.re);
            }
        }
    }

    #[test]
    fn yukawa_is_skew_hermitian_and_real_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = GaugeModel::su2_electroweak(1.0).unwrap();
        let y = &model.yukawa;
        for _ in 0..20 {
            let w = random_complex(&mut rng, 2);
            let u = random_complex(&mut rng, 3);
            let v = random_complex(&mut rng, 3);
            let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
            let yu = y.apply(&w, &u).unwrap();
            let yv = y.apply(&w, &v).unwrap();
            assert!((dot(&yu, &v) + dot(&u, &yv)).norm() < 1e-13);
            let w2 = random_complex(&mut rng, 2);
            let comb: Vec<C64> = w.iter().zip(&w2).map(|(a, b)| a * 2.0 - b * 0.5).collect();
            let lhs = y.apply(&comb, &u).unwrap();
            let r2 = y.apply(&w2, &u).unwrap();
            for i in 0..3 {
                assert!((lhs[i] - (yu[i] * 2.0 - r2[i] * 0.5)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn polar_projection_restores_unitarity() {
        let r = ReprData::su2_fundamental();
        let mut g = exp_algebra(&r, &[0.3, -1.2, 0.5]);
        assert!(unitarity_defect(&g) < 1e-13);
        g[(0, 0)] += C64::new(1e-4, 2e-4);
        assert!(unitarity_defect(&g) > 1e-5);
        assert!(unitarity_defect(&polar_unitary(&g)) < 1e-13);
    }

    #[test]
    fn projection_recovers_coordinates() {
        let r = ReprData::su3_fundamental();
        let xi = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8];
        let back = r.project_to_algebra(&r.matrix(&xi)).unwrap();
        for (a, b) in xi.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
