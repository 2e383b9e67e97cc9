//! Right inverse `Q_φ` of `d_φℱ`.
//!
//! With `Z` the non-∂̄ part of the linearization, the integral operator is
//! `Φ = I + T∘Z` on the unknown space. A small holomorphic-valued finite-rank
//! `L` makes `Φ̃ = Φ + L` invertible and `Q = Φ̃⁻¹∘T`: since `∂̄Φ̃h = d_φℱ(h)`
//! the identity `d_φℱ(Qf) = f` is exact in the discrete spaces.
//!
//! When `A(φ) ≠ 0` the real-linear substitution `N(h) = h + A(φ)h̄` (applied
//! as its projection `N_d` onto the unknown space) is used, `Φ` is built for
//! `d_φℱ∘N_d⁻¹` and `Q = N_d⁻¹∘Φ̃⁻¹∘T`.

use crate::basis::GridField;
use crate::dbar::{linearize, max_entry, LinearizedOp};
use crate::error::{Error, Result};
use crate::modal::{Discretization, ModalMap, OpKind};
use crate::norms::{self, Region};
use crate::scalar::{czero, Scalar, C};
use crate::structure::{admissibility_det, CMat, StructureSpec};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default kernel threshold relative to `σ_max`.
pub const KERNEL_THRESHOLD: f64 = 1e-6;
/// Largest `sup |A(φ)|` still treated as `A(φ) = 0`.
const P_ZERO: f64 = 1e-14;
const MAX_CONDITION: f64 = 1e6;

fn conj_mat<S: Scalar>(m: &CMat<S>) -> CMat<S> {
    m.map(|c| c.conj())
}

/// Pointwise coefficients of the substituted operator at one point.
#[derive(Clone, Debug)]
pub struct PointFields<S: Scalar> {
    pub a: CMat<S>,
    pub b: CMat<S>,
    pub k: CMat<S>,
    pub k0: CMat<S>,
    pub k1: CMat<S>,
    pub k2: CMat<S>,
    /// `B_ζ`, `B_ζ̄`.
    pub b_z: CMat<S>,
    pub b_zb: CMat<S>,
}

/// `A(φ)`, `B = (I − A(φ)conj(A(φ)))⁻¹` and the `K` matrices at `v = ψ`,
/// from the value and first derivatives of `φ` at one point.
pub fn point_fields<S: Scalar>(
    a: &StructureSpec<S>,
    u: &[C<S>],
    u_z: &[C<S>],
    u_zb: &[C<S>],
) -> Result<PointFields<S>> {
    let n = a.n();
    let p = a.eval(u)?;
    let (dz, dzb) = a.derivatives(u)?;
    // A(φ)_ζ and A(φ)_ζ̄ by the chain rule
    let mut p_z = CMat::zeros(n, n);
    let mut p_zb = CMat::zeros(n, n);
    for j in 0..n {
        p_z += &dz[j] * u_z[j] + &dzb[j] * u_zb[j].conj();
        p_zb += &dz[j] * u_zb[j] + &dzb[j] * u_z[j].conj();
    }
    let pc = conj_mat(&p);
    let id = CMat::<S>::identity(n, n);
    let b = (&id - &p * &pc)
        .try_inverse()
        .ok_or_else(|| Error::NotAStructure("I − A(φ)conj(A(φ)) is singular".into()))?;
    let bc = conj_mat(&b);
    let b_z = &b * (&p_z * &pc + &p * conj_mat(&p_zb)) * &b;
    let b_zb = &b * (&p_zb * &pc + &p * conj_mat(&p_z)) * &b;
    let k = &b - &p * conj_mat(&(&b * &p));
    let k0 = -(&b * &p) + &p * &bc;
    let k1 = &b_zb - &p * conj_mat(&b_z) * &pc - &p * &bc * conj_mat(&p_z);
    let k2 = -(&b_zb * &p) - &b * &p_zb + &p * conj_mat(&b_z);
    Ok(PointFields { a: p, b, k, k0, k1, k2, b_z, b_zb })
}

/// Fields of the substitution `N(u) = u + A(φ)ū` on the grid.
#[derive(Clone, Debug)]
pub struct SubstitutionData<S: Scalar> {
    pub a_phi: Vec<CMat<S>>,
    pub b: Vec<CMat<S>>,
    pub k: Vec<CMat<S>>,
    pub k0: Vec<CMat<S>>,
    pub k1: Vec<CMat<S>>,
    pub k2: Vec<CMat<S>>,
    /// `ψ = N(φ)` projected onto the unknown space.
    pub psi: ModalMap<S>,
    /// `max |K(ψ) − I|` and `max |K₀(ψ)|` over the grid.
    pub k_defect: S,
    pub k0_defect: S,
    /// Smallest `|det(I − A(φ)conj(A(φ)))|` over the grid.
    pub margin: S,
}

fn admissibility_along<S: Scalar>(
    a: &StructureSpec<S>,
    ug: &GridField<S>,
    p: &[CMat<S>],
) -> Result<S> {
    let mut worst = S::max_value().unwrap_or_else(|| S::lit(f64::MAX));
    let mut at = 0;
    for (idx, m) in p.iter().enumerate() {
        let v = admissibility_det(m);
        if v < worst {
            worst = v;
            at = idx;
        }
    }
    if worst < a.admissibility_margin() {
        return Err(Error::AdmissibilityViolation {
            margin: worst.as_f64(),
            required: a.admissibility_margin().as_f64(),
            point: ug.at(at).iter().map(|c| (c.re.as_f64(), c.im.as_f64())).collect(),
        });
    }
    Ok(worst)
}

/// Substitution fields along `φ`.
pub fn substitution<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
) -> Result<SubstitutionData<S>> {
    let ug = disc.synthesize(phi);
    let uz = disc.synthesize(&disc.d_z(phi));
    let uzb = disc.synthesize(&disc.d_bar(phi));
    let fields = (0..ug.num_nodes())
        .map(|i| point_fields(a, &ug.at(i), &uz.at(i), &uzb.at(i)))
        .collect::<Result<Vec<_>>>()?;
    let a_phi: Vec<CMat<S>> = fields.iter().map(|f| f.a.clone()).collect();
    let margin = admissibility_along(a, &ug, &a_phi)?;
    let n = a.n();
    let id = CMat::<S>::identity(n, n);
    let k_defect = max_entry(&fields.iter().map(|f| &f.k - &id).collect::<Vec<_>>());
    let k0_defect = max_entry(&fields.iter().map(|f| f.k0.clone()).collect::<Vec<_>>());
    let psi_field = n_field(&a_phi, &ug);
    let psi = disc.analyze(&psi_field, disc.u_space())?;
    Ok(SubstitutionData {
        b: fields.iter().map(|f| f.b.clone()).collect(),
        k: fields.iter().map(|f| f.k.clone()).collect(),
        k0: fields.iter().map(|f| f.k0.clone()).collect(),
        k1: fields.iter().map(|f| f.k1.clone()).collect(),
        k2: fields.iter().map(|f| f.k2.clone()).collect(),
        a_phi,
        psi,
        k_defect,
        k0_defect,
        margin,
    })
}

/// Pointwise `N(u) = u + A(φ)ū`.
pub fn n_field<S: Scalar>(a_phi: &[CMat<S>], u: &GridField<S>) -> GridField<S> {
    let n = u.n();
    let mut out = u.clone();
    for (idx, m) in a_phi.iter().enumerate() {
        for i in 0..n {
            let mut acc = u.get(i, idx);
            for k in 0..n {
                acc += m[(i, k)] * u.get(k, idx).conj();
            }
            out.set(i, idx, acc);
        }
    }
    out
}

/// Pointwise `N⁻¹(v) = B(v − A(φ)v̄)`.
pub fn n_inverse_field<S: Scalar>(a_phi: &[CMat<S>], b: &[CMat<S>], v: &GridField<S>) -> GridField<S> {
    let n = v.n();
    let mut out = v.clone();
    for (idx, (m, bm)) in a_phi.iter().zip(b).enumerate() {
        let w: Vec<C<S>> = (0..n)
            .map(|i| {
                let mut acc = v.get(i, idx);
                for k in 0..n {
                    acc -= m[(i, k)] * v.get(k, idx).conj();
                }
                acc
            })
            .collect();
        for i in 0..n {
            let mut acc = czero::<S>();
            for k in 0..n {
                acc += bm[(i, k)] * w[k];
            }
            out.set(i, idx, acc);
        }
    }
    out
}

/// Real matrix of `N_d(h) = Π(h + A(φ)h̄)` on the unknown space.
pub fn assemble_n<S: Scalar>(disc: &Discretization<S>, a_phi: &[CMat<S>]) -> DMatrix<S> {
    let n = a_phi.first().map_or(0, |m| m.nrows());
    let space = disc.u_space();
    let dim = space.dim();
    let nodes = disc.spec().num_nodes();
    let samples: Vec<GridField<S>> = (0..dim)
        .into_par_iter()
        .map(|q| disc.synthesize(&ModalMap::real_basis(1, &space, 2 * q)))
        .collect();
    let cols: Vec<Vec<S>> = (0..2 * n * dim)
        .into_par_iter()
        .map(|col| {
            let (a, q, imag) = (col / (2 * dim), (col / 2) % dim, col % 2 == 1);
            let c = if imag { C::new(S::zero(), S::one()) } else { C::new(S::one(), S::zero()) };
            let mut field = GridField::zeros(n, nodes);
            for idx in 0..nodes {
                let h = samples[q].get(0, idx) * c;
                for i in 0..n {
                    field.set(i, idx, a_phi[idx][(i, a)] * h.conj());
                }
            }
            let mut v = disc.analyze(&field, space.clone()).expect("fits grid").to_real();
            v[col] += S::one();
            v.as_slice().to_vec()
        })
        .collect();
    let mut out = DMatrix::zeros(2 * n * dim, 2 * n * dim);
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).copy_from_slice(c);
    }
    out
}

/// `Φ = I + T∘Z` for an operator with `P = 0`.
pub fn assemble_phi<S: Scalar>(disc: &Discretization<S>, lin: &LinearizedOp<S>) -> Result<DMatrix<S>> {
    if lin.p_max() > S::lit(P_ZERO) {
        return Err(Error::Precondition(format!(
            "A(φ) does not vanish (max |A(φ)| = {:.3e}); use the substitution path",
            lin.p_max().as_f64()
        )));
    }
    Ok(crate::dbar::assemble_dg(disc, lin))
}

/// `Φ_ψ = (I − T∂̄) + T∘L_φ∘N_d⁻¹`, the integral operator of `d_φℱ∘N_d⁻¹`.
fn assemble_phi_substituted<S: Scalar>(
    disc: &Discretization<S>,
    lin: &LinearizedOp<S>,
    n_mat: &DMatrix<S>,
) -> Result<DMatrix<S>> {
    let n = lin.n();
    let t = disc.op(OpKind::CauchyGreen, &disc.f_space()).real_dense(n);
    let dbar = disc.op(OpKind::DBar, &disc.u_space()).real_dense(n);
    let tl = &t * lin.assemble(disc);
    let dim = tl.nrows();
    // X = TL·N⁻¹  ⇔  Nᵀ Xᵀ = (TL)ᵀ
    let xt = n_mat
        .transpose()
        .lu()
        .solve(&tl.transpose())
        .ok_or_else(|| Error::Discretization("substitution matrix is singular".into()))?;
    Ok(DMatrix::identity(dim, dim) - &t * dbar + xt.transpose())
}

/// Singular values of `m`, largest first.
pub fn singular_values<S: Scalar>(m: &DMatrix<S>) -> Vec<S> {
    let mut s: Vec<S> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    s
}

/// Full SVD with singular triplets sorted by decreasing singular value.
fn sorted_svd<S: Scalar>(m: &DMatrix<S>) -> (Vec<S>, DMatrix<S>, DMatrix<S>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite"));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    (s, u, v)
}

/// Finite-rank stabilizer `L = scale·G·Vᵀ`.
#[derive(Clone, Debug)]
pub struct Stabilizer<S: Scalar> {
    /// Number of singular values below the threshold.
    pub rank: usize,
    /// Real layout indices of the holomorphic unit vectors forming `G`.
    pub generators: Vec<usize>,
    pub scale: S,
    /// Right singular vectors spanning the numerical kernel (columns).
    pub kernel: DMatrix<S>,
}

impl<S: Scalar> Stabilizer<S> {
    /// `L` as a dense matrix of size `dim × dim`.
    pub fn dense(&self, dim: usize) -> DMatrix<S> {
        let mut out = DMatrix::zeros(dim, dim);
        for (i, &g) in self.generators.iter().enumerate() {
            let row = self.kernel.column(i).transpose() * self.scale;
            out.row_mut(g).copy_from(&row);
        }
        out
    }
}

/// Result of [`stabilize`].
#[derive(Clone, Debug)]
pub struct Stabilized<S: Scalar> {
    pub matrix: DMatrix<S>,
    pub stabilizer: Stabilizer<S>,
    /// Singular values of the unstabilized matrix, largest first.
    pub spectrum: Vec<S>,
    /// Condition number estimate of the stabilized matrix.
    pub condition: S,
}

/// `σ_max/σ_min` from power and inverse power iteration.
fn condition_estimate<S: Scalar>(m: &DMatrix<S>, lu: &LU<S, Dyn, Dyn>, smax: S) -> Option<S> {
    let lut = m.transpose().lu();
    let dim = m.nrows();
    let mut x = DVector::from_fn(dim, |i, _| S::one() + S::lit(0.37) * S::uz(i % 7));
    x /= x.norm();
    let mut est = S::zero();
    for _ in 0..60 {
        // (MᵀM)⁻¹ x = M⁻¹ M⁻ᵀ x
        let y = lu.solve(&lut.solve(&x)?)?;
        let ny = y.norm();
        if !ny.is_finite() {
            return None;
        }
        let prev = est;
        est = ny;
        x = y / ny;
        if (est - prev).abs() <= S::lit(1e-6) * est {
            break;
        }
    }
    // est ≈ 1/σ_min²
    Some(smax * est.sqrt())
}

/// Adds the holomorphic finite-rank part: `r` singular values of `phi`
/// below `threshold·σ_max` are lifted by `L = 1e−2·σ_max·G·Vᵀ`, where `V`
/// spans the numerical kernel and the columns of `G` are unit vectors taken
/// greedily from `candidates` (real layout indices, lowest degree first)
/// whose images are independent modulo the range of `phi`.
pub fn stabilize<S: Scalar>(phi: &DMatrix<S>, threshold: S, candidates: &[usize]) -> Result<Stabilized<S>> {
    let dim = phi.nrows();
    if phi.ncols() != dim {
        return Err(Error::InvalidInput("stabilize needs a square matrix".into()));
    }
    let spectrum = singular_values(phi);
    let smax = spectrum.first().copied().unwrap_or(S::zero());
    if smax == S::zero() {
        return Err(Error::Stabilization("zero operator".into()));
    }
    let rank = spectrum.iter().filter(|&&s| s < threshold * smax).count();
    let scale = S::lit(1e-2) * smax;
    let (matrix, stabilizer) = if rank == 0 {
        let stab = Stabilizer { rank, generators: vec![], scale, kernel: DMatrix::zeros(dim, 0) };
        (phi.clone(), stab)
    } else {
        let (_, u, v) = sorted_svd(phi);
        let left = u.columns(dim - rank, rank).into_owned();
        let kernel = v.columns(dim - rank, rank).into_owned();
        let mut generators = Vec::with_capacity(rank);
        let mut basis: Vec<DVector<S>> = Vec::with_capacity(rank);
        for &g in candidates {
            if generators.len() == rank {
                break;
            }
            let mut w: DVector<S> = left.row(g).transpose();
            for q in &basis {
                let c = q.dot(&w);
                w -= q * c;
            }
            let nw = w.norm();
            if nw > S::lit(1e-2) {
                basis.push(w / nw);
                generators.push(g);
            }
        }
        if generators.len() < rank {
            return Err(Error::Stabilization(format!(
                "only {} of {} kernel directions reachable by holomorphic generators",
                generators.len(),
                rank
            )));
        }
        let stab = Stabilizer { rank, generators, scale, kernel };
        (phi + stab.dense(dim), stab)
    };
    let lu = matrix.clone().lu();
    let top = if rank == 0 { smax } else { smax + scale };
    let condition = condition_estimate(&matrix, &lu, top)
        .ok_or_else(|| Error::Stabilization("stabilized operator is singular".into()))?;
    if !(condition < S::lit(MAX_CONDITION)) {
        return Err(Error::Stabilization(format!("condition number {:.3e} after stabilization", condition.as_f64())));
    }
    Ok(Stabilized { matrix, stabilizer, spectrum, condition })
}

/// Real layout indices of holomorphic basis elements, lowest degree first.
pub fn holomorphic_candidates<S: Scalar>(disc: &Discretization<S>, n: usize) -> Vec<usize> {
    let space = disc.u_space();
    let dim = space.dim();
    let mut out = Vec::new();
    for m in 0..=space.max_mode() {
        let off = space.offset(m);
        for a in 0..n {
            out.push(2 * (a * dim + off));
            out.push(2 * (a * dim + off) + 1);
        }
    }
    out
}

/// When to take the substitution path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SubstitutionMode {
    /// Only when `A(φ)` does not vanish on the grid.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Clone, Debug)]
pub struct RightInverseOptions<S: Scalar> {
    pub threshold: S,
    pub mode: SubstitutionMode,
}

impl<S: Scalar> Default for RightInverseOptions<S> {
    fn default() -> Self {
        Self { threshold: S::lit(KERNEL_THRESHOLD), mode: SubstitutionMode::Auto }
    }
}

/// Factorized `Q_φ`.
pub struct RightInverse<'a, S: Scalar> {
    disc: &'a Discretization<S>,
    n: usize,
    lin: LinearizedOp<S>,
    phi_lu: LU<S, Dyn, Dyn>,
    n_lu: Option<LU<S, Dyn, Dyn>>,
    pub stabilizer: Stabilizer<S>,
    /// Singular values of `Φ` (or `Φ_ψ`), largest first.
    pub spectrum: Vec<S>,
    pub condition: S,
    pub substitution: Option<SubstitutionData<S>>,
    pub norm_estimate: Option<S>,
}

impl<S: Scalar> std::fmt::Debug for RightInverse<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RightInverse")
            .field("n", &self.n)
            .field("rank", &self.stabilizer.rank)
            .field("condition", &self.condition)
            .field("uses_substitution", &self.uses_substitution())
            .finish()
    }
}

/// Builds `Q_φ` for `d_φℱ`.
pub fn right_inverse<'a, S: Scalar>(
    disc: &'a Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
    opts: &RightInverseOptions<S>,
) -> Result<RightInverse<'a, S>> {
    let lin = linearize(disc, a, phi)?;
    let n = a.n();
    let substitute = match opts.mode {
        SubstitutionMode::Auto => lin.p_max() > S::lit(P_ZERO),
        SubstitutionMode::Always => true,
        SubstitutionMode::Never => false,
    };
    let (phi_mat, n_lu, sub) = if substitute {
        let sub = substitution(disc, a, phi)?;
        let n_mat = assemble_n(disc, &sub.a_phi);
        let m = assemble_phi_substituted(disc, &lin, &n_mat)?;
        (m, Some(n_mat.lu()), Some(sub))
    } else {
        (assemble_phi(disc, &lin)?, None, None)
    };
    let st = stabilize(&phi_mat, opts.threshold, &holomorphic_candidates(disc, n))?;
    Ok(RightInverse {
        disc,
        n,
        lin,
        phi_lu: st.matrix.lu(),
        n_lu,
        stabilizer: st.stabilizer,
        spectrum: st.spectrum,
        condition: st.condition,
        substitution: sub,
        norm_estimate: None,
    })
}

impl<'a, S: Scalar> RightInverse<'a, S> {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn discretization(&self) -> &'a Discretization<S> {
        self.disc
    }
    pub fn linearization(&self) -> &LinearizedOp<S> {
        &self.lin
    }
    pub fn uses_substitution(&self) -> bool {
        self.n_lu.is_some()
    }

    /// `Qf` for `f` in the residual space.
    pub fn apply(&self, f: &ModalMap<S>) -> ModalMap<S> {
        let tf = self.disc.cauchy_green(f).to_real();
        let mut x = self.phi_lu.solve(&tf).expect("factorized operator is invertible");
        if let Some(lu) = &self.n_lu {
            x = lu.solve(&x).expect("substitution is invertible");
        }
        ModalMap::from_real(self.n, self.disc.u_space(), x.as_slice())
    }

    /// `‖d_φℱ(Qf) − f‖_{L^p} / ‖f‖_{L^p}`.
    pub fn identity_defect(&self, f: &ModalMap<S>, p: S) -> Result<S> {
        let back = self.lin.apply(self.disc, &self.apply(f));
        let num = norms::lp(self.disc, &back.sub(f), p, Region::Disc)?;
        let den = norms::lp(self.disc, f, p, Region::Disc)?;
        Ok(num / den)
    }

    /// Dense real matrix of `Q` from the residual to the unknown layout.
    pub fn dense(&self) -> DMatrix<S> {
        let t = self.disc.op(OpKind::CauchyGreen, &self.disc.f_space()).real_dense(self.n);
        let mut x = self.phi_lu.solve(&t).expect("invertible");
        if let Some(lu) = &self.n_lu {
            x = lu.solve(&x).expect("invertible");
        }
        x
    }

    /// Stores the [`op_norm`] estimate.
    pub fn with_norm_estimate(mut self, p: S, probes: usize, seed: u64) -> Result<Self> {
        self.norm_estimate = Some(op_norm(&self, p, probes, seed)?.value);
        Ok(self)
    }
}

/// Random map in the residual space with standard normal-ish coefficients.
pub fn random_residual<S: Scalar>(disc: &Discretization<S>, n: usize, rng: &mut impl Rng) -> ModalMap<S> {
    let space = disc.f_space();
    let coeffs = (0..n * space.dim())
        .map(|_| C::new(S::lit(rng.gen_range(-1.0..1.0)), S::lit(rng.gen_range(-1.0..1.0))))
        .collect();
    ModalMap::from_coeffs(n, space, coeffs)
}

/// Kernel of `d_φ𝒢`.
#[derive(Clone, Debug)]
pub struct KernelReport<S: Scalar> {
    pub dim: usize,
    pub threshold: S,
    /// Singular values, largest first.
    pub spectrum: Vec<S>,
    /// `(φ, J)` is regular when the numerical kernel is trivial.
    pub regular: bool,
}

/// Numerical kernel dimension of the assembled `d_φ𝒢 = I + T∘Z`.
pub fn kernel_dim<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
    threshold: S,
) -> Result<KernelReport<S>> {
    let lin = linearize(disc, a, phi)?;
    let spectrum = singular_values(&crate::dbar::assemble_dg(disc, &lin));
    Ok(kernel_from_spectrum(spectrum, threshold))
}

fn kernel_from_spectrum<S: Scalar>(spectrum: Vec<S>, threshold: S) -> KernelReport<S> {
    let smax = spectrum.first().copied().unwrap_or(S::zero());
    let dim = spectrum.iter().filter(|&&s| s < threshold * smax).count();
    KernelReport { dim, threshold, spectrum, regular: dim == 0 }
}

/// Kernel report together with the kernel vectors of `d_φ𝒢`.
pub fn kernel_vectors<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
    threshold: S,
) -> Result<(KernelReport<S>, Vec<ModalMap<S>>)> {
    let lin = linearize(disc, a, phi)?;
    let (spectrum, _, v) = sorted_svd(&crate::dbar::assemble_dg(disc, &lin));
    let rep = kernel_from_spectrum(spectrum, threshold);
    let dim = v.ncols();
    let vecs = (dim - rep.dim..dim)
        .map(|c| ModalMap::from_real(a.n(), disc.u_space(), v.column(c).as_slice()))
        .collect();
    Ok((rep, vecs))
}

/// Estimate of `‖Q‖` as an operator `L^p → W^{1,p}`.
#[derive(Clone, Debug)]
pub struct OpNormEstimate<S: Scalar> {
    pub value: S,
    /// Largest singular value of `[Q; ∂ζQ; ∂ζ̄Q]` in the `L²` norms.
    pub sigma_max_l2: S,
}

/// Probe-and-ascent lower bound for `‖Q‖_{L^p → W^{1,p}}`.
pub fn op_norm<S: Scalar>(q: &RightInverse<'_, S>, p: S, probes: usize, seed: u64) -> Result<OpNormEstimate<S>> {
    let disc = q.disc;
    let n = q.n;
    let qd = q.dense();
    let dz = disc.op(OpKind::Dz, &disc.u_space()).real_dense(n);
    let db = disc.op(OpKind::DBar, &disc.u_space()).real_dense(n);
    let stacked = {
        let (r, c) = (qd.nrows(), qd.ncols());
        let mut s = DMatrix::zeros(r + dz.nrows() + db.nrows(), c);
        s.rows_mut(0, r).copy_from(&qd);
        s.rows_mut(r, dz.nrows()).copy_from(&(&dz * &qd));
        s.rows_mut(r + dz.nrows(), db.nrows()).copy_from(&(&db * &qd));
        s
    };
    let gram = stacked.transpose() * &stacked;
    let fdim = qd.ncols();
    let mut x = DVector::from_fn(fdim, |i, _| S::one() + S::lit(0.1) * S::uz(i % 5));
    x /= x.norm();
    let mut sigma2 = S::zero();
    for _ in 0..500 {
        let y = &gram * &x;
        let ny = y.norm();
        let prev = sigma2;
        sigma2 = ny;
        x = y / ny;
        if (sigma2 - prev).abs() <= S::lit(1e-12) * sigma2 {
            break;
        }
    }
    let sigma_max_l2 = sigma2.sqrt();

    let fspace = disc.f_space();
    let ratio = |v: &DVector<S>| -> Result<S> {
        let f = ModalMap::from_real(n, fspace.clone(), v.as_slice());
        let u = ModalMap::from_real(n, disc.u_space(), (&qd * v).as_slice());
        Ok(norms::w1p(disc, &u, p, Region::Disc)? / norms::lp(disc, &f, p, Region::Disc)?)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = x.clone();
    let mut best_val = ratio(&x)?;
    for _ in 0..probes {
        let v = random_residual(disc, n, &mut rng).to_real();
        let r = ratio(&v)?;
        if r > best_val {
            best_val = r;
            best = v;
        }
    }
    // hill climbing with shrinking steps
    let mut step = S::lit(0.3);
    for _ in 0..6 {
        let mut improved = false;
        for _ in 0..8 {
            let dir = random_residual(disc, n, &mut rng).to_real();
            let cand = &best + dir * (step * best.norm() / S::lit((2 * fdim) as f64).sqrt());
            let r = ratio(&cand)?;
            if r > best_val {
                best_val = r;
                best = cand;
                improved = true;
            }
        }
        if !improved {
            step *= S::lit(0.5);
        }
    }
    Ok(OpNormEstimate { value: best_val, sigma_max_l2 })
}
