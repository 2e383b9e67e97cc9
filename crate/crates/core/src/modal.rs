//! Orthonormal disc basis and the spectral transforms built on it.
//!
//! The bi-monomial space of bidegree `(dz, dzb)` splits by Fourier mode
//! `m = j - k`. On mode `m` every element is `e_m(ζ) q(|ζ|²)` with
//! `e_m = ζ^m` (m ≥ 0) or `ζ̄^{-m}` (m < 0) and `q` a polynomial of degree
//! `N_m = min(dz - max(m,0), dzb - max(-m,0))`. Expanding `q` in polynomials
//! orthonormal for `π s^{|m|} ds` on `[0, 1]` gives an `L²(Δ)`-orthonormal
//! basis of the same space. Its coefficients are recovered from grid samples
//! by quadrature alone, and ∂ζ, ∂ζ̄ and the Cauchy–Green operator act on it by
//! small real blocks per mode.

use crate::basis::{DiscMap, DiscretizationSpec, GridField};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;
use crate::scalar::{cabs, cpowi, creal, czero, Scalar, C};
use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Orthonormal polynomials for the weight `π s^α` on `[0, 1]` (shifted
/// Jacobi `P^{(0,α)}(2s - 1)`), by their three-term recurrence
/// `b[n+1] φ_{n+1} = (s - a[n]) φ_n - b[n] φ_{n-1}`.
#[derive(Clone, Debug)]
pub(crate) struct RadialFamily<S: Scalar> {
    a: Vec<S>,
    b: Vec<S>,
    p0: S,
}

impl<S: Scalar> RadialFamily<S> {
    pub(crate) fn new(alpha: usize, nmax: usize) -> Self {
        let al = S::uz(alpha);
        let one = S::one();
        let two = S::lit(2.0);
        let four = S::lit(4.0);
        let mut a = Vec::with_capacity(nmax + 1);
        let mut b = Vec::with_capacity(nmax + 2);
        b.push(S::zero());
        for n in 0..=nmax {
            let nf = S::uz(n);
            // monic Jacobi coefficients on [-1, 1] with (a, b) = (0, α)
            let an = if n == 0 {
                al / (al + two)
            } else {
                al * al / ((two * nf + al) * (two * nf + al + two))
            };
            a.push((one + an) / two);
            let m = nf + one;
            let t = two * m + al;
            let bn = four * m * m * (m + al) * (m + al) / (t * t * (t + one) * (t - one));
            b.push((bn / four).sqrt());
        }
        let mass = S::pi() / (al + one);
        Self {
            a,
            b,
            p0: one / mass.sqrt(),
        }
    }

    pub(crate) fn max_degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Values and first derivatives of `φ_0..=φ_n` at `s`.
    pub(crate) fn eval(&self, n: usize, s: S) -> (Vec<S>, Vec<S>) {
        assert!(n <= self.max_degree() + 1);
        let mut p = Vec::with_capacity(n + 1);
        let mut d = Vec::with_capacity(n + 1);
        p.push(self.p0);
        d.push(S::zero());
        for l in 0..n {
            let (pp, dp) = if l > 0 { (p[l - 1], d[l - 1]) } else { (S::zero(), S::zero()) };
            let x = s - self.a[l];
            p.push((x * p[l] - self.b[l] * pp) / self.b[l + 1]);
            d.push((p[l] + x * d[l] - self.b[l] * dp) / self.b[l + 1]);
        }
        (p, d)
    }

    /// Power-basis coefficients `φ_l(s) = Σ_t P[l][t] s^t` for `l ≤ n`.
    pub(crate) fn power_coefficients(&self, n: usize) -> Vec<Vec<S>> {
        let mut out: Vec<Vec<S>> = vec![vec![self.p0]];
        for l in 0..n {
            let mut next = vec![S::zero(); l + 2];
            for (t, c) in out[l].iter().enumerate() {
                next[t + 1] += *c;
                next[t] -= self.a[l] * *c;
            }
            if l > 0 {
                for (t, c) in out[l - 1].iter().enumerate() {
                    next[t] -= self.b[l] * *c;
                }
            }
            next.iter_mut().for_each(|c| *c /= self.b[l + 1]);
            out.push(next);
        }
        out
    }
}

/// Coefficient layout of the bidegree-`(dz, dzb)` space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModalSpace {
    dz: usize,
    dzb: usize,
    offsets: Vec<usize>,
    dim: usize,
}

impl ModalSpace {
    pub fn new(dz: usize, dzb: usize) -> Self {
        let mut offsets = Vec::with_capacity(dz + dzb + 1);
        let mut dim = 0;
        for m in -(dzb as i64)..=dz as i64 {
            offsets.push(dim);
            dim += Self::radial_degree_of(dz, dzb, m) + 1;
        }
        Self {
            dz,
            dzb,
            offsets,
            dim,
        }
    }

    fn radial_degree_of(dz: usize, dzb: usize, m: i64) -> usize {
        let p = m.max(0) as usize;
        let q = (-m).max(0) as usize;
        (dz - p).min(dzb - q)
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.dz, self.dzb)
    }
    /// Number of complex coefficients per component.
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn min_mode(&self) -> i64 {
        -(self.dzb as i64)
    }
    pub fn max_mode(&self) -> i64 {
        self.dz as i64
    }
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        self.min_mode()..=self.max_mode()
    }
    pub fn has_mode(&self, m: i64) -> bool {
        m >= self.min_mode() && m <= self.max_mode()
    }
    /// Radial degree `N_m` of mode `m`.
    pub fn radial_degree(&self, m: i64) -> usize {
        Self::radial_degree_of(self.dz, self.dzb, m)
    }
    pub fn offset(&self, m: i64) -> usize {
        self.offsets[(m - self.min_mode()) as usize]
    }
    /// `(mode, radial index)` of a flat coefficient index.
    pub fn locate(&self, idx: usize) -> (i64, usize) {
        let pos = self.offsets.partition_point(|o| *o <= idx) - 1;
        (self.min_mode() + pos as i64, idx - self.offsets[pos])
    }
    /// Flat indices of the holomorphic basis elements `ζ^m φ_{m,0}`, lowest
    /// degree first.
    pub fn holomorphic_indices(&self) -> Vec<usize> {
        (0..=self.dz as i64).map(|m| self.offset(m)).collect()
    }
    pub fn conj(&self) -> Self {
        Self::new(self.dzb, self.dz)
    }
}

/// A map `Δ → ℂⁿ` in the orthonormal disc basis, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalMap<S: Scalar> {
    n: usize,
    space: ModalSpace,
    coeffs: Vec<C<S>>,
}

impl<S: Scalar> ModalMap<S> {
    pub fn zeros(n: usize, space: ModalSpace) -> Self {
        let coeffs = vec![czero(); n * space.dim()];
        Self { n, space, coeffs }
    }

    pub fn from_coeffs(n: usize, space: ModalSpace, coeffs: Vec<C<S>>) -> Self {
        assert_eq!(coeffs.len(), n * space.dim());
        Self { n, space, coeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn space(&self) -> &ModalSpace {
        &self.space
    }
    pub fn coeffs(&self) -> &[C<S>] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [C<S>] {
        &mut self.coeffs
    }
    #[inline]
    pub fn get(&self, a: usize, m: i64, l: usize) -> C<S> {
        self.coeffs[a * self.space.dim() + self.space.offset(m) + l]
    }
    #[inline]
    pub fn set(&mut self, a: usize, m: i64, l: usize, v: C<S>) {
        let i = a * self.space.dim() + self.space.offset(m) + l;
        self.coeffs[i] = v;
    }
    pub fn component(&self, a: usize) -> ModalMap<S> {
        let dim = self.space.dim();
        Self {
            n: 1,
            space: self.space.clone(),
            coeffs: self.coeffs[a * dim..(a + 1) * dim].to_vec(),
        }
    }

    /// Re-expresses in another space: shared coefficients are kept, the rest
    /// dropped (an `L²` projection when shrinking).
    pub fn resized(&self, space: &ModalSpace) -> Self {
        let mut out = Self::zeros(self.n, space.clone());
        for a in 0..self.n {
            for m in space.modes() {
                if !self.space.has_mode(m) {
                    continue;
                }
                let keep = space.radial_degree(m).min(self.space.radial_degree(m));
                for l in 0..=keep {
                    out.set(a, m, l, self.get(a, m, l));
                }
            }
        }
        out
    }

    fn zip(&self, other: &Self, f: impl Fn(C<S>, C<S>) -> C<S>) -> Self {
        assert_eq!(self.n, other.n);
        assert_eq!(self.space, other.space, "modal spaces differ");
        Self {
            n: self.n,
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }
    pub fn scale(&self, s: C<S>) -> Self {
        Self {
            n: self.n,
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| *c * s).collect(),
        }
    }
    pub fn axpy(&mut self, s: C<S>, x: &Self) {
        assert_eq!(self.space, x.space);
        for (y, x) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += *x * s;
        }
    }

    /// Pointwise conjugate; the bidegree swaps.
    pub fn conj(&self) -> Self {
        let space = self.space.conj();
        let mut out = Self::zeros(self.n, space);
        for a in 0..self.n {
            for m in self.space.modes() {
                for l in 0..=self.space.radial_degree(m) {
                    out.set(a, -m, l, self.get(a, m, l).conj());
                }
            }
        }
        out
    }

    /// `L²(Δ)` norm (exact: the basis is orthonormal).
    pub fn l2_norm(&self) -> S {
        self.coeffs.iter().fold(S::zero(), |acc, c| acc + c.norm_sqr()).sqrt()
    }

    pub fn max_abs_coeff(&self) -> S {
        self.coeffs.iter().map(|c| cabs(*c)).fold(S::zero(), |m, v| if v > m { v } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Real coordinates `(Re c, Im c)` interleaved, component-major.
    pub fn to_real(&self) -> DVector<S> {
        let mut v = DVector::zeros(2 * self.coeffs.len());
        for (i, c) in self.coeffs.iter().enumerate() {
            v[2 * i] = c.re;
            v[2 * i + 1] = c.im;
        }
        v
    }

    pub fn from_real(n: usize, space: ModalSpace, v: &[S]) -> Self {
        assert_eq!(v.len(), 2 * n * space.dim());
        let coeffs = v.chunks(2).map(|p| C::new(p[0], p[1])).collect();
        Self { n, space, coeffs }
    }

    /// Real dimension `2 n dim`.
    pub fn real_dim(&self) -> usize {
        2 * self.coeffs.len()
    }

    /// Unit real basis vector number `k` of the real layout.
    pub fn real_basis(n: usize, space: &ModalSpace, k: usize) -> Self {
        let mut out = Self::zeros(n, space.clone());
        out.coeffs[k / 2] = if k % 2 == 0 {
            creal(S::one())
        } else {
            C::new(S::zero(), S::one())
        };
        out
    }
}

/// Which modal operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpKind {
    DBar,
    Dz,
    CauchyGreen,
}

/// Real block operator mapping mode `m` of one space to mode `m + shift` of
/// another.
#[derive(Clone, Debug)]
pub struct ModeOp<S: Scalar> {
    from: ModalSpace,
    to: ModalSpace,
    shift: i64,
    blocks: Vec<Option<DMatrix<S>>>,
}

impl<S: Scalar> ModeOp<S> {
    pub fn from_space(&self) -> &ModalSpace {
        &self.from
    }
    pub fn to_space(&self) -> &ModalSpace {
        &self.to
    }

    pub fn apply(&self, x: &ModalMap<S>) -> ModalMap<S> {
        assert_eq!(x.space, self.from, "operator applied to the wrong space");
        let mut out = ModalMap::zeros(x.n, self.to.clone());
        let (dfrom, dto) = (self.from.dim(), self.to.dim());
        for a in 0..x.n {
            for (k, m) in self.from.modes().enumerate() {
                let Some(b) = &self.blocks[k] else { continue };
                let src = a * dfrom + self.from.offset(m);
                let dst = a * dto + self.to.offset(m + self.shift);
                for r in 0..b.nrows() {
                    let mut acc = czero();
                    for c in 0..b.ncols() {
                        acc += x.coeffs[src + c] * b[(r, c)];
                    }
                    out.coeffs[dst + r] = acc;
                }
            }
        }
        out
    }

    /// The operator as a dense real matrix on `n` components in the real
    /// layout of [`ModalMap::to_real`] (blocks are real, so real and imaginary
    /// parts do not mix).
    pub fn real_dense(&self, n: usize) -> DMatrix<S> {
        let one = self.dense();
        let (r, c) = (one.nrows(), one.ncols());
        let mut out = DMatrix::zeros(2 * n * r, 2 * n * c);
        for a in 0..n {
            for i in 0..r {
                for j in 0..c {
                    let v = one[(i, j)];
                    if v != S::zero() {
                        out[(2 * (a * r + i), 2 * (a * c + j))] = v;
                        out[(2 * (a * r + i) + 1, 2 * (a * c + j) + 1)] = v;
                    }
                }
            }
        }
        out
    }

    /// The operator as a dense complex-coefficient matrix on one component.
    pub fn dense(&self) -> DMatrix<S> {
        let mut out = DMatrix::zeros(self.to.dim(), self.from.dim());
        for (k, m) in self.from.modes().enumerate() {
            let Some(b) = &self.blocks[k] else { continue };
            let (r0, c0) = (self.to.offset(m + self.shift), self.from.offset(m));
            out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
        }
        out
    }
}

/// Grid, transforms and cached operators for one degree.
pub struct Discretization<S: Scalar> {
    spec: DiscretizationSpec<S>,
    max_alpha: usize,
    max_radial: usize,
    families: Vec<RadialFamily<S>>,
    /// `φ_{α,l}(s_i) r_i^α` at `[α][l * Nr + i]`.
    grid_basis: Vec<Vec<S>>,
    fft_fwd: Arc<dyn Fft<S>>,
    fft_inv: Arc<dyn Fft<S>>,
    ops: Mutex<BTreeMap<(OpKind, usize, usize), Arc<ModeOp<S>>>>,
}

impl<S: Scalar> std::fmt::Debug for Discretization<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl<S: Scalar> Discretization<S> {
    pub fn new(spec: DiscretizationSpec<S>) -> Self {
        let max_alpha = spec.degree() + 2;
        let max_radial = spec.degree() + 2;
        let families: Vec<RadialFamily<S>> =
            (0..=max_alpha).map(|a| RadialFamily::new(a, max_radial + 2)).collect();
        let nr = spec.radial_nodes();
        let grid_basis = families
            .iter()
            .enumerate()
            .map(|(alpha, fam)| {
                let mut v = vec![S::zero(); (max_radial + 1) * nr];
                for i in 0..nr {
                    let (p, _) = fam.eval(max_radial, spec.s_nodes()[i]);
                    let ra = spec.r_nodes()[i].powi(alpha as i32);
                    for l in 0..=max_radial {
                        v[l * nr + i] = p[l] * ra;
                    }
                }
                v
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(spec.angular_nodes());
        let fft_inv = planner.plan_fft_inverse(spec.angular_nodes());
        Self {
            spec,
            max_alpha,
            max_radial,
            families,
            grid_basis,
            fft_fwd,
            fft_inv,
            ops: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_degree(d: usize) -> Self {
        Self::new(DiscretizationSpec::with_degree(d))
    }

    pub fn spec(&self) -> &DiscretizationSpec<S> {
        &self.spec
    }
    pub fn degree(&self) -> usize {
        self.spec.degree()
    }
    /// Unknown space `(d, d)`.
    pub fn u_space(&self) -> ModalSpace {
        ModalSpace::new(self.degree(), self.degree())
    }
    /// Residual space `(d, d - 1)`, the image of ∂ζ̄ on the unknown space.
    pub fn f_space(&self) -> ModalSpace {
        let d = self.degree();
        ModalSpace::new(d, d.saturating_sub(1))
    }

    fn check_space(&self, space: &ModalSpace) -> Result<()> {
        let (dz, dzb) = space.bidegree();
        let nt = self.spec.angular_nodes() as i64;
        if dz.max(dzb) > self.max_alpha || dz.min(dzb) > self.max_radial {
            return Err(Error::Discretization(format!(
                "space of bidegree ({dz},{dzb}) exceeds the grid's degree {}",
                self.degree()
            )));
        }
        if (dz + dzb) as i64 >= nt {
            return Err(Error::Discretization(format!(
                "{} angular nodes cannot resolve modes {}..={}",
                nt, -(dzb as i64), dz
            )));
        }
        Ok(())
    }

    #[inline]
    fn basis_at(&self, alpha: usize, l: usize, ring: usize) -> S {
        self.grid_basis[alpha][l * self.spec.radial_nodes() + ring]
    }

    fn mode_slot(&self, m: i64) -> usize {
        let nt = self.spec.angular_nodes() as i64;
        m.rem_euclid(nt) as usize
    }

    /// Samples at every grid node.
    pub fn synthesize(&self, x: &ModalMap<S>) -> GridField<S> {
        self.check_space(&x.space).expect("space fits the grid");
        let (nr, nt) = (self.spec.radial_nodes(), self.spec.angular_nodes());
        let mut out = GridField::zeros(x.n, nr * nt);
        let mut buf = vec![czero(); nt];
        let mut scratch = vec![czero(); self.fft_inv.get_inplace_scratch_len()];
        for a in 0..x.n {
            let dst = out.component_mut(a);
            for i in 0..nr {
                buf.iter_mut().for_each(|b| *b = czero());
                for m in x.space.modes() {
                    let alpha = m.unsigned_abs() as usize;
                    let mut acc = czero();
                    for l in 0..=x.space.radial_degree(m) {
                        acc += x.get(a, m, l) * self.basis_at(alpha, l, i);
                    }
                    buf[self.mode_slot(m)] = acc;
                }
                self.fft_inv.process_with_scratch(&mut buf, &mut scratch);
                dst[i * nt..(i + 1) * nt].copy_from_slice(&buf);
            }
        }
        out
    }

    /// Quadrature projection onto `space` (exact for data in the space).
    pub fn analyze(&self, f: &GridField<S>, space: ModalSpace) -> Result<ModalMap<S>> {
        self.check_space(&space)?;
        let (nr, nt) = (self.spec.radial_nodes(), self.spec.angular_nodes());
        if f.num_nodes() != nr * nt {
            return Err(Error::InvalidInput(format!(
                "field has {} samples, grid has {} nodes",
                f.num_nodes(),
                nr * nt
            )));
        }
        let mut out = ModalMap::zeros(f.n(), space);
        let mut buf = vec![czero(); nt];
        let mut scratch = vec![czero(); self.fft_fwd.get_inplace_scratch_len()];
        let dim = out.space.dim();
        for a in 0..f.n() {
            let src = f.component(a);
            for i in 0..nr {
                buf.copy_from_slice(&src[i * nt..(i + 1) * nt]);
                self.fft_fwd.process_with_scratch(&mut buf, &mut scratch);
                let w = self.spec.ring_weights()[i];
                for m in out.space.modes() {
                    let alpha = m.unsigned_abs() as usize;
                    let g = buf[self.mode_slot(m)] * w;
                    let off = a * dim + out.space.offset(m);
                    for l in 0..=out.space.radial_degree(m) {
                        out.coeffs[off + l] += g * self.basis_at(alpha, l, i);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Values at arbitrary points (no domain check).
    pub fn eval(&self, x: &ModalMap<S>, z: C<S>) -> Vec<C<S>> {
        eval_modal(&self.families, x, z)
    }

    /// Discrete `L²` norm of a grid field.
    pub fn l2_norm_field(&self, f: &GridField<S>) -> S {
        let mut acc = S::zero();
        for a in 0..f.n() {
            for (idx, v) in f.component(a).iter().enumerate() {
                acc += v.norm_sqr() * self.spec.weight(idx);
            }
        }
        acc.sqrt()
    }

    fn family(&self, alpha: usize) -> RadialFamily<S> {
        match self.families.get(alpha) {
            Some(f) if f.max_degree() >= self.max_radial + 2 => f.clone(),
            _ => RadialFamily::new(alpha, self.max_radial + 4),
        }
    }

    /// Cached modal operator of the given kind on `space`.
    pub fn op(&self, kind: OpKind, space: &ModalSpace) -> Arc<ModeOp<S>> {
        let (dz, dzb) = space.bidegree();
        let key = (kind, dz, dzb);
        if let Some(op) = self.ops.lock().expect("operator cache").get(&key) {
            return op.clone();
        }
        let op = Arc::new(match kind {
            OpKind::DBar => self.build_derivative(space, true),
            OpKind::Dz => self.build_derivative(space, false),
            OpKind::CauchyGreen => self.build_cauchy_green(space),
        });
        self.ops.lock().expect("operator cache").insert(key, op.clone());
        op
    }

    pub fn d_bar(&self, x: &ModalMap<S>) -> ModalMap<S> {
        self.op(OpKind::DBar, &x.space).apply(x)
    }
    pub fn d_z(&self, x: &ModalMap<S>) -> ModalMap<S> {
        self.op(OpKind::Dz, &x.space).apply(x)
    }
    pub fn cauchy_green(&self, x: &ModalMap<S>) -> ModalMap<S> {
        self.op(OpKind::CauchyGreen, &x.space).apply(x)
    }

    /// ∂ζ̄ (`dbar = true`) or ∂ζ of each basis element, projected exactly.
    fn build_derivative(&self, space: &ModalSpace, dbar: bool) -> ModeOp<S> {
        let (dz, dzb) = space.bidegree();
        let (to, shift) = if dbar {
            (ModalSpace::new(dz, dzb.saturating_sub(1)), 1)
        } else {
            (ModalSpace::new(dz.saturating_sub(1), dzb), -1)
        };
        let k = 2 * dz.max(dzb) + 6;
        let (sq, wq) = gauss_legendre_unit::<S>(k);
        let mut blocks = Vec::new();
        for m in space.modes() {
            let target = m + shift;
            let lowers = if dbar { dzb == 0 } else { dz == 0 };
            if lowers || !to.has_mode(target) {
                blocks.push(None);
                continue;
            }
            let n_src = space.radial_degree(m);
            let n_dst = to.radial_degree(target);
            let fam_src = self.family(m.unsigned_abs() as usize);
            let alpha_dst = target.unsigned_abs() as usize;
            let fam_dst = self.family(alpha_dst);
            let mut b = DMatrix::zeros(n_dst + 1, n_src + 1);
            for (s, w) in sq.iter().zip(&wq) {
                let (p, d) = fam_src.eval(n_src, *s);
                let (q, _) = fam_dst.eval(n_dst, *s);
                let wt = *w * S::pi() * s.powi(alpha_dst as i32);
                for c in 0..=n_src {
                    let v = derivative_profile(m, dbar, p[c], d[c], *s);
                    for r in 0..=n_dst {
                        b[(r, c)] += q[r] * v * wt;
                    }
                }
            }
            blocks.push(Some(b));
        }
        ModeOp {
            from: space.clone(),
            to,
            shift,
            blocks,
        }
    }

    /// Right inverse of ∂ζ̄ from `(dz, dzb)` into `(dz, dzb + 1)` matching the
    /// Cauchy–Green operator: on modes whose target is holomorphic the free
    /// constant is fixed by vanishing at `|ζ| = 1`.
    fn build_cauchy_green(&self, space: &ModalSpace) -> ModeOp<S> {
        let (dz, dzb) = space.bidegree();
        let to = ModalSpace::new(dz, dzb + 1);
        let dbar = self.build_derivative(&to, true);
        let mut blocks = Vec::new();
        for m in space.modes() {
            let target = m - 1;
            let n_src = space.radial_degree(m);
            let n_dst = to.radial_degree(target);
            let k = (target - to.min_mode()) as usize;
            let blk = dbar.blocks[k].as_ref().expect("dbar block");
            debug_assert_eq!(blk.nrows(), n_src + 1);
            let x = if m >= 1 {
                let fam = self.family(target as usize);
                let (p1, _) = fam.eval(n_dst, S::one());
                let mut sys = DMatrix::zeros(n_dst + 1, n_dst + 1);
                sys.view_mut((0, 0), (n_src + 1, n_dst + 1)).copy_from(blk);
                for c in 0..=n_dst {
                    sys[(n_src + 1, c)] = p1[c];
                }
                let mut rhs = DMatrix::zeros(n_dst + 1, n_src + 1);
                for i in 0..=n_src {
                    rhs[(i, i)] = S::one();
                }
                sys.lu().solve(&rhs).expect("Cauchy-Green block invertible")
            } else {
                blk.clone().lu().try_inverse().expect("Cauchy-Green block invertible")
            };
            blocks.push(Some(x));
        }
        ModeOp {
            from: space.clone(),
            to,
            shift: -1,
            blocks,
        }
    }

    /// Monomial coefficients of a modal map (ill-conditioned for large degree).
    pub fn to_disc_map(&self, x: &ModalMap<S>) -> DiscMap<S> {
        let (dz, dzb) = x.space.bidegree();
        let mut out = DiscMap::zeros_bidegree(x.n, dz, dzb);
        for m in x.space.modes() {
            let n = x.space.radial_degree(m);
            let pc = self.family(m.unsigned_abs() as usize).power_coefficients(n);
            let (jp, kp) = (m.max(0) as usize, (-m).max(0) as usize);
            for a in 0..x.n {
                for t in 0..=n {
                    let mut acc = czero();
                    for (l, row) in pc.iter().enumerate().skip(t) {
                        acc += x.get(a, m, l) * row[t];
                    }
                    out.set(a, t + jp, t + kp, acc);
                }
            }
        }
        out
    }

    /// Modal coefficients of a monomial map (stable direction).
    pub fn from_disc_map(&self, u: &DiscMap<S>) -> ModalMap<S> {
        let (dz, dzb) = u.bidegree();
        let space = ModalSpace::new(dz, dzb);
        let mut out = ModalMap::zeros(u.n(), space.clone());
        let k = dz.max(dzb) + 4;
        let (sq, wq) = gauss_legendre_unit::<S>(k);
        for m in space.modes() {
            let n = space.radial_degree(m);
            let alpha = m.unsigned_abs() as usize;
            let fam = self.family(alpha);
            // M[l][t] = ⟨φ_l, s^t⟩ on mode m
            let mut mat = vec![vec![S::zero(); n + 1]; n + 1];
            for (s, w) in sq.iter().zip(&wq) {
                let (p, _) = fam.eval(n, *s);
                let wt = *w * S::pi() * s.powi(alpha as i32);
                let mut st = S::one();
                for t in 0..=n {
                    for l in 0..=t {
                        mat[l][t] += p[l] * st * wt;
                    }
                    st *= *s;
                }
            }
            let (jp, kp) = (m.max(0) as usize, (-m).max(0) as usize);
            for a in 0..u.n() {
                for (l, row) in mat.iter().enumerate() {
                    let mut acc = czero();
                    for (t, v) in row.iter().enumerate().skip(l) {
                        acc += u.coeff(a, t + jp, t + kp) * *v;
                    }
                    out.set(a, m, l, acc);
                }
            }
        }
        out
    }
}

/// Radial profile of ∂ζ̄ or ∂ζ applied to `e_m φ`, relative to the target
/// angular factor.
fn derivative_profile<S: Scalar>(m: i64, dbar: bool, p: S, d: S, s: S) -> S {
    if dbar {
        if m >= 0 {
            d
        } else {
            S::uz((-m) as usize) * p + s * d
        }
    } else if m <= 0 {
        d
    } else {
        S::uz(m as usize) * p + s * d
    }
}

fn eval_modal<S: Scalar>(families: &[RadialFamily<S>], x: &ModalMap<S>, z: C<S>) -> Vec<C<S>> {
    let s = z.norm_sqr();
    let mut out = vec![czero(); x.n];
    for m in x.space.modes() {
        let alpha = m.unsigned_abs() as usize;
        let n = x.space.radial_degree(m);
        let local;
        let fam = match families.get(alpha) {
            Some(f) if f.max_degree() + 1 >= n => f,
            _ => {
                local = RadialFamily::new(alpha, n + 1);
                &local
            }
        };
        let (p, _) = fam.eval(n, s);
        let e = if m >= 0 { cpowi(z, m as usize) } else { cpowi(z.conj(), alpha) };
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc: C<S> = czero();
            for (l, pl) in p.iter().enumerate() {
                acc += x.get(a, m, l) * *pl;
            }
            *o += acc * e;
        }
    }
    out
}
