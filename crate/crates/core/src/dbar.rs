//! The nonlinear operator `ℱ(u) = u_ζ̄ + A(u)·conj(u_ζ)`, its linearization
//! and the integral form `𝒢(u) = u + T(A(u)·conj(u_ζ))`.
//!
//! Unknowns live in the bidegree `(d, d)` space, residuals in `(d, d−1)`, the
//! exact image of ∂ζ̄. The nonlinear term is evaluated at the grid nodes and
//! projected back by quadrature, so `ℱ` here is the discrete operator
//! `u ↦ ∂ζ̄u + Π(A(u)·conj(u_ζ))` and `linearize` is its exact derivative.

use crate::basis::GridField;
use crate::error::{Error, Result};
use crate::modal::{Discretization, ModalMap, ModalSpace};
use crate::scalar::{czero, Scalar, C};
use crate::structure::{CMat, StructureSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Residual `ℱ(u)` with truncation diagnostics.
#[derive(Clone, Debug)]
pub struct Residual<S: Scalar> {
    /// Projected residual in the `(d, d−1)` space.
    pub value: ModalMap<S>,
    /// `L²` norm of the part of `A(u)·conj(u_ζ)` lost by the projection.
    pub tail: S,
}

/// `A(u(ζ))` at every grid node.
pub fn structure_field<S: Scalar>(a: &StructureSpec<S>, u: &GridField<S>) -> Result<Vec<CMat<S>>> {
    (0..u.num_nodes()).map(|i| a.eval(&u.at(i))).collect()
}

/// Pointwise `Σ_k M_ik v_k` (or with `conj(v)` when `conj` is set).
fn mat_times<S: Scalar>(m: &[CMat<S>], v: &GridField<S>, conj: bool) -> GridField<S> {
    let n = v.n();
    let mut out = GridField::zeros(n, v.num_nodes());
    for (idx, mi) in m.iter().enumerate() {
        for i in 0..n {
            let mut acc = czero::<S>();
            for k in 0..n {
                let x = v.get(k, idx);
                acc += mi[(i, k)] * if conj { x.conj() } else { x };
            }
            out.set(i, idx, acc);
        }
    }
    out
}

fn check_input<S: Scalar>(disc: &Discretization<S>, a: &StructureSpec<S>, u: &ModalMap<S>) -> Result<()> {
    if u.n() != a.n() {
        return Err(Error::InvalidInput(format!(
            "map has {} components, structure acts on C^{}",
            u.n(),
            a.n()
        )));
    }
    if u.space() != &disc.u_space() {
        return Err(Error::InvalidInput(format!(
            "map has bidegree {:?}, expected ({d}, {d})",
            u.space().bidegree(),
            d = disc.degree()
        )));
    }
    if !u.is_finite() {
        return Err(Error::InvalidInput("map has non-finite coefficients".into()));
    }
    Ok(())
}

/// Projected nonlinear term `Π(A(u)·conj(u_ζ))` and its projection tail.
fn nonlinear_term<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    u: &ModalMap<S>,
) -> Result<(ModalMap<S>, S)> {
    let fspace = disc.f_space();
    if a.is_standard() {
        return Ok((ModalMap::zeros(u.n(), fspace), S::zero()));
    }
    let ug = disc.synthesize(u);
    let uz = disc.synthesize(&disc.d_z(u));
    let am = structure_field(a, &ug)?;
    let term = mat_times(&am, &uz, true);
    let proj = disc.analyze(&term, fspace)?;
    let tail = disc.l2_norm_field(&term.sub(&disc.synthesize(&proj)));
    Ok((proj, tail))
}

/// `ℱ(u)`.
pub fn apply_f<S: Scalar>(disc: &Discretization<S>, a: &StructureSpec<S>, u: &ModalMap<S>) -> Result<Residual<S>> {
    check_input(disc, a, u)?;
    let (nl, tail) = nonlinear_term(disc, a, u)?;
    Ok(Residual {
        value: disc.d_bar(u).add(&nl),
        tail,
    })
}

/// `𝒢(u) = u + T(A(u)·conj(u_ζ))`; `∂ζ̄ 𝒢(u) = ℱ(u)` exactly.
pub fn apply_g<S: Scalar>(disc: &Discretization<S>, a: &StructureSpec<S>, u: &ModalMap<S>) -> Result<ModalMap<S>> {
    check_input(disc, a, u)?;
    let (nl, _) = nonlinear_term(disc, a, u)?;
    Ok(u.add(&disc.cauchy_green(&nl)))
}

/// `h ↦ h_ζ̄ + P·conj(h_ζ) + B₁h + B₂h̄` at a base map `φ`, with
/// `P = A(φ)`, `B₁ = Σ_k ∂A_{·k}/∂z_j w_k`, `B₂ = Σ_k ∂A_{·k}/∂z̄_j w_k` and
/// `w = conj(φ_ζ)`, all sampled at the grid nodes.
#[derive(Clone, Debug)]
pub struct LinearizedOp<S: Scalar> {
    n: usize,
    pub p: Vec<CMat<S>>,
    pub b1: Vec<CMat<S>>,
    pub b2: Vec<CMat<S>>,
}

/// Linearization of `ℱ` at `φ`.
pub fn linearize<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
) -> Result<LinearizedOp<S>> {
    check_input(disc, a, phi)?;
    let n = a.n();
    let nodes = disc.spec().num_nodes();
    if a.is_standard() {
        let z = vec![CMat::zeros(n, n); nodes];
        return Ok(LinearizedOp {
            n,
            p: z.clone(),
            b1: z.clone(),
            b2: z,
        });
    }
    let ug = disc.synthesize(phi);
    let uz = disc.synthesize(&disc.d_z(phi));
    let mut p = Vec::with_capacity(nodes);
    let mut b1 = Vec::with_capacity(nodes);
    let mut b2 = Vec::with_capacity(nodes);
    for idx in 0..nodes {
        let z = ug.at(idx);
        p.push(a.eval(&z)?);
        let (dz, dzb) = a.derivatives(&z)?;
        let w: Vec<C<S>> = (0..n).map(|k| uz.get(k, idx).conj()).collect();
        let mut m1 = CMat::zeros(n, n);
        let mut m2 = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s1 = czero::<S>();
                let mut s2 = czero::<S>();
                for k in 0..n {
                    s1 += dz[j][(i, k)] * w[k];
                    s2 += dzb[j][(i, k)] * w[k];
                }
                m1[(i, j)] = s1;
                m2[(i, j)] = s2;
            }
        }
        b1.push(m1);
        b2.push(m2);
    }
    Ok(LinearizedOp { n, p, b1, b2 })
}

impl<S: Scalar> LinearizedOp<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest `|P_ij|` over the grid.
    pub fn p_max(&self) -> S {
        max_entry(&self.p)
    }

    /// Operator built from given coefficient fields.
    pub fn from_fields(n: usize, p: Vec<CMat<S>>, b1: Vec<CMat<S>>, b2: Vec<CMat<S>>) -> Self {
        Self { n, p, b1, b2 }
    }

    /// Pointwise `P·conj(h_ζ) + B₁h + B₂h̄` from grid samples of `h`, `h_ζ`.
    fn zeroth_pointwise(&self, h: &GridField<S>, hz: &GridField<S>) -> GridField<S> {
        mat_times(&self.p, hz, true)
            .add(&mat_times(&self.b1, h, false))
            .add(&mat_times(&self.b2, h, true))
    }

    /// Projected non-∂̄ part `Π(P·conj(h_ζ) + B₁h + B₂h̄)`.
    pub fn zeroth(&self, disc: &Discretization<S>, h: &ModalMap<S>) -> ModalMap<S> {
        let hg = disc.synthesize(h);
        let hz = disc.synthesize(&disc.d_z(h));
        disc.analyze(&self.zeroth_pointwise(&hg, &hz), disc.f_space())
            .expect("residual space fits the grid")
    }

    /// Full operator `h ↦ h_ζ̄ + Π(…)`.
    pub fn apply(&self, disc: &Discretization<S>, h: &ModalMap<S>) -> ModalMap<S> {
        disc.d_bar(h).add(&self.zeroth(disc, h))
    }

    /// Real matrix of `h ↦ Π(P·conj(h_ζ) + B₁h + B₂h̄)` from the real layout
    /// of the `(d, d)` space to that of `(d, d−1)`, assembled column by
    /// column from single-component basis functions.
    pub fn zeroth_dense(&self, disc: &Discretization<S>) -> DMatrix<S> {
        let n = self.n;
        let uspace = disc.u_space();
        let fspace = disc.f_space();
        let dim = uspace.dim();
        let cols = 2 * n * dim;
        let rows = 2 * n * fspace.dim();
        // grid samples of each scalar basis function and its ζ-derivative
        let samples: Vec<(GridField<S>, GridField<S>)> = (0..dim)
            .into_par_iter()
            .map(|q| {
                let e = ModalMap::real_basis(1, &uspace, 2 * q);
                (disc.synthesize(&e), disc.synthesize(&disc.d_z(&e)))
            })
            .collect();
        let nodes = disc.spec().num_nodes();
        let columns: Vec<Vec<S>> = (0..cols)
            .into_par_iter()
            .map(|col| {
                let (a, q, imag) = (col / (2 * dim), (col / 2) % dim, col % 2 == 1);
                let c = if imag { C::new(S::zero(), S::one()) } else { C::new(S::one(), S::zero()) };
                let (g, dg) = &samples[q];
                let mut field = GridField::zeros(n, nodes);
                for idx in 0..nodes {
                    let h = g.get(0, idx) * c;
                    let hz = dg.get(0, idx) * c;
                    for i in 0..n {
                        let v = self.p[idx][(i, a)] * hz.conj()
                            + self.b1[idx][(i, a)] * h
                            + self.b2[idx][(i, a)] * h.conj();
                        field.set(i, idx, v);
                    }
                }
                let proj = disc.analyze(&field, fspace.clone()).expect("fits grid");
                proj.to_real().as_slice().to_vec()
            })
            .collect();
        let mut out = DMatrix::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            out.column_mut(j).copy_from_slice(col);
        }
        out
    }

    /// Real matrix of the full operator.
    pub fn assemble(&self, disc: &Discretization<S>) -> DMatrix<S> {
        let dbar = disc.op(crate::modal::OpKind::DBar, &disc.u_space()).real_dense(self.n);
        dbar + self.zeroth_dense(disc)
    }
}

pub(crate) fn max_entry<S: Scalar>(m: &[CMat<S>]) -> S {
    m.iter()
        .flat_map(|m| m.iter())
        .map(|c| c.norm_sqr().sqrt())
        .fold(S::zero(), |a, b| if b > a { b } else { a })
}

/// Real dense matrix of `d_φ𝒢 = I + T∘(non-∂̄ part of d_φℱ)` on the `(d, d)` space.
pub fn assemble_dg<S: Scalar>(disc: &Discretization<S>, lin: &LinearizedOp<S>) -> DMatrix<S> {
    let t = disc.op(crate::modal::OpKind::CauchyGreen, &disc.f_space()).real_dense(lin.n());
    let z = lin.zeroth_dense(disc);
    let dim = t.nrows();
    DMatrix::identity(dim, dim) + t * z
}

/// Space helpers re-exported for callers that build maps by hand.
pub fn unknown_space<S: Scalar>(disc: &Discretization<S>) -> ModalSpace {
    disc.u_space()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DiscMap;
    use crate::scalar::creal;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn modal(disc: &Discretization<f64>, m: &DiscMap<f64>) -> ModalMap<f64> {
        disc.from_disc_map(m).resized(&disc.u_space())
    }

    /// Low-degree random map with small coefficients.
    fn random_map(rng: &mut ChaCha8Rng, n: usize, deg: usize, scale: f64) -> DiscMap<f64> {
        let mut m = DiscMap::zeros(n, deg);
        for a in 0..n {
            for j in 0..=deg {
                for k in 0..=deg - j {
                    m.set(a, j, k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale);
                }
            }
        }
        m
    }

    fn phi_r6(disc: &Discretization<f64>, eps: f64) -> ModalMap<f64> {
        let mut m = DiscMap::zeros(3, 1);
        m.set(0, 1, 0, creal(1.0));
        m.set(1, 0, 1, creal(eps));
        modal(disc, &m)
    }

    #[test]
    fn standard_structure_holomorphic_map() {
        let disc = Discretization::<f64>::with_degree(8);
        let mut m = DiscMap::zeros(2, 3);
        m.set(0, 3, 0, c(1.0, 2.0));
        m.set(1, 1, 0, c(-0.5, 0.0));
        let r = apply_f(&disc, &StructureSpec::standard(2), &modal(&disc, &m)).unwrap();
        assert_eq!(r.value.max_abs_coeff(), 0.0);
    }

    #[test]
    fn example_disc_is_holomorphic() {
        let disc = Discretization::<f64>::with_degree(10);
        let r = apply_f(&disc, &StructureSpec::example_r6(), &phi_r6(&disc, 0.0)).unwrap();
        assert!(r.value.max_abs_coeff() < 1e-15);
        assert_eq!(r.tail, 0.0);
    }

    #[test]
    fn scalar_zbar_residual() {
        // A = 0.1 z̄, u = ζ: ℱ(u) = 0 + 0.1 ζ̄ · 1
        let disc = Discretization::<f64>::with_degree(8);
        let u = modal(&disc, &DiscMap::monomial(1, 1, 0, 1, 0, creal(1.0)));
        let r = apply_f(&disc, &StructureSpec::scalar_zbar(0.1), &u).unwrap();
        let expect = disc
            .from_disc_map(&DiscMap::monomial(1, 1, 0, 0, 1, creal(0.1)))
            .resized(&disc.f_space());
        assert!(r.value.sub(&expect).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn dbar_of_g_is_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let disc = Discretization::<f64>::with_degree(10);
        let a = StructureSpec::example_r6();
        for _ in 0..3 {
            let u = modal(&disc, &random_map(&mut rng, 3, 4, 0.08));
            let g = apply_g(&disc, &a, &u).unwrap();
            let f = apply_f(&disc, &a, &u).unwrap();
            assert!(disc.d_bar(&g).sub(&f.value).max_abs_coeff() < 1e-12);
        }
    }

    #[test]
    fn standard_linearization_is_dbar() {
        let disc = Discretization::<f64>::with_degree(6);
        let lin = linearize(&disc, &StructureSpec::standard(2), &ModalMap::zeros(2, disc.u_space())).unwrap();
        let dense = lin.assemble(&disc);
        let dbar = disc.op(crate::modal::OpKind::DBar, &disc.u_space()).real_dense(2);
        assert_eq!((dense - dbar).amax(), 0.0);
    }

    #[test]
    fn example_linearization_coefficients() {
        let disc = Discretization::<f64>::with_degree(8);
        let lin = linearize(&disc, &StructureSpec::example_r6(), &phi_r6(&disc, 0.0)).unwrap();
        assert_eq!(lin.p_max(), 0.0);
        assert!(max_entry(&lin.b2) < 1e-15);
        for idx in 0..disc.spec().num_nodes() {
            let z = disc.spec().node(idx);
            let b1 = &lin.b1[idx];
            let beta = z * z * 6.0 / (3.0 - z.norm_sqr() * z.norm_sqr());
            assert!((b1[(1, 2)] - beta).norm() < 1e-13);
            assert!((b1[(2, 1)] + 1.0).norm() < 1e-13);
            let others: f64 = b1.iter().map(|v| v.norm()).sum::<f64>() - b1[(1, 2)].norm() - b1[(2, 1)].norm();
            assert!(others < 1e-13);
        }
    }

    #[test]
    fn linearization_matches_directional_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let disc = Discretization::<f64>::with_degree(8);
        let poly2 = StructureSpec::polynomial(
            2,
            vec![crate::structure::Entry {
                row: 0,
                col: 1,
                terms: vec![crate::structure::Term { coeff: c(0.1, 0.05), powers_z: vec![1, 0], powers_zbar: vec![0, 1] }],
            }],
        )
        .unwrap();
        let cases = [StructureSpec::scalar_zbar(0.1), poly2, StructureSpec::example_r6()];
        for trial in 0..10 {
            let a = &cases[trial % 3];
            let phi = modal(&disc, &random_map(&mut rng, a.n(), 3, 0.1));
            let h = modal(&disc, &random_map(&mut rng, a.n(), 3, 1.0));
            let lin = linearize(&disc, a, &phi).unwrap();
            let exact = lin.apply(&disc, &h);
            let f0 = apply_f(&disc, a, &phi).unwrap().value;
            let diff = |t: f64| apply_f(&disc, a, &phi.add(&h.scale(creal(t)))).unwrap().value.sub(&f0).scale(creal(1.0 / t));
            let (d1, d2) = (diff(1e-3), diff(1e-4));
            // Richardson: 2-point extrapolation of a first-order difference
            let rich = d2.scale(creal(10.0 / 9.0)).sub(&d1.scale(creal(1.0 / 9.0)));
            let err = rich.sub(&exact).l2_norm() / exact.l2_norm();
            assert!(err < 1e-5, "trial {trial}: {err}");
        }
    }

    #[test]
    fn linearization_is_real_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let disc = Discretization::<f64>::with_degree(6);
        let a = StructureSpec::example_r6();
        let phi = modal(&disc, &random_map(&mut rng, 3, 3, 0.3));
        let lin = linearize(&disc, &a, &phi).unwrap();
        let h1 = modal(&disc, &random_map(&mut rng, 3, 3, 1.0));
        let h2 = modal(&disc, &random_map(&mut rng, 3, 3, 1.0));
        let lhs = lin.apply(&disc, &h1.scale(creal(2.0)).add(&h2.scale(creal(-0.5))));
        let rhs = lin.apply(&disc, &h1).scale(creal(2.0)).add(&lin.apply(&disc, &h2).scale(creal(-0.5)));
        assert!(lhs.sub(&rhs).max_abs_coeff() < 1e-13);
        // dense assembly agrees with the matrix-free action
        let dense = lin.assemble(&disc);
        let v = &dense * h1.to_real();
        let direct = lin.apply(&disc, &h1).to_real();
        assert!((v - direct).amax() < 1e-12);
    }

    #[test]
    fn g_quadrature_cross_check() {
        // 𝒢(u) − u = T(A(u)·conj(u_ζ)) compared against the singular-integral oracle
        let disc = Discretization::<f64>::with_degree(12);
        let a = StructureSpec::example_r6();
        let mut m = DiscMap::zeros(3, 1);
        m.set(0, 1, 0, creal(1.0));
        m.set(1, 0, 1, creal(0.1));
        let u = modal(&disc, &m);
        let g = apply_g(&disc, &a, &u).unwrap().sub(&u);
        for z in [c(0.1, 0.2), c(-0.4, 0.3), c(0.5, -0.5)] {
            let table = disc.eval(&g, z);
            for comp in 0..3 {
                let integrand = |w: Complex64| {
                    let val = vec![w, w.conj() * 0.1, c(0.0, 0.0)];
                    let am = a.eval(&val).unwrap();
                    let uz = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
                    (0..3).map(|k| am[(comp, k)] * uz[k].conj()).sum::<Complex64>()
                };
                let q = crate::calculus::t_quadrature(integrand, z, 40, 1e-12).unwrap();
                assert!((q - table[comp]).norm() < 1e-6 * q.norm().max(1.0), "z={z} comp={comp}");
            }
        }
    }
}
