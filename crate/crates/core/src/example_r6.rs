//! The non-regular pair on ℝ⁶: `φ(ζ) = (ζ, 0, 0)` for the structure of
//! [`StructureSpec::example_r6`].
//!
//! The kernel of `d_φ𝒢` reduces to `h₁ = 0` and the scalar equation
//! `(h₃)_ζ̄ζ̄ = 6ζ²/(ζ²ζ̄² − 3)·h₃` with particular solutions
//! `ψ₁ = ζ̄ − ζ²ζ̄³/3` and `ψ₂ = Σ b_k ζ^{2k}ζ̄^{2k}`.

use crate::basis::DiscMap;
use crate::calculus::{cauchy_boundary, d_bar};
use crate::error::{Error, Result};
use crate::modal::{Discretization, ModalMap};
use crate::rightinv::{kernel_vectors, KernelReport, KERNEL_THRESHOLD};
use crate::scalar::{cabs, cplx, creal, Scalar, C};
use crate::structure::StructureSpec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

/// Coefficients `b_0..=b_K` in exact arithmetic with the derived constants.
#[derive(Clone, Debug)]
pub struct ExampleSeries {
    pub b: Vec<BigRational>,
    /// `λ₁ = 2Σ k b_k`, `λ₂ = Σ b_k` over the partial sums.
    pub lambda1: f64,
    pub lambda2: f64,
    /// Bounds on the omitted tails from `0 < b_k ≤ 3^{−k}`.
    pub tail1: f64,
    pub tail2: f64,
}

/// `b_k / b_{k−1} = ((k−1)(2k−3) − 3) / (3(2k−1)k)`.
pub fn b_ratio(k: u64) -> BigRational {
    let k = k as i64;
    BigRational::new(BigInt::from((k - 1) * (2 * k - 3) - 3), BigInt::from(3 * (2 * k - 1) * k))
}

pub fn b_coeffs(kmax: usize) -> ExampleSeries {
    let mut b = Vec::with_capacity(kmax + 1);
    b.push(BigRational::one());
    for k in 1..=kmax as u64 {
        let prev = b.last().expect("b_0 present").clone();
        b.push(prev * b_ratio(k));
    }
    let f: Vec<f64> = b.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect();
    let lambda1 = 2.0 * f.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>();
    let lambda2 = f.iter().sum();
    let x: f64 = 1.0 / 3.0;
    let k1 = (kmax + 1) as f64;
    // Σ_{k>K} x^k and Σ_{k>K} k x^k
    let tail2 = x.powf(k1) / (1.0 - x);
    let tail1 = 2.0 * x.powf(k1) * (k1 - (k1 - 1.0) * x) / ((1.0 - x) * (1.0 - x));
    ExampleSeries { b, lambda1, lambda2, tail1, tail2 }
}

impl ExampleSeries {
    pub fn b_f64(&self) -> Vec<f64> {
        self.b.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Indices `2 ≤ k` with `b_k ≤ 0` or `b_k > 3^{−k}`.
    pub fn bound_violations(&self) -> Vec<usize> {
        let three = BigInt::from(3);
        (2..self.b.len())
            .filter(|&k| {
                let bound = BigRational::new(BigInt::one(), num_traits::pow(three.clone(), k));
                !self.b[k].is_positive() || self.b[k] > bound
            })
            .collect()
    }

    /// `ψ₂` as a monomial map of bidegree `(2K, 2K)`.
    pub fn psi2_map<S: Scalar>(&self) -> DiscMap<S> {
        let k = self.b.len() - 1;
        let mut m = DiscMap::zeros_bidegree(1, 2 * k, 2 * k);
        for (j, v) in self.b_f64().into_iter().enumerate() {
            m.set(0, 2 * j, 2 * j, creal(S::lit(v)));
        }
        m
    }
}

/// `ψ₁` as a monomial map.
pub fn psi1_map<S: Scalar>() -> DiscMap<S> {
    let mut m = DiscMap::zeros_bidegree(1, 2, 3);
    m.set(0, 0, 1, creal(S::one()));
    m.set(0, 2, 3, creal(S::lit(-1.0 / 3.0)));
    m
}

/// `ψ₁(ζ)` (closed form) or `ψ₂(ζ)` (partial sum to `K`).
pub fn psi_eval<S: Scalar>(which: u8, z: C<S>, kmax: usize) -> Result<C<S>> {
    let zb = z.conj();
    match which {
        1 => Ok(zb - z * z * zb * zb * zb * creal(S::lit(1.0 / 3.0))),
        2 => {
            let s = (z * zb).re;
            let s2 = s * s;
            let mut acc = S::zero();
            let mut pw = S::one();
            for v in b_coeffs(kmax).b_f64() {
                acc += S::lit(v) * pw;
                pw *= s2;
            }
            Ok(creal(acc))
        }
        _ => Err(Error::InvalidInput(format!("particular solution {which} does not exist"))),
    }
}

/// Closed-disc sample points: interior grid nodes plus the unit circle.
fn closed_disc_points<S: Scalar>(d: usize) -> Vec<C<S>> {
    let spec = crate::basis::DiscretizationSpec::<S>::with_degree(d);
    let mut pts = spec.nodes();
    let m = 128;
    for k in 0..m {
        let t = S::two_pi() * S::uz(k) / S::uz(m);
        pts.push(cplx(t.cos(), t.sin()));
    }
    pts
}

/// `sup |ψ_ζ̄ζ̄ − 6ζ²/(ζ²ζ̄² − 3)·ψ|` over the closed disc samples.
pub fn ode_residual<S: Scalar>(psi: &DiscMap<S>) -> Result<S> {
    if psi.n() != 1 {
        return Err(Error::InvalidInput("ODE residual needs a scalar map".into()));
    }
    let (dz, dzb) = psi.bidegree();
    let d = dz.max(dzb) + 2;
    let second = d_bar(&d_bar(psi));
    let mut worst = S::zero();
    for z in closed_disc_points::<S>(d.min(24)) {
        let s2 = (z * z.conj()).re;
        let coef = z * z * creal(S::lit(6.0) / (s2 * s2 - S::lit(3.0)));
        let r = cabs(second.eval(z)[0] - coef * psi.eval(z)[0]);
        if r > worst {
            worst = r;
        }
    }
    Ok(worst)
}

/// Condition number of the Hermitian Gram matrix of `ψ₁`, `ψ₂` sampled on a grid.
pub fn gram_condition(kmax: usize, d: usize) -> f64 {
    let pts = closed_disc_points::<f64>(d);
    let (mut g11, mut g22, mut g12) = (0.0, 0.0, C::new(0.0, 0.0));
    let series = b_coeffs(kmax);
    let p2 = series.psi2_map::<f64>();
    for z in pts {
        let a = psi_eval(1, z, kmax).expect("ψ₁");
        let b = p2.eval(z)[0];
        g11 += a.norm_sqr();
        g22 += b.norm_sqr();
        g12 += a.conj() * b;
    }
    let m = nalgebra::Matrix2::new(g11, g12.norm(), g12.norm(), g22);
    let e = m.symmetric_eigenvalues();
    let (lo, hi) = (e[0].min(e[1]), e[0].max(e[1]));
    hi / lo
}

/// Kernel certificate of the example at one resolution.
#[derive(Clone, Debug, Serialize)]
pub struct KernelCertificate {
    pub degree: usize,
    pub dim: usize,
    /// Singular values of `d_φ𝒢`, largest first.
    pub spectrum: Vec<f64>,
    /// `σ_{N−2}/σ_max`, the smallest singular value kept out of the kernel.
    pub gap: f64,
    /// `max |h₁|` over the kernel vectors (coefficient max).
    pub first_component: f64,
    /// `max |C(h_j)(z)|` over the kernel vectors, components and probes.
    pub cauchy_max: f64,
    /// Distance of the kernel vectors from `span_ℝ{c·(0, ψ₁_ζ̄, ψ₁)}`.
    pub span_residual: f64,
    pub numeric_ok: bool,
    pub analytic_ok: bool,
}

/// Interior probe points for the boundary Cauchy integrals.
pub fn cauchy_probes() -> Vec<C<f64>> {
    (0..10).map(|i| C::from_polar(0.08 * i as f64 + 0.05, 0.7 + 2.1 * i as f64)).collect()
}

/// The analytic kernel element `(0, ψ₁_ζ̄, ψ₁)·c` in the unknown space.
pub fn analytic_kernel_vector(disc: &Discretization<f64>, c: C<f64>) -> ModalMap<f64> {
    let mut m = DiscMap::zeros(3, 5);
    m.set(1, 0, 0, c);
    m.set(1, 2, 2, -c);
    m.set(2, 0, 1, c);
    m.set(2, 2, 3, c * (-1.0 / 3.0));
    disc.from_disc_map(&m).resized(&disc.u_space())
}

/// Numeric kernel dimension plus the analytic cross-checks.
pub fn kernel_certificate(degree: usize) -> Result<KernelCertificate> {
    kernel_certificate_for(&StructureSpec::example_r6(), degree, true)
}

/// As [`kernel_certificate`] for a variant of the structure; with `strict`
/// a count other than 2 or a failed check is a [`Error::Certificate`].
pub fn kernel_certificate_for(a: &StructureSpec<f64>, degree: usize, strict: bool) -> Result<KernelCertificate> {
    if degree < 10 {
        return Err(Error::InvalidInput(format!("certificate needs degree ≥ 10, got {degree}")));
    }
    let disc = Discretization::<f64>::with_degree(degree);
    let mut m = DiscMap::zeros(3, 1);
    m.set(0, 1, 0, C::new(1.0, 0.0));
    let phi = disc.from_disc_map(&m).resized(&disc.u_space());
    let (rep, vecs): (KernelReport<f64>, _) = kernel_vectors(&disc, a, &phi, KERNEL_THRESHOLD)?;
    let smax = rep.spectrum[0];
    let len = rep.spectrum.len();
    let gap = if rep.dim < len { rep.spectrum[len - rep.dim - 1] / smax } else { 0.0 };

    let mut first = 0.0f64;
    let mut cauchy = 0.0f64;
    let m_bdry = 256;
    let bdry: Vec<C<f64>> = (0..m_bdry)
        .map(|k| C::from_polar(1.0, std::f64::consts::TAU * k as f64 / m_bdry as f64))
        .collect();
    for h in &vecs {
        first = first.max(h.component(0).max_abs_coeff());
        let samples: Vec<Vec<C<f64>>> = bdry.iter().map(|&z| disc.eval(h, z)).collect();
        for z in cauchy_probes() {
            for v in cauchy_boundary(&samples, z)? {
                cauchy = cauchy.max(v.norm());
            }
        }
    }
    // least-squares distance from the analytic span, in the real layout
    let basis = [analytic_kernel_vector(&disc, C::new(1.0, 0.0)), analytic_kernel_vector(&disc, C::new(0.0, 1.0))];
    let bmat = nalgebra::DMatrix::from_columns(&[basis[0].to_real(), basis[1].to_real()]);
    let qr = bmat.clone().qr();
    let mut span = 0.0f64;
    for h in &vecs {
        let x = h.to_real();
        let coef = qr.r().solve_upper_triangular(&(qr.q().transpose() * &x)).unwrap_or_else(|| nalgebra::DVector::zeros(2));
        span = span.max((&bmat * coef - &x).norm() / x.norm());
    }
    let numeric_ok = rep.dim == 2 && gap > 1e-3;
    let analytic_ok = first < 1e-8 && cauchy < 1e-6 && span < 1e-6;
    let cert = KernelCertificate {
        degree,
        dim: rep.dim,
        spectrum: rep.spectrum,
        gap,
        first_component: first,
        cauchy_max: cauchy,
        span_residual: span,
        numeric_ok,
        analytic_ok,
    };
    if strict && !(numeric_ok && analytic_ok) {
        return Err(Error::Certificate(format!(
            "kernel dimension {} (gap {:.2e}); h₁ {:.2e}, Cauchy {:.2e}, span {:.2e}",
            cert.dim, cert.gap, cert.first_component, cert.cauchy_max, cert.span_residual
        )));
    }
    Ok(cert)
}
