//! Wirtinger derivatives, the Cauchy–Green operator
//! `T(u)(z) = (1/π) ∫_Δ u(ζ) / (z − ζ) dA` and the boundary Cauchy integral,
//! on bi-monomial maps.
//!
//! The monomial action is held in an [`OperatorTable`] with exact rational
//! coefficients, so `∂ζ̄ ∘ T = Id` holds exactly there. [`t_quadrature`] is an
//! independent evaluation of the singular integral used to validate the table.

use crate::basis::DiscMap;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;
use crate::scalar::{cabs, cplx, czero, Scalar, C};
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Sparse image of one monomial: `(j, k) ↦ Σ c ζʲ' ζ̄ᵏ'`.
pub type MonomialImage = Vec<((usize, usize), Rational64)>;

/// Closed-form action of `T`, `∂ζ` and `∂ζ̄` on `ζʲζ̄ᵏ`, `j, k ≤ d`.
#[derive(Clone, Debug)]
pub struct OperatorTable {
    degree: usize,
    t: Vec<MonomialImage>,
    dz: Vec<MonomialImage>,
    dzb: Vec<MonomialImage>,
}

impl OperatorTable {
    pub fn new(degree: usize) -> Self {
        let mut t = Vec::new();
        let mut dz = Vec::new();
        let mut dzb = Vec::new();
        for j in 0..=degree {
            for k in 0..=degree {
                t.push(Self::t_monomial(j, k));
                dz.push(if j == 0 {
                    vec![]
                } else {
                    vec![((j - 1, k), Rational64::from_integer(j as i64))]
                });
                dzb.push(if k == 0 {
                    vec![]
                } else {
                    vec![((j, k - 1), Rational64::from_integer(k as i64))]
                });
            }
        }
        Self { degree, t, dz, dzb }
    }

    /// `T(ζʲζ̄ᵏ) = ζʲζ̄^{k+1}/(k+1)` for `j ≤ k`, and
    /// `(ζʲζ̄^{k+1} − ζ^{j−k−1})/(k+1)` for `j ≥ k+1`.
    pub fn t_monomial(j: usize, k: usize) -> MonomialImage {
        let c = Rational64::new(1, k as i64 + 1);
        let mut out = vec![((j, k + 1), c)];
        if j > k {
            out.push(((j - k - 1, 0), -c));
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn idx(&self, j: usize, k: usize) -> usize {
        assert!(j <= self.degree && k <= self.degree, "monomial outside table");
        j * (self.degree + 1) + k
    }

    pub fn t(&self, j: usize, k: usize) -> &MonomialImage {
        &self.t[self.idx(j, k)]
    }
    pub fn dz(&self, j: usize, k: usize) -> &MonomialImage {
        &self.dz[self.idx(j, k)]
    }
    pub fn dzb(&self, j: usize, k: usize) -> &MonomialImage {
        &self.dzb[self.idx(j, k)]
    }

    /// `∂ζ̄` applied to a sparse image, in exact arithmetic.
    pub fn dzb_of(image: &MonomialImage) -> MonomialImage {
        let mut acc: BTreeMap<(usize, usize), Rational64> = BTreeMap::new();
        for ((j, k), c) in image {
            if *k > 0 {
                *acc.entry((*j, k - 1)).or_insert_with(Rational64::zero) +=
                    c * Rational64::from_integer(*k as i64);
            }
        }
        acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    }

    /// Monomials `(j, k)` with `j, k ≤ d` for which `∂ζ̄ T(ζʲζ̄ᵏ) ≠ ζʲζ̄ᵏ`
    /// exactly (empty when the table is consistent).
    pub fn right_inverse_defects(&self) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for j in 0..=self.degree {
            for k in 0..=self.degree {
                let img = Self::dzb_of(self.t(j, k));
                if img != vec![((j, k), Rational64::from_integer(1))] {
                    bad.push((j, k));
                }
            }
        }
        bad
    }

    fn apply<S: Scalar>(
        &self,
        m: &DiscMap<S>,
        pick: impl Fn(&Self, usize, usize) -> &MonomialImage,
        dz: usize,
        dzb: usize,
    ) -> DiscMap<S> {
        let (mz, mzb) = m.bidegree();
        assert!(mz.max(mzb) <= self.degree, "map degree exceeds table degree");
        let mut out = DiscMap::zeros_bidegree(m.n(), dz, dzb);
        for a in 0..m.n() {
            for j in 0..=mz {
                for k in 0..=mzb {
                    let c = m.coeff(a, j, k);
                    if c.norm_sqr() == S::zero() {
                        continue;
                    }
                    for ((j2, k2), r) in pick(self, j, k) {
                        let cur = out.coeff(a, *j2, *k2);
                        out.set(a, *j2, *k2, cur + c * rational::<S>(r));
                    }
                }
            }
        }
        out
    }
}

fn rational<S: Scalar>(r: &Rational64) -> S {
    S::lit(r.to_f64().expect("finite rational"))
}

/// `∂ζ̄`; the `ζ̄` degree drops by one.
pub fn d_bar<S: Scalar>(m: &DiscMap<S>) -> DiscMap<S> {
    let (dz, dzb) = m.bidegree();
    OperatorTable::new(dz.max(dzb)).apply(m, |t, j, k| t.dzb(j, k), dz, dzb.saturating_sub(1))
}

/// `∂ζ`; the `ζ` degree drops by one.
pub fn d_z<S: Scalar>(m: &DiscMap<S>) -> DiscMap<S> {
    let (dz, dzb) = m.bidegree();
    OperatorTable::new(dz.max(dzb)).apply(m, |t, j, k| t.dz(j, k), dz.saturating_sub(1), dzb)
}

/// Cauchy–Green operator from the closed-form table; the result has `ζ̄`
/// degree one higher than the input.
pub fn cauchy_green<S: Scalar>(m: &DiscMap<S>) -> DiscMap<S> {
    let (dz, dzb) = m.bidegree();
    OperatorTable::new(dz.max(dzb)).apply(m, |t, j, k| t.t(j, k), dz, dzb + 1)
}

/// Independent evaluation of `T(u)(z)` for `|z| < 1`.
///
/// Polar coordinates centred at the singularity, `ζ = z + ρ e^{iφ}`, turn the
/// kernel into `−e^{−iφ}/ρ` against `ρ dρ dφ`, so
/// `T(u)(z) = −(1/π) ∫ e^{−iφ} ∫_0^{R(φ)} u(z + ρe^{iφ}) dρ dφ` with `R(φ)` the
/// distance to the unit circle along direction `φ`. The radial integral uses
/// Gauss–Legendre with `radial` nodes (exact for polynomial `u` of degree
/// `< 2 radial`); the periodic angular integral uses the trapezoidal rule,
/// doubled until two successive values agree to `tol`.
pub fn t_quadrature<S: Scalar>(
    u: impl Fn(C<S>) -> C<S>,
    z: C<S>,
    radial: usize,
    tol: S,
) -> Result<C<S>> {
    if cabs(z) >= S::one() {
        return Err(Error::Domain(format!("z = ({}, {}) is not in the open disc", z.re, z.im)));
    }
    let (xr, wr) = gauss_legendre_unit::<S>(radial);
    let sweep = |m: usize| {
        let mut acc = czero::<S>();
        for t in 0..m {
            let phi = S::two_pi() * S::uz(t) / S::uz(m);
            let e = cplx(phi.cos(), phi.sin());
            let b = (z.conj() * e).re;
            let big_r = -b + (b * b + S::one() - z.norm_sqr()).sqrt();
            let mut inner = czero::<S>();
            for (x, w) in xr.iter().zip(&wr) {
                inner += u(z + e * (*x * big_r)) * *w;
            }
            acc += e.conj() * inner * big_r;
        }
        -acc * (S::two_pi() / S::uz(m)) / S::pi()
    };
    let mut m = 64;
    let mut prev = sweep(m);
    loop {
        m *= 2;
        let cur = sweep(m);
        if cabs(cur - prev) <= tol * (S::one() + cabs(cur)) {
            return Ok(cur);
        }
        if m > 1 << 16 {
            return Err(Error::Discretization(
                "angular quadrature for T did not converge".into(),
            ));
        }
        prev = cur;
    }
}

/// Largest relative disagreement between the closed-form table and
/// [`t_quadrature`] over all monomials `ζʲζ̄ᵏ`, `j, k ≤ degree`, at `points`.
/// Relative errors are taken against `max(|value|, 1)`.
pub fn validate_t_table(degree: usize, points: &[C<f64>], tol: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..=degree {
        for k in 0..=degree {
            let mono = DiscMap::<f64>::monomial(1, degree, 0, j, k, cplx(1.0, 0.0));
            let t = cauchy_green(&mono);
            for z in points {
                let exact = t.eval(*z)[0];
                let quad = t_quadrature(
                    |w: C<f64>| w.powu(j as u32) * w.conj().powu(k as u32),
                    *z,
                    degree + 4,
                    tol,
                )?;
                worst = worst.max((exact - quad).norm() / exact.norm().max(1.0));
            }
        }
    }
    Ok(worst)
}

/// Boundary Cauchy integral `∮_{∂Δ} h(ζ) dζ / (ζ − z)` from `M` uniform
/// samples `h(e^{2πik/M})`, by the trapezoidal rule.
pub fn cauchy_boundary<S: Scalar>(samples: &[Vec<C<S>>], z: C<S>) -> Result<Vec<C<S>>> {
    let margin = S::lit(0.05);
    if cabs(z) >= S::one() - margin {
        return Err(Error::Domain(format!(
            "|z| = {} is within {} of the boundary",
            cabs(z),
            margin
        )));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no boundary samples".into()));
    }
    let n = samples[0].len();
    let m = samples.len();
    let mut out = vec![czero::<S>(); n];
    for (k, h) in samples.iter().enumerate() {
        if h.len() != n {
            return Err(Error::InvalidInput("ragged boundary samples".into()));
        }
        let th = S::two_pi() * S::uz(k) / S::uz(m);
        let zeta = cplx(th.cos(), th.sin());
        // dζ = i ζ dθ
        let kern = cplx(S::zero(), S::one()) * zeta / (zeta - z);
        for (o, v) in out.iter_mut().zip(h) {
            *o += *v * kern;
        }
    }
    let scale = S::two_pi() / S::uz(m);
    Ok(out.into_iter().map(|v| v * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::creal;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn probes() -> Vec<Complex64> {
        (0..10)
            .map(|i| Complex64::from_polar(0.08 * i as f64 + 0.05, 0.7 + 2.1 * i as f64))
            .collect()
    }

    #[test]
    fn derivative_examples() {
        let zb2 = DiscMap::monomial(1, 2, 0, 0, 2, creal(1.0f64));
        let d = d_bar(&zb2);
        assert_eq!(d.coeff(0, 0, 1), creal(2.0));
        assert_eq!(d.max_abs_coeff(), 2.0);
        let z = DiscMap::monomial(1, 1, 0, 1, 0, creal(1.0f64));
        assert_eq!(d_bar(&z).max_abs_coeff(), 0.0);
        assert_eq!(d_z(&z).coeff(0, 0, 0), creal(1.0));
    }

    #[test]
    fn d_bar_of_psi1() {
        // ζ̄ − ζ²ζ̄³/3 ↦ 1 − ζ²ζ̄²
        let mut psi = DiscMap::<f64>::zeros(1, 3);
        psi.set(0, 0, 1, creal(1.0));
        psi.set(0, 2, 3, creal(-1.0 / 3.0));
        let d = d_bar(&psi);
        let mut expect = DiscMap::<f64>::zeros_bidegree(1, 3, 2);
        expect.set(0, 0, 0, creal(1.0));
        expect.set(0, 2, 2, creal(-1.0));
        assert!(d.sub(&expect).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn table_is_exact_right_inverse() {
        assert!(OperatorTable::new(14).right_inverse_defects().is_empty());
    }

    #[test]
    fn t_examples_against_quadrature() {
        let cases: Vec<(Box<dyn Fn(Complex64) -> Complex64>, Box<dyn Fn(Complex64) -> Complex64>)> = vec![
            (Box::new(|_| creal(1.0)), Box::new(|z: Complex64| z.conj())),
            (Box::new(|w: Complex64| w.conj()), Box::new(|z: Complex64| z.conj() * z.conj() / 2.0)),
            (Box::new(|w| w), Box::new(|z: Complex64| z * z.conj() - 1.0)),
        ];
        for (u, expect) in &cases {
            for z in probes() {
                let q = t_quadrature(|w| u(w), z, 8, 1e-12).unwrap();
                assert!((q - expect(z)).norm() < 1e-6 * expect(z).norm().max(1.0));
            }
        }
    }

    #[test]
    fn table_matches_quadrature() {
        let worst = validate_t_table(5, &probes()[..4], 1e-12).unwrap();
        assert!(worst < 1e-8, "worst {worst}");
    }

    #[test]
    fn cauchy_green_examples() {
        let one = DiscMap::monomial(1, 0, 0, 0, 0, creal(1.0f64));
        let t = cauchy_green(&one);
        assert_eq!(t.coeff(0, 0, 1), creal(1.0));
        let z = DiscMap::monomial(1, 1, 0, 1, 0, creal(1.0f64));
        let t = cauchy_green(&z);
        assert_eq!(t.coeff(0, 1, 1), creal(1.0));
        assert_eq!(t.coeff(0, 0, 0), creal(-1.0));
        assert!(d_bar(&t).sub(&z).max_abs_coeff() == 0.0);
    }

    fn boundary(m: usize, h: impl Fn(Complex64) -> Complex64) -> Vec<Vec<Complex64>> {
        (0..m)
            .map(|k| vec![h(Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))])
            .collect()
    }

    #[test]
    fn boundary_integral_examples() {
        let i = Complex64::new(0.0, 1.0);
        let v = cauchy_boundary(&boundary(64, |_| creal(1.0)), Complex64::new(0.0, 0.0)).unwrap();
        assert!((v[0] - 2.0 * PI * i).norm() < 1e-12);
        let v = cauchy_boundary(&boundary(64, |z| z.conj()), Complex64::new(0.3, 0.0)).unwrap();
        assert!(v[0].norm() < 1e-12);
        let v = cauchy_boundary(&boundary(64, |z| z), Complex64::new(0.5, 0.0)).unwrap();
        assert!((v[0] - PI * i).norm() < 1e-12);
        assert!(cauchy_boundary(&boundary(8, |z| z), Complex64::new(0.96, 0.0)).is_err());
    }

    #[test]
    fn boundary_integral_reproduces_holomorphic_monomials() {
        let z = Complex64::new(-0.2, 0.45);
        for k in 0..10u32 {
            let v = cauchy_boundary(&boundary(128, |w| w.powu(k)), z).unwrap();
            let expect = 2.0 * PI * Complex64::new(0.0, 1.0) * z.powu(k);
            assert!((v[0] - expect).norm() < 1e-10, "k={k}");
        }
    }
}
