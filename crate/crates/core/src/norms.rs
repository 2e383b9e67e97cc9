//! Discrete Lᵖ, Sobolev, sup and Hölder norms.
//!
//! Conventions: `‖u‖_{W^{1,p}} = ‖u‖_p + ‖u_ζ‖_p + ‖u_ζ̄‖_p`, and `W^{2,p}`
//! adds `‖u_ζζ‖_p + ‖u_ζζ̄‖_p + ‖u_ζ̄ζ̄‖_p`. Pointwise values in `ℂⁿ` are
//! measured with the Euclidean norm. Derivatives are exact (modal), the
//! integrals use the grid quadrature restricted to the nodes of the region.

use crate::basis::{DiscretizationSpec, GridField};
use crate::error::{Error, Result};
use crate::modal::{Discretization, ModalMap};
use crate::scalar::{cabs, Scalar, C};

/// Integration domain: the disc or one of the gluing pieces
/// `Δ₁ = {Re ζ > −τ}`, `Δ₂ = {Re ζ < τ}`, `Δ₁ ∩ Δ₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region<S: Scalar> {
    Disc,
    Half1(S),
    Half2(S),
    Overlap(S),
}

impl<S: Scalar> Region<S> {
    pub fn contains(&self, z: C<S>) -> bool {
        match *self {
            Region::Disc => true,
            Region::Half1(t) => z.re > -t,
            Region::Half2(t) => z.re < t,
            Region::Overlap(t) => z.re > -t && z.re < t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind<S: Scalar> {
    Lp,
    W1p,
    W2p,
    Sup,
    /// `C^{0,α}`: sup norm plus the Hölder seminorm (sampled, a lower bound).
    Holder(S),
}

/// `(∫_region |f|^p)^{1/p}` by grid quadrature.
pub fn lp_field<S: Scalar>(
    spec: &DiscretizationSpec<S>,
    f: &GridField<S>,
    p: S,
    region: Region<S>,
) -> Result<S> {
    let mut acc = S::zero();
    let mut hit = false;
    for idx in 0..f.num_nodes() {
        if !region.contains(spec.node(idx)) {
            continue;
        }
        hit = true;
        let v = f.pointwise_norm(idx);
        if v > S::zero() {
            acc += v.powf(p) * spec.weight(idx);
        }
    }
    if !hit {
        return Err(Error::Domain("region contains no grid nodes".into()));
    }
    Ok(acc.powf(S::one() / p))
}

/// Lᵖ norm of a modal map on the grid of `disc`.
pub fn lp<S: Scalar>(disc: &Discretization<S>, u: &ModalMap<S>, p: S, region: Region<S>) -> Result<S> {
    lp_field(disc.spec(), &disc.synthesize(u), p, region)
}

pub fn w1p<S: Scalar>(disc: &Discretization<S>, u: &ModalMap<S>, p: S, region: Region<S>) -> Result<S> {
    Ok(lp(disc, u, p, region)? + lp(disc, &disc.d_z(u), p, region)? + lp(disc, &disc.d_bar(u), p, region)?)
}

pub fn w2p<S: Scalar>(disc: &Discretization<S>, u: &ModalMap<S>, p: S, region: Region<S>) -> Result<S> {
    let uz = disc.d_z(u);
    let ub = disc.d_bar(u);
    Ok(w1p(disc, u, p, region)?
        + lp(disc, &disc.d_z(&uz), p, region)?
        + lp(disc, &disc.d_bar(&uz), p, region)?
        + lp(disc, &disc.d_bar(&ub), p, region)?)
}

/// Samples on the 4× refined grid lying in `region`.
fn dense_samples<S: Scalar>(
    disc: &Discretization<S>,
    u: &ModalMap<S>,
    region: Region<S>,
) -> Result<Vec<(C<S>, Vec<C<S>>)>> {
    let fine = disc.spec().refined();
    let pts: Vec<(C<S>, Vec<C<S>>)> = fine
        .nodes()
        .into_iter()
        .filter(|z| region.contains(*z))
        .map(|z| (z, disc.eval(u, z)))
        .collect();
    if pts.is_empty() {
        return Err(Error::Domain("region contains no sample points".into()));
    }
    Ok(pts)
}

fn vnorm<S: Scalar>(v: &[C<S>]) -> S {
    v.iter().fold(S::zero(), |acc, c| acc + c.norm_sqr()).sqrt()
}

/// Sampled sup norm.
pub fn sup<S: Scalar>(disc: &Discretization<S>, u: &ModalMap<S>, region: Region<S>) -> Result<S> {
    Ok(dense_samples(disc, u, region)?
        .iter()
        .map(|(_, v)| vnorm(v))
        .fold(S::zero(), |m, v| if v > m { v } else { m }))
}

/// Sampled `C^{0,α}` norm: sup plus the largest Hölder quotient over all
/// pairs of sample points.
pub fn holder<S: Scalar>(
    disc: &Discretization<S>,
    u: &ModalMap<S>,
    alpha: S,
    region: Region<S>,
) -> Result<S> {
    if !(alpha > S::zero() && alpha < S::one()) {
        return Err(Error::InvalidInput(format!("Hölder exponent {alpha} not in (0, 1)")));
    }
    let pts = dense_samples(disc, u, region)?;
    let mut s = S::zero();
    let mut q = S::zero();
    for (i, (zi, vi)) in pts.iter().enumerate() {
        let ni = vnorm(vi);
        if ni > s {
            s = ni;
        }
        for (zj, vj) in &pts[i + 1..] {
            let dist = cabs(*zi - *zj);
            if dist == S::zero() {
                continue;
            }
            let diff: Vec<C<S>> = vi.iter().zip(vj).map(|(a, b)| *a - *b).collect();
            let r = vnorm(&diff) / dist.powf(alpha);
            if r > q {
                q = r;
            }
        }
    }
    Ok(s + q)
}

/// Dispatch on [`NormKind`].
pub fn norm<S: Scalar>(
    disc: &Discretization<S>,
    u: &ModalMap<S>,
    kind: NormKind<S>,
    p: S,
    region: Region<S>,
) -> Result<S> {
    match kind {
        NormKind::Lp => lp(disc, u, p, region),
        NormKind::W1p => w1p(disc, u, p, region),
        NormKind::W2p => w2p(disc, u, p, region),
        NormKind::Sup => sup(disc, u, region),
        NormKind::Holder(a) => holder(disc, u, a, region),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DiscMap;
    use crate::scalar::creal;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn setup() -> (Discretization<f64>, ModalMap<f64>, ModalMap<f64>) {
        let disc = Discretization::with_degree(8);
        let one = disc.from_disc_map(&DiscMap::monomial(1, 8, 0, 0, 0, creal(1.0))).resized(&disc.u_space());
        let z = disc.from_disc_map(&DiscMap::monomial(1, 8, 0, 1, 0, creal(1.0))).resized(&disc.u_space());
        (disc, one, z)
    }

    #[test]
    fn constant_and_zeta() {
        let (disc, one, z) = setup();
        for p in [2.0, 4.0, 7.5] {
            let n = lp(&disc, &one, p, Region::Disc).unwrap();
            assert!((n - PI.powf(1.0 / p)).abs() < 1e-12);
        }
        let n = lp(&disc, &z, 2.0, Region::Disc).unwrap();
        assert!((n - (PI / 2.0).sqrt()).abs() < 1e-12);
        let w = w1p(&disc, &z, 4.0, Region::Disc).unwrap();
        let expect = lp(&disc, &z, 4.0, Region::Disc).unwrap() + PI.powf(0.25);
        assert!((w - expect).abs() < 1e-12);
        // ∫|ζ|⁴ = π/3
        let n4 = lp(&disc, &z, 4.0, Region::Disc).unwrap();
        assert!((n4 - (PI / 3.0).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn restriction_and_homogeneity() {
        let (disc, _, z) = setup();
        let full = lp(&disc, &z, 4.0, Region::Disc).unwrap();
        for r in [Region::Half1(0.3), Region::Half2(0.3), Region::Overlap(0.3)] {
            assert!(lp(&disc, &z, 4.0, r).unwrap() <= full);
        }
        let lam = Complex64::new(-1.5, 2.0);
        let scaled = w2p(&disc, &z.scale(lam), 4.0, Region::Disc).unwrap();
        let base = w2p(&disc, &z, 4.0, Region::Disc).unwrap();
        assert!((scaled - lam.norm() * base).abs() < 1e-14 * scaled);
        assert!(matches!(lp(&disc, &z, 4.0, Region::Overlap(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn sup_and_holder() {
        let (disc, _, z) = setup();
        let s = sup(&disc, &z, Region::Disc).unwrap();
        assert!(s < 1.0 && s > 0.99);
        // ζ is Lipschitz with constant 1, so the α-quotient is at most 2^{1−α}
        let h = holder(&disc, &z, 0.5, Region::Disc).unwrap();
        assert!(h > s && h <= s + 2f64.powf(0.5) + 1e-12);
    }
}
