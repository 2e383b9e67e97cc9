//! Gluing two J-holomorphic half-discs.
//!
//! `Δ₁ = Δ ∩ {Re ζ > −τ}`, `Δ₂ = Δ ∩ {Re ζ < τ}`. The pre-glued map
//! `φ = χu₁ + (1−χ)u₂` uses a cutoff with `χ = 1` on `Δ₁∖Δ₂` and `χ = 0` on
//! `Δ₂∖Δ₁`; its projection onto the unknown space is then corrected by
//! [`crate::newton::solve`].

use crate::basis::GridField;
use crate::dbar::structure_field;
use crate::error::{Error, Result};
use crate::modal::{Discretization, ModalMap};
use crate::newton::{solve, NewtonConfig, NewtonReport, SolveError};
use crate::norms::{self, Region};
use crate::rightinv::{kernel_dim, KERNEL_THRESHOLD};
use crate::scalar::{creal, Scalar, C};
use crate::structure::StructureSpec;
use serde::Serialize;

/// Quintic smoothstep cutoff in `Re ζ`, rising from 0 at `−τ` to 1 at `τ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cutoff<S: Scalar> {
    pub tau: S,
}

fn smoothstep<S: Scalar>(t: S) -> (S, S, S) {
    if t <= S::zero() {
        return (S::zero(), S::zero(), S::zero());
    }
    if t >= S::one() {
        return (S::one(), S::zero(), S::zero());
    }
    let t2 = t * t;
    let v = t2 * t * (S::lit(10.0) - S::lit(15.0) * t + S::lit(6.0) * t2);
    let d1 = S::lit(30.0) * t2 * (S::one() - t) * (S::one() - t);
    let d2 = S::lit(60.0) * t * (S::one() - t) * (S::one() - S::lit(2.0) * t);
    (v, d1, d2)
}

impl<S: Scalar> Cutoff<S> {
    pub fn new(tau: S) -> Result<Self> {
        if !(tau > S::zero() && tau < S::one()) {
            return Err(Error::InvalidInput(format!("overlap half-width τ = {tau} not in (0, 1)")));
        }
        Ok(Self { tau })
    }

    /// `χ`, `dχ/dx` and `d²χ/dx²` at `x = Re ζ`.
    pub fn eval(&self, x: S) -> (S, S, S) {
        let w = S::lit(2.0) * self.tau;
        let (v, d1, d2) = smoothstep((x + self.tau) / w);
        (v, d1 / w, d2 / (w * w))
    }

    pub fn value(&self, z: C<S>) -> S {
        self.eval(z.re).0
    }

    /// `χ_ζ = χ_ζ̄ = χ'/2`.
    pub fn d_zeta(&self, z: C<S>) -> S {
        self.eval(z.re).1 * S::lit(0.5)
    }

    /// `‖χ‖_{C²} = sup|χ| + sup|χ'| + sup|χ''|`, by dense sampling.
    pub fn c1(&self) -> S {
        let m = 20_000;
        let (mut s0, mut s1, mut s2) = (S::zero(), S::zero(), S::zero());
        for i in 0..=m {
            let x = -S::one() + S::lit(2.0) * S::uz(i) / S::uz(m);
            let (v, d1, d2) = self.eval(x);
            s0 = s0.max(v.abs());
            s1 = s1.max(d1.abs());
            s2 = s2.max(d2.abs());
        }
        s0 + s1 + s2
    }
}

/// Which piece of the disc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Half {
    /// `Re ζ > −τ`.
    One,
    /// `Re ζ < τ`.
    Two,
}

/// A map on one half, carried by a polynomial representative on `Δ`.
#[derive(Clone, Debug)]
pub struct HalfDiscMap<S: Scalar> {
    pub half: Half,
    pub map: ModalMap<S>,
    pub provenance: String,
}

impl<S: Scalar> HalfDiscMap<S> {
    pub fn new(half: Half, map: ModalMap<S>, provenance: impl Into<String>) -> Self {
        Self { half, map, provenance: provenance.into() }
    }

    pub fn region(&self, tau: S) -> Region<S> {
        match self.half {
            Half::One => Region::Half1(tau),
            Half::Two => Region::Half2(tau),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GluingConfig<S: Scalar> {
    pub tau: S,
    pub eps: S,
    /// Radius of the `W^{2,p}` ball; by default twice the larger half norm.
    pub m: Option<S>,
    /// Compact-embedding slack `δ₁`.
    pub delta1: S,
    pub newton: NewtonConfig<S>,
    /// Spot-check regularity of the pre-glued map by its kernel dimension.
    pub check_regularity: bool,
}

impl<S: Scalar> Default for GluingConfig<S> {
    fn default() -> Self {
        Self {
            tau: S::lit(0.3),
            eps: S::lit(0.05),
            m: None,
            delta1: S::one(),
            newton: NewtonConfig::default(),
            check_regularity: false,
        }
    }
}

/// Pre-glued map with diagnostics.
#[derive(Clone, Debug)]
pub struct Preglue<S: Scalar> {
    /// Projection of the blend onto the unknown space.
    pub phi: ModalMap<S>,
    /// `L²` norm of the part of the blend lost by the projection.
    pub projection_tail: S,
    /// `‖u₁ − u₂‖_{W^{1,p}(Δ₁∩Δ₂)}`.
    pub mismatch: S,
    /// Pointwise `ℱ` of the exact blend at the grid nodes.
    pub residual: GridField<S>,
    /// Largest `|ℱ(blend)|` at nodes with `|Re ζ| > τ`.
    pub support_residual: S,
    /// The two parts of `ℱ(blend)`: `I` (cutoff derivatives) and `II`.
    pub term_i: GridField<S>,
    pub term_ii: GridField<S>,
}

fn check_pair<S: Scalar>(u1: &HalfDiscMap<S>, u2: &HalfDiscMap<S>) -> Result<()> {
    if u1.half != Half::One || u2.half != Half::Two {
        return Err(Error::Coverage(format!(
            "expected maps on half 1 and half 2, got {:?} and {:?}",
            u1.half, u2.half
        )));
    }
    if u1.map.n() != u2.map.n() || u1.map.space() != u2.map.space() {
        return Err(Error::Coverage("half-disc maps live in different spaces".into()));
    }
    Ok(())
}

/// `φ = χu₁ + (1−χ)u₂` with the residual split.
pub fn preglue<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    u1: &HalfDiscMap<S>,
    u2: &HalfDiscMap<S>,
    chi: &Cutoff<S>,
    p: S,
) -> Result<Preglue<S>> {
    check_pair(u1, u2)?;
    if u1.map.space() != &disc.u_space() {
        return Err(Error::InvalidInput("half-disc maps must live in the unknown space".into()));
    }
    let n = u1.map.n();
    let tau = chi.tau;
    let spec = disc.spec();
    let nodes = spec.num_nodes();
    let g = |m: &ModalMap<S>| (disc.synthesize(m), disc.synthesize(&disc.d_z(m)), disc.synthesize(&disc.d_bar(m)));
    let (v1, v1z, v1b) = g(&u1.map);
    let (v2, v2z, v2b) = g(&u2.map);
    let mut blend = GridField::zeros(n, nodes);
    let mut bz = GridField::zeros(n, nodes);
    let mut bb = GridField::zeros(n, nodes);
    let mut jump = GridField::zeros(n, nodes);
    for idx in 0..nodes {
        let z = spec.node(idx);
        let (x, dx) = (chi.value(z), chi.d_zeta(z));
        for i in 0..n {
            let d = v1.get(i, idx) - v2.get(i, idx);
            let w = |f: &GridField<S>, h: &GridField<S>| f.get(i, idx) * x + h.get(i, idx) * (S::one() - x);
            blend.set(i, idx, w(&v1, &v2));
            bz.set(i, idx, w(&v1z, &v2z) + d * dx);
            bb.set(i, idx, w(&v1b, &v2b) + d * dx);
            jump.set(i, idx, d * dx);
        }
    }
    let am = structure_field(a, &blend)?;
    let mut residual = GridField::zeros(n, nodes);
    let mut term_i = GridField::zeros(n, nodes);
    let mut support = S::zero();
    for idx in 0..nodes {
        for i in 0..n {
            let mut r = bb.get(i, idx);
            let mut t = jump.get(i, idx);
            for k in 0..n {
                r += am[idx][(i, k)] * bz.get(k, idx).conj();
                t += am[idx][(i, k)] * jump.get(k, idx).conj();
            }
            residual.set(i, idx, r);
            term_i.set(i, idx, t);
        }
        if spec.node(idx).re.abs() > tau {
            support = support.max(residual.pointwise_norm(idx));
        }
    }
    let term_ii = residual.sub(&term_i);
    let phi = disc.analyze(&blend, disc.u_space())?;
    let projection_tail = disc.l2_norm_field(&blend.sub(&disc.synthesize(&phi)));
    let mismatch = norms::w1p(disc, &u1.map.sub(&u2.map), p, Region::Overlap(tau))?;
    Ok(Preglue { phi, projection_tail, mismatch, residual, support_residual: support, term_i, term_ii })
}

#[derive(Clone, Debug, Serialize)]
pub struct GlueReport<S: Scalar> {
    pub config: GluingConfig<S>,
    pub c1: S,
    pub c2: S,
    pub c3: S,
    pub c0: S,
    pub m: S,
    pub delta2: S,
    pub delta0: S,
    pub mismatch: S,
    /// `mismatch < δ₀`; otherwise the run is flagged.
    pub mismatch_ok: bool,
    pub term_i: S,
    pub term_ii: S,
    pub preglue_residual: S,
    pub support_residual: S,
    pub projection_tail: S,
    pub phi_w2p: S,
    /// `‖φ‖_{W^{2,p}} < M + 3c₁·mismatch`.
    pub phi_w2p_ok: bool,
    pub kernel_dim: Option<usize>,
    pub newton: NewtonReport<S>,
    /// `‖u − u_j‖_{W^{1,p}(Δ_j)}`.
    pub distances: [S; 2],
    /// `‖φ − u_j‖_{W^{1,p}(Δ_j)}`.
    pub phi_distances: [S; 2],
    /// `‖u − φ‖_{W^{1,p}(Δ)}`.
    pub correction: S,
    /// Triangle chain `‖u−u_j‖ ≤ ‖u−φ‖ + ‖φ−u_j‖`, `‖φ−u_j‖ ≤ (1+c₁)·mismatch`.
    pub triangle_ok: bool,
    pub within_eps: bool,
}

impl<S: Scalar> GlueReport<S> {
    pub fn solution(&self) -> &ModalMap<S> {
        self.newton.solution()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GlueError<S: Scalar> {
    #[error("{0}")]
    Numerical(#[from] Error),
    #[error("Newton correction of the pre-glued map diverged")]
    Diverged(Box<NewtonReport<S>>),
}

impl<S: Scalar> From<SolveError<S>> for GlueError<S> {
    fn from(e: SolveError<S>) -> Self {
        match e {
            SolveError::Numerical(e) => GlueError::Numerical(e),
            SolveError::Diverged(r) => GlueError::Diverged(r),
        }
    }
}

fn min_of<S: Scalar>(v: &[S]) -> S {
    v.iter().copied().fold(S::max_value().unwrap_or_else(|| S::lit(f64::MAX)), |m, x| if x < m { x } else { m })
}

/// Glues `u₁` and `u₂` into one J-holomorphic disc.
pub fn glue<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    u1: &HalfDiscMap<S>,
    u2: &HalfDiscMap<S>,
    cfg: &GluingConfig<S>,
) -> Result<GlueReport<S>, GlueError<S>> {
    cfg.newton.validate()?;
    let chi = Cutoff::new(cfg.tau)?;
    let p = cfg.newton.p;
    let tau = cfg.tau;
    let c1 = chi.c1();
    let pre = preglue(disc, a, u1, u2, &chi, p)?;
    let lp = |f: &GridField<S>| norms::lp_field(disc.spec(), f, p, Region::Disc);
    let (term_i, term_ii, total) = (lp(&pre.term_i)?, lp(&pre.term_ii)?, lp(&pre.residual)?);
    let (c2, c3) = if pre.mismatch > S::zero() {
        (term_i / pre.mismatch, term_ii / pre.mismatch)
    } else {
        (S::zero(), S::zero())
    };
    let m = match cfg.m {
        Some(m) => m,
        None => {
            let n1 = norms::w2p(disc, &u1.map, p, u1.region(tau))?;
            let n2 = norms::w2p(disc, &u2.map, p, u2.region(tau))?;
            S::lit(2.0) * n1.max(n2)
        }
    };
    let phi_w2p = norms::w2p(disc, &pre.phi, p, Region::Disc)?;
    let kernel = if cfg.check_regularity {
        Some(kernel_dim(disc, a, &pre.phi, S::lit(KERNEL_THRESHOLD))?.dim)
    } else {
        None
    };
    let newton = solve(disc, a, &pre.phi, &cfg.newton)?;
    let c0 = newton.c0;
    let delta2 = newton.delta;
    let c23 = c2 + c3;
    let mut candidates = vec![cfg.delta1 / (S::lit(3.0) * c1), cfg.eps / (S::lit(2.0) * (S::one() + c1))];
    if c23 > S::zero() {
        candidates.push(delta2 / c23);
        candidates.push(cfg.eps / (S::lit(4.0) * c0 * c23));
    }
    let delta0 = min_of(&candidates);
    let u = newton.solution();
    let correction = norms::w1p(disc, &u.sub(&pre.phi), p, Region::Disc)?;
    let mut distances = [S::zero(); 2];
    let mut phi_distances = [S::zero(); 2];
    let mut triangle_ok = true;
    let slack = S::lit(1e-10);
    for (j, h) in [u1, u2].into_iter().enumerate() {
        let r = h.region(tau);
        distances[j] = norms::w1p(disc, &u.sub(&h.map), p, r)?;
        phi_distances[j] = norms::w1p(disc, &pre.phi.sub(&h.map), p, r)?;
        triangle_ok &= distances[j] <= correction + phi_distances[j] + slack;
        triangle_ok &= phi_distances[j] <= (S::one() + c1) * pre.mismatch + pre.projection_tail.sqrt() + slack;
    }
    let within_eps = newton.converged && distances.iter().all(|&d| d < cfg.eps);
    Ok(GlueReport {
        config: cfg.clone(),
        c1,
        c2,
        c3,
        c0,
        m,
        delta2,
        delta0,
        mismatch: pre.mismatch,
        mismatch_ok: pre.mismatch < delta0,
        term_i,
        term_ii,
        preglue_residual: total,
        support_residual: pre.support_residual,
        projection_tail: pre.projection_tail,
        phi_w2p,
        phi_w2p_ok: phi_w2p < m + S::lit(3.0) * c1 * pre.mismatch,
        kernel_dim: kernel,
        newton,
        distances,
        phi_distances,
        correction,
        triangle_ok,
        within_eps,
    })
}

/// Halves of two global maps.
pub fn halves<S: Scalar>(u1: &ModalMap<S>, u2: &ModalMap<S>, provenance: &str) -> (HalfDiscMap<S>, HalfDiscMap<S>) {
    (
        HalfDiscMap::new(Half::One, u1.clone(), format!("{provenance}: half 1")),
        HalfDiscMap::new(Half::Two, u2.clone(), format!("{provenance}: half 2")),
    )
}

/// Constant map `c` in every component (used for offsets between discs).
pub fn constant_map<S: Scalar>(disc: &Discretization<S>, n: usize, c: C<S>) -> ModalMap<S> {
    let mut m = ModalMap::zeros(n, disc.u_space());
    // the constant 1 has coefficient √π in the orthonormal basis
    let s = S::pi().sqrt();
    for a in 0..n {
        m.set(a, 0, 0, c * creal(s));
    }
    m
}
