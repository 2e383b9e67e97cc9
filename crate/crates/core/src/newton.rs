//! Newton–Picard correction `x_{k+1} = x_k − Q_φ ℱ(x_k)` with `Q_φ` frozen
//! at the initial map, plus the constants `c₀`, `c`, `η`, `δ` of the
//! existence statement measured on the discretization.

use crate::dbar::{apply_f, linearize};
use crate::error::{Error, Result};
use crate::modal::{Discretization, ModalMap};
use crate::norms::{self, Region};
use crate::rightinv::{op_norm, right_inverse, RightInverse, RightInverseOptions};
use crate::scalar::{creal, Scalar, C};
use crate::structure::StructureSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, Serialize)]
pub struct NewtonConfig<S: Scalar> {
    pub p: S,
    pub tol: S,
    pub maxiter: usize,
    pub lipschitz_probes: usize,
    /// Random probes for the `‖Q_φ‖` estimate.
    pub norm_probes: usize,
    pub seed: u64,
    /// Kernel threshold for the stabilizer, relative to `σ_max`.
    pub threshold: S,
    /// Largest accepted projection tail relative to `‖x‖_{L²}`.
    pub tail_tol: S,
    /// Rebuild `Q` at every iterate (full Newton). Off by default.
    pub refresh_q: bool,
}

impl<S: Scalar> Default for NewtonConfig<S> {
    fn default() -> Self {
        Self {
            p: S::lit(4.0),
            tol: S::lit(1e-9),
            maxiter: 50,
            lipschitz_probes: 8,
            norm_probes: 8,
            seed: 0,
            threshold: S::lit(crate::rightinv::KERNEL_THRESHOLD),
            tail_tol: S::lit(1e-4),
            refresh_q: false,
        }
    }
}

impl<S: Scalar> NewtonConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > S::lit(2.0)) {
            return Err(Error::InvalidInput(format!("p = {} must exceed 2", self.p)));
        }
        if !(self.tol > S::zero()) {
            return Err(Error::InvalidInput(format!("tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonReport<S: Scalar> {
    /// `max(‖dφ‖_{L^p}, ‖Q_φ‖)`.
    pub c0: S,
    /// `‖φ_ζ‖_{L^p} + ‖φ_ζ̄‖_{L^p}`.
    pub dphi_norm: S,
    pub q_norm: S,
    /// Lipschitz constant of `φ ↦ d_φℱ`.
    pub c: S,
    pub eta: S,
    pub delta: S,
    pub initial_residual: S,
    /// `‖ℱ(x_k)‖_{L^p}` for `k = 0, 1, …`.
    pub residuals: Vec<S>,
    /// Projection tails of the nonlinear term, aligned with `residuals`.
    pub tails: Vec<S>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖u − φ‖_{W^{1,p}}`.
    pub distance: S,
    /// `2c₀‖ℱ(φ)‖_{L^p}`.
    pub bound: S,
    pub bound_ok: bool,
    /// `‖ℱ(φ)‖ < δ`; when false the run is outside the guaranteed regime.
    pub hypothesis_ok: bool,
    pub stabilizer_rank: usize,
    pub uses_substitution: bool,
    #[serde(skip)]
    pub u: Option<ModalMap<S>>,
}

impl<S: Scalar> NewtonReport<S> {
    /// Largest ratio of consecutive residuals.
    pub fn max_contraction(&self) -> S {
        self.residuals
            .windows(2)
            .filter(|w| w[0] > S::zero())
            .map(|w| w[1] / w[0])
            .fold(S::zero(), |m, r| if r > m { r } else { m })
    }

    pub fn solution(&self) -> &ModalMap<S> {
        self.u.as_ref().expect("report carries the final iterate")
    }
}

#[derive(Debug, Error)]
pub enum SolveError<S: Scalar> {
    #[error("{0}")]
    Numerical(#[from] Error),
    #[error("Newton iteration diverged after {} steps", .0.iterations)]
    Diverged(Box<NewtonReport<S>>),
}

impl<S: Scalar> SolveError<S> {
    pub fn report(&self) -> Option<&NewtonReport<S>> {
        match self {
            SolveError::Diverged(r) => Some(r),
            SolveError::Numerical(_) => None,
        }
    }
}

/// Random map in the unknown space with coefficients in `[−1, 1]²`.
pub fn random_unknown<S: Scalar>(disc: &Discretization<S>, n: usize, rng: &mut impl Rng) -> ModalMap<S> {
    let space = disc.u_space();
    let coeffs = (0..n * space.dim())
        .map(|_| C::new(S::lit(rng.gen_range(-1.0..1.0)), S::lit(rng.gen_range(-1.0..1.0))))
        .collect();
    ModalMap::from_coeffs(n, space, coeffs)
}

fn lp<S: Scalar>(disc: &Discretization<S>, u: &ModalMap<S>, p: S) -> Result<S> {
    norms::lp(disc, u, p, Region::Disc)
}

fn w1p<S: Scalar>(disc: &Discretization<S>, u: &ModalMap<S>, p: S) -> Result<S> {
    norms::w1p(disc, u, p, Region::Disc)
}

/// Sampled Lipschitz constant `c` with
/// `‖d_φ̃ℱ − d_φℱ‖ ≤ c‖φ̃ − φ‖_{W^{1,p}}`, times a safety factor 2.
pub fn estimate_lipschitz<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
    probes: usize,
    p: S,
    seed: u64,
) -> Result<S> {
    if probes == 0 {
        return Err(Error::InvalidInput("at least one Lipschitz probe required".into()));
    }
    if a.is_standard() {
        return Ok(S::zero());
    }
    let n = a.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = linearize(disc, a, phi)?;
    let mut best = S::zero();
    for _ in 0..probes {
        for dist in [S::lit(0.1), S::lit(0.01)] {
            let dir = random_unknown(disc, n, &mut rng);
            let dir = dir.scale(creal(dist / w1p(disc, &dir, p)?));
            let other = linearize(disc, a, &phi.add(&dir))?;
            let h = random_unknown(disc, n, &mut rng);
            let diff = other.zeroth(disc, &h).sub(&base.zeroth(disc, &h));
            let r = lp(disc, &diff, p)? / (dist * w1p(disc, &h, p)?);
            if r > best {
                best = r;
            }
        }
    }
    Ok(S::lit(2.0) * best)
}

/// Constants of the existence statement at `φ`.
struct Constants<S: Scalar> {
    dphi: S,
    q_norm: S,
    c0: S,
    c: S,
    eta: S,
    delta: S,
}

fn constants<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
    q: &RightInverse<'_, S>,
    cfg: &NewtonConfig<S>,
) -> Result<Constants<S>> {
    let p = cfg.p;
    let dphi = lp(disc, &disc.d_z(phi), p)? + lp(disc, &disc.d_bar(phi), p)?;
    let q_norm = op_norm(q, p, cfg.norm_probes, cfg.seed)?.value;
    let c0 = if dphi > q_norm { dphi } else { q_norm };
    let c = estimate_lipschitz(disc, a, phi, cfg.lipschitz_probes, p, cfg.seed.wrapping_add(1))?;
    let two = S::lit(2.0);
    let eta = if c > S::zero() {
        let v = S::one() / (two * c * c0);
        if v < S::one() {
            v
        } else {
            S::one()
        }
    } else {
        S::one()
    };
    Ok(Constants { dphi, q_norm, c0, c, eta, delta: eta / (S::lit(4.0) * c0) })
}

/// Newton–Picard solve of `ℱ(u) = 0` starting at `φ`.
pub fn solve<S: Scalar>(
    disc: &Discretization<S>,
    a: &StructureSpec<S>,
    phi: &ModalMap<S>,
    cfg: &NewtonConfig<S>,
) -> Result<NewtonReport<S>, SolveError<S>> {
    cfg.validate()?;
    if !phi.is_finite() {
        return Err(Error::InvalidInput("initial map has non-finite coefficients".into()).into());
    }
    let opts = RightInverseOptions { threshold: cfg.threshold, ..Default::default() };
    let q = right_inverse(disc, a, phi, &opts)?;
    let k = constants(disc, a, phi, &q, cfg)?;
    let p = cfg.p;

    let mut x = phi.clone();
    let mut res = apply_f(disc, a, &x)?;
    let mut report = NewtonReport {
        c0: k.c0,
        dphi_norm: k.dphi,
        q_norm: k.q_norm,
        c: k.c,
        eta: k.eta,
        delta: k.delta,
        initial_residual: S::zero(),
        residuals: vec![],
        tails: vec![],
        iterations: 0,
        converged: false,
        distance: S::zero(),
        bound: S::zero(),
        bound_ok: false,
        hypothesis_ok: false,
        stabilizer_rank: q.stabilizer.rank,
        uses_substitution: q.uses_substitution(),
        u: None,
    };
    let mut r = lp(disc, &res.value, p)?;
    report.initial_residual = r;
    report.residuals.push(r);
    report.tails.push(res.tail);
    report.bound = S::lit(2.0) * k.c0 * r;
    report.hypothesis_ok = r < k.delta;

    let mut growth = 0;
    let mut refreshed: Option<RightInverse<'_, S>> = None;
    while !(r < cfg.tol) {
        if report.iterations >= cfg.maxiter {
            break;
        }
        let qk = refreshed.as_ref().unwrap_or(&q);
        x = x.sub(&qk.apply(&res.value));
        report.iterations += 1;
        res = match apply_f(disc, a, &x) {
            Ok(v) => v,
            Err(e) if matches!(e, Error::Domain(_)) => {
                // the iterate left the chart: report as divergence
                report.u = Some(x);
                return Err(SolveError::Diverged(Box::new(report)));
            }
            Err(e) => return Err(e.into()),
        };
        let xl2 = x.l2_norm();
        if res.tail > cfg.tail_tol * (if xl2 > S::one() { xl2 } else { S::one() }) {
            return Err(Error::Discretization(format!(
                "projection tail {:.3e} of the nonlinear term exceeds {:.1e}·‖u‖; increase the degree",
                res.tail.as_f64(),
                cfg.tail_tol.as_f64()
            ))
            .into());
        }
        let rn = lp(disc, &res.value, p)?;
        report.residuals.push(rn);
        report.tails.push(res.tail);
        if !rn.is_finite() {
            report.u = Some(x);
            return Err(SolveError::Diverged(Box::new(report)));
        }
        growth = if rn > r { growth + 1 } else { 0 };
        r = rn;
        if growth >= 3 {
            report.u = Some(x);
            return Err(SolveError::Diverged(Box::new(report)));
        }
        if cfg.refresh_q && !(r < cfg.tol) {
            refreshed = Some(right_inverse(disc, a, &x, &opts)?);
        }
    }
    report.converged = r < cfg.tol;
    report.distance = w1p(disc, &x.sub(phi), p)?;
    report.bound_ok = report.converged && report.distance <= report.bound;
    report.u = Some(x);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DiscMap;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn map(disc: &Discretization<f64>, n: usize, terms: &[(usize, usize, usize, Complex64)]) -> ModalMap<f64> {
        let mut m = DiscMap::zeros(n, 3);
        for &(a, j, k, v) in terms {
            m.set(a, j, k, v);
        }
        disc.from_disc_map(&m).resized(&disc.u_space())
    }

    #[test]
    fn standard_case_one_step() {
        let disc = Discretization::<f64>::with_degree(8);
        let phi = map(&disc, 1, &[(0, 1, 0, c(1.0, 0.0)), (0, 0, 2, c(0.05, 0.0))]);
        let rep = solve(&disc, &StructureSpec::standard(1), &phi, &NewtonConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.residuals[1] < 1e-10);
        assert!(rep.bound_ok);
        assert_eq!(rep.c, 0.0);
        // u = φ − T(φ_ζ̄)
        let expect = phi.sub(&disc.cauchy_green(&disc.d_bar(&phi)));
        assert!(rep.solution().sub(&expect).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn holomorphic_start_takes_no_steps() {
        let disc = Discretization::<f64>::with_degree(10);
        let phi = map(&disc, 3, &[(0, 1, 0, c(1.0, 0.0))]);
        let rep = solve(&disc, &StructureSpec::example_r6(), &phi, &NewtonConfig::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.initial_residual, 0.0);
        assert!(rep.converged && rep.bound_ok);
    }

    #[test]
    fn scalar_structure_converges_with_bound() {
        let disc = Discretization::<f64>::with_degree(8);
        let a = StructureSpec::scalar_zbar(0.1);
        let phi = map(&disc, 1, &[(0, 1, 0, c(1.0, 0.0)), (0, 1, 2, c(0.01, -0.02))]);
        let rep = solve(&disc, &a, &phi, &NewtonConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.bound_ok, "{} > {}", rep.distance, rep.bound);
        assert!(rep.max_contraction() <= 0.75);
        let u = rep.solution();
        assert!(lp(&disc, &apply_f(&disc, &a, u).unwrap().value, 4.0).unwrap() < 1e-9);
    }

    #[test]
    fn lipschitz_reproducible_across_seeds() {
        let disc = Discretization::<f64>::with_degree(8);
        let a = StructureSpec::scalar_zbar(0.1);
        let phi = map(&disc, 1, &[(0, 1, 0, c(1.0, 0.0))]);
        let vals: Vec<f64> = (0..3).map(|s| estimate_lipschitz(&disc, &a, &phi, 8, 4.0, s).unwrap()).collect();
        let (lo, hi) = vals.iter().fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo > 0.0 && hi.is_finite());
        assert!(hi / lo < 1.3, "{vals:?}");
        assert_eq!(estimate_lipschitz(&disc, &StructureSpec::standard(1), &phi, 4, 4.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn bad_config_rejected() {
        let disc = Discretization::<f64>::with_degree(4);
        let phi = map(&disc, 1, &[]);
        let cfg = NewtonConfig { p: 2.0, ..Default::default() };
        assert!(matches!(
            solve(&disc, &StructureSpec::standard(1), &phi, &cfg),
            Err(SolveError::Numerical(Error::InvalidInput(_)))
        ));
    }
}
