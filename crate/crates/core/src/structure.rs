//! Almost complex structures on ℝ²ⁿ = ℂⁿ through their complex matrix `A`.
//!
//! Real vectors are laid out as `(x₁, y₁, …, xₙ, yₙ)` with `z_k = x_k + i y_k`,
//! so the standard structure `J_st` is block-diagonal `[[0, −1], [1, 0]]`. For
//! a structure `J` with `J + J_st` invertible, `X = (J_st + J)⁻¹(J − J_st)` is
//! anti-linear, and `A` is the complex matrix of the complex-linear map
//! `v ↦ X(v̄)`. A map `u` is `J`-holomorphic iff `u_ζ̄ + A(u)·conj(u_ζ) = 0`.

use crate::error::{Error, Result};
use crate::scalar::{cabs, cplx, creal, czero, Scalar, C};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Small complex matrix (`n × n`).
pub type CMat<S> = DMatrix<C<S>>;

/// One term `c · Π z_j^{pz_j} z̄_j^{pzb_j}` of a polynomial entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Term<S: Scalar> {
    pub coeff: C<S>,
    pub powers_z: Vec<u32>,
    pub powers_zbar: Vec<u32>,
}

/// Polynomial entry `A[row][col]` (0-based indices).
#[derive(Clone, Debug, PartialEq)]
pub struct Entry<S: Scalar> {
    pub row: usize,
    pub col: usize,
    pub terms: Vec<Term<S>>,
}

type MatFn<S> = dyn Fn(&[C<S>]) -> Result<CMat<S>> + Send + Sync;
type DerivFn<S> = dyn Fn(&[C<S>]) -> Result<(Vec<CMat<S>>, Vec<CMat<S>>)> + Send + Sync;

/// Pointwise evaluator of `A` with optional analytic derivatives; missing
/// derivatives are taken by central differences with step `1e-5`.
#[derive(Clone)]
pub struct RationalTable<S: Scalar> {
    pub eval: Arc<MatFn<S>>,
    pub derivs: Option<Arc<DerivFn<S>>>,
}

#[derive(Clone)]
pub enum StructureKind<S: Scalar> {
    Standard,
    Polynomial(Vec<Entry<S>>),
    /// The ℝ⁶ example; `s21`, `s31` scale its (2,1) and (3,1) entries
    /// (both 1 for the example itself).
    ExampleR6 { s21: S, s31: S },
    RationalTable(RationalTable<S>),
}

impl<S: Scalar> fmt::Debug for StructureKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureKind::Standard => write!(f, "Standard"),
            StructureKind::Polynomial(e) => f.debug_tuple("Polynomial").field(e).finish(),
            StructureKind::ExampleR6 { s21, s31 } => {
                f.debug_struct("ExampleR6").field("s21", s21).field("s31", s31).finish()
            }
            StructureKind::RationalTable(_) => write!(f, "RationalTable(..)"),
        }
    }
}

/// An almost complex structure given by `A(z)` and its first derivatives.
#[derive(Clone, Debug)]
pub struct StructureSpec<S: Scalar> {
    n: usize,
    kind: StructureKind<S>,
    eps_adm: S,
}

impl<S: Scalar> StructureSpec<S> {
    pub fn standard(n: usize) -> Self {
        Self::with_kind(n, StructureKind::Standard)
    }

    pub fn polynomial(n: usize, entries: Vec<Entry<S>>) -> Result<Self> {
        for e in &entries {
            if e.row >= n || e.col >= n {
                return Err(Error::InvalidInput(format!(
                    "entry ({}, {}) outside a {n}x{n} matrix",
                    e.row, e.col
                )));
            }
            for t in &e.terms {
                if t.powers_z.len() != n || t.powers_zbar.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "term exponents must have length {n}"
                    )));
                }
            }
        }
        Ok(Self::with_kind(n, StructureKind::Polynomial(entries)))
    }

    /// `n = 1`, `A(z) = α z̄`.
    pub fn scalar_zbar(alpha: S) -> Self {
        Self::polynomial(
            1,
            vec![Entry {
                row: 0,
                col: 0,
                terms: vec![Term {
                    coeff: creal(alpha),
                    powers_z: vec![0],
                    powers_zbar: vec![1],
                }],
            }],
        )
        .expect("valid entry")
    }

    /// `n = 1`, constant `A ≡ a`.
    pub fn scalar_constant(a: C<S>) -> Self {
        Self::polynomial(
            1,
            vec![Entry {
                row: 0,
                col: 0,
                terms: vec![Term {
                    coeff: a,
                    powers_z: vec![0],
                    powers_zbar: vec![0],
                }],
            }],
        )
        .expect("valid entry")
    }

    /// The ℝ⁶ example: `A₂₁ = 6z₁²z₃/(3 − z₁²z̄₁²)`, `A₃₁ = −z₂` (1-based).
    pub fn example_r6() -> Self {
        Self::example_r6_scaled(S::one(), S::one())
    }

    pub fn example_r6_scaled(s21: S, s31: S) -> Self {
        Self::with_kind(3, StructureKind::ExampleR6 { s21, s31 })
    }

    pub fn rational_table(n: usize, table: RationalTable<S>) -> Self {
        Self::with_kind(n, StructureKind::RationalTable(table))
    }

    fn with_kind(n: usize, kind: StructureKind<S>) -> Self {
        Self {
            n,
            kind,
            eps_adm: S::lit(1e-6),
        }
    }

    /// Required admissibility margin (default `1e-6`).
    pub fn with_admissibility_margin(mut self, eps: S) -> Self {
        self.eps_adm = eps;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn kind(&self) -> &StructureKind<S> {
        &self.kind
    }
    pub fn admissibility_margin(&self) -> S {
        self.eps_adm
    }
    pub fn is_standard(&self) -> bool {
        matches!(self.kind, StructureKind::Standard)
    }

    fn check_dim(&self, z: &[C<S>]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, structure needs {}",
                z.len(),
                self.n
            )));
        }
        if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite point".into()));
        }
        Ok(())
    }

    /// `A(z)`.
    pub fn eval(&self, z: &[C<S>]) -> Result<CMat<S>> {
        self.check_dim(z)?;
        let n = self.n;
        match &self.kind {
            StructureKind::Standard => Ok(CMat::zeros(n, n)),
            StructureKind::Polynomial(entries) => {
                let mut a = CMat::zeros(n, n);
                for e in entries {
                    for t in &e.terms {
                        a[(e.row, e.col)] += t.coeff * monomial(z, &t.powers_z, &t.powers_zbar);
                    }
                }
                Ok(a)
            }
            StructureKind::ExampleR6 { s21, s31 } => {
                let den = r6_denominator(z)?;
                let mut a = CMat::zeros(3, 3);
                a[(1, 0)] = z[0] * z[0] * z[2] * S::lit(6.0) * *s21 / den;
                a[(2, 0)] = -z[1] * *s31;
                Ok(a)
            }
            StructureKind::RationalTable(t) => (t.eval)(z),
        }
    }

    /// `(∂A/∂z_j, ∂A/∂z̄_j)` for `j = 1..n`.
    pub fn derivatives(&self, z: &[C<S>]) -> Result<(Vec<CMat<S>>, Vec<CMat<S>>)> {
        self.check_dim(z)?;
        let n = self.n;
        match &self.kind {
            StructureKind::Standard => Ok((vec![CMat::zeros(n, n); n], vec![CMat::zeros(n, n); n])),
            StructureKind::Polynomial(entries) => {
                let mut dz = vec![CMat::zeros(n, n); n];
                let mut dzb = vec![CMat::zeros(n, n); n];
                for e in entries {
                    for t in &e.terms {
                        for j in 0..n {
                            if t.powers_z[j] > 0 {
                                let mut p = t.powers_z.clone();
                                p[j] -= 1;
                                dz[j][(e.row, e.col)] += t.coeff
                                    * S::uz(t.powers_z[j] as usize)
                                    * monomial(z, &p, &t.powers_zbar);
                            }
                            if t.powers_zbar[j] > 0 {
                                let mut p = t.powers_zbar.clone();
                                p[j] -= 1;
                                dzb[j][(e.row, e.col)] += t.coeff
                                    * S::uz(t.powers_zbar[j] as usize)
                                    * monomial(z, &t.powers_z, &p);
                            }
                        }
                    }
                }
                Ok((dz, dzb))
            }
            StructureKind::ExampleR6 { s21, s31 } => {
                let den = r6_denominator(z)?;
                let six = S::lit(6.0) * *s21;
                let (z1, z3) = (z[0], z[2]);
                let z1b = z1.conj();
                let num = z1 * z1 * z3 * six;
                let mut dz = vec![CMat::zeros(3, 3); 3];
                let mut dzb = vec![CMat::zeros(3, 3); 3];
                // D = 3 − z₁²z̄₁²: ∂D/∂z₁ = −2z₁z̄₁², ∂D/∂z̄₁ = −2z₁²z̄₁
                dz[0][(1, 0)] = z1 * z3 * six * S::lit(2.0) / den
                    + num * z1 * z1b * z1b * S::lit(2.0) / (den * den);
                dzb[0][(1, 0)] = num * z1 * z1 * z1b * S::lit(2.0) / (den * den);
                dz[2][(1, 0)] = z1 * z1 * six / den;
                dz[1][(2, 0)] = creal(-*s31);
                Ok((dz, dzb))
            }
            StructureKind::RationalTable(t) => match &t.derivs {
                Some(d) => d(z),
                None => self.finite_difference_derivatives(z, S::lit(1e-5)),
            },
        }
    }

    /// Central-difference Wirtinger derivatives of `A`.
    pub fn finite_difference_derivatives(
        &self,
        z: &[C<S>],
        h: S,
    ) -> Result<(Vec<CMat<S>>, Vec<CMat<S>>)> {
        let n = self.n;
        let mut dz = Vec::with_capacity(n);
        let mut dzb = Vec::with_capacity(n);
        let half = S::lit(0.5);
        let two_h = h * S::lit(2.0);
        for j in 0..n {
            let shifted = |dir: C<S>| -> Result<CMat<S>> {
                let mut p = z.to_vec();
                p[j] += dir;
                self.eval(&p)
            };
            let dx = (shifted(creal(h))? - shifted(creal(-h))?) / creal(two_h);
            let dy = (shifted(cplx(S::zero(), h))? - shifted(cplx(S::zero(), -h))?) / creal(two_h);
            let i = cplx(S::zero(), S::one());
            dz.push((&dx - &dy * i) * creal(half));
            dzb.push((&dx + &dy * i) * creal(half));
        }
        Ok((dz, dzb))
    }

    /// `min |det(I − A Ā)|` over the probes; fails below the configured margin.
    pub fn admissibility(&self, probes: &[Vec<C<S>>]) -> Result<S> {
        let mut worst = S::max_value().unwrap_or_else(|| S::lit(f64::MAX));
        let mut at: Option<&Vec<C<S>>> = None;
        for p in probes {
            let a = self.eval(p)?;
            let v = admissibility_det(&a);
            if at.is_none() || v < worst {
                worst = v;
                at = Some(p);
            }
        }
        let Some(point) = at else {
            return Err(Error::InvalidInput("no probe points".into()));
        };
        if worst < self.eps_adm {
            return Err(Error::AdmissibilityViolation {
                margin: worst.as_f64(),
                required: self.eps_adm.as_f64(),
                point: point.iter().map(|c| (c.re.as_f64(), c.im.as_f64())).collect(),
            });
        }
        Ok(worst)
    }
}

/// `|det(I − A Ā)|`.
pub fn admissibility_det<S: Scalar>(a: &CMat<S>) -> S {
    let n = a.nrows();
    let m = CMat::<S>::identity(n, n) - a * a.map(|c| c.conj());
    cabs(m.determinant())
}

fn monomial<S: Scalar>(z: &[C<S>], pz: &[u32], pzb: &[u32]) -> C<S> {
    let mut acc = creal(S::one());
    for (j, c) in z.iter().enumerate() {
        for _ in 0..pz[j] {
            acc *= *c;
        }
        for _ in 0..pzb[j] {
            acc *= c.conj();
        }
    }
    acc
}

fn r6_denominator<S: Scalar>(z: &[C<S>]) -> Result<C<S>> {
    let guard = S::lit(3f64.powf(0.25) * (1.0 - 1e-9));
    if cabs(z[0]) >= guard {
        return Err(Error::Domain(format!(
            "|z1| = {} reaches the pole of the example structure",
            cabs(z[0])
        )));
    }
    let z1 = z[0];
    let z1b = z1.conj();
    Ok(creal(S::lit(3.0)) - z1 * z1 * z1b * z1b)
}

fn j_standard<S: Scalar>(n: usize) -> DMatrix<S> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k + 1, 2 * k)] = S::one();
        j[(2 * k, 2 * k + 1)] = -S::one();
    }
    j
}

fn conjugation<S: Scalar>(n: usize) -> DMatrix<S> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        if r != c {
            S::zero()
        } else if r % 2 == 0 {
            S::one()
        } else {
            -S::one()
        }
    })
}

/// Complex matrix `A` of a real structure `J` (`2n × 2n`).
pub fn j_to_a<S: Scalar>(j: &DMatrix<S>) -> Result<CMat<S>> {
    let dim = j.nrows();
    if dim == 0 || dim % 2 != 0 || j.ncols() != dim {
        return Err(Error::InvalidInput(format!("J must be square of even size, got {}x{}", j.nrows(), j.ncols())));
    }
    let n = dim / 2;
    let sq = j * j + DMatrix::<S>::identity(dim, dim);
    if sq.amax() > S::lit(1e-10) * (S::one() + j.amax() * j.amax()) {
        return Err(Error::NotAStructure(format!("|J² + I| = {}", sq.amax())));
    }
    let jst = j_standard::<S>(n);
    let sum = &jst + j;
    let sv = sum.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= S::zero() || smax / smin > S::lit(1e8) {
        return Err(Error::Chart(format!(
            "J + J_st is singular (condition number {})",
            if smin > S::zero() { (smax / smin).as_f64() } else { f64::INFINITY }
        )));
    }
    let x = sum.lu().solve(&(j - &jst)).ok_or_else(|| Error::Chart("J + J_st singular".into()))?;
    let m = x * conjugation::<S>(n);
    Ok(CMat::from_fn(n, n, |r, c| cplx(m[(2 * r, 2 * c)], m[(2 * r + 1, 2 * c)])))
}

/// Inverse of [`j_to_a`]: `J = J_st (I + X)(I − X)⁻¹` with `X = M C`.
pub fn a_to_j<S: Scalar>(a: &CMat<S>) -> Result<DMatrix<S>> {
    let n = a.nrows();
    let mut m = DMatrix::<S>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let v = a[(r, c)];
            m[(2 * r, 2 * c)] = v.re;
            m[(2 * r, 2 * c + 1)] = -v.im;
            m[(2 * r + 1, 2 * c)] = v.im;
            m[(2 * r + 1, 2 * c + 1)] = v.re;
        }
    }
    let x = m * conjugation::<S>(n);
    let id = DMatrix::<S>::identity(2 * n, 2 * n);
    let inv = (&id - &x)
        .try_inverse()
        .ok_or_else(|| Error::Chart("I − X is singular".into()))?;
    Ok(j_standard::<S>(n) * (&id + &x) * inv)
}

/// On-disk structure description; indices are 0-based.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StructureFile {
    pub n: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<EntryFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EntryFile {
    pub row: usize,
    pub col: usize,
    pub terms: Vec<TermFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermFile {
    pub coeff: [f64; 2],
    pub powers_z: Vec<u32>,
    pub powers_zbar: Vec<u32>,
}

impl<S: Scalar> StructureSpec<S> {
    /// Builtins: `std` (with `n`), `r6`.
    pub fn builtin(name: &str, n: usize) -> Result<Self> {
        match name {
            "std" | "standard" => Ok(Self::standard(n)),
            "r6" | "example-r6" => Ok(Self::example_r6()),
            other => Err(Error::InvalidInput(format!("unknown builtin structure '{other}'"))),
        }
    }

    pub fn from_file(f: &StructureFile) -> Result<Self> {
        match f.kind.as_str() {
            "standard" => Ok(Self::standard(f.n)),
            "builtin" | "builtin_example_r6" => {
                let name = f.builtin.as_deref().unwrap_or("r6");
                let s = Self::builtin(name, f.n)?;
                if s.n != f.n {
                    return Err(Error::InvalidInput(format!(
                        "builtin '{name}' has n = {}, file says {}",
                        s.n, f.n
                    )));
                }
                Ok(s)
            }
            "polynomial" => Self::polynomial(
                f.n,
                f.entries
                    .iter()
                    .map(|e| Entry {
                        row: e.row,
                        col: e.col,
                        terms: e
                            .terms
                            .iter()
                            .map(|t| Term {
                                coeff: cplx(S::lit(t.coeff[0]), S::lit(t.coeff[1])),
                                powers_z: t.powers_z.clone(),
                                powers_zbar: t.powers_zbar.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            ),
            other => Err(Error::InvalidInput(format!("unknown structure kind '{other}'"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn to_file(&self) -> Result<StructureFile> {
        let (kind, entries, builtin) = match &self.kind {
            StructureKind::Standard => ("standard", vec![], None),
            StructureKind::ExampleR6 { s21, s31 } => {
                if *s21 != S::one() || *s31 != S::one() {
                    return Err(Error::InvalidInput("scaled example structures have no file form".into()));
                }
                ("builtin", vec![], Some("r6".to_string()))
            }
            StructureKind::Polynomial(e) => (
                "polynomial",
                e.iter()
                    .map(|e| EntryFile {
                        row: e.row,
                        col: e.col,
                        terms: e
                            .terms
                            .iter()
                            .map(|t| TermFile {
                                coeff: [t.coeff.re.as_f64(), t.coeff.im.as_f64()],
                                powers_z: t.powers_z.clone(),
                                powers_zbar: t.powers_zbar.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
                None,
            ),
            StructureKind::RationalTable(_) => {
                return Err(Error::InvalidInput("evaluator-backed structures have no file form".into()))
            }
        };
        Ok(StructureFile {
            n: self.n,
            kind: kind.to_string(),
            entries,
            builtin,
        })
    }
}

/// Zero matrix helper for callers assembling fields.
pub fn zero_mat<S: Scalar>(n: usize) -> CMat<S> {
    CMat::from_element(n, n, czero())
}
