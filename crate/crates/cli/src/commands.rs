use crate::{CgArgs, ExampleArgs, GlueArgs, KernelArgs, NormsArgs, Outcome, SolveArgs};
use pseudodisc::calculus::{validate_t_table, OperatorTable};
use pseudodisc::example_r6::{b_coeffs, gram_condition, kernel_certificate, ode_residual, psi1_map};
use pseudodisc::gluing::halves;
use pseudodisc::modal::ModalMap;
use pseudodisc::norms::{norm, NormKind};
use pseudodisc::report::{b_table_csv, lambda_csv, residual_csv, spectrum_csv, Status};
use pseudodisc::{
    kernel_dim, parse_disc, solve, DiscMap, Discretization, Error, GlueError, GluingConfig, NewtonConfig, Region,
    SolveError, StructureSpec, C,
};
use serde_json::json;
use std::path::Path;

type Result<T> = std::result::Result<T, Error>;

/// Inline expression, or a disc JSON file when the argument names one.
fn load_disc(src: &str) -> Result<DiscMap<f64>> {
    let path = Path::new(src);
    if src.ends_with(".json") || path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{src}: {e}")))?;
        DiscMap::from_json(&text)
    } else {
        parse_disc(src)
    }
}

fn load_structure(src: &str, n: usize) -> Result<StructureSpec<f64>> {
    let s = match src.strip_prefix("builtin:") {
        Some(name) => StructureSpec::builtin(name, n)?,
        None => {
            let text = std::fs::read_to_string(src).map_err(|e| Error::Io(format!("{src}: {e}")))?;
            StructureSpec::from_json(&text)?
        }
    };
    if s.n() != n {
        return Err(Error::InvalidInput(format!("structure acts on C^{} but the disc has {n} components", s.n())));
    }
    Ok(s)
}

fn to_modal(disc: &Discretization<f64>, m: &DiscMap<f64>) -> Result<ModalMap<f64>> {
    let (dz, dzb) = m.bidegree();
    let d = disc.degree();
    if dz > d || dzb > d {
        return Err(Error::InvalidInput(format!("disc has bidegree ({dz}, {dzb}) above the discretization degree {d}")));
    }
    Ok(disc.from_disc_map(m).resized(&disc.u_space()))
}

fn write_solution(disc: &Discretization<f64>, u: &ModalMap<f64>, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, disc.to_disc_map(u).to_json())?;
    }
    Ok(())
}

fn value(v: impl serde::Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn newton_config(common: &crate::Common, tol: f64) -> NewtonConfig<f64> {
    NewtonConfig { p: common.p, tol, seed: common.seed, ..Default::default() }
}

fn not_converged(out: Outcome, iterations: usize) -> Outcome {
    Outcome {
        status: Status::Diverged,
        error: Some(format!("no convergence within {iterations} iterations")),
        ..out
    }
}

pub fn solve_disc(a: &SolveArgs) -> Result<Outcome> {
    let disc = Discretization::<f64>::with_degree(a.common.degree);
    let m = load_disc(&a.initial)?;
    let s = load_structure(&a.structure, m.n())?;
    let phi = to_modal(&disc, &m)?;
    let cfg = NewtonConfig {
        maxiter: a.maxiter,
        threshold: a.threshold,
        refresh_q: a.refresh_q,
        ..newton_config(&a.common, a.tol)
    };
    match solve(&disc, &s, &phi, &cfg) {
        Ok(rep) => {
            write_solution(&disc, rep.solution(), a.solution.as_deref())?;
            let csv = vec![("residuals.csv", residual_csv(&rep)?)];
            let out = Outcome { csv, ..Outcome::ok(json!({ "settings": value(&cfg)?, "newton": value(&rep)? })) };
            Ok(if rep.converged { out } else { not_converged(out, rep.iterations) })
        }
        Err(SolveError::Diverged(rep)) => Ok(Outcome {
            status: Status::Diverged,
            error: Some(format!("Newton iteration diverged after {} steps", rep.iterations)),
            csv: vec![("residuals.csv", residual_csv(&rep)?)],
            result: Some(json!({ "settings": value(&cfg)?, "newton": value(&*rep)? })),
        }),
        Err(SolveError::Numerical(e)) => Err(e),
    }
}

pub fn glue(a: &GlueArgs) -> Result<Outcome> {
    let disc = Discretization::<f64>::with_degree(a.common.degree);
    let m1 = load_disc(&a.half1)?;
    let m2 = load_disc(&a.half2)?;
    if m1.n() != m2.n() {
        return Err(Error::InvalidInput("the two halves have different target dimensions".into()));
    }
    let s = load_structure(&a.structure, m1.n())?;
    let newton = newton_config(&a.common, a.tol);
    let mut u1 = to_modal(&disc, &m1)?;
    let mut u2 = to_modal(&disc, &m2)?;
    let mut corrections = Vec::new();
    if a.correct_halves {
        for u in [&mut u1, &mut u2] {
            let rep = match solve(&disc, &s, u, &newton) {
                Ok(r) => r,
                Err(SolveError::Numerical(e)) => return Err(e),
                Err(SolveError::Diverged(r)) => {
                    return Ok(Outcome {
                        status: Status::Diverged,
                        error: Some("Newton correction of a half diverged".into()),
                        result: Some(json!({ "half_corrections": value(&corrections)?, "diverged": value(&*r)? })),
                        csv: vec![],
                    })
                }
            };
            *u = rep.solution().clone();
            corrections.push(rep);
        }
    }
    let (h1, h2) = halves(&u1, &u2, "cli");
    let cfg = GluingConfig {
        tau: a.tau,
        eps: a.eps,
        m: a.m,
        newton,
        check_regularity: a.check_regularity,
        ..Default::default()
    };
    match pseudodisc::glue(&disc, &s, &h1, &h2, &cfg) {
        Ok(rep) => {
            write_solution(&disc, rep.solution(), a.solution.as_deref())?;
            let csv = vec![("residuals.csv", residual_csv(&rep.newton)?)];
            let out = Outcome { csv, ..Outcome::ok(json!({ "half_corrections": value(&corrections)?, "glue": value(&rep)? })) };
            Ok(if rep.newton.converged { out } else { not_converged(out, rep.newton.iterations) })
        }
        Err(GlueError::Diverged(rep)) => Ok(Outcome {
            status: Status::Diverged,
            error: Some("Newton correction of the pre-glued map diverged".into()),
            csv: vec![("residuals.csv", residual_csv(&rep)?)],
            result: Some(json!({ "half_corrections": value(&corrections)?, "newton": value(&*rep)? })),
        }),
        Err(GlueError::Numerical(e)) => Err(e),
    }
}

pub fn kernel(a: &KernelArgs) -> Result<Outcome> {
    let disc = Discretization::<f64>::with_degree(a.common.degree);
    let m = load_disc(&a.at)?;
    let s = load_structure(&a.structure, m.n())?;
    let phi = to_modal(&disc, &m)?;
    let rep = kernel_dim(&disc, &s, &phi, a.threshold)?;
    let csv = vec![("spectrum.csv", spectrum_csv(&rep.spectrum)?)];
    Ok(Outcome {
        csv,
        ..Outcome::ok(json!({
            "dim": rep.dim,
            "threshold": rep.threshold,
            "regular": rep.regular,
            "spectrum": rep.spectrum,
        }))
    })
}

pub fn example_r6(a: &ExampleArgs) -> Result<Outcome> {
    if a.kmax < 3 {
        return Err(Error::InvalidInput(format!("kmax = {} must be at least 3", a.kmax)));
    }
    let series = b_coeffs(a.kmax);
    let psi1 = ode_residual(&psi1_map::<f64>())?;
    let psi2 = ode_residual(&series.psi2_map::<f64>())?;
    let gram = gram_condition(a.kmax, a.common.degree);
    let csv_tables = |spectrum: &[f64]| -> Result<Vec<(&'static str, String)>> {
        Ok(vec![
            ("b_table.csv", b_table_csv(&series)?),
            ("lambda.csv", lambda_csv(&series)?),
            ("spectrum.csv", spectrum_csv(spectrum)?),
        ])
    };
    let mut result = json!({
        "b": series.b.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        "b_f64": series.b_f64(),
        "bound_violations": series.bound_violations(),
        "lambda1": series.lambda1,
        "lambda2": series.lambda2,
        "lambda1_tail": series.tail1,
        "lambda2_tail": series.tail2,
        "psi1_ode_residual": psi1,
        "psi2_ode_residual": psi2,
        "gram_condition": gram,
    });
    match kernel_certificate(a.common.degree) {
        Ok(cert) => {
            let csv = csv_tables(&cert.spectrum)?;
            result["kernel_dim"] = json!(cert.dim);
            result["certificate"] = value(&cert)?;
            Ok(Outcome { csv, ..Outcome::ok(result) })
        }
        Err(e @ Error::Certificate(_)) => Ok(Outcome {
            status: Status::Failed,
            error: Some(e.to_string()),
            result: Some(result),
            csv: csv_tables(&[])?,
        }),
        Err(e) => Err(e),
    }
}

/// Interior points for the quadrature cross-check.
fn probe_points() -> Vec<C<f64>> {
    (0..10).map(|i| C::from_polar(0.02 + 0.09 * i as f64, 0.4 + 2.3 * i as f64)).collect()
}

pub fn cg_verify(a: &CgArgs) -> Result<Outcome> {
    let d = a.common.degree;
    let table = OperatorTable::new(d);
    let defects = table.right_inverse_defects();

    // ∂̄T = I on the modal residual space, basis vector by basis vector
    let disc = Discretization::<f64>::with_degree(d);
    let f = disc.f_space();
    let dim = ModalMap::<f64>::zeros(1, f.clone()).real_dim();
    let mut modal = 0.0f64;
    for k in 0..dim {
        let e = ModalMap::<f64>::real_basis(1, &f, k);
        let back = disc.d_bar(&disc.cauchy_green(&e));
        let err = back.resized(&f).sub(&e).l2_norm();
        let lost = (back.l2_norm() - e.l2_norm()).abs();
        modal = modal.max(err).max(lost);
    }

    let quad = validate_t_table(d, &probe_points(), a.quad_tol)?;
    let pass = defects.is_empty() && modal < 1e-10 && quad < a.tol;
    let result = json!({
        "exact_defects": defects,
        "modal_defect": modal,
        "quadrature_max_rel_err": quad,
        "points": probe_points().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "pass": pass,
    });
    if pass {
        Ok(Outcome::ok(result))
    } else {
        Ok(Outcome {
            status: Status::Failed,
            error: Some("Cauchy-Green cross-check failed".into()),
            result: Some(result),
            csv: vec![],
        })
    }
}

fn parse_region(src: &str) -> Result<Region<f64>> {
    if src == "disc" {
        return Ok(Region::Disc);
    }
    let (name, tau) = src
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("bad region {src:?}")))?;
    let tau: f64 = tau.parse().map_err(|_| Error::InvalidInput(format!("bad τ in region {src:?}")))?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("τ = {tau} must lie in (0, 1)")));
    }
    match name {
        "half1" => Ok(Region::Half1(tau)),
        "half2" => Ok(Region::Half2(tau)),
        "overlap" => Ok(Region::Overlap(tau)),
        _ => Err(Error::InvalidInput(format!("bad region {src:?}"))),
    }
}

pub fn norms(a: &NormsArgs) -> Result<Outcome> {
    let m = load_disc(&a.disc)?;
    let (dz, dzb) = m.bidegree();
    let disc = Discretization::<f64>::with_degree(a.common.degree.max(dz).max(dzb));
    let u = to_modal(&disc, &m)?;
    let region = parse_region(&a.region)?;
    let p = a.common.p;
    let mut table = serde_json::Map::new();
    for (name, kind) in [
        ("lp", NormKind::Lp),
        ("w1p", NormKind::W1p),
        ("w2p", NormKind::W2p),
        ("sup", NormKind::Sup),
        ("holder", NormKind::Holder(a.alpha)),
    ] {
        table.insert(name.into(), json!(norm(&disc, &u, kind, p, region)?));
    }
    Ok(Outcome::ok(serde_json::Value::Object(table)))
}
