//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use pseudodisc::basis::DiscMap;
use pseudodisc::calculus::{cauchy_green, t_quadrature, validate_t_table, OperatorTable};
use pseudodisc::dbar::apply_f;
use pseudodisc::example_r6::{b_coeffs, kernel_certificate, ode_residual, psi1_map};
use pseudodisc::gluing::{glue, halves, GluingConfig};
use pseudodisc::modal::{Discretization, ModalMap};
use pseudodisc::newton::{solve, NewtonConfig, NewtonReport};
use pseudodisc::norms::{lp, Region};
use pseudodisc::report::Report;
use pseudodisc::rightinv::{random_residual, right_inverse, substitution};
use pseudodisc::structure::StructureSpec;
use pseudodisc::parse_disc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

type Check = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn modal(disc: &Discretization<f64>, m: &DiscMap<f64>) -> ModalMap<f64> {
    disc.from_disc_map(m).resized(&disc.u_space())
}

fn expr(disc: &Discretization<f64>, s: &str) -> ModalMap<f64> {
    modal(disc, &parse_disc(s).expect("valid expression"))
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn probe_points() -> Vec<Complex64> {
    (0..10).map(|i| Complex64::from_polar(0.1 + 0.075 * i as f64, 0.3 + 2.4 * i as f64)).collect()
}

fn criterion_1() -> Check {
    let d = 14;
    let defects = OperatorTable::new(d).right_inverse_defects();
    ensure(defects.is_empty(), format!("exact ∂̄T ≠ I on monomials {defects:?}"))?;

    // coefficient-level check of the modal operators on every basis vector
    let disc = Discretization::<f64>::with_degree(d);
    let f = disc.f_space();
    let dim = ModalMap::<f64>::zeros(1, f.clone()).real_dim();
    let mut modal_err = 0.0f64;
    for k in 0..dim {
        let e = ModalMap::<f64>::real_basis(1, &f, k);
        let back = disc.d_bar(&disc.cauchy_green(&e));
        modal_err = modal_err.max(back.resized(&f).sub(&e).max_abs_coeff());
        modal_err = modal_err.max((back.l2_norm() - 1.0).abs());
    }
    ensure(modal_err < 1e-12, format!("modal ∂̄T − I = {modal_err:.2e}"))?;

    // quadrature oracle: every monomial, error scaled by max(|T|, sup|monomial| = 1)
    let pts = probe_points();
    let table_err = validate_t_table(d, &pts, 1e-12).map_err(|e| e.to_string())?;
    // and plain relative error on random degree-14 polynomials with O(1) values
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rel: f64 = 0.0;
    for _ in 0..3 {
        let mut u = DiscMap::<f64>::zeros(1, d);
        for j in 0..=d {
            for k in 0..=d - j {
                u.set(0, j, k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1 + j + k) as f64);
            }
        }
        let t = cauchy_green(&u);
        for z in &pts {
            let exact = t.eval(*z)[0];
            let quad = t_quadrature(|w| u.eval(w)[0], *z, d + 4, 1e-12).map_err(|e| e.to_string())?;
            rel = rel.max((exact - quad).norm() / exact.norm());
        }
    }
    ensure(table_err < 1e-6 && rel < 1e-6, format!("quadrature mismatch: table {table_err:.2e}, relative {rel:.2e}"))?;
    Ok(format!(
        "∂̄T = I exact up to degree {d}, modal defect {modal_err:.1e}, T vs quadrature {:.1e} (monomials) / {rel:.1e} (relative)",
        table_err
    ))
}

fn run_standard_solve() -> (NewtonConfig<f64>, NewtonReport<f64>) {
    let disc = Discretization::<f64>::with_degree(12);
    let phi = expr(&disc, "zeta + 0.05*conj(zeta)^2");
    let cfg = NewtonConfig::default();
    let rep = solve(&disc, &StructureSpec::standard(1), &phi, &cfg).expect("standard solve");
    (cfg, rep)
}

fn criterion_2() -> (Check, String) {
    let (cfg, rep) = run_standard_solve();
    let json = Report::ok("solve", &cfg, &rep).to_json().expect("serializable");
    let check = (|| {
        let last = *rep.residuals.last().unwrap();
        ensure(rep.iterations == 1, format!("{} iterations", rep.iterations))?;
        ensure(last < 1e-10, format!("final residual {last:.2e}"))?;
        ensure(rep.distance <= rep.bound, format!("distance {:.3e} > bound {:.3e}", rep.distance, rep.bound))?;
        // closed form u = φ − T(φ_ζ̄) = ζ + 0.05ζ̄² − T(0.1ζ̄) = ζ
        let disc = Discretization::<f64>::with_degree(12);
        let dev = rep.solution().sub(&expr(&disc, "zeta")).max_abs_coeff();
        ensure(dev < 1e-12, format!("solution differs from ζ by {dev:.2e}"))?;
        Ok(format!(
            "1 iteration, ‖ℱ(u)‖ = {last:.1e}, ‖u−φ‖ = {:.4} ≤ 2c₀‖ℱ(φ)‖ = {:.4}, u = ζ to {dev:.1e}",
            rep.distance, rep.bound
        ))
    })();
    (check, json)
}

fn criterion_3() -> (Check, String) {
    let mut json = String::new();
    let mut lines = Vec::new();
    for d in [12, 14, 16] {
        let cert = match kernel_certificate(d) {
            Ok(c) => c,
            Err(e) => return (Err(format!("d = {d}: {e}")), json),
        };
        if d == 12 {
            json = Report::ok("example-r6", &d, &cert).to_json().expect("serializable");
        }
        let s = &cert.spectrum;
        let smax = s[0];
        let below = s.iter().filter(|&&x| x < 1e-6 * smax).count();
        let third = s[s.len() - 3] / smax;
        if below != 2 || third <= 1e-3 || !cert.numeric_ok || !cert.analytic_ok {
            return (
                Err(format!(
                    "d = {d}: {below} small singular values, σ₃/σmax = {third:.2e}, h₁ {:.1e}, Cauchy {:.1e}, span {:.1e}",
                    cert.first_component, cert.cauchy_max, cert.span_residual
                )),
                json,
            );
        }
        lines.push(format!("d={d}: σ₃/σmax {third:.2e}, Cauchy {:.1e}", cert.cauchy_max));
    }
    (Ok(format!("kernel dimension 2 ({})", lines.join("; "))), json)
}

/// `sup |ψ_ζ̄ζ̄ − 6ζ²/(ζ²ζ̄² − 3)ψ|` with the second derivative written out by hand.
fn ode_oracle(psi: impl Fn(Complex64) -> (Complex64, Complex64)) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        for t in 0..64 {
            let z = Complex64::from_polar(i as f64 / 40.0, 2.0 * std::f64::consts::PI * t as f64 / 64.0);
            let (v, vbb) = psi(z);
            let s2 = z.norm_sqr() * z.norm_sqr();
            worst = worst.max((vbb - z * z * 6.0 / (s2 - 3.0) * v).norm());
        }
    }
    worst
}

fn criterion_4() -> Check {
    let series = b_coeffs(20);
    let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    ensure(
        series.b[1] == q(-1, 1) && series.b[2] == q(1, 9) && series.b[3] == q(1, 135),
        format!("b₁..b₃ = {}, {}, {}", series.b[1], series.b[2], series.b[3]),
    )?;
    let v = series.bound_violations();
    ensure(v.is_empty(), format!("0 < b_k ≤ 3^-k fails at k = {v:?}"))?;
    let psi1 = ode_residual(&psi1_map::<f64>()).map_err(|e| e.to_string())?;
    let psi1_oracle = ode_oracle(|z| {
        let zb = z.conj();
        (zb - z * z * zb * zb * zb / 3.0, -2.0 * z * z * zb)
    });
    let b = series.b_f64();
    let psi2 = ode_residual(&series.psi2_map::<f64>()).map_err(|e| e.to_string())?;
    let psi2_oracle = ode_oracle(|z| {
        let zb = z.conj();
        let mut v = c(0.0, 0.0);
        let mut vbb = c(0.0, 0.0);
        for (k, bk) in b.iter().enumerate() {
            let k2 = 2 * k as i32;
            v += *bk * z.powi(k2) * zb.powi(k2);
            if k >= 1 {
                vbb += *bk * (k2 * (k2 - 1)) as f64 * z.powi(k2) * zb.powi(k2 - 2);
            }
        }
        (v, vbb)
    });
    let r1 = psi1.max(psi1_oracle);
    let r2 = psi2.max(psi2_oracle);
    ensure(r1 < 1e-12 && r2 < 1e-9, format!("ODE residuals ψ₁ {r1:.2e}, ψ₂ {r2:.2e}"))?;
    Ok(format!("b₁ = −1, b₂ = 1/9, b₃ = 1/135, bounds hold to k = 20, ODE residuals ψ₁ {r1:.1e}, ψ₂ {r2:.1e}"))
}

/// `‖d_φℱ(Qf) − f‖_{L⁴}/‖f‖_{L⁴}` from the library linearization and from
/// central differences of `ℱ` itself.
fn identity_defects(
    disc: &Discretization<f64>,
    a: &StructureSpec<f64>,
    phi: &ModalMap<f64>,
    seed: u64,
) -> Result<(f64, f64), String> {
    let err = |e: pseudodisc::Error| e.to_string();
    let q = right_inverse(disc, a, phi, &Default::default()).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lin, mut fd) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let f = random_residual(disc, a.n(), &mut rng);
        lin = lin.max(q.identity_defect(&f, 4.0).map_err(err)?);
        let h = q.apply(&f);
        let scale = h.l2_norm();
        let t = 1e-4 / scale;
        let plus = apply_f(disc, a, &phi.add(&h.scale(c(t, 0.0)))).map_err(err)?.value;
        let minus = apply_f(disc, a, &phi.sub(&h.scale(c(t, 0.0)))).map_err(err)?.value;
        let diff = plus.sub(&minus).scale(c(0.5 / t, 0.0));
        let num = lp(disc, &diff.sub(&f), 4.0, Region::Disc).map_err(err)?;
        fd = fd.max(num / lp(disc, &f, 4.0, Region::Disc).map_err(err)?);
    }
    Ok((lin, fd))
}

fn criterion_5() -> Check {
    let disc = Discretization::<f64>::with_degree(12);
    let cases = [
        ("standard", StructureSpec::standard(2), expr(&disc, "zeta + 0.1*conj(zeta)^2; 0.2*zeta*conj(zeta)")),
        ("0.1z̄", StructureSpec::scalar_zbar(0.1), expr(&disc, "zeta + 0.05*conj(zeta)^2")),
        ("example-r6", StructureSpec::example_r6(), expr(&disc, "zeta; 0; 0")),
    ];
    let mut parts = Vec::new();
    for (i, (name, a, phi)) in cases.iter().enumerate() {
        let (lin, fd) = identity_defects(&disc, a, phi, 100 + i as u64)?;
        ensure(lin <= 1e-6 && fd <= 1e-6, format!("{name}: defect {lin:.2e} (linearization), {fd:.2e} (differences)"))?;
        parts.push(format!("{name} {:.1e}", lin.max(fd)));
    }
    // substitution identities where A(φ) ≠ 0
    let mut kparts = Vec::new();
    for (name, a, phi) in [
        ("example-r6", StructureSpec::example_r6(), expr(&disc, "zeta; 0.2*conj(zeta); (0.1+0.1i)*zeta*conj(zeta)")),
        ("0.1z̄", StructureSpec::scalar_zbar(0.1), expr(&disc, "zeta + 0.05*conj(zeta)^2")),
    ] {
        let sub = substitution(&disc, &a, &phi).map_err(|e| e.to_string())?;
        let amax = sub.a_phi.iter().map(|m| m.iter().map(|x| x.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
        ensure(amax > 1e-3, format!("{name}: A(φ) vanishes"))?;
        ensure(
            sub.k_defect <= 1e-8 && sub.k0_defect <= 1e-8,
            format!("{name}: |K − I| = {:.2e}, |K₀| = {:.2e}", sub.k_defect, sub.k0_defect),
        )?;
        kparts.push(format!("{name} (sup|A(φ)| {amax:.2}) {:.1e}", sub.k_defect.max(sub.k0_defect)));
    }
    Ok(format!("‖d_φℱ(Qf) − f‖/‖f‖: {}; K = I, K₀ = 0: {}", parts.join(", "), kparts.join(", ")))
}

fn criterion_6() -> Check {
    let disc = Discretization::<f64>::with_degree(10);
    let a = StructureSpec::scalar_zbar(0.1);
    let cfg = NewtonConfig::default();
    let (mut converged, mut worst_ratio, mut worst_contraction) = (0, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for (r, rho) in [1e-2, 1e-3].into_iter().enumerate() {
        for run in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(6_000 + 100 * r as u64 + run);
            let mut m = DiscMap::<f64>::zeros(1, 3);
            // base ζ/2: ℱ(ζ/2) = 0.025ζ̄ keeps every run inside ‖ℱ(φ)‖ < δ
            m.set(0, 1, 0, c(0.5, 0.0));
            for j in 0..3 {
                for k in 1..=3 - j {
                    m.set(0, j, k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * rho);
                }
            }
            let phi = modal(&disc, &m);
            match solve(&disc, &a, &phi, &NewtonConfig { seed: run, ..cfg.clone() }) {
                Ok(rep) if rep.converged => {
                    converged += rep.hypothesis_ok as usize;
                    let ratio = rep.distance / rep.bound;
                    worst_ratio = worst_ratio.max(ratio);
                    worst_contraction = worst_contraction.max(rep.max_contraction());
                    if ratio > 1.01 || rep.max_contraction() > 0.75 {
                        failures.push(format!("ρ={rho} run {run}: ratio {ratio:.3}, contraction {:.3}", rep.max_contraction()));
                    }
                }
                Ok(_) => {}
                Err(e) => failures.push(format!("ρ={rho} run {run}: {e}")),
            }
        }
    }
    let summary = format!(
        "{converged}/100 converged inside ‖ℱ(φ)‖ < δ, max ‖u−φ‖/(2c₀‖ℱ(φ)‖) = {worst_ratio:.3}, max contraction {worst_contraction:.2e}"
    );
    let violations: Vec<_> = failures.iter().filter(|f| f.contains(": ratio")).collect();
    ensure(converged >= 95 && violations.is_empty(), format!("{summary}; {failures:?}"))?;
    Ok(summary)
}

fn standard_glue() -> (GluingConfig<f64>, pseudodisc::gluing::GlueReport<f64>) {
    let disc = Discretization::<f64>::with_degree(12);
    let a = StructureSpec::standard(1);
    let (h1, h2) = halves(&expr(&disc, "zeta^2"), &expr(&disc, "zeta^2 + 0.001"), "standard");
    let cfg = GluingConfig::default();
    let rep = glue(&disc, &a, &h1, &h2, &cfg).expect("standard glue");
    (cfg, rep)
}

fn r6_glue() -> Result<(GluingConfig<f64>, pseudodisc::gluing::GlueReport<f64>), String> {
    let disc = Discretization::<f64>::with_degree(12);
    let a = StructureSpec::example_r6();
    let correct = |s: &str| -> Result<ModalMap<f64>, String> {
        let rep = solve(&disc, &a, &expr(&disc, s), &NewtonConfig::default()).map_err(|e| e.to_string())?;
        Ok(rep.solution().clone())
    };
    let u1 = correct("zeta; 0.001*(zeta + conj(zeta)); 0")?;
    let u2 = correct("zeta; 0.00105*(zeta + conj(zeta)); 0")?;
    let (h1, h2) = halves(&u1, &u2, "example-r6");
    let cfg = GluingConfig { check_regularity: true, ..Default::default() };
    let rep = glue(&disc, &a, &h1, &h2, &cfg).map_err(|e| e.to_string())?;
    Ok((cfg, rep))
}

fn criterion_7() -> (Check, Vec<String>) {
    let (cfg, std_rep) = standard_glue();
    let mut json = vec![Report::ok("glue", &cfg, &std_rep).to_json().expect("serializable")];
    let r6 = r6_glue();
    if let Ok((cfg, rep)) = &r6 {
        json.push(Report::ok("glue", cfg, rep).to_json().expect("serializable"));
    }
    let check = (|| {
        let eps = cfg.eps;
        let d = std_rep.distances;
        ensure(
            std_rep.newton.converged && d[0] < eps && d[1] < eps,
            format!("standard: converged {}, distances {:.2e}, {:.2e}", std_rep.newton.converged, d[0], d[1]),
        )?;
        ensure(std_rep.support_residual < 1e-8, format!("pre-glue residual {:.2e} outside the strip", std_rep.support_residual))?;
        let (_, r) = r6?;
        ensure(
            r.newton.converged && r.distances[0] < eps && r.distances[1] < eps,
            format!("example-r6: converged {}, distances {:.2e}, {:.2e}", r.newton.converged, r.distances[0], r.distances[1]),
        )?;
        Ok(format!(
            "standard: ‖u−u_j‖ = {:.1e}, {:.1e} < {eps}, residual off the strip {:.1e}; example-r6: ‖u−u_j‖ = {:.1e}, {:.1e}",
            d[0], d[1], std_rep.support_residual, r.distances[0], r.distances[1]
        ))
    })();
    (check, json)
}

fn criterion_8(c2: &str, c3: &str, c7: &[String]) -> Check {
    let (_, again2) = criterion_2();
    let (_, again3) = criterion_3_report();
    let (_, again7) = criterion_7();
    ensure(!c2.is_empty() && c2 == again2, "criterion 2 report differs between runs".into())?;
    ensure(!c3.is_empty() && c3 == again3, "criterion 3 report differs between runs".into())?;
    ensure(c7.len() == 2 && c7 == again7.as_slice(), "criterion 7 reports differ between runs".into())?;
    Ok(format!("{} reports byte-identical across repeated runs", 2 + c7.len()))
}

/// Report of criterion 3 at `d = 12` only.
fn criterion_3_report() -> (Check, String) {
    match kernel_certificate(12) {
        Ok(cert) => (Ok(String::new()), Report::ok("example-r6", &12usize, &cert).to_json().expect("serializable")),
        Err(e) => (Err(e.to_string()), String::new()),
    }
}

fn line(n: usize, check: &Check, start: Instant) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match check {
        Ok(msg) => println!("criterion {n}: PASS ({secs:.1}s) {msg}"),
        Err(msg) => println!("criterion {n}: FAIL ({secs:.1}s) {msg}"),
    }
    check.is_ok()
}

fn main() {
    let mut ok = true;
    let t = Instant::now();
    ok &= line(1, &criterion_1(), t);
    let t = Instant::now();
    let (c2, j2) = criterion_2();
    ok &= line(2, &c2, t);
    let t = Instant::now();
    let (c3, j3) = criterion_3();
    ok &= line(3, &c3, t);
    let t = Instant::now();
    ok &= line(4, &criterion_4(), t);
    let t = Instant::now();
    ok &= line(5, &criterion_5(), t);
    let t = Instant::now();
    ok &= line(6, &criterion_6(), t);
    let t = Instant::now();
    let (c7, j7) = criterion_7();
    ok &= line(7, &c7, t);
    let t = Instant::now();
    ok &= line(8, &criterion_8(&j2, &j3, &j7), t);
    if !ok {
        std::process::exit(1);
    }
}
