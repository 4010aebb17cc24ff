//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twingraph::{
    act_on_graph, angle_function, cheng_yau_check, coarea_identity, det_hessian_minus_one, dualize, equivariance_check,
    existence_classifier, first_fundamental_form, flux_identity_residual, generate, heinz_flux_check,
    hessian_from_minimal, max_diff_mod_constant, max_diff_mod_constant_on, mean_curvature, nil_growth_check, roundtrip,
    solve_dirichlet, timelike_circle_range, DirichletProblem, DomainSpec, DualPair, Example, ExistenceVerdict,
    FundamentalForm, LiftedIsometry, ScalarField, SpaceParams,
};

type Check = std::result::Result<(bool, String), Box<dyn std::error::Error>>;

fn hemisphere(hh: f64, radius: f64, h: f64) -> ScalarField {
    generate(Example::Hemisphere, hh, &DomainSpec::disk(radius, h).unwrap())
        .unwrap()
        .field
}

fn zero(params_radius: f64, h: f64) -> ScalarField {
    ScalarField::constant(DomainSpec::disk(params_radius, h).unwrap(), 0.0).unwrap()
}

/// Source fixtures of criteria 1–4: `(label, field, params)` at spacing `h`.
fn fixtures(h: f64) -> Vec<(String, ScalarField, SpaceParams)> {
    let mut out = Vec::new();
    for hh in [0.5, 1.0] {
        out.push((
            format!("hemisphere H={hh}"),
            hemisphere(hh, 0.8, h),
            SpaceParams::riemannian(0.0, 0.0),
        ));
        out.push((
            format!("nil zero section tau={hh}"),
            zero(0.8, h),
            SpaceParams::riemannian(0.0, hh),
        ));
    }
    out.push((
        "R3 zero section".into(),
        zero(0.8, h),
        SpaceParams::riemannian(0.0, 0.0),
    ));
    out.push((
        "E(-1,0.5) zero section".into(),
        zero(0.8, h),
        SpaceParams::riemannian(-1.0, 0.5),
    ));
    out.push((
        "L3 zero section".into(),
        zero(0.8, h),
        SpaceParams::lorentzian(0.0, 0.0),
    ));
    out
}

fn center(u: &ScalarField) -> Option<(usize, usize)> {
    u.domain().core().nearest_active(0.0, 0.0)
}

fn pair(u: &ScalarField, p: &SpaceParams) -> DualPair {
    dualize(u, p, center(u)).unwrap()
}

fn criterion_1() -> Check {
    let (hc, hf) = (0.02, 0.01);
    let mut ok = true;
    let mut worst_scaled = 0.0f64;
    let mut ratios = Vec::new();
    for ((label, uc, p), (_, uf, _)) in fixtures(hc).into_iter().zip(fixtures(hf)) {
        let pc = pair(&uc, &p);
        let pf = pair(&uf, &p);
        let bc = roundtrip(&pc)?;
        let bf = roundtrip(&pf)?;
        let ec = max_diff_mod_constant(&bc, &uc)?.0;
        let ef_all = max_diff_mod_constant(&bf, &uf)?.0;
        // Ratio on the coarse recovered node set, which both levels share.
        let ef = max_diff_mod_constant_on(&bf, &uf, bc.domain())?.0;
        let ec_fixed = max_diff_mod_constant_on(&bc, &uc, bc.domain())?.0;
        ok &= ec <= 5.0 * hc * hc && ef_all <= 5.0 * hf * hf;
        worst_scaled = worst_scaled.max(ec / (hc * hc)).max(ef_all / (hf * hf));
        if ec_fixed > 1e-13 {
            let r = ec_fixed / ef;
            ok &= (3.5..=4.5).contains(&r);
            ratios.push(format!("{label}: {r:.3}"));
        } else {
            ratios.push(format!("{label}: exact ({ec_fixed:.1e})"));
        }
    }
    Ok((
        ok,
        format!("max err/h^2 = {worst_scaled:.3}; ratios [{}]", ratios.join(", ")),
    ))
}

fn criterion_2() -> Check {
    let h = 0.01;
    let pc = pair(&hemisphere(1.0, 0.8, h), &SpaceParams::riemannian(0.0, 0.0));
    let v_sup = pc.target.max_abs();
    let pn = pair(&zero(0.8, h), &SpaceParams::riemannian(0.0, 1.0));
    let exact = ScalarField::from_fn(pn.target.domain().clone(), |x, y| (1.0 + x * x + y * y).sqrt())?;
    let parab = max_diff_mod_constant(&pn.target, &exact)?.0;
    let ok = v_sup <= 5.0 * h * h && parab <= 5.0 * h * h;
    Ok((
        ok,
        format!(
            "|v|/h^2 = {:.3}, paraboloid err/h^2 = {:.3}",
            v_sup / (h * h),
            parab / (h * h)
        ),
    ))
}

fn criterion_3() -> Check {
    let mut worst = [0.0f64; 3];
    for h in [0.02, 0.01] {
        for (_, u, p) in fixtures(h) {
            let pr = pair(&u, &p);
            // Recompute the invariants independently of the stored residuals.
            let (sf, tf) = (&pr.source_frame, &pr.target_frame);
            let nu_s = angle_function(sf);
            let nu_t = angle_function(tf);
            let src_form = first_fundamental_form(&pr.source, &p)?;
            let it = FundamentalForm::from_frame(tf);
            let td = tf.domain();
            for (i, j) in td.active_nodes() {
                let ks = sf.domain().idx(i, j);
                let w = sf.omega()[ks];
                let wt = tf.omega()[ks];
                worst[0] = worst[0].max((w * wt - 1.0).abs());
                worst[1] = worst[1].max((nu_s.at(i, j) * nu_t.at(i, j) - 1.0).abs());
                let a = src_form.frame_entries(i, j);
                let b = it.frame_entries(i, j);
                for (x, y) in a.iter().zip(&b) {
                    worst[2] = worst[2].max((y - x / (w * w)).abs());
                }
            }
            let r = &pr.residuals;
            worst[0] = worst[0].max(r.omega_product);
            worst[1] = worst[1].max(r.angle_product);
            worst[2] = worst[2].max(r.conformality);
        }
    }
    let ok = worst.iter().all(|&w| w <= 1e-12);
    Ok((
        ok,
        format!(
            "omega {:.1e}, nu {:.1e}, conformality {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn criterion_4() -> Check {
    let mut ok = true;
    let mut worst = 0.0f64;
    for h in [0.02, 0.01] {
        for (label, u, p) in fixtures(h) {
            let pr = pair(&u, &p);
            let hv = mean_curvature(&pr.target, &pr.target_params)?;
            let err = hv.map(|v| v - p.bundle)?.max_abs();
            let s = err / (h * h);
            if s > 10.0 {
                eprintln!("  criterion 4: {label} h={h}: {s:.3}");
            }
            ok &= s <= 10.0;
            worst = worst.max(s);
        }
    }
    Ok((ok, format!("max |H(target) - bundle(source)|/h^2 = {worst:.3}")))
}

fn criterion_5() -> Check {
    let mut mismatches = 0;
    let mut count = 0;
    for k in 0..21 {
        for m in 0..21 {
            let kappa = -5.0 + 0.25 * k as f64;
            let tau = -1.25 + 0.125 * m as f64;
            let p = SpaceParams::lorentzian(kappa, tau);
            let d = kappa + 4.0 * tau * tau;
            let verdict = existence_classifier(&p)?;
            let expected = if d > 0.0 {
                ExistenceVerdict::NoCompleteSpacelike
            } else if d == 0.0 {
                ExistenceVerdict::CriticalRegime
            } else {
                ExistenceVerdict::SubcriticalRegime
            };
            let circles = timelike_circle_range(&p)?;
            let consistent = verdict == expected && circles.is_some() == (d > 0.0);
            if !consistent {
                mismatches += 1;
            }
            count += 1;
        }
    }
    Ok((mismatches == 0, format!("{count} samples, {mismatches} mismatches")))
}

fn criterion_6() -> Check {
    let cases: Vec<(&str, ScalarField, SpaceParams, Option<f64>)> = vec![
        (
            "hemisphere H=1",
            hemisphere(1.0, 0.9, 0.01),
            SpaceParams::riemannian(0.0, 0.0),
            Some(1.0),
        ),
        (
            "hemisphere H=0.5",
            hemisphere(0.5, 1.5, 0.02),
            SpaceParams::riemannian(0.0, 0.0),
            Some(0.5),
        ),
        (
            "nil zero section",
            zero(1.5, 0.02),
            SpaceParams::riemannian(0.0, 1.0),
            Some(0.0),
        ),
        (
            "nil u=xy",
            generate(Example::NilHxy, 1.0, &DomainSpec::disk(1.5, 0.02)?)?.field,
            SpaceParams::riemannian(0.0, 1.0),
            Some(0.0),
        ),
    ];
    let mut ok = true;
    let (mut gap, mut slack) = (0.0f64, f64::INFINITY);
    for (label, u, p, hh) in cases {
        let rmax = if label.starts_with("hemisphere H=1") { 0.8 } else { 1.3 };
        let radii: Vec<f64> = (1..=4).map(|k| rmax * k as f64 / 4.0).collect();
        let rep = heinz_flux_check(&u, &p, &radii, hh)?;
        for s in &rep.samples {
            let g = s.values["divergence_flux_gap"];
            gap = gap.max(g);
            slack = slack.min(s.values["slack"]);
            ok &= g <= 1e-12 && s.values["slack"] >= 0.0;
        }
        if !rep.pass {
            eprintln!("  criterion 6: {label}: max violation {:.3e}", rep.max_violation);
        }
        ok &= rep.pass;
    }
    Ok((
        ok,
        format!("max divergence/flux gap {gap:.1e}, min Length - 2H*Area {slack:.3}"),
    ))
}

/// Rotated and shifted Scherk surface, a minimal graph near the origin.
fn scherk_rotated(x: f64, y: f64) -> f64 {
    let (s, c) = 0.3f64.sin_cos();
    let (a, b) = (c * x - s * y + 0.1, s * x + c * y);
    (b.cos() / a.cos()).ln()
}

/// Solves a Dirichlet problem on the disk of radius 0.5 with data `g`.
/// Data must be the trace of a smooth solution; generic data produce corner
/// singularities at the staircase boundary.
fn solved(params: SpaceParams, hh: f64, h: f64, g: fn(f64, f64) -> f64) -> ScalarField {
    let p = DirichletProblem::new(params, hh, DomainSpec::disk(0.5, h).unwrap(), g).unwrap();
    let (u, rep) = solve_dirichlet(&p).unwrap();
    assert!(rep.converged);
    u
}

fn solver_minimal(h: f64) -> ScalarField {
    solved(SpaceParams::riemannian(0.0, 0.0), 0.0, h, scherk_rotated)
}

fn scherk(h: f64) -> ScalarField {
    generate(Example::Scherk, 0.0, &DomainSpec::centered_square(0.8, h).unwrap())
        .unwrap()
        .field
}

fn det_error(u: &ScalarField) -> Result<f64, twingraph::Error> {
    let sol = hessian_from_minimal(u, center(u))?;
    let (res, convex) = det_hessian_minus_one(&sol.f)?;
    if !convex {
        return Err(twingraph::Error::Precondition("potential is not convex".into()));
    }
    Ok(res.max_abs())
}

fn criterion_7() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    let e0 = det_error(&zero(0.8, 0.02))?;
    ok &= e0 <= 1e-10;
    parts.push(format!("u=0: {e0:.1e}"));
    for (label, make) in [
        ("scherk", scherk as fn(f64) -> ScalarField),
        ("solver minimal", solver_minimal),
    ] {
        let (hc, hf) = (0.02, 0.01);
        let ec = det_error(&make(hc))?;
        let ef = det_error(&make(hf))?;
        let r = ec / ef;
        ok &= ec <= 10.0 * hc * hc && ef <= 10.0 * hf * hf && r >= 3.5;
        parts.push(format!(
            "{label}: err/h^2 {:.3}, {:.3}, ratio {r:.2}",
            ec / (hc * hc),
            ef / (hf * hf)
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn random_smooth(h: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.gen_range(-0.15..0.15),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    ScalarField::from_fn(DomainSpec::disk(0.7, h).unwrap(), move |x, y| {
        terms.iter().map(|t| t[0] * (t[1] * x + t[2] * y + t[3]).sin()).sum()
    })
    .unwrap()
}

fn criterion_8() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [0.02, 0.01] {
        let cases: Vec<(&str, ScalarField, SpaceParams)> = vec![
            ("u=0 in Nil(1)", zero(0.8, h), SpaceParams::riemannian(0.0, 1.0)),
            (
                "random (seed 7)",
                random_smooth(h, 7),
                SpaceParams::riemannian(-1.0, 0.3),
            ),
            (
                "random (seed 11)",
                random_smooth(h, 11),
                SpaceParams::riemannian(-1.0, 0.3),
            ),
            ("solver minimal", solver_minimal(h), SpaceParams::riemannian(0.0, 0.0)),
            (
                "solver CMC-1 cap",
                solved(SpaceParams::riemannian(0.0, 0.0), 1.0, h, |x, y| {
                    -(1.0 - x * x - y * y).sqrt()
                }),
                SpaceParams::riemannian(0.0, 0.0),
            ),
            (
                "solver Nil(1) xy",
                solved(SpaceParams::riemannian(0.0, 1.0), 0.0, h, |x, y| x * y),
                SpaceParams::riemannian(0.0, 1.0),
            ),
        ];
        for (label, u, p) in cases {
            let (r1, r2) = flux_identity_residual(&u, &p)?;
            let s = r1.max_abs().max(r2.max_abs()) / (h * h);
            ok &= s <= 10.0;
            parts.push(format!("{label} h={h}: {s:.3}"));
        }
    }
    Ok((ok, format!("residual/h^2: {}", parts.join(", "))))
}

fn criterion_9() -> Check {
    let mut ok = true;
    let mut a_min = f64::INFINITY;
    // H ≤ 1: for larger H the weight (1+r²)² under-scales and the closed-form
    // infimum drops below 1 (0.75 as H → ∞ near r = 1/√2).
    for hh in [0.5, 1.0] {
        let v = generate(Example::Paraboloid, hh, &DomainSpec::disk(2.0, 0.02)?)?.field;
        let rep = cheng_yau_check(&v, &SpaceParams::lorentzian(0.0, 0.0), &[0.5, 1.0, 1.5, 1.9], Some(hh))?;
        ok &= rep.pass;
        a_min = a_min.min(rep.witnesses["A"]);
    }
    ok &= a_min >= 0.9;

    let nil = SpaceParams::riemannian(0.0, 1.0);
    let dom = DomainSpec::disk(4.0, 0.04)?;
    let radii = [1.5, 2.5, 3.5, 3.9];
    let b0 = nil_growth_check(&ScalarField::constant(dom.clone(), 0.0)?, &nil, &radii)?;
    let bxy = nil_growth_check(&generate(Example::NilHxy, 1.0, &dom)?.field, &nil, &radii)?;
    // Analytic witnesses: r/(1+r²) ≤ 1/2 and 2|y|/(1+r²) ≤ 1.
    ok &= b0.pass && bxy.pass;
    ok &= b0.witnesses["B"] <= 1.1 * 0.5 && bxy.witnesses["B"] <= 1.1 * 1.0;

    let h = 0.02;
    let d = DomainSpec::disk(1.1, h)?;
    let u = ScalarField::constant(d.clone(), 0.0)?;
    let one = ScalarField::constant(d, 1.0)?;
    let co = coarea_identity(&u, &SpaceParams::riemannian(0.0, 0.0), &one, 1.0)?;
    let (lhs, rhs, res) = (co.witnesses["lhs"], co.witnesses["rhs"], co.witnesses["residual"]);
    ok &= res <= 10.0 * h * h && (lhs - PI).abs() <= 1e-12 && (rhs - PI).abs() <= 1e-12;
    Ok((
        ok,
        format!(
            "A* = {a_min:.4}; B*(0) = {:.4}, B*(xy) = {:.4}; coarea lhs = {lhs:.15}, rhs = {rhs:.15}",
            b0.witnesses["B"], bxy.witnesses["B"]
        ),
    ))
}

fn criterion_10() -> Check {
    let h = 0.01;
    let p = SpaceParams::riemannian(0.0, 0.0);
    let pr = pair(&hemisphere(1.0, 0.8, h), &p);
    let mut ok = true;
    let mut parts = Vec::new();
    for theta in [PI / 6.0, PI / 3.0] {
        let rep = equivariance_check(&pr, &LiftedIsometry::new(theta, 0.7, p))?;
        ok &= rep.residual <= 10.0 * h * h + rep.interpolation_error;
        parts.push(format!(
            "theta={theta:.4}: residual/h^2 {:.3}, interp/h^2 {:.3}",
            rep.residual / (h * h),
            rep.interpolation_error / (h * h)
        ));
    }
    // Sanity: the resampled source keeps its mean curvature.
    let moved = act_on_graph(&LiftedIsometry::new(PI / 6.0, 0.0, p), &pr.source)?;
    let drift = mean_curvature(&moved, &p)?.map(|v| v - 1.0)?.max_abs();
    parts.push(format!("moved H drift {drift:.1e}"));
    Ok((ok, parts.join("; ")))
}

fn criterion_11() -> Check {
    let cap = |x: f64, y: f64| 0.75f64.sqrt() - (1.0 - x * x - y * y).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [0.02, 0.01] {
        let tol = 1e-10;
        let p = DirichletProblem::new(SpaceParams::riemannian(0.0, 0.0), 1.0, DomainSpec::disk(0.5, h)?, cap)?;
        let (u, rep) = solve_dirichlet(&p)?;
        let exact = ScalarField::from_fn(u.domain().clone(), cap)?;
        let err = u
            .values()
            .iter()
            .zip(exact.values())
            .filter(|(a, _)| !a.is_nan())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let resid = mean_curvature(&u, &p.params)?.map(|v| v - 1.0)?.max_abs();
        ok &= rep.converged && rep.final_residual <= tol && resid <= tol && err <= 5.0 * h * h;
        parts.push(format!(
            "h={h}: err/h^2 {:.3}, residual {resid:.1e}, {} iterations",
            err / (h * h),
            rep.iterations
        ));
    }
    Ok((ok, parts.join("; ")))
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("duality round trip", criterion_1),
        ("closed-form duals", criterion_2),
        ("algebraic invariants", criterion_3),
        ("curvature transfer", criterion_4),
        ("feasibility classification", criterion_5),
        ("Heinz flux", criterion_6),
        ("Hessian-one", criterion_7),
        ("flux identities", criterion_8),
        ("estimates", criterion_9),
        ("equivariance", criterion_10),
        ("solver", criterion_11),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {}  {detail}  ({:.2}s)",
            n + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
