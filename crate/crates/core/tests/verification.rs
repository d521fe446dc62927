mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{random_points, sphere_generic_lambda, sphere_generic_xi};
use rblab::catalog::{
    cigar_almost_rb, cigar_closed_form_lambda, cigar_time_factor, hamilton_cigar,
    perturbed_sphere_metric, round_sphere_soliton, torus_test_fields, warped_product_2d,
    SphereConstruction, WarpedData, WarpedParams,
};
use rblab::chartcalc::{christoffel, laplacian_scalar, metric_at, ricci, ScalarField, VectorField};
use rblab::integrals::{
    bianchi_sweep, bochner_check, lemma_residual, sphere_grid, torus_grid, yano_check, LemmaId,
    QuadratureGrid,
};
use rblab::rbflow::{initial_state, run, DtPolicy, InitProfile};
use rblab::soliton::{
    classify, default_classification_eps, lambda_from_trace, obata_residual, soliton_residual,
    Classification, ObataVariant, SampleSet, SolitonData,
};

type Outcome = (bool, String);

/// `Γ^a_{bc}` of `(dx² + dy²)/D` with `D = e^{4(1−ρ)t} + x² + y²`.
fn cigar_christoffel(rho: f64, t: f64, x: f64, y: f64) -> [f64; 8] {
    let d = cigar_time_factor(rho, t) + x * x + y * y;
    let (a, b) = (x / d, y / d);
    [-a, -b, -b, a, b, -a, -a, -b]
}

fn criterion1() -> Outcome {
    let mut worst = 0.0f64;
    for rho in [0.0, 0.5] {
        for t in [0.0, 0.3] {
            let m = cigar_almost_rb(rho, t).unwrap().metric;
            for p in random_points(&[-3.0, -3.0], &[3.0, 3.0], 100, 11) {
                let g = christoffel(&m, &p, t).unwrap();
                let exact = cigar_christoffel(rho, t, p[0], p[1]);
                for (a, e) in g.data.iter().zip(exact) {
                    worst = worst.max((a - e).abs());
                }
            }
        }
    }
    (worst < 1e-10, format!("max |Γ − Γ_closed| = {worst:.3e}"))
}

fn criterion2() -> Outcome {
    let d = hamilton_cigar();
    let samples = SampleSet::grid(&[-3.0, -3.0], &[3.0, 3.0], 20);
    let mut ric_err = 0.0f64;
    let mut lam_err = 0.0f64;
    for p in &samples.points {
        let ric = ricci(&d.metric, p, 0.0).unwrap();
        let g = metric_at(&d.metric, p, 0.0).unwrap();
        let k = 2.0 / (1.0 + p[0] * p[0] + p[1] * p[1]);
        for (r, gij) in ric.data.iter().zip(&g.data) {
            ric_err = ric_err.max((r - k * gij).abs());
        }
        lam_err = lam_err.max(lambda_from_trace(&d, p, 0.0).unwrap().abs());
    }
    let report = soliton_residual(&d, &samples).unwrap();
    let ok = ric_err < 1e-9
        && report.residual_sup < 1e-9
        && lam_err < 1e-9
        && report.classification == Classification::Steady;
    (
        ok,
        format!(
            "Ric err {ric_err:.3e}, residual {:.3e}, |λ| {lam_err:.3e}, {}",
            report.residual_sup, report.classification
        ),
    )
}

fn criterion3() -> Outcome {
    let rho = 0.0;
    let e3 = [0.0, 0.0, 1.0];
    let d = round_sphere_soliton(1.0, &e3, rho).unwrap();
    let s = SphereConstruction::new(1.0, e3.to_vec()).unwrap();
    let mu = s.mu();
    let samples = d.default_samples(20);
    let report = soliton_residual(&d, &samples).unwrap();
    let (mut lam, mut lap, mut obata) = (0.0f64, 0.0f64, 0.0f64);
    for p in &samples.points {
        let m = mu.at(p, 0.0);
        lam = lam.max((lambda_from_trace(&d, p, 0.0).unwrap() - ((1.0 - rho) - m)).abs());
        lap = lap.max((laplacian_scalar(&d.metric, &mu, p, 0.0).unwrap() + 2.0 * m).abs());
        obata = obata.max(obata_residual(&d.metric, &mu, ObataVariant::Unit, p, 0.0).unwrap());
    }
    let ok = report.residual_sup < 1e-8 && lam < 1e-9 && lap < 1e-8 && obata < 1e-8;
    (
        ok,
        format!(
            "residual {:.3e}, λ err {lam:.3e}, Δμ err {lap:.3e}, Obata {obata:.3e}",
            report.residual_sup
        ),
    )
}

fn criterion4() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    for rho in [0.0, 0.25] {
        let params = WarpedParams {
            rho,
            ..WarpedParams::default()
        };
        let d = warped_product_2d(params).unwrap();
        let w = WarpedData::new(params).unwrap();
        let samples = d.default_samples(20);
        let report = soliton_residual(&d, &samples).unwrap();
        let lam = samples.points.iter().fold(0.0f64, |m, p| {
            m.max((lambda_from_trace(&d, p, 0.0).unwrap() - w.lambda(p[0])).abs())
        });
        ok &= report.residual_sup < 1e-8 && lam < 1e-9;
        msg.push(format!(
            "ρ={rho}: residual {:.3e}, λ err {lam:.3e}",
            report.residual_sup
        ));
    }
    (ok, msg.join("; "))
}

fn criterion5() -> Outcome {
    let m = perturbed_sphere_metric(0.1);
    let grid = sphere_grid(1.0, 40, 80).unwrap().with_metric(&m).unwrap();
    let r = bianchi_sweep(&grid, &m).unwrap();
    (r < 1e-7, format!("max Bianchi residual {r:.3e}"))
}

fn halves(coarse: f64, fine: f64, scale: f64) -> bool {
    fine <= 0.5 * coarse || fine <= 1e-13 * (1.0 + scale)
}

fn identity_pair(
    grid: &QuadratureGrid,
    xi: &VectorField,
    lam: &ScalarField,
) -> ((f64, f64), (f64, f64)) {
    let m = grid.metric();
    let y = yano_check(grid, m, xi).unwrap();
    let b = bochner_check(grid, m, lam).unwrap();
    ((y.residual, y.l1), (b.residual, b.l1))
}

fn criterion6() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    let torus = torus_grid(2.0 * PI, 2.0 * PI, 64, 64).unwrap();
    let (txi, tlam) = torus_test_fields();
    let sphere = sphere_grid(1.0, 128, 256).unwrap();
    let (sxi, slam) = (sphere_generic_xi(), sphere_generic_lambda());
    for (name, grid, xi, lam, bound) in [
        ("torus 64x64", &torus, &txi, &tlam, 1e-10),
        ("sphere 128x256", &sphere, &sxi, &slam, 1e-4),
    ] {
        let ((y, yl1), (b, bl1)) = identity_pair(grid, xi, lam);
        let ((yf, _), (bf, _)) = identity_pair(&grid.refined().unwrap(), xi, lam);
        ok &= y < bound && b < bound && halves(y, yf, yl1) && halves(b, bf, bl1);
        msg.push(format!(
            "{name}: yano {y:.3e} -> {yf:.3e}, bochner {b:.3e} -> {bf:.3e}"
        ));
    }
    (ok, msg.join("; "))
}

fn criterion7() -> Outcome {
    let d = round_sphere_soliton(1.0, &[0.0, 0.0, 1.0], 0.0).unwrap();
    let grid = sphere_grid(1.0, 128, 256).unwrap();
    let mut ok = true;
    let mut summary = Vec::new();
    for id in LemmaId::ALL {
        let r = lemma_residual(id, &d, &grid).unwrap();
        let largest = r.terms.iter().fold(0.0f64, |m, t| m.max(t.l1));
        let tol = 1e-4 * (1.0 + largest);
        let pass = r.residual <= tol;
        ok &= pass;
        println!("    {} residual {:.3e} tol {tol:.3e}", r.id, r.residual);
        for t in &r.terms {
            println!(
                "      {:<24} integral {:+.6e}  L1 {:.6e}",
                t.name, t.integral, t.l1
            );
        }
        if id == LemmaId::L22 {
            let sides = r.lhs.abs() < 1e-6 && r.rhs.abs() < 1e-6;
            ok &= sides;
            summary.push(format!("L2.2 sides {:.2e}/{:.2e}", r.lhs, r.rhs));
        }
        summary.push(format!("{} {:.2e}", r.id, r.residual));
    }
    (ok, summary.join(", "))
}

fn criterion8() -> Outcome {
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let (s, reference) = initial_state(InitProfile::Cigar, 0.0, h).unwrap();
        let (_, traj) = run(&s, 0.1, DtPolicy::default(), reference.as_ref()).unwrap();
        errs.push(traj.last().sup_err.unwrap());
    }
    let (coarse, fine) = (errs[0], errs[1]);
    let ratio = coarse / fine;
    let cigar_ok = fine < 5e-3 && ratio >= 3.5;

    let mut bitwise = true;
    for (profile, h) in [
        (InitProfile::Cigar, 1.0 / 32.0),
        (InitProfile::TorusPerturb, 2.0 * PI / 64.0),
    ] {
        let (s, _) = initial_state(profile, 0.5, h).unwrap();
        let (end, _) = run(&s, 0.1, DtPolicy::default(), None).unwrap();
        bitwise &= end
            .u
            .iter()
            .zip(&s.u)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    }

    let (s, _) = initial_state(InitProfile::TorusPerturb, 0.0, 2.0 * PI / 64.0).unwrap();
    let (_, traj) = run(&s, 2.0, DtPolicy::default(), None).unwrap();
    let s_final = traj.last().max_abs_s;
    let torus_ok = s_final < 1e-3;

    (
        cigar_ok && bitwise && torus_ok,
        format!(
            "cigar err h=1/32 {fine:.3e} (h=1/16 {coarse:.3e}, ratio {ratio:.2}); ρ=½ bitwise {bitwise}; torus max|S| at T=2 {s_final:.3e}"
        ),
    )
}

fn criterion9() -> Outcome {
    let rho = 0.75;
    let t = 0.2;
    let e = cigar_time_factor(rho, t);
    let mut ok = true;
    let mut msg = Vec::new();
    for (label, level, expect) in [
        ("below", 2.5, Classification::Expanding),
        ("at", 3.0, Classification::Steady),
        ("above", 3.5, Classification::Shrinking),
    ] {
        let r2 = level - e;
        let values: Vec<f64> = (0..16)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 16.0;
                let (x, y) = (r2.sqrt() * a.cos(), r2.sqrt() * a.sin());
                cigar_closed_form_lambda(rho, t, x * x + y * y)
            })
            .collect();
        let got = classify(&values, default_classification_eps(&values));
        ok &= got == expect;
        msg.push(format!("{label} 3: {got}"));
    }
    let d = cigar_almost_rb(rho, t).unwrap();
    let report = soliton_residual(&d, &d.default_samples(20)).unwrap();
    match &report.lambda_comparison {
        Some(cmp) => msg.push(format!(
            "trace λ {}, closed-form λ {}, max discrepancy {:.3e}",
            report.classification, cmp.closed_form_classification, cmp.max_discrepancy
        )),
        None => {
            ok = false;
            msg.push("no λ comparison recorded".into());
        }
    }
    (ok, msg.join("; "))
}

fn criterion10() -> Outcome {
    let cases: Vec<(SolitonData, bool)> = vec![
        (hamilton_cigar(), true),
        (cigar_almost_rb(0.3, 0.2).unwrap(), true),
        (
            round_sphere_soliton(1.0, &[0.0, 0.0, 1.0], 0.0).unwrap(),
            true,
        ),
        (warped_product_2d(WarpedParams::default()).unwrap(), true),
    ];
    let mut ok = true;
    let mut msg = Vec::new();
    for (d, gradient) in &cases {
        let r = soliton_residual(d, &d.default_samples(20)).unwrap();
        let id = |k: &str| r.identities.get(k).copied().unwrap_or(f64::INFINITY);
        let (cdopf, rorbs, div) = (id("cdopf"), id("rorbs"), id("div"));
        let mut pass = cdopf < 1e-8 && rorbs < 1e-8 && div < 1e-8;
        if *gradient {
            pass &= r.ctrbs_best() < 1e-8 && !r.ctrbs_passing_variant.is_empty();
        }
        ok &= pass;
        msg.push(format!(
            "{}: cdopf {cdopf:.1e} rorbs {rorbs:.1e} div {div:.1e} ctrbs {:.1e} ({})",
            d.name,
            r.ctrbs_best(),
            r.ctrbs_passing_variant
        ));
    }
    (ok, msg.join("; "))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
        (7, criterion7),
        (8, criterion8),
        (9, criterion9),
        (10, criterion10),
    ];
    let mut failures = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = check();
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {n}: {} {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
