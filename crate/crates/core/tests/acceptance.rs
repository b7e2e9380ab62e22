//! Acceptance suite: one pass/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the test harness so that the lines are
//! always printed.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use common::{direct_scalar_forms, polynomial_roots, rng, z, Solved};
use wavepencil::c64;
use wavepencil::forms::{pencil_qform, ScalarFormValues};
use wavepencil::modal::{
    basis_decay, biorthogonalize, completeness_residual, norm_identities, smooth_target, transversal, verify_pairing_recursion,
    Pairing, SplitOperators,
};
use wavepencil::pipeline::{evanescent_family, run, trend_window, windowed_increases, RunConfig, Stage};
use wavepencil::spectra::{
    check_contrast, check_poincare, check_inequalities, estimate_r_tilde, random_field, sample_fields, verify_localization,
    viete_completion, LocalizationRegions,
};
use wavepencil::waves::{build_transversal, curl_relations, weak_identities, TransversalField};

/// Identity residuals must stay below `C·h`.
const C: f64 = 1e-6;
/// Below this level a residual is roundoff and no refinement trend applies.
const ROUNDOFF_FLOOR: f64 = 1e-8;
/// Required reduction factor of a discretization residual per halving.
const SHRINK: f64 = 1.7;
const TOL: f64 = 1e-8;

type Outcome = (bool, String);

fn lowest_waves(s: &Solved, count: usize) -> Vec<Vec<TransversalField>> {
    s.chains.iter().take(count).map(|c| build_transversal(c, &s.forms, &s.mesh, TOL).unwrap()).collect()
}

/// A refinement pair passes when the fine level is below `C·h` and, unless
/// both levels are at roundoff, smaller by at least `factor`.
fn refines(coarse: f64, fine: f64, h_fine: f64, limit_c: f64, factor: f64) -> bool {
    let below = fine <= limit_c * h_fine;
    let trend = (coarse < ROUNDOFF_FLOOR && fine < ROUNDOFF_FLOOR) || coarse / fine >= factor;
    below && trend
}

// 1 ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    // λ = 1 − γ² against the Dirichlet and Neumann eigenvalues of [0,π]²
    let mut oracle: Vec<f64> = common::rectangle_eigenvalues(PI, PI, true, 30);
    oracle.extend(common::rectangle_eigenvalues(PI, PI, false, 30));
    oracle.sort_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()).then(a.total_cmp(b)));
    let mut exact: Vec<f64> = oracle[..8].to_vec();
    exact.sort_by(f64::total_cmp);
    let mut errors = Vec::new();
    let mut seconds = 0.0;
    for div in [16, 32] {
        let t0 = Instant::now();
        let (mesh, mat) = common::homogeneous(PI, PI, PI / div as f64, 1.0);
        let s = common::solve(mesh, mat);
        seconds = t0.elapsed().as_secs_f64();
        let mut mu: Vec<c64> = s.chains.iter().filter(|c| c.gamma.im > 0.0 || (c.gamma.im == 0.0 && c.gamma.re > 0.0)).map(|c| c.gamma * c.gamma).collect();
        mu.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let mut lam: Vec<f64> = mu[..8].iter().map(|m| 1.0 - m.re).collect();
        lam.sort_by(f64::total_cmp);
        errors.push(lam.iter().zip(&exact).map(|(l, e)| (l - e).abs() / e).collect::<Vec<f64>>());
    }
    let worst = errors[1].iter().copied().fold(0.0, f64::max);
    let orders: Vec<f64> = errors[0].iter().zip(&errors[1]).map(|(a, b)| (a / b).log2()).collect();
    let (omin, omax) = orders.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &o| (lo.min(o), hi.max(o)));
    let ok = worst <= 0.02 && omin >= 1.7 && omax <= 2.3 && seconds <= 300.0;
    (ok, format!("max rel. error {worst:.2e} at h = π/32, order {omin:.2}–{omax:.2}, π/32 solve {seconds:.0} s"))
}

// 2 ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let (mesh, mat) = common::partially_filled(8, 4.0);
    let forms = wavepencil::forms::assemble_forms(&mesh, &mat).unwrap();
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let f = random_field(forms.n(), &mut r);
        let (pi, psi) = forms.to_nodal(&f);
        let [k, a1, a2r, s, _] = direct_scalar_forms(&pi, &psi, &mesh, &mat);
        for i in 0..20 {
            let t = i as f64 / 20.0 * 2.0 * PI;
            let g = z(2.5 * t.cos() * (1.0 + 0.1 * i as f64), 1.7 * t.sin());
            let g2 = g * g;
            let (d1, d2) = (z(mat.eps1, 0.0) - g2, z(mat.eps2, 0.0) - g2);
            let fg = (g * s + a1) / d1 + (z(a2r, 0.0) - g * s) / d2;
            let rhs = d1 * d2 * (z(k, 0.0) - fg);
            let lhs = pencil_qform(g, &f, &forms);
            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()));
        }
    }
    (worst <= 1e-10, format!("max rel. error {worst:.2e} over 1000 fields × 20 γ"))
}

// 3 ---------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let (mesh, mat) = common::partially_filled(8, 4.0);
    let forms = wavepencil::forms::assemble_forms(&mesh, &mat).unwrap();
    let mut r = rng(103);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for _ in 0..1000 {
        let f = random_field(forms.n(), &mut r);
        let rep = check_inequalities(&f, &forms, 32).unwrap();
        // independent evaluation from elementwise form values
        let (pi, psi) = forms.to_nodal(&f);
        let [_, a1, a2r, s, a2] = direct_scalar_forms(&pi, &psi, &mesh, &mat);
        let mut ok = rep.holds(1e-12);
        for (a, e) in [(a1, mat.eps1), (a2r, mat.eps2)] {
            ok &= a - e.sqrt() * s.abs() >= -1e-12 * a;
        }
        for i in 1..64 {
            let g = -1.0 + 2.0 * i as f64 / 64.0;
            let fg = (a1 + g * s) / (mat.eps1 - g * g) + (a2r - g * s) / (mat.eps2 - g * g);
            ok &= fg - a2 / 2.0 > -1e-12 * a2;
            min_margin = min_margin.min((fg - a2 / 2.0) / (a2 / 2.0));
        }
        if !ok {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} violations in 1000 fields, min lower-bound margin {min_margin:.3}"))
}

// 4 ---------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let (mesh, mat) = common::scaled_square(PI / 2.0, 8, (1.0, 2.0));
    let s = common::solve(mesh, mat);
    let contrast = check_contrast(&mat);
    let poincare = check_poincare(&s.forms).unwrap();
    let mut r = rng(104);
    let fields = sample_fields(&s.forms, 10, 200, &mut r).unwrap();
    let (r_tilde, _) = estimate_r_tilde(&fields, &s.forms).unwrap();
    let regions = LocalizationRegions::new(&mat, r_tilde).unwrap();
    let gammas: Vec<c64> = s.chains.iter().map(|c| c.gamma).collect();
    let rep = verify_localization(&gammas, &regions, &contrast, &poincare);
    let inner = gammas.iter().filter(|g| g.im.abs() < 1e-9 && g.re.abs() < mat.eps1.sqrt() - 1e-9).count();
    let ok = contrast.holds && poincare.holds && rep.certified && rep.violations.is_empty() && inner == 0;
    (
        ok,
        format!(
            "μ* = {:.4}, r̃ = {r_tilde:.3}, {} eigenvalues, {} violations, {inner} real in (−√ε₁, √ε₁)",
            poincare.mu_star,
            rep.checked,
            rep.violations.len()
        ),
    )
}

// 5 ---------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let (mesh, mat) = common::scaled_square(PI / 2.0, 8, (1.0, 2.0));
    let forms = wavepencil::forms::assemble_forms(&mesh, &mat).unwrap();
    let (lo, hi) = (mat.eps1.sqrt(), mat.eps2.sqrt());
    let mut r = rng(105);
    let mut worst = 0.0f64;
    let mut failed = 0;
    for _ in 0..200 {
        let f = random_field(forms.n(), &mut r);
        let (pi, psi) = forms.to_nodal(&f);
        let [k, a1, a2r, s, a2] = direct_scalar_forms(&pi, &psi, &mesh, &mat);
        let v = ScalarFormValues::new(k, a1, a2r, s, a2).unwrap();
        let roots = polynomial_roots(&v.quartic_coefficients(&mat));
        let in_interval = |g: &c64, sign: f64| g.im.abs() < 1e-9 && (sign * g.re) >= lo - 1e-9 && (sign * g.re) <= hi + 1e-9;
        let (Some(g1), Some(g2)) = (roots.iter().find(|g| in_interval(g, -1.0)), roots.iter().find(|g| in_interval(g, 1.0))) else {
            failed += 1;
            continue;
        };
        let others: Vec<c64> = roots.iter().filter(|g| !in_interval(g, -1.0) && !in_interval(g, 1.0)).copied().collect();
        let c = viete_completion(g1.re, g2.re, v.theta, &mat).unwrap();
        if others.len() != 2 {
            failed += 1;
            continue;
        }
        let d = common::match_roots(&[c.gamma3, c.gamma4], &others) / (1.0 + c.gamma3.norm());
        worst = worst.max(d);
    }
    (failed == 0 && worst <= 1e-9, format!("max scaled deviation {worst:.2e} over 200 fields, {failed} without the interval pattern"))
}

// 6, 7, 8 ---------------------------------------------------------------------

struct Level {
    s: Solved,
    waves: Vec<Vec<TransversalField>>,
}

fn level(div: usize) -> Level {
    let (mesh, mat) = common::partially_filled(div, 2.0);
    let s = common::solve(mesh, mat);
    let waves = lowest_waves(&s, 10);
    Level { s, waves }
}

fn identity_residuals(l: &Level) -> Vec<f64> {
    l.waves
        .iter()
        .map(|w| {
            weak_identities(w, &l.s.mesh, &l.s.mat)
                .into_iter()
                .chain(curl_relations(w, &l.s.mesh, &l.s.mat))
                .map(|e| e.relative)
                .fold(0.0, f64::max)
        })
        .collect()
}

fn criterion_6(levels: &[Level]) -> Outcome {
    let a = identity_residuals(&levels[0]);
    let b = identity_residuals(&levels[1]);
    let h = levels[1].s.mesh.h();
    let ok = a.iter().zip(&b).all(|(&x, &y)| refines(x, y, h, C, SHRINK)) && a.iter().all(|&x| x <= C * levels[0].s.mesh.h());
    let wa = a.iter().copied().fold(0.0, f64::max);
    let wb = b.iter().copied().fold(0.0, f64::max);
    (ok, format!("max residual {wa:.2e} (π/8) → {wb:.2e} (π/16), limit C·h = {:.2e}", C * h))
}

fn pairing_max(l: &Level) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..l.waves.len() {
        for j in 0..l.waves.len() {
            if i != j && l.s.chains[i].cluster_id != l.s.chains[j].cluster_id {
                let e = verify_pairing_recursion(&l.waves[i], &l.waves[j], &l.s.mesh, Pairing::Bilinear).unwrap();
                worst = worst.max(e.iter().map(|x| x.normalized_pairing).fold(0.0, f64::max));
            }
        }
    }
    worst
}

fn criterion_7(levels: &[Level]) -> Outcome {
    let p: Vec<f64> = levels.iter().map(pairing_max).collect();
    let h = levels[1].s.mesh.h();
    let decreasing = (p[0] < ROUNDOFF_FLOOR && p[1] < ROUNDOFF_FLOOR) || p[1] < p[0];
    let limits = p[0] <= C * levels[0].s.mesh.h() && p[1] <= C * h;
    let mut gram = 0.0f64;
    let mut blocks = 0;
    for l in levels {
        let g = biorthogonalize(&l.s.chains[..l.waves.len()], &l.waves, &l.s.mesh, Pairing::Bilinear, 1e8).unwrap();
        for b in g.blocks.iter().filter(|b| b.conditioned) {
            gram = gram.max(b.residual);
            blocks += 1;
        }
    }
    (
        limits && decreasing && gram <= 1e-10,
        format!("max normalized pairing {:.2e} → {:.2e}; GA = I residual {gram:.2e} over {blocks} blocks", p[0], p[1]),
    )
}

fn criterion_8(levels: &[Level]) -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for l in levels {
        let limit = 2.0 * C * l.s.mesh.h();
        for (c, w) in l.s.chains.iter().zip(&l.waves) {
            if c.len() != 1 || c.algebraic_multiplicity != 1 {
                continue;
            }
            let rep = norm_identities(&w[0], &l.s.mesh, &l.s.mat).unwrap();
            if let Some(e) = rep.energy_identity {
                checked += 1;
                worst = worst.max(e);
                ok &= e <= limit;
            }
        }
    }
    (ok && checked > 0, format!("{checked} non-real simple modes, max rel. difference {worst:.2e}"))
}

// 9 ---------------------------------------------------------------------------

fn criterion_9(levels: &[Level]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (l, name) in levels.iter().zip(["π/8", "π/16"]) {
        let fam = evanescent_family(&l.s.chains);
        let ev: Vec<TransversalField> =
            fam.iter().map(|&i| build_transversal(&l.s.chains[i], &l.s.forms, &l.s.mesh, TOL).unwrap().remove(0)).collect();
        let rows = basis_decay(&ev, &l.s.mesh, &l.s.mat).unwrap();
        let ratio = rows.iter().map(|r| r.n_abs / r.bound).fold(0.0, f64::max);
        let n: Vec<f64> = rows.iter().map(|r| r.n_abs).collect();
        let w = trend_window(n.len());
        let (bad, steps) = windowed_increases(&n, w);
        ok &= ratio <= 1.05 && bad == 0 && steps >= 2;
        parts.push(format!("{name}: {} modes, max |N|/bound {ratio:.3}, {bad}/{steps} rising windows of {w}", rows.len()));
    }
    (ok, parts.join("; "))
}

// 10 --------------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let (mesh, mat) = common::partially_filled(8, 2.0);
    let forms = wavepencil::forms::assemble_forms(&mesh, &mat).unwrap();
    let ops = SplitOperators::new(&mesh, &forms);
    let boundary = mesh.boundary_nodes();
    let mut r = rng(110);
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let mut f0 = random_field(mesh.n_nodes(), &mut r);
        for &b in &boundary {
            f0[b] = z(0.0, 0.0);
        }
        let g0 = random_field(mesh.n_nodes(), &mut r);
        s1 = s1.max(ops.split_1(&ops.compose_1(&f0, &g0)).unwrap().residual);
        s2 = s2.max(ops.split_2(&ops.compose_2(&f0, &g0)).unwrap().residual);
    }
    (s1.max(s2) <= 1e-10, format!("max recovery residual {s1:.2e} (first), {s2:.2e} (second) over 100 pairs"))
}

// 11 --------------------------------------------------------------------------

fn criterion_11(coarse: &Level) -> Outcome {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c = &manifest["completeness"];
    assert_eq!(c["h_divisions"].as_u64(), Some(8), "fixture level");
    let s = &coarse.s;
    let mut fields = Vec::new();
    for ch in &s.chains {
        for w in build_transversal(ch, &s.forms, &s.mesh, TOL).unwrap() {
            fields.push(transversal(&w));
        }
    }
    let curve = completeness_residual(&smooth_target(&s.mesh, &s.mat), &fields, &s.mesh).unwrap();
    let rises = curve.residuals.windows(2).map(|p| p[1].1 - p[0].1).fold(0.0, f64::max);
    let mut ok = rises <= 1e-12;
    let mut parts = Vec::new();
    for t in c["thresholds"].as_array().unwrap() {
        let m = t["modes"].as_u64().unwrap() as usize;
        let limit = t["max_residual"].as_f64().unwrap();
        let value = curve.residuals[m - 1].1;
        ok &= value <= limit;
        parts.push(format!("M={m}: {value:.4} ≤ {limit}"));
    }
    (ok, format!("nonincreasing over {} fields; {}", fields.len(), parts.join(", ")))
}

// 12 --------------------------------------------------------------------------

fn criterion_12() -> Outcome {
    let cfg: RunConfig = serde_json::from_str(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/partially_filled.json")).unwrap(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut bundles = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let outcome = run(&cfg, &out, Stage::Report).unwrap();
        assert!(outcome.passed, "{:?}", outcome.failed);
        let mut files = Vec::new();
        let mut stack = vec![out.clone()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push((p.strip_prefix(&out).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        bundles.push(files);
    }
    let same = bundles[0] == bundles[1];
    let bytes: usize = bundles[0].iter().map(|f| f.1.len()).sum();
    (same, format!("{} files, {bytes} bytes, identical: {same}", bundles[0].len()))
}

fn main() {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n:2}: {} — {}", if o.0 { "pass" } else { "FAIL" }, o.1);
        results.push((n, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    let levels = [level(8), level(16)];
    report(6, criterion_6(&levels));
    report(7, criterion_7(&levels));
    report(8, criterion_8(&levels));
    report(9, criterion_9(&levels));
    report(10, criterion_10());
    report(11, criterion_11(&levels[0]));
    report(12, criterion_12());
    let failed: Vec<usize> = results.iter().filter(|r| !r.1 .0).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
