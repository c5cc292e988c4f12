//! Acceptance suite for the one-bit estimators, bounds and harness.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits non-zero if any fail.
//! Runs as a plain binary (`harness = false`) so the lines are never captured.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use onebit_doa::analysis::{asymptotic_error_covariance, resolution_lower_bound, ErrorForm};
use onebit_doa::bounds::{
    crb_from_fim, crb_infinite, crb_onebit_pessimistic, identifiability_test, max_rel_diff, worst_case_fim,
};
use onebit_doa::covariance::{arcsine_law, model_covariance, normalized_from_pbar, offdiag_and_gamma, sine_map};
use onebit_doa::estimators::{ocab_phi, rebuild_rbar, Estimator};
use onebit_doa::geometry::{build_geometry, selection_matrices, standard_array, ArrayGeometry, SelectionSet};
use onebit_doa::harness::{run_experiment, resolution_experiment, to_csv_string, ExperimentConfig, MonteCarloSummary};
use onebit_doa::linalg::{c, vec_of, CMat, RMat};
use onebit_doa::moments::{sigma_matrix, sigma_monte_carlo, SigmaSource};
use onebit_doa::signal::{one_bit_quantize, simulate_snapshots, trial_rng, SourceScene};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn setup(name: &str) -> (ArrayGeometry, SelectionSet) {
    let g = build_geometry(&standard_array(name).unwrap()).unwrap();
    let s = selection_matrices(&g);
    (g, s)
}

fn equispaced(k: usize) -> Vec<f64> {
    (0..k).map(|i| (-60.0 + 120.0 * i as f64 / (k - 1) as f64).to_radians()).collect()
}

fn rmse(s: &MonteCarloSummary, n: f64, est: &str, source: usize) -> f64 {
    s.row(n, est, source).and_then(|r| r.rmse_deg).unwrap_or(f64::NAN)
}

/// Shared Monte-Carlo sweep: nested array, K = 5 equispaced, SNR 3 dB.
fn nested_k5_sweep() -> MonteCarloSummary {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        name = "acceptance-nested-k5"
        geometry = "nested"
        k = 5
        snr_db = 3.0
        trials = 500
        seed = 2024
        estimators = ["eocab", "ocab", "icab"]
        overlays = ["thm6_mse"]
        [sweep]
        variable = "n"
        values = [400, 500, 2000, 8000]
        "#,
    )
    .unwrap();
    run_experiment(&cfg, None).unwrap()
}

fn criterion1(s: &MonteCarloSummary) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for est in ["eocab", "ocab"] {
        let row = s.row(2000.0, est, 2).unwrap();
        let (emp, pred) = (row.rmse_deg.unwrap(), row.mse_thm6_deg.unwrap());
        let rel = emp / pred - 1.0;
        pass &= rel.abs() <= 0.10 && row.trials_flagged == 0;
        parts.push(format!("{est} {emp:.5}° vs predicted {pred:.5}° ({:+.1}%)", 100.0 * rel));
    }
    verdict(pass, format!("N=2000, 500 trials, θ₂: {} (limit ±10%)", parts.join(", ")))
}

fn criterion2(s: &MonteCarloSummary) -> Verdict {
    let (e, o) = (rmse(s, 400.0, "eocab", 2), rmse(s, 400.0, "ocab", 2));
    let gain = 20.0 * (o / e).log10();
    verdict(
        gain >= 1.0,
        format!("N=400, θ₂: EOCAB {e:.5}°, OCAB {o:.5}°, gain {gain:.2} dB (need >= 1 dB)"),
    )
}

fn criterion3() -> Verdict {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        name = "acceptance-nested-k12"
        geometry = "nested"
        k = 12
        snr_db = 3.0
        trials = 200
        seed = 12
        estimators = ["eocab"]
        [sweep]
        variable = "n"
        values = [4000]
        "#,
    )
    .unwrap();
    let s = run_experiment(&cfg, None).unwrap();
    let rows = &s.points[0].rows;
    let worst = rows.iter().map(|r| r.rmse_deg.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let theta2 = rows[1].rmse_deg.unwrap_or(f64::INFINITY);
    let (flagged, fallback) = (rows[0].trials_flagged, rows[0].trials_fallback);
    verdict(
        theta2 < 1.0 && worst < 1.0 && flagged == 0,
        format!(
            "K=12 > M=10, N=4000, 200 trials, EOCAB: RMSE(θ₂) {theta2:.4}°, worst source {worst:.4}°, \
             {flagged} failed, {fallback} with missing peaks"
        ),
    )
}

fn criterion4() -> Verdict {
    let (g, sel) = setup("nested");
    let th = equispaced(5);
    let n = 500;
    let at = |snr: f64| SourceScene::from_snr_db(th.clone(), &[snr]).unwrap();
    let (lo, hi) = (at(40.0), at(60.0));
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let w = (
        crb_onebit_pessimistic(&lo, &g, &sel, n).unwrap().crb[(1, 1)],
        crb_onebit_pessimistic(&hi, &g, &sel, n).unwrap().crb[(1, 1)],
    );
    let src = SigmaSource::default();
    let mse = |scene: &SourceScene, est| {
        asymptotic_error_covariance(scene, &g, &sel, n, est, ErrorForm::Theorem, &src).unwrap().mse[1]
    };
    let e = (mse(&lo, Estimator::Eocab), mse(&hi, Estimator::Eocab));
    let o = (mse(&lo, Estimator::Ocab), mse(&hi, Estimator::Ocab));
    let i = (crb_infinite(&lo, &g, &sel, n).unwrap().crb[(1, 1)], crb_infinite(&hi, &g, &sel, n).unwrap().crb[(1, 1)]);
    let drop_db = 10.0 * (i.0 / i.1).log10();
    let pass = rel(w.0, w.1) < 0.01
        && rel(e.0, e.1) < 0.01
        && rel(o.0, o.1) < 0.01
        && [w.1, e.1, o.1].iter().all(|x| *x > 0.0)
        && drop_db > 10.0;
    verdict(
        pass,
        format!(
            "40→60 dB, θ₂: CRB_w Δ {:.2e}, EOCAB MSE Δ {:.2e}, OCAB MSE Δ {:.2e} (need < 1e-2, all > 0); \
             CRB_I drops {drop_db:.1} dB (need > 10 dB)",
            rel(w.0, w.1),
            rel(e.0, e.1),
            rel(o.0, o.1)
        ),
    )
}

/// Rank of the Jacobian of the off-diagonal arcsine-law entries in `[θ; p̄]`,
/// from central differences and an SVD.
fn jacobian_rank(g: &ArrayGeometry, th: &[f64], pbar: &[f64]) -> (usize, usize) {
    let k = th.len();
    let f = |x: &[f64]| -> Vec<f64> {
        let m = g.sensors.len();
        let mut out = Vec::with_capacity(2 * m * m);
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                let d = (g.sensors[i] - g.sensors[j]) as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for kk in 0..k {
                    let a = PI * d * x[kk].sin();
                    re += x[k + kk] * a.cos();
                    im += x[k + kk] * a.sin();
                }
                out.push(re.asin());
                out.push(im.asin());
            }
        }
        out
    };
    let x0: Vec<f64> = th.iter().chain(pbar).copied().collect();
    let rows = f(&x0).len();
    let h = 1e-6;
    let mut jac = RMat::zeros(rows, 2 * k);
    for col in 0..2 * k {
        let (mut a, mut b) = (x0.clone(), x0.clone());
        a[col] += h;
        b[col] -= h;
        let (fa, fb) = (f(&a), f(&b));
        for r in 0..rows {
            jac[(r, col)] = (fa[r] - fb[r]) / (2.0 * h);
        }
    }
    let sv = jac.singular_values();
    let top = sv.max();
    (sv.iter().filter(|s| **s > 1e-9 * top).count(), 2 * k)
}

fn criterion5() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["nested", "coprime", "mra", "ula"] {
        let (g, sel) = setup(name);
        let mut cell = format!("{name} (D={}, v={}):", g.d_count, g.v);
        for (k, should_identify) in [(g.v - 1, true), (g.d_count, false)] {
            let scene = SourceScene::from_snr_db(equispaced(k), &[3.0]).unwrap();
            let verdict = identifiability_test(&scene, &g).unwrap();
            let (rank, cols) = jacobian_rank(&g, &scene.thetas, &scene.pbar());
            let oracle_full = rank == cols;
            let crb = crb_onebit_pessimistic(&scene, &g, &sel, 500).unwrap();
            let crb_ok = if should_identify {
                crb.valid && crb.crb.diagonal().iter().all(|x| x.is_finite())
            } else {
                !crb.valid
            };
            let ok = verdict.full_column_rank == should_identify && oracle_full == should_identify && crb_ok;
            pass &= ok;
            cell.push_str(&format!(
                " K={k} Υ rank {} oracle {rank}/{cols} CRB_w {}{}",
                verdict.upsilon_rank,
                if crb.valid { "finite" } else { "singular" },
                if ok { "" } else { " MISMATCH" }
            ));
        }
        parts.push(cell);
    }
    verdict(pass, parts.join("; "))
}

fn criterion6() -> Verdict {
    let g = build_geometry(&[0, 2, 3, 4, 6, 9]).unwrap();
    let sel = selection_matrices(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut scenes: Vec<(String, CMat)> = vec![("R̄=I".into(), CMat::identity(6, 6))];
    for i in 0..5 {
        let k = rng.random_range(1..=3);
        let mut th: Vec<f64> = Vec::new();
        while th.len() < k {
            let t: f64 = rng.random_range(-70.0f64..70.0);
            if th.iter().all(|u: &f64| (u - t.to_radians()).abs() > 0.05) {
                th.push(t.to_radians());
            }
        }
        let snr: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..10.0)).collect();
        let scene = SourceScene::from_snr_db(th, &snr).unwrap();
        scenes.push((format!("scene {}", i + 1), model_covariance(&scene, &g).unwrap().rbar));
    }
    for (idx, (label, rbar)) in scenes.iter().enumerate() {
        let an = sigma_matrix(rbar, &sel).unwrap().sigma;
        let mut mc_rng = trial_rng(60, idx, 0);
        let mc = sigma_monte_carlo(rbar, &sel, 1_000_000, &mut mc_rng).unwrap();
        let (se_re, se_im) = (mc.se_re.unwrap(), mc.se_im.unwrap());
        let mut zs = Vec::new();
        for p in 0..an.nrows() {
            for q in p..an.ncols() {
                let d = an[(p, q)] - mc.sigma[(p, q)];
                if se_re[(p, q)] > 0.0 {
                    zs.push((d.re / se_re[(p, q)]).abs());
                }
                if se_im[(p, q)] > 0.0 {
                    zs.push((d.im / se_im[(p, q)]).abs());
                }
            }
        }
        // Family-wise 3σ: the per-entry threshold whose maximum over all
        // comparisons has the same 0.27% false-alarm rate as one 3σ test.
        let alpha = 2.0 * (1.0 - normal.cdf(3.0));
        let per = 1.0 - (1.0 - alpha).powf(1.0 / zs.len() as f64);
        let limit = normal.inverse_cdf(1.0 - per / 2.0);
        let zmax = zs.iter().copied().fold(0.0, f64::max);
        let above3 = zs.iter().filter(|z| **z > 3.0).count();
        let mut ok = zmax <= limit;
        if idx == 0 {
            let pattern = max_abs(&(an.clone() - CMat::identity(30, 30) * c(PI * PI / 4.0, 0.0)));
            ok &= pattern < 1e-12;
        }
        pass &= ok;
        parts.push(format!(
            "{label}: max|z| {zmax:.2} (limit {limit:.2}), {above3}/{} beyond 3σ (expected {:.1})",
            zs.len(),
            alpha * zs.len() as f64
        ));
    }
    verdict(pass, format!("M=6 co-prime, 10⁶ resamples; {}", parts.join("; ")))
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn criterion7(s: &MonteCarloSummary) -> Verdict {
    let ns = [500.0, 2000.0, 8000.0];
    let x: Vec<f64> = ns.iter().map(|n: &f64| n.ln()).collect();
    let xm = x.iter().sum::<f64>() / 3.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for est in ["eocab", "ocab", "icab"] {
        let y: Vec<f64> = ns.iter().map(|&n| rmse(s, n, est, 2).ln()).collect();
        let ym = y.iter().sum::<f64>() / 3.0;
        let slope = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>()
            / x.iter().map(|a| (a - xm).powi(2)).sum::<f64>();
        pass &= (slope + 0.5).abs() <= 0.05;
        parts.push(format!("{est} {slope:.3}"));
    }
    verdict(pass, format!("log-log slope of RMSE(θ₂) over N ∈ {{500, 2000, 8000}}: {} (need −0.5 ± 0.05)", parts.join(", ")))
}

fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    let i = ys.iter().position(|y| *y >= level)?;
    if i == 0 {
        return Some(xs[0]);
    }
    let t = (level - ys[i - 1]) / (ys[i] - ys[i - 1]);
    Some(xs[i - 1] + t * (xs[i] - xs[i - 1]))
}

fn criterion8() -> Verdict {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        name = "acceptance-resolution"
        geometry = "nested"
        snr_db = 0.0
        n = 500
        trials = 500
        seed = 88
        estimators = ["eocab", "ocab", "icab"]
        overlays = ["resolution_bound"]
        [placement]
        kind = "pair"
        center_deg = 20.0
        [sweep]
        variable = "delta_theta_deg"
        values = [0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.8, 2.0]
        "#,
    )
    .unwrap();
    let s = resolution_experiment(&cfg, None).unwrap();
    let xs = &cfg.sweep.values;
    let freq = |est: &str| -> Vec<f64> {
        xs.iter().map(|&d| s.row(d, est, 1).unwrap().resolution_freq.unwrap()).collect()
    };
    let mut pass = true;
    let mut violations = Vec::new();
    for est in ["eocab", "ocab"] {
        for &d in xs {
            let row = s.row(d, est, 1).unwrap();
            let (f, b) = (row.resolution_freq.unwrap(), row.resolution_bound.unwrap());
            let se = (f * (1.0 - f) / cfg.trials as f64).sqrt();
            if b > f + 2.0 * se {
                pass = false;
                violations.push(format!("{est}@{d}° bound {b:.3} > freq {f:.3}"));
            }
        }
    }
    let emp: Vec<Option<f64>> = ["eocab", "ocab", "icab"].iter().map(|e| crossing(xs, &freq(e), 0.9)).collect();
    let eocab_emp = emp[0].unwrap_or(f64::NAN);
    pass &= (1.0..=1.5).contains(&eocab_emp);
    // Predicted crossing: bisection on the analytic bound.
    let (g, sel) = setup("nested");
    let src = SigmaSource::default();
    let bound_at = |est: Estimator, d: f64| {
        let th = vec![(20.0 - d / 2.0).to_radians(), (20.0 + d / 2.0).to_radians()];
        let scene = SourceScene::from_snr_db(th, &[0.0]).unwrap();
        let model = asymptotic_error_covariance(&scene, &g, &sel, 500, est, ErrorForm::Theorem, &src).unwrap();
        resolution_lower_bound(&model, 0, 1, d.to_radians()).unwrap().raw
    };
    let predict = |est: Estimator| {
        let (mut lo, mut hi) = (0.1, 10.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if bound_at(est, mid) >= 0.9 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (pe, po) = (predict(Estimator::Eocab), predict(Estimator::Ocab));
    pass &= (1.2..=1.6).contains(&pe);
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.3}°")).unwrap_or_else(|| "none".into());
    verdict(
        pass,
        format!(
            "N=500, 0 dB, 500 trials/Δθ: empirical 0.9-crossing EOCAB {} (need [1.0°, 1.5°]), OCAB {}, ICAB {}; \
             predicted EOCAB {pe:.3}° (need [1.2°, 1.6°]), OCAB {po:.3}°; bound vs frequency: {}",
            fmt(emp[0]),
            fmt(emp[1]),
            fmt(emp[2]),
            if violations.is_empty() { "no violations".to_string() } else { violations.join(", ") }
        ),
    )
}

/// FIM of `[θ; p̄]` from central differences of the arcsine-law covariance.
fn fd_fim(g: &ArrayGeometry, th: &[f64], pbar: &[f64], n: usize) -> RMat {
    let k = th.len();
    let rx_of = |t: &[f64], p: &[f64]| arcsine_law(&normalized_from_pbar(g, t, p).unwrap()).unwrap();
    let h = 1e-6;
    let derivs: Vec<CMat> = (0..2 * k)
        .map(|idx| {
            let (mut tp, mut tm, mut pp, mut pm) = (th.to_vec(), th.to_vec(), pbar.to_vec(), pbar.to_vec());
            if idx < k {
                tp[idx] += h;
                tm[idx] -= h;
            } else {
                pp[idx - k] += h;
                pm[idx - k] -= h;
            }
            (rx_of(&tp, &pp) - rx_of(&tm, &pm)) / c(2.0 * h, 0.0)
        })
        .collect();
    let rinv = rx_of(th, pbar).try_inverse().unwrap();
    let kron = rinv.transpose().kronecker(&rinv);
    RMat::from_fn(2 * k, 2 * k, |a, b| {
        (vec_of(&derivs[a]).adjoint() * &kron * vec_of(&derivs[b]))[(0, 0)].re * n as f64
    })
}

fn criterion9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut parts = Vec::new();
    let mut pass = true;
    let (g, sel) = setup("nested");

    // Arcsine law and sine map are mutual inverses.
    let mut bij = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(1..=6);
        let th: Vec<f64> = (0..k).map(|_| rng.random_range(-1.4..1.4)).collect();
        let snr: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..20.0)).collect();
        let Ok(scene) = SourceScene::from_snr_db(th, &snr) else { continue };
        let rbar = model_covariance(&scene, &g).unwrap().rbar;
        bij = bij.max(max_abs(&(sine_map(&arcsine_law(&rbar).unwrap()) - &rbar)));
    }
    pass &= bij <= 1e-14;
    parts.push(format!("bijection {bij:.1e}"));

    // Sign quantisation ignores positive scaling.
    let scene = SourceScene::from_snr_db(equispaced(5), &[3.0]).unwrap();
    let y = simulate_snapshots(&scene, &g, 200, &mut trial_rng(9, 0, 0)).unwrap();
    let scale_ok = [1e-6, 0.37, 42.0, 1e9].iter().all(|s| one_bit_quantize(&(&y * c(*s, 0.0))) == one_bit_quantize(&y));
    pass &= scale_ok;
    parts.push(format!("scale invariance {}", if scale_ok { "exact" } else { "BROKEN" }));

    // φ → R̄ → φ.
    let mut rt = 0.0f64;
    for _ in 0..20 {
        let phi: Vec<f64> = (0..2 * (g.d_count - 1)).map(|_| rng.random_range(-0.03..0.03)).collect();
        let r = rebuild_rbar(&phi, &sel);
        let back = ocab_phi(&offdiag_and_gamma(&r, &sel).unwrap().r_ddot, &sel);
        rt = rt.max(phi.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    pass &= rt <= 1e-10;
    parts.push(format!("φ round trip {rt:.1e}"));

    // FIM against finite differences, and the closed-form CRB against the FIM inverse.
    let coprime6 = build_geometry(&[0, 2, 3, 4, 6, 9]).unwrap();
    let sel6 = selection_matrices(&coprime6);
    let th = [-0.4, 0.3, 0.9];
    let scene3 = SourceScene::from_snr_db(th.to_vec(), &[0.0, 3.0, -2.0]).unwrap();
    let fim = worst_case_fim(&scene3, &coprime6, &sel6, 50).unwrap();
    let fd = max_rel_diff(&fim, &fd_fim(&coprime6, &th, &scene3.pbar(), 50));
    pass &= fd <= 1e-4;
    parts.push(format!("FIM vs finite differences {fd:.1e}"));
    let mut crb_gap = 0.0f64;
    for (geo, s, sc) in [(&g, &sel, &scene), (&coprime6, &sel6, &scene3)] {
        let rep = crb_onebit_pessimistic(sc, geo, s, 500).unwrap();
        let block = crb_from_fim(&worst_case_fim(sc, geo, s, 500).unwrap(), sc.k()).unwrap();
        crb_gap = crb_gap.max(max_rel_diff(&rep.crb, &block));
    }
    pass &= crb_gap <= 1e-8;
    parts.push(format!("CRB_w vs FIM block {crb_gap:.1e}"));

    // Byte-identical CSV for different worker counts.
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        geometry = "nested"
        k = 3
        snr_db = 0.0
        trials = 24
        seed = 99
        overlays = ["crb_w"]
        [sweep]
        variable = "n"
        values = [100, 300]
        "#,
    )
    .unwrap();
    let csvs: Vec<String> = [1, 2, 4].iter().map(|w| to_csv_string(&run_experiment(&cfg, Some(*w)).unwrap())).collect();
    let same = csvs.windows(2).all(|w| w[0] == w[1]);
    pass &= same;
    parts.push(format!("CSV across 1/2/4 workers {}", if same { "identical" } else { "DIFFERENT" }));

    verdict(pass, parts.join(", "))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |n: usize, title: &str, v: Verdict| {
        failed += usize::from(!v.pass);
        println!("criterion {n} [{}] {title}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    // Criterion numbers on the command line select a subset.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let sweep = [1, 2, 7].into_iter().any(wanted).then(nested_k5_sweep);
    let sweep = || sweep.as_ref().expect("shared sweep computed");
    let mut ran = 0;
    let mut check = |n: usize, title: &str, f: &dyn Fn() -> Verdict| {
        if wanted(n) {
            ran += 1;
            report(n, title, f());
        }
    };
    check(1, "analytic vs empirical MSE", &|| criterion1(sweep()));
    check(2, "EOCAB below OCAB", &|| criterion2(sweep()));
    check(3, "more sources than sensors", &criterion3);
    check(4, "high-SNR saturation", &criterion4);
    check(5, "identifiability boundary", &criterion5);
    check(6, "Σ quadrature vs Monte Carlo", &criterion6);
    check(7, "consistency and 1/√N rate", &|| criterion7(sweep()));
    check(8, "resolution study", &criterion8);
    check(9, "property suite", &criterion9);
    println!("acceptance: {failed} of {ran} criteria failed ({:.0} s)", started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
