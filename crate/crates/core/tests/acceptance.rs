//! Acceptance suite: one PASS / FAIL / BLOCKED / SKIPPED line per criterion.
//!
//! Criteria that need the canonical KDD'99 files read them from the directory
//! named by `KDD_DATA_DIR` (holding `kddcup.data` and `corrected`) and report
//! BLOCKED when it is unset. The full-scale reproduction additionally requires
//! `OSIR_STRETCH=1` and never affects the exit status.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use osir::calibration::{Location, Tail, WeibullFitter};
use osir::eval::{check_identities, emit_report, read_report, EvaluationReport};
use osir::ingest::Taxonomy;
use osir::openset::{train_platt, train_wsvm, OpenSetClassifier, Prediction, WsvmConfig};
use osir::pipeline::{
    self, desk_experiment, prepare_from_readers, unique_records, DeskSettings, EvalSettings,
    PrepareConfig, Prepared, TrainSettings,
};
use osir::svm::{rbf_kernel, smo_train_with_solution, ClassWeighting, KernelParams, SolverConfig};
use osir::synth::{gaussian_blobs, generate_corpus, CorpusConfig, TEST_FILE, TRAIN_FILE};
use osir::{Execution, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
    Skipped(String),
}

struct Criterion {
    id: u8,
    name: &'static str,
    gating: bool,
    run: fn() -> Outcome,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    if passed {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn or_fail(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e| Outcome::Fail(format!("error: {e}")))
}

fn kdd_dir() -> Option<PathBuf> {
    std::env::var_os("KDD_DATA_DIR").map(PathBuf::from)
}

// ---------------------------------------------------------------------------
// 1. Dedup counts on the canonical files.

const KDD_COUNTS: [(&str, usize, usize); 2] =
    [(TRAIN_FILE, 4_898_431, 1_074_974), (TEST_FILE, 311_029, 77_216)];

fn dedup_counts() -> Outcome {
    let Some(dir) = kdd_dir() else {
        return Outcome::Blocked("KDD_DATA_DIR is not set; the canonical KDD'99 files are required".into());
    };
    or_fail((|| {
        let mut details = Vec::new();
        let mut ok = true;
        for (file, want_total, want_unique) in KDD_COUNTS {
            let path = dir.join(file);
            let reader = BufReader::new(File::open(&path).map_err(|e| {
                osir::Error::InvalidInput(format!("{}: {e}", path.display()))
            })?);
            let (dedup, total) = unique_records(reader, Execution::Parallel)?;
            let unique = dedup.unique();
            ok &= total == want_total && unique == want_unique;
            details.push(format!("{file}: {total}->{unique} (expected {want_total}->{want_unique})"));
        }
        Ok(outcome(ok, details.join("; ")))
    })())
}

// ---------------------------------------------------------------------------
// 2. SMO against an independent interior-point QP solver.

/// Primal-dual interior point for `min 1/2 a'Qa - e'a` s.t. `y'a = 0`,
/// `0 <= a <= c`.
fn qp_oracle(q: &DMatrix<f64>, y: &DVector<f64>, c: f64) -> DVector<f64> {
    let n = y.len();
    let mut a = DVector::from_element(n, c / 2.0);
    let mut z = DVector::from_element(n, 1.0);
    let mut w = DVector::from_element(n, 1.0);
    let mut nu = 0.0;
    for _ in 0..500 {
        let s = a.map(|ai| c - ai);
        let rd = q * &a - DVector::from_element(n, 1.0) - &z + &w + y * nu;
        let rp = y.dot(&a);
        let gap = (a.dot(&z) + s.dot(&w)) / (2 * n) as f64;
        if rd.amax() < 1e-12 && rp.abs() < 1e-12 && gap < 1e-13 {
            break;
        }
        let mu = 0.1 * gap;
        let mut k = DMatrix::zeros(n + 1, n + 1);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = q[(i, j)];
            }
            k[(i, i)] += z[i] / a[i] + w[i] / s[i];
            k[(i, n)] = y[i];
            k[(n, i)] = y[i];
            rhs[i] = -rd[i] + mu / a[i] - z[i] - mu / s[i] + w[i];
        }
        rhs[n] = -rp;
        let step = k.lu().solve(&rhs).expect("interior-point system is nonsingular");
        let da = step.rows(0, n).into_owned();
        let dnu = step[n];
        let dz = DVector::from_fn(n, |i, _| (mu - a[i] * z[i] - z[i] * da[i]) / a[i]);
        let dw = DVector::from_fn(n, |i, _| (mu - s[i] * w[i] + w[i] * da[i]) / s[i]);
        let mut alpha: f64 = 1.0;
        for i in 0..n {
            for (v, dv) in [(a[i], da[i]), (s[i], -da[i]), (z[i], dz[i]), (w[i], dw[i])] {
                if dv < 0.0 {
                    alpha = alpha.min(-0.99 * v / dv);
                }
            }
        }
        a += da * alpha;
        z += dz * alpha;
        w += dw * alpha;
        nu += dnu * alpha;
    }
    a
}

fn smo_oracle() -> Outcome {
    const INSTANCES: usize = 200;
    const OBJECTIVE_TOL: f64 = 1e-6;
    // The objective tolerance is absolute, so the solver runs with a stopping
    // tolerance tight enough for C = 1000; KKT is then checked at 10 * tol.
    let cfg = SolverConfig {
        tol: 1e-9,
        ..SolverConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_obj: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut failures = Vec::new();
    for inst in 0..INSTANCES {
        let n = rng.random_range(2..=20);
        let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let c = [1.0, 10.0, 1000.0][rng.random_range(0..3)];
        let gamma = [0.1, 1.0][rng.random_range(0..2)];
        let x = osir::dataset::FeatureMatrix::from_rows(&points).unwrap();
        let params = KernelParams::new(c, gamma).unwrap();
        let (_, sol) = match smo_train_with_solution(&x, &y, params, ClassWeighting::None, &cfg) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("instance {inst}: {e}"));
                continue;
            }
        };
        let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * rbf_kernel(&points[i], &points[j], gamma).unwrap());
        let yv = DVector::from_column_slice(&y);
        let objective = |a: &DVector<f64>| 0.5 * a.dot(&(&q * a)) - a.sum();
        let oracle = qp_oracle(&q, &yv, c);
        let a = DVector::from_column_slice(&sol.alpha);
        let diff = (objective(&a) - objective(&oracle)).abs();
        worst_obj = worst_obj.max(diff);

        // KKT from a recomputed gradient: max violating pair gap.
        let grad = &q * &a - DVector::from_element(n, 1.0);
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for i in 0..n {
            let v = -y[i] * grad[i];
            let in_up = (y[i] > 0.0 && a[i] < c) || (y[i] < 0.0 && a[i] > 0.0);
            let in_low = (y[i] < 0.0 && a[i] < c) || (y[i] > 0.0 && a[i] > 0.0);
            if in_up {
                up = up.max(v);
            }
            if in_low {
                low = low.min(v);
            }
        }
        let kkt_gap = (up - low).max(0.0);
        worst_kkt = worst_kkt.max(kkt_gap);
        let feasible = a.iter().all(|&ai| (0.0..=c).contains(&ai)) && yv.dot(&a).abs() <= 1e-9 * c;
        if diff > OBJECTIVE_TOL || kkt_gap > 10.0 * cfg.tol || !feasible {
            failures.push(format!(
                "instance {inst} (n={n}, C={c}, gamma={gamma}): |dobj|={diff:.3e}, kkt gap={kkt_gap:.3e}, feasible={feasible}"
            ));
        }
    }
    let summary = format!(
        "{INSTANCES} instances, max |dual objective - oracle| = {worst_obj:.2e} (tol {OBJECTIVE_TOL:e}), max KKT gap = {worst_kkt:.2e} (limit {:e})",
        10.0 * cfg.tol
    );
    if failures.is_empty() {
        Outcome::Pass(summary)
    } else {
        Outcome::Fail(format!("{summary}; {} failing: {}", failures.len(), failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// 3. Weibull parameter recovery.

fn weibull_recovery() -> Outcome {
    or_fail((|| {
        let mut ok = true;
        let mut details = Vec::new();
        for (seed, shape, scale) in [(1u64, 2.0, 1.0), (2, 0.8, 3.0)] {
            let dist = Weibull::new(scale, shape).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<f64> = (0..1000).map(|_| dist.sample(&mut rng)).collect();
            let fit = WeibullFitter {
                tail_size: draws.len(),
                tail: Tail::Lower,
                location: Location::Fixed(0.0),
            }
            .fit(&draws)?;
            let ek = (fit.shape - shape).abs() / shape;
            let el = (fit.scale - scale).abs() / scale;
            ok &= ek <= 0.10 && el <= 0.10;
            details.push(format!(
                "(k={shape}, lambda={scale}) -> ({:.4}, {:.4}), rel err {:.2}% / {:.2}%",
                fit.shape,
                fit.scale,
                100.0 * ek,
                100.0 * el
            ));
        }
        Ok(outcome(ok, details.join("; ")))
    })())
}

// ---------------------------------------------------------------------------
// 4. Abatement on three Gaussian blobs.

fn abatement() -> Outcome {
    or_fail((|| {
        let centers = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.75f64.sqrt()]];
        let (x, class_of) = gaussian_blobs(&centers, 0.1, 40, 3)?;
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let params = KernelParams::new(1000.0, 0.1)?;
        let cfg = SolverConfig::default();
        let wsvm = train_wsvm(&x, &class_of, &names, params, &WsvmConfig::default(), &cfg)?;
        let platt = train_platt(&x, &class_of, &names, params, 42, &cfg)?;

        let rows: Vec<&[f64]> = x.iter_rows().collect();
        let diameter = rows
            .iter()
            .flat_map(|a| rows.iter().map(move |b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()))
            .fold(0.0, f64::max);
        let centroid = [
            rows.iter().map(|r| r[0]).sum::<f64>() / rows.len() as f64,
            rows.iter().map(|r| r[1]).sum::<f64>() / rows.len() as f64,
        ];
        let max = |p: Vec<f64>| p.into_iter().fold(0.0, f64::max);

        let mut abating = true;
        let mut rejected = true;
        let mut platt_max: f64 = 0.0;
        let mut profile = Vec::new();
        // Rays from the centroid through each blob center and the opposite way.
        for center in &centers {
            for sign in [1.0, -1.0] {
                let d = [sign * (center[0] - centroid[0]), sign * (center[1] - centroid[1])];
                let norm = d[0].hypot(d[1]);
                let mut prev = f64::INFINITY;
                let mut ray = Vec::new();
                for m in [2.0, 5.0, 10.0] {
                    let q = [centroid[0] + d[0] / norm * m * diameter, centroid[1] + d[1] / norm * m * diameter];
                    let pw = max(wsvm.class_probabilities(&q));
                    abating &= pw <= prev;
                    prev = pw;
                    if m == 10.0 {
                        for t in [0.1, 0.2, 0.3, 0.5, 0.9] {
                            rejected &= wsvm.predict(&q, t).predicted == Prediction::Unknown;
                        }
                    }
                    let pp = max(platt.class_probabilities(&q));
                    platt_max = platt_max.max(pp);
                    ray.push(format!("{m}x {pw:.3}/{pp:.3}"));
                }
                profile.push(ray.join(" "));
            }
        }
        // Non-vacuity: the same model still accepts its own training data.
        let accepted = (0..x.rows())
            .filter(|&i| wsvm.predict(x.row(i), 0.1).predicted == Prediction::Known(class_of[i]))
            .count();
        let members_ok = accepted * 10 >= x.rows() * 8;
        let ok = abating && rejected && platt_max > 0.5 && members_ok;
        Ok(outcome(
            ok,
            format!(
                "diameter {diameter:.3}; W-SVM non-increasing: {abating}, 10x UNKNOWN at t>=0.1: {rejected}; \
                 max Platt probability on far queries {platt_max:.4} (> 0.5 required); \
                 W-SVM accepts {accepted}/{} training points at t=0.1; rays (wsvm/platt max): [{}]",
                x.rows(),
                profile.join(" | ")
            ),
        ))
    })())
}

// ---------------------------------------------------------------------------
// 5 and 6. Desk experiment on the bundled synthetic corpus, and the report
// identities on every evaluation produced here.

fn synthetic_prepared() -> Result<Prepared> {
    let (train, test) = generate_corpus(&CorpusConfig::default())?;
    prepare_from_readers(
        train.join("\n").as_bytes(),
        test.join("\n").as_bytes(),
        &Taxonomy::builtin(),
        &PrepareConfig::default(),
        Execution::Parallel,
    )
}

fn desk_report() -> Result<(EvaluationReport, String)> {
    let prepared = synthetic_prepared()?;
    let out = desk_experiment(
        &prepared,
        &TrainSettings::default(),
        &DeskSettings::default(),
        EvalSettings::default().weight_steps,
        Execution::Parallel,
    )?;
    let detail = format!(
        "synthetic corpus, withheld [{}], {} training / {} test records",
        out.withheld.join(","),
        out.train_size,
        out.test_size
    );
    Ok((out.report, detail))
}

fn desk_crossover() -> Outcome {
    or_fail((|| {
        let (report, detail) = desk_report()?;
        let mut ok = !report.curves.is_empty();
        let mut parts = vec![detail];
        for c in &report.curves {
            let w_star = c.crossover;
            // Strictly above for every grid weight at or beyond w*.
            let holds = w_star.is_some_and(|ws| {
                ws <= 0.30
                    && report
                        .weights
                        .iter()
                        .zip(c.wsvm.iter().zip(&c.platt))
                        .filter(|(w, _)| **w >= ws)
                        .all(|(_, (a, b))| a > b)
            });
            ok &= holds;
            parts.push(format!("t={}: w*={}", c.threshold, w_star.map_or("none".into(), |w| format!("{w:.2}"))));
        }
        Ok(outcome(ok, parts.join("; ")))
    })())
}

/// Recomputes the identities directly from the report's integer counts.
fn independent_identities(report: &EvaluationReport) -> Vec<String> {
    let mut bad = Vec::new();
    for cls in report.classifiers() {
        for row in &cls.sweep {
            let c = &row.counts;
            let n = c.n_known + c.n_unknown;
            if n != report.test_size || c.correct_known + c.correct_unknown != c.correct() {
                bad.push(format!("{} t={}: counts do not cover the test set", cls.family, row.threshold));
            }
            if let (Some(open), Some(k), Some(u)) = (c.open_accuracy(), c.known_accuracy(), c.unknown_accuracy()) {
                let recomposed = (c.n_known as f64 * k + c.n_unknown as f64 * u) / n as f64;
                if (open - recomposed).abs() > 1e-12 * open.abs().max(1.0) {
                    bad.push(format!("{} t={}: open {open} != {recomposed}", cls.family, row.threshold));
                }
            }
        }
    }
    for curves in &report.curves {
        let row = |cls: &osir::eval::ClassifierReport| {
            cls.sweep.iter().find(|r| r.threshold == curves.threshold).map(|r| r.counts)
        };
        for (cls, curve) in [(&report.platt, &curves.platt), (&report.wsvm, &curves.wsvm)] {
            let Some(counts) = row(cls) else {
                bad.push(format!("no sweep row for t={}", curves.threshold));
                continue;
            };
            let (first, last) = (curve[0], curve[curve.len() - 1]);
            if let Some(k) = counts.known_accuracy() {
                if report.weights[0] == 0.0 && first != k {
                    bad.push(format!("{} t={}: perceived(0)={first} != {k}", cls.family, curves.threshold));
                }
            }
            if let Some(u) = counts.unknown_accuracy() {
                if report.weights[report.weights.len() - 1] == 1.0 && last != u {
                    bad.push(format!("{} t={}: perceived(1)={last} != {u}", cls.family, curves.threshold));
                }
            }
        }
    }
    bad
}

fn curve_identities() -> Outcome {
    or_fail((|| {
        let prepared = synthetic_prepared()?;
        let (desk, _) = desk_report()?;
        let train = TrainSettings {
            max_per_class: Some(500),
            ..TrainSettings::default()
        };
        let models = pipeline::train_models(
            &prepared.train,
            prepared.label_space.known(),
            &prepared.preprocess,
            &[osir::openset::Family::Platt, osir::openset::Family::Wsvm],
            &train,
            Execution::Parallel,
        )?;
        let eval = EvalSettings {
            thresholds: vec![0.0, 0.1, 0.2, 0.3],
            ..EvalSettings::default()
        };
        let (full, _) = pipeline::evaluate(&prepared, &models[0], &models[1], &eval, Execution::Parallel)?;

        // The same checks again on reports read back from disk.
        let dir = tempfile::tempdir().map_err(|e| osir::Error::InvalidInput(e.to_string()))?;
        emit_report(&full, dir.path())?;
        let reread = read_report(dir.path())?;

        let mut failures = Vec::new();
        let mut n_checks = 0;
        for (name, report) in [("desk", &desk), ("evaluate", &full), ("evaluate (re-read)", &reread)] {
            for c in check_identities(report) {
                n_checks += 1;
                if !c.passed {
                    failures.push(format!("{name}: {} ({})", c.name, c.detail));
                }
            }
            failures.extend(independent_identities(report).into_iter().map(|b| format!("{name}: {b}")));
        }
        let detail = format!("3 evaluation runs, {n_checks} self-check identities plus independent recomputation");
        Ok(if failures.is_empty() {
            Outcome::Pass(detail)
        } else {
            Outcome::Fail(format!("{detail}; {}", failures.join("; ")))
        })
    })())
}

// ---------------------------------------------------------------------------
// 7. Full-scale reproduction (stretch, never gating).

fn full_scale() -> Outcome {
    let Some(dir) = kdd_dir() else {
        return Outcome::Blocked("KDD_DATA_DIR is not set; full-scale reproduction needs the canonical files".into());
    };
    if std::env::var("OSIR_STRETCH").as_deref() != Ok("1") {
        return Outcome::Skipped("set OSIR_STRETCH=1 to run the hours-long full-scale reproduction".into());
    }
    or_fail((|| {
        let prepared = pipeline::prepare(
            &dir.join(TRAIN_FILE),
            &dir.join(TEST_FILE),
            &Taxonomy::builtin(),
            &PrepareConfig::default(),
            Execution::Parallel,
        )?;
        let models = pipeline::train_models(
            &prepared.train,
            prepared.label_space.known(),
            &prepared.preprocess,
            &[osir::openset::Family::Platt, osir::openset::Family::Wsvm],
            &TrainSettings::default(),
            Execution::Parallel,
        )?;
        let (report, _) =
            pipeline::evaluate(&prepared, &models[0], &models[1], &EvalSettings::default(), Execution::Parallel)?;
        let near = |v: f64, target: f64| (v - target).abs() <= 0.02;
        let mut ok = near(report.platt.closed_accuracy, 0.911) && near(report.wsvm.closed_accuracy, 0.901);
        let mut parts = vec![format!(
            "closed platt {:.4} (0.911), wsvm {:.4} (0.901)",
            report.platt.closed_accuracy, report.wsvm.closed_accuracy
        )];
        for cls in report.classifiers() {
            for row in &cls.sweep {
                let open = row.counts.open_accuracy().unwrap_or(f64::NAN);
                ok &= near(open, 0.915);
                parts.push(format!("{} t={} open {open:.4} (0.915)", cls.family, row.threshold));
            }
        }
        Ok(outcome(ok, parts.join("; ")))
    })())
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // restricts the run to matching criteria.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria = [
        Criterion { id: 1, name: "dedup-counts", gating: true, run: dedup_counts },
        Criterion { id: 2, name: "smo-oracle-equivalence", gating: true, run: smo_oracle },
        Criterion { id: 3, name: "weibull-recovery", gating: true, run: weibull_recovery },
        Criterion { id: 4, name: "abatement", gating: true, run: abatement },
        Criterion { id: 5, name: "desk-crossover", gating: true, run: desk_crossover },
        Criterion { id: 6, name: "curve-identities", gating: true, run: curve_identities },
        Criterion { id: 7, name: "full-scale-stretch", gating: false, run: full_scale },
    ];
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.as_deref().is_none_or(|f| c.name.contains(f))) {
        let start = Instant::now();
        let result = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match result {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += usize::from(c.gating);
                ("FAIL", d)
            }
            Outcome::Blocked(d) => ("BLOCKED", d),
            Outcome::Skipped(d) => ("SKIPPED", d),
        };
        println!("criterion {} {}: {tag} ({secs:.1}s) {detail}", c.id, c.name);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} gating criteria failed");
        ExitCode::FAILURE
    }
}
