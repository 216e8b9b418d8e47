//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! summary is printed on every run; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use iampc::controller::Artifacts;
use iampc::design::{default_eps, solve_design_with, Selection};
use iampc::lp;
use iampc::model::VertexModel;
use iampc::polytope::{Polytope, DEFAULT_ROW_CAP, SET_TOL};
use iampc::qp::{solve_qp, Qp, QpSettings, QpStatus};
use iampc::sets::{build_set_suite, mcas, DEFAULT_H_MAX, DEFAULT_MAX_ITER};
use iampc::sim::{
    self, plan_runs, simulate_run, verify_traces, EstimatorMode, InitialStates, ScenarioConfig, Trace, TruthPolicy,
    VerificationReport, VerifyOptions,
};
use iampc::simplex::{project_simplex, SimplexVec};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

// Criterion 1

fn horizon_reproduction() -> Outcome {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let artifacts = sim::build_artifacts(&cfg).expect("default scenario artifacts");
    let elapsed = start.elapsed();

    let model = VertexModel::benchmark();
    let (q, r) = cfg.design.weights(&model).unwrap();
    let margin_design = solve_design_with(&model, &q, &r, default_eps(&model), Selection::MaxMargin).unwrap();
    let margin_n = build_set_suite(&model, &margin_design, DEFAULT_MAX_ITER, 1e-9, DEFAULT_H_MAX)
        .map(|s| s.n.to_string())
        .unwrap_or_else(|e| format!("error ({e})"));

    let n = artifacts.horizon();
    outcome(
        n == 8 && elapsed <= Duration::from_secs(300),
        format!(
            "N = {n} with Q = I, R = 1 and the envelope selection (level {:e}) in {}; max-margin selection gives N = {margin_n}",
            sim::DEFAULT_ENVELOPE_LEVEL,
            secs(elapsed)
        ),
    )
}

// Criterion 2

fn design_feasibility() -> Outcome {
    let model = VertexModel::benchmark();
    let q = DMatrix::identity(2, 2);
    let r = DMatrix::identity(1, 1);
    let eps = default_eps(&model);
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, sel) in [
        ("max-margin", Selection::MaxMargin),
        (
            "envelope",
            Selection::MaxEnvelope {
                level: sim::DEFAULT_ENVELOPE_LEVEL,
            },
        ),
    ] {
        let start = Instant::now();
        match solve_design_with(&model, &q, &r, eps, sel) {
            Ok(d) => {
                let elapsed = start.elapsed();
                let lam = d.lmi_min_eigenvalue(&model).unwrap();
                passed &= lam >= eps / 2.0 && d.slack <= 0.0 && elapsed <= Duration::from_secs(60);
                parts.push(format!(
                    "{name}: t = {:.3e}, min block eigenvalue {lam:.3e} (eps/2 = {:.3e}), {}",
                    d.slack,
                    eps / 2.0,
                    secs(elapsed)
                ));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(passed, parts.join("; "))
}

// Criteria 3 to 5

struct Batch {
    traces: Vec<Trace>,
    errors: Vec<String>,
    report: VerificationReport,
    elapsed: Duration,
}

fn run_batch(cfg: &ScenarioConfig, artifacts: &Arc<Artifacts>, opts: &VerifyOptions) -> Batch {
    let start = Instant::now();
    let runs = plan_runs(cfg, artifacts).unwrap();
    let results: Vec<_> = runs
        .par_iter()
        .map(|spec| simulate_run(artifacts, spec, &cfg.estimator, cfg.steps))
        .collect();
    let mut traces = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let report = verify_traces(&traces, artifacts, opts);
    Batch {
        traces,
        errors,
        report,
        elapsed: start.elapsed(),
    }
}

fn robust_feasibility(batch: &Batch) -> Outcome {
    let rep = &batch.report;
    let total = batch.traces.len() + batch.errors.len();
    let passed = batch.errors.is_empty()
        && batch.traces.len() == 800
        && rep.constraints.passed
        && rep.invariance.passed
        && rep.invariance.runs == batch.traces.len()
        && rep.estimates.passed
        && batch.elapsed <= Duration::from_secs(600);
    let mut detail = format!(
        "{total} runs x 100 steps: {} QP infeasibilities, worst X/U slack {:.3e}, worst C slack {:.3e}, {}",
        batch.errors.len(),
        rep.constraints.worst.unwrap_or(f64::NAN) + 0.0,
        rep.invariance.worst.unwrap_or(f64::NAN) + 0.0,
        secs(batch.elapsed)
    );
    if let Some(e) = batch.errors.first() {
        detail.push_str(&format!("; first error: {e}"));
    }
    outcome(passed, detail)
}

fn nominal_stability(batch: &Batch) -> Outcome {
    let rep = &batch.report;
    let n = batch.traces.len();
    let passed = batch.errors.is_empty()
        && rep.nominal_decrease.passed
        && rep.nominal_decrease.runs == n
        && rep.convergence.passed
        && rep.convergence.runs == n
        && rep.constraints.passed;
    let mut detail = format!(
        "{n} oracle runs: largest decrease residual {:.3e}, largest |x(100)|/|x(0)| {:.3e}, {}",
        rep.nominal_decrease.worst.unwrap_or(f64::NAN),
        rep.convergence.worst.unwrap_or(f64::NAN),
        secs(batch.elapsed)
    );
    if let Some(f) = rep.failures.first() {
        detail.push_str(&format!("; first failure: {} in {} at step {}", f.check, f.run, f.step));
    }
    if let Some(e) = batch.errors.first() {
        detail.push_str(&format!("; first error: {e}"));
    }
    outcome(passed, detail)
}

fn iss_residual(robust: &Batch, nominal: &Batch, cfg: &ScenarioConfig, artifacts: &Arc<Artifacts>) -> Outcome {
    let iss = &robust.report.iss;
    let gamma_ok = iss.gamma_hat.is_some_and(f64::is_finite);
    let zero_ok = iss.passed && nominal.report.iss.passed;
    let zero_steps = iss.zero_error_steps + nominal.report.iss.zero_error_steps;
    let worst_zero = [
        iss.worst_zero_error_residual,
        nominal.report.iss.worst_zero_error_residual,
    ]
    .into_iter()
    .flatten()
    .fold(f64::NEG_INFINITY, f64::max);

    let start = Instant::now();
    let sweep = sim::sweep_filter_gain(cfg, artifacts, &[0.5, 0.05]);
    let elapsed = start.elapsed();
    let (sweep_ok, sweep_detail) = match sweep {
        Ok(s) => {
            let (fast, slow) = (&s[0], &s[1]);
            let per_run = fast
                .series
                .iter()
                .zip(&slow.series)
                .filter(|(f, s)| match (f.settling_step, s.settling_step) {
                    (Some(a), Some(b)) => b >= a,
                    (Some(_), None) => true,
                    _ => false,
                })
                .count();
            let ok = match (fast.max_settling_step, slow.max_settling_step) {
                (Some(a), Some(b)) => b >= a,
                (Some(_), None) => true,
                _ => false,
            } && slow.mean_settling_step >= fast.mean_settling_step;
            (
                ok,
                format!(
                    "settling max/mean: gain 1/2 {:?}/{:.1}, gain 1/20 {:?}/{:.1} (slow >= fast on {per_run} of {} matched runs), {}",
                    fast.max_settling_step,
                    fast.mean_settling_step.unwrap_or(f64::NAN),
                    slow.max_settling_step,
                    slow.mean_settling_step.unwrap_or(f64::NAN),
                    fast.series.len(),
                    secs(elapsed)
                ),
            )
        }
        Err(e) => (false, format!("sweep failed: {e}")),
    };
    outcome(
        gamma_ok && zero_ok && sweep_ok,
        format!(
            "estimated ISS gain {:.4e} over {} steps; {zero_steps} steps with zero delayed error, largest residual {worst_zero:.3e}; {sweep_detail}",
            iss.gamma_hat.unwrap_or(f64::NAN),
            iss.fitted_steps
        ),
    )
}

// Criterion 6

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_qp(rng: &mut ChaCha8Rng) -> Qp {
    let n = rng.gen_range(1..=12);
    let m = rng.gen_range(1..=40);
    let l = normal_matrix(rng, n, n);
    let h = &l * l.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let mut a = normal_matrix(rng, m, n);
    for mut row in a.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    let b = DVector::from_fn(m, |_, _| rng.gen_range(0.1..1.5));
    let target = normal_matrix(rng, n, 1).column(0) * (rng.gen_range(0.0..3.0) / (n as f64).sqrt());
    let g = -(&h * target);
    Qp::new(h, g, a, b)
}

/// Next `k`-subset of `0..m` in lexicographic order.
fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// KKT point found by trying every active set with at most `cap` rows.
/// Returns the point and its active-set size.
fn enumerate_qp(qp: &Qp, cap: usize) -> Option<(DVector<f64>, usize)> {
    let hinv = qp.hessian.clone().cholesky()?.inverse();
    let a = &qp.ineq_normals;
    let b = &qp.ineq_offsets;
    let m = a.nrows();
    let x_free = -(&hinv * &qp.gradient);
    let hat = &hinv * a.transpose();
    let w = a * &hat;
    let c = a * &x_free;
    let tol = 1e-9;
    for k in 0..=cap.min(m) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let ws = DMatrix::from_fn(k, k, |i, j| w[(idx[i], idx[j])]);
            let rhs = DVector::from_fn(k, |i, _| c[idx[i]] - b[idx[i]]);
            let lambda = if k == 0 {
                Some(DVector::zeros(0))
            } else {
                ws.lu().solve(&rhs)
            };
            if let Some(lambda) = lambda {
                if lambda.iter().all(|l| *l >= -tol) {
                    let mut ax = c.clone();
                    for (j, &s) in idx.iter().enumerate() {
                        ax -= w.column(s) * lambda[j];
                    }
                    if (0..m).all(|i| ax[i] <= b[i] + tol) {
                        let mut x = x_free.clone();
                        for (j, &s) in idx.iter().enumerate() {
                            x -= hat.column(s) * lambda[j];
                        }
                        return Some((x, k));
                    }
                }
            }
            if k == 0 || !next_combination(&mut idx, m) {
                break;
            }
        }
    }
    None
}

fn qp_vs_enumeration() -> (bool, String) {
    const INSTANCES: usize = 500;
    const CAP: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let settings = QpSettings::default();
    let mut worst: f64 = 0.0;
    let mut regenerated = 0;
    let mut sizes = [0usize; CAP + 1];
    let mut bad = 0;
    let mut done = 0;
    while done < INSTANCES {
        let qp = random_qp(&mut rng);
        let Some((x_ref, k)) = enumerate_qp(&qp, CAP) else {
            regenerated += 1;
            continue;
        };
        done += 1;
        sizes[k] += 1;
        match solve_qp(&qp, None, &settings) {
            Ok(sol) if sol.status == QpStatus::Optimal => {
                let err = (&sol.x - &x_ref).amax() / (1.0 + x_ref.amax());
                worst = worst.max(err);
                if err > 1e-6 {
                    bad += 1;
                }
            }
            _ => bad += 1,
        }
    }
    (
        bad == 0,
        format!(
            "QP vs enumeration: {INSTANCES} instances (n <= 12, <= 40 rows, active sets of size 0..={CAP}: {sizes:?}; {regenerated} redrawn with larger active sets), worst relative error {worst:.2e}"
        ),
    )
}

fn projection_vs_qp() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ell = rng.gen_range(1..=8);
        let v = normal_matrix(&mut rng, ell, 1).column(0) * 2.0;
        let qp = Qp::new(
            DMatrix::identity(ell, ell),
            -&v,
            -DMatrix::identity(ell, ell),
            DVector::zeros(ell),
        )
        .with_equalities(DMatrix::from_element(1, ell, 1.0), DVector::from_element(1, 1.0));
        let sol = solve_qp(&qp, None, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        worst = worst.max((project_simplex(&v).weights() - &sol.x).amax());
    }
    (
        worst <= 1e-7,
        format!("projection vs QP: 1000 vectors, worst error {worst:.2e}"),
    )
}

fn mcas_vs_grid() -> (bool, String) {
    let bench = VertexModel::benchmark();
    let model = VertexModel::new(
        vec![bench.vertices()[0].clone()],
        bench.b().clone(),
        bench.state_set().clone(),
        bench.input_set().clone(),
    )
    .unwrap();
    let design = solve_design_with(
        &model,
        &DMatrix::identity(2, 2),
        &DMatrix::identity(1, 1),
        default_eps(&model),
        Selection::MaxMargin,
    )
    .unwrap();
    let xu = model.state_set().product(model.input_set());
    let (set, iters) = mcas(&model, &design, &xu, DEFAULT_MAX_ITER, 1e-9).unwrap();
    let k = &design.k[0];
    let acl = &model.vertices()[0] + model.b() * k;
    let horizon = (10 * iters).max(300);
    let admissible = |x: &DVector<f64>| {
        let u = k * x;
        model.state_set().max_violation(x).unwrap() <= 1e-9 && model.input_set().max_violation(&u).unwrap() <= 1e-9
    };
    let side = 100;
    let mut agree = 0;
    let mut inside = 0;
    for i in 0..side {
        for j in 0..side {
            let p = |t: usize| -15.0 + 30.0 * (t as f64 + 0.5) / side as f64;
            let x0 = DVector::from_vec(vec![p(i), p(j)]);
            let mut x = x0.clone();
            let mut oracle = true;
            for _ in 0..=horizon {
                if !admissible(&x) {
                    oracle = false;
                    break;
                }
                x = &acl * x;
            }
            let member = set.contains(&x0, 1e-9).unwrap();
            inside += member as usize;
            agree += (member == oracle) as usize;
        }
    }
    let total = side * side;
    let frac = agree as f64 / total as f64;
    (
        frac >= 0.999,
        format!(
            "MCAS vs unrolling (one vertex, {iters} iterations): {agree} of {total} grid points agree ({inside} inside)"
        ),
    )
}

fn lp_point_feasible(p: &Polytope, keep: usize, x: &DVector<f64>) -> bool {
    let a = p.normals();
    let drop = a.ncols() - keep;
    let offsets = p.offsets() - a.columns(0, keep) * x;
    lp::is_feasible(&a.columns(keep, drop).into_owned(), &offsets).unwrap()
}

fn eliminate_vs_lp(artifacts: &Artifacts) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random = loop {
        let mut a = normal_matrix(&mut rng, 14, 4);
        for mut row in a.row_iter_mut() {
            let norm = row.norm();
            row /= norm;
        }
        let b = DVector::from_fn(14, |_, _| rng.gen_range(0.5..1.5));
        let p = Polytope::new(a, b).unwrap();
        if p.bounding_box().is_ok() {
            break p;
        }
    };
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, p, keep) in [("C_xu", artifacts.suite.cxu.clone(), 2), ("random 4-D", random, 2)] {
        let drop: Vec<usize> = (keep..p.dim()).collect();
        let proj = p.eliminate(&drop, DEFAULT_ROW_CAP).unwrap();
        let (lo, hi) = p.bounding_box().unwrap();
        let mut agree = 0;
        for _ in 0..1000 {
            let x = DVector::from_fn(keep, |i, _| {
                let (l, h) = (lo[i], hi[i]);
                let pad = 0.2 * (h - l);
                rng.gen_range(l - pad..h + pad)
            });
            agree += (proj.contains(&x, 1e-9).unwrap() == lp_point_feasible(&p, keep, &x)) as usize;
        }
        passed &= agree == 1000;
        parts.push(format!("{name} {agree}/1000"));
    }
    (passed, format!("elimination vs LP: {}", parts.join(", ")))
}

fn oracle_equivalences(artifacts: &Artifacts) -> Outcome {
    let checks = [
        qp_vs_enumeration(),
        projection_vs_qp(),
        mcas_vs_grid(),
        eliminate_vs_lp(artifacts),
    ];
    outcome(
        checks.iter().all(|c| c.0),
        checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; "),
    )
}

// Criterion 7

/// Vertices of a bounded 2-D polytope by pairwise row intersection.
fn vertices_2d(p: &Polytope) -> Vec<DVector<f64>> {
    let a = p.normals();
    let b = p.offsets();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for i in 0..a.nrows() {
        for j in i + 1..a.nrows() {
            let m = DMatrix::from_rows(&[a.row(i).into_owned(), a.row(j).into_owned()]);
            let Some(v) = m.lu().solve(&DVector::from_vec(vec![b[i], b[j]])) else {
                continue;
            };
            if p.max_violation(&v).unwrap() <= 1e-9 && out.iter().all(|w| (w - &v).norm() > 1e-9) {
                out.push(v);
            }
        }
    }
    out
}

fn invariance_certificates(artifacts: &Artifacts) -> Outcome {
    let model = &artifacts.model;
    let suite = &artifacts.suite;
    let c = &suite.c;

    // A single input must keep every vertex successor in C.
    let points = c.spread_support_points(200).unwrap();
    let mut rci_ok = 0;
    for x in &points {
        let mut normals = model.input_set().normals().clone_owned();
        let mut offsets = model.input_set().offsets().clone_owned();
        for a in model.vertices() {
            let rows = c.normals() * model.b();
            let offs = c.offsets() - c.normals() * (a * x);
            normals = stack_rows(&normals, &rows);
            offsets = stack_vec(&offsets, &offs);
        }
        offsets.add_scalar_mut(SET_TOL);
        rci_ok += lp::is_feasible(&normals, &offsets).unwrap() as usize;
    }

    let verts = vertices_2d(&suite.x_n);
    let mut worst_image: f64 = f64::NEG_INFINITY;
    for v in &verts {
        for (a, k) in model.vertices().iter().zip(&artifacts.design.k) {
            let img = (a + model.b() * k) * v;
            worst_image = worst_image.max(suite.x_n.max_violation(&img).unwrap());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut samples = suite.x_n.spread_support_points(100).unwrap();
    let (lo, hi) = suite.x_n.bounding_box().unwrap();
    while samples.len() < 200 {
        let x = DVector::from_fn(2, |i, _| rng.gen_range(lo[i]..hi[i]));
        if suite.x_n.contains(&x, 0.0).unwrap() {
            samples.push(x);
        }
    }
    let mut worst_law: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let xi = SimplexVec::sample(model.ell(), &mut rng);
        let kappa = artifacts.design.kappa(&xi).unwrap();
        for x in &samples {
            let u = &kappa * x;
            let xu = DVector::from_iterator(3, x.iter().chain(u.iter()).copied());
            worst_law = worst_law.max(suite.cxu.max_violation(&xu).unwrap());
        }
    }

    outcome(
        rci_ok == points.len() && !verts.is_empty() && worst_image <= SET_TOL && worst_law <= SET_TOL,
        format!(
            "RCI input found at {rci_ok}/{} support points of C; {} vertices of the terminal set, worst image violation {worst_image:.2e}; terminal law on 200 x 50 samples, worst C_xu violation {worst_law:.2e}",
            points.len(),
            verts.len()
        ),
    )
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn stack_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

fn main() {
    let cfg = ScenarioConfig::default();
    let artifacts = Arc::new(sim::build_artifacts(&cfg).expect("default scenario artifacts"));

    let mut results = vec![
        (1, "horizon reproduction", guarded(horizon_reproduction)),
        (2, "design feasibility", guarded(design_feasibility)),
    ];

    let robust = run_batch(&cfg, &artifacts, &VerifyOptions::default());
    results.push((3, "robust feasibility", guarded(|| robust_feasibility(&robust))));

    let mut oracle_cfg = cfg.clone();
    oracle_cfg.estimator.mode = EstimatorMode::Oracle;
    let mut nominal = run_batch(
        &oracle_cfg,
        &artifacts,
        &VerifyOptions {
            convergence_ratio: Some(1e-3),
            ..VerifyOptions::default()
        },
    );
    let mut vertex_cfg = oracle_cfg.clone();
    vertex_cfg.truth = TruthPolicy::Fixed {
        values: (0..5).map(|i| SimplexVec::vertex(5, i).as_slice().to_vec()).collect(),
    };
    vertex_cfg.initial = InitialStates::SupportPoints { count: 40 };
    let vertex_batch = run_batch(
        &vertex_cfg,
        &artifacts,
        &VerifyOptions {
            convergence_ratio: Some(1e-3),
            ..VerifyOptions::default()
        },
    );
    nominal.traces.extend(vertex_batch.traces);
    nominal.errors.extend(vertex_batch.errors);
    nominal.elapsed += vertex_batch.elapsed;
    nominal.report = verify_traces(
        &nominal.traces,
        &artifacts,
        &VerifyOptions {
            convergence_ratio: Some(1e-3),
            ..VerifyOptions::default()
        },
    );
    results.push((4, "nominal stability", guarded(|| nominal_stability(&nominal))));
    results.push((
        5,
        "ISS residual",
        guarded(|| iss_residual(&robust, &nominal, &cfg, &artifacts)),
    ));
    results.push((6, "oracle equivalences", guarded(|| oracle_equivalences(&artifacts))));
    results.push((
        7,
        "invariance certificates",
        guarded(|| invariance_certificates(&artifacts)),
    ));

    println!();
    for (k, name, o) in &results {
        println!(
            "criterion {k} ({name}): {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed = results.iter().filter(|r| !r.2.passed).count();
    println!();
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
