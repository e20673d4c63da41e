//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use netcbc::pipeline::{self, run_monte_carlo_parallel};
use netcbc::report::format_guarantee;
use netcbc::RunConfig;
use netcbc_core::random::{stream_rng, uniform01};
use netcbc_core::simulator::{estimate_drift, step_augmented, step_componentwise, DrawSource};
use netcbc_core::{
    compute_beta, compute_eta, drift_operator, epsilon_from_levels, operator_spectral_radius,
    solve_generalized_lyapunov, AugmentedSystem, BoxRegion, CoeffVariant, DtSls, Error, FeedbackGain, LoopState,
    NetworkParams, SafetySpec, SimConfig,
};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0xACCE)
}

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(r)
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| uniform(r, -scale, scale))
}

fn random_psd(r: &mut ChaCha8Rng, k: usize, rank: usize) -> DMatrix<f64> {
    let g = random_matrix(r, k, rank, 1.0);
    &g * g.transpose() / rank as f64
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// `E[Ã(k)ᵀ P Ã(k)]` by summing the four packet outcomes.
fn drift_by_enumeration(aug: &AugmentedSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let net = aug.network();
    let mut out = DMatrix::zeros(p.nrows(), p.ncols());
    for (theta, pt) in [(true, net.mu_theta()), (false, 1.0 - net.mu_theta())] {
        for (phi, pp) in [(true, net.mu_phi()), (false, 1.0 - net.mu_phi())] {
            let (a, _) = aug.realize_transition(theta, phi);
            out += (a.transpose() * p * &a) * (pt * pp);
        }
    }
    out
}

fn neumann_series(aug: &AugmentedSystem, q: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let mut term = q.clone();
    let mut sum = q.clone();
    for _ in 1..terms {
        term = drift_by_enumeration(aug, &term);
        sum += &term;
    }
    sum
}

fn default_problem() -> netcbc::config::Problem {
    RunConfig::default().build().expect("default config builds")
}

fn bound_arithmetic() -> Verdict {
    let start = Instant::now();
    let bound = epsilon_from_levels(
        pipeline::PUBLISHED_ETA,
        pipeline::PUBLISHED_C,
        pipeline::PUBLISHED_BETA,
        100,
    )
    .expect("positive beta");
    let printed = format_guarantee(bound.guarantee());
    let elapsed = start.elapsed();
    let g = bound.guarantee();
    let ok = (0.9768..=0.9769).contains(&g) && printed == "guarantee ≥ 0.9768" && elapsed < Duration::from_millis(1);
    verdict(ok, format!("guarantee {g:.6}, printed \"{printed}\", {elapsed:?}"))
}

fn appendix_equivalence() -> Verdict {
    let problem = default_problem();
    let gain = pipeline::published_gain();
    let aug = AugmentedSystem::build(&problem.sys, &gain, &problem.net, CoeffVariant::DerivationExact).unwrap();
    let mut worst = 0.0_f64;
    for seed in 0..100 {
        let mut draws = DrawSource::new(stream_rng(seed, 7), &problem.sys, &problem.net).unwrap();
        let x = draws.uniform_in(problem.spec.initial());
        let y = &x + draws.measurement_noise();
        let u = gain.matrix() * &y;
        let mut state = LoopState {
            x,
            x_hat: y,
            u: u.clone(),
            u_hat: u,
        };
        let mut z = state.to_augmented();
        for _ in 0..100 {
            let d = draws.step();
            state = step_componentwise(&state, &problem.sys, &gain, &d);
            z = step_augmented(&z, &aug, &d);
            worst = worst.max((&z - state.to_augmented()).amax());
        }
    }
    verdict(worst <= 1e-9, format!("max |Δz| = {worst:.3e} over 100 seeds x 100 steps"))
}

fn random_scalar_loop(r: &mut ChaCha8Rng, a_scale: f64) -> AugmentedSystem {
    let sys = DtSls::new(
        random_matrix(r, 1, 1, a_scale),
        random_matrix(r, 1, 1, 1.0),
        DMatrix::from_element(1, 1, uniform(r, 0.1, 1.0)),
        DMatrix::from_element(1, 1, uniform(r, 0.1, 1.0)),
    )
    .unwrap();
    let gain = FeedbackGain::new(random_matrix(r, 1, 1, 1.0));
    let net = NetworkParams::new(uniform(r, 0.5, 1.0), uniform(r, 0.5, 1.0)).unwrap();
    AugmentedSystem::build(&sys, &gain, &net, CoeffVariant::DerivationExact).unwrap()
}

fn lyapunov_oracle() -> Verdict {
    let mut r = rng(3);
    let q = DMatrix::identity(4, 4);
    let (mut feasible, mut worst) = (0, 0.0_f64);
    while feasible < 50 {
        let aug = random_scalar_loop(&mut r, 0.9);
        // the 200-term tail is below ρ^200, negligible for ρ ≤ 0.8
        if operator_spectral_radius(&aug).value > 0.8 {
            continue;
        }
        let p = solve_generalized_lyapunov(&aug, &q).map(|s| s.p);
        match p {
            Ok(p) => worst = worst.max(max_abs_diff(&p, &neumann_series(&aug, &q, 200))),
            Err(_) => worst = f64::INFINITY,
        }
        feasible += 1;
    }
    let (mut expanding, mut flagged) = (0, 0);
    while expanding < 50 {
        let aug = random_scalar_loop(&mut r, 2.5);
        if operator_spectral_radius(&aug).value <= 1.001 {
            continue;
        }
        expanding += 1;
        if let Err(e) = solve_generalized_lyapunov(&aug, &q) {
            flagged += usize::from(matches!(e.root(), Error::Infeasible { .. }));
        }
    }
    verdict(
        worst <= 1e-10 && flagged == 50,
        format!("max |P − Neumann| = {worst:.3e} on 50 systems; {flagged}/50 expanding systems reported infeasible"),
    )
}

/// `zᵀPz` without allocation.
fn quad(p: &[f64], k: usize, z: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..k {
        let mut row = 0.0;
        for j in 0..k {
            row += p[i * k + j] * z[j];
        }
        s += z[i] * row;
    }
    s
}

/// Coordinates land on the lower face, the upper face or inside the interval
/// with equal probability, so vertices and faces are sampled densely.
fn face_biased(r: &mut ChaCha8Rng, region: &BoxRegion, z: &mut [f64]) {
    for (i, zi) in z.iter_mut().enumerate() {
        let (l, u) = (region.lower()[i], region.upper()[i]);
        let t = uniform01(r);
        *zi = if t < 1.0 / 3.0 {
            l
        } else if t < 2.0 / 3.0 {
            u
        } else {
            uniform(r, l, u)
        };
    }
}

fn polish_min(p: &DMatrix<f64>, region: &BoxRegion, start: &[f64]) -> f64 {
    let step = 0.5 / p.symmetric_eigenvalues().max();
    let mut z = DVector::from_column_slice(start);
    for _ in 0..5000 {
        let g = p * &z * 2.0;
        z -= g * step;
        for i in 0..z.len() {
            z[i] = z[i].clamp(region.lower()[i], region.upper()[i]);
        }
    }
    (z.transpose() * p * &z)[(0, 0)]
}

fn random_spec(r: &mut ChaCha8Rng) -> SafetySpec {
    let state = BoxRegion::new(vec![-2.0, -1.5], vec![2.0, 2.5]).unwrap();
    let lo: Vec<f64> = (0..2).map(|_| uniform(r, -0.8, 0.3)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + uniform(r, 0.1, 0.5)).collect();
    let cut = uniform(r, 0.9, 1.7);
    let unsafe_set = vec![
        BoxRegion::new(vec![cut, -1.5], vec![2.0, 2.5]).unwrap(),
        BoxRegion::new(vec![-2.0, -1.5], vec![2.0, uniform(r, -1.4, -1.0)]).unwrap(),
    ];
    let ulim = uniform(r, 0.2, 1.5);
    SafetySpec::new(
        state,
        BoxRegion::new(lo, hi).unwrap(),
        unsafe_set,
        BoxRegion::cube(1, -ulim, ulim).unwrap(),
        10,
    )
    .unwrap()
}

fn level_set_oracles() -> Verdict {
    let mut r = rng(4);
    let samples = 1_000_000;
    let (mut eta_gap, mut beta_gap) = (0.0_f64, 0.0_f64);
    let mut ordered = true;
    for _ in 0..20 {
        let spec = random_spec(&mut r);
        let p = random_psd(&mut r, 6, 6) + DMatrix::identity(6, 6) * 0.05;
        let flat: Vec<f64> = p.transpose().iter().copied().collect();
        let eta = compute_eta(&p, &spec).unwrap();
        let beta = compute_beta(&p, &spec).unwrap().value;

        let init = spec.initial_domain();
        let mut z = [0.0; 6];
        let mut sampled_max = f64::NEG_INFINITY;
        for _ in 0..samples {
            face_biased(&mut r, &init, &mut z);
            sampled_max = sampled_max.max(quad(&flat, 6, &z));
        }

        let mut sampled_min = f64::INFINITY;
        for domain in spec.unsafe_domains() {
            let mut best: Vec<(f64, [f64; 6])> = Vec::new();
            for _ in 0..samples / 2 {
                face_biased(&mut r, &domain, &mut z);
                let v = quad(&flat, 6, &z);
                if best.len() < 16 || v < best[best.len() - 1].0 {
                    best.push((v, z));
                    best.sort_by(|a, b| a.0.total_cmp(&b.0));
                    best.truncate(16);
                }
            }
            for (v, start) in &best {
                sampled_min = sampled_min.min(*v).min(polish_min(&p, &domain, start));
            }
        }
        ordered &= eta >= sampled_max * (1.0 - 1e-12) && beta <= sampled_min * (1.0 + 1e-12);
        eta_gap = eta_gap.max((eta - sampled_max) / eta);
        beta_gap = beta_gap.max((sampled_min - beta) / beta);
    }

    // diagonal P against the separable closed forms
    let spec = random_spec(&mut r);
    let d: Vec<f64> = (0..6).map(|_| uniform(&mut r, 0.1, 2.0)).collect();
    let p = DMatrix::from_diagonal(&DVector::from_column_slice(&d));
    let init = spec.initial_domain();
    // each coordinate sits at its farthest (nearest) endpoint; the sum is
    // accumulated as z_i·(d_i·z_i), the order in which zᵀPz is evaluated
    let far = |l: f64, u: f64| if l.abs() >= u.abs() { l } else { u };
    let near = |l: f64, u: f64| if l <= 0.0 && u >= 0.0 { 0.0 } else if l.abs() <= u.abs() { l } else { u };
    let closed_eta: f64 = (0..6)
        .map(|i| far(init.lower()[i], init.upper()[i]))
        .enumerate()
        .fold(0.0, |acc, (i, z)| acc + z * (d[i] * z));
    let closed_beta = spec
        .unsafe_domains()
        .iter()
        .map(|b| {
            (0..6)
                .map(|i| near(b.lower()[i], b.upper()[i]))
                .enumerate()
                .fold(0.0, |acc, (i, z)| acc + z * (d[i] * z))
        })
        .fold(f64::INFINITY, f64::min);
    let (eta_d, beta_d) = (compute_eta(&p, &spec).unwrap(), compute_beta(&p, &spec).unwrap().value);
    let exact = eta_d == closed_eta && beta_d == closed_beta;
    if !exact {
        eprintln!("diagonal: η {eta_d:e} vs {closed_eta:e}, β {beta_d:e} vs {closed_beta:e}");
    }

    verdict(
        ordered && eta_gap <= 0.01 && beta_gap <= 0.01 && exact,
        format!(
            "20 instances: max η gap {:.2e}, max β gap {:.2e}, bounds ordered: {ordered}; diagonal closed forms exact: {exact}",
            eta_gap, beta_gap
        ),
    )
}

fn drift_exactness() -> Verdict {
    let problem = default_problem();
    let mut r = rng(5);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let gain = FeedbackGain::new(random_matrix(&mut r, 2, 2, 1.0));
        let net = NetworkParams::new(uniform(&mut r, 0.3, 1.0), uniform(&mut r, 0.3, 1.0)).unwrap();
        let aug = AugmentedSystem::build(&problem.sys, &gain, &net, CoeffVariant::DerivationExact).unwrap();
        let p = random_psd(&mut r, 8, 8);
        worst = worst.max(max_abs_diff(
            &drift_operator(&aug, &p).unwrap(),
            &drift_by_enumeration(&aug, &p),
        ));
    }
    verdict(worst <= 1e-12, format!("max entrywise deviation {worst:.3e} on 20 motor instances"))
}

struct Certified {
    outcome: pipeline::CertifyOutcome,
    problem: netcbc::config::Problem,
}

fn certify_into(dir: &Path) -> Result<pipeline::CertifyOutcome, netcbc::CliError> {
    let mut cfg = RunConfig::default();
    cfg.output.dir = dir.to_path_buf();
    pipeline::certify(&cfg)
}

fn end_to_end(dir: &Path) -> (Verdict, Option<Certified>) {
    match certify_into(dir) {
        Ok(outcome) => {
            let cbc = &outcome.result.cbc;
            let g = outcome.result.bound.guarantee();
            let ok = cbc.residual_max_eig <= 1e-8
                && cbc.beta > cbc.eta
                && g >= 0.90
                && outcome.report.trajectories == 10
                && outcome.report.violations == 0
                && outcome.artifacts.certificate.is_some()
                && outcome.artifacts.trajectories.is_some();
            let detail = format!(
                "residual max eig {:.3e}, η = {:.4e} < β = {:.4e}, c = {:.4e}, ε = {:.5}, {}; {} violations in {} trajectories",
                cbc.residual_max_eig,
                cbc.eta,
                cbc.beta,
                cbc.c,
                outcome.result.bound.epsilon,
                format_guarantee(g),
                outcome.report.violations,
                outcome.report.trajectories
            );
            (
                verdict(ok, detail),
                Some(Certified {
                    outcome,
                    problem: default_problem(),
                }),
            )
        }
        Err(e) => (verdict(false, format!("certify failed: {e}")), None),
    }
}

fn statistical_soundness(c: &Certified) -> Verdict {
    let sim = SimConfig {
        trajectories: 10_000,
        horizon: 100,
        seed: 2024,
        init_mode: netcbc_core::simulator::InitMode::UniformOverX0,
        record_full: false,
    };
    let eps = c.outcome.result.bound.epsilon;
    match run_monte_carlo_parallel(&c.problem.sys, &c.outcome.result.gain, &c.problem.net, &c.problem.spec, &sim, Some(eps)) {
        Ok(report) => verdict(
            report.ci_lower <= eps,
            format!(
                "{} violations in {} runs, p̂ = {:.5}, 99% lower bound {:.5} ≤ ε = {:.5}",
                report.violations, report.trajectories, report.empirical_p, report.ci_lower, eps
            ),
        ),
        Err(e) => verdict(false, format!("simulation failed: {e}")),
    }
}

fn martingale_drift(c: &Certified) -> Verdict {
    let result = &c.outcome.result;
    let aug = AugmentedSystem::build(&c.problem.sys, &result.gain, &c.problem.net, result.cbc.variant).unwrap();
    match estimate_drift(&aug, &result.cbc.p, &c.problem.spec, 100_000, 31) {
        Ok(est) => {
            let limit = result.cbc.c + 4.0 * est.std_error;
            verdict(
                est.mean <= limit,
                format!(
                    "mean ΔB = {:.4e} ≤ c + 4·SE = {:.4e} (SE {:.2e}, {} samples)",
                    est.mean, limit, est.std_error, est.samples
                ),
            )
        }
        Err(e) => verdict(false, format!("drift estimate failed: {e}")),
    }
}

fn determinism(first: &Path, second: &Path) -> Verdict {
    if let Err(e) = certify_into(second) {
        return verdict(false, format!("second certify failed: {e}"));
    }
    let files = ["certificate.json", "simulation.json", "trajectories.csv", "summary.txt"];
    let mut differing = Vec::new();
    for f in files {
        let a = std::fs::read(first.join(f)).unwrap_or_default();
        let b = std::fs::read(second.join(f)).unwrap_or_default();
        if a.is_empty() || a != b {
            differing.push(f);
        }
    }
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", files.len())
        } else {
            format!("differing or missing: {differing:?}")
        },
    )
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let first = scratch.path().join("run1");
    let second = scratch.path().join("run2");

    let mut results: Vec<(&str, Duration, Duration, Verdict)> = Vec::new();
    let mut run = |name: &'static str, budget: Duration, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        results.push((name, start.elapsed(), budget, v));
    };

    run("bound arithmetic reproduction", Duration::from_secs(1), &mut bound_arithmetic);
    run("component-wise / augmented equivalence", Duration::from_secs(1), &mut appendix_equivalence);
    run("Lyapunov solver vs Neumann oracle", Duration::from_secs(10), &mut lyapunov_oracle);
    run("level-set oracles", Duration::from_secs(30), &mut level_set_oracles);
    run("drift-operator exactness", Duration::from_secs(1), &mut drift_exactness);
    let mut certified = None;
    run("end-to-end motor certification", Duration::from_secs(60), &mut || {
        let (v, c) = end_to_end(&first);
        certified = c;
        v
    });
    let missing = || verdict(false, "no certificate from the end-to-end run".into());
    run("statistical soundness of the bound", Duration::from_secs(120), &mut || {
        certified.as_ref().map_or_else(missing, statistical_soundness)
    });
    run("martingale drift validation", Duration::from_secs(30), &mut || {
        certified.as_ref().map_or_else(missing, martingale_drift)
    });
    run("determinism", Duration::from_secs(120), &mut || determinism(&first, &second));

    let mut failed = 0;
    for (name, elapsed, budget, v) in &results {
        let in_time = elapsed <= budget;
        let pass = v.passed && in_time;
        failed += usize::from(!pass);
        let timing = if in_time {
            format!("{elapsed:.2?}")
        } else {
            format!("{elapsed:.2?} exceeds budget {budget:?}")
        };
        println!("{} {name}: {} [{timing}]", if pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
