//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured quantity next to its required threshold.
//! Everything is seeded; reruns are bit-identical.

use bandro::band::{self, DeltaSpec, DensityBand, GridTable, Kernel, SrParams};
use bandro::dro::{self, SgdConfig};
use bandro::experiments::{
    self, BandGridConfig, ExperimentConfig, ProblemConfig, SgdSettings, UpperBoundCheckConfig,
};
use bandro::oracle::{self, GridBand};
use bandro::problems::{Newsvendor, Portfolio, TrueDensity};
use bandro::{Problem, SeedStream, SupportBox};

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:>2} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Criterion 1: shape-restricted band coverage on the rescaled beta density.
/// 200 seeded repetitions at N=100, alpha=0.2 must contain the true density
/// pointwise on a 101-point grid in at least 75% of repetitions.
#[test]
fn criterion_1_sr_band_coverage() {
    let truth = TrueDensity::ScaledBeta { alpha: 5.0, beta: 2.0, lo: 0.0, hi: 250.0 };
    let params = SrParams {
        a: 0.0,
        b: 250.0,
        mode: 200.0,
        cap: 1.25 * truth.peak(),
        alpha: 0.2,
        group_size: 10,
        mc_samples: 100_000,
    };
    let root = SeedStream::new(20_240_817).derive_stream("acceptance-1");
    let reps = 200;
    let mut covered = 0;
    for rep in 0..reps {
        let stream = root.derive_indexed("rep", rep);
        let mut rng = stream.derive_stream("data").rng();
        let data = truth.sample_set(100, &mut rng, rep).unwrap();
        let band = band::build_sr_band(&data, &params, &stream.derive_stream("band")).unwrap();
        let hit = (0..=100).all(|i| {
            let xi = 250.0 * i as f64 / 100.0;
            let (l, u) = band.eval1(xi);
            let p = truth.density(&[xi]);
            l - 1e-9 <= p && p <= u + 1e-9
        });
        if hit {
            covered += 1;
        }
    }
    let freq = covered as f64 / reps as f64;
    report(
        1,
        "shape-restricted band coverage",
        freq >= 0.75,
        &format!("containment frequency {freq:.3} (required >= 0.75)"),
    );
}

/// Criterion 2: KDE band coverage with the theoretical half-width on the
/// truncated normal, N=500, alpha=0.2: containment on a 101-point grid in at
/// least 80% of 200 repetitions.
#[test]
fn criterion_2_kde_band_coverage_theoretical_delta() {
    let truth = TrueDensity::TruncatedNormal { mean: 100.0, sd: 50.0, lo: 0.0, hi: 250.0 };
    let n = 500usize;
    let alpha = 0.2;
    let holder_c = truth.lipschitz().unwrap();
    let cap = truth.peak();
    // Balanced bandwidth h = (log(N/alpha)/N)^(1/(2 rho + m)).
    let h = ((n as f64 / alpha).ln() / n as f64).powf(1.0 / 3.0);
    let support = truth.support().unwrap();
    let root = SeedStream::new(31_337).derive_stream("acceptance-2");
    let reps = 200;
    let mut covered = 0;
    for rep in 0..reps {
        let mut rng = root.derive_indexed("rep", rep).rng();
        let data = truth.sample_set(n, &mut rng, rep).unwrap();
        let band = band::build_kde_band(
            &data,
            Kernel::Boxcar,
            h,
            DeltaSpec::Theoretical { holder_c, rho: 1.0, cap, alpha },
            Some(support.clone()),
        )
        .unwrap();
        let hit = (0..=100).all(|i| {
            let xi = 250.0 * i as f64 / 100.0;
            let (l, u) = band.eval1(xi);
            let p = truth.density(&[xi]);
            l - 1e-12 <= p && p <= u + 1e-12
        });
        if hit {
            covered += 1;
        }
    }
    let freq = covered as f64 / reps as f64;
    report(
        2,
        "KDE band coverage, theoretical half-width",
        freq >= 0.80,
        &format!("containment frequency {freq:.3} (required >= 0.80)"),
    );
}

/// Criterion 3: strong duality. On 20 seeded newsvendor instances with
/// shape-restricted bands, the dual value min over lambda of F(x, lambda)
/// (2000-cell quadrature) matches the discretized inner supremum at G=2000 to
/// 1e-3 relative, at 5 random feasible orders each.
#[test]
fn criterion_3_strong_duality() {
    use rand::Rng;
    let truth = TrueDensity::TruncatedNormal { mean: 100.0, sd: 50.0, lo: 0.0, hi: 250.0 };
    let nv = Newsvendor::new(19.0, 1.0, 250.0).unwrap();
    let params = SrParams {
        a: 0.0,
        b: 250.0,
        mode: 100.0,
        cap: 1.25 * truth.peak(),
        alpha: 0.2,
        group_size: 10,
        mc_samples: 50_000,
    };
    let root = SeedStream::new(7).derive_stream("acceptance-3");
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let stream = root.derive_indexed("inst", inst);
        let mut rng = stream.derive_stream("data").rng();
        let data = truth.sample_set(60, &mut rng, inst).unwrap();
        let band = band::build_sr_band(&data, &params, &stream.derive_stream("band")).unwrap();
        let mut xr = stream.derive_stream("x").rng();
        for _ in 0..5 {
            let x = vec![250.0 * xr.gen::<f64>()];
            let (_, dual) = dro::min_lambda_dual(&x, &band, &nv, 2000).unwrap();
            let primal = oracle::robust_value_oracle(&nv, &band, &x, 2000).unwrap();
            let rel = (dual - primal).abs() / (1.0 + primal.abs());
            worst = worst.max(rel);
            // Dual upper bound holds at arbitrary lambda as well.
            let lambda = xr.gen_range(-50.0..2000.0);
            let anywhere = dro::dual_objective(&x, lambda, &band, &nv, 2000).unwrap();
            assert!(
                anywhere >= primal - 1e-6 * (1.0 + primal.abs()),
                "F(x, lambda) = {anywhere} fell below the primal value {primal}"
            );
        }
    }
    report(
        3,
        "strong duality",
        worst <= 1e-3,
        &format!("worst relative gap {worst:.3e} (required <= 1e-3)"),
    );
}

/// Criterion 4: SGD correctness on the degenerate uniform band. The averaged
/// order must land within 0.02 of the 0.95 quantile for at least 9 of 10
/// seeds at T=50000, B=64, eta=0.1, and the median dual-objective error at
/// T=40000 must undercut the error at T=1000.
#[test]
fn criterion_4_sgd_quantile_convergence() {
    let nv = Newsvendor::new(19.0, 1.0, 1.0).unwrap();
    let support = SupportBox::interval(0.0, 1.0).unwrap();
    let band = DensityBand::explicit(GridTable::constant(support, 1.0, 1.0));
    // min_x E f(x) for the uniform law: 19 (1-x)^2 / 2 + x^2 / 2 at x = 0.95.
    let f_star = 0.475;
    let solve = |seed: u64, iters: usize| {
        let cfg = SgdConfig { batch: 64, eta: 0.1, iters, x0: vec![0.5], lambda0: 5.0 };
        let stream = SeedStream::new(seed).derive_stream("acceptance-4");
        dro::sgd_solve(&nv, &band, &cfg, &stream).unwrap()
    };
    let mut hits = 0;
    let mut err_short = Vec::new();
    let mut err_long = Vec::new();
    for seed in 0..10 {
        let s = solve(seed, 50_000);
        if (s.x[0] - 0.95).abs() <= 0.02 {
            hits += 1;
        }
        for (iters, errs) in [(1_000, &mut err_short), (40_000, &mut err_long)] {
            let t = solve(seed, iters);
            let f = dro::dual_objective(&t.x, t.lambda, &band, &nv, 2000).unwrap();
            errs.push(f - f_star);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    let short = median(&mut err_short);
    let long = median(&mut err_long);
    report(
        4,
        "SGD quantile convergence",
        hits >= 9 && long < short,
        &format!(
            "{hits}/10 seeds within 0.02 of 0.95 (required >= 9); \
             median F-error {long:.5} at T=40000 vs {short:.5} at T=1000"
        ),
    );
}

/// Criterion 5: subgradient unbiasedness. At 10 random (x, lambda) the mean
/// of 100000 single-draw stochastic subgradients must sit within three
/// standard errors of the quadrature value of the deterministic subgradient.
#[test]
fn criterion_5_subgradient_unbiasedness() {
    use rand::Rng;
    let truth = TrueDensity::TruncatedNormal { mean: 100.0, sd: 50.0, lo: 0.0, hi: 250.0 };
    let nv = Newsvendor::new(19.0, 1.0, 250.0).unwrap();
    let root = SeedStream::new(99).derive_stream("acceptance-5");
    let mut rng = root.derive_stream("data").rng();
    let data = truth.sample_set(50, &mut rng, 99).unwrap();
    let support = truth.support().unwrap();
    let band = band::build_kde_band(
        &data,
        Kernel::Gaussian,
        15.0,
        DeltaSpec::Explicit(0.002),
        Some(support),
    )
    .unwrap();

    let mut point_rng = root.derive_stream("points").rng();
    let draws = 100_000usize;
    let mut pass = true;
    let mut worst_sigmas: f64 = 0.0;
    for point in 0..10u64 {
        let x = vec![250.0 * point_rng.gen::<f64>()];
        let lambda = point_rng.gen_range(0.0..2000.0);
        let (_, qx, qlambda) = dro::quadrature_dual(&x, lambda, &band, &nv, 20_000);

        // Welford accumulation over single-draw subgradients.
        let stream = root.derive_indexed("mc", point);
        let (mut mx, mut sx, mut ml, mut sl) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..draws {
            let s = stream.derive_indexed("draw", i as u64);
            let (gx, gl) = dro::stochastic_subgradient(&nv, &band, &x, lambda, 1, &s);
            let k = (i + 1) as f64;
            let dx = gx[0] - mx;
            mx += dx / k;
            sx += dx * (gx[0] - mx);
            let dl = gl - ml;
            ml += dl / k;
            sl += dl * (gl - ml);
        }
        let se_x = (sx / (draws as f64 - 1.0)).sqrt() / (draws as f64).sqrt();
        let se_l = (sl / (draws as f64 - 1.0)).sqrt() / (draws as f64).sqrt();
        let sig_x = (mx - qx[0]).abs() / se_x.max(1e-12);
        let sig_l = (ml - qlambda).abs() / se_l.max(1e-12);
        worst_sigmas = worst_sigmas.max(sig_x).max(sig_l);
        if sig_x > 3.0 || sig_l > 3.0 {
            pass = false;
        }
    }
    report(
        5,
        "subgradient unbiasedness",
        pass,
        &format!("worst deviation {worst_sigmas:.2} standard errors (required <= 3)"),
    );
}

/// Criterion 6: greedy water filling equals the LP route on 1000 random grid
/// bands with up to 200 cells, to 1e-9.
#[test]
fn criterion_6_greedy_lp_equivalence() {
    use rand::Rng;
    let mut rng = SeedStream::new(606).derive_stream("acceptance-6").rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = rng.gen_range(10..=200);
        let w = rng.gen_range(0.005..0.2);
        let mut lower = Vec::with_capacity(g);
        let mut upper = Vec::with_capacity(g);
        for _ in 0..g {
            let l: f64 = rng.gen_range(0.0..(1.5 / (g as f64 * w)));
            lower.push(l);
            upper.push(l + rng.gen_range(0.0..(3.0 / (g as f64 * w))));
        }
        let lo: f64 = lower.iter().sum::<f64>() * w;
        let hi: f64 = upper.iter().sum::<f64>() * w;
        if lo > 1.0 {
            let s = rng.gen_range(0.2..0.99) / lo;
            lower.iter_mut().for_each(|v| *v *= s);
        }
        if hi < 1.0 {
            let s = rng.gen_range(1.01..2.0) / hi;
            upper.iter_mut().for_each(|v| *v *= s);
        }
        let centers: Vec<Vec<f64>> = (0..g).map(|i| vec![i as f64]).collect();
        let grid = GridBand::from_parts(centers, w, lower, upper).unwrap();
        let fvals: Vec<f64> = (0..g).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (greedy, _) = oracle::inner_sup(&grid, &fvals).unwrap();
        let (lp, _) = oracle::inner_sup_lp(&grid, &fvals).unwrap();
        worst = worst.max((greedy - lp).abs());
    }
    report(
        6,
        "greedy vs LP inner supremum",
        worst <= 1e-9,
        &format!("worst |greedy - lp| = {worst:.3e} (required <= 1e-9)"),
    );
}

/// Criterion 7: the robust value at the fitted decision dominates the true
/// expected cost in at least 75% of 100 desk trials (newsvendor, truncated
/// exponential, N=40, alpha=0.2).
#[test]
fn criterion_7_probabilistic_upper_bound() {
    let cfg = UpperBoundCheckConfig {
        problem: ProblemConfig::Newsvendor { shortage_cost: 19.0, holding_cost: 1.0 },
        density: TrueDensity::TruncatedExponential { mean: 100.0, lo: 0.0, hi: 250.0 },
        n: 40,
        alpha: 0.2,
        group_size: 8,
        cap: None,
        mc_samples: 100_000,
        tabulate_cells: 512,
        sgd: SgdSettings { batch: 32, eta: Some(4.0), iters: 8_000 },
        trials: 100,
        n_large: 20_000,
        oracle_cells: 2000,
        seed: 4242,
    };
    let freq = experiments::probabilistic_upper_bound_check(&cfg).unwrap();
    report(
        7,
        "probabilistic upper bound",
        freq >= 0.75,
        &format!("frequency of robust value >= true cost: {freq:.3} (required >= 0.75)"),
    );
}

/// Criterion 8: the full newsvendor desk protocol completes and the mean
/// out-of-sample cost at N=80 does not exceed the mean at N=10. The measured
/// excess over the clairvoyant quantile solution is reported alongside.
#[test]
fn criterion_8_newsvendor_desk_protocol() {
    let truth = TrueDensity::TruncatedNormal { mean: 100.0, sd: 50.0, lo: 0.0, hi: 250.0 };
    let cfg = ExperimentConfig {
        name: "acceptance-newsvendor".into(),
        problem: ProblemConfig::Newsvendor { shortage_cost: 19.0, holding_cost: 1.0 },
        density: truth.clone(),
        band: BandGridConfig::Sr {
            c_grid: vec![0.5, 0.75, 1.0, 1.25, 1.5],
            alpha_grid: vec![0.75, 0.8, 0.85, 0.95],
            cap: None,
            mc_samples: 100_000,
            tabulate_cells: 512,
        },
        sizes: vec![10, 20, 40, 80],
        trials: 20,
        n_large: 20_000,
        sgd: SgdSettings { batch: 32, eta: Some(4.0), iters: 10_000 },
        seed: 7,
    };
    let out = experiments::run_experiment(&cfg, None).unwrap();
    assert_eq!(out.aggregates.len(), 4);
    let mean_small = out.aggregates.first().unwrap().mean;
    let mean_large = out.aggregates.last().unwrap().mean;

    // Clairvoyant benchmark: expected cost of the critical-quantile order
    // under the true density, by midpoint quadrature.
    let nv = Newsvendor::new(19.0, 1.0, 250.0).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..=2500 {
        let x = 250.0 * i as f64 / 2500.0;
        let nodes = 20_000;
        let cost: f64 = (0..nodes)
            .map(|j| {
                let xi = 250.0 * (j as f64 + 0.5) / nodes as f64;
                nv.evaluate(&[x], &[xi]) * truth.density(&[xi]) * (250.0 / nodes as f64)
            })
            .sum();
        best = best.min(cost);
    }
    let mean_40 = out.aggregates[2].mean;
    let excess = (mean_40 - best) / best;

    report(
        8,
        "newsvendor desk protocol",
        mean_large <= mean_small && out.failures.is_empty(),
        &format!(
            "mean cost {mean_large:.3} at N=80 <= {mean_small:.3} at N=10; \
             N=40 mean is {:.1}% above the clairvoyant cost {best:.3}",
            100.0 * excess
        ),
    );
    // The robust decisions hedge the unobserved tail, so they sit well above
    // the clairvoyant cost at desk scale; the envelope is frozen from
    // measured behavior.
    assert!(
        excess <= 0.40,
        "N=40 out-of-sample mean drifted {:.1}% above the clairvoyant benchmark",
        100.0 * excess
    );
}

/// Criterion 9: the portfolio desk protocol completes, mean out-of-sample
/// objective is nonincreasing in N, and every reported weight vector lies on
/// the probability simplex to 1e-9.
#[test]
fn criterion_9_portfolio_desk_protocol() {
    let cfg = ExperimentConfig {
        name: "acceptance-portfolio".into(),
        problem: ProblemConfig::Portfolio { assets: 10, cvar_level: 0.2, risk_aversion: 10.0 },
        density: TrueDensity::FactorNormal { assets: 10 },
        band: BandGridConfig::Kde {
            c_grid: vec![0.02, 0.04, 0.06, 0.08, 0.1],
            delta_grid: vec![0.02, 0.04, 0.06, 0.08, 0.1],
            kernel: "boxcar".into(),
            fixed_support: false,
        },
        sizes: vec![30, 60, 120],
        trials: 10,
        n_large: 20_000,
        sgd: SgdSettings { batch: 64, eta: Some(1.0), iters: 10_000 },
        seed: 2,
    };
    let out = experiments::run_experiment(&cfg, None).unwrap();
    assert_eq!(out.aggregates.len(), 3);
    let means: Vec<f64> = out.aggregates.iter().map(|a| a.mean).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);

    let mut simplex_ok = true;
    for t in &out.trials {
        let w = &t.x[..10];
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || w.iter().any(|v| *v < -1e-9) {
            simplex_ok = false;
        }
    }
    report(
        9,
        "portfolio desk protocol",
        monotone && simplex_ok && out.failures.is_empty(),
        &format!(
            "means across N=30/60/120: {:.5} >= {:.5} >= {:.5}; weights on simplex: {simplex_ok}",
            means[0], means[1], means[2]
        ),
    );
}

/// Criterion 10: 1000 random convexity and subgradient-inequality checks per
/// cost model, at 1e-12 slack.
#[test]
fn criterion_10_subgradient_validity() {
    use rand::Rng;
    let nv = Newsvendor::new(19.0, 1.0, 250.0).unwrap();
    let pf = Portfolio::new(10, 0.2, 10.0).unwrap();
    let problems: [(&str, &dyn Problem, usize); 2] = [("newsvendor", &nv, 1), ("portfolio", &pf, 10)];
    let mut checked = 0usize;
    for (name, problem, dim_xi) in problems {
        let mut rng = SeedStream::new(1010).derive_stream(name).rng();
        let n = problem.dim_x();
        let mut g = vec![0.0; n];
        for _ in 0..1000 {
            // Unit-scale draws keep the 1e-12 slack above float rounding.
            let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x2: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let xi: Vec<f64> = (0..dim_xi).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 * (a + b)).collect();
            let convex = problem.evaluate(&mid, &xi)
                <= 0.5 * (problem.evaluate(&x1, &xi) + problem.evaluate(&x2, &xi)) + 1e-12;
            problem.subgradient(&x1, &xi, &mut g);
            let linear: f64 =
                g.iter().zip(x2.iter().zip(&x1)).map(|(gi, (y, x))| gi * (y - x)).sum();
            let valid =
                problem.evaluate(&x2, &xi) >= problem.evaluate(&x1, &xi) + linear - 1e-12;
            assert!(convex && valid, "{name}: convexity/subgradient check failed");
            checked += 1;
        }
    }
    report(
        10,
        "subgradient validity",
        checked == 2000,
        &format!("{checked} convexity and subgradient checks passed at 1e-12 slack"),
    );
}
