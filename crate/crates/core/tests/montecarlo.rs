mod common;

use common::{gauss_legendre, gl, norm_sf};
use jumptail::expansion::{default_eps, tail_expansion};
use jumptail::model::TruncationConfig;
use jumptail::models::{compound_poisson, diffusion, model_a, model_b};
use jumptail::montecarlo::*;
use jumptail::sharemeasure::leading_term_direct;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

const ALPHA: f64 = 1.01;

fn cfg(eps: f64, n_paths: usize, t: f64, seed: u64) -> SimConfig {
    SimConfig {
        eps,
        n_steps: 100,
        n_paths,
        horizon_t: t,
        seed,
        antithetic: false,
    }
}

#[test]
fn config_validation() {
    assert!(SimConfig::default().validate().is_ok());
    assert!(cfg(0.0, 10, 0.1, 1).validate().is_err());
    assert!(cfg(0.01, 0, 0.1, 1).validate().is_err());
    assert!(SimConfig { n_steps: 0, ..SimConfig::default() }.validate().is_err());
    assert!(cfg(0.01, 10, -0.1, 1).validate().is_err());
}

#[test]
fn jump_times_are_poisson() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert!(sample_jump_times(&mut rng, 0.0, 1.0).is_empty());
    assert!(sample_jump_times(&mut rng, 5.0, 0.0).is_empty());
    let (lambda, t, reps) = (20.2632, 0.2, 100_000);
    let mut total = 0usize;
    for _ in 0..reps {
        let ts = sample_jump_times(&mut rng, lambda, t);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(ts.iter().all(|&s| s > 0.0 && s <= t));
        total += ts.len();
    }
    let mean = total as f64 / reps as f64;
    let sd = (lambda * t / reps as f64).sqrt();
    assert!((mean - lambda * t).abs() <= 3.0 * sd, "{mean}");
}

#[test]
fn pareto_jump_sizes() {
    let m = model_a();
    let s = JumpSampler::new(&m, 0.1).unwrap();
    assert!((s.lambda() - 2.0 * 0.1f64.powf(-ALPHA) / ALPHA).abs() <= 1e-12);
    let j = s.from_uniforms(0.5, 0.2).unwrap();
    assert!((j - 0.1 * 2f64.powf(1.0 / ALPHA)).abs() <= 1e-15);
    assert!((j - 0.19864).abs() < 1e-5);
    assert_eq!(s.from_uniforms(1.0, 0.2).unwrap(), 0.1);
    assert_eq!(s.from_uniforms(1.0, 0.7).unwrap(), -0.1);
    assert!(s.from_uniforms(1e-300, 0.2).unwrap() > 1e200);

    let tr = TruncationConfig::new(0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let (mut beyond, mut positive) = (0usize, 0usize);
    for _ in 0..n {
        let j = sample_jump_size(&mut rng, &m, &tr).unwrap();
        assert!(j.abs() >= 0.1);
        beyond += (j.abs() > 0.2) as usize;
        positive += (j > 0.0) as usize;
    }
    let p = 2f64.powf(-ALPHA);
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((beyond as f64 / n as f64 - p).abs() <= 3.0 * sd);
    assert!((positive as f64 / n as f64 - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
}

#[test]
fn tabulated_sampler_inverts_the_tail() {
    // uniform marks on ±[1, 2]: ∫_r^2 = dens (2 - r)
    let cp = compound_poisson(3.0, 1.0, 2.0, 0.0, 0.2, "cp").unwrap();
    let s = JumpSampler::new(&cp, 0.5).unwrap();
    assert!((s.lambda() - 3.0).abs() <= 1e-10);
    for v in [1e-9, 0.1, 0.5, 0.93, 1.0] {
        let r = s.from_uniforms(v, 0.1).unwrap();
        assert!((r - (2.0 - v)).abs() <= 1e-9, "{v}: {r}");
        assert!((s.from_uniforms(v, 0.9).unwrap() + (2.0 - v)).abs() <= 1e-9);
    }

    // tempered stable: compare with an independent tail quadrature
    let m = model_b();
    let s = JumpSampler::new(&m, 0.05).unwrap();
    let rule = gauss_legendre(20);
    let tail = |r: f64| {
        // r = a e^u
        gl(|u: f64| {
            let z = r * u.exp();
            (-2.0 * z).exp() * z.powf(-ALPHA)
        }, 0.0, (40.0 / r).ln(), 200, &rule)
    };
    let total = tail(0.05);
    assert!((s.lambda() - 2.0 * total).abs() <= 1e-9 * total);
    for v in [0.9, 0.5, 0.1, 1e-3, 1e-6] {
        let r = s.from_uniforms(v, 0.2).unwrap();
        let got = tail(r) / total;
        assert!((got - v).abs() <= 1e-8 * v, "{v}: {got}");
    }
}

#[test]
fn brownian_terminal_law() {
    let bm = diffusion(0.0, 1.0, "bm");
    let t = 0.3;
    let sim = Simulator::new(&bm, cfg(0.01, 10_000, t, 5), 0.0).unwrap();
    let mut xs: Vec<f64> = sim.run().unwrap().iter().map(|o| o.terminal).collect();
    xs.sort_by(f64::total_cmp);
    let law = Normal::new(0.0, t.sqrt()).unwrap();
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov–Smirnov statistic
    assert!(d < 1.628 / n.sqrt(), "{d}");

    let half = estimate_tail(&bm, &cfg(0.01, 20_000, t, 9), 0.0, 0.0).unwrap();
    assert!((half.p_hat - 0.5).abs() <= 3.0 * half.std_err);
    assert!((half.std_err - (half.p_hat * (1.0 - half.p_hat) / 20_000.0).sqrt()).abs() <= 1e-18);
}

#[test]
fn deterministic_drift() {
    let m = diffusion(1.0, 0.0, "ode");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = simulate_path(&m, &cfg(0.01, 1, 0.4, 1), &mut rng, 0.25).unwrap();
    assert!((x - 0.65).abs() <= 1e-12);
    let m = model_a();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(simulate_path(&m, &cfg(0.01, 1, 0.0, 1), &mut rng, 0.3).unwrap(), 0.3);
}

#[test]
fn candidate_counts_are_poisson() {
    let m = model_a();
    let (eps, t) = (0.1, 0.2);
    let sim = Simulator::new(&m, cfg(eps, 10_000, t, 21), 0.0).unwrap();
    let lambda = sim.sampler().lambda();
    assert!((candidate_rate(&m, eps).unwrap() - lambda).abs() <= 1e-9 * lambda);
    let out = sim.run().unwrap();
    let mu = lambda * t;
    let bins = 11;
    let mut observed = vec![0.0; bins];
    for o in &out {
        observed[(o.candidates as usize).min(bins - 1)] += 1.0;
    }
    let n = out.len() as f64;
    let mut expected = vec![0.0; bins];
    let mut pk = (-mu).exp();
    for (k, e) in expected.iter_mut().enumerate().take(bins - 1) {
        *e = n * pk;
        pk *= mu / (k + 1) as f64;
    }
    expected[bins - 1] = n - expected.iter().sum::<f64>();
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < crit, "{chi2} vs {crit}");
}

#[test]
fn thinning_acceptance_matches_intensity_ratio() {
    let m = model_a();
    let sim = Simulator::new(&m, cfg(0.01, 20_000, 0.1, 3), 0.0).unwrap();
    let out = sim.run().unwrap();
    let cand: f64 = out.iter().map(|o| o.candidates as f64).sum();
    let acc: f64 = out.iter().map(|o| o.accepted as f64).sum();
    let pred: f64 = out.iter().map(|o| o.acceptance_prob_sum).sum();
    let p = pred / cand;
    let sd = (p * (1.0 - p) / cand).sqrt();
    assert!((acc / cand - p).abs() <= 3.0 * sd, "{} vs {p}", acc / cand);
    // paths stay near 0 where ν/h = c(0) = 3/4
    assert!((p - 0.75).abs() < 0.01);
}

#[test]
fn far_tail_is_empty() {
    let e = estimate_tail(&model_a(), &cfg(0.01, 2_000, 0.01, 4), 0.0, 100.0).unwrap();
    assert_eq!(e.p_hat, 0.0);
    assert_eq!(e.n_paths, 2_000);
    assert_eq!(e.seed, 4);
}

#[test]
fn reproducible_across_runs_and_threads() {
    let m = model_a();
    let c = cfg(0.01, 3_000, 0.1, 99);
    let a = estimate_tail(&m, &c, 0.0, 1.0).unwrap();
    let b = estimate_tail(&m, &c, 0.0, 1.0).unwrap();
    assert_eq!(a, b);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| Simulator::new(&m, c, 0.0).unwrap().run().unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    let other = estimate_tail(&m, &SimConfig { seed: 100, ..c }, 0.0, 1.0).unwrap();
    assert_ne!(other, a);
}

#[test]
fn antithetic_pairs_negate_gaussian_increments() {
    let bm = diffusion(0.0, 1.0, "bm");
    let c = SimConfig { antithetic: true, ..cfg(0.01, 4, 0.5, 13) };
    let sim = Simulator::new(&bm, c, 0.0).unwrap();
    let (p0, p1) = (sim.path(0).unwrap(), sim.path(1).unwrap());
    assert!((p0.terminal + p1.terminal).abs() <= 1e-12);
    let e = estimate_option(&bm, &SimConfig { antithetic: true, ..cfg(0.01, 2_000, 0.5, 13) }, 1.0, 0.0).unwrap();
    assert!(e.price > 0.0);
}

/// Black–Scholes call with zero rate.
fn black_scholes(s0: f64, strike: f64, vol: f64, t: f64) -> f64 {
    let sd = vol * t.sqrt();
    let d1 = ((s0 / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    s0 * (1.0 - norm_sf(d1)) - strike * (1.0 - norm_sf(d2))
}

#[test]
fn lognormal_call_matches_black_scholes() {
    let vol = 0.2;
    let m = diffusion(-0.5 * vol * vol, vol, "bs");
    let (k, t) = (0.1, 0.25);
    let e = estimate_option(&m, &cfg(0.01, 100_000, t, 17), 1.0, k).unwrap();
    let bs = black_scholes(1.0, k.exp(), vol, t);
    assert!((e.price - bs).abs() <= 3.0 * e.std_err, "{} ± {} vs {bs}", e.price, e.std_err);
    assert!((e.mean_exp - 1.0).abs() <= 3.0 * e.mean_exp_std_err);
    let far = estimate_option(&m, &cfg(0.01, 10_000, t, 17), 1.0, 10.0).unwrap();
    assert_eq!(far.price, 0.0);
}

#[test]
fn calibrated_model_is_a_martingale_in_simulation() {
    let m = model_b();
    let e = estimate_option(&m, &cfg(0.01, 50_000, 0.1, 23), 1.0, 0.3).unwrap();
    assert!((e.mean_exp - 1.0).abs() <= 3.0 * e.mean_exp_std_err, "{} ± {}", e.mean_exp, e.mean_exp_std_err);
}

#[test]
fn short_maturity_price_follows_the_jump_term() {
    let m = model_b();
    let (k, t) = (0.3, 0.01);
    let e = estimate_option(&m, &cfg(0.01, 200_000, t, 31), 1.0, k).unwrap();
    let lead = leading_term_direct(&m, 1.0, k, t).unwrap();
    // the leading term alone leaves an O(t²) remainder
    assert!((e.price / t - lead / t).abs() <= 3.0 * e.std_err / t + 0.1 * lead / t, "{} vs {}", e.price, lead);
}

#[test]
fn tail_estimate_tracks_the_expansion() {
    let m = model_a();
    let (t, y) = (0.1, 1.0);
    let e = estimate_tail(&m, &cfg(0.01, 50_000, t, 41), 0.0, y).unwrap();
    let x = tail_expansion(&m, &TruncationConfig::new(default_eps(y)).unwrap(), 0.0, y, t).unwrap();
    assert!((e.p_hat - x.order2).abs() <= e.half_width() + 0.005, "{} vs {}", e.p_hat, x.order2);
}

#[test]
fn cutoff_choice_barely_moves_the_estimate() {
    let m = model_a();
    let a = estimate_tail(&m, &cfg(0.1, 40_000, 0.1, 51), 0.0, 1.0).unwrap();
    let b = estimate_tail(&m, &cfg(0.01, 40_000, 0.1, 51), 0.0, 1.0).unwrap();
    assert!((a.p_hat - b.p_hat).abs() < 2.0 * (a.half_width().powi(2) + b.half_width().powi(2)).sqrt());
}

#[test]
fn compensated_sum() {
    let v = [1e16, 1.0, -1e16, 1.0];
    assert_eq!(neumaier_sum(v), 2.0);
    assert_eq!(neumaier_sum(std::iter::empty()), 0.0);
}
