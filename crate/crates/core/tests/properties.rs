use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use robust_lds::harness::config::{ExperimentConfig, FilterConfig, Seeds};
use robust_lds::harness::episode::run_episode;
use robust_lds::learner::LearnerConfig;
use robust_lds::rifs::{simulate as rifs_simulate, stationary_distribution};
use robust_lds::sim::{
    simulate, step, BSchedule, CorruptionModel, InputGen, NoiseDist, NoiseFamily, NoiseModel, SystemSchedule,
    SystemSpec, XiDist,
};
use robust_lds::{featurize, preset, score, DetectorConfig, ExtraConfig, FilterBank, ModelState, RifsMap, RifsSpec,
    ThresholdState};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

fn system(d: usize, n: usize, m: usize, vals: &[f64]) -> SystemSpec {
    let mut it = vals.iter().copied().cycle();
    let mut take = |r: usize, c: usize, scale: f64| DMatrix::from_fn(r, c, |_, _| scale * it.next().unwrap());
    SystemSpec::new(take(d, d, 0.1), take(d, n, 1.0), take(m, d, 1.0), take(m, n, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_linear(
        vals in vec_strategy(32),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        u in vec_strategy(8),
        w in vec_strategy(8),
    ) {
        let spec = system(2, 2, 2, &vals);
        let v = |s: &[f64], i: usize| DVector::from_column_slice(&s[i..i + 2]);
        let (h1, y1) = step(&v(&u, 0), &v(&u, 2), &v(&u, 4), &v(&u, 6), &spec).unwrap();
        let (h2, y2) = step(&v(&w, 0), &v(&w, 2), &v(&w, 4), &v(&w, 6), &spec).unwrap();
        let mix = |i: usize| v(&u, i) * a + v(&w, i) * b;
        let (h, y) = step(&mix(0), &mix(2), &mix(4), &mix(6), &spec).unwrap();
        prop_assert!(close(&h, &(h1 * a + h2 * b), 1e-12));
        prop_assert!(close(&y, &(y1 * a + y2 * b), 1e-12));
    }

    #[test]
    fn uncorrupted_simulation_observes_clean(seed in any::<u64>(), horizon in 1usize..60) {
        let spec = preset("hazan-siso").unwrap().system.base;
        let traj = simulate(&spec, &NoiseModel::gaussian(0.1, 0.1), &CorruptionModel::none(),
            InputGen::Gaussian, horizon, seed).unwrap();
        prop_assert_eq!(&traj.observed, &traj.clean);
        prop_assert!(traj.mask.iter().all(|&m| !m));
        prop_assert_eq!(traj.hidden.len(), horizon + 1);
    }

    #[test]
    fn corruption_leaves_clean_path_alone(seed in any::<u64>(), p in 0.0..0.99f64) {
        let spec = preset("hazan-siso").unwrap().system.base;
        let noise = NoiseModel::gaussian(0.1, 0.1);
        let xi = XiDist::Uniform { low: 0.0, high: 100.0 };
        let base = simulate(&spec, &noise, &CorruptionModel::none(), InputGen::Gaussian, 40, seed).unwrap();
        let corrupted = simulate(&spec, &noise, &CorruptionModel { p, xi }, InputGen::Gaussian, 40, seed).unwrap();
        prop_assert_eq!(&base.clean, &corrupted.clean);
        prop_assert_eq!(&base.inputs, &corrupted.inputs);
        for t in 0..40 {
            if !corrupted.mask[t] {
                prop_assert_eq!(&corrupted.observed[t], &corrupted.clean[t]);
            }
        }
    }

    #[test]
    fn featurize_is_linear(
        xs in vec_strategy(24),
        ys in vec_strategy(24),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        t in 1usize..12,
    ) {
        let bank = FilterBank::shared(8, 4).unwrap();
        let hist = |s: &[f64]| (0..t).map(|i| DVector::from_column_slice(&s[2 * i..2 * i + 2])).collect::<Vec<_>>();
        let (hx, hy) = (hist(&xs), hist(&ys));
        let mixed: Vec<_> = hx.iter().zip(&hy).map(|(x, y)| x * a + y * b).collect();
        let (px, py) = (DVector::from_element(1, xs[23]), DVector::from_element(1, ys[23]));
        let fx = featurize(&hx, &px, &bank, t).unwrap().vec;
        let fy = featurize(&hy, &py, &bank, t).unwrap().vec;
        let f = featurize(&mixed, &(&px * a + &py * b), &bank, t).unwrap().vec;
        prop_assert!(close(&f, &(fx * a + fy * b), 1e-12));
    }

    #[test]
    fn filter_bank_invariants(n in 1usize..48, k_frac in 0.0..1.0f64) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let bank = FilterBank::build(n, k).unwrap();
        let z = robust_lds::hankel_matrix(n);
        for j in 0..k {
            let phi = DVector::from_column_slice(bank.phi(j));
            prop_assert!((phi.norm() - 1.0).abs() <= 1e-10);
            prop_assert!((&z * &phi - &phi * bank.sigma()[j]).norm() <= 1e-8);
            let first = bank.phi(j).iter().find(|x| x.abs() > 1e-12).copied();
            prop_assert!(first.is_none_or(|x| x > 0.0));
            if j > 0 {
                prop_assert!(bank.sigma()[j - 1] >= bank.sigma()[j]);
            }
            for i in 0..j {
                prop_assert!(phi.dot(&DVector::from_column_slice(bank.phi(i))).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn coordinate_sweeps_never_increase_objective(
        vals in prop::collection::vec(-3.0..3.0f64, 120),
        ridge in 0.0..1.0f64,
    ) {
        let (q, m) = (5, 2);
        let mut st = ModelState::new(q, m, LearnerConfig { ridge, ..Default::default() }).unwrap();
        for i in 0..(vals.len() / (q + m)) {
            let chunk = &vals[i * (q + m)..(i + 1) * (q + m)];
            st.accept(&DVector::from_column_slice(&chunk[..q]), &DVector::from_column_slice(&chunk[q..])).unwrap();
        }
        let mut prev = st.objective();
        for _ in 0..20 {
            st.coordinate_sweeps(1);
            let now = st.objective();
            prop_assert!(now <= prev + 1e-12 * prev.abs().max(1.0));
            prev = now;
        }
    }

    #[test]
    fn window_matches_scratch_solution(
        vals in prop::collection::vec(-3.0..3.0f64, 40 * 4),
        window in 4usize..20,
    ) {
        let (q, m) = (3, 1);
        let pairs: Vec<_> = vals
            .chunks(q + m)
            .map(|c| (DVector::from_column_slice(&c[..q]), DVector::from_column_slice(&c[q..])))
            .collect();
        let cfg = LearnerConfig { ridge: 1e-6, window: Some(window), incremental_iters: None };
        let mut windowed = ModelState::new(q, m, cfg).unwrap();
        for (x, y) in &pairs {
            windowed.learn(x, y).unwrap();
        }
        let mut scratch = ModelState::new(q, m, LearnerConfig { window: None, ..cfg }).unwrap();
        scratch.update_batch(&pairs[pairs.len() - window..]).unwrap();
        prop_assert!((windowed.coef() - scratch.coef()).norm() <= 1e-10);
    }

    #[test]
    fn exact_recovery_without_ridge(vals in prop::collection::vec(-1.0..1.0f64, 4 * 12 + 4)) {
        let q = 4;
        let truth = DMatrix::from_row_slice(1, q, &vals[..q]);
        let mut st = ModelState::new(q, 1, LearnerConfig { ridge: 0.0, ..Default::default() }).unwrap();
        // Identity rows guarantee a full-rank design.
        let mut pairs = Vec::new();
        for i in 0..q {
            let mut x = DVector::from_column_slice(&vals[q + i * q..q + (i + 1) * q]) * 0.1;
            x[i] += 1.0;
            pairs.push((x.clone(), &truth * &x));
        }
        for i in q..12 {
            let x = DVector::from_column_slice(&vals[q + i * q..q + (i + 1) * q]);
            pairs.push((x.clone(), &truth * &x));
        }
        st.update_batch(&pairs).unwrap();
        prop_assert!((st.coef() - &truth).norm() <= 1e-8);
    }

    #[test]
    fn detector_invariants(
        losses in prop::collection::vec(prop_oneof![0.0..2.0f64, 50.0..500.0f64], 1..150),
        alpha in 0.001..1.0f64,
        beta in 1.01..3.0f64,
        c_min in 0.0..2.0f64,
        warmup in 0usize..15,
        with_extra in any::<bool>(),
    ) {
        let extra = with_extra.then_some(ExtraConfig { window: 10, level: 0.05 });
        let cfg = DetectorConfig { alpha, beta, c_min, c_init: c_min + 0.5, warmup, extra };
        let mut det = ThresholdState::new(cfg).unwrap();
        let mut accepted = Vec::new();
        let mut last_e = 0;
        for (i, &l) in losses.iter().enumerate() {
            let obs = det.observe(l).unwrap();
            if i < warmup {
                prop_assert!(obs.threshold.is_infinite() && !obs.decision.is_anomaly());
            }
            if !obs.decision.is_anomaly() {
                accepted.push(l);
            }
            prop_assert!(det.c() >= c_min);
            prop_assert!(det.anomalies() >= last_e);
            prop_assert!(det.anomalies() <= det.steps());
            prop_assert!((0.0..=1.0).contains(&det.p_hat()));
            prop_assert_eq!(det.p_hat(), det.anomalies() as f64 / det.steps() as f64);
            last_e = det.anomalies();
        }
        prop_assert_eq!(det.losses(), accepted.as_slice());
    }

    #[test]
    fn threshold_increases_with_c(losses in prop::collection::vec(0.0..10.0f64, 2..30), c in 1.0..5.0f64) {
        prop_assume!(losses.iter().any(|&l| l != losses[0]));
        let make = |c_init: f64| {
            let cfg = DetectorConfig { alpha: 1e-9, beta: 1.5, c_min: 1.0, c_init, warmup: losses.len(), extra: None };
            let mut det = ThresholdState::new(cfg).unwrap();
            for &l in &losses {
                det.observe(l).unwrap();
            }
            det
        };
        let (lo, hi) = (make(c), make(c + 0.5));
        prop_assert!(lo.std_loss() > 0.0);
        prop_assert!(lo.threshold() < hi.threshold());
    }

    #[test]
    fn stationary_distribution_is_fixed_point(raw in prop::collection::vec(0.05..1.0f64, 9)) {
        let p: Vec<Vec<f64>> = raw.chunks(3).map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|x| x / s).collect()
        }).collect();
        let m = stationary_distribution(&p).unwrap();
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..3 {
            let mp: f64 = (0..3).map(|i| m[i] * p[i][j]).sum();
            prop_assert!((mp - m[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_scores_perfectly(mask in prop::collection::vec(any::<bool>(), 1..100)) {
        prop_assume!(mask.iter().any(|&b| b));
        prop_assert_eq!(score(&mask, &mask).unwrap().f1, 1.0);
    }

    #[test]
    fn f1_is_harmonic_mean(flags in prop::collection::vec(any::<bool>(), 1..100), mask in prop::collection::vec(any::<bool>(), 100)) {
        let m = score(&flags, &mask[..flags.len()]).unwrap();
        if m.tp == 0 {
            prop_assert_eq!(m.f1, 0.0);
        } else {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-15);
        }
    }
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        (any::<f64>().prop_filter("finite", |x| x.is_finite()), 1usize..500, 1usize..10),
        (0.0..0.99f64, prop_oneof![Just(0u8), Just(1u8), Just(2u8)], -1e3..1e3f64, 0.0..1e3f64),
        (1e-12..1.0f64, prop::option::of(1usize..100), prop::option::of(1usize..5)),
        (1e-6..1.0f64, 1.0001..5.0f64, 0.5..2.0f64, 0usize..50, any::<bool>()),
        (prop::option::of(prop::collection::vec(any::<u64>(), 1..5)), 0u8..3, any::<bool>()),
    )
        .prop_map(|(sys, corr, learn, det, misc)| {
            let (a0, horizon, k) = sys;
            let mut cfg = preset("hazan-siso").unwrap();
            cfg.system = SystemSchedule {
                base: SystemSpec::from_rows(&[vec![a0 % 1.0]], &[vec![1.0]], &[vec![0.5]], &[vec![-0.25]]).unwrap(),
                b: if misc.2 { BSchedule::Sinusoid { start: 7, offset: corr.2, period: 3.5 } } else { BSchedule::Constant },
            };
            cfg.horizon = horizon;
            cfg.filters = FilterConfig { k: k.min(horizon), horizon: None };
            cfg.corruption = CorruptionModel {
                p: corr.0,
                xi: match corr.1 {
                    0 => XiDist::Uniform { low: corr.2, high: corr.2 + corr.3 },
                    1 => XiDist::Gaussian { mean: corr.2, std: corr.3 },
                    _ => XiDist::ConstantOffset { delta: corr.2 },
                },
            };
            cfg.noise = NoiseModel {
                eta: NoiseDist { family: NoiseFamily::Uniform, std: corr.3 / 7.0 },
                zeta: NoiseDist::gaussian(0.3),
                budget: if misc.2 { f64::INFINITY } else { 1e9 },
            };
            cfg.learner = LearnerConfig { ridge: learn.0, window: learn.1, incremental_iters: learn.2 };
            cfg.detector = DetectorConfig {
                alpha: det.0,
                beta: det.1,
                c_min: det.2,
                c_init: det.2 + 0.1,
                warmup: det.3,
                extra: det.4.then_some(ExtraConfig { window: 9, level: 0.1 }),
            };
            cfg.input_gen = match misc.1 {
                0 => InputGen::Gaussian,
                1 => InputGen::Uniform,
                _ => InputGen::Sinusoid { period: 12.5 },
            };
            cfg.seeds = misc.0.map_or(Seeds::Count(3), Seeds::List);
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trips_bit_exactly(cfg in config_strategy()) {
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episode_losses_are_exact(seed in any::<u64>(), p in 0.0..0.3f64) {
        let mut cfg = preset("hazan-siso").unwrap();
        cfg.horizon = 50;
        cfg.filters.k = 6;
        cfg.corruption.p = p;
        let rec = run_episode(&cfg, seed).unwrap();
        for t in 0..rec.len() {
            let l = (&rec.trajectory.observed[t] - &rec.predictions[t]).norm_squared();
            prop_assert_eq!(l.to_bits(), rec.losses[t].to_bits());
        }
    }
}

#[test]
fn corruption_rate_concentrates_over_seeds() {
    let spec = preset("hazan-siso").unwrap().system.base;
    let corr = CorruptionModel { p: 0.1, xi: XiDist::Uniform { low: 0.0, high: 100.0 } };
    let (mut hits, mut total) = (0usize, 0usize);
    for seed in 0..120 {
        let traj = simulate(&spec, &NoiseModel::gaussian(0.1, 0.1), &corr, InputGen::Gaussian, 500, seed).unwrap();
        hits += traj.mask.iter().filter(|&&m| m).count();
        total += traj.len();
    }
    let rate = hits as f64 / total as f64;
    // Binomial std at n = 60000 is about 0.0012.
    assert!((rate - 0.1).abs() < 0.006, "rate {rate}");
}

#[test]
fn iid_selector_passes_chi_square_independence() {
    let spec = RifsSpec::iid(
        vec![RifsMap::affine(0.5, 0.0), RifsMap::affine(0.5, 1.0), RifsMap::affine(0.3, -1.0)],
        &[0.2, 0.3, 0.5],
        0.0,
    );
    let path = rifs_simulate(&spec, 60_000, 99).unwrap();
    let mut counts = [[0f64; 3]; 3];
    for w in path[1..].windows(2) {
        counts[w[0].1][w[1].1] += 1.0;
    }
    let n: f64 = counts.iter().flatten().sum();
    let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..3).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let expected = rows[i] * cols[j] / n;
            stat += (counts[i][j] - expected).powi(2) / expected;
        }
    }
    let p_value = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi-square {stat}, p = {p_value}");
    for (j, &w) in [0.2, 0.3, 0.5].iter().enumerate() {
        assert!((cols[j] / n - w).abs() < 0.01);
    }
}
