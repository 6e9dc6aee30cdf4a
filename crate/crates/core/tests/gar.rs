use nalgebra::{DMatrix, DVector};
use nsfsi_core::gar::{
    backtest, default_tau_grid, ks_uniform, pinball, pinball_sum, pit, qr_fit, quantile_score, qwcrps,
    BacktestConfig, DensityForecast, ScoreWeight,
};
use nsfsi_core::rng;
use nsfsi_core::special::{std_normal_cdf, std_normal_quantile};
use nsfsi_core::synth::{gen_gar_data, GarDgpSpec};
use nsfsi_core::TimeSeriesPanel;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Minimum over every basic solution that interpolates `p` observations.
fn vertex_oracle(y: &DVector<f64>, x: &DMatrix<f64>, tau: f64) -> f64 {
    let (n, p) = x.shape();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let xh = DMatrix::from_fn(p, p, |i, j| x[(idx[i], j)]);
        let yh = DVector::from_fn(p, |i, _| y[idx[i]]);
        if xh.determinant().abs() > 1e-10 {
            if let Some(b) = xh.lu().solve(&yh) {
                best = best.min(pinball_sum(y, x, &b, tau));
            }
        }
        // Next combination in lexicographic order.
        let mut i = p;
        while i > 0 && idx[i - 1] == n - p + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[test]
fn solver_matches_vertex_enumeration() {
    let mut g = rng::seeded(2024);
    for case in 0..50 {
        let p = 1 + case % 3;
        let n = g.random_range(p + 4..=30);
        let tau = g.random_range(0.05..0.95);
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng::std_normal(&mut g) });
        let y = DVector::from_fn(n, |i, _| {
            let heavy = if g.random::<f64>() < 0.1 { 5.0 } else { 1.0 };
            x.row(i).sum() + heavy * rng::std_normal(&mut g)
        });
        let fit = qr_fit(&y, &x, tau).unwrap();
        let oracle = vertex_oracle(&y, &x, tau);
        assert!(
            (fit.loss - oracle).abs() <= 1e-6 * oracle.max(1e-12),
            "case {case}: {} vs {}",
            fit.loss,
            oracle
        );
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = (a + b) / 2.0;
    simpson(f, a, b, f(a), f(m), f(b), 1e-11, 40)
}

#[test]
fn fine_grid_score_matches_quadrature() {
    let (mu, sigma) = (0.4, 1.7);
    let taus: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
    let qs: Vec<f64> = taus.iter().map(|t| mu + sigma * std_normal_quantile(*t)).collect();
    let forecast = DensityForecast::new(taus, qs, None, 1).unwrap();
    for y in [-2.5, 0.1, 0.4, 3.0] {
        let kink = std_normal_cdf((y - mu) / sigma);
        for w in ScoreWeight::ALL {
            let f = |t: f64| w.weight(t) * quantile_score(y, mu + sigma * std_normal_quantile(t), t);
            let exact = integrate(&f, 1e-12, kink) + integrate(&f, kink, 1.0 - 1e-12);
            let approx = qwcrps(&forecast, y, w);
            assert!((approx - exact).abs() < 1e-4, "{w:?} y={y}: {approx} vs {exact}");
        }
    }
}

#[test]
fn correctly_specified_pits_pass_ks() {
    let taus = default_tau_grid();
    let mut passes = 0;
    for seed in 0..100 {
        let mut g = rng::seeded(seed);
        let pits: Vec<f64> = (0..200)
            .map(|_| {
                let mu = rng::std_normal(&mut g);
                let sigma = g.random_range(0.5..2.0);
                let qs = taus.iter().map(|t| mu + sigma * std_normal_quantile(*t)).collect();
                let f = DensityForecast::new(taus.clone(), qs, None, 1).unwrap();
                pit(&f, mu + sigma * rng::std_normal(&mut g))
            })
            .collect();
        passes += ks_uniform(&pits).unwrap().passes as usize;
    }
    assert!(passes >= 90, "{passes}/100");
}

proptest! {
    #[test]
    fn rearrangement_never_raises_the_grid_loss(
        qs in proptest::collection::vec(-5.0f64..5.0, 19),
        y in -6.0f64..6.0,
    ) {
        let taus = default_tau_grid();
        let raw: f64 = taus.iter().zip(&qs).map(|(t, q)| pinball(y - q, *t)).sum();
        let f = DensityForecast::new(taus.clone(), qs, None, 1).unwrap();
        let sorted: f64 = taus.iter().zip(f.quantiles()).map(|(t, q)| pinball(y - q, *t)).sum();
        prop_assert!(sorted <= raw + 1e-12);
    }

    #[test]
    fn score_is_translation_invariant(
        qs in proptest::collection::vec(-5.0f64..5.0, 19),
        y in -6.0f64..6.0,
        shift in -100.0f64..100.0,
    ) {
        let taus = default_tau_grid();
        let f = DensityForecast::new(taus.clone(), qs.clone(), None, 1).unwrap();
        let g = DensityForecast::new(taus, qs.iter().map(|q| q + shift).collect(), None, 1).unwrap();
        for w in ScoreWeight::ALL {
            let a = qwcrps(&f, y, w);
            prop_assert!(a >= 0.0);
            prop_assert!((a - qwcrps(&g, y + shift, w)).abs() < 1e-9);
        }
    }
}

fn one_step() -> BacktestConfig {
    BacktestConfig {
        horizons: vec![1],
        ..BacktestConfig::default()
    }
}

fn shuffled(risk: &TimeSeriesPanel, seed: u64) -> TimeSeriesPanel {
    let mut v = risk.column(0);
    v.shuffle(&mut rng::seeded(seed ^ 0x5eed));
    risk.with_values(DMatrix::from_vec(v.len(), 1, v)).unwrap()
}

fn left_score(gdp: &TimeSeriesPanel, risk: Option<&TimeSeriesPanel>) -> f64 {
    backtest("m", gdp, risk, &one_step()).unwrap().horizons[0].qwcrps_left
}

#[test]
fn informative_risk_beats_benchmark_and_placebo() {
    let spec = GarDgpSpec::default();
    let (mut vs_bench, mut vs_shuffled) = (0, 0);
    let mut placebo_gaps = Vec::new();
    for seed in 0..50 {
        let data = gen_gar_data(&spec, seed).unwrap();
        let with_risk = left_score(&data.growth, Some(&data.risk));
        let bench = left_score(&data.growth, None);
        let placebo = left_score(&data.growth, Some(&shuffled(&data.risk, seed)));
        vs_bench += (with_risk < bench) as usize;
        vs_shuffled += (with_risk < placebo) as usize;
        placebo_gaps.push(placebo - bench);
    }
    assert!(vs_bench >= 40, "beats benchmark {vs_bench}/50");
    assert!(vs_shuffled >= 40, "beats shuffled {vs_shuffled}/50");
    placebo_gaps.sort_by(f64::total_cmp);
    let median = (placebo_gaps[24] + placebo_gaps[25]) / 2.0;
    assert!(median >= 0.0, "placebo median gap {median}");
}

#[test]
fn true_quantiles_are_well_calibrated_in_the_dgp() {
    let data = gen_gar_data(&GarDgpSpec::default(), 11).unwrap();
    let y = data.growth.column(0);
    let taus = default_tau_grid();
    let pits: Vec<f64> = (0..y.len() - 1)
        .map(|t| {
            let qs = taus.iter().map(|tau| data.next_quantile(t, *tau)).collect();
            pit(&DensityForecast::new(taus.clone(), qs, None, 1).unwrap(), y[t + 1])
        })
        .collect();
    assert!(ks_uniform(&pits).unwrap().passes);
}
