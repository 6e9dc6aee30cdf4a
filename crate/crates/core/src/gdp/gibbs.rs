//! Gibbs sampler for the mixed-frequency GDP model with variance ratios
//! restricted to an interval.
//!
//! Each sweep draws the latent monthly path with the simulation smoother,
//! then the growth regression (`|rho| < 1`), the growth innovation variance,
//! the measurement noise variances and the unemployment equation. The ratio
//! constraint couples the path and the noise variances, so both blocks are
//! drawn from their unconstrained conditionals and rejected until the
//! constraint holds, which samples the truncated conditionals exactly.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::model::{implied_xi, xi_in_bounds, MfParams, MixedFrequencyGdpModel};
use crate::error::{Error, Result};
use crate::linalg::{mean, quantile_sorted, variance};
use crate::panel::{is_missing, TimeSeriesPanel};
use crate::rng::{inv_gamma, mvn_from_precision, seeded_stream, ProjectRng};
use crate::statespace::simulation_smoother;

#[derive(Debug, Clone, PartialEq)]
pub struct GdpPriors {
    /// Prior variance of every regression coefficient.
    pub coef_var: f64,
    /// Inverse-gamma shape and scale for all variances.
    pub var_shape: f64,
    pub var_scale: f64,
}

impl Default for GdpPriors {
    fn default() -> Self {
        GdpPriors {
            coef_var: 100.0,
            var_shape: 1.0,
            var_scale: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconcileOptions {
    pub n_draws: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub chains: usize,
    pub priors: GdpPriors,
    /// Proposals allowed per constrained block in one sweep.
    pub max_attempts: usize,
}

impl ReconcileOptions {
    pub fn new(n_draws: usize, burn_in: usize, seed: u64) -> Self {
        ReconcileOptions {
            n_draws,
            burn_in,
            seed,
            chains: 1,
            priors: GdpPriors::default(),
            max_attempts: 1000,
        }
    }
}

/// Proposal counts for the constrained blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct XiAcceptance {
    pub path_proposals: usize,
    pub path_rejections: usize,
    pub noise_proposals: usize,
    pub noise_rejections: usize,
    /// AR draws outside the unit interval.
    pub rho_rejections: usize,
}

impl XiAcceptance {
    pub fn path_rate(&self) -> f64 {
        rate(self.path_proposals, self.path_rejections)
    }

    pub fn noise_rate(&self) -> f64 {
        rate(self.noise_proposals, self.noise_rejections)
    }

    fn add(&mut self, o: &XiAcceptance) {
        self.path_proposals += o.path_proposals;
        self.path_rejections += o.path_rejections;
        self.noise_proposals += o.noise_proposals;
        self.noise_rejections += o.noise_rejections;
        self.rho_rejections += o.rho_rejections;
    }
}

fn rate(proposals: usize, rejections: usize) -> f64 {
    if proposals == 0 {
        1.0
    } else {
        (proposals - rejections) as f64 / proposals as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdpDraw {
    pub params: MfParams,
    pub xi_production: f64,
    pub xi_expenditure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyGdpPosterior {
    pub dates: Vec<NaiveDate>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    /// Retained draws over all chains.
    pub draws: Vec<GdpDraw>,
    pub chains: usize,
    pub acceptance: XiAcceptance,
    /// Largest root-mean-square gap, in posterior SD units, between a chain's
    /// monthly means and the pooled means. `None` for a single chain.
    pub chain_agreement: Option<f64>,
    pub seed: u64,
}

/// Chains agree when every chain's RMS standardized gap is within this.
pub const CHAIN_AGREEMENT_TOL: f64 = 0.05;

impl MonthlyGdpPosterior {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn chains_agree(&self) -> Option<bool> {
        self.chain_agreement.map(|a| a <= CHAIN_AGREEMENT_TOL)
    }

    /// Columns `mean, median, q05, q95`.
    pub fn to_panel(&self) -> Result<TimeSeriesPanel> {
        let t_len = self.dates.len();
        let cols = [&self.mean, &self.median, &self.q05, &self.q95];
        let values = DMatrix::from_fn(t_len, 4, |t, j| cols[j][t]);
        TimeSeriesPanel::monthly_from(
            self.dates[0],
            ["mean", "median", "q05", "q95"].map(String::from).to_vec(),
            values,
        )
    }
}

struct ChainOutput {
    paths: Vec<Vec<f64>>,
    draws: Vec<GdpDraw>,
    acceptance: XiAcceptance,
}

fn aggregates(model: &MixedFrequencyGdpModel, path: &[f64]) -> Vec<f64> {
    let s = model.config.quarterly_scale;
    (2..path.len())
        .filter(|&t| model.is_quarter_end(t))
        .map(|t| s * (path[t] + path[t - 1] + path[t - 2]))
        .collect()
}

fn noise_ok(model: &MixedFrequencyGdpModel, v: f64, p: &MfParams) -> (f64, f64, bool) {
    let xp = implied_xi(v, p.var_production);
    let xe = implied_xi(v, p.var_expenditure);
    let b = model.config.xi_bounds;
    (xp, xe, xi_in_bounds(xp, b) && xi_in_bounds(xe, b))
}

fn initial_state(model: &MixedFrequencyGdpModel) -> Result<(Vec<f64>, MfParams)> {
    let t_len = model.n_months();
    let s = model.config.quarterly_scale;
    let mut path = vec![0.0; t_len];
    for t in (2..t_len).filter(|&t| model.is_quarter_end(t)) {
        let obs: Vec<f64> = [model.production[t], model.expenditure[t]]
            .into_iter()
            .filter(|v| !is_missing(*v))
            .collect();
        let level = if obs.is_empty() { 0.0 } else { mean(&obs) / (3.0 * s) };
        path[t - 2..=t].fill(level);
    }
    let v = variance(&aggregates(model, &path)).max(1e-8);
    let (lo, hi) = model.config.xi_bounds;
    let xi0 = (lo + hi.min(1.0)) / 2.0;
    let start_noise = v * (1.0 / xi0 - 1.0);
    let unemployment = model.unemployment.as_ref().map(|u| (mean(u), 0.0, variance(u).max(1e-6)));
    let params = MfParams {
        intercept: 0.0,
        rho: 0.5,
        coefs: vec![0.0; model.n_indicators()],
        var_growth: variance(&path).max(1e-4),
        var_production: model.config.fixed_noise_production.unwrap_or(start_noise),
        var_expenditure: model.config.fixed_noise_expenditure.unwrap_or(start_noise),
        unemployment,
    };
    Ok((path, params))
}

fn low_acceptance(what: &str, proposals: usize, rejections: usize) -> Option<Error> {
    let r = rate(proposals, rejections);
    (proposals >= 100 && r < 0.01).then(|| Error::LowAcceptance {
        what: what.to_string(),
        rate: r,
    })
}

/// Bayesian linear regression draw `N(P^{-1} b, P^{-1})` with a ridge prior.
fn regression_draw<R: Rng + ?Sized>(
    rng: &mut R,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    var: f64,
    coef_var: f64,
) -> Result<DVector<f64>> {
    let k = x.ncols();
    let prec = x.transpose() * x / var + DMatrix::identity(k, k) / coef_var;
    let b = x.transpose() * y / var;
    mvn_from_precision(rng, &prec, &b).ok_or_else(|| Error::Singular {
        what: "regression posterior precision".into(),
        cond: f64::INFINITY,
    })
}

fn draw_path(
    model: &MixedFrequencyGdpModel,
    y: &DMatrix<f64>,
    params: &MfParams,
    opts: &ReconcileOptions,
    rng: &mut ProjectRng,
    acc: &mut XiAcceptance,
) -> Result<Vec<f64>> {
    let ss = model.state_space(params)?;
    for _ in 0..opts.max_attempts {
        let states = simulation_smoother(&ss, y, rng)?;
        let path: Vec<f64> = states.column(0).iter().copied().collect();
        acc.path_proposals += 1;
        let v = variance(&aggregates(model, &path));
        if noise_ok(model, v, params).2 {
            return Ok(path);
        }
        acc.path_rejections += 1;
        if let Some(e) = low_acceptance("latent path variance ratio", acc.path_proposals, acc.path_rejections) {
            return Err(e);
        }
    }
    Err(Error::LowAcceptance {
        what: "latent path variance ratio".into(),
        rate: acc.path_rate(),
    })
}

fn draw_growth_equation(
    model: &MixedFrequencyGdpModel,
    path: &[f64],
    params: &mut MfParams,
    opts: &ReconcileOptions,
    rng: &mut ProjectRng,
    acc: &mut XiAcceptance,
) -> Result<()> {
    let t_len = path.len();
    let k = model.n_indicators();
    let n = t_len - 1;
    let x = DMatrix::from_fn(n, 2 + k, |r, c| match c {
        0 => 1.0,
        1 => path[r],
        _ => model.indicators[(r + 1, c - 2)],
    });
    let y = DVector::from_fn(n, |r, _| path[r + 1]);
    let mut found = None;
    for _ in 0..opts.max_attempts {
        let b = regression_draw(rng, &x, &y, params.var_growth, opts.priors.coef_var)?;
        if b[1].abs() < 1.0 {
            found = Some(b);
            break;
        }
        acc.rho_rejections += 1;
    }
    let b = found.ok_or_else(|| Error::LowAcceptance {
        what: "stationary AR coefficient".into(),
        rate: 0.0,
    })?;
    params.intercept = b[0];
    params.rho = b[1];
    params.coefs = b.iter().skip(2).copied().collect();
    let ssr = (y - &x * &b).norm_squared();
    params.var_growth = inv_gamma(
        rng,
        opts.priors.var_shape + n as f64 / 2.0,
        opts.priors.var_scale + ssr / 2.0,
    )?;
    Ok(())
}

fn draw_noise(
    model: &MixedFrequencyGdpModel,
    path: &[f64],
    params: &mut MfParams,
    opts: &ReconcileOptions,
    rng: &mut ProjectRng,
    acc: &mut XiAcceptance,
) -> Result<()> {
    let s = model.config.quarterly_scale;
    let v = variance(&aggregates(model, path));
    let fixed = [
        model.config.fixed_noise_production,
        model.config.fixed_noise_expenditure,
    ];
    for (j, series) in [&model.production, &model.expenditure].into_iter().enumerate() {
        if fixed[j].is_some() {
            continue;
        }
        let resid: Vec<f64> = (2..path.len())
            .filter(|&t| !is_missing(series[t]))
            .map(|t| series[t] - s * (path[t] + path[t - 1] + path[t - 2]))
            .collect();
        let shape = opts.priors.var_shape + resid.len() as f64 / 2.0;
        let scale = opts.priors.var_scale + resid.iter().map(|e| e * e).sum::<f64>() / 2.0;
        let mut accepted = None;
        for _ in 0..opts.max_attempts {
            let draw = inv_gamma(rng, shape, scale)?;
            acc.noise_proposals += 1;
            if xi_in_bounds(implied_xi(v, draw), model.config.xi_bounds) {
                accepted = Some(draw);
                break;
            }
            acc.noise_rejections += 1;
            if let Some(e) = low_acceptance("noise variance ratio", acc.noise_proposals, acc.noise_rejections) {
                return Err(e);
            }
        }
        let draw = accepted.ok_or_else(|| Error::LowAcceptance {
            what: "noise variance ratio".into(),
            rate: acc.noise_rate(),
        })?;
        if j == 0 {
            params.var_production = draw;
        } else {
            params.var_expenditure = draw;
        }
    }
    Ok(())
}

fn draw_unemployment(
    model: &MixedFrequencyGdpModel,
    path: &[f64],
    params: &mut MfParams,
    opts: &ReconcileOptions,
    rng: &mut ProjectRng,
) -> Result<()> {
    let (Some(u), Some((_, _, var))) = (&model.unemployment, params.unemployment) else {
        return Ok(());
    };
    let n = u.len();
    let x = DMatrix::from_fn(n, 2, |t, c| if c == 0 { 1.0 } else { path[t] });
    let y = DVector::from_column_slice(u);
    let b = regression_draw(rng, &x, &y, var, opts.priors.coef_var)?;
    let ssr = (y - &x * &b).norm_squared();
    let var = inv_gamma(
        rng,
        opts.priors.var_shape + n as f64 / 2.0,
        opts.priors.var_scale + ssr / 2.0,
    )?;
    params.unemployment = Some((b[0], b[1], var));
    Ok(())
}

fn run_chain(model: &MixedFrequencyGdpModel, opts: &ReconcileOptions, chain: usize) -> Result<ChainOutput> {
    let mut rng = seeded_stream(opts.seed, chain as u64);
    let y = model.observations();
    let (_, mut params) = initial_state(model)?;
    let mut acc = XiAcceptance::default();
    let mut paths = Vec::with_capacity(opts.n_draws);
    let mut draws = Vec::with_capacity(opts.n_draws);
    for it in 0..opts.burn_in + opts.n_draws {
        let path = draw_path(model, &y, &params, opts, &mut rng, &mut acc)?;
        draw_growth_equation(model, &path, &mut params, opts, &mut rng, &mut acc)?;
        draw_noise(model, &path, &mut params, opts, &mut rng, &mut acc)?;
        draw_unemployment(model, &path, &mut params, opts, &mut rng)?;
        if it >= opts.burn_in {
            let v = variance(&aggregates(model, &path));
            let (xp, xe, ok) = noise_ok(model, v, &params);
            if !ok {
                return Err(Error::Numeric("retained draw violates the variance-ratio interval".into()));
            }
            draws.push(GdpDraw {
                params: params.clone(),
                xi_production: xp,
                xi_expenditure: xe,
            });
            paths.push(path);
        }
    }
    Ok(ChainOutput {
        paths,
        draws,
        acceptance: acc,
    })
}

fn chain_agreement(chain_means: &[Vec<f64>], pooled_mean: &[f64], pooled_sd: &[f64]) -> f64 {
    chain_means
        .iter()
        .map(|m| {
            let ss: f64 = m
                .iter()
                .zip(pooled_mean)
                .zip(pooled_sd)
                .map(|((a, b), s)| if *s > 0.0 { ((a - b) / s).powi(2) } else { 0.0 })
                .sum();
            (ss / m.len() as f64).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Run `opts.chains` chains (concurrently) and pool their retained draws.
pub fn reconcile(model: &MixedFrequencyGdpModel, opts: &ReconcileOptions) -> Result<MonthlyGdpPosterior> {
    if opts.n_draws == 0 || opts.chains == 0 || opts.max_attempts == 0 {
        return Err(Error::Config("draws, chains and attempts must be positive".into()));
    }
    model.config.validate()?;
    let outputs: Vec<Result<ChainOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..opts.chains)
            .map(|c| s.spawn(move || run_chain(model, opts, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("sampler thread panicked".into()))))
            .collect()
    });
    let outputs: Vec<ChainOutput> = outputs.into_iter().collect::<Result<_>>()?;
    let t_len = model.n_months();
    let mut acceptance = XiAcceptance::default();
    let mut draws = Vec::new();
    let mut chain_means = Vec::new();
    let mut mean_v = vec![0.0; t_len];
    let mut median = vec![0.0; t_len];
    let mut q05 = vec![0.0; t_len];
    let mut q95 = vec![0.0; t_len];
    let mut sd = vec![0.0; t_len];
    for out in &outputs {
        acceptance.add(&out.acceptance);
        let k = out.paths.len() as f64;
        chain_means.push((0..t_len).map(|t| out.paths.iter().map(|p| p[t]).sum::<f64>() / k).collect::<Vec<_>>());
    }
    for t in 0..t_len {
        let mut col: Vec<f64> = outputs.iter().flat_map(|o| o.paths.iter().map(move |p| p[t])).collect();
        col.sort_by(f64::total_cmp);
        mean_v[t] = mean(&col);
        sd[t] = if col.len() > 1 { variance(&col).sqrt() } else { 0.0 };
        median[t] = quantile_sorted(&col, 0.5);
        q05[t] = quantile_sorted(&col, 0.05);
        q95[t] = quantile_sorted(&col, 0.95);
    }
    for out in outputs {
        draws.extend(out.draws);
    }
    let chain_agreement = (opts.chains > 1).then(|| chain_agreement(&chain_means, &mean_v, &sd));
    Ok(MonthlyGdpPosterior {
        dates: model.months.clone(),
        mean: mean_v,
        median,
        q05,
        q95,
        draws,
        chains: opts.chains,
        acceptance,
        chain_agreement,
        seed: opts.seed,
    })
}

/// Single-chain sampler.
pub fn reconcile_gibbs(
    model: &MixedFrequencyGdpModel,
    n_draws: usize,
    burn_in: usize,
    seed: u64,
) -> Result<MonthlyGdpPosterior> {
    reconcile(model, &ReconcileOptions::new(n_draws, burn_in, seed))
}
