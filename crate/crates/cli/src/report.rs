//! CSV and JSON layouts of the emitted tables.

use nalgebra::DMatrix;
use nsfsi_core::nsfactor::FactorNumberTable;
use nsfsi_core::panel::format_float;
use nsfsi_core::statespace::{EstimatedFactorModel, PosteriorDraws};
use nsfsi_core::transforms::{adf_test, AdfResult, AdfSpec, LagRule};
use nsfsi_core::TimeSeriesPanel;
use serde_json::json;

use crate::error::CliResult;

fn level_label(p: f64) -> String {
    format!("q{:02}", (p * 100.0).round() as i64)
}

/// One row per candidate `r`: degrees of freedom, both chi-square bounds,
/// the statistic at each lag and the matching rejection flags.
pub fn factor_table_csv(table: &FactorNumberTable) -> String {
    let mut out = format!(
        "r,dof,{},{}",
        level_label(table.level),
        level_label(1.0 - table.level)
    );
    for k in &table.lags {
        out.push_str(&format!(",S_k{k}"));
    }
    for k in &table.lags {
        out.push_str(&format!(",reject_k{k}"));
    }
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{}",
            row.r,
            row.dof,
            format_float(row.q_lower),
            format_float(row.q_upper)
        ));
        for s in &row.s {
            out.push(',');
            out.push_str(&format_float(*s));
        }
        for rej in &row.reject {
            out.push_str(if *rej { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

pub fn factor_names(r: usize) -> Vec<String> {
    (1..=r).map(|j| format!("f{j}")).collect()
}

/// `series,f1,...,fr`.
pub fn loadings_csv(series: &[String], loadings: &DMatrix<f64>) -> String {
    let mut out = String::from("series");
    for name in factor_names(loadings.ncols()) {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for (i, s) in series.iter().enumerate() {
        out.push_str(s);
        for j in 0..loadings.ncols() {
            out.push(',');
            out.push_str(&format_float(loadings[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn factor_panel(dates: &TimeSeriesPanel, factors: &DMatrix<f64>) -> CliResult<TimeSeriesPanel> {
    Ok(TimeSeriesPanel::new(
        dates.dates().to_vec(),
        factor_names(factors.ncols()),
        factors.clone(),
        dates.frequency(),
    )?)
}

fn adf_json(a: &AdfResult) -> serde_json::Value {
    json!({
        "statistic": a.statistic,
        "p_value": a.p_value,
        "p_clamped": a.p_clamped,
        "lags": a.lags_used,
        "n_obs": a.n_obs,
    })
}

pub fn em_diagnostics(est: &EstimatedFactorModel) -> serde_json::Value {
    json!({
        "method": "em",
        "r": est.params.n_factors(),
        "var_order": est.params.var_order(),
        "loglik": est.loglik(),
        "loglik_trace": est.loglik_trace,
        "converged": est.converged,
        "iterations": est.iterations,
        "stationary": est.stationary,
        "adf": est.adf.iter().map(adf_json).collect::<Vec<_>>(),
        "explained_variance": est.explained.shares,
        "explained_cumulative": est.explained.cumulative,
    })
}

/// Summary of a posterior run. Stationarity is judged by ADF on the
/// posterior mean factor paths.
pub fn bayes_diagnostics(
    post: &PosteriorDraws,
    x: &DMatrix<f64>,
    adf_level: f64,
) -> CliResult<serde_json::Value> {
    let loadings = post.mean_loadings();
    let explained =
        nsfsi_core::statespace::explained_variance(&loadings, &post.factor_mean, x)?;
    let adf = (0..post.factor_mean.ncols())
        .map(|j| {
            let col: Vec<f64> = post.factor_mean.column(j).iter().copied().collect();
            adf_test(&col, AdfSpec::Constant, None, LagRule::Bic)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "method": "bayes",
        "r": loadings.ncols(),
        "var_order": post.params[0].var_order(),
        "draws": post.params.len(),
        "rejected_covariance_draws": post.rejected_draws,
        "seed": post.seed,
        "stationary": adf.iter().map(|a| a.p_value < adf_level).collect::<Vec<_>>(),
        "adf": adf.iter().map(adf_json).collect::<Vec<_>>(),
        "explained_variance": explained.shares,
        "explained_cumulative": explained.cumulative,
    }))
}

pub fn adf_csv(panel: &TimeSeriesPanel, spec: AdfSpec, max_lags: Option<usize>, rule: LagRule) -> CliResult<String> {
    let mut out = String::from("series,statistic,p_value,p_clamped,lags,n_obs\n");
    for (j, name) in panel.names().iter().enumerate() {
        let a = adf_test(&panel.column(j), spec, max_lags, rule)?;
        out.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            format_float(a.statistic),
            format_float(a.p_value),
            a.p_clamped as u8,
            a.lags_used,
            a.n_obs
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nsfsi_core::nsfactor::FactorNumberRow;

    #[test]
    fn factor_table_layout() {
        let table = FactorNumberTable {
            lags: vec![1, 2],
            level: 0.05,
            decision_lag: 1,
            rows: vec![FactorNumberRow {
                r: 0,
                dof: 4,
                q_lower: 0.710723,
                q_upper: 9.487729,
                s: vec![12.5, 3.0],
                reject: vec![true, false],
            }],
            eigenvalues: vec![],
            selected: 1,
        };
        let csv = factor_table_csv(&table);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("r,dof,q05,q95,S_k1,S_k2,reject_k1,reject_k2"));
        assert_eq!(lines.next(), Some("0,4,0.710723,9.487729,12.5,3.0,1,0"));
    }

    #[test]
    fn loadings_layout() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.25, 2.0]);
        let csv = loadings_csv(&["a".into(), "b".into()], &l);
        assert_eq!(csv, "series,f1,f2\na,1.0,0.5\nb,-0.25,2.0\n");
    }
}
