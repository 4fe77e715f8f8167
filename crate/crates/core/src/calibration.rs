//! Parameter estimation from daily compartment fractions.
//!
//! The one-day explicit Euler step of the controlled model is linear in
//! `theta = (beta, alpha, gamma1, gamma)`:
//!
//! ```text
//! S[n+1] - S[n](1 - mu) - mu = -beta S I        - alpha S
//! V[n+1] - V[n](1 - mu)      = -beta eps V I    + alpha S - gamma1 V
//! I[n+1] - I[n](1 - mu)      =  beta (S + eps V) I                    - gamma I
//! R[n+1] - R[n](1 - mu)      =                              gamma1 V + gamma I
//! ```
//!
//! Stacking one 4x4 block per pair of consecutive days gives a regression
//! that is solved under `theta >= 0`. With `alpha = gamma1 = 0` the first and
//! fourth rows invert day by day for `beta[n]` and `gamma[n]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SvirError};
use crate::nnls;

/// Denominator floor for the per-day closed forms.
pub const TOL_DEN: f64 = 1e-12;
/// Rounding slack before a reconstructed control counts as clamped.
const CLAMP_SLACK: f64 = 1e-12;
/// Allowed deviation of `S + V + I + R` from 1 on any day.
pub const SUM_TOLERANCE: f64 = 0.05;

/// Daily compartment fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    /// Ordinal day numbers, strictly increasing.
    pub dates: Vec<i64>,
    /// Date labels as they appeared in the source, for output.
    pub labels: Vec<String>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    /// Population used to normalise counts, if the source held counts.
    pub population: Option<f64>,
}

impl ObservedSeries {
    /// Validates and builds a series. Errors name the offending data row
    /// (1-based).
    pub fn new(dates: Vec<i64>, labels: Vec<String>, columns: [Vec<f64>; 4], population: Option<f64>) -> Result<Self> {
        let [s, v, i, r] = columns;
        let n = dates.len();
        if [labels.len(), s.len(), v.len(), i.len(), r.len()]
            .iter()
            .any(|&k| k != n)
        {
            return Err(SvirError::validation("series", "columns have different lengths"));
        }
        if n < 2 {
            return Err(SvirError::validation(
                "series",
                format!("needs at least 2 days, got {n}"),
            ));
        }
        for k in 0..n {
            let row = k + 1;
            for (name, x) in [("S", s[k]), ("V", v[k]), ("I", i[k]), ("R", r[k])] {
                if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                    return Err(SvirError::validation(
                        format!("series row {row}"),
                        format!("{name} = {x} is not a fraction in [0, 1]"),
                    ));
                }
            }
            let total = s[k] + v[k] + i[k] + r[k];
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(SvirError::validation(
                    format!("series row {row}"),
                    format!("compartments sum to {total}, outside 1 +/- {SUM_TOLERANCE}"),
                ));
            }
            if k > 0 && dates[k] <= dates[k - 1] {
                return Err(SvirError::validation(
                    format!("series row {row}"),
                    "dates must be strictly increasing",
                ));
            }
        }
        Ok(ObservedSeries {
            dates,
            labels,
            s,
            v,
            i,
            r,
            population,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Rows `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Result<ObservedSeries> {
        if start >= end || end > self.len() {
            return Err(SvirError::validation(
                "baseline_window",
                format!("{start}:{end} is outside the {} rows of the series", self.len()),
            ));
        }
        let cut = |v: &Vec<f64>| v[start..end].to_vec();
        Ok(ObservedSeries {
            dates: self.dates[start..end].to_vec(),
            labels: self.labels[start..end].to_vec(),
            s: cut(&self.s),
            v: cut(&self.v),
            i: cut(&self.i),
            r: cut(&self.r),
            population: self.population,
        })
    }
}

/// `(beta, alpha, gamma1, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub beta: f64,
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma: f64,
}

impl Rates {
    pub const NAMES: [&'static str; 4] = ["beta", "alpha", "gamma1", "gamma"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.beta, self.alpha, self.gamma1, self.gamma]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Rates {
            beta: a[0],
            alpha: a[1],
            gamma1: a[2],
            gamma: a[3],
        }
    }
}

/// Stacked one-day blocks. Row `4k + e` is equation `e` (S, V, I, R) of
/// block `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSystem {
    pub design: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Ordinal day at the start of each block.
    pub block_days: Vec<i64>,
}

impl RegressionSystem {
    pub fn blocks(&self) -> usize {
        self.block_days.len()
    }
}

fn block(series: &ObservedSeries, n: usize, mu: f64, eps: f64) -> ([[f64; 4]; 4], [f64; 4]) {
    let (s, v, i, r) = (series.s[n], series.v[n], series.i[n], series.r[n]);
    let keep = 1.0 - mu;
    let delta = [
        series.s[n + 1] - s * keep - mu,
        series.v[n + 1] - v * keep,
        series.i[n + 1] - i * keep,
        series.r[n + 1] - r * keep,
    ];
    let a = [
        [-s * i, -s, 0.0, 0.0],
        [-eps * v * i, s, -v, 0.0],
        [(s + eps * v) * i, 0.0, 0.0, -i],
        [0.0, 0.0, v, i],
    ];
    (a, delta)
}

fn check_rates(mu: f64, eps: f64) -> Result<()> {
    if !(mu.is_finite() && (0.0..1.0).contains(&mu)) {
        return Err(SvirError::validation("mu", format!("must lie in [0, 1), got {mu}")));
    }
    if !(eps.is_finite() && (0.0..=1.0).contains(&eps)) {
        return Err(SvirError::validation("eps", format!("must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

/// One block per pair of rows exactly one day apart; pairs spanning a gap
/// are skipped.
pub fn build_regression(series: &ObservedSeries, mu: f64, eps: f64) -> Result<RegressionSystem> {
    check_rates(mu, eps)?;
    let pairs: Vec<usize> = (0..series.len().saturating_sub(1))
        .filter(|&n| series.dates[n + 1] - series.dates[n] == 1)
        .collect();
    if pairs.is_empty() {
        return Err(SvirError::invalid("series has no pair of consecutive days"));
    }
    let mut design = DMatrix::zeros(4 * pairs.len(), 4);
    let mut rhs = DVector::zeros(4 * pairs.len());
    for (k, &n) in pairs.iter().enumerate() {
        let (a, d) = block(series, n, mu, eps);
        for e in 0..4 {
            for c in 0..4 {
                design[(4 * k + e, c)] = a[e][c];
            }
            rhs[4 * k + e] = d[e];
        }
    }
    Ok(RegressionSystem {
        design,
        rhs,
        block_days: pairs.iter().map(|&n| series.dates[n]).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta: Rates,
    pub residual_sse: f64,
    /// Residual norm of each equation (S, V, I, R) across all blocks.
    pub equation_residual_norms: [f64; 4],
    pub kkt_violation: f64,
    /// Directions in `theta` space the data cannot resolve, as unit vectors
    /// over the free parameters (fixed ones carry 0).
    pub degenerate_directions: Vec<[f64; 4]>,
    /// Parameters held at 0 instead of estimated.
    pub fixed: [bool; 4],
    pub blocks: usize,
}

/// Residual sum of squares of `theta` on `system`.
pub fn residual_sse(system: &RegressionSystem, theta: &Rates) -> f64 {
    let t = DVector::from_row_slice(&theta.to_array());
    (&system.rhs - &system.design * t).norm_squared()
}

/// Solves `system` under `theta >= 0`, holding the parameters flagged in
/// `fixed` at 0.
pub fn fit_regression(system: &RegressionSystem, fixed: [bool; 4]) -> Result<EstimationResult> {
    let free: Vec<usize> = (0..4).filter(|&c| !fixed[c]).collect();
    if free.is_empty() {
        return Err(SvirError::invalid("every parameter is fixed"));
    }
    if system.design.nrows() < 4 {
        return Err(SvirError::invalid("regression needs at least 4 equations"));
    }
    let a = system.design.select_columns(&free);
    let sol = nnls::nnls(&a, &system.rhs)?;
    let mut theta = [0.0; 4];
    for (k, &c) in free.iter().enumerate() {
        theta[c] = sol.x[k];
    }
    let theta = Rates::from_array(theta);

    let t = DVector::from_row_slice(&theta.to_array());
    let resid = &system.rhs - &system.design * t;
    let mut eq = [0.0f64; 4];
    for (row, r) in resid.iter().enumerate() {
        eq[row % 4] += r * r;
    }
    let degenerate_directions = nnls::null_directions(&a, 1e-10)
        .into_iter()
        .map(|d| {
            let mut full = [0.0; 4];
            for (k, &c) in free.iter().enumerate() {
                full[c] = d[k];
            }
            full
        })
        .collect();
    Ok(EstimationResult {
        theta,
        residual_sse: resid.norm_squared(),
        equation_residual_norms: eq.map(f64::sqrt),
        kkt_violation: nnls::kkt_violation(&a, &system.rhs, &sol.x),
        degenerate_directions,
        fixed,
        blocks: system.blocks(),
    })
}

/// Constrained least-squares estimate of all four rates.
pub fn estimate_constant_params(series: &ObservedSeries, mu: f64, eps: f64) -> Result<EstimationResult> {
    fit_regression(&build_regression(series, mu, eps)?, [false; 4])
}

/// Per-day SIR rates; `None` marks days whose denominator is below
/// [`TOL_DEN`] or whose successor day is missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRate {
    pub day: i64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

/// Closed-form day-by-day `beta[n]` and `gamma[n]` with `alpha = gamma1 = 0`.
/// The last row and rows before a gap have no successor and are marked
/// missing.
pub fn estimate_time_varying_sir(series: &ObservedSeries, mu: f64) -> Result<Vec<DailyRate>> {
    check_rates(mu, 0.0)?;
    let n = series.len();
    Ok((0..n)
        .map(|k| {
            let day = series.dates[k];
            if k + 1 == n || series.dates[k + 1] - day != 1 {
                return DailyRate {
                    day,
                    beta: None,
                    gamma: None,
                };
            }
            let (s, i) = (series.s[k], series.i[k]);
            let d1 = series.s[k + 1] - s * (1.0 - mu) - mu;
            let d4 = series.r[k + 1] - series.r[k] * (1.0 - mu);
            let si = s * i;
            DailyRate {
                day,
                beta: (si > TOL_DEN).then(|| -d1 / si),
                gamma: (i > TOL_DEN).then(|| d4 / i),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpostPoint {
    pub beta_hat: Option<f64>,
    pub u_hat: Option<f64>,
    /// Set when `1 - beta/beta0` fell outside `[0, 1]` by more than
    /// rounding noise and was clamped.
    pub clamped: bool,
}

/// `u[n] = 1 - beta[n] / beta0`, clamped to `[0, 1]`.
pub fn expost_control(betas: &[Option<f64>], beta0: f64) -> Result<Vec<ExpostPoint>> {
    if !(beta0.is_finite() && beta0 > 0.0) {
        return Err(SvirError::validation("beta0", format!("must be > 0, got {beta0}")));
    }
    Ok(betas
        .iter()
        .map(|&b| match b {
            None => ExpostPoint {
                beta_hat: None,
                u_hat: None,
                clamped: false,
            },
            Some(b) => {
                let raw = 1.0 - b / beta0;
                let u = raw.clamp(0.0, 1.0);
                ExpostPoint {
                    beta_hat: Some(b),
                    u_hat: Some(u),
                    clamped: (u - raw).abs() > CLAMP_SLACK,
                }
            }
        })
        .collect())
}

/// Rows `start..end` of a series used to estimate the uncontrolled
/// transmission rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineWindow {
    pub start: usize,
    pub end: usize,
}

impl Default for BaselineWindow {
    fn default() -> Self {
        BaselineWindow { start: 0, end: 21 }
    }
}

impl std::str::FromStr for BaselineWindow {
    type Err = SvirError;

    /// `start:end`, 0-based row indices, end exclusive.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| SvirError::validation("baseline_window", format!("{m} in {s:?}, expected start:end"));
        let (a, b) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
        let start: usize = a.trim().parse().map_err(|_| bad("bad start"))?;
        let end: usize = b.trim().parse().map_err(|_| bad("bad end"))?;
        if start >= end {
            return Err(bad("empty window"));
        }
        Ok(BaselineWindow { start, end })
    }
}

/// Mean of the valid daily `beta` estimates inside the window.
pub fn baseline_beta(daily: &[DailyRate], window: BaselineWindow) -> Result<f64> {
    if window.start >= window.end || window.end > daily.len() {
        return Err(SvirError::validation(
            "baseline_window",
            format!(
                "{}:{} is outside the {} rows of the series",
                window.start,
                window.end,
                daily.len()
            ),
        ));
    }
    let valid: Vec<f64> = daily[window.start..window.end].iter().filter_map(|d| d.beta).collect();
    if valid.is_empty() {
        return Err(SvirError::validation(
            "baseline_window",
            "no valid daily estimate inside the window",
        ));
    }
    let beta0 = valid.iter().sum::<f64>() / valid.len() as f64;
    if beta0 <= 0.0 {
        return Err(SvirError::Domain(format!(
            "baseline transmission estimate {beta0} is not positive"
        )));
    }
    Ok(beta0)
}

/// Exact data from the one-day discrete model. `beta_by_day[n]`, when
/// given, replaces `theta.beta` on day `n`.
pub fn discrete_series(
    theta: &Rates,
    mu: f64,
    eps: f64,
    x0: [f64; 4],
    days: usize,
    beta_by_day: Option<&dyn Fn(usize) -> f64>,
) -> Result<ObservedSeries> {
    check_rates(mu, eps)?;
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut x = x0;
    for n in 0..days {
        for c in 0..4 {
            cols[c].push(x[c]);
        }
        let beta = beta_by_day.map_or(theta.beta, |f| f(n));
        let [s, v, i, r] = x;
        x = [
            s - beta * s * i - theta.alpha * s + mu - mu * s,
            v + theta.alpha * s - eps * beta * v * i - theta.gamma1 * v - mu * v,
            i + beta * (s + eps * v) * i - theta.gamma * i - mu * i,
            r + theta.gamma1 * v + theta.gamma * i - mu * r,
        ];
    }
    let dates: Vec<i64> = (0..days as i64).collect();
    let labels = dates.iter().map(|d| d.to_string()).collect();
    ObservedSeries::new(dates, labels, cols, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_rates() -> Rates {
        Rates {
            beta: 0.22,
            alpha: 0.004,
            gamma1: 0.071,
            gamma: 0.095,
        }
    }

    #[test]
    fn two_day_block_reproduces_increment() {
        let theta = table_rates();
        let series = discrete_series(&theta, 0.005, 0.078, [0.8, 0.05, 0.1, 0.05], 2, None).unwrap();
        let sys = build_regression(&series, 0.005, 0.078).unwrap();
        assert_eq!(sys.design.shape(), (4, 4));
        let t = DVector::from_row_slice(&theta.to_array());
        assert!((&sys.design * t - &sys.rhs).amax() < 1e-16);
    }

    #[test]
    fn healthy_day_has_empty_infection_row() {
        let theta = table_rates();
        let series = discrete_series(&theta, 0.0, 0.078, [0.9, 0.05, 0.0, 0.05], 3, None).unwrap();
        let sys = build_regression(&series, 0.0, 0.078).unwrap();
        assert_eq!(sys.blocks(), 2);
        for k in 0..2 {
            assert!(sys.design.row(4 * k + 2).iter().all(|&x| x == 0.0));
            assert_eq!(sys.rhs[4 * k + 2], 0.0);
        }
    }

    #[test]
    fn gaps_drop_blocks() {
        let cols = [
            vec![0.9, 0.89, 0.88],
            vec![0.0; 3],
            vec![0.1, 0.1, 0.1],
            vec![0.0, 0.01, 0.02],
        ];
        let s = ObservedSeries::new(vec![0, 1, 5], vec!["a".into(), "b".into(), "c".into()], cols, None).unwrap();
        assert_eq!(build_regression(&s, 0.0, 0.078).unwrap().blocks(), 1);
        let daily = estimate_time_varying_sir(&s, 0.0).unwrap();
        assert!(daily[0].beta.is_some());
        assert!(daily[1].beta.is_none() && daily[2].beta.is_none());
    }

    #[test]
    fn series_validation_names_rows() {
        let mk = |s: Vec<f64>, dates: Vec<i64>| {
            let n = s.len();
            let r: Vec<f64> = s.iter().map(|x| 1.0 - x).collect();
            ObservedSeries::new(dates, vec![String::new(); n], [s, vec![0.0; n], vec![0.0; n], r], None)
        };
        assert!(mk(vec![0.5], vec![0]).is_err());
        let e = mk(vec![0.5, 1.5], vec![0, 1]).unwrap_err().to_string();
        assert!(e.contains("row 2"), "{e}");
        let e = mk(vec![0.5, 0.4], vec![1, 1]).unwrap_err().to_string();
        assert!(e.contains("increasing"), "{e}");
        let bad_sum = ObservedSeries::new(
            vec![0, 1],
            vec![String::new(); 2],
            [vec![0.5, 0.5], vec![0.0; 2], vec![0.0; 2], vec![0.4, 0.5]],
            None,
        );
        assert!(bad_sum.unwrap_err().to_string().contains("row 1"));
    }

    #[test]
    fn noise_free_recovery() {
        let theta = table_rates();
        let series = discrete_series(&theta, 0.0, 0.078, [0.85, 0.0, 0.15, 0.0], 60, None).unwrap();
        let est = estimate_constant_params(&series, 0.0, 0.078).unwrap();
        for (a, b) in est.theta.to_array().iter().zip(theta.to_array()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(est.residual_sse <= 1e-20);
        assert!(est.kkt_violation < 1e-8);
        assert!(est.degenerate_directions.is_empty());
        assert!(
            (residual_sse(&build_regression(&series, 0.0, 0.078).unwrap(), &est.theta) - est.residual_sse).abs()
                < 1e-10
        );
    }

    #[test]
    fn without_vaccination_the_vaccinated_rate_is_degenerate() {
        let theta = Rates {
            alpha: 0.0,
            ..table_rates()
        };
        let series = discrete_series(&theta, 0.0, 0.078, [0.85, 0.0, 0.15, 0.0], 30, None).unwrap();
        let est = estimate_constant_params(&series, 0.0, 0.078).unwrap();
        assert_eq!(est.degenerate_directions.len(), 1);
        assert!((est.degenerate_directions[0][2].abs() - 1.0).abs() < 1e-9);
        assert_eq!(est.theta.gamma1, 0.0);
        assert!((est.theta.beta - 0.22).abs() < 1e-9);
    }

    #[test]
    fn stepped_transmission_is_inverted_exactly() {
        let theta = Rates {
            alpha: 0.0,
            gamma1: 0.0,
            beta: 0.3,
            gamma: 0.1,
        };
        let step = |n: usize| if n < 10 { 0.3 } else { 0.1 };
        let series = discrete_series(&theta, 0.0, 0.0, [0.95, 0.0, 0.05, 0.0], 30, Some(&step)).unwrap();
        let daily = estimate_time_varying_sir(&series, 0.0).unwrap();
        for (n, d) in daily.iter().enumerate().take(29) {
            assert!((d.beta.unwrap() - step(n)).abs() < 1e-12, "day {n}");
            assert!((d.gamma.unwrap() - 0.1).abs() < 1e-12);
        }
        assert_eq!(daily[29].beta, None);
    }

    #[test]
    fn infection_free_day_is_missing() {
        let cols = [vec![0.9, 0.9], vec![0.0; 2], vec![0.0, 0.0], vec![0.1, 0.1]];
        let s = ObservedSeries::new(vec![0, 1], vec![String::new(); 2], cols, None).unwrap();
        let d = estimate_time_varying_sir(&s, 0.0).unwrap();
        assert_eq!((d[0].beta, d[0].gamma), (None, None));
    }

    #[test]
    fn expost_values() {
        let pts = expost_control(&[Some(0.22), Some(0.0), Some(0.11), Some(0.3), None], 0.22).unwrap();
        assert_eq!(pts[0].u_hat, Some(0.0));
        assert_eq!(pts[1].u_hat, Some(1.0));
        assert!((pts[2].u_hat.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pts[3].u_hat, Some(0.0));
        assert!(pts[3].clamped && !pts[2].clamped);
        let noisy = expost_control(&[Some(0.22 * (1.0 + 1e-15))], 0.22).unwrap();
        assert_eq!((noisy[0].u_hat, noisy[0].clamped), (Some(0.0), false));
        assert_eq!(pts[4].u_hat, None);
        assert!(expost_control(&[], 0.0).is_err());
    }

    #[test]
    fn window_parsing() {
        assert_eq!(
            "3:10".parse::<BaselineWindow>().unwrap(),
            BaselineWindow { start: 3, end: 10 }
        );
        for bad in ["", "3", "5:5", "a:4", "4:-1", "10:3"] {
            assert!(bad.parse::<BaselineWindow>().is_err(), "{bad}");
        }
    }

    #[test]
    fn baseline_beta_checks_window() {
        let d = vec![
            DailyRate {
                day: 0,
                beta: Some(0.2),
                gamma: None,
            },
            DailyRate {
                day: 1,
                beta: None,
                gamma: None,
            },
            DailyRate {
                day: 2,
                beta: Some(0.4),
                gamma: None,
            },
        ];
        assert!((baseline_beta(&d, BaselineWindow { start: 0, end: 3 }).unwrap() - 0.3).abs() < 1e-15);
        assert!(baseline_beta(&d, BaselineWindow { start: 0, end: 4 }).is_err());
        assert!(baseline_beta(&d, BaselineWindow { start: 1, end: 2 }).is_err());
    }
}
