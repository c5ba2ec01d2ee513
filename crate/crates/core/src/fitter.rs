//! Power-law exponents of sampled decay series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values at or below this magnitude are treated as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-14;
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    /// The series changed sign; the fit used its local maxima.
    pub envelope: bool,
    /// Coefficient of `ln ln t` when the log-factor regression was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_power: Option<f64>,
}

/// `y ≈ Σ c_k x_k`, solved by normal equations (at most three columns).
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = cols[i].iter().zip(&cols[j]).map(|(p, q)| p * q).sum();
        }
        a[i][k] = cols[i].iter().zip(y).map(|(p, q)| p * q).sum();
    }
    // Gaussian elimination with partial pivoting
    for c in 0..k {
        let piv = (c..k)
            .max_by(|&p, &q| a[p][c].abs().total_cmp(&a[q][c].abs()))
            .expect("nonempty");
        a.swap(c, piv);
        if a[c][c].abs() < 1e-300 {
            return Err(Error::usage("degenerate regression (parameters not distinct)"));
        }
        for r in 0..k {
            if r != c {
                let m = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= m * a[c][j];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    let ssr = (0..y.len())
        .map(|n| {
            let fit: f64 = (0..k).map(|i| coef[i] * cols[i][n]).sum();
            (y[n] - fit).powi(2)
        })
        .sum();
    Ok((coef, ssr))
}

fn in_window(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<((f64, f64), Vec<(f64, f64)>)> {
    let t_max = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let window = window.unwrap_or((t_max / 10.0, t_max));
    if !(window.0 < window.1) {
        return Err(Error::usage(format!("empty fit window {window:?}")));
    }
    let pts = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1 && t > 0.0)
        .collect();
    Ok((window, pts))
}

/// Points where `|value|` is a local maximum.
fn local_maxima(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    (1..pts.len().saturating_sub(1))
        .filter(|&i| {
            let a = pts[i].1.abs();
            a >= pts[i - 1].1.abs() && a > pts[i + 1].1.abs()
        })
        .map(|i| pts[i])
        .collect()
}

fn prepare(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<((f64, f64), Vec<(f64, f64)>, bool)> {
    let (window, mut pts) = in_window(series, window)?;
    let sign_change = pts.windows(2).any(|w| w[0].1 * w[1].1 < 0.0);
    if sign_change {
        pts = local_maxima(&pts);
    }
    pts.retain(|p| p.1.abs() > NOISE_FLOOR);
    if pts.len() < MIN_POINTS {
        return Err(Error::usage(format!(
            "{} usable points in window {window:?}, need {MIN_POINTS} above {NOISE_FLOOR:e}",
            pts.len()
        )));
    }
    Ok((window, pts, sign_change))
}

/// Least-squares slope of `ln|value|` against `ln t`; `exponent = −slope`.
/// With no window, the last decade of the series is used.
pub fn fit_exponent(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<FitResult> {
    fit(series, window, false)
}

/// As [`fit_exponent`] with an extra `ln ln t` column, so that
/// `|value| ≈ C t^{−p} (ln t)^k`.
pub fn fit_exponent_with_log(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<FitResult> {
    fit(series, window, true)
}

fn fit(series: &[(f64, f64)], window: Option<(f64, f64)>, with_log: bool) -> Result<FitResult> {
    let (window, pts, envelope) = prepare(series, window)?;
    let n = pts.len();
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let mut cols = vec![vec![1.0; n], x.clone()];
    if with_log {
        if pts.iter().any(|p| p.0 <= 1.0) {
            return Err(Error::usage("log-factor fit needs t > 1"));
        }
        cols.push(x.iter().map(|v| v.ln()).collect());
    }
    let (coef, ssr) = least_squares(&cols, &y)?;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mean_x).powi(2)).sum();
    let dof = n.saturating_sub(cols.len()).max(1) as f64;
    let stderr = (ssr / dof / sxx).sqrt();
    Ok(FitResult {
        exponent: -coef[1],
        stderr,
        r_squared,
        window,
        n_points: n,
        envelope,
        log_power: with_log.then(|| coef[2]),
    })
}

/// `p(t) = −Δln|value| / Δln t` by centred differences; one point shorter
/// at each end.
pub fn local_exponent(series: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if series.len() < 3 {
        return Err(Error::usage("local exponent needs at least 3 points"));
    }
    if let Some(p) = series.iter().find(|p| p.1.abs() <= NOISE_FLOOR || p.0 <= 0.0) {
        return Err(Error::usage(format!("point {p:?} at or below the noise floor")));
    }
    Ok(series
        .windows(3)
        .map(|w| {
            let dl = w[2].1.abs().ln() - w[0].1.abs().ln();
            let dt = w[2].0.ln() - w[0].0.ln();
            (w[1].0, -dl / dt)
        })
        .collect())
}

/// Median of the last quarter of the local exponents.
pub fn asymptotic_exponent(series: &[(f64, f64)]) -> Result<f64> {
    let loc = local_exponent(series)?;
    let mut tail: Vec<f64> = loc[loc.len() * 3 / 4..].iter().map(|p| p.1).collect();
    tail.sort_by(f64::total_cmp);
    Ok(tail[tail.len() / 2])
}

pub fn read_series_csv<R: std::io::Read>(input: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::usage(format!("bad CSV row {:?}", rec)))
        };
        // A leading non-numeric row is a column header.
        if k == 0 && rec.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
            continue;
        }
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}
