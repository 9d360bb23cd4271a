//! Scaling-law fits for MI series.
//!
//! Power laws are fitted in log-log space, optionally after subtracting a
//! constant offset `C` that is profiled out by a one-dimensional search.
//! Logarithmic fits are ordinary least squares of `y` on `ln x`. Fits can be
//! compared by their squared residuals in `y` space.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("y[{index}] = {value} is not positive")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("all y values are equal; the offset is not identifiable")]
    DegenerateSeries,
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("capacity constant must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("series CSV line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FitError>;

/// Paired observations `(x, y)` with optional standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    x: Vec<f64>,
    y: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

impl ScalingSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(FitError::InvalidSeries(format!(
                "{} x values but {} y values",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FitError::InvalidSeries(format!("x[{i}] = {} is not a positive real", x[i])));
        }
        if let Some(i) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FitError::InvalidSeries(format!(
                "x is not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(FitError::InvalidSeries(format!("y[{i}] is not finite")));
        }
        Ok(Self { x, y, stderr: None })
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Result<Self> {
        if stderr.len() != self.x.len() {
            return Err(FitError::InvalidSeries("stderr length differs from x".into()));
        }
        if let Some(i) = stderr.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(FitError::InvalidSeries(format!("stderr[{i}] is not a non-negative real")));
        }
        self.stderr = Some(stderr);
        Ok(self)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Keeps points with `lo ≤ x ≤ hi`; either bound may be omitted.
    pub fn filter_range(&self, lo: Option<f64>, hi: Option<f64>) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| lo.is_none_or(|l| self.x[i] >= l) && hi.is_none_or(|h| self.x[i] <= h))
            .collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            x: pick(&self.x),
            y: pick(&self.y),
            stderr: self.stderr.as_deref().map(pick),
        }
    }

    /// Reads `x,y[,stderr]` rows. Blank lines, `#` comments and a leading
    /// non-numeric header row are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut se = Vec::new();
        let mut first = true;
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = t.split(',').map(str::trim).collect();
            if first {
                first = false;
                if cols[0].parse::<f64>().is_err() {
                    continue;
                }
            }
            let parse = |c: &str| {
                c.parse::<f64>().map_err(|e| FitError::Parse {
                    line: i + 1,
                    message: format!("{c:?}: {e}"),
                })
            };
            if !(2..=3).contains(&cols.len()) {
                return Err(FitError::Parse {
                    line: i + 1,
                    message: format!("expected 2 or 3 columns, got {}", cols.len()),
                });
            }
            x.push(parse(cols[0])?);
            y.push(parse(cols[1])?);
            if let Some(c) = cols.get(2) {
                se.push(parse(c)?);
            }
        }
        let s = Self::new(x, y)?;
        match se.len() {
            0 => Ok(s),
            n if n == s.len() => s.with_stderr(se),
            _ => Err(FitError::InvalidSeries("stderr column present on some rows only".into())),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(out, "# {h}")?;
        }
        match &self.stderr {
            Some(se) => {
                writeln!(out, "x,y,stderr")?;
                for i in 0..self.len() {
                    writeln!(out, "{},{},{}", self.x[i], self.y[i], se[i])?;
                }
            }
            None => {
                writeln!(out, "x,y")?;
                for i in 0..self.len() {
                    writeln!(out, "{},{}", self.x[i], self.y[i])?;
                }
            }
        }
        Ok(())
    }
}

/// Fit options. Weighting uses `1/stderr²` (propagated to `y²/stderr²` in
/// log space) and is off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FitOptions {
    pub weighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerLawModel {
    Powerlaw,
    PowerlawOffset,
}

/// `y ≈ A·x^exponent + C`. The exponent is signed: positive for growth,
/// negative for decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub model: PowerLawModel,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub exponent: f64,
    #[serde(rename = "C")]
    pub offset: f64,
    /// Sum of squared log-space residuals.
    pub objective: f64,
    /// Coefficient of determination in log space.
    pub r2: f64,
}

/// `y ≈ a·ln x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    /// Sum of squared residuals in y space.
    pub objective: f64,
    pub r2: f64,
}

struct Ols {
    intercept: f64,
    slope: f64,
    sse: f64,
    r2: f64,
}

fn ols(u: &[f64], v: &[f64], w: Option<&[f64]>) -> Ols {
    let wt = |i: usize| w.map_or(1.0, |w| w[i]);
    let n = u.len();
    let sw: f64 = (0..n).map(wt).sum();
    let mu = (0..n).map(|i| wt(i) * u[i]).sum::<f64>() / sw;
    let mv = (0..n).map(|i| wt(i) * v[i]).sum::<f64>() / sw;
    let mut suu = 0.0;
    let mut suv = 0.0;
    let mut svv = 0.0;
    for i in 0..n {
        let (du, dv) = (u[i] - mu, v[i] - mv);
        suu += wt(i) * du * du;
        suv += wt(i) * du * dv;
        svv += wt(i) * dv * dv;
    }
    let slope = if suu > 0.0 { suv / suu } else { 0.0 };
    let intercept = mv - slope * mu;
    let sse: f64 = (0..n)
        .map(|i| {
            let r = v[i] - intercept - slope * u[i];
            wt(i) * r * r
        })
        .sum();
    let r2 = if svv > 0.0 { 1.0 - sse / svv } else { 1.0 };
    Ols {
        intercept,
        slope,
        sse,
        r2,
    }
}

fn need(series: &ScalingSeries, min: usize) -> Result<()> {
    if series.len() < min {
        return Err(FitError::TooFewPoints {
            min,
            got: series.len(),
        });
    }
    Ok(())
}

fn weights(series: &ScalingSeries, opts: &FitOptions, shift: Option<f64>) -> Result<Option<Vec<f64>>> {
    if !opts.weighted {
        return Ok(None);
    }
    let se = series
        .stderr()
        .ok_or_else(|| FitError::InvalidSeries("weighted fit requested without stderr".into()))?;
    if se.contains(&0.0) {
        return Err(FitError::InvalidSeries("weighted fit needs positive stderr".into()));
    }
    Ok(Some(
        se.iter()
            .zip(series.y())
            .map(|(s, y)| match shift {
                Some(c) => ((y - c) / s).powi(2),
                None => 1.0 / (s * s),
            })
            .collect(),
    ))
}

fn check_positive(y: &[f64]) -> Result<()> {
    match y.iter().position(|&v| v <= 0.0) {
        Some(index) => Err(FitError::NonPositiveValue {
            index,
            value: y[index],
        }),
        None => Ok(()),
    }
}

/// OLS of `ln y` on `ln x` with `C = 0`.
pub fn fit_powerlaw_loglog(series: &ScalingSeries) -> Result<PowerLawFit> {
    fit_powerlaw_loglog_with(series, &FitOptions::default())
}

pub fn fit_powerlaw_loglog_with(series: &ScalingSeries, opts: &FitOptions) -> Result<PowerLawFit> {
    need(series, 3)?;
    check_positive(series.y())?;
    let w = weights(series, opts, Some(0.0))?;
    let lx: Vec<f64> = series.x().iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = series.y().iter().map(|v| v.ln()).collect();
    let o = ols(&lx, &ly, w.as_deref());
    Ok(PowerLawFit {
        model: PowerLawModel::Powerlaw,
        amplitude: o.intercept.exp(),
        exponent: o.slope,
        offset: 0.0,
        objective: o.sse,
        r2: o.r2,
    })
}

const OFFSET_GRID: usize = 64;
const GOLDEN_RTOL: f64 = 1e-10;

struct Profile<'a> {
    lx: Vec<f64>,
    y: &'a [f64],
    series: &'a ScalingSeries,
    opts: &'a FitOptions,
}

impl Profile<'_> {
    fn at(&self, c: f64) -> Ols {
        let ly: Vec<f64> = self.y.iter().map(|v| (v - c).ln()).collect();
        let w = weights(self.series, self.opts, Some(c)).ok().flatten();
        ols(&self.lx, &ly, w.as_deref())
    }

    fn objective(&self, c: f64) -> f64 {
        self.at(c).sse
    }
}

/// Offset fit: minimizes `Σ (ln(y − C) − ln A − e·ln x)²` over `(A, e, C)`
/// with `0 ≤ C < min(y)`.
pub fn fit_powerlaw_offset(series: &ScalingSeries) -> Result<PowerLawFit> {
    fit_powerlaw_offset_traced(series, &FitOptions::default()).map(|(f, _)| f)
}

/// Offset fit that also returns the best objective after each search
/// iteration. The first entry is the grid pre-scan minimum.
pub fn fit_powerlaw_offset_traced(series: &ScalingSeries, opts: &FitOptions) -> Result<(PowerLawFit, Vec<f64>)> {
    need(series, 4)?;
    check_positive(series.y())?;
    let y = series.y();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    if y.iter().all(|&v| v == y[0]) {
        return Err(FitError::DegenerateSeries);
    }
    weights(series, opts, None)?;
    let p = Profile {
        lx: series.x().iter().map(|v| v.ln()).collect(),
        y,
        series,
        opts,
    };
    let cmax = ymin * (1.0 - 1e-9);

    let grid: Vec<f64> = (0..OFFSET_GRID)
        .map(|k| cmax * k as f64 / (OFFSET_GRID - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&c| p.objective(c)).collect();
    let mut k_best = 0;
    for k in 1..OFFSET_GRID {
        if vals[k] < vals[k_best] {
            k_best = k;
        }
    }
    let (mut best_c, mut best_f) = (grid[k_best], vals[k_best]);
    let mut trace = vec![best_f];

    let mut a = grid[k_best.saturating_sub(1)];
    let mut b = grid[(k_best + 1).min(OFFSET_GRID - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c1 = b - inv_phi * (b - a);
    let mut c2 = a + inv_phi * (b - a);
    let mut f1 = p.objective(c1);
    let mut f2 = p.objective(c2);
    let tol = GOLDEN_RTOL * cmax.max(f64::MIN_POSITIVE);
    while b - a > tol {
        if f1 <= f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - inv_phi * (b - a);
            f1 = p.objective(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + inv_phi * (b - a);
            f2 = p.objective(c2);
        }
        for (c, f) in [(c1, f1), (c2, f2)] {
            if f < best_f || (f == best_f && c < best_c) {
                best_c = c;
                best_f = f;
            }
        }
        trace.push(best_f);
    }

    let o = p.at(best_c);
    Ok((
        PowerLawFit {
            model: PowerLawModel::PowerlawOffset,
            amplitude: o.intercept.exp(),
            exponent: o.slope,
            offset: best_c,
            objective: o.sse,
            r2: o.r2,
        },
        trace,
    ))
}

/// OLS of `y` on `ln x`.
pub fn fit_log(series: &ScalingSeries) -> Result<LogFit> {
    fit_log_with(series, &FitOptions::default())
}

pub fn fit_log_with(series: &ScalingSeries, opts: &FitOptions) -> Result<LogFit> {
    need(series, 3)?;
    let w = weights(series, opts, None)?;
    let lx: Vec<f64> = series.x().iter().map(|v| v.ln()).collect();
    let o = ols(&lx, series.y(), w.as_deref());
    Ok(LogFit {
        a: o.slope,
        b: o.intercept,
        objective: o.sse,
        r2: o.r2,
    })
}

/// `A·x^exponent + C`.
pub fn extrapolate(fit: &PowerLawFit, x: f64) -> f64 {
    fit.amplitude * x.powf(fit.exponent) + fit.offset
}

impl LogFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.ln() + self.b
    }
}

/// History-state dimension implied by `I ≤ capacity·dim(z) + log M` at
/// length `length`, floored at zero.
pub fn l2m_required_dim(fit: &PowerLawFit, length: f64, capacity: f64, log_m: Option<f64>) -> Result<f64> {
    if !(capacity > 0.0) {
        return Err(FitError::NonPositiveCapacity(capacity));
    }
    Ok(((extrapolate(fit, length) - log_m.unwrap_or(0.0)) / capacity).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Powerlaw,
    Logarithmic,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub selected: Selection,
    pub powerlaw_residual: f64,
    pub log_residual: f64,
    pub powerlaw: PowerLawFit,
    pub log: LogFit,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

const TIE_RTOL: f64 = 1e-9;
const TIE_ATOL: f64 = 1e-24;

/// Compares the plain power law and the logarithmic model by their sums of
/// squared residuals in y space.
pub fn model_compare(series: &ScalingSeries) -> Result<ModelComparison> {
    let pl = fit_powerlaw_loglog(series)?;
    let lg = fit_log(series)?;
    let resid = |f: &dyn Fn(f64) -> f64| -> f64 {
        series
            .x()
            .iter()
            .zip(series.y())
            .map(|(&x, &y)| (y - f(x)).powi(2))
            .sum()
    };
    let rp = resid(&|x| extrapolate(&pl, x));
    let rl = resid(&|x| lg.eval(x));
    let mut warnings = Vec::new();
    if series.y().iter().all(|&v| v == series.y()[0]) {
        let w = FitError::DegenerateSeries.to_string();
        log::warn!("{w}");
        warnings.push(w);
    }
    let selected = if (rp - rl).abs() <= TIE_ATOL + TIE_RTOL * rp.max(rl) {
        Selection::Tie
    } else if rp < rl {
        Selection::Powerlaw
    } else {
        Selection::Logarithmic
    };
    Ok(ModelComparison {
        selected,
        powerlaw_residual: rp,
        log_residual: rl,
        powerlaw: pl,
        log: lg,
        warnings,
    })
}
