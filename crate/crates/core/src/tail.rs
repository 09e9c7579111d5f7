//! Empirical survival functions and tail-slope estimation.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Survival window used when none is given: `[1e-3, 1e-1]`.
pub const DEFAULT_WINDOW: Window = Window { hi: 1e-1, lo: 1e-3 };

/// Fits over fewer points than this are flagged unreliable.
pub const MIN_RELIABLE_POINTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub hi: f64,
    pub lo: f64,
}

impl Window {
    pub fn new(hi: f64, lo: f64) -> Result<Self> {
        if !(lo > 0.0 && hi <= 1.0 && hi > lo) {
            return Err(Error::param("window", "need 0 < lo < hi <= 1"));
        }
        Ok(Self { hi, lo })
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && p <= self.hi
    }
}

impl Default for Window {
    fn default() -> Self {
        DEFAULT_WINDOW
    }
}

/// Distinct sample values and `P[X > x]` at each, zero-survival point dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfPoints {
    pub x: Vec<f64>,
    pub survival: Vec<f64>,
    pub sample_count: usize,
}

impl CcdfPoints {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Builds points from an already tabulated curve, e.g. an analytic CCDF.
    pub fn from_curve(x: Vec<f64>, survival: Vec<f64>) -> Result<Self> {
        if x.len() != survival.len() {
            return Err(Error::param("survival", "length differs from x"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("x", "must be strictly increasing"));
        }
        if survival.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::param("survival", "must lie in (0, 1]"));
        }
        Ok(Self {
            x,
            survival,
            sample_count: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: Window,
    pub points_used: usize,
    pub reliable: bool,
}

pub fn empirical_ccdf(samples: &[f64]) -> Result<CcdfPoints> {
    if samples.len() < 2 {
        return Err(Error::Degenerate("need at least two samples"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::param("samples", "contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len();
    let mut x = Vec::new();
    let mut survival = Vec::new();
    let mut i = 0;
    while i < total {
        let v = sorted[i];
        let mut j = i;
        while j < total && sorted[j] == v {
            j += 1;
        }
        let above = total - j;
        if above > 0 {
            x.push(v);
            survival.push(above as f64 / total as f64);
        }
        i = j;
    }
    if x.is_empty() {
        return Err(Error::Degenerate("all samples are equal"));
    }
    Ok(CcdfPoints {
        x,
        survival,
        sample_count: total,
    })
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(&a, &b)| (libm::log(a), libm::log(b)))
        .collect();
    let n = pts.len();
    if n < 2 {
        return Err(Error::Degenerate("fewer than two positive points to fit"));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = pts
            .iter()
            .map(|p| {
                let r = p.1 - intercept - slope * p.0;
                r * r
            })
            .sum();
        libm::sqrt(rss / (nf - 2.0) / sxx)
    } else {
        0.0
    };
    Ok((slope, intercept, stderr))
}

/// Log-log OLS slope of the survival curve over points inside `window`.
pub fn fit_loglog_slope(points: &CcdfPoints, window: Window) -> Result<TailFit> {
    Window::new(window.hi, window.lo)?;
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .x
        .iter()
        .zip(&points.survival)
        .filter(|(_, &p)| window.contains(p))
        .map(|(&a, &b)| (a, b))
        .unzip();
    let (slope, intercept, stderr) = fit_loglog(&x, &y)?;
    let used = x.iter().filter(|&&a| a > 0.0).count();
    Ok(TailFit {
        slope,
        intercept,
        stderr,
        window,
        points_used: used,
        reliable: used >= MIN_RELIABLE_POINTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEstimate {
    /// Negative tail index, comparable to a log-log slope.
    pub estimate: f64,
    pub stderr: f64,
    pub k: usize,
    /// The index estimate keeps growing as `k` shrinks, as it does for
    /// exponential-type tails that have no finite power-law index.
    pub light_tail_suspected: bool,
}

fn hill_index(desc: &[f64], k: usize) -> Result<f64> {
    let threshold = desc[k];
    if threshold <= 0.0 {
        return Err(Error::Degenerate(
            "Hill threshold order statistic is not positive",
        ));
    }
    let mean_log_spacing = desc[..k]
        .iter()
        .map(|&x| libm::log(x / threshold))
        .sum::<f64>()
        / k as f64;
    if mean_log_spacing <= 0.0 {
        return Err(Error::Degenerate("top order statistics are all equal"));
    }
    Ok(1.0 / mean_log_spacing)
}

/// Hill estimator over the top `k` order statistics.
pub fn hill_estimator(samples: &[f64], k: usize) -> Result<HillEstimate> {
    if k < 2 || k >= samples.len() {
        return Err(Error::param("k", "need 2 <= k < sample count"));
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let index = hill_index(&desc, k)?;
    let light_tail_suspected = if k >= 32 {
        let coarse = hill_index(&desc, k / 8)?;
        coarse > 1.25 * index
    } else {
        false
    };
    Ok(HillEstimate {
        estimate: -index,
        stderr: index / libm::sqrt(k as f64),
        k,
        light_tail_suspected,
    })
}
