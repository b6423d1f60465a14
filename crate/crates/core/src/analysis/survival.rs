//! Kaplan–Meier time-to-bug estimate with right-censoring at the campaign horizon.
//!
//! The survival product is carried as an exact fraction while it fits in
//! `u128`, so an uncensored sample reproduces the empirical survival function
//! bit for bit. Confidence bands use Greenwood's variance on the log–log scale.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub time_s: f64,
    pub prob: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Starts at `(0, 1)`, one point per distinct event time, then the horizon.
    pub points: Vec<SurvivalPoint>,
    pub n_trials: u32,
    pub n_events: u32,
    pub horizon_s: f64,
    /// Smallest event time with S(t) <= 0.5.
    pub median_s: Option<f64>,
}

impl SurvivalCurve {
    /// Survival probability just after time `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time_s <= t)
            .last()
            .map(|p| p.prob)
            .unwrap_or(1.0)
    }

    pub fn hit_rate(&self) -> f64 {
        if self.n_trials == 0 {
            0.0
        } else {
            self.n_events as f64 / self.n_trials as f64
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Survival product, exact while it fits.
#[derive(Debug, Clone, Copy)]
enum Product {
    Exact(u128, u128),
    Approx(f64),
}

impl Product {
    fn times(self, num: u64, den: u64) -> Product {
        match self {
            Product::Exact(a, b) => {
                let (n, d) = (num as u128, den as u128);
                let g1 = gcd(a, d).max(1);
                let g2 = gcd(n, b).max(1);
                match ((a / g1).checked_mul(n / g2), (b / g2).checked_mul(d / g1)) {
                    (Some(x), Some(y)) => {
                        let g = gcd(x, y).max(1);
                        Product::Exact(x / g, y / g)
                    }
                    _ => Product::Approx(a as f64 / b as f64 * (num as f64 / den as f64)),
                }
            }
            Product::Approx(v) => Product::Approx(v * (num as f64 / den as f64)),
        }
    }

    fn value(self) -> f64 {
        match self {
            Product::Exact(a, b) => a as f64 / b as f64,
            Product::Approx(v) => v,
        }
    }

    fn at_most_half(self) -> bool {
        match self {
            Product::Exact(a, b) => 2 * a <= b,
            Product::Approx(v) => v <= 0.5,
        }
    }
}

fn log_log_ci(s: f64, greenwood: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 1.0);
    }
    let ln_s = s.ln();
    let se = greenwood.sqrt() / ln_s.abs();
    let c = Z95 * se;
    let low = s.powf(c.exp());
    let high = s.powf((-c).exp());
    (low.min(s), high.max(s))
}

/// One entry per trial: the event time, or `None` when censored at `horizon_s`.
/// Event times beyond the horizon count as censored.
pub fn kaplan_meier(times: &[Option<f64>], horizon_s: f64) -> SurvivalCurve {
    let mut events: Vec<f64> = times
        .iter()
        .flatten()
        .copied()
        .filter(|t| *t <= horizon_s)
        .collect();
    events.sort_by(f64::total_cmp);
    let n = times.len() as u64;

    let mut points = vec![SurvivalPoint {
        time_s: 0.0,
        prob: 1.0,
        ci_low: 1.0,
        ci_high: 1.0,
    }];
    let mut s = Product::Exact(1, 1);
    let mut greenwood = 0.0f64;
    let mut at_risk = n;
    let mut median = None;
    let mut i = 0;
    while i < events.len() {
        let t = events[i];
        let d = events[i..].iter().take_while(|x| **x == t).count() as u64;
        s = s.times(at_risk - d, at_risk);
        if at_risk > d {
            greenwood += d as f64 / (at_risk as f64 * (at_risk - d) as f64);
        }
        let prob = s.value();
        let (ci_low, ci_high) = log_log_ci(prob, greenwood);
        if t == 0.0 {
            points[0] = SurvivalPoint { time_s: t, prob, ci_low, ci_high };
        } else {
            points.push(SurvivalPoint { time_s: t, prob, ci_low, ci_high });
        }
        if median.is_none() && s.at_most_half() {
            median = Some(t);
        }
        at_risk -= d;
        i += d as usize;
    }
    let last = *points.last().unwrap();
    if last.time_s < horizon_s {
        points.push(SurvivalPoint {
            time_s: horizon_s,
            ..last
        });
    }
    SurvivalCurve {
        points,
        n_trials: n as u32,
        n_events: events.len() as u32,
        horizon_s,
        median_s: median,
    }
}

/// `HH:MM`, rounded down to the minute.
pub fn format_hhmm(seconds: f64) -> String {
    let total_min = (seconds.max(0.0) / 60.0).floor() as u64;
    format!("{:02}:{:02}", total_min / 60, total_min % 60)
}

/// Median as `HH:MM`, or `--` when fewer than half the trials saw the event.
pub fn format_median(median_s: Option<f64>) -> String {
    median_s.map(format_hhmm).unwrap_or_else(|| "--".to_string())
}

pub fn format_percent(rate: f64) -> String {
    format!("{}%", (rate * 100.0).round() as i64)
}
