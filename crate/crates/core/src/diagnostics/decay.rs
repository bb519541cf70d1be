//! Numerical checker for the decay lemma variants used by the long-time
//! theory: given sampled functions on a uniform grid it tests each variant's
//! hypotheses (integrability trends, boundedness, the differential
//! inequality with the smallest admissible constant) and, separately, the
//! decay conclusion. A failed hypothesis is reported as such; it is never
//! evidence against the lemma.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::check_uniform_times;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LemmaVariant {
    /// `f in L1`, `f' in Linf`  =>  `f -> 0`.
    I,
    /// `g in L1`, `f' + g <= C (f^2 + 1)`, `f <= C g`  =>  `f` bounded, `f -> 0`.
    II,
    /// `h` bounded with `h -> 0`, `f' + g <= h (f + 1)`, `f <= C g`,
    /// `f(0) <= C`  =>  `f` bounded, `f -> 0`.
    III,
}

#[derive(Clone, Copy, Debug)]
pub struct LemmaOptions {
    /// Tail/head increment ratio below which a cumulative integral counts as
    /// having an integrable trend.
    pub integrable_ratio: f64,
    /// Fraction of the window treated as the tail.
    pub tail_fraction: f64,
    /// Tail mean of `f` must fall below this fraction of its max for the
    /// conclusion to hold.
    pub conclusion_frac: f64,
    /// Cap above which a fitted constant no longer counts as finite.
    pub constant_cap: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self {
            integrable_ratio: 0.5,
            tail_fraction: 0.25,
            conclusion_frac: 0.05,
            constant_cap: 1e6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub statistic: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaVerdict {
    pub variant: LemmaVariant,
    pub hypotheses: Vec<HypothesisCheck>,
    pub hypotheses_hold: bool,
    pub conclusion_holds: bool,
    pub conclusion_statistic: f64,
    /// Smallest admissible constant found for the variant's inequalities.
    pub fitted_c: f64,
}

fn derivative(times: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let dt = times[1] - times[0];
    let mut d = vec![0.0; n];
    for k in 0..n {
        d[k] = if k == 0 {
            (f[1] - f[0]) / dt
        } else if k == n - 1 {
            (f[n - 1] - f[n - 2]) / dt
        } else {
            (f[k + 1] - f[k - 1]) / (2.0 * dt)
        };
    }
    d
}

fn cumulative_trapezoid(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; f.len()];
    for k in 1..f.len() {
        acc[k] = acc[k - 1] + 0.5 * (times[k] - times[k - 1]) * (f[k] + f[k - 1]);
    }
    acc
}

/// Tail/head increment ratio of the cumulative integral: near zero for
/// integrable samples, near one for non-decaying ones.
fn integrable_trend(times: &[f64], f: &[f64]) -> f64 {
    let integral = cumulative_trapezoid(times, f);
    let half = f.len() / 2;
    let head = integral[half];
    let tail = integral[f.len() - 1] - integral[half];
    if head > 0.0 {
        tail / head
    } else if tail > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn tail_mean(times: &[f64], f: &[f64], tail_fraction: f64) -> f64 {
    let n = f.len();
    let from = n - ((n as f64 * tail_fraction).ceil() as usize).clamp(1, n);
    let _ = times;
    f[from..].iter().sum::<f64>() / (n - from) as f64
}

/// Check one variant's hypotheses and conclusion on sampled data.
pub fn decay_lemma_check(
    times: &[f64],
    f: &[f64],
    g: Option<&[f64]>,
    h: Option<&[f64]>,
    variant: LemmaVariant,
    opts: &LemmaOptions,
) -> Result<LemmaVerdict> {
    check_uniform_times(times)?;
    if f.len() != times.len() {
        return Err(Error::InvalidInput("f must match the time grid".into()));
    }
    let need = |s: Option<&[f64]>, name: &str| -> Result<Vec<f64>> {
        match s {
            Some(v) if v.len() == times.len() => Ok(v.to_vec()),
            Some(_) => Err(Error::InvalidInput(format!("{name} must match the time grid"))),
            None => Err(Error::InvalidInput(format!(
                "variant {variant:?} requires samples of {name}"
            ))),
        }
    };

    let fdot = derivative(times, f);
    let fmax = f.iter().cloned().fold(0.0f64, f64::max);
    let mut hyps: Vec<HypothesisCheck> = Vec::new();
    let fitted_c: f64;

    match variant {
        LemmaVariant::I => {
            let trend = integrable_trend(times, f);
            hyps.push(HypothesisCheck {
                name: "f integrable (tail/head increment ratio)".into(),
                statistic: trend,
                holds: trend < opts.integrable_ratio,
            });
            let fp = fdot.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            hyps.push(HypothesisCheck {
                name: "f' bounded (max |f'|)".into(),
                statistic: fp,
                holds: fp.is_finite() && fp <= opts.constant_cap,
            });
            fitted_c = fp;
        }
        LemmaVariant::II => {
            let g = need(g, "g")?;
            let trend = integrable_trend(times, &g);
            hyps.push(HypothesisCheck {
                name: "g integrable (tail/head increment ratio)".into(),
                statistic: trend,
                holds: trend < opts.integrable_ratio,
            });
            let mut c1 = 0.0f64;
            for k in 0..f.len() {
                c1 = c1.max((fdot[k] + g[k]) / (f[k] * f[k] + 1.0));
            }
            c1 = c1.max(0.0);
            let mut c2 = 0.0f64;
            for k in 0..f.len() {
                if g[k] > 1e-300 {
                    c2 = c2.max(f[k] / g[k]);
                } else if f[k] > 0.0 {
                    c2 = f64::INFINITY;
                }
            }
            fitted_c = c1.max(c2);
            hyps.push(HypothesisCheck {
                name: "f' + g <= C (f^2 + 1) and f <= C g (fitted C)".into(),
                statistic: fitted_c,
                holds: fitted_c.is_finite() && fitted_c <= opts.constant_cap,
            });
        }
        LemmaVariant::III => {
            let g = need(g, "g")?;
            let h = need(h, "h")?;
            let hmax = h.iter().cloned().fold(0.0f64, f64::max);
            hyps.push(HypothesisCheck {
                name: "h bounded (max h)".into(),
                statistic: hmax,
                holds: hmax.is_finite() && hmax <= opts.constant_cap,
            });
            let htail = tail_mean(times, &h, opts.tail_fraction);
            let hstat = if hmax > 0.0 { htail / hmax } else { 0.0 };
            hyps.push(HypothesisCheck {
                name: "h -> 0 (tail mean / max)".into(),
                statistic: hstat,
                holds: hstat <= opts.conclusion_frac,
            });
            // The differential inequality carries no free constant; report
            // the worst multiplier and require it to stay within 5% slack.
            let mut mult = 0.0f64;
            for k in 0..f.len() {
                let den = h[k] * (f[k] + 1.0);
                if den > 1e-300 {
                    mult = mult.max((fdot[k] + g[k]) / den);
                } else if fdot[k] + g[k] > 1e-12 {
                    mult = f64::INFINITY;
                }
            }
            hyps.push(HypothesisCheck {
                name: "f' + g <= h (f + 1) (worst multiplier)".into(),
                statistic: mult,
                holds: mult <= 1.05,
            });
            let mut c2 = 0.0f64;
            for k in 0..f.len() {
                if g[k] > 1e-300 {
                    c2 = c2.max(f[k] / g[k]);
                } else if f[k] > 0.0 {
                    c2 = f64::INFINITY;
                }
            }
            c2 = c2.max(f[0]);
            fitted_c = c2;
            hyps.push(HypothesisCheck {
                name: "f <= C g and f(0) <= C (fitted C)".into(),
                statistic: c2,
                holds: c2.is_finite() && c2 <= opts.constant_cap,
            });
        }
    }

    let hypotheses_hold = hyps.iter().all(|h| h.holds);
    let tmean = tail_mean(times, f, opts.tail_fraction);
    let conclusion_statistic = if fmax > 0.0 { tmean / fmax } else { 0.0 };
    let conclusion_holds = conclusion_statistic <= opts.conclusion_frac;

    Ok(LemmaVerdict {
        variant,
        hypotheses: hyps,
        hypotheses_hold,
        conclusion_holds,
        conclusion_statistic,
        fitted_c,
    })
}
