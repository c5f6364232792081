use crate::{Error, Result};
use rayon::prelude::*;

/// Coarse-to-fine search over a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub coarse_step_mhz: f64,
    /// Overrides the coarse step with this many intervals per axis.
    pub coarse_divisions: Option<usize>,
    pub fine_step_mhz: f64,
    /// Ratio between successive refinement steps.
    pub refine_factor: f64,
    /// Points on each side of the current best at every refinement level.
    pub refine_radius: usize,
    /// Distance kept from the open ends of each axis.
    pub edge_margin_mhz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            coarse_step_mhz: 2.0,
            coarse_divisions: None,
            fine_step_mhz: 0.025,
            refine_factor: 4.0,
            refine_radius: 2,
            edge_margin_mhz: 1.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coarse_step_mhz > 0.0) || !(self.fine_step_mhz > 0.0) {
            return Err(Error::invalid("grid steps must be positive"));
        }
        if self.fine_step_mhz > self.coarse_step_mhz && self.coarse_divisions.is_none() {
            return Err(Error::invalid("fine step is larger than the coarse step"));
        }
        if !(self.refine_factor > 1.0) || self.refine_radius == 0 {
            return Err(Error::invalid("refinement needs a factor above 1 and a radius of at least 1"));
        }
        if self.coarse_divisions == Some(0) || !(self.edge_margin_mhz >= 0.0) {
            return Err(Error::invalid("coarse divisions must be positive and the margin non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub point: [f64; 2],
    pub value: f64,
    pub coarse_point: [f64; 2],
    pub coarse_value: f64,
    pub evaluations: usize,
}

fn evaluate<F>(f: &F, points: &[[f64; 2]]) -> Result<Vec<f64>>
where
    F: Fn([f64; 2]) -> Result<f64> + Sync,
{
    points
        .par_iter()
        .map(|&p| {
            let v = f(p)?;
            if v.is_nan() {
                return Err(Error::NonFinite(format!("objective at ({}, {})", p[0], p[1])));
            }
            Ok(v)
        })
        .collect()
}

/// First index of the smallest value, so ties resolve the same way every run.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Minimizes `f` over the open rectangle `domain` (one `(low, high)` pair per axis).
///
/// A coarse grid is followed by local windows of `2 * radius + 1` points per
/// axis. Each level recentres its window until the best point stops moving,
/// then shrinks the step, finishing at the fine step.
pub fn grid_minimize<F>(f: &F, domain: [(f64, f64); 2], config: &GridConfig) -> Result<GridResult>
where
    F: Fn([f64; 2]) -> Result<f64> + Sync,
{
    config.validate()?;
    let bounds = domain.map(|(lo, hi)| (lo + config.edge_margin_mhz, hi - config.edge_margin_mhz));
    if bounds.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::invalid("search domain is empty after removing the edge margins"));
    }

    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let width = hi - lo;
        let n = match config.coarse_divisions {
            Some(d) => d,
            None => (width / config.coarse_step_mhz).floor() as usize,
        };
        if n == 0 {
            return vec![0.5 * (lo + hi)];
        }
        let step = match config.coarse_divisions {
            Some(d) => width / d as f64,
            None => config.coarse_step_mhz,
        };
        let offset = 0.5 * (width - n as f64 * step);
        (0..=n).map(|i| lo + offset + i as f64 * step).collect()
    };
    let (xs, ys) = (axis(bounds[0]), axis(bounds[1]));
    let coarse: Vec<[f64; 2]> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect();
    let values = evaluate(f, &coarse)?;
    let mut evaluations = coarse.len();
    let k = argmin(&values);
    let (coarse_point, coarse_value) = (coarse[k], values[k]);
    let (mut point, mut value) = (coarse_point, coarse_value);

    let mut step = match config.coarse_divisions {
        Some(d) => (bounds[0].1 - bounds[0].0).max(bounds[1].1 - bounds[1].0) / d as f64,
        None => config.coarse_step_mhz,
    };
    let r = config.refine_radius as i64;
    let clip = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    while step > config.fine_step_mhz {
        step = (step / config.refine_factor).max(config.fine_step_mhz);
        // Bounded number of recentring moves per level.
        for _ in 0..64 {
            let mut window = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
            for i in -r..=r {
                for j in -r..=r {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let p = [
                        clip(point[0] + i as f64 * step, bounds[0]),
                        clip(point[1] + j as f64 * step, bounds[1]),
                    ];
                    if p != point && !window.contains(&p) {
                        window.push(p);
                    }
                }
            }
            if window.is_empty() {
                break;
            }
            let values = evaluate(f, &window)?;
            evaluations += window.len();
            let k = argmin(&values);
            if values[k] < value {
                point = window[k];
                value = values[k];
            } else {
                break;
            }
        }
    }
    Ok(GridResult { point, value, coarse_point, coarse_value, evaluations })
}
