use super::{check_problem, unchecked_sum_rate, LogBase};
use crate::channel::GainMatrix;
use crate::{Error, Result};

/// Largest grid the exhaustive search will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    /// Weighted sum rate (log2) after initialization and after each iteration.
    pub trace: Vec<f64>,
    /// False when `max_iter` ran out before the objective settled.
    pub converged: bool,
}

impl PowerSolution {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial point")
    }
}

fn check_pmax(p_max: f64) -> Result<()> {
    if p_max > 0.0 && p_max.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("maximum power must be positive, got {p_max}")))
    }
}

/// Scalar WMMSE starting from full power. The returned powers are the best
/// iterate seen.
pub fn wmmse_power(
    gains: &GainMatrix,
    weights: &[f64],
    p_max: f64,
    noise: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PowerSolution> {
    check_problem(gains, weights, noise)?;
    check_pmax(p_max)?;
    let n = gains.n();
    let v_max = p_max.sqrt();
    let sqrt_g: Vec<f64> = (0..n).map(|i| gains.direct(i).sqrt()).collect();
    let mut v = vec![v_max; n];
    let mut u = vec![0.0; n];
    let mut wt = vec![0.0; n];

    let rate = |v: &[f64]| {
        let p: Vec<f64> = v.iter().map(|x| x * x).collect();
        (unchecked_sum_rate(gains, &p, weights, noise, LogBase::Two), p)
    };
    let (mut prev, mut best_p) = rate(&v);
    let mut best = prev;
    let mut trace = vec![prev];
    let mut converged = false;
    for _ in 0..max_iter {
        for i in 0..n {
            let total = noise + (0..n).map(|j| gains.get(j, i) * v[j] * v[j]).sum::<f64>();
            u[i] = sqrt_g[i] * v[i] / total;
            // 1 - u g^{1/2} v = interference / total, so this is 1 + SINR.
            wt[i] = 1.0 / (1.0 - u[i] * sqrt_g[i] * v[i]);
        }
        for i in 0..n {
            let denom: f64 = (0..n).map(|j| weights[j] * wt[j] * u[j] * u[j] * gains.get(i, j)).sum();
            v[i] = if denom > 0.0 {
                (weights[i] * wt[i] * u[i] * sqrt_g[i] / denom).clamp(0.0, v_max)
            } else {
                v_max
            };
        }
        let (obj, p) = rate(&v);
        trace.push(obj);
        if obj > best {
            best = obj;
            best_p = p;
        }
        if (obj - prev).abs() < tol {
            converged = true;
            break;
        }
        prev = obj;
    }
    Ok(PowerSolution {
        powers: best_p,
        trace,
        converged,
    })
}

/// Quadratic-transform fractional programming from full power.
pub fn fp_power(
    gains: &GainMatrix,
    weights: &[f64],
    p_max: f64,
    noise: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PowerSolution> {
    check_problem(gains, weights, noise)?;
    check_pmax(p_max)?;
    let n = gains.n();
    let mut p = vec![p_max; n];
    let mut y = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    let mut prev = unchecked_sum_rate(gains, &p, weights, noise, LogBase::Two);
    let mut best = prev;
    let mut best_p = p.clone();
    let mut trace = vec![prev];
    let mut converged = false;
    for _ in 0..max_iter {
        for i in 0..n {
            let interference = gains.interference(i, &p, noise);
            let total = interference + gains.direct(i) * p[i];
            gamma[i] = gains.direct(i) * p[i] / interference;
            y[i] = (weights[i] * (1.0 + gamma[i]) * gains.direct(i) * p[i]).sqrt() / total;
        }
        for i in 0..n {
            let denom: f64 = (0..n).map(|j| y[j] * y[j] * gains.get(i, j)).sum();
            p[i] = if denom > 0.0 {
                (y[i] * y[i] * weights[i] * (1.0 + gamma[i]) * gains.direct(i) / (denom * denom)).min(p_max)
            } else {
                p_max
            };
        }
        let obj = unchecked_sum_rate(gains, &p, weights, noise, LogBase::Two);
        trace.push(obj);
        if obj > best {
            best = obj;
            best_p.clone_from(&p);
        }
        if (obj - prev).abs() < tol {
            converged = true;
            break;
        }
        prev = obj;
    }
    Ok(PowerSolution {
        powers: best_p,
        trace,
        converged,
    })
}

/// Exhaustive search over `grid^N`. Candidates are visited in lexicographic
/// order of grid indices and only a strictly better objective replaces the
/// incumbent.
pub fn brute_force_power(
    gains: &GainMatrix,
    weights: &[f64],
    noise: f64,
    grid: &[f64],
) -> Result<(Vec<f64>, f64)> {
    check_problem(gains, weights, noise)?;
    if grid.is_empty() || grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::config("power grid must be nonempty, finite and nonnegative"));
    }
    let n = gains.n();
    let size = (grid.len() as u64)
        .checked_pow(n as u32)
        .filter(|&s| s <= BRUTE_FORCE_LIMIT)
        .ok_or_else(|| Error::Size(format!("{}^{} grid points exceed {}", grid.len(), n, BRUTE_FORCE_LIMIT)))?;
    let mut idx = vec![0usize; n];
    let mut p = vec![grid[0]; n];
    let mut best_p = p.clone();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..size {
        let obj = unchecked_sum_rate(gains, &p, weights, noise, LogBase::Two);
        if obj > best {
            best = obj;
            best_p.clone_from(&p);
        }
        for pos in (0..n).rev() {
            idx[pos] += 1;
            if idx[pos] < grid.len() {
                p[pos] = grid[idx[pos]];
                break;
            }
            idx[pos] = 0;
            p[pos] = grid[0];
        }
    }
    Ok((best_p, best))
}
