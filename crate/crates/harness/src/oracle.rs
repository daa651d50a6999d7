//! Classical baselines run standalone: WMMSE, fractional programming and
//! brute force on random Rayleigh instances.

use wra_core::learn_opt::PowerProblem;
use wra_core::opt::{brute_force_power, fp_power, oracle_csv, wmmse_power, OracleRecord};
use wra_core::rng::derive_seed;

use crate::config::OracleSection;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub records: Vec<OracleRecord>,
    /// `instance_id,method,objective`.
    pub csv: String,
    pub stats: Vec<(String, f64)>,
}

/// Instance `i` draws its gains from `derive_seed(seed, i)`.
pub fn run_oracle(s: &OracleSection, seed: u64) -> Result<OracleReport> {
    let problem = PowerProblem {
        n_links: s.n_links,
        p_max: s.p_max,
        noise: s.noise,
        gains: s.gains.model(),
    };
    problem.validate()?;
    let weights = vec![1.0; s.n_links];
    let grid: Vec<f64> = (0..s.grid_levels)
        .map(|l| s.p_max * l as f64 / (s.grid_levels - 1) as f64)
        .collect();
    let mut records = Vec::new();
    let (mut wmmse_sum, mut fp_sum, mut brute_sum) = (0.0, 0.0, 0.0);
    let (mut monotone, mut near_optimal) = (0usize, 0usize);
    for i in 0..s.instances {
        let g = problem.sample(derive_seed(seed, i as u64))?;
        let w = wmmse_power(&g, &weights, s.p_max, s.noise, s.tol, s.max_iters)?;
        let f = fp_power(&g, &weights, s.p_max, s.noise, s.tol, s.max_iters)?;
        monotone += usize::from(w.trace.windows(2).all(|p| p[1] >= p[0] - 1e-9));
        wmmse_sum += w.objective();
        fp_sum += f.objective();
        records.push(OracleRecord {
            instance_id: i,
            method: "wmmse".into(),
            objective: w.objective(),
        });
        records.push(OracleRecord {
            instance_id: i,
            method: "fp".into(),
            objective: f.objective(),
        });
        if !grid.is_empty() {
            let (_, best) = brute_force_power(&g, &weights, s.noise, &grid)?;
            brute_sum += best;
            near_optimal += usize::from(w.objective() >= s.quality * best);
            records.push(OracleRecord {
                instance_id: i,
                method: "brute_force".into(),
                objective: best,
            });
        }
    }
    let n = s.instances.max(1) as f64;
    let mut stats = vec![
        ("wmmse_mean".to_string(), wmmse_sum / n),
        ("fp_mean".to_string(), fp_sum / n),
        ("wmmse_monotone_fraction".to_string(), monotone as f64 / n),
    ];
    if !grid.is_empty() {
        stats.push(("brute_force_mean".into(), brute_sum / n));
        stats.push(("wmmse_near_optimal_fraction".into(), near_optimal as f64 / n));
    }
    Ok(OracleReport {
        csv: oracle_csv(&records),
        records,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_consistent() {
        let s = OracleSection {
            n_links: 2,
            instances: 5,
            grid_levels: 11,
            ..Default::default()
        };
        let r = run_oracle(&s, 4).unwrap();
        assert_eq!(r.records.len(), 15);
        assert!(r.csv.starts_with("instance_id,method,objective\n"));
        let get = |k: &str| r.stats.iter().find(|(n, _)| n == k).unwrap().1;
        assert_eq!(get("wmmse_monotone_fraction"), 1.0);
        assert!(get("brute_force_mean") > 0.0);
        assert_eq!(run_oracle(&s, 4).unwrap(), r);
    }

    #[test]
    fn zero_levels_skip_brute_force() {
        let s = OracleSection {
            instances: 3,
            grid_levels: 0,
            ..Default::default()
        };
        let r = run_oracle(&s, 1).unwrap();
        assert!(r.records.iter().all(|x| x.method != "brute_force"));
        assert_eq!(r.stats.len(), 3);
    }
}
