//! Random-restart coordinate ascent over products of unit spheres.
//!
//! Each site carries a direction `n = (sin t cos p, sin t sin p, cos t)`. One
//! sweep visits every `(t, p)` coordinate in turn and line-searches it: a coarse
//! periodic grid brackets the best cell, then golden-section search refines it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Spherical angles `(theta, phi)` of one site.
pub type Angles = (f64, f64);

pub fn direction((theta, phi): Angles) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// Angles of a unit vector; the pole maps to `phi = 0`.
pub fn angles_of(n: [f64; 3]) -> Angles {
    let theta = n[2].clamp(-1.0, 1.0).acos();
    let phi = if n[0] == 0.0 && n[1] == 0.0 {
        0.0
    } else {
        n[1].atan2(n[0])
    };
    (theta, phi)
}

/// A real objective over one unit direction per site.
pub trait SphereObjective: Sync {
    fn sites(&self) -> usize;

    fn value(&self, dirs: &[[f64; 3]]) -> f64;

    /// The objective as a function of `site`'s direction with the others held
    /// fixed. Implementors with cheap partial evaluations should override this.
    fn restrict<'a>(&'a self, dirs: &[[f64; 3]], site: usize) -> Box<dyn Fn([f64; 3]) -> f64 + 'a> {
        let fixed = dirs.to_vec();
        Box::new(move |d| {
            let mut all = fixed.clone();
            all[site] = d;
            self.value(&all)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Golden-section bracket width at which a line search stops.
    pub angle_tol: f64,
    /// A sweep gaining less than this ends the run as converged.
    pub value_tol: f64,
    pub max_sweeps: usize,
    /// Points in the periodic bracketing grid.
    pub grid: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 0,
            angle_tol: 1e-9,
            value_tol: 1e-13,
            max_sweeps: 500,
            grid: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub value: f64,
    pub angles: Vec<Angles>,
    /// Restart that produced the best value.
    pub best_restart: usize,
    pub restarts: usize,
    pub evaluations: usize,
    /// Whether every restart stopped on the value tolerance rather than the sweep cap.
    pub converged: bool,
}

impl AscentResult {
    pub fn directions(&self) -> Vec<[f64; 3]> {
        self.angles.iter().copied().map(direction).collect()
    }
}

struct RestartOutcome {
    value: f64,
    angles: Vec<Angles>,
    evaluations: usize,
    converged: bool,
}

/// Maximizes `objective`. The first restarts begin at `warm_starts`; the rest
/// start from uniformly random directions drawn from a per-restart stream, so
/// the result does not depend on thread scheduling.
pub fn maximize<O: SphereObjective>(
    objective: &O,
    config: &AscentConfig,
    warm_starts: &[Vec<Angles>],
) -> AscentResult {
    let restarts = config.restarts.max(1);
    let sites = objective.sites();
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = match warm_starts.get(r) {
                Some(s) if s.len() == sites => s.clone(),
                _ => random_start(sites, restart_seed(config.seed, r)),
            };
            ascend(objective, config, start)
        })
        .collect();

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = i;
        }
    }
    AscentResult {
        value: outcomes[best].value,
        angles: outcomes[best].angles.clone(),
        best_restart: best,
        restarts,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        converged: outcomes.iter().all(|o| o.converged),
    }
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed ^ (restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn random_start(sites: usize, seed: u64) -> Vec<Angles> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sites)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            ((1.0 - 2.0 * u).acos(), 2.0 * PI * v)
        })
        .collect()
}

fn ascend<O: SphereObjective>(
    objective: &O,
    config: &AscentConfig,
    mut angles: Vec<Angles>,
) -> RestartOutcome {
    let sites = angles.len();
    let mut dirs: Vec<[f64; 3]> = angles.iter().copied().map(direction).collect();
    let mut value = objective.value(&dirs);
    let mut evaluations = 1;
    let mut converged = false;

    for _ in 0..config.max_sweeps {
        let start_value = value;
        for site in 0..sites {
            let f = objective.restrict(&dirs, site);
            for coord in 0..2 {
                let current = angles[site];
                let at = |t: f64| {
                    if coord == 0 {
                        (t, current.1)
                    } else {
                        (current.0, t)
                    }
                };
                let g = |t: f64| f(direction(at(t)));
                let t0 = if coord == 0 { current.0 } else { current.1 };
                let (t_best, g_best, evals) = line_search(&g, t0, value, config);
                evaluations += evals;
                if g_best > value {
                    value = g_best;
                    angles[site] = at(t_best);
                    dirs[site] = direction(angles[site]);
                }
            }
        }
        if value - start_value <= config.value_tol {
            converged = true;
            break;
        }
    }
    RestartOutcome {
        value,
        angles,
        evaluations,
        converged,
    }
}

/// Maximizes a 2pi-periodic function of one angle starting from `t0` (where it
/// equals `g0`). Returns the best point, its value and the evaluation count.
fn line_search(
    g: &dyn Fn(f64) -> f64,
    t0: f64,
    g0: f64,
    config: &AscentConfig,
) -> (f64, f64, usize) {
    let grid = config.grid.max(3);
    let h = 2.0 * PI / grid as f64;
    let mut best_t = t0;
    let mut best_g = g0;
    let mut evals = 0;
    for j in 1..grid {
        let t = t0 + h * j as f64;
        let v = g(t);
        evals += 1;
        if v > best_g {
            best_t = t;
            best_g = v;
        }
    }

    // Golden-section refinement on the bracket around the best grid point.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best_t - h, best_t + h);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    evals += 2;
    while (b - a).abs() > config.angle_tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
        evals += 1;
    }
    for (t, v) in [(c, gc), (d, gd)] {
        if v > best_g {
            best_t = t;
            best_g = v;
        }
    }
    (best_t.rem_euclid(2.0 * PI), best_g, evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `sum_i n_i . target_i`, maximized by aligning every site with its target.
    struct Alignment(Vec<[f64; 3]>);

    impl SphereObjective for Alignment {
        fn sites(&self) -> usize {
            self.0.len()
        }
        fn value(&self, dirs: &[[f64; 3]]) -> f64 {
            dirs.iter()
                .zip(&self.0)
                .map(|(d, t)| d[0] * t[0] + d[1] * t[1] + d[2] * t[2])
                .sum()
        }
    }

    #[test]
    fn aligns_with_targets() {
        let s = 1.0 / 3f64.sqrt();
        let obj = Alignment(vec![[0.0, 0.0, 1.0], [s, -s, s], [-1.0, 0.0, 0.0]]);
        let res = maximize(
            &obj,
            &AscentConfig {
                restarts: 4,
                ..Default::default()
            },
            &[],
        );
        assert!((res.value - 3.0).abs() < 1e-12, "{}", res.value);
        assert!(res.converged);
    }

    #[test]
    fn deterministic_across_runs() {
        let obj = Alignment(vec![[0.6, 0.0, 0.8], [0.0, 1.0, 0.0]]);
        let cfg = AscentConfig {
            restarts: 8,
            seed: 42,
            ..Default::default()
        };
        let a = maximize(&obj, &cfg, &[]);
        let b = maximize(&obj, &cfg, &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn warm_start_is_kept_when_optimal() {
        let obj = Alignment(vec![[0.0, 0.0, 1.0]]);
        let res = maximize(
            &obj,
            &AscentConfig {
                restarts: 1,
                ..Default::default()
            },
            &[vec![(0.0, 0.0)]],
        );
        assert_eq!(res.value, 1.0);
        assert_eq!(res.angles, vec![(0.0, 0.0)]);
    }

    #[test]
    fn angles_roundtrip() {
        for n in [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.6, 0.0, -0.8],
        ] {
            let back = direction(angles_of(n));
            for i in 0..3 {
                assert!((back[i] - n[i]).abs() < 1e-15);
            }
        }
    }
}
