//! Dung Beetle Optimizer (Xue & Shen, 2023), minimize-only, box-bounded.
//!
//! The population is split into four roles that update in this order each
//! iteration:
//!
//! 1. ball-rolling beetles move away from the current worst position, or
//!    "dance" along a random tangent direction when they hit an obstacle;
//! 2. brood balls are placed inside a region around the iteration's best
//!    position that shrinks linearly with the iteration count;
//! 3. foraging (small) beetles search a similar shrinking region around the
//!    global best;
//! 4. thieves steal around the global best.
//!
//! Each beetle remembers its best position, and the global best is the best
//! of those, so the recorded history never increases. Candidates are clamped
//! into the box. The random draws for an iteration are taken before any of
//! its fitness evaluations, so a batch evaluator may run them in any order or
//! in parallel without changing the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::Seed;

const OBSTACLE_PROB: f64 = 0.1;
const DEFLECTION: f64 = 0.1;
const LIGHT: f64 = 0.3;
const STEAL: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SearchError<E> {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error(transparent)]
    Fitness(E),
}

fn default_population() -> usize {
    50
}
fn default_iterations() -> usize {
    40
}
fn default_bounds() -> (f64, f64) {
    (-40.0, 40.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Box applied to every dimension.
    #[serde(default = "default_bounds")]
    pub bounds: (f64, f64),
    #[serde(default)]
    pub seed: Seed,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            population: default_population(),
            iterations: default_iterations(),
            bounds: default_bounds(),
            seed: Seed(0),
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population < 4 {
            return Err(format!("population {} < 4", self.population));
        }
        if self.iterations < 1 {
            return Err("iterations must be >= 1".into());
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("bounds ({lo}, {hi}) are not an interval"));
        }
        Ok(())
    }

    /// Fitness evaluations a search with this config performs.
    pub fn evaluations(&self) -> usize {
        self.population * (self.iterations + 1)
    }

    /// Sizes of the rolling, brood, foraging and stealing groups
    /// (6:6:7:11 of the population).
    pub fn role_sizes(&self) -> [usize; 4] {
        let n = self.population;
        let part = |num: usize| ((n * num) as f64 / 30.0).round().max(1.0) as usize;
        let rolling = part(6);
        let brood = part(6);
        let small = part(7).min(n - rolling - brood - 1);
        [rolling, brood, small, n - rolling - brood - small]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_point: Vec<f64>,
    pub best_fitness: f64,
    /// Global best after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Random inputs of one iteration, drawn up front.
struct IterationDraws {
    /// per rolling beetle: (obstacle?, direction sign, dance angle in degrees)
    rolling: Vec<(bool, f64, u32)>,
    brood: Vec<(Vec<f64>, Vec<f64>)>,
    small: Vec<(f64, Vec<f64>)>,
    thief: Vec<Vec<f64>>,
}

fn draw_iteration(rng: &mut ChaCha8Rng, roles: [usize; 4], dim: usize) -> IterationDraws {
    let uniform_vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen::<f64>()).collect::<Vec<_>>();
    let rolling = (0..roles[0])
        .map(|_| {
            let obstacle = rng.gen::<f64>() < OBSTACLE_PROB;
            let sign = if rng.gen::<f64>() > 0.1 { 1.0 } else { -1.0 };
            let angle = rng.gen_range(1..=180u32);
            (obstacle, sign, angle)
        })
        .collect();
    let brood = (0..roles[1]).map(|_| (uniform_vec(rng), uniform_vec(rng))).collect();
    let small = (0..roles[2])
        .map(|_| (rng.sample::<f64, _>(StandardNormal), uniform_vec(rng)))
        .collect();
    let thief = (0..roles[3])
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    IterationDraws {
        rolling,
        brood,
        small,
        thief,
    }
}

fn clamp_into(point: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, l), h) in point.iter_mut().zip(lo).zip(hi) {
        *x = if x.is_nan() { *l } else { x.clamp(*l, *h) };
    }
}

/// `[X (1 - R), X (1 + R)]` intersected with the box, per dimension.
fn shrink_region(centre: &[f64], r: f64, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    centre
        .iter()
        .map(|&c| {
            let (a, b) = (c * (1.0 - r), c * (1.0 + r));
            (a.min(b).clamp(lo, hi), a.max(b).clamp(lo, hi))
        })
        .unzip()
}

fn fitness_key(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len())
        .min_by(|&a, &b| fitness_key(v[a]).total_cmp(&fitness_key(v[b])))
        .unwrap()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len())
        .max_by(|&a, &b| fitness_key(v[a]).total_cmp(&fitness_key(v[b])).then(b.cmp(&a)))
        .unwrap()
}

/// Minimizes `fitness` over `[lo, hi]^dim`, one evaluation at a time.
pub fn optimize<F, E>(mut fitness: F, dim: usize, config: &OptimizerConfig) -> Result<SearchResult, SearchError<E>>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    optimize_batched(
        |points: &[Vec<f64>]| points.iter().map(|p| fitness(p)).collect(),
        dim,
        config,
    )
}

/// Like [`optimize`], but hands each phase's candidates to `evaluate` as one
/// batch. The batch results must be in input order.
pub fn optimize_batched<F, E>(
    mut evaluate: F,
    dim: usize,
    config: &OptimizerConfig,
) -> Result<SearchResult, SearchError<E>>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>, E>,
{
    config.validate().map_err(SearchError::Config)?;
    if dim == 0 {
        return Err(SearchError::Config("dimension must be >= 1".into()));
    }
    let (lo, hi) = config.bounds;
    let lo_v = vec![lo; dim];
    let hi_v = vec![hi; dim];
    let n = config.population;
    let roles = config.role_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.0);
    let mut evaluations = 0;

    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(lo..=hi)).collect())
        .collect();
    let mut fit = evaluate(&x).map_err(SearchError::Fitness)?;
    evaluations += n;
    let mut personal = x.clone();
    let mut personal_fit = fit.clone();
    let mut previous = personal.clone();
    let g = argmin(&personal_fit);
    let mut best = personal[g].clone();
    let mut best_fit = fitness_key(personal_fit[g]);
    let mut history = Vec::with_capacity(config.iterations);

    let rolling_end = roles[0];
    let brood_end = rolling_end + roles[1];
    let small_end = brood_end + roles[2];

    for t in 1..=config.iterations {
        let draws = draw_iteration(&mut rng, roles, dim);
        let worst = x[argmax(&fit)].clone();

        // ball rolling / dancing
        for (i, &(obstacle, sign, angle)) in draws.rolling.iter().enumerate() {
            let p = &personal[i];
            let prev = &previous[i];
            let mut cand: Vec<f64> = if !obstacle {
                (0..dim)
                    .map(|d| p[d] + LIGHT * (p[d] - worst[d]).abs() + sign * DEFLECTION * prev[d])
                    .collect()
            } else if angle == 90 || angle == 180 {
                p.clone()
            } else {
                let tan = (angle as f64).to_radians().tan();
                (0..dim).map(|d| p[d] + tan * (p[d] - prev[d]).abs()).collect()
            };
            clamp_into(&mut cand, &lo_v, &hi_v);
            x[i] = cand;
        }
        let rolled = evaluate(&x[..rolling_end]).map_err(SearchError::Fitness)?;
        evaluations += rolling_end;
        fit[..rolling_end].copy_from_slice(&rolled);

        let local_best = x[argmin(&fit)].clone();
        let r = 1.0 - t as f64 / config.iterations as f64;
        let (spawn_lo, spawn_hi) = shrink_region(&local_best, r, lo, hi);
        let (forage_lo, forage_hi) = shrink_region(&best, r, lo, hi);

        for (k, (b1, b2)) in draws.brood.iter().enumerate() {
            let i = rolling_end + k;
            let p = &personal[i];
            let mut cand: Vec<f64> = (0..dim)
                .map(|d| local_best[d] + b1[d] * (p[d] - spawn_lo[d]) + b2[d] * (p[d] - spawn_hi[d]))
                .collect();
            clamp_into(&mut cand, &spawn_lo, &spawn_hi);
            x[i] = cand;
        }
        for (k, (c1, c2)) in draws.small.iter().enumerate() {
            let i = brood_end + k;
            let p = &personal[i];
            let mut cand: Vec<f64> = (0..dim)
                .map(|d| p[d] + c1 * (p[d] - forage_lo[d]) + c2[d] * (p[d] - forage_hi[d]))
                .collect();
            clamp_into(&mut cand, &lo_v, &hi_v);
            x[i] = cand;
        }
        for (k, gvec) in draws.thief.iter().enumerate() {
            let i = small_end + k;
            let p = &personal[i];
            let mut cand: Vec<f64> = (0..dim)
                .map(|d| best[d] + STEAL * gvec[d] * ((p[d] - local_best[d]).abs() + (p[d] - best[d]).abs()))
                .collect();
            clamp_into(&mut cand, &lo_v, &hi_v);
            x[i] = cand;
        }
        let rest = evaluate(&x[rolling_end..]).map_err(SearchError::Fitness)?;
        evaluations += n - rolling_end;
        fit[rolling_end..].copy_from_slice(&rest);

        previous = personal.clone();
        for i in 0..n {
            if fitness_key(fit[i]) < fitness_key(personal_fit[i]) {
                personal_fit[i] = fit[i];
                personal[i] = x[i].clone();
            }
            if fitness_key(personal_fit[i]) < best_fit {
                best_fit = fitness_key(personal_fit[i]);
                best = personal[i].clone();
            }
        }
        history.push(best_fit);
    }

    Ok(SearchResult {
        best_point: best,
        best_fitness: best_fit,
        history,
        evaluations,
    })
}
