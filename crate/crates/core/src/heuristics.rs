//! Warm-startable tabu search, multistart drivers and a descent baseline.
//!
//! Costs are in minimisation form (`QuboInstance::min_energy`). One
//! iteration is one accepted flip; iteration 0 is the starting string.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::SampleSet;
use crate::problem::QuboInstance;
use crate::{bits, Error, Result};

/// Cost comparisons treat values within this distance as equal.
pub const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Iteration budget per restart (`T_total`).
    pub max_iters: u64,
    /// Inclusive tenure range; `None` uses `[ceil(n/10), ceil(n/10) + 10]`.
    pub tenure: Option<(usize, usize)>,
    /// Stop a restart after this many iterations without a new best.
    pub stall_limit: Option<u64>,
    /// Stop a restart once its best cost reaches this value.
    pub target: Option<f64>,
    /// Wall-clock limit in seconds for [`timed_multistart`].
    pub time_limit: Option<f64>,
    pub seed: u64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            max_iters: 500,
            tenure: None,
            stall_limit: None,
            target: None,
            time_limit: None,
            seed: 0,
        }
    }
}

/// Time limit used by the resource-pool experiments.
pub const DEFAULT_TIME_LIMIT: f64 = 0.1;

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if let Some((lo, hi)) = self.tenure {
            if lo == 0 || hi < lo {
                return Err(Error::param("tenure range must satisfy 1 <= lo <= hi"));
            }
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return Err(Error::param("time limit must be non-negative"));
            }
        }
        Ok(())
    }

    fn tenure_range(&self, n: usize) -> (usize, usize) {
        self.tenure.unwrap_or_else(|| {
            let lo = n.div_ceil(10).max(1);
            (lo, lo + 10)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawPolicy {
    Cycle,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    Random,
    Qaoa,
    FilteredQaoa,
}

impl PoolSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolSource::Random => "random",
            PoolSource::Qaoa => "qaoa",
            PoolSource::FilteredQaoa => "filtered-qaoa",
        }
    }
}

/// Starting strings for a multistart run.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStartPool {
    n: usize,
    strings: Vec<Vec<u8>>,
    policy: DrawPolicy,
    source: PoolSource,
    seed: u64,
}

impl WarmStartPool {
    pub fn new(n: usize, strings: Vec<Vec<u8>>, policy: DrawPolicy, source: PoolSource, seed: u64) -> Result<Self> {
        if strings.is_empty() {
            return Err(Error::param("warm-start pool is empty"));
        }
        if let Some(s) = strings.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
        Ok(WarmStartPool {
            n,
            strings,
            policy,
            source,
            seed,
        })
    }

    /// `count` uniformly random strings.
    pub fn random(n: usize, count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strings = (0..count).map(|_| (0..n).map(|_| rng.gen_range(0..2u8)).collect()).collect();
        Self::new(n, strings, DrawPolicy::Cycle, PoolSource::Random, seed)
    }

    /// Every occurrence in `s`, shuffled with `seed` so that cycling
    /// through a prefix is an unbiased draw.
    pub fn from_samples(s: &SampleSet, source: PoolSource, seed: u64) -> Result<Self> {
        let mut strings = s.expand();
        strings.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(s.n(), strings, DrawPolicy::Cycle, source, seed)
    }

    pub fn with_policy(mut self, policy: DrawPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn source(&self) -> PoolSource {
        self.source
    }

    pub fn strings(&self) -> &[Vec<u8>] {
        &self.strings
    }

    /// Start for restart `r`.
    pub fn draw(&self, r: usize) -> &[u8] {
        match self.policy {
            DrawPolicy::Cycle => &self.strings[r % self.strings.len()],
            DrawPolicy::Sample => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                &self.strings[rng.gen_range(0..self.strings.len())]
            }
        }
    }
}

/// A new best-so-far cost inside one restart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub iter: u64,
    pub cost: f64,
    /// Seconds since the restart began.
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub start_hash: u64,
    pub start_cost: f64,
    pub best_cost: f64,
    pub iters_to_best: u64,
    pub iterations: u64,
    /// Starts with iteration 0; costs strictly decrease.
    pub improvements: Vec<Improvement>,
    pub wall_time_s: f64,
    /// Seconds from the start of the timed run to this restart.
    #[serde(default)]
    pub started_at_s: f64,
}

impl RestartRecord {
    /// First iteration whose best-so-far is within tolerance of `target`.
    pub fn hit_iter(&self, target: f64) -> Option<u64> {
        self.improvements
            .iter()
            .find(|i| i.cost <= target + COST_TOL)
            .map(|i| i.iter)
    }

    pub fn hit_time(&self, target: f64) -> Option<f64> {
        self.improvements
            .iter()
            .find(|i| i.cost <= target + COST_TOL)
            .map(|i| i.time_s)
    }

    /// Best-so-far cost after `t` iterations.
    pub fn best_at(&self, t: u64) -> f64 {
        self.improvements
            .iter()
            .take_while(|i| i.iter <= t)
            .last()
            .map_or(self.start_cost, |i| i.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub n: usize,
    pub max_iters: u64,
    pub restarts: Vec<RestartRecord>,
    /// Known optimum in minimisation form.
    pub optimum: Option<f64>,
    #[serde(default)]
    pub source: Option<PoolSource>,
}

impl RunTrace {
    pub fn best(&self) -> Option<&RestartRecord> {
        self.restarts
            .iter()
            .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost))
    }

    /// Lines `restart,iter,best_cost,time_s`, one per improvement.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("restart,iter,best_cost,time_s\n");
        for (r, rec) in self.restarts.iter().enumerate() {
            for i in &rec.improvements {
                out.push_str(&format!("{r},{},{},{}\n", i.iter, i.cost, i.time_s));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }
}

/// Incrementally maintained flip gains of a minimisation instance.
pub(crate) struct FlipState<'a> {
    q: &'a QuboInstance,
    pub x: Vec<u8>,
    pub cost: f64,
    /// `delta[i]`: change in cost from flipping bit `i`.
    pub delta: Vec<f64>,
}

impl<'a> FlipState<'a> {
    pub fn new(q: &'a QuboInstance, x: &[u8]) -> Self {
        let delta = (0..q.n()).map(|i| q.flip_delta(x, i)).collect();
        FlipState {
            q,
            x: x.to_vec(),
            cost: q.energy(x),
            delta,
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.cost += self.delta[i];
        let step = if self.x[i] == 0 { 1.0 } else { -1.0 };
        self.x[i] ^= 1;
        self.delta[i] = -self.delta[i];
        for &(j, w) in self.q.neighbors(i) {
            let sign = if self.x[j] == 0 { 1.0 } else { -1.0 };
            self.delta[j] += sign * w * step;
        }
    }
}

fn check_start(q: &QuboInstance, start: &[u8]) -> Result<()> {
    if start.len() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: start.len(),
        });
    }
    if start.iter().any(|&b| b > 1) {
        return Err(Error::param("start string must contain only 0 and 1"));
    }
    Ok(())
}

/// Result of a single search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<u8>,
    pub cost: f64,
    pub record: RestartRecord,
}

fn tabu_run(q_min: &QuboInstance, start: &[u8], cfg: &HeuristicConfig, seed: u64, deadline: Option<Instant>) -> SearchResult {
    let begun = Instant::now();
    let n = q_min.n();
    let (t_lo, t_hi) = cfg.tenure_range(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = FlipState::new(q_min, start);
    let mut best_x = st.x.clone();
    let mut best = st.cost;
    let mut improvements = vec![Improvement {
        iter: 0,
        cost: best,
        time_s: 0.0,
    }];
    let mut tabu_until = vec![0u64; n];
    let mut last_improve = 0u64;
    let mut iter = 0u64;
    let reached = |c: f64| cfg.target.is_some_and(|t| c <= t + COST_TOL);
    let mut ties = Vec::with_capacity(n);
    while iter < cfg.max_iters && n > 0 && !reached(best) {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        if cfg.stall_limit.is_some_and(|s| iter - last_improve >= s) {
            break;
        }
        iter += 1;
        let mut pick = f64::INFINITY;
        ties.clear();
        for i in 0..n {
            let d = st.delta[i];
            let allowed = tabu_until[i] < iter || st.cost + d < best - COST_TOL;
            if !allowed {
                continue;
            }
            if d < pick - 1e-12 {
                pick = d;
                ties.clear();
                ties.push(i);
            } else if d <= pick + 1e-12 {
                ties.push(i);
            }
        }
        let i = if ties.is_empty() {
            // Everything is tabu: take the oldest tabu entry.
            (0..n).min_by_key(|&i| (tabu_until[i], i)).expect("n > 0")
        } else {
            ties[rng.gen_range(0..ties.len())]
        };
        st.flip(i);
        tabu_until[i] = iter + rng.gen_range(t_lo..=t_hi) as u64;
        if st.cost < best - COST_TOL {
            best = st.cost;
            best_x.clone_from(&st.x);
            last_improve = iter;
            improvements.push(Improvement {
                iter,
                cost: best,
                time_s: begun.elapsed().as_secs_f64(),
            });
        }
    }
    SearchResult {
        record: RestartRecord {
            start_hash: bits::hash(start),
            start_cost: improvements[0].cost,
            best_cost: best,
            iters_to_best: last_improve,
            iterations: iter,
            improvements,
            wall_time_s: begun.elapsed().as_secs_f64(),
            started_at_s: 0.0,
        },
        x: best_x,
        cost: best,
    }
}

/// Tabu search from `start` with 1-flip moves. A flipped variable stays
/// tabu for a tenure drawn from the configured range unless flipping it
/// gives a new best (aspiration). Ties between equally good moves are
/// broken at random.
pub fn tabu_search(q: &QuboInstance, start: &[u8], cfg: &HeuristicConfig) -> Result<SearchResult> {
    cfg.validate()?;
    check_start(q, start)?;
    Ok(tabu_run(&q.to_minimization(), start, cfg, cfg.seed, None))
}

fn restart_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add((r as u64 + 1).wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// `restarts` independent tabu runs, restart `r` starting from
/// `pool.draw(r)`. Runs in parallel; the trace is ordered by restart.
pub fn multistart(q: &QuboInstance, pool: &WarmStartPool, restarts: usize, cfg: &HeuristicConfig) -> Result<RunTrace> {
    cfg.validate()?;
    if restarts == 0 {
        return Err(Error::param("need at least one restart"));
    }
    if pool.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: pool.n(),
        });
    }
    let q_min = q.to_minimization();
    let records = (0..restarts)
        .into_par_iter()
        .map(|r| tabu_run(&q_min, pool.draw(r), cfg, restart_seed(cfg.seed, r), None).record)
        .collect();
    Ok(RunTrace {
        n: q.n(),
        max_iters: cfg.max_iters,
        restarts: records,
        optimum: None,
        source: Some(pool.source()),
    })
}

/// Restarts from successive pool draws until `time_limit` seconds have
/// passed. The clock starts when this function is called, after the pool
/// exists. At least one (possibly partial) restart is always recorded.
pub fn timed_multistart(q: &QuboInstance, pool: &WarmStartPool, time_limit: f64, cfg: &HeuristicConfig) -> Result<RunTrace> {
    cfg.validate()?;
    if !(time_limit >= 0.0) {
        return Err(Error::param("time limit must be non-negative"));
    }
    if pool.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: pool.n(),
        });
    }
    let q_min = q.to_minimization();
    let clock = Instant::now();
    let deadline = clock + std::time::Duration::from_secs_f64(time_limit);
    let mut records = Vec::new();
    let mut r = 0;
    loop {
        let started_at = clock.elapsed().as_secs_f64();
        let mut rec = tabu_run(&q_min, pool.draw(r), cfg, restart_seed(cfg.seed, r), Some(deadline)).record;
        rec.started_at_s = started_at;
        records.push(rec);
        r += 1;
        if Instant::now() >= deadline {
            break;
        }
    }
    Ok(RunTrace {
        n: q.n(),
        max_iters: cfg.max_iters,
        restarts: records,
        optimum: None,
        source: Some(pool.source()),
    })
}

/// Best-improvement 1-flip descent until no flip lowers the cost.
pub fn local_search_baseline(q: &QuboInstance, start: &[u8], cfg: &HeuristicConfig) -> Result<SearchResult> {
    cfg.validate()?;
    check_start(q, start)?;
    let begun = Instant::now();
    let q_min = q.to_minimization();
    let mut st = FlipState::new(&q_min, start);
    let mut improvements = vec![Improvement {
        iter: 0,
        cost: st.cost,
        time_s: 0.0,
    }];
    let mut iter = 0;
    while iter < cfg.max_iters {
        let Some((i, d)) = st
            .delta
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if d >= -COST_TOL {
            break;
        }
        st.flip(i);
        iter += 1;
        improvements.push(Improvement {
            iter,
            cost: st.cost,
            time_s: begun.elapsed().as_secs_f64(),
        });
    }
    Ok(SearchResult {
        record: RestartRecord {
            start_hash: bits::hash(start),
            start_cost: improvements[0].cost,
            best_cost: st.cost,
            iters_to_best: iter,
            iterations: iter,
            improvements,
            wall_time_s: begun.elapsed().as_secs_f64(),
            started_at_s: 0.0,
        },
        cost: st.cost,
        x: st.x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{brute_force_spectrum, maxcut_to_qubo, Sense, WeightedGraph};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn random_qubo(n: usize, seed: u64) -> QuboInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lin = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut quad = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.5) {
                    quad.push((i, j, rng.gen_range(-3.0..3.0)));
                }
            }
        }
        QuboInstance::new(n, Sense::Minimize, lin, quad).unwrap()
    }

    fn optimum(q: &QuboInstance) -> (f64, Vec<u8>) {
        let spec = brute_force_spectrum(&q.to_minimization()).unwrap();
        let (k, v) = spec
            .values()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        (*v, bits::from_index(k as u64, q.n()))
    }

    #[test]
    fn optimum_start_is_recorded_at_iteration_zero() {
        let q = random_qubo(12, 3);
        let (opt, x) = optimum(&q);
        let r = tabu_search(&q, &x, &HeuristicConfig::default()).unwrap();
        assert!((r.cost - opt).abs() < 1e-9);
        assert_eq!(r.record.hit_iter(opt), Some(0));
    }

    #[test]
    fn tabu_finds_brute_force_optima() {
        let mut hits = 0;
        for seed in 0..100 {
            let n = 8 + (seed as usize % 9);
            let q = random_qubo(n, 1000 + seed);
            let (opt, _) = optimum(&q);
            let cfg = HeuristicConfig {
                max_iters: 2000,
                seed,
                ..Default::default()
            };
            let r = tabu_search(&q, &vec![0; n], &cfg).unwrap();
            assert!(r.cost >= opt - 1e-9);
            hits += ((r.cost - opt).abs() < 1e-9) as usize;
        }
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn tabu_is_deterministic() {
        let q = random_qubo(14, 9);
        let cfg = HeuristicConfig {
            seed: 4,
            ..Default::default()
        };
        let a = tabu_search(&q, &vec![1; 14], &cfg).unwrap();
        let b = tabu_search(&q, &vec![1; 14], &cfg).unwrap();
        assert_eq!(a.x, b.x);
        let strip = |r: &RestartRecord| r.improvements.iter().map(|i| (i.iter, i.cost)).collect::<Vec<_>>();
        assert_eq!(strip(&a.record), strip(&b.record));
    }

    #[test]
    fn maximisation_instances_are_minimised_in_min_form() {
        let g = WeightedGraph::unweighted(6, (0..5).map(|i| (i, i + 1))).unwrap();
        let q = maxcut_to_qubo(&g);
        let r = tabu_search(&q, &[0; 6], &HeuristicConfig::default()).unwrap();
        assert_eq!(r.cost, -5.0);
        assert_eq!(q.energy(&r.x), 5.0);
    }

    #[test]
    fn single_optimal_pool() {
        let q = random_qubo(10, 5);
        let (opt, x) = optimum(&q);
        let pool = WarmStartPool::new(10, vec![x], DrawPolicy::Cycle, PoolSource::Qaoa, 0).unwrap();
        let t = multistart(&q, &pool, 10, &HeuristicConfig::default()).unwrap();
        assert_eq!(t.restarts.len(), 10);
        assert!(t.restarts.iter().all(|r| r.hit_iter(opt) == Some(0)));
    }

    #[test]
    fn empty_pool_is_rejected() {
        assert!(WarmStartPool::new(3, vec![], DrawPolicy::Cycle, PoolSource::Random, 0).is_err());
        assert!(WarmStartPool::new(3, vec![vec![0, 1]], DrawPolicy::Cycle, PoolSource::Random, 0).is_err());
    }

    #[test]
    fn pools_cycle_and_sample_deterministically() {
        let pool = WarmStartPool::random(5, 3, 1).unwrap();
        assert_eq!(pool.draw(0), pool.draw(3));
        let s = pool.clone().with_policy(DrawPolicy::Sample);
        assert_eq!(s.draw(7), s.draw(7));
        let samples = SampleSet::new(2, [(0u64, 3u64), (3, 2)].into_iter().collect()).unwrap();
        let p = WarmStartPool::from_samples(&samples, PoolSource::Qaoa, 2).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.strings().iter().filter(|s| s == &&vec![1, 1]).count(), 2);
    }

    #[test]
    fn timed_runs() {
        let q = random_qubo(12, 8);
        let (opt, _) = optimum(&q);
        let pool = WarmStartPool::random(12, 50, 3).unwrap();
        let cfg = HeuristicConfig {
            target: Some(opt),
            ..Default::default()
        };
        let t = timed_multistart(&q, &pool, 0.05, &cfg).unwrap();
        assert!(t.restarts.iter().any(|r| r.hit_iter(opt).is_some()));
        assert!(t.restarts.iter().all(|r| r.wall_time_s >= 0.0));
        let z = timed_multistart(&q, &pool, 0.0, &cfg).unwrap();
        assert_eq!(z.restarts.len(), 1);
        assert_eq!(DEFAULT_TIME_LIMIT, 0.1);
    }

    #[test]
    fn local_search_examples() {
        for seed in 0..20 {
            let q = random_qubo(10, seed);
            let (opt, _) = optimum(&q);
            let start: Vec<u8> = bits::from_index(seed * 37 % 1024, 10);
            let r = local_search_baseline(&q, &start, &HeuristicConfig::default()).unwrap();
            assert!(r.cost <= q.min_energy(&start) + 1e-12);
            assert!(r.cost >= opt - 1e-9);
            for i in 0..10 {
                let mut y = r.x.clone();
                y[i] ^= 1;
                assert!(q.min_energy(&y) >= r.cost - 1e-9);
            }
            let again = local_search_baseline(&q, &r.x, &HeuristicConfig::default()).unwrap();
            assert_eq!(again.x, r.x);
        }
    }

    proptest! {
        #[test]
        fn incremental_cost_matches_recomputation(seed in 0u64..10_000, flips in proptest::collection::vec(0usize..9, 1..60)) {
            let q = random_qubo(9, seed);
            let mut st = FlipState::new(&q, &[0; 9]);
            for i in flips {
                st.flip(i);
                prop_assert!((st.cost - q.energy(&st.x)).abs() < 1e-9);
                for k in 0..9 {
                    prop_assert!((st.delta[k] - q.flip_delta(&st.x, k)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn traces_are_monotone(seed in 0u64..500, n in 4usize..12) {
            let q = random_qubo(n, seed);
            let pool = WarmStartPool::random(n, 4, seed).unwrap();
            let cfg = HeuristicConfig { max_iters: 200, seed, ..Default::default() };
            let t = multistart(&q, &pool, 4, &cfg).unwrap();
            for (r, rec) in t.restarts.iter().enumerate() {
                prop_assert_eq!(rec.start_cost, q.min_energy(pool.draw(r)));
                for w in rec.improvements.windows(2) {
                    prop_assert!(w[1].iter > w[0].iter && w[1].cost < w[0].cost);
                }
                prop_assert!(rec.iterations <= 200);
            }
        }
    }
}
