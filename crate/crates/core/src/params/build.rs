//! Builders for the angle tables, driven by the emulator's optimiser.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    canonicalize, fit, scaling_fit_rows, GammaCurve, MisBetaRow, MisFitTable, MisGammaCell, RowSource, SkParamTable,
    SkRow, TableMeta, TreeParamTable, TreeRow, MAX_P, MIS_MAX_DEGREE, SCHEMA_VERSION, TREE_DEGREES,
};
use crate::emulator::{optimize_params_multi, OptimizeConfig, QaoaParams};
use crate::problem::{generate_instance, maxcut_to_qubo, mis_to_qubo, CostDiagonal, InstanceKind, WeightedGraph, Weights};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub seed: u64,
    /// Generated starts per SK cell and per first-layer MIS fit (see
    /// [`OptimizeConfig::restarts`]). Tree cells use the linear ramp only.
    pub restarts: usize,
    pub max_iters: usize,
    /// Largest layer count to optimise; rows above it are not built.
    pub max_p: usize,
    /// Random regular proxies per degree for `d >= 3`.
    pub proxy_graphs: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            seed: 2024,
            restarts: 3,
            max_iters: 300,
            max_p: MAX_P,
            proxy_graphs: 64,
        }
    }
}

/// Layer-interpolated start for depth `p + 1` from optimal depth-`p`
/// angles: `x'_i = (i-1)/p x_{i-1} + (p-i+1)/p x_i` with zero padding.
pub fn interp_start(prev: &QaoaParams) -> QaoaParams {
    let p = prev.p();
    let lift = |x: &[f64]| -> Vec<f64> {
        (1..=p + 1)
            .map(|i| {
                let left = if i >= 2 { x[i - 2] } else { 0.0 };
                let here = if i <= p { x[i - 1] } else { 0.0 };
                (i - 1) as f64 / p as f64 * left + (p + 1 - i) as f64 / p as f64 * here
            })
            .collect()
    };
    QaoaParams::new(lift(prev.gammas()), lift(prev.betas())).expect("finite")
}

fn maxcut_diag(g: &WeightedGraph) -> Result<CostDiagonal> {
    CostDiagonal::for_qaoa(&maxcut_to_qubo(g), 26)
}

/// Proxy instances for the degree-`d` tree row. `None` for degrees
/// without a feasible proxy.
pub fn tree_proxies(d: usize, count: usize, seed: u64) -> Option<(String, Vec<WeightedGraph>)> {
    match d {
        1 => Some(("single edge".into(), vec![WeightedGraph::unweighted(2, [(0, 1)]).ok()?])),
        2 => Some((
            "16-cycle".into(),
            vec![WeightedGraph::unweighted(16, (0..16).map(|i| (i, (i + 1) % 16))).ok()?],
        )),
        3..=10 => {
            let n = 16;
            let gs = (0..count.max(1) as u64)
                .map(|k| {
                    generate_instance(
                        &InstanceKind::RandomRegular { n, degree: d },
                        Weights::Unit,
                        seed.wrapping_mul(31).wrapping_add(100 * d as u64 + k),
                    )
                })
                .collect::<Result<Vec<_>>>()
                .ok()?;
            Some((format!("{} random {d}-regular graphs on {n} vertices", gs.len()), gs))
        }
        _ => None,
    }
}

/// Representative of unweighted Max-Cut angles on a `d`-regular graph.
///
/// The cost spectrum is integer, so `e^{i pi C}` equals the product of
/// `Z_i^d`: shifting `gamma_k` by `pi` is the identity for even `d` and
/// negates every later `beta` for odd `d`. Each `gamma_k` is moved into
/// `(-pi/2, pi/2]` before the usual sign and `beta` normalisation.
pub fn canonicalize_regular(params: &QaoaParams, d: usize) -> QaoaParams {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut g = params.gammas().to_vec();
    let mut b = params.betas().to_vec();
    for k in 0..g.len() {
        let shifts = ((g[k] - FRAC_PI_2) / PI).ceil();
        g[k] -= shifts * PI;
        if d % 2 == 1 && (shifts as i64).rem_euclid(2) == 1 {
            b[k..].iter_mut().for_each(|v| *v = -*v);
        }
    }
    canonicalize(&QaoaParams::new(g, b).expect("finite"), true)
}

/// Optimises the tree table cell by cell. Each cell starts from the
/// interpolated `p - 1` row, the neighbouring degree's row and the linear
/// ramp; `d = 1` is built after `d = 2` and only refines those
/// continuation starts, since every angle with `gamma` and `beta` in the
/// right relation cuts a single edge. Degrees without a proxy, and cells
/// whose optimisation fails, are filled from the scaling fit.
pub fn build_tree_table(cfg: &BuildConfig) -> Result<TreeParamTable> {
    let max_p = cfg.max_p.clamp(1, MAX_P);
    let mut rows: Vec<TreeRow> = Vec::new();
    let mut residuals = BTreeMap::new();
    let mut proxies = Vec::new();
    let mut order: Vec<usize> = TREE_DEGREES.to_vec();
    order.swap(0, 1);
    for d in order {
        let Some((desc, graphs)) = tree_proxies(d, cfg.proxy_graphs, cfg.seed) else {
            continue;
        };
        proxies.push(format!("d={d}: {desc}"));
        let diags = graphs.iter().map(maxcut_diag).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&CostDiagonal> = diags.iter().collect();
        let neighbour = if d == 1 { 2 } else { d - 1 };
        let mut prev: Option<QaoaParams> = None;
        for p in 1..=max_p {
            let mut extra = Vec::new();
            if let Some(pp) = &prev {
                extra.push(interp_start(pp));
            }
            if let Some(r) = rows.iter().find(|r| r.p == p && r.d == neighbour) {
                extra.push(QaoaParams::new(r.gammas.clone(), r.betas.clone())?);
            }
            let restarts = if d == 1 && !extra.is_empty() { 0 } else { 1 };
            let ocfg = OptimizeConfig {
                restarts,
                seed: cfg.seed ^ ((d as u64) << 8) ^ p as u64,
                max_iters: cfg.max_iters,
                extra_starts: extra,
            };
            match optimize_params_multi(&refs, p, &ocfg) {
                Ok(res) => {
                    let c = canonicalize_regular(&res.params, d);
                    residuals.insert(format!("d{d}_p{p}_energy"), res.energy);
                    log::info!("tree d={d} p={p} energy={:.6} angles={}", res.energy, c.to_interleaved());
                    rows.push(TreeRow {
                        d,
                        p,
                        gammas: c.gammas().to_vec(),
                        betas: c.betas().to_vec(),
                        source: RowSource::Optimized,
                    });
                    prev = Some(c);
                }
                Err(e) => {
                    log::warn!("tree cell d={d} p={p} failed: {e}");
                    prev = None;
                }
            }
        }
    }
    let mut beta_inf = Vec::new();
    let mut filled = Vec::new();
    for p in 1..=max_p {
        let basis: Vec<&TreeRow> = rows.iter().filter(|r| r.p == p && r.d >= 2).collect();
        if basis.len() < 2 {
            return Err(Error::param(format!("too few optimised tree rows at p={p}")));
        }
        let f = scaling_fit_rows(&basis, p);
        beta_inf.push(f.beta_inf());
        for &d in &TREE_DEGREES {
            if !rows.iter().any(|r| r.d == d && r.p == p) {
                let (g, b) = f.eval(d.max(2) as f64);
                filled.push(TreeRow {
                    d,
                    p,
                    gammas: g,
                    betas: b,
                    source: RowSource::Scaling,
                });
            }
        }
    }
    rows.extend(filled);
    rows.sort_by_key(|r| (r.d, r.p));
    Ok(TreeParamTable {
        meta: TableMeta {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            proxy: proxies.join("; "),
            residuals,
        },
        rows,
        beta_inf,
    })
}

/// Complete graph with independent `+-1/sqrt(n)` weights.
pub fn sk_instance(n: usize, seed: u64) -> Result<WeightedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (n as f64).sqrt();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, if rng.gen::<bool>() { s } else { -s }));
        }
    }
    WeightedGraph::new(n, edges)
}

pub const SK_N: usize = 14;
pub const SK_INSTANCES: usize = 10;

/// Minimises the mean Max-Cut energy over `SK_INSTANCES` SK instances.
pub fn build_sk_table(cfg: &BuildConfig) -> Result<SkParamTable> {
    let graphs = (0..SK_INSTANCES as u64)
        .map(|k| sk_instance(SK_N, cfg.seed.wrapping_mul(7919).wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    let diags = graphs.iter().map(maxcut_diag).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&CostDiagonal> = diags.iter().collect();
    let mut rows = Vec::new();
    let mut residuals = BTreeMap::new();
    let mut prev: Option<QaoaParams> = None;
    for p in 1..=cfg.max_p.clamp(1, MAX_P) {
        let ocfg = OptimizeConfig {
            restarts: cfg.restarts,
            seed: cfg.seed ^ (p as u64) << 16,
            max_iters: cfg.max_iters,
            extra_starts: prev.iter().map(interp_start).collect(),
        };
        let res = optimize_params_multi(&refs, p, &ocfg)?;
        let c = canonicalize(&res.params, true);
        log::info!("sk p={p} energy={:.6}", res.energy);
        residuals.insert(format!("p{p}_energy"), res.energy);
        rows.push(SkRow {
            p,
            gammas: c.gammas().to_vec(),
            betas: c.betas().to_vec(),
        });
        prev = Some(c);
    }
    Ok(SkParamTable {
        meta: TableMeta {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            proxy: format!("{SK_INSTANCES} complete graphs on {SK_N} vertices with +-1/sqrt(n) weights"),
            residuals,
        },
        rows,
    })
}

/// Erdos-Renyi training graphs with `n` in `8..=16` and edge probability
/// in `[0.2, 0.7]`.
pub fn mis_training_set(count: usize, seed: u64) -> Result<Vec<WeightedGraph>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(8..=16);
            let p_edge = rng.gen_range(0.2..=0.7);
            generate_instance(&InstanceKind::ErdosRenyi { n, p_edge }, Weights::Unit, rng.gen())
        })
        .collect()
}

pub const MIS_LAMBDA: f64 = 1.0;

/// Optimises each training graph for every depth, then fits the `gamma`
/// curves and averages `beta` per rounded mean degree.
///
/// Graphs are visited in order of mean degree and depth `p` starts from
/// the interpolated depth-`p - 1` optimum and the previous graph's
/// optimum, which keeps neighbouring solutions on one branch.
pub fn fit_mis_tables(graphs: &[WeightedGraph], cfg: &BuildConfig) -> Result<MisFitTable> {
    let max_p = cfg.max_p.clamp(1, MAX_P);
    let mut order: Vec<usize> = (0..graphs.len()).filter(|&i| graphs[i].num_edges() > 0).collect();
    order.sort_by(|&a, &b| graphs[a].mean_degree().total_cmp(&graphs[b].mean_degree()));
    if order.len() < 4 {
        return Err(Error::param("MIS fit needs at least four graphs with edges"));
    }
    // solutions[p - 1] = (mean degree, angles) per graph.
    let mut solutions: Vec<Vec<(f64, QaoaParams)>> = vec![Vec::new(); max_p];
    for (rank, &gi) in order.iter().enumerate() {
        let g = &graphs[gi];
        let diag = CostDiagonal::for_qaoa(&mis_to_qubo(g, MIS_LAMBDA)?, 26)?;
        let mut prev: Option<QaoaParams> = None;
        for p in 1..=max_p {
            let mut extra: Vec<QaoaParams> = prev.iter().map(interp_start).collect();
            if let Some((_, last)) = solutions[p - 1].last() {
                extra.push(last.clone());
            }
            let ocfg = OptimizeConfig {
                restarts: if p == 1 { cfg.restarts.max(1) } else { 0 },
                seed: cfg.seed ^ ((rank as u64) << 8) ^ p as u64,
                max_iters: cfg.max_iters,
                extra_starts: extra,
            };
            let res = optimize_params_multi(&[&diag], p, &ocfg)?;
            let c = canonicalize(&res.params, false);
            solutions[p - 1].push((g.mean_degree(), c.clone()));
            prev = Some(c);
        }
        log::info!("mis graph {rank} <d>={:.2} done", g.mean_degree());
    }

    let mut gamma = Vec::new();
    let mut residuals = BTreeMap::new();
    for p in 1..=max_p {
        let sols = &solutions[p - 1];
        // The curve is defined for mean degree >= 1 only.
        let fit_set: Vec<&(f64, QaoaParams)> = sols.iter().filter(|s| s.0 >= 1.0).collect();
        let ds: Vec<f64> = fit_set.iter().map(|s| s.0).collect();
        let mut cells: Vec<Option<(GammaCurve, f64)>> = Vec::new();
        for j in 0..p {
            let ys: Vec<f64> = fit_set.iter().map(|s| s.1.gammas()[j]).collect();
            cells.push(fit::fit_gamma_curve(&ds, &ys).ok());
        }
        for j in 0..p {
            let (curve, rms, borrowed) = match cells[j] {
                Some((c, r)) => (c, r, None),
                None => {
                    let k = (0..p)
                        .filter(|&k| cells[k].is_some())
                        .min_by_key(|&k| (k as i64 - j as i64).abs())
                        .ok_or_else(|| Error::param(format!("no MIS gamma fit succeeded at p={p}")))?;
                    let (c, r) = cells[k].expect("filtered");
                    (c, r, Some(k + 1))
                }
            };
            residuals.insert(format!("gamma_p{p}_j{}_rms", j + 1), rms);
            gamma.push(MisGammaCell {
                p,
                layer: j + 1,
                curve,
                rms_residual: rms,
                borrowed_from: borrowed,
            });
        }
    }

    let mut beta = Vec::new();
    for p in 1..=max_p {
        let sols = &solutions[p - 1];
        let mut by_degree: BTreeMap<usize, Vec<&QaoaParams>> = BTreeMap::new();
        for (d, s) in sols {
            by_degree.entry((d.round() as usize).clamp(1, MIS_MAX_DEGREE)).or_default().push(s);
        }
        for d in 1..=MIS_MAX_DEGREE {
            let src = (0..MIS_MAX_DEGREE)
                .flat_map(|k| [d.checked_sub(k), Some(d + k)])
                .flatten()
                .find(|k| by_degree.contains_key(k))
                .expect("at least one populated degree");
            let group = &by_degree[&src];
            let betas = (0..p)
                .map(|j| group.iter().map(|s| s.betas()[j]).sum::<f64>() / group.len() as f64)
                .collect();
            beta.push(MisBetaRow {
                d,
                p,
                betas,
                samples: if src == d { group.len() } else { 0 },
            });
        }
    }

    Ok(MisFitTable {
        meta: TableMeta {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            proxy: format!("{} Erdos-Renyi graphs, n in 8..=16, edge probability in [0.2, 0.7]", order.len()),
            residuals,
        },
        lambda: MIS_LAMBDA,
        gamma,
        beta,
    })
}
