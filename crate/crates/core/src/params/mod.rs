//! Parameter prediction without variational optimisation.
//!
//! Max-Cut angles come from tables indexed by degree (`Dweight`), from
//! Sherrington-Kirkpatrick angles rescaled by the mean degree (`SKatan`),
//! or from a blend of the two (`balanced`). MIS angles use a fitted
//! `gamma(<d>)` curve per layer and a per-degree `beta` table.
//!
//! All angles follow the emulator convention: the phase layer is
//! `e^{i gamma C}` with `C` the minimisation-form cost and the mixer is
//! `e^{i beta sum X}`. The tables are built with [`build`] and shipped as
//! JSON assets; `QEOPT_ASSETS` points at a directory with replacements.

pub mod build;
pub mod fit;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emulator::QaoaParams;
use crate::problem::WeightedGraph;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_P: usize = 6;
/// Degrees with a tree-table row.
pub const TREE_DEGREES: [usize; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20];
pub const MIS_MAX_DEGREE: usize = 12;

pub const TREE_ASSET: &str = "tree_table.json";
pub const SK_ASSET: &str = "sk_table.json";
pub const MIS_ASSET: &str = "mis_table.json";

const TREE_JSON: &str = include_str!("../../assets/tree_table.json");
const SK_JSON: &str = include_str!("../../assets/sk_table.json");
const MIS_JSON: &str = include_str!("../../assets/mis_table.json");

/// Provenance stored with every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub proxy: String,
    /// Fit residuals or per-cell notes, keyed by cell name.
    #[serde(default)]
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    Optimized,
    /// Filled from the degree-scaling fit.
    Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRow {
    pub d: usize,
    pub p: usize,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub source: RowSource,
}

/// Angles per `(degree, p)`. `beta_inf[p - 1]` holds the large-degree
/// limit of `beta` from the scaling fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParamTable {
    pub meta: TableMeta,
    pub rows: Vec<TreeRow>,
    pub beta_inf: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkRow {
    pub p: usize,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkParamTable {
    pub meta: TableMeta,
    pub rows: Vec<SkRow>,
}

/// `gamma_j^p = c1 + c2 / (<d>^c3 + c4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub c: [f64; 4],
}

impl GammaCurve {
    pub fn eval(&self, d: f64) -> f64 {
        let [c1, c2, c3, c4] = self.c;
        c1 + c2 / (d.powf(c3) + c4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisGammaCell {
    pub p: usize,
    pub layer: usize,
    pub curve: GammaCurve,
    pub rms_residual: f64,
    /// Layer whose coefficients were reused after a failed fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub borrowed_from: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisBetaRow {
    pub d: usize,
    pub p: usize,
    pub betas: Vec<f64>,
    /// Training graphs that rounded to this degree; 0 means the row was
    /// copied from the nearest populated degree.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisFitTable {
    pub meta: TableMeta,
    pub lambda: f64,
    pub gamma: Vec<MisGammaCell>,
    pub beta: Vec<MisBetaRow>,
}

/// Degree histogram of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub histogram: BTreeMap<usize, usize>,
}

impl DegreeProfile {
    pub fn of(g: &WeightedGraph) -> Self {
        let mut histogram = BTreeMap::new();
        for d in g.degrees() {
            *histogram.entry(d).or_insert(0) += 1;
        }
        DegreeProfile { histogram }
    }

    pub fn mean(&self) -> f64 {
        let n: usize = self.histogram.values().sum();
        if n == 0 {
            return 0.0;
        }
        self.histogram.iter().map(|(&d, &c)| (d * c) as f64).sum::<f64>() / n as f64
    }

    /// `w_d = d |{v : deg v = d}| / sum_d d |{v : deg v = d}|`, zero-degree
    /// vertices omitted. Empty when the graph has no edges.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        let total: usize = self.histogram.iter().map(|(&d, &c)| d * c).sum();
        if total == 0 {
            return Vec::new();
        }
        self.histogram
            .iter()
            .filter(|(&d, _)| d > 0)
            .map(|(&d, &c)| (d, (d * c) as f64 / total as f64))
            .collect()
    }
}

fn check_p(p: usize) -> Result<()> {
    if !(1..=MAX_P).contains(&p) {
        return Err(Error::param(format!("p = {p} outside the table range 1..={MAX_P}")));
    }
    Ok(())
}

fn params_of(g: &[f64], b: &[f64]) -> QaoaParams {
    QaoaParams::new(g.to_vec(), b.to_vec()).expect("table rows are valid")
}

impl TreeParamTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: TreeParamTable = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    fn validate(&self) -> Result<()> {
        check_schema(&self.meta)?;
        for &d in &TREE_DEGREES {
            for p in 1..=MAX_P {
                let row = self
                    .exact(d, p)
                    .ok_or_else(|| Error::param(format!("tree table lacks d={d}, p={p}")))?;
                if row.gammas.len() != p || row.betas.len() != p {
                    return Err(Error::param(format!("tree row d={d}, p={p} has wrong length")));
                }
                if row.gammas.iter().chain(&row.betas).any(|v| !v.is_finite()) {
                    return Err(Error::param(format!("tree row d={d}, p={p} is not finite")));
                }
            }
        }
        if self.beta_inf.len() < MAX_P || self.beta_inf.iter().enumerate().any(|(k, b)| b.len() != k + 1) {
            return Err(Error::param("tree table beta_inf has the wrong shape"));
        }
        Ok(())
    }

    fn exact(&self, d: usize, p: usize) -> Option<&TreeRow> {
        self.rows.iter().find(|r| r.d == d && r.p == p)
    }

    /// Row for any degree `d >= 1`. Tabulated degrees are returned as
    /// stored. Other degrees use the scaling fit (see [`scaling_fit`]),
    /// clamped per coordinate between the neighbouring rows; above 20 the
    /// clamp runs between the `d = 20` row and the large-degree limit
    /// (`gamma -> 0`, `beta -> beta_inf`).
    pub fn row(&self, d: usize, p: usize) -> Result<QaoaParams> {
        check_p(p)?;
        if d == 0 {
            return Err(Error::param("degree 0 has no tree angles"));
        }
        if let Some(r) = self.exact(d, p) {
            return Ok(params_of(&r.gammas, &r.betas));
        }
        let fit = scaling_fit(self, p);
        let (gf, bf) = fit.eval(d as f64);
        let lo = TREE_DEGREES.iter().rev().copied().find(|&t| t < d).expect("d >= 2 here");
        let lo_row = self.exact(lo, p).expect("validated");
        let (hi_g, hi_b): (Vec<f64>, Vec<f64>) = match TREE_DEGREES.iter().copied().find(|&t| t > d) {
            Some(hi) => {
                let r = self.exact(hi, p).expect("validated");
                (r.gammas.clone(), r.betas.clone())
            }
            None => (vec![0.0; p], self.beta_inf[p - 1].clone()),
        };
        let clamp = |v: f64, a: f64, b: f64| v.clamp(a.min(b), a.max(b));
        let gammas = (0..p).map(|j| clamp(gf[j], lo_row.gammas[j], hi_g[j])).collect();
        let betas = (0..p).map(|j| clamp(bf[j], lo_row.betas[j], hi_b[j])).collect();
        QaoaParams::new(gammas, betas)
    }
}

/// Least-squares fit of the observed degree scaling over the optimised
/// rows with `d >= 2`: `gamma = a + b x` with `x = atan(1/sqrt(d-1))` for
/// `p = 1` and `x = 1/sqrt(d-1)` for deeper circuits, and
/// `beta = a + b/d`.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    p: usize,
    gamma: Vec<(f64, f64)>,
    beta: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn eval(&self, d: f64) -> (Vec<f64>, Vec<f64>) {
        let x = gamma_scale(self.p, d);
        (
            self.gamma.iter().map(|&(a, b)| a + b * x).collect(),
            self.beta.iter().map(|&(a, b)| a + b / d).collect(),
        )
    }

    /// Large-degree `beta` limit.
    pub fn beta_inf(&self) -> Vec<f64> {
        self.beta.iter().map(|&(a, _)| a).collect()
    }
}

pub(crate) fn gamma_scale(p: usize, d: f64) -> f64 {
    let s = 1.0 / (d - 1.0).sqrt();
    if p == 1 {
        s.atan()
    } else {
        s
    }
}

pub fn scaling_fit(table: &TreeParamTable, p: usize) -> ScalingFit {
    let rows: Vec<&TreeRow> = table
        .rows
        .iter()
        .filter(|r| r.p == p && r.d >= 2 && r.source == RowSource::Optimized)
        .collect();
    scaling_fit_rows(&rows, p)
}

pub(crate) fn scaling_fit_rows(rows: &[&TreeRow], p: usize) -> ScalingFit {
    let xs: Vec<f64> = rows.iter().map(|r| gamma_scale(p, r.d as f64)).collect();
    let inv: Vec<f64> = rows.iter().map(|r| 1.0 / r.d as f64).collect();
    let gamma = (0..p)
        .map(|j| fit::linear_fit(&xs, &rows.iter().map(|r| r.gammas[j]).collect::<Vec<_>>()))
        .collect();
    let beta = (0..p)
        .map(|j| fit::linear_fit(&inv, &rows.iter().map(|r| r.betas[j]).collect::<Vec<_>>()))
        .collect();
    ScalingFit { p, gamma, beta }
}

impl SkParamTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: SkParamTable = serde_json::from_str(text)?;
        check_schema(&t.meta)?;
        for p in 1..=MAX_P {
            let r = t.get(p)?;
            if r.p() != p {
                return Err(Error::param(format!("SK row p={p} has wrong length")));
            }
        }
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    pub fn get(&self, p: usize) -> Result<QaoaParams> {
        check_p(p)?;
        let r = self
            .rows
            .iter()
            .find(|r| r.p == p)
            .ok_or_else(|| Error::param(format!("SK table lacks p={p}")))?;
        QaoaParams::new(r.gammas.clone(), r.betas.clone())
    }
}

impl MisFitTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: MisFitTable = serde_json::from_str(text)?;
        check_schema(&t.meta)?;
        for p in 1..=MAX_P {
            for j in 1..=p {
                t.cell(p, j)?;
            }
            for d in 1..=MIS_MAX_DEGREE {
                t.beta_row(d, p)?;
            }
        }
        if t.gamma.iter().any(|c| !(c.curve.c[2] > 0.0)) {
            return Err(Error::param("MIS gamma curves need c3 > 0"));
        }
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    pub fn cell(&self, p: usize, layer: usize) -> Result<&MisGammaCell> {
        self.gamma
            .iter()
            .find(|c| c.p == p && c.layer == layer)
            .ok_or_else(|| Error::param(format!("MIS table lacks gamma cell p={p}, layer={layer}")))
    }

    pub fn beta_row(&self, d: usize, p: usize) -> Result<&MisBetaRow> {
        self.beta
            .iter()
            .find(|r| r.d == d && r.p == p)
            .ok_or_else(|| Error::param(format!("MIS table lacks beta row d={d}, p={p}")))
    }
}

fn check_schema(meta: &TableMeta) -> Result<()> {
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::param(format!(
            "table schema {} is not the supported version {SCHEMA_VERSION}",
            meta.schema_version
        )));
    }
    Ok(())
}

/// The three prediction tables.
#[derive(Debug, Clone)]
pub struct Tables {
    pub tree: TreeParamTable,
    pub sk: SkParamTable,
    pub mis: MisFitTable,
}

impl Tables {
    /// Bundled tables, or the files in `$QEOPT_ASSETS` when it is set.
    pub fn load() -> Result<Self> {
        match std::env::var_os("QEOPT_ASSETS") {
            Some(dir) => Self::from_dir(Path::new(&dir)),
            None => Self::bundled(),
        }
    }

    pub fn bundled() -> Result<Self> {
        let wrap = |name: &'static str| move |e: Error| Error::Asset {
            path: name.into(),
            msg: e.to_string(),
        };
        Ok(Tables {
            tree: TreeParamTable::from_json(TREE_JSON).map_err(wrap(TREE_ASSET))?,
            sk: SkParamTable::from_json(SK_JSON).map_err(wrap(SK_ASSET))?,
            mis: MisFitTable::from_json(MIS_JSON).map_err(wrap(MIS_ASSET))?,
        })
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::Asset {
                path,
                msg: e.to_string(),
            })
        };
        let wrap = |name: &str| {
            let path = dir.join(name);
            move |e: Error| Error::Asset {
                path: path.clone(),
                msg: e.to_string(),
            }
        };
        Ok(Tables {
            tree: TreeParamTable::from_json(&read(TREE_ASSET)?).map_err(wrap(TREE_ASSET))?,
            sk: SkParamTable::from_json(&read(SK_ASSET)?).map_err(wrap(SK_ASSET))?,
            mis: MisFitTable::from_json(&read(MIS_ASSET)?).map_err(wrap(MIS_ASSET))?,
        })
    }
}

/// Degree-weighted average of tree rows.
pub fn dweight_predict(g: &WeightedGraph, p: usize, table: &TreeParamTable) -> Result<QaoaParams> {
    check_p(p)?;
    let weights = DegreeProfile::of(g).weights();
    if weights.is_empty() {
        return Err(Error::graph("Dweight needs a graph with at least one edge"));
    }
    let mut gammas = vec![0.0; p];
    let mut betas = vec![0.0; p];
    for (d, w) in weights {
        let row = table.row(d, p)?;
        for j in 0..p {
            gammas[j] += w * row.gammas()[j];
            betas[j] += w * row.betas()[j];
        }
    }
    QaoaParams::new(gammas, betas)
}

/// SK angles with `gamma` scaled by `atan(1/sqrt(<d> - 1))`.
pub fn skatan_predict(g: &WeightedGraph, p: usize, table: &SkParamTable) -> Result<QaoaParams> {
    let d = g.mean_degree();
    if !(d > 1.0) {
        return Err(Error::graph(format!("SKatan needs mean degree above 1, got {d}")));
    }
    let sk = table.get(p)?;
    let s = (1.0 / (d - 1.0).sqrt()).atan();
    QaoaParams::new(sk.gammas().iter().map(|x| x * s).collect(), sk.betas().to_vec())
}

/// `alpha * SKatan + (1 - alpha) * Dweight`.
pub fn balanced_predict(g: &WeightedGraph, p: usize, tables: &Tables, alpha: f64) -> Result<QaoaParams> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha = {alpha} outside [0, 1]")));
    }
    let dw = dweight_predict(g, p, &tables.tree)?;
    if alpha == 0.0 {
        return Ok(dw);
    }
    let sk = skatan_predict(g, p, &tables.sk)?;
    dw.lerp(&sk, alpha)
}

/// Divides every `gamma` by the root-mean-square edge weight.
pub fn rescale_for_weights(params: &QaoaParams, g: &WeightedGraph) -> Result<QaoaParams> {
    if g.num_edges() == 0 {
        return Err(Error::graph("weight rescaling needs at least one edge"));
    }
    let ms = g.edges().iter().map(|e| e.2 * e.2).sum::<f64>() / g.num_edges() as f64;
    if !(ms > 0.0) {
        return Err(Error::graph("all edge weights are zero"));
    }
    Ok(params.scale_gammas(ms.sqrt()))
}

/// Fitted `gamma(<d>)` per layer and the `beta` row at the rounded mean
/// degree, clamped to `1..=12`.
pub fn mis_predict(g: &WeightedGraph, p: usize, table: &MisFitTable) -> Result<QaoaParams> {
    check_p(p)?;
    let d = g.mean_degree();
    let gammas = (1..=p)
        .map(|j| table.cell(p, j).map(|c| c.curve.eval(d)))
        .collect::<Result<Vec<_>>>()?;
    let key = (d.round() as usize).clamp(1, MIS_MAX_DEGREE);
    let betas = table.beta_row(key, p)?.betas.clone();
    QaoaParams::new(gammas, betas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dweight,
    Skatan,
    Balanced,
    Mis,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dweight" => Ok(Method::Dweight),
            "skatan" => Ok(Method::Skatan),
            "balanced" => Ok(Method::Balanced),
            "mis" => Ok(Method::Mis),
            _ => Err(Error::param(format!("unknown prediction method {s:?}"))),
        }
    }
}

/// Prediction as used by the pipeline: Max-Cut methods are rescaled for
/// the edge weights, MIS uses the unweighted graph.
pub fn predict(g: &WeightedGraph, p: usize, method: Method, tables: &Tables, alpha: f64) -> Result<QaoaParams> {
    let raw = match method {
        Method::Dweight => dweight_predict(g, p, &tables.tree)?,
        Method::Skatan => skatan_predict(g, p, &tables.sk)?,
        Method::Balanced => balanced_predict(g, p, tables, alpha)?,
        Method::Mis => return mis_predict(g, p, &tables.mis),
    };
    rescale_for_weights(&raw, g)
}

/// Maps `(gamma, beta)` to the representative with `gamma_1 >= 0`, and
/// for spin-flip symmetric costs wraps each `beta` into `[-pi/4, pi/4)`
/// (shifting one layer's `beta` by `pi/2` multiplies the state by a
/// global spin flip). Otherwise `beta` is wrapped into `[-pi/2, pi/2)`.
pub fn canonicalize(params: &QaoaParams, flip_symmetric: bool) -> QaoaParams {
    let mut g = params.gammas().to_vec();
    let mut b = params.betas().to_vec();
    if g[0] < 0.0 {
        g.iter_mut().for_each(|v| *v = -*v);
        b.iter_mut().for_each(|v| *v = -*v);
    }
    let period = if flip_symmetric { FRAC_PI_2 } else { 2.0 * FRAC_PI_2 };
    for v in &mut b {
        *v = (*v + period / 2.0).rem_euclid(period) - period / 2.0;
    }
    QaoaParams::new(g, b).expect("finite angles")
}
