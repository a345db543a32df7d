use std::fs;
use std::path::{Path, PathBuf};

use chaoskit::malliavin::{
    covariance_inequality_check, density_check, expected_det_closed_form, first_order_constant,
    CovarianceInequality, DensityReport, DetBreakdown, PairFile,
};
use chaoskit::mc::{det_samples, estimate_expected_det, Estimate};
use chaoskit::{derive_seed, Error, MalliavinPair, Result, Tensor};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{num, opt_num, Render, Table};

/// Where the pair under study comes from: a JSON pair file, or a random
/// pair drawn from `--seed`.
#[derive(Args, Debug, Clone)]
pub struct PairSource {
    /// Pair file `{"dim", "n", "m", "f", "g"}`
    #[arg(long, value_name = "FILE")]
    pub pair: Option<PathBuf>,

    /// Symmetrize tensors the file does not mark as symmetric
    #[arg(long)]
    pub symmetrize: bool,

    /// Dimension of a generated pair
    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    /// Order n of F in a generated pair
    #[arg(long, default_value_t = 2)]
    pub order: usize,

    /// Order m of G in a generated pair (defaults to n)
    #[arg(long)]
    pub m: Option<usize>,
}

impl PairSource {
    pub fn load(&self, seed: u64) -> Result<MalliavinPair> {
        match &self.pair {
            Some(path) => load_pair(path, self.symmetrize),
            None => {
                check_shape(self.dim, self.order, self.m)?;
                MalliavinPair::random(self.dim, self.order, self.m.unwrap_or(self.order), seed)
            }
        }
    }
}

fn check_shape(dim: usize, n: usize, m: Option<usize>) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("--dim must be at least 1".into()));
    }
    if n == 0 || m == Some(0) {
        return Err(Error::InvalidArgument("orders must be at least 1".into()));
    }
    Ok(())
}

pub fn load_pair(path: &Path, symmetrize: bool) -> Result<MalliavinPair> {
    let text = fs::read_to_string(path)?;
    let file: PairFile = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    file.into_pair(symmetrize)
}

fn resolve_k(pair: &MalliavinPair, ks: &[usize]) -> Result<Vec<usize>> {
    let top = pair.n().min(pair.m());
    if ks.is_empty() {
        return Ok((1..=top).collect());
    }
    for &k in ks {
        if k == 0 || k > top {
            return Err(Error::OutOfRange {
                what: "k",
                value: k,
                min: 1,
                max: top,
            });
        }
    }
    Ok(ks.to_vec())
}

#[derive(Debug, Serialize)]
pub struct EdetReport {
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub results: Vec<DetBreakdown>,
    /// Closed form and symbolic expectation agree within `1e-8 (1 + |symbolic|)`
    /// and any Monte Carlo estimate covers the closed form.
    pub consistent: bool,
}

impl Render for EdetReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec![
            "k",
            "t0",
            "remainder",
            "closed_form",
            "symbolic",
            "mc_mean",
            "mc_stderr",
            "mc_samples",
        ]);
        for b in &self.results {
            t.rows.push(vec![
                b.k.to_string(),
                num(b.t0),
                num(b.remainder),
                num(b.closed_form),
                opt_num(b.symbolic),
                opt_num(b.mc.map(|e| e.mean)),
                opt_num(b.mc.map(|e| e.stderr)),
                b.mc.map(|e| e.samples.to_string()).unwrap_or_default(),
            ]);
        }
        t
    }
}

pub fn edet(
    pair: &MalliavinPair,
    ks: &[usize],
    symbolic: bool,
    samples: Option<usize>,
    band: f64,
    seed: u64,
) -> Result<EdetReport> {
    let ks = resolve_k(pair, ks)?;
    let results = ks
        .iter()
        .map(|&k| {
            let mut b = expected_det_closed_form(pair, k)?;
            if symbolic {
                b = b.with_symbolic(pair)?;
            }
            if let Some(s) = samples {
                b = b.with_mc(estimate_expected_det(
                    pair,
                    k,
                    s,
                    derive_seed(seed, k as u64),
                )?);
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let consistent = results.iter().all(|b| {
        let sym_ok = b
            .symbolic
            .is_none_or(|s| (b.closed_form - s).abs() <= 1e-8 * (1.0 + s.abs()));
        let mc_ok = b.mc.is_none_or(|e| e.covers(b.closed_form, band));
        sym_ok && mc_ok
    });
    Ok(EdetReport {
        dim: pair.dim(),
        n: pair.n(),
        m: pair.m(),
        seed,
        results,
        consistent,
    })
}

impl Render for DensityReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec![
            "verdict",
            "cov_det",
            "tol_abs",
            "k",
            "edet",
            "threshold",
            "consistent",
        ]);
        let verdict = serde_json::to_value(self.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        for e in &self.edet {
            t.rows.push(vec![
                verdict.clone(),
                num(self.cov_det),
                num(self.tol_abs),
                e.k.to_string(),
                num(e.value),
                num(e.threshold),
                self.consistent.to_string(),
            ]);
        }
        t
    }
}

pub fn density(pair: &MalliavinPair, tol_abs: Option<f64>) -> Result<DensityReport> {
    if let Some(t) = tol_abs {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "--tol-abs must be a nonnegative number, got {t}"
            )));
        }
    }
    density_check(pair, tol_abs)
}

#[derive(Debug, Serialize)]
pub struct McRow {
    pub k: usize,
    pub closed_form: f64,
    pub estimate: Estimate,
    pub band: f64,
    pub covers: bool,
}

#[derive(Debug, Serialize)]
pub struct McReport {
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub results: Vec<McRow>,
}

impl Render for McReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec![
            "k",
            "closed_form",
            "mean",
            "stderr",
            "samples",
            "seed",
            "band",
            "covers",
        ]);
        for r in &self.results {
            t.rows.push(vec![
                r.k.to_string(),
                num(r.closed_form),
                num(r.estimate.mean),
                num(r.estimate.stderr),
                r.estimate.samples.to_string(),
                r.estimate.seed.to_string(),
                num(r.band),
                r.covers.to_string(),
            ]);
        }
        t
    }
}

/// Monte Carlo estimates of `E det Λ^(k)`; with `dump`, also writes every
/// sample value as CSV `k,index,value`.
pub fn mc(
    pair: &MalliavinPair,
    ks: &[usize],
    samples: usize,
    band: f64,
    seed: u64,
    dump: Option<&Path>,
) -> Result<McReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "--samples must be at least 2".into(),
        ));
    }
    if !(band > 0.0) {
        return Err(Error::InvalidArgument("--band must be positive".into()));
    }
    let ks = resolve_k(pair, ks)?;
    let mut raw = String::from("k,index,value\n");
    let mut results = Vec::new();
    for &k in &ks {
        let run_seed = derive_seed(seed, k as u64);
        let values = det_samples(pair, k, samples, run_seed)?;
        if dump.is_some() {
            for (i, v) in values.iter().enumerate() {
                raw.push_str(&format!("{k},{i},{}\n", num(*v)));
            }
        }
        let estimate = Estimate::from_values(&values, run_seed)?;
        let closed_form = expected_det_closed_form(pair, k)?.closed_form;
        results.push(McRow {
            k,
            closed_form,
            estimate,
            band,
            covers: estimate.covers(closed_form, band),
        });
    }
    if let Some(path) = dump {
        fs::write(path, raw)?;
    }
    Ok(McReport {
        dim: pair.dim(),
        n: pair.n(),
        m: pair.m(),
        results,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub dim: usize,
    pub pairs: usize,
    pub seed: u64,
    pub min_ratio: f64,
    pub violations: usize,
    pub first_order_constant: Option<f64>,
    pub first_order_violations: usize,
}

/// One random pair of a sweep cell.
#[derive(Debug, Serialize)]
pub struct SweepPair {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
    pub first_order_holds: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub tol_rel: f64,
    pub rows: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<SweepPair>>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.violations == 0 && r.first_order_violations == 0)
    }
}

impl Render for SweepReport {
    fn table(&self) -> Table {
        if let Some(pairs) = &self.pairs {
            let mut t = Table::new(vec![
                "n",
                "dim",
                "seed",
                "lhs",
                "rhs",
                "ratio",
                "holds",
                "first_order_holds",
            ]);
            for p in pairs {
                t.rows.push(vec![
                    p.n.to_string(),
                    p.dim.to_string(),
                    p.seed.to_string(),
                    num(p.lhs),
                    num(p.rhs),
                    num(p.ratio),
                    p.holds.to_string(),
                    p.first_order_holds
                        .map(|b| b.to_string())
                        .unwrap_or_default(),
                ]);
            }
            return t;
        }
        let mut t = Table::new(vec![
            "n",
            "dim",
            "pairs",
            "seed",
            "min_ratio",
            "violations",
            "first_order_constant",
            "first_order_violations",
        ]);
        for r in &self.rows {
            t.rows.push(vec![
                r.n.to_string(),
                r.dim.to_string(),
                r.pairs.to_string(),
                r.seed.to_string(),
                num(r.min_ratio),
                r.violations.to_string(),
                opt_num(r.first_order_constant),
                r.first_order_violations.to_string(),
            ]);
        }
        t
    }
}

/// Checks the covariance inequality on `trials` random equal-order pairs for
/// every `(n, d)` combination. `per_pair` keeps every individual result.
pub fn sweep(
    orders: &[usize],
    dims: &[usize],
    trials: usize,
    tol_rel: f64,
    seed: u64,
    per_pair: bool,
) -> Result<SweepReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("--trials must be at least 1".into()));
    }
    if let Some(&n) = orders.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidArgument(format!(
            "sweep orders must be at least 2, got {n}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidArgument("--dim must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for &n in orders {
        for &d in dims {
            let cell_seed = derive_seed(seed, (n * 1000 + d) as u64);
            let checks = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let pair_seed = derive_seed(cell_seed, t);
                    let pair = MalliavinPair::random(d, n, n, pair_seed)?;
                    Ok((pair_seed, covariance_inequality_check(&pair, tol_rel)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let c_n = first_order_constant(n);
            let first_order = |t: &CovarianceInequality| {
                c_n.map(|c| {
                    let rhs = c * t.cov_det;
                    t.edet[0] >= rhs - tol_rel * t.edet[0].abs().max(rhs.abs())
                })
            };
            let first_order_violations = checks
                .iter()
                .filter(|(_, t)| first_order(t) == Some(false))
                .count();
            if per_pair {
                pairs.extend(checks.iter().map(|(pair_seed, t)| SweepPair {
                    n,
                    dim: d,
                    seed: *pair_seed,
                    lhs: t.lhs,
                    rhs: t.rhs,
                    ratio: t.ratio(),
                    holds: t.holds,
                    first_order_holds: first_order(t),
                }));
            }
            rows.push(SweepRow {
                n,
                dim: d,
                pairs: trials,
                seed: cell_seed,
                min_ratio: checks
                    .iter()
                    .map(|(_, t)| t.ratio())
                    .fold(f64::INFINITY, f64::min),
                violations: checks.iter().filter(|(_, t)| !t.holds).count(),
                first_order_constant: c_n,
                first_order_violations,
            });
        }
    }
    Ok(SweepReport {
        tol_rel,
        rows,
        pairs: per_pair.then_some(pairs),
    })
}

impl Render for PairFile {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["component", "index", "value"]);
        for (name, tensor) in [("f", &self.f), ("g", &self.g)] {
            for e in &tensor.entries {
                let idx: Vec<String> = e.index.iter().map(|i| i.to_string()).collect();
                t.rows
                    .push(vec![name.to_string(), idx.join(" "), num(e.value)]);
            }
        }
        t
    }
}

/// A random pair, or with `proportional = Some(c)` the degenerate pair
/// `(f, c f)`.
pub fn gen(
    dim: usize,
    n: usize,
    m: Option<usize>,
    proportional: Option<f64>,
    seed: u64,
) -> Result<PairFile> {
    check_shape(dim, n, m)?;
    let pair = match proportional {
        Some(c) => {
            if m.is_some_and(|m| m != n) {
                return Err(Error::InvalidArgument(
                    "--proportional needs equal orders".into(),
                ));
            }
            MalliavinPair::proportional(Tensor::random_symmetric(dim, n, seed)?, c)?
        }
        None => MalliavinPair::random(dim, n, m.unwrap_or(n), seed)?,
    };
    Ok(PairFile::from_pair(&pair, Some(seed)))
}
