//! Randomized identity checks behind `chaoskit verify`.

use chaoskit::malliavin::{
    cov_det, covariance_inequality_check, density_check, det_lambda_symbolic, expected_det_all,
    expected_det_symbolic, first_order_constant, tr_term, tr_term_direct, SumOfSquares,
};
use chaoskit::mc::{estimate_expected_det, sample_gaussian, DEFAULT_BAND};
use chaoskit::{
    derive_seed, hat_contract, hermite, ChaosExpansion, Error, MalliavinPair, MultiIndex, Result,
    Tensor, Verdict,
};
use clap::ValueEnum;
use rayon::prelude::*;

use crate::report::Check;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Tensor,
    Chaos,
    Malliavin,
    Mc,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Tensor => "tensor",
            Suite::Chaos => "chaos",
            Suite::Malliavin => "malliavin",
            Suite::Mc => "mc",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub dim: usize,
    pub max_order: usize,
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol_rel: f64,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.dim == 0 {
            return bad("--dim must be at least 1".into());
        }
        if self.max_order == 0 {
            return bad("--max-order must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("--trials must be at least 1".into());
        }
        if self.samples < 2 {
            return bad("--samples must be at least 2".into());
        }
        if !(self.tol_rel > 0.0 && self.tol_rel.is_finite()) {
            return bad(format!("--tol-rel must be positive, got {}", self.tol_rel));
        }
        Ok(())
    }

    /// Dimension and component orders of trial `t`: dimensions cycle over
    /// `2..=dim` (or just `dim` when it is 1), orders over `1..=max_order`.
    fn shape(&self, t: usize) -> (usize, usize, usize) {
        let d = if self.dim == 1 {
            1
        } else {
            2 + t % (self.dim - 1)
        };
        let k = self.max_order;
        (d, 1 + t % k, 1 + (t / k) % k)
    }

    fn trial_seed(&self, suite: u64, t: usize) -> u64 {
        derive_seed(derive_seed(self.seed, suite), t as u64)
    }
}

pub fn run(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<Check>> {
    cfg.validate()?;
    let mut out = Vec::new();
    if matches!(suite, Suite::Tensor | Suite::All) {
        out.extend(tensor_suite(cfg)?);
    }
    if matches!(suite, Suite::Chaos | Suite::All) {
        out.extend(chaos_suite(cfg)?);
    }
    if matches!(suite, Suite::Malliavin | Suite::All) {
        out.extend(malliavin_suite(cfg)?);
    }
    if matches!(suite, Suite::Mc | Suite::All) {
        out.extend(mc_suite(cfg)?);
    }
    Ok(out)
}

fn collect_trials(
    cfg: &SuiteConfig,
    job: impl Fn(usize) -> Result<Vec<Check>> + Sync + Send,
) -> Result<Vec<Check>> {
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(job)
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn max_deviation(a: &Tensor, b: &Tensor) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

fn binom(n: usize, k: usize) -> f64 {
    fact(n) / (fact(k) * fact(n - k))
}

const TENSOR: &str = "tensor";

fn tensor_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    collect_trials(cfg, |t| {
        let (d, n, m) = cfg.shape(t);
        let seed = cfg.trial_seed(1, t);
        let f = Tensor::random_symmetric(d, n, derive_seed(seed, 0))?;
        let g = Tensor::random_symmetric(d, m, derive_seed(seed, 1))?;
        let ell = Tensor::random_symmetric(d, m, derive_seed(seed, 2))?;
        let h = Tensor::random_symmetric(d, n, derive_seed(seed, 3))?;
        let quad = f.norm() * g.norm() * ell.norm() * h.norm();
        let tol = cfg.tol_rel;
        let tag = format!("d={d} n={n} m={m}");
        let mut out = Vec::new();

        for k in 0..=n.min(m) {
            for r in 0..=(n.min(m) - k) {
                let want = f.contract(&g, r + k)?;
                let mut got = Tensor::zeros(d, want.order())?;
                for i in MultiIndex::all(d, k) {
                    got.add_scaled_assign(1.0, &f.slice(&i)?.contract(&g.slice(&i)?, r)?)?;
                }
                out.push(Check::close(
                    TENSOR,
                    format!("slice_sum_contraction {tag} k={k} r={r}"),
                    seed,
                    max_deviation(&got, &want),
                    0.0,
                    tol * f.norm() * g.norm(),
                ));
            }
        }

        for r in 0..n.min(m) {
            let lhs = f.contract(&h, n - r)?.inner(&g.contract(&ell, m - r)?)?;
            let rhs = f.contract(&g, r)?.inner(&h.contract(&ell, r)?)?;
            out.push(Check::close(
                TENSOR,
                format!("pairing_exchange {tag} r={r}"),
                seed,
                lhs,
                rhs,
                tol * quad,
            ));
        }

        let lhs = f
            .tensor_product(&g)?
            .symmetrize()
            .inner(&ell.tensor_product(&h)?.symmetrize())?;
        let mut rhs = 0.0;
        for r in 0..=n.min(m) {
            rhs += binom(n, r) * binom(m, r) * f.contract(&ell, r)?.inner(&h.contract(&g, r)?)?;
        }
        rhs *= fact(n) * fact(m) / fact(n + m);
        out.push(Check::close(
            TENSOR,
            format!("symmetrized_product_inner {tag}"),
            seed,
            lhs,
            rhs,
            tol * quad,
        ));

        for r in 0..=n.min(m) {
            let lhs = f
                .contract(&g, r)?
                .symmetrize()
                .inner(&ell.contract(&h, r)?.symmetrize())?;
            let mut rhs = 0.0;
            for s in 0..=(n.min(m) - r) {
                rhs += binom(n - r, s) * binom(m - r, s) * hat_contract(&f, &g, &ell, &h, r, s)?;
            }
            rhs *= fact(n - r) * fact(m - r) / fact(n + m - 2 * r);
            out.push(Check::close(
                TENSOR,
                format!("symmetrized_contraction_inner {tag} r={r}"),
                seed,
                lhs,
                rhs,
                tol * quad,
            ));
        }

        for r in 0..=n.min(m) {
            for s in 0..=(n.min(m) - r) {
                let a = hat_contract(&f, &g, &ell, &h, r, s)?;
                let b = hat_contract(&f, &ell, &g, &h, s, r)?;
                out.push(Check::close(
                    TENSOR,
                    format!("hat_swap {tag} r={r} s={s}"),
                    seed,
                    a,
                    b,
                    tol * quad,
                ));
            }
        }

        let raw = f.tensor_product(&g)?;
        let once = raw.symmetrize();
        out.push(Check::close(
            TENSOR,
            format!("symmetrize_idempotent {tag}"),
            seed,
            max_deviation(&once.symmetrize(), &once),
            0.0,
            tol * raw.norm(),
        ));
        Ok(out)
    })
}

const CHAOS: &str = "chaos";

fn chaos_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    collect_trials(cfg, |t| {
        let (d, n, m) = cfg.shape(t);
        let seed = cfg.trial_seed(2, t);
        let tol = cfg.tol_rel;
        let tag = format!("d={d} n={n} m={m}");
        let mixed = |top: usize, s: u64| -> Result<ChaosExpansion> {
            let terms = (0..=top)
                .map(|k| Tensor::random_symmetric(d, k, derive_seed(s, k as u64)))
                .collect::<Result<Vec<_>>>()?;
            ChaosExpansion::from_terms(d, terms)
        };
        let mut out = Vec::new();

        let x = mixed(n, derive_seed(seed, 0))?;
        let y = mixed(m, derive_seed(seed, 1))?;
        let xy = x.multiply(&y)?;
        let mut worst = (0.0f64, 0.0, 0.0);
        for i in 0..10 {
            let xi = sample_gaussian(d, seed, i);
            let lhs = xy.evaluate(&xi)?;
            let rhs = x.evaluate(&xi)? * y.evaluate(&xi)?;
            let rel = (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs());
            if rel >= worst.0 {
                worst = (rel, lhs, rhs);
            }
        }
        out.push(Check::close(
            CHAOS,
            format!("product_pointwise {tag} worst of 10 points"),
            seed,
            worst.1,
            worst.2,
            tol * 1f64.max(worst.1.abs()).max(worst.2.abs()),
        ));

        let f = Tensor::random_symmetric(d, n, derive_seed(seed, 2))?;
        let g = Tensor::random_symmetric(d, m, derive_seed(seed, 3))?;
        let fx = ChaosExpansion::multiple_integral(f.clone())?;
        let gx = ChaosExpansion::multiple_integral(g.clone())?;
        let back = fx.derivative(1)?.divergence()?;
        let want = ChaosExpansion::multiple_integral(f.scaled(n as f64))?;
        let dev = back
            .sub(&want)?
            .terms()
            .map(|(_, t)| t.max_abs())
            .fold(0.0, f64::max);
        out.push(Check::close(
            CHAOS,
            format!("divergence_of_derivative d={d} n={n}"),
            seed,
            dev,
            0.0,
            1e-12 * (1.0 + n as f64 * f.max_abs()),
        ));

        let expect = if n == m { fact(n) * f.inner(&g)? } else { 0.0 };
        let scale = fact(n.max(m)) * f.norm() * g.norm();
        out.push(Check::close(
            CHAOS,
            format!("isometry {tag}"),
            seed,
            fx.multiply(&gx)?.expectation(),
            expect,
            tol * (1.0 + scale),
        ));
        Ok(out)
    })
}

/// `Σ |c_j| Π_i |He_{α_i}(ξ_i)|`: the size of the terms that cancel when the
/// expansion is evaluated at `ξ`.
fn evaluation_magnitude(x: &ChaosExpansion, xi: &[f64]) -> f64 {
    let d = x.dim();
    let mut acc = 0.0;
    for (order, t) in x.terms() {
        for (idx, c) in MultiIndex::all(d, order).zip(t.coeffs()) {
            let mut counts = vec![0usize; d];
            for &j in idx.iter() {
                counts[j] += 1;
            }
            let w: f64 = counts
                .iter()
                .zip(xi)
                .map(|(&a, &v)| hermite(a, v).abs())
                .product();
            acc += c.abs() * w;
        }
    }
    acc
}

const MALLIAVIN: &str = "malliavin";

fn malliavin_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let mut out = collect_trials(cfg, |t| {
        let (d, n, m) = cfg.shape(t);
        let seed = cfg.trial_seed(3, t);
        let pair = MalliavinPair::random(d, n, m, seed)?;
        let tol = cfg.tol_rel;
        let tag = format!("d={d} n={n} m={m}");
        let mut out = Vec::new();
        let norms = pair.f().norm_sq() * pair.g().norm_sq();
        let weight = (fact(n) * fact(m)).powi(2);

        for b in expected_det_all(&pair)? {
            let k = b.k;
            let sym = expected_det_symbolic(&pair, k)?;
            out.push(Check::close(
                MALLIAVIN,
                format!("closed_form_vs_symbolic {tag} k={k}"),
                seed,
                b.closed_form,
                sym,
                1e-8 * (1.0 + sym.abs()),
            ));
            out.push(Check::at_least(
                MALLIAVIN,
                format!("closed_form_nonnegative {tag} k={k}"),
                seed,
                b.closed_form,
                0.0,
                1e-10 * b.scale,
            ));
            for r in 0..=(n - k).min(m - k) {
                let direct = tr_term_direct(&pair, k, r)?;
                let split = if r == 0 { b.t0 } else { tr_term(&pair, k, r)? };
                out.push(Check::close(
                    MALLIAVIN,
                    format!("remainder_term_direct {tag} k={k} r={r}"),
                    seed,
                    split,
                    direct,
                    tol * weight * norms,
                ));
            }
            // the expanded determinant loses accuracy through cancellation, so
            // the tolerance is relative to the size of the evaluated terms
            let sos = SumOfSquares::new(&pair, k)?;
            let poly = det_lambda_symbolic(&pair, k)?;
            for i in 0..3 {
                let xi = sample_gaussian(d, seed, i);
                let a = sos.eval(&xi)?;
                let p = poly.evaluate(&xi)?;
                out.push(Check::close(
                    MALLIAVIN,
                    format!("sum_of_squares_pointwise {tag} k={k} point={i}"),
                    seed,
                    a,
                    p,
                    tol * evaluation_magnitude(&poly, &xi).max(1.0),
                ));
            }
        }

        if n == m && n >= 2 {
            let c = covariance_inequality_check(&pair, tol)?;
            out.push(Check::at_least(
                MALLIAVIN,
                format!("covariance_inequality {tag}"),
                seed,
                c.lhs,
                c.rhs,
                tol * c.lhs.abs().max(c.rhs.abs()),
            ));
            if let Some(cn) = first_order_constant(n) {
                let rhs = cn * c.cov_det;
                out.push(Check::at_least(
                    MALLIAVIN,
                    format!("first_order_constant {tag}"),
                    seed,
                    c.edet[0],
                    rhs,
                    tol * c.edet[0].abs().max(rhs.abs()),
                ));
            }
        }
        if n == m {
            let top = expected_det_all(&pair)?.pop().expect("k = n present");
            let want = fact(n).powi(2) * cov_det(&pair)?;
            out.push(Check::close(
                MALLIAVIN,
                format!("top_order_is_covariance {tag}"),
                seed,
                top.closed_form,
                want,
                tol * want.abs().max(1e-300) + 1e-10 * top.scale,
            ));
            let rep = density_check(&pair, None)?;
            let expected = if d == 1 {
                Verdict::Degenerate
            } else {
                Verdict::AbsolutelyContinuous
            };
            out.push(verdict_check(
                format!("density_random {tag}"),
                seed,
                &rep,
                expected,
            ));

            let prop = MalliavinPair::proportional(pair.f().clone(), -1.5)?;
            let rep = density_check(&prop, None)?;
            out.push(verdict_check(
                format!("density_proportional {tag}"),
                seed,
                &rep,
                Verdict::Degenerate,
            ));
        }
        Ok(out)
    })?;

    let anchor = anchor_pair()?;
    let b = chaoskit::malliavin::expected_det_closed_form(&anchor, 1)?;
    out.push(Check::close(
        MALLIAVIN,
        "anchor_closed_form d=2 n=2 m=2 k=1".into(),
        0,
        b.closed_form,
        12.0,
        0.0,
    ));
    out.push(Check::close(
        MALLIAVIN,
        "anchor_symbolic d=2 n=2 m=2 k=1".into(),
        0,
        expected_det_symbolic(&anchor, 1)?,
        12.0,
        0.0,
    ));
    out.push(Check::close(
        MALLIAVIN,
        "anchor_cov_det d=2 n=2".into(),
        0,
        cov_det(&anchor)?,
        2.0,
        0.0,
    ));
    Ok(out)
}

/// Observed is 1 when the verdict matches and every `E det Λ^(k)` agrees
/// with it.
fn verdict_check(
    name: String,
    seed: u64,
    rep: &chaoskit::malliavin::DensityReport,
    expected: Verdict,
) -> Check {
    let ok = rep.verdict == expected && rep.consistent;
    Check::close(MALLIAVIN, name, seed, f64::from(u8::from(ok)), 1.0, 0.0)
}

/// `f = e1⊗e1`, `g = sym(e1⊗e2)` in dimension 2; `E det Λ^(1) = 12`.
pub fn anchor_pair() -> Result<MalliavinPair> {
    let f = Tensor::elementary(2, &[0, 0])?;
    let g = Tensor::elementary(2, &[0, 1])?.symmetrize();
    MalliavinPair::new(f, g)
}

const MC: &str = "mc";

fn mc_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let anchor = anchor_pair()?;
    let seed = cfg.trial_seed(4, 0);
    let est = estimate_expected_det(&anchor, 1, cfg.samples, seed)?;
    out.push(Check::close(
        MC,
        format!("anchor_estimate k=1 samples={}", cfg.samples),
        seed,
        est.mean,
        12.0,
        DEFAULT_BAND * est.stderr,
    ));
    for t in 0..cfg.trials.min(3) {
        let (d, n, m) = cfg.shape(t + 1);
        let seed = cfg.trial_seed(4, t + 1);
        let pair = MalliavinPair::random(d, n, m, seed)?;
        let exact = chaoskit::malliavin::expected_det_closed_form(&pair, 1)?.closed_form;
        let est = estimate_expected_det(&pair, 1, cfg.samples, seed)?;
        out.push(Check::close(
            MC,
            format!(
                "random_estimate d={d} n={n} m={m} k=1 samples={}",
                cfg.samples
            ),
            seed,
            est.mean,
            exact,
            DEFAULT_BAND * est.stderr,
        ));
    }
    Ok(out)
}
