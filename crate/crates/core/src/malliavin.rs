//! Iterated Malliavin matrices of a pair `(F, G) = (I_n(f), I_m(g))`.
//!
//! `Λ^(k)` is the 2×2 Gram matrix of `D^(k)F` and `D^(k)G` in `H^{⊗k}`.
//! Its expected determinant is available along two independent routes:
//!
//! * symbolically, by expanding the Gram entries as chaos sums with the
//!   product formula and taking the constant term of `ac - b²`
//!   ([`expected_det_symbolic`]);
//! * in closed form, as `T_0^(k) + Σ_{r≥1} T_r^(k)`, where `T_0` is a
//!   combination of contraction norms `‖f ⊗_s g‖²` and each `T_r` a
//!   combination of hat contractions ([`expected_det_closed_form`]).
//!
//! [`tr_term_direct`] evaluates each `T_r` from its defining sum of squared
//! norms, which is the third, manifestly nonnegative, route.

use serde::{Deserialize, Serialize};

use crate::chaos::{ChaosExpansion, HValuedChaos};
use crate::combinatorics::{binomial, div_exact, factorial, falling_factorial, product, to_f64};
use crate::error::{check_range, Error, Result};
use crate::mc::Estimate;
use crate::tensor::{hat_axis_map, permuted_inner, MultiIndex, Tensor, TensorFile};

/// `(F, G) = (I_n(f), I_m(g))` with `f`, `g` symmetric over the same basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MalliavinPair {
    f: Tensor,
    g: Tensor,
}

impl MalliavinPair {
    pub fn new(f: Tensor, g: Tensor) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                left: f.dim(),
                right: g.dim(),
            });
        }
        if f.order() == 0 || g.order() == 0 {
            return Err(Error::InvalidArgument(
                "pair components must have order at least 1".into(),
            ));
        }
        f.require_symmetric("Malliavin pair")?;
        g.require_symmetric("Malliavin pair")?;
        Ok(MalliavinPair { f, g })
    }

    /// Independent random symmetric components, reproducible from `seed`.
    pub fn random(dim: usize, n: usize, m: usize, seed: u64) -> Result<Self> {
        let f = Tensor::random_symmetric(dim, n, crate::derive_seed(seed, 0))?;
        let g = Tensor::random_symmetric(dim, m, crate::derive_seed(seed, 1))?;
        Self::new(f, g)
    }

    /// `(I_n(f), c I_n(f))`.
    pub fn proportional(f: Tensor, c: f64) -> Result<Self> {
        let g = f.scaled(c);
        Self::new(f, g)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn n(&self) -> usize {
        self.f.order()
    }

    pub fn m(&self) -> usize {
        self.g.order()
    }

    pub fn f(&self) -> &Tensor {
        &self.f
    }

    pub fn g(&self) -> &Tensor {
        &self.g
    }

    fn check_k(&self, k: usize) -> Result<()> {
        check_range("derivative order k", k, 1, self.n().min(self.m()))
    }

    fn require_same_order(&self) -> Result<()> {
        if self.n() != self.m() {
            return Err(Error::OrderMismatch {
                left: self.n(),
                right: self.m(),
            });
        }
        Ok(())
    }

    fn f_integral(&self) -> ChaosExpansion {
        ChaosExpansion::multiple_integral(self.f.clone()).expect("symmetric by construction")
    }

    fn g_integral(&self) -> ChaosExpansion {
        ChaosExpansion::multiple_integral(self.g.clone()).expect("symmetric by construction")
    }
}

/// JSON pair file: `{"dim", "n", "m", "f", "g"}`, with an optional seed for
/// generated pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairFile {
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub f: TensorFile,
    pub g: TensorFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PairFile {
    pub fn from_pair(pair: &MalliavinPair, seed: Option<u64>) -> Self {
        PairFile {
            dim: pair.dim(),
            n: pair.n(),
            m: pair.m(),
            f: TensorFile::from_tensor(pair.f()),
            g: TensorFile::from_tensor(pair.g()),
            seed,
        }
    }

    pub fn into_pair(self, symmetrize: bool) -> Result<MalliavinPair> {
        let declared = [
            ("f.dim", self.f.dim, self.dim),
            ("g.dim", self.g.dim, self.dim),
            ("f.order", self.f.order, self.n),
            ("g.order", self.g.order, self.m),
        ];
        for (what, got, want) in declared {
            if got != want {
                return Err(Error::Schema(format!(
                    "{what} is {got}, header says {want}"
                )));
            }
        }
        let f = self.f.into_tensor(symmetrize)?;
        let g = self.g.into_tensor(symmetrize)?;
        MalliavinPair::new(f, g).map_err(|e| Error::Schema(e.to_string()))
    }
}

/// Gram entries of `Λ^(k)` as chaos expansions.
#[derive(Clone, Debug, PartialEq)]
pub struct GramChaos {
    /// `‖D^(k)F‖²`
    pub norm_f: ChaosExpansion,
    /// `⟨D^(k)F, D^(k)G⟩`
    pub cross: ChaosExpansion,
    /// `‖D^(k)G‖²`
    pub norm_g: ChaosExpansion,
}

fn gram_sum(a: &HValuedChaos, b: &HValuedChaos) -> Result<ChaosExpansion> {
    let mut acc = ChaosExpansion::zero(a.dim());
    for (x, y) in a.entries().iter().zip(b.entries()) {
        acc = acc.add(&x.multiply(y)?)?;
    }
    Ok(acc)
}

pub fn gram_chaos(pair: &MalliavinPair, k: usize) -> Result<GramChaos> {
    pair.check_k(k)?;
    let df = pair.f_integral().derivative(k)?;
    let dg = pair.g_integral().derivative(k)?;
    Ok(GramChaos {
        norm_f: gram_sum(&df, &df)?,
        cross: gram_sum(&df, &dg)?,
        norm_g: gram_sum(&dg, &dg)?,
    })
}

/// `det Λ^(k) = ‖D^(k)F‖² ‖D^(k)G‖² - ⟨D^(k)F, D^(k)G⟩²` as a chaos sum.
pub fn det_lambda_symbolic(pair: &MalliavinPair, k: usize) -> Result<ChaosExpansion> {
    let gram = gram_chaos(pair, k)?;
    gram.norm_f
        .multiply(&gram.norm_g)?
        .sub(&gram.cross.multiply(&gram.cross)?)
}

/// Constant term of [`det_lambda_symbolic`].
///
/// Computed as `E[ac] - E[b²]` through the chaos isometry, which is the
/// order-0 coefficient of the full product without materializing the
/// high-order terms.
pub fn expected_det_symbolic(pair: &MalliavinPair, k: usize) -> Result<f64> {
    let gram = gram_chaos(pair, k)?;
    Ok(gram.norm_f.l2_inner(&gram.norm_g)? - gram.cross.l2_inner(&gram.cross)?)
}

/// Pointwise evaluator for `det Λ^(k)` written as a sum of squares,
///
/// `½ Σ_{i,l} (D_i F · D_l G - D_l F · D_i G)²`.
#[derive(Clone, Debug)]
pub struct SumOfSquares {
    df: HValuedChaos,
    dg: HValuedChaos,
}

impl SumOfSquares {
    pub fn new(pair: &MalliavinPair, k: usize) -> Result<Self> {
        pair.check_k(k)?;
        Ok(SumOfSquares {
            df: pair.f_integral().derivative(k)?,
            dg: pair.g_integral().derivative(k)?,
        })
    }

    fn gradients(&self, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if xi.len() != self.df.dim() {
            return Err(Error::DimensionMismatch {
                left: xi.len(),
                right: self.df.dim(),
            });
        }
        Ok((self.df.evaluate(xi)?, self.dg.evaluate(xi)?))
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        let (a, b) = self.gradients(xi)?;
        let mut acc = 0.0;
        for i in 0..a.len() {
            for l in (i + 1)..a.len() {
                let w = a[i] * b[l] - a[l] * b[i];
                acc += w * w;
            }
        }
        Ok(acc)
    }

    /// 2×2 determinant of the evaluated Gram entries; same polynomial as
    /// [`SumOfSquares::eval`] but not guaranteed nonnegative in floating point.
    pub fn eval_gram_det(&self, xi: &[f64]) -> Result<f64> {
        let (a, b) = self.gradients(xi)?;
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        Ok(dot(&a, &a) * dot(&b, &b) - dot(&a, &b).powi(2))
    }
}

pub fn sum_of_squares_eval(pair: &MalliavinPair, k: usize, xi: &[f64]) -> Result<f64> {
    SumOfSquares::new(pair, k)?.eval(xi)
}

/// Exact constants of the determinant expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CombinatorialCoeffs {
    /// `α_{k,r} = (n! m! / ((n-k-r)! (m-k-r)! r!))² (m+n-2k-2r)!`
    pub alpha: u128,
    /// `β_{k,r} = n!² m!² / ((n-k-r)! (m-k-r)! r!²)`
    pub beta: u128,
    /// `γ_{n,s} = (n!² / ((n-s)! s!))² n (n-2s)`
    pub gamma: i128,
}

impl CombinatorialCoeffs {
    pub fn alpha_f64(&self) -> f64 {
        to_f64(self.alpha)
    }

    pub fn beta_f64(&self) -> f64 {
        to_f64(self.beta)
    }

    pub fn gamma_f64(&self) -> f64 {
        self.gamma as f64
    }
}

pub fn alpha(n: usize, m: usize, k: usize, r: usize) -> Result<u128> {
    check_range("k + r", k + r, 1, n.min(m))?;
    let base = div_exact(
        product(
            &[falling_factorial(n, k + r)?, falling_factorial(m, k + r)?],
            "alpha",
        )?,
        factorial(r)?,
        "alpha",
    )?;
    product(&[base, base, factorial(m + n - 2 * k - 2 * r)?], "alpha")
}

pub fn beta(n: usize, m: usize, k: usize, r: usize) -> Result<u128> {
    check_range("k + r", k + r, 1, n.min(m))?;
    let rf = factorial(r)?;
    let left = div_exact(falling_factorial(n, k + r)?, rf, "beta")?;
    let right = div_exact(falling_factorial(m, k + r)?, rf, "beta")?;
    product(&[factorial(n)?, factorial(m)?, left, right], "beta")
}

pub fn gamma(n: usize, s: usize) -> Result<i128> {
    check_range("s", s, 0, n)?;
    let base = product(&[factorial(n)?, binomial(n, s)?], "gamma")?;
    let sq = product(&[base, base, n as u128], "gamma")?;
    let sq = i128::try_from(sq).map_err(|_| Error::Overflow("gamma"))?;
    sq.checked_mul(n as i128 - 2 * s as i128)
        .ok_or(Error::Overflow("gamma"))
}

pub fn combinatorial_coefficients(
    n: usize,
    m: usize,
    k: usize,
    r: usize,
    s: usize,
) -> Result<CombinatorialCoeffs> {
    check_range("k", k, 1, n.min(m))?;
    check_range("r", r, 0, (n - k).min(m - k))?;
    Ok(CombinatorialCoeffs {
        alpha: alpha(n, m, k, r)?,
        beta: beta(n, m, k, r)?,
        gamma: gamma(n, s)?,
    })
}

/// A value together with the sum of magnitudes of the summands it was
/// assembled from; the latter sets the floating-point noise floor.
#[derive(Clone, Copy, Debug, Default)]
struct Term {
    value: f64,
    scale: f64,
}

/// Contraction data shared by every `T_r^(k)` of one pair.
struct Contractions<'a> {
    pair: &'a MalliavinPair,
    /// `‖f ⊗_s g‖²` for `s = 0..=min(n, m)`
    norms: Vec<f64>,
    /// `(f ⊗_r g, g ⊗_r f)` for `r = 1..min(n, m)`, index `r - 1`
    blocks: Vec<(Tensor, Tensor)>,
}

impl<'a> Contractions<'a> {
    fn new(pair: &'a MalliavinPair) -> Result<Self> {
        let top = pair.n().min(pair.m());
        let mut norms = Vec::with_capacity(top + 1);
        norms.push(pair.f.norm_sq() * pair.g.norm_sq());
        for s in 1..=top {
            norms.push(pair.f.contract_unchecked(&pair.g, s)?.norm_sq());
        }
        let blocks = (1..top)
            .map(|r| {
                Ok((
                    pair.f.contract_unchecked(&pair.g, r)?,
                    pair.g.contract_unchecked(&pair.f, r)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Contractions {
            pair,
            norms,
            blocks,
        })
    }

    /// `(f ⊗_r g) ⊗̂_s (g ⊗_r f)` for `r ≥ 1`.
    fn hat(&self, r: usize, s: usize) -> f64 {
        let (a, b) = &self.blocks[r - 1];
        permuted_inner(a, b, &hat_axis_map(self.pair.n(), self.pair.m(), r, s))
    }

    fn t0(&self, k: usize) -> Result<Term> {
        let (n, m) = (self.pair.n(), self.pair.m());
        let coef = to_f64(beta(n, m, k, 0)?);
        let mut term = Term::default();
        for s in 0..=(n - k).min(m - k) {
            let c = coef * to_f64(binomial(m - k, s)? * binomial(n - k, s)?);
            let (hi, lo) = (self.norms[s], self.norms[s + k]);
            term.value += c * (hi - lo);
            term.scale += c * (hi.abs() + lo.abs());
        }
        Ok(term)
    }

    fn tr(&self, k: usize, r: usize) -> Result<Term> {
        let (n, m) = (self.pair.n(), self.pair.m());
        let coef = to_f64(beta(n, m, k, r)?);
        let mut term = Term::default();
        for s in 0..=(n - k - r).min(m - k - r) {
            let c = coef * to_f64(binomial(n - k - r, s)? * binomial(m - k - r, s)?);
            let (hi, lo) = (self.hat(r, s), self.hat(r, s + k));
            term.value += c * (hi - lo);
            term.scale += c * (hi.abs() + lo.abs());
        }
        Ok(term)
    }

    fn breakdown(&self, k: usize) -> Result<DetBreakdown> {
        self.pair.check_k(k)?;
        let t0 = self.t0(k)?;
        let top = (self.pair.n() - k).min(self.pair.m() - k);
        let tr = (1..=top)
            .map(|r| self.tr(k, r))
            .collect::<Result<Vec<_>>>()?;
        let remainder: f64 = tr.iter().map(|t| t.value).sum();
        Ok(DetBreakdown {
            k,
            t0: t0.value,
            tr: tr.iter().map(|t| t.value).collect(),
            remainder,
            closed_form: t0.value + remainder,
            symbolic: None,
            mc: None,
            scale: t0.scale + tr.iter().map(|t| t.scale).sum::<f64>(),
        })
    }
}

/// `T_0^(k) = m!² n!² / ((m-k)! (n-k)!) Σ_s C(m-k,s) C(n-k,s) (‖f ⊗_s g‖² - ‖f ⊗_{s+k} g‖²)`.
pub fn t0_term(pair: &MalliavinPair, k: usize) -> Result<f64> {
    pair.check_k(k)?;
    Ok(Contractions::new(pair)?.t0(k)?.value)
}

/// `T_r^(k)` for `r ≥ 1` from hat contractions:
/// `β_{k,r} Σ_s C(n-k-r,s) C(m-k-r,s) [(f⊗_r g)⊗̂_s(g⊗_r f) - (f⊗_r g)⊗̂_{s+k}(g⊗_r f)]`.
pub fn tr_term(pair: &MalliavinPair, k: usize, r: usize) -> Result<f64> {
    pair.check_k(k)?;
    check_range("r", r, 1, (pair.n() - k).min(pair.m() - k))?;
    Ok(Contractions::new(pair)?.tr(k, r)?.value)
}

/// `T_r^(k)` from its definition,
/// `½ α_{k,r} Σ_{i,l} ‖f_i ⊗̃_r g_l - f_l ⊗̃_r g_i‖²`, for `0 ≤ r`.
pub fn tr_term_direct(pair: &MalliavinPair, k: usize, r: usize) -> Result<f64> {
    pair.check_k(k)?;
    let (n, m, d) = (pair.n(), pair.m(), pair.dim());
    check_range("r", r, 0, (n - k).min(m - k))?;
    let coef = to_f64(alpha(n, m, k, r)?);
    let fs: Vec<Tensor> = MultiIndex::all(d, k)
        .map(|i| pair.f.slice_unchecked(&i))
        .collect();
    let gs: Vec<Tensor> = MultiIndex::all(d, k)
        .map(|i| pair.g.slice_unchecked(&i))
        .collect();
    let mut acc = 0.0;
    for i in 0..fs.len() {
        for l in (i + 1)..fs.len() {
            let a = fs[i].contract_unchecked(&gs[l], r)?.symmetrize();
            let b = fs[l].contract_unchecked(&gs[i], r)?.symmetrize();
            acc += a.sub(&b)?.norm_sq();
        }
    }
    // the i = l terms vanish and the sum is symmetric in (i, l)
    Ok(coef * acc)
}

/// Closed-form `E det Λ^(k)` with its term breakdown.
#[derive(Clone, Debug, Serialize)]
pub struct DetBreakdown {
    pub k: usize,
    pub t0: f64,
    /// `T_r^(k)` for `r = 1..=(n-k)∧(m-k)`
    pub tr: Vec<f64>,
    /// `R_{m,n,k} = Σ_r T_r^(k)`
    pub remainder: f64,
    pub closed_form: f64,
    pub symbolic: Option<f64>,
    pub mc: Option<Estimate>,
    /// Sum of the magnitudes of every summand in the closed form.
    #[serde(skip)]
    pub scale: f64,
}

impl DetBreakdown {
    pub fn with_symbolic(mut self, pair: &MalliavinPair) -> Result<Self> {
        self.symbolic = Some(expected_det_symbolic(pair, self.k)?);
        Ok(self)
    }

    pub fn with_mc(mut self, estimate: Estimate) -> Self {
        self.mc = Some(estimate);
        self
    }
}

pub fn expected_det_closed_form(pair: &MalliavinPair, k: usize) -> Result<DetBreakdown> {
    pair.check_k(k)?;
    Contractions::new(pair)?.breakdown(k)
}

/// Closed forms for every `k = 1..=min(n, m)`.
pub fn expected_det_all(pair: &MalliavinPair) -> Result<Vec<DetBreakdown>> {
    let ctx = Contractions::new(pair)?;
    (1..=pair.n().min(pair.m()))
        .map(|k| ctx.breakdown(k))
        .collect()
}

/// `det C = n!² (‖f‖² ‖g‖² - ⟨f, g⟩²)` for equal orders.
pub fn cov_det(pair: &MalliavinPair) -> Result<f64> {
    pair.require_same_order()?;
    let nf = to_f64(factorial(pair.n())?);
    let fg = pair.f.inner(&pair.g)?;
    Ok(nf * nf * (pair.f.norm_sq() * pair.g.norm_sq() - fg * fg))
}

/// Both sides of
/// `Σ_{s=2}^{⌊(n-1)/2⌋} n(n-2s)/s!² E det Λ^(s) + (n-1)² E det Λ^(1) ≥ n² det C`.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceInequality {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `E det Λ^(s)` for `s = 1..=max(1, ⌊(n-1)/2⌋)`
    pub edet: Vec<f64>,
    pub cov_det: f64,
}

impl CovarianceInequality {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// `c_n` such that `E det Λ^(1) ≥ c_n det C` follows directly, for the
/// orders where the left-hand side has no higher-`s` terms (`n ≤ 4`).
pub fn first_order_constant(n: usize) -> Option<f64> {
    (2..=4)
        .contains(&n)
        .then(|| (n * n) as f64 / ((n - 1) * (n - 1)) as f64)
}

/// `holds` allows `lhs` to fall short of `rhs` by `tol_rel · max(|lhs|, |rhs|)`.
pub fn covariance_inequality_check(
    pair: &MalliavinPair,
    tol_rel: f64,
) -> Result<CovarianceInequality> {
    pair.require_same_order()?;
    let n = pair.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "the covariance inequality needs n ≥ 2".into(),
        ));
    }
    let top = ((n - 1) / 2).max(1);
    let ctx = Contractions::new(pair)?;
    let edet = (1..=top)
        .map(|s| Ok(ctx.breakdown(s)?.closed_form))
        .collect::<Result<Vec<f64>>>()?;
    let mut lhs = ((n - 1) * (n - 1)) as f64 * edet[0];
    for s in 2..=(n - 1) / 2 {
        let sf = to_f64(factorial(s)?);
        lhs += (n * (n - 2 * s)) as f64 / (sf * sf) * edet[s - 1];
    }
    let det_c = cov_det(pair)?;
    let rhs = (n * n) as f64 * det_c;
    let slack = tol_rel * lhs.abs().max(rhs.abs());
    Ok(CovarianceInequality {
        n,
        lhs,
        rhs,
        holds: lhs >= rhs - slack,
        edet,
        cov_det: det_c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Degenerate,
    AbsolutelyContinuous,
}

#[derive(Clone, Debug, Serialize)]
pub struct DetEntry {
    pub k: usize,
    pub value: f64,
    /// Zero threshold for this `k`.
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub verdict: Verdict,
    pub cov_det: f64,
    pub tol_abs: f64,
    pub edet: Vec<DetEntry>,
    /// Whether every `E det Λ^(k)` agrees with the verdict (all zero for a
    /// degenerate pair, all positive otherwise).
    pub consistent: bool,
}

/// Default zero threshold for `det C`: `1e-10 · n!² ‖f‖² ‖g‖²`.
pub fn default_tol_abs(pair: &MalliavinPair) -> Result<f64> {
    let nf = to_f64(factorial(pair.n())?);
    Ok(1e-10 * nf * nf * pair.f.norm_sq() * pair.g.norm_sq())
}

/// Density verdict for equal orders: the law of `(F, G)` is degenerate iff
/// `det C ≤ tol_abs`. `E det Λ^(k)` carries an extra factor `(n!/(n-k)!)²`
/// relative to `det C`, and is compared against `tol_abs` scaled by it.
pub fn density_check(pair: &MalliavinPair, tol_abs: Option<f64>) -> Result<DensityReport> {
    pair.require_same_order()?;
    let tol_abs = match tol_abs {
        Some(t) => t,
        None => default_tol_abs(pair)?,
    };
    let det_c = cov_det(pair)?;
    let verdict = if det_c <= tol_abs {
        Verdict::Degenerate
    } else {
        Verdict::AbsolutelyContinuous
    };
    let n = pair.n();
    let edet = expected_det_all(pair)?
        .into_iter()
        .map(|b| {
            let lift = to_f64(falling_factorial(n, b.k)?);
            Ok(DetEntry {
                k: b.k,
                value: b.closed_form,
                threshold: tol_abs * lift * lift,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let consistent = match verdict {
        Verdict::Degenerate => edet.iter().all(|e| e.value <= e.threshold),
        Verdict::AbsolutelyContinuous => edet.iter().all(|e| e.value > e.threshold),
    };
    Ok(DensityReport {
        verdict,
        cov_det: det_c,
        tol_abs,
        edet,
        consistent,
    })
}
