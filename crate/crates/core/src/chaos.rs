//! Random variables in a finite sum of Wiener chaoses.
//!
//! With `H = R^d` and orthonormal basis `e_0..e_{d-1}`, the Gaussians
//! `ξ_i = W(e_i)` are iid standard normal and the multiple integral
//! `I_k(f)` of a symmetric order-`k` tensor is the polynomial
//!
//! `Σ_j f[j] Π_i He_{m_i(j)}(ξ_i)`,
//!
//! where `m_i(j)` counts the occurrences of `i` in the multi-index `j` and
//! `He` are the probabilists' Hermite polynomials. A [`ChaosExpansion`]
//! stores `F = Σ_k I_k(f_k)` as a map from order to symmetric tensor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{factorial, falling_factorial, product_formula_weight, to_f64};
use crate::error::{Error, Result};
use crate::tensor::{MultiIndex, Tensor, TensorFile};

/// Probabilists' Hermite polynomial `He_n(x)`:
/// `He_0 = 1`, `He_1 = x`, `He_{k+1} = x He_k - k He_{k-1}`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x), ..., He_max(x)`.
fn hermite_table(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for k in 1..max {
        out.push(x * out[k] - k as f64 * out[k - 1]);
    }
    out
}

/// Finite chaos sum `Σ_k I_k(f_k)`; the order-0 term is the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosExpansion {
    dim: usize,
    terms: BTreeMap<usize, Tensor>,
}

impl ChaosExpansion {
    pub fn zero(dim: usize) -> Self {
        ChaosExpansion {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        let mut out = Self::zero(dim);
        out.terms.insert(0, Tensor::scalar(dim, c)?);
        Ok(out)
    }

    /// `I_n(f)` for a symmetric tensor `f`.
    pub fn multiple_integral(f: Tensor) -> Result<Self> {
        f.require_symmetric("multiple integral")?;
        let mut out = Self::zero(f.dim());
        out.terms.insert(f.order(), f);
        Ok(out)
    }

    /// Sum of `I_k(f_k)` over the given tensors; repeated orders add up.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = Tensor>) -> Result<Self> {
        let mut out = Self::zero(dim);
        for t in terms {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: t.dim(),
                });
            }
            t.require_symmetric("chaos term")?;
            out.accumulate(1.0, &t);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn term(&self, order: usize) -> Option<&Tensor> {
        self.terms.get(&order)
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &Tensor)> {
        self.terms.iter().map(|(&k, t)| (k, t))
    }

    pub fn max_order(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    /// `self += c * I_k(t)` for an already symmetric `t` of matching dim.
    fn accumulate(&mut self, c: f64, t: &Tensor) {
        match self.terms.get_mut(&t.order()) {
            Some(existing) => existing
                .add_scaled_assign(c, t)
                .expect("accumulate: shapes agree by construction"),
            None => {
                self.terms.insert(t.order(), t.scaled(c));
            }
        }
    }

    fn check_dim(&self, other: &ChaosExpansion) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &ChaosExpansion) -> Result<ChaosExpansion> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for t in other.terms.values() {
            out.accumulate(1.0, t);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ChaosExpansion) -> Result<ChaosExpansion> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for t in other.terms.values() {
            out.accumulate(-1.0, t);
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> ChaosExpansion {
        if c == 0.0 {
            return ChaosExpansion::zero(self.dim);
        }
        ChaosExpansion {
            dim: self.dim,
            terms: self.terms.iter().map(|(&k, t)| (k, t.scaled(c))).collect(),
        }
    }

    /// Product via `I_n(f) I_m(g) = Σ_r r! C(m,r) C(n,r) I_{n+m-2r}(f ⊗̃_r g)`,
    /// extended bilinearly. All orders up to `n + m` are kept.
    pub fn multiply(&self, other: &ChaosExpansion) -> Result<ChaosExpansion> {
        self.check_dim(other)?;
        let mut out = ChaosExpansion::zero(self.dim);
        for (&n, f) in &self.terms {
            for (&m, g) in &other.terms {
                for r in 0..=n.min(m) {
                    let weight = to_f64(product_formula_weight(n, m, r)?);
                    let term = f.contract_unchecked(g, r)?.symmetrize();
                    out.accumulate(weight, &term);
                }
            }
        }
        Ok(out)
    }

    /// `E[F]`, the order-0 coefficient.
    pub fn expectation(&self) -> f64 {
        self.terms
            .get(&0)
            .and_then(Tensor::as_scalar)
            .unwrap_or(0.0)
    }

    /// `E[FG] = Σ_k k! ⟨f_k, g_k⟩`.
    pub fn l2_inner(&self, other: &ChaosExpansion) -> Result<f64> {
        self.check_dim(other)?;
        let mut acc = 0.0;
        for (&k, f) in &self.terms {
            if let Some(g) = other.terms.get(&k) {
                acc += to_f64(factorial(k)?) * f.inner(g)?;
            }
        }
        Ok(acc)
    }

    /// Iterated Malliavin derivative `D^(k) F`. The entry at `j` is
    /// `Σ_n n!/(n-k)! I_{n-k}(f_n[j, ·])` over stored orders `n ≥ k`.
    pub fn derivative(&self, k: usize) -> Result<HValuedChaos> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "derivative order must be at least 1".into(),
            ));
        }
        let d = self.dim;
        let mut weights = Vec::new();
        for &n in self.terms.keys().filter(|&&n| n >= k) {
            weights.push((n, to_f64(falling_factorial(n, k)?)));
        }
        let entries = MultiIndex::all(d, k)
            .map(|j| {
                let mut e = ChaosExpansion::zero(d);
                for &(n, w) in &weights {
                    e.accumulate(w, &self.terms[&n].slice_unchecked(&j));
                }
                e
            })
            .collect();
        Ok(HValuedChaos {
            dim: d,
            tensor_order: k,
            entries,
        })
    }

    /// Value of the polynomial `F(ξ)`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: xi.len(),
                right: self.dim,
            });
        }
        let max = self.max_order().unwrap_or(0);
        let table: Vec<Vec<f64>> = xi.iter().map(|&x| hermite_table(max, x)).collect();
        Ok(self.evaluate_with_table(&table))
    }

    /// Evaluation against precomputed `He_p(ξ_i)` values, `table[i][p]`.
    pub(crate) fn evaluate_with_table(&self, table: &[Vec<f64>]) -> f64 {
        let d = self.dim;
        let mut total = 0.0;
        let mut counts = vec![0usize; d];
        for (&k, t) in &self.terms {
            if k == 0 {
                total += t.coeffs()[0];
                continue;
            }
            let mut digits = vec![0usize; k];
            counts.iter_mut().for_each(|c| *c = 0);
            counts[0] = k;
            for &c in t.coeffs() {
                if c != 0.0 {
                    let basis: f64 = counts
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| table[i][p])
                        .product();
                    total += c * basis;
                }
                // next multi-index, keeping multiplicities in sync
                for a in (0..k).rev() {
                    counts[digits[a]] -= 1;
                    digits[a] += 1;
                    if digits[a] < d {
                        counts[digits[a]] += 1;
                        break;
                    }
                    digits[a] = 0;
                    counts[0] += 1;
                }
            }
        }
        total
    }
}

/// `H^{⊗k}`-valued chaos element: one [`ChaosExpansion`] per multi-index of
/// length `k`, stored in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct HValuedChaos {
    dim: usize,
    tensor_order: usize,
    entries: Vec<ChaosExpansion>,
}

impl HValuedChaos {
    pub fn new(dim: usize, tensor_order: usize, entries: Vec<ChaosExpansion>) -> Result<Self> {
        let expected = dim.pow(tensor_order as u32);
        if entries.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{expected} entries expected, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|e| e.dim != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.dim,
            });
        }
        Ok(HValuedChaos {
            dim,
            tensor_order,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tensor_order(&self) -> usize {
        self.tensor_order
    }

    pub fn entries(&self) -> &[ChaosExpansion] {
        &self.entries
    }

    pub fn entry(&self, idx: &[usize]) -> Result<&ChaosExpansion> {
        if idx.len() != self.tensor_order {
            return Err(Error::OrderMismatch {
                left: idx.len(),
                right: self.tensor_order,
            });
        }
        Ok(&self.entries[MultiIndex::from(idx).linear(self.dim)?])
    }

    /// Values of every entry at `ξ`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: xi.len(),
                right: self.dim,
            });
        }
        let table = self.hermite_table(xi);
        Ok(self
            .entries
            .iter()
            .map(|e| e.evaluate_with_table(&table))
            .collect())
    }

    pub(crate) fn hermite_table(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        let max = self
            .entries
            .iter()
            .filter_map(ChaosExpansion::max_order)
            .max()
            .unwrap_or(0);
        xi.iter().map(|&x| hermite_table(max, x)).collect()
    }

    /// Divergence of an `H`-valued field `u_j = Σ_m I_m(g_j^(m))`:
    /// `δ(u) = Σ_m I_{m+1}(sym(Σ_j g_j^(m) ⊗ e_j))`.
    pub fn divergence(&self) -> Result<ChaosExpansion> {
        if self.tensor_order != 1 {
            return Err(Error::InvalidArgument(format!(
                "divergence is implemented for H-valued fields only, got tensor order {}",
                self.tensor_order
            )));
        }
        let d = self.dim;
        let mut orders: Vec<usize> = self
            .entries
            .iter()
            .flat_map(|e| e.terms.keys().copied())
            .collect();
        orders.sort_unstable();
        orders.dedup();

        let mut out = ChaosExpansion::zero(d);
        for m in orders {
            let block = d.pow(m as u32);
            let mut coeffs = vec![0.0; block * d];
            for (j, entry) in self.entries.iter().enumerate() {
                if let Some(g) = entry.terms.get(&m) {
                    for (a, &v) in g.coeffs().iter().enumerate() {
                        coeffs[a * d + j] = v;
                    }
                }
            }
            let t = Tensor::from_coeffs(d, m + 1, coeffs)?.symmetrize();
            out.accumulate(1.0, &t);
        }
        Ok(out)
    }
}

/// One term of the chaos file format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub order: usize,
    pub tensor: TensorFile,
}

/// JSON representation of a [`ChaosExpansion`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosFile {
    pub dim: usize,
    pub terms: Vec<ChaosTerm>,
}

impl ChaosFile {
    pub fn from_chaos(c: &ChaosExpansion) -> Self {
        ChaosFile {
            dim: c.dim,
            terms: c
                .terms
                .iter()
                .map(|(&order, t)| ChaosTerm {
                    order,
                    tensor: TensorFile::from_tensor(t),
                })
                .collect(),
        }
    }

    pub fn into_chaos(self, symmetrize: bool) -> Result<ChaosExpansion> {
        let mut tensors = Vec::with_capacity(self.terms.len());
        for term in self.terms {
            if term.tensor.order != term.order || term.tensor.dim != self.dim {
                return Err(Error::Schema(format!(
                    "term declared as order {} carries a tensor of order {} over dim {}",
                    term.order, term.tensor.order, term.tensor.dim
                )));
            }
            let t = term.tensor.into_tensor(symmetrize)?;
            if !t.is_symmetric() {
                return Err(Error::Schema(format!(
                    "order-{} chaos term is not symmetric",
                    term.order
                )));
            }
            tensors.push(t);
        }
        ChaosExpansion::from_terms(self.dim, tensors)
    }
}
