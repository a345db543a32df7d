//! Dense tensors over `R^d` with an orthonormal basis `e_0, ..., e_{d-1}`.
//!
//! A tensor of order `n` stores all `d^n` coefficients in row-major
//! multi-index order, so `coeffs[j_0 d^{n-1} + ... + j_{n-1}]` is the
//! coefficient of `e_{j_0} ⊗ ... ⊗ e_{j_{n-1}}`. Indices are 0-based: basis
//! vector `e_1` of the usual 1-based notation is index `0` here.
//!
//! Symmetric tensors are stored densely with all redundant copies. Whether a
//! tensor is symmetric is a property of its coefficients, checked on demand
//! with [`Tensor::is_symmetric`].

use std::fmt;
use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Relative tolerance used when checking that coefficients are invariant
/// under index permutations.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// A tuple of basis indices `(j_1, ..., j_k)`, each in `0..d`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        MultiIndex(indices)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    /// Decodes a row-major linear offset into a length-`k` index over `0..dim`.
    pub fn from_linear(dim: usize, k: usize, mut linear: usize) -> Self {
        let mut idx = vec![0; k];
        for slot in idx.iter_mut().rev() {
            *slot = linear % dim;
            linear /= dim;
        }
        MultiIndex(idx)
    }

    /// Row-major linear offset of this index over `0..dim`.
    pub fn linear(&self, dim: usize) -> Result<usize> {
        self.0.iter().try_fold(0usize, |acc, &j| {
            if j >= dim {
                Err(Error::IndexOutOfRange { index: j, dim })
            } else {
                Ok(acc * dim + j)
            }
        })
    }

    /// All `dim^k` indices of length `k` in row-major order.
    pub fn all(dim: usize, k: usize) -> impl Iterator<Item = MultiIndex> {
        (0..dim.pow(k as u32)).map(move |l| MultiIndex::from_linear(dim, k, l))
    }

    /// Concatenation `self ‖ other`.
    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex(v)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for MultiIndex {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

impl From<&[usize]> for MultiIndex {
    fn from(v: &[usize]) -> Self {
        MultiIndex(v.to_vec())
    }
}

/// Dense order-`n` coefficient array over a `d`-dimensional basis.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    Ok(())
}

impl Tensor {
    pub fn zeros(dim: usize, order: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Tensor {
            dim,
            order,
            coeffs: vec![0.0; dim.pow(order as u32)],
        })
    }

    /// Order-0 tensor holding a single scalar.
    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Tensor {
            dim,
            order: 0,
            coeffs: vec![value],
        })
    }

    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        let expected = dim.pow(order as u32);
        if coeffs.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "order-{order} tensor over dim {dim} needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Tensor { dim, order, coeffs })
    }

    /// Basis vector `e_i` (0-based).
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        Self::elementary(dim, &[i])
    }

    /// Elementary tensor `e_{j_1} ⊗ ... ⊗ e_{j_k}`.
    pub fn elementary(dim: usize, idx: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(dim, idx.len())?;
        let l = MultiIndex::from(idx).linear(dim)?;
        t.coeffs[l] = 1.0;
        Ok(t)
    }

    /// `d` iid standard normal coefficients per entry, then symmetrized.
    /// Deterministic in `seed`.
    pub fn random_symmetric(dim: usize, order: usize, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..dim.pow(order as u32))
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Tensor { dim, order, coeffs }.symmetrize())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order {
            return Err(Error::OrderMismatch {
                left: idx.len(),
                right: self.order,
            });
        }
        Ok(self.coeffs[MultiIndex::from(idx).linear(self.dim)?])
    }

    /// Value of an order-0 tensor.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.order == 0).then(|| self.coeffs[0])
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor {
            dim: self.dim,
            order: self.order,
            coeffs: self.coeffs.iter().map(|x| c * x).collect(),
        }
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.add_scaled_assign(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.add_scaled_assign(-1.0, other)?;
        Ok(out)
    }

    /// `self += c * other`
    pub fn add_scaled_assign(&mut self, c: f64, other: &Tensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(())
    }

    /// Largest deviation `|f[σ(j)] - f[j]|` over all entries, in absolute terms.
    pub fn symmetry_defect(&self) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        let canon = canonical_offsets(self.dim, self.order);
        canon
            .iter()
            .enumerate()
            .map(|(l, &c)| (self.coeffs[l] - self.coeffs[c]).abs())
            .fold(0.0, f64::max)
    }

    /// Permutation invariance up to [`SYMMETRY_TOL`] relative to the largest
    /// coefficient.
    pub fn is_symmetric(&self) -> bool {
        self.symmetry_defect() <= SYMMETRY_TOL * self.max_abs()
    }

    pub(crate) fn require_symmetric(&self, op: &'static str) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::NotSymmetric(op))
        }
    }

    /// `self ⊗ other`, of order `n + m`.
    pub fn tensor_product(&self, other: &Tensor) -> Result<Tensor> {
        self.contract_unchecked(other, 0)
    }

    /// Contraction of order `r`: the first `r` slots of `self` are summed
    /// against the first `r` slots of `other`,
    ///
    /// `(f ⊗_r g)[j, k] = Σ_i f[i, j] g[i, k]`,
    ///
    /// leaving the free slots of `self` followed by those of `other`.
    /// For `r > 0` both operands must be symmetric.
    pub fn contract(&self, other: &Tensor, r: usize) -> Result<Tensor> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        check_range("contraction order r", r, 0, self.order.min(other.order))?;
        if r > 0 {
            self.require_symmetric("contraction")?;
            other.require_symmetric("contraction")?;
        }
        self.contract_unchecked(other, r)
    }

    /// Contraction without the symmetry precondition. Shapes must already
    /// have been validated by the caller.
    pub(crate) fn contract_unchecked(&self, other: &Tensor, r: usize) -> Result<Tensor> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        check_range("contraction order r", r, 0, self.order.min(other.order))?;
        let d = self.dim;
        let shared = d.pow(r as u32);
        let fj = d.pow((self.order - r) as u32);
        let gk = d.pow((other.order - r) as u32);
        let mut out = vec![0.0; fj * gk];
        for i in 0..shared {
            let frow = &self.coeffs[i * fj..(i + 1) * fj];
            let grow = &other.coeffs[i * gk..(i + 1) * gk];
            for (j, &a) in frow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out[j * gk..(j + 1) * gk];
                for (o, &b) in dst.iter_mut().zip(grow) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            dim: d,
            order: self.order + other.order - 2 * r,
            coeffs: out,
        })
    }

    /// Symmetrization `(1/k!) Σ_σ f[σ(j)]`.
    ///
    /// Every entry is averaged over the distinct rearrangements of its index
    /// multiset, which equals the average over all `k!` permutations.
    pub fn symmetrize(&self) -> Tensor {
        if self.order < 2 {
            return self.clone();
        }
        let canon = canonical_offsets(self.dim, self.order);
        let mut sums = vec![0.0; self.coeffs.len()];
        let mut counts = vec![0u32; self.coeffs.len()];
        for (l, &c) in canon.iter().enumerate() {
            sums[c] += self.coeffs[l];
            counts[c] += 1;
        }
        let coeffs = canon.iter().map(|&c| sums[c] / counts[c] as f64).collect();
        Tensor {
            dim: self.dim,
            order: self.order,
            coeffs,
        }
    }

    /// Euclidean inner product of the coefficient arrays.
    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `f_{j_1..j_k} = f ⊗_k (e_{j_1} ⊗ ... ⊗ e_{j_k})`: the order-`(n-k)`
    /// tensor obtained by fixing the leading `k` indices.
    pub fn slice(&self, idx: &[usize]) -> Result<Tensor> {
        check_range("slice length", idx.len(), 0, self.order)?;
        MultiIndex::from(idx).linear(self.dim)?;
        self.require_symmetric("slice")?;
        Ok(self.slice_unchecked(idx))
    }

    /// Leading-index slice without the symmetry check; `idx` must be in range.
    pub(crate) fn slice_unchecked(&self, idx: &[usize]) -> Tensor {
        let rest = self.order - idx.len();
        let block = self.dim.pow(rest as u32);
        let start = idx.iter().fold(0, |acc, &j| acc * self.dim + j) * block;
        Tensor {
            dim: self.dim,
            order: rest,
            coeffs: self.coeffs[start..start + block].to_vec(),
        }
    }

    /// Tensor with axes rearranged so that output axis `a` is input axis
    /// `perm[a]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Tensor> {
        validate_permutation(perm, self.order)?;
        let d = self.dim;
        let strides = row_major_strides(d, self.order);
        let src_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
        let mut out = Vec::with_capacity(self.coeffs.len());
        for_each_offset(d, &src_strides, |src| out.push(self.coeffs[src]));
        Ok(Tensor {
            dim: d,
            order: self.order,
            coeffs: out,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_permutation(perm: &[usize], order: usize) -> Result<()> {
    let mut seen = vec![false; order];
    if perm.len() != order {
        return Err(Error::InvalidArgument(format!(
            "permutation of length {} for order {order}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= order || seen[p] {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

fn row_major_strides(dim: usize, order: usize) -> Vec<usize> {
    (0..order)
        .map(|a| dim.pow((order - 1 - a) as u32))
        .collect()
}

/// Walks all multi-indices over `0..dim` in row-major order, calling `visit`
/// with the offset `Σ_a idx[a] * strides[a]`.
fn for_each_offset(dim: usize, strides: &[usize], mut visit: impl FnMut(usize)) {
    let order = strides.len();
    let total = dim.pow(order as u32);
    let mut digits = vec![0usize; order];
    let mut offset = 0usize;
    for _ in 0..total {
        visit(offset);
        for a in (0..order).rev() {
            digits[a] += 1;
            offset += strides[a];
            if digits[a] < dim {
                break;
            }
            digits[a] = 0;
            offset -= dim * strides[a];
        }
    }
}

/// For every row-major offset, the offset of the sorted rearrangement of its
/// multi-index.
fn canonical_offsets(dim: usize, order: usize) -> Vec<usize> {
    let total = dim.pow(order as u32);
    let mut digits = vec![0usize; order];
    let mut sorted = vec![0usize; order];
    let mut out = Vec::with_capacity(total);
    for l in 0..total {
        let mut rest = l;
        for slot in digits.iter_mut().rev() {
            *slot = rest % dim;
            rest /= dim;
        }
        sorted.copy_from_slice(&digits);
        sorted.sort_unstable();
        out.push(sorted.iter().fold(0, |acc, &j| acc * dim + j));
    }
    out
}

/// `Σ_L a[L] · b[π(L)]`, where axis `x` of `a` is paired with axis
/// `axis_map[x]` of `b`.
pub(crate) fn permuted_inner(a: &Tensor, b: &Tensor, axis_map: &[usize]) -> f64 {
    debug_assert_eq!(a.order, b.order);
    let strides_b = row_major_strides(b.dim, b.order);
    let paired: Vec<usize> = axis_map.iter().map(|&x| strides_b[x]).collect();
    let mut acc = 0.0;
    let mut l = 0;
    for_each_offset(a.dim, &paired, |ob| {
        acc += a.coeffs[l] * b.coeffs[ob];
        l += 1;
    });
    acc
}

/// Pairing of the free axes of `A = f ⊗_r g` with those of `B = ℓ ⊗_r h`
/// used by [`hat_contract`]: `f` meets `ℓ` on `s` slots and `h` on the
/// remaining `n-r-s`; `g` meets `h` on `s` slots and `ℓ` on the remaining
/// `m-r-s`.
pub(crate) fn hat_axis_map(n: usize, m: usize, r: usize, s: usize) -> Vec<usize> {
    // A axes: [f: s | f: n-r-s | g: s | g: m-r-s]
    // B axes: [ℓ: s | ℓ: m-r-s | h: s | h: n-r-s]
    let (fa, fb, ga, gb) = (s, n - r - s, s, m - r - s);
    let mut map = Vec::with_capacity(n + m - 2 * r);
    map.extend(0..fa);
    map.extend((m - r + s)..(m - r + s + fb));
    map.extend((m - r)..(m - r + ga));
    map.extend(s..(s + gb));
    map
}

/// `(f ⊗_r g) ⊗̂_s (ℓ ⊗_r h)`: the scalar obtained by contracting `r` slots
/// between `f` and `g` and between `ℓ` and `h`, `s` slots between `f` and
/// `ℓ` and between `g` and `h`, `n-r-s` slots between `f` and `h`, and
/// `m-r-s` slots between `g` and `ℓ`.
///
/// `f`, `h` are symmetric of order `n`; `g`, `ℓ` symmetric of order `m`.
pub fn hat_contract(
    f: &Tensor,
    g: &Tensor,
    ell: &Tensor,
    h: &Tensor,
    r: usize,
    s: usize,
) -> Result<f64> {
    let dim = f.dim;
    for t in [g, ell, h] {
        if t.dim != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: t.dim,
            });
        }
    }
    let (n, m) = (f.order, g.order);
    if h.order != n {
        return Err(Error::OrderMismatch {
            left: n,
            right: h.order,
        });
    }
    if ell.order != m {
        return Err(Error::OrderMismatch {
            left: m,
            right: ell.order,
        });
    }
    check_range("r + s", r + s, 0, n.min(m))?;
    for t in [f, g, ell, h] {
        t.require_symmetric("hat contraction")?;
    }
    let a = f.contract_unchecked(g, r)?;
    let b = ell.contract_unchecked(h, r)?;
    Ok(permuted_inner(&a, &b, &hat_axis_map(n, m, r, s)))
}

/// One listed coefficient of the tensor file format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub index: Vec<usize>,
    pub value: f64,
}

/// JSON representation of a tensor; unlisted entries are zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorFile {
    pub dim: usize,
    pub order: usize,
    pub symmetric: bool,
    pub entries: Vec<TensorEntry>,
}

impl TensorFile {
    /// Lists every nonzero coefficient; `symmetric` records whether the
    /// tensor passes the symmetry check.
    pub fn from_tensor(t: &Tensor) -> Self {
        let entries = t
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(l, &value)| TensorEntry {
                index: MultiIndex::from_linear(t.dim, t.order, l).into_inner(),
                value,
            })
            .collect();
        TensorFile {
            dim: t.dim,
            order: t.order,
            symmetric: t.is_symmetric(),
            entries,
        }
    }

    /// Builds the tensor. A file marked symmetric must be symmetric; an
    /// unmarked file is symmetrized when `symmetrize` is set.
    pub fn into_tensor(self, symmetrize: bool) -> Result<Tensor> {
        let mut t =
            Tensor::zeros(self.dim, self.order).map_err(|e| Error::Schema(e.to_string()))?;
        for e in &self.entries {
            if e.index.len() != self.order {
                return Err(Error::Schema(format!(
                    "entry index {:?} has length {}, expected {}",
                    e.index,
                    e.index.len(),
                    self.order
                )));
            }
            let l = MultiIndex::from(e.index.as_slice())
                .linear(self.dim)
                .map_err(|err| Error::Schema(err.to_string()))?;
            t.coeffs[l] = e.value;
        }
        if self.symmetric {
            if !t.is_symmetric() {
                return Err(Error::Schema(
                    "tensor is marked symmetric but its coefficients are not".into(),
                ));
            }
            Ok(t)
        } else if symmetrize {
            Ok(t.symmetrize())
        } else {
            Ok(t)
        }
    }
}
