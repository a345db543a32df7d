//! Brute-force reference implementations used by the integration suites.
//! None of these share code paths with the library kernels they check.
#![allow(dead_code)]

use chaoskit::{MultiIndex, Tensor};
use itertools::Itertools;

/// `(f ⊗_r g)[j, k] = Σ_i f[i, j] g[i, k]` by explicit index enumeration.
pub fn contract_naive(f: &Tensor, g: &Tensor, r: usize) -> Tensor {
    let d = f.dim();
    let (n, m) = (f.order(), g.order());
    let out_order = n + m - 2 * r;
    let coeffs = MultiIndex::all(d, out_order)
        .map(|jk| {
            let (j, k) = jk.split_at(n - r);
            MultiIndex::all(d, r)
                .map(|i| {
                    let fi: Vec<usize> = i.iter().chain(j).copied().collect();
                    let gi: Vec<usize> = i.iter().chain(k).copied().collect();
                    f.get(&fi).unwrap() * g.get(&gi).unwrap()
                })
                .sum()
        })
        .collect();
    Tensor::from_coeffs(d, out_order, coeffs).unwrap()
}

/// `(1/k!) Σ_σ f[σ(j)]` over all `k!` permutations.
pub fn symmetrize_naive(f: &Tensor) -> Tensor {
    let k = f.order();
    let d = f.dim();
    let perms: Vec<Vec<usize>> = (0..k).permutations(k).collect();
    let count = perms.len() as f64;
    let coeffs = MultiIndex::all(d, k)
        .map(|j| {
            perms
                .iter()
                .map(|p| {
                    let pj: Vec<usize> = p.iter().map(|&a| j[a]).collect();
                    f.get(&pj).unwrap()
                })
                .sum::<f64>()
                / count
        })
        .collect();
    Tensor::from_coeffs(d, k, coeffs).unwrap()
}

/// `(f ⊗_r g) ⊗̂_s (ℓ ⊗_r h)` as one sum over all `n + m` index variables:
/// `f[a, c, p] g[a, e, q] ℓ[b, c, q] h[b, e, p]` with `|a| = |b| = r`,
/// `|c| = |e| = s`, `|p| = n-r-s`, `|q| = m-r-s`.
pub fn hat_brute(f: &Tensor, g: &Tensor, ell: &Tensor, h: &Tensor, r: usize, s: usize) -> f64 {
    let d = f.dim();
    let (n, m) = (f.order(), g.order());
    let (p_len, q_len) = (n - r - s, m - r - s);
    let total = 2 * r + 2 * s + p_len + q_len;
    let mut acc = 0.0;
    for vars in MultiIndex::all(d, total) {
        let mut it = vars.iter().copied();
        let mut take = |len: usize| -> Vec<usize> { (&mut it).take(len).collect() };
        let a = take(r);
        let b = take(r);
        let c = take(s);
        let e = take(s);
        let p = take(p_len);
        let q = take(q_len);
        let cat = |xs: &[&[usize]]| -> Vec<usize> { xs.concat() };
        acc += f.get(&cat(&[&a, &c, &p])).unwrap()
            * g.get(&cat(&[&a, &e, &q])).unwrap()
            * ell.get(&cat(&[&b, &c, &q])).unwrap()
            * h.get(&cat(&[&b, &e, &p])).unwrap();
    }
    acc
}

/// Monomial coefficients of `He_n`, lowest degree first.
pub fn hermite_monomials(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `E[x^k]` for a standard normal: `(k-1)!!` for even `k`, zero otherwise.
pub fn gaussian_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|x| x as f64).product()
}

/// `E[He_a(x) He_b(x)]` from monomial expansions and exact moments.
pub fn hermite_gram(a: usize, b: usize) -> f64 {
    let (pa, pb) = (hermite_monomials(a), hermite_monomials(b));
    let mut acc = 0.0;
    for (i, x) in pa.iter().enumerate() {
        for (j, y) in pb.iter().enumerate() {
            acc += x * y * gaussian_moment(i + j);
        }
    }
    acc
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Largest absolute entry difference.
pub fn max_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.order(), b.order());
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `|a - b| ≤ tol · scale`
pub fn within(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale
}

/// `|a - b| ≤ tol · max(1, |a|, |b|)`
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// SplitMix-derived seed for trial `t` of a named suite, so every failure
/// can be replayed from the printed seed alone.
pub fn trial_seed(base: u64, t: u64) -> u64 {
    chaoskit::derive_seed(base, t)
}

fn hermite_at(n: usize, x: f64) -> f64 {
    hermite_monomials(n)
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * x + c)
}

/// Nodes and weights of the `q`-point Gauss rule for the standard normal
/// density: roots of `He_q` by sign-change bisection, weights
/// `q! / (q² He_{q-1}(x)²)`.
pub fn gauss_hermite(q: usize) -> Vec<(f64, f64)> {
    let bound = 2.0 * (q as f64).sqrt() + 2.0;
    let steps = 4000 * q;
    let h = 2.0 * bound / steps as f64;
    let mut nodes = Vec::with_capacity(q);
    let mut x0 = -bound;
    let mut y0 = hermite_at(q, x0);
    for i in 1..=steps {
        let x1 = -bound + i as f64 * h;
        let y1 = hermite_at(q, x1);
        if y0 == 0.0 {
            nodes.push(x0);
        } else if y0 * y1 < 0.0 {
            let (mut lo, mut hi) = (x0, x1);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hermite_at(q, lo) * hermite_at(q, mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        x0 = x1;
        y0 = y1;
    }
    assert_eq!(nodes.len(), q, "root count for He_{q}");
    let qf = factorial(q);
    nodes
        .into_iter()
        .map(|x| {
            let p = hermite_at(q - 1, x);
            (x, qf / ((q * q) as f64 * p * p))
        })
        .collect()
}

/// `I_p(h)(ξ) = Σ_j h[j] Π_i He_{#i in j}(ξ_i)` by enumerating every index.
pub fn eval_integral(h: &Tensor, xi: &[f64]) -> f64 {
    let d = h.dim();
    MultiIndex::all(d, h.order())
        .map(|j| {
            let mut counts = vec![0usize; d];
            for &a in j.iter() {
                counts[a] += 1;
            }
            let w: f64 = counts
                .iter()
                .zip(xi)
                .map(|(&c, &x)| hermite_at(c, x))
                .product();
            h.get(&j).unwrap() * w
        })
        .sum()
}

/// Entries of `D^k I_n(f)` at `ξ`: `n!/(n-k)! I_{n-k}(f[j, ·])`.
pub fn derivative_at(f: &Tensor, k: usize, xi: &[f64]) -> Vec<f64> {
    let d = f.dim();
    let n = f.order();
    let c = factorial(n) / factorial(n - k);
    MultiIndex::all(d, k)
        .map(|j| {
            let rest = n - k;
            let coeffs = MultiIndex::all(d, rest)
                .map(|t| {
                    let full: Vec<usize> = j.iter().chain(t.iter()).copied().collect();
                    f.get(&full).unwrap()
                })
                .collect();
            c * eval_integral(&Tensor::from_coeffs(d, rest, coeffs).unwrap(), xi)
        })
        .collect()
}

/// `‖D^k F‖² ‖D^k G‖² - ⟨D^k F, D^k G⟩²` at `ξ`.
pub fn det_lambda_at(f: &Tensor, g: &Tensor, k: usize, xi: &[f64]) -> f64 {
    let a = derivative_at(f, k, xi);
    let b = derivative_at(g, k, xi);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    dot(&a, &a) * dot(&b, &b) - dot(&a, &b).powi(2)
}

/// `E det Λ^(k)` by tensor-product Gauss quadrature, exact for the
/// polynomial degree involved.
pub fn expected_det_quadrature(f: &Tensor, g: &Tensor, k: usize) -> f64 {
    let d = f.dim();
    let q = f.order() + g.order() - 2 * k + 1;
    let rule = gauss_hermite(q);
    let mut acc = 0.0;
    for idx in MultiIndex::all(q, d) {
        let xi: Vec<f64> = idx.iter().map(|&i| rule[i].0).collect();
        let w: f64 = idx.iter().map(|&i| rule[i].1).product();
        acc += w * det_lambda_at(f, g, k, &xi);
    }
    acc
}
