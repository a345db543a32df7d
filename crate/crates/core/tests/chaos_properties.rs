mod common;

use chaoskit::mc::{estimate_moment, sample_gaussian};
use chaoskit::{hermite, ChaosExpansion, HValuedChaos, Tensor};
use common::{factorial, gaussian_moment, hermite_gram, hermite_monomials, rel_close};
use proptest::prelude::*;

fn sym(d: usize, n: usize, seed: u64) -> Tensor {
    Tensor::random_symmetric(d, n, seed).unwrap()
}

fn integral(d: usize, n: usize, seed: u64) -> ChaosExpansion {
    ChaosExpansion::multiple_integral(sym(d, n, seed)).unwrap()
}

/// A mixed expansion with every order up to `top`.
fn mixed(d: usize, top: usize, seed: u64) -> ChaosExpansion {
    ChaosExpansion::from_terms(d, (0..=top).map(|k| sym(d, k, seed.wrapping_add(k as u64))))
        .unwrap()
}

#[test]
fn hermite_recurrence_matches_monomials() {
    for n in 0..=10 {
        let coeffs = hermite_monomials(n);
        for x in [-2.5, -1.0, -0.3, 0.0, 0.7, 1.9] {
            let direct: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * f64::powi(x, i as i32))
                .sum();
            assert!(rel_close(hermite(n, x), direct, 1e-12), "He_{n}({x})");
        }
    }
}

#[test]
fn hermite_orthogonality_from_exact_moments() {
    for a in 0..=8 {
        for b in 0..=8 {
            let want = if a == b { factorial(a) } else { 0.0 };
            assert!((hermite_gram(a, b) - want).abs() < 1e-6, "({a},{b})");
        }
    }
    assert_eq!(gaussian_moment(4), 3.0);
    assert_eq!(gaussian_moment(6), 15.0);
}

#[test]
fn multiple_integral_of_product_basis_is_hermite_product() {
    // sym(e1^{⊗2} ⊗ e2) integrates to He_2(ξ1) He_1(ξ2)
    let f = Tensor::elementary(2, &[0, 0, 1]).unwrap().symmetrize();
    let x = ChaosExpansion::multiple_integral(f).unwrap();
    for xi in [[0.3, -1.2], [1.7, 0.4], [-0.9, 2.2]] {
        let want = (xi[0] * xi[0] - 1.0) * xi[1];
        assert!((x.evaluate(&xi).unwrap() - want).abs() < 1e-13);
    }
}

#[test]
fn second_moment_by_monte_carlo() {
    let (d, n) = (2, 3);
    let f = sym(d, n, 77);
    let x = ChaosExpansion::multiple_integral(f.clone()).unwrap();
    let target = factorial(n) * f.norm_sq();
    let est = estimate_moment(&x, 2, 200_000, 5).unwrap();
    assert!(est.covers(target, 5.0), "{est:?} vs {target}");
    let mean = estimate_moment(&x, 1, 200_000, 6).unwrap();
    assert!(mean.covers(0.0, 5.0), "{mean:?}");
}

#[test]
fn derivative_order_zero_is_rejected() {
    assert!(integral(2, 2, 1).derivative(0).is_err());
}

#[test]
fn divergence_needs_vector_valued_input() {
    let d2 = integral(2, 3, 1).derivative(2).unwrap();
    assert!(d2.divergence().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn isometry(d in 1usize..=3, n in 0usize..=4, m in 0usize..=4, seed in any::<u64>()) {
        let f = sym(d, n, seed);
        let g = sym(d, m, seed ^ 9);
        let x = ChaosExpansion::multiple_integral(f.clone()).unwrap();
        let y = ChaosExpansion::multiple_integral(g.clone()).unwrap();
        let want = if n == m { factorial(n) * f.inner(&g).unwrap() } else { 0.0 };
        let scale = factorial(n.max(m)) * f.norm() * g.norm();
        let via_product = x.multiply(&y).unwrap().expectation();
        let via_inner = x.l2_inner(&y).unwrap();
        prop_assert!((via_product - want).abs() <= 1e-10 * (1.0 + scale));
        prop_assert!((via_inner - want).abs() <= 1e-10 * (1.0 + scale));
    }

    #[test]
    fn product_is_pointwise(d in 1usize..=3, a in 0usize..=3, b in 0usize..=3, seed in any::<u64>()) {
        let x = mixed(d, a, seed);
        let y = mixed(d, b, seed ^ 0xabc);
        let xy = x.multiply(&y).unwrap();
        for i in 0..10 {
            let xi = sample_gaussian(d, seed, i);
            let lhs = xy.evaluate(&xi).unwrap();
            let rhs = x.evaluate(&xi).unwrap() * y.evaluate(&xi).unwrap();
            prop_assert!(rel_close(lhs, rhs, 1e-9), "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn derivative_is_the_gradient(d in 1usize..=3, n in 1usize..=4, seed in any::<u64>()) {
        let x = integral(d, n, seed);
        let grad = x.derivative(1).unwrap();
        let xi = sample_gaussian(d, seed, 0);
        let got = grad.evaluate(&xi).unwrap();
        let step = 1e-5;
        for j in 0..d {
            let mut hi = xi.clone();
            let mut lo = xi.clone();
            hi[j] += step;
            lo[j] -= step;
            let fd = (x.evaluate(&hi).unwrap() - x.evaluate(&lo).unwrap()) / (2.0 * step);
            prop_assert!((got[j] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "j={} {} vs {}", j, got[j], fd);
        }
    }

    #[test]
    fn iterated_derivative_is_repeated_gradient(d in 1usize..=3, n in 2usize..=4, seed in any::<u64>()) {
        // D^2 F evaluated pointwise equals the derivative of each D F entry
        let x = integral(d, n, seed);
        let d1 = x.derivative(1).unwrap();
        let d2 = x.derivative(2).unwrap();
        let xi = sample_gaussian(d, seed, 1);
        let hess = d2.evaluate(&xi).unwrap();
        for i in 0..d {
            let row = d1.entry(&[i]).unwrap().derivative(1).unwrap().evaluate(&xi).unwrap();
            for j in 0..d {
                prop_assert!(rel_close(hess[i * d + j], row[j], 1e-10));
            }
        }
    }

    #[test]
    fn divergence_of_derivative_is_number_operator(d in 1usize..=3, n in 1usize..=5, seed in any::<u64>()) {
        let f = sym(d, n, seed);
        let x = ChaosExpansion::multiple_integral(f.clone()).unwrap();
        let back = x.derivative(1).unwrap().divergence().unwrap();
        let want = f.scaled(n as f64);
        let got = back.term(n).unwrap();
        for (a, b) in got.coeffs().iter().zip(want.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        for (k, t) in back.terms() {
            if k != n {
                prop_assert!(t.max_abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn divergence_is_adjoint_of_derivative(d in 1usize..=3, n in 1usize..=3, seed in any::<u64>()) {
        // E⟨DF, u⟩ = E[F δ(u)] for u = Σ_j G_j e_j
        let x = integral(d, n, seed);
        let entries = (0..d)
            .map(|j| mixed(d, n - 1, seed.wrapping_add(100 + j as u64)))
            .collect();
        let u = HValuedChaos::new(d, 1, entries).unwrap();
        let dx = x.derivative(1).unwrap();
        let lhs: f64 = (0..d)
            .map(|j| dx.entries()[j].l2_inner(&u.entries()[j]).unwrap())
            .sum();
        let rhs = x.l2_inner(&u.divergence().unwrap()).unwrap();
        prop_assert!(rel_close(lhs, rhs, 1e-10), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn chaos_json_round_trip(d in 1usize..=3, top in 0usize..=3, seed in any::<u64>()) {
        let x = mixed(d, top, seed);
        let file = chaoskit::chaos::ChaosFile::from_chaos(&x);
        let text = serde_json::to_string(&file).unwrap();
        let back: chaoskit::chaos::ChaosFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.into_chaos(false).unwrap(), x);
    }
}
