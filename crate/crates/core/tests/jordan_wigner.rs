mod common;

use common::{dagger, max_abs, JordanWigner};
use qslq::linalg::C64;
use qslq::verify::{cell_rng, random_adapted};
use qslq::{CliffordElement, CliffordSpace};

const TOL: f64 = 1e-12;

fn random(space: &CliffordSpace, seed: u64) -> CliffordElement {
    let mut rng = cell_rng(seed, space.modes(), 0, 90);
    space
        .element(random_adapted(&mut rng, space.dim(), space.modes()))
        .unwrap()
}

#[test]
fn generators_satisfy_car_as_matrices() {
    for n in 1..=4 {
        let jw = JordanWigner::new(n);
        let eye = qslq::linalg::Mat::eye(jw.dim());
        for i in 0..n {
            for j in 0..n {
                let anti = jw.gens[i].dot(&jw.gens[j]) + jw.gens[j].dot(&jw.gens[i]);
                let want = if i == j {
                    &eye * C64::new(2.0, 0.0)
                } else {
                    &eye * C64::new(0.0, 0.0)
                };
                assert!(max_abs(&(anti - want)) < TOL);
            }
        }
    }
}

#[test]
fn products_match_the_matrix_representation() {
    for n in 1..=4 {
        let space = CliffordSpace::new(n, 1.0 / n as f64).unwrap();
        let jw = JordanWigner::new(n);
        for s in 0..space.dim() {
            for t in 0..space.dim() {
                let ab = space.basis(s).mul(&space.basis(t)).unwrap();
                let err = max_abs(&(jw.rep(&ab) - jw.monomial(s).dot(&jw.monomial(t))));
                assert!(err < TOL, "N={n} S={s:#x} T={t:#x}: {err:e}");
            }
        }
        for seed in 0..5 {
            let a = random(&space, seed);
            let b = random(&space, seed + 100);
            let ab = a.mul(&b).unwrap();
            assert!(max_abs(&(jw.rep(&ab) - jw.rep(&a).dot(&jw.rep(&b)))) < TOL);
        }
    }
}

#[test]
fn state_adjoint_parity_and_inner_product_match() {
    for n in 1..=4 {
        let space = CliffordSpace::new(n, 0.25).unwrap();
        let jw = JordanWigner::new(n);
        for seed in 0..5 {
            let a = random(&space, seed);
            let b = random(&space, seed + 7);
            let (ra, rb) = (jw.rep(&a), jw.rep(&b));
            assert!((a.mean() - jw.trace_state(&ra)).norm() < TOL);
            assert!(max_abs(&(jw.rep(&a.adjoint()) - dagger(&ra))) < TOL);
            let conj = jw.parity.dot(&ra).dot(&jw.parity);
            assert!(max_abs(&(jw.rep(&a.parity()) - conj)) < TOL);
            let inner = jw.trace_state(&dagger(&ra).dot(&rb));
            assert!((a.inner(&b).unwrap() - inner).norm() < TOL);
        }
    }
}

#[test]
fn brownian_and_generators_match() {
    let n = 4;
    let dt = 0.25;
    let space = CliffordSpace::new(n, dt).unwrap();
    let jw = JordanWigner::new(n);
    for k in 0..=n {
        let w = jw.rep(&space.brownian(k).unwrap());
        let sq = w.dot(&w);
        let want = qslq::linalg::Mat::eye(jw.dim()) * C64::new(k as f64 * dt, 0.0);
        assert!(max_abs(&(sq - want)) < TOL);
    }
    for j in 1..=n {
        let g = jw.rep(&space.generator(j).unwrap());
        assert!(max_abs(&(g - &jw.gens[j - 1] * C64::new(dt.sqrt(), 0.0))) < TOL);
    }
}

#[test]
fn conditional_expectation_is_a_partial_trace() {
    for n in 1..=4 {
        let space = CliffordSpace::new(n, 1.0).unwrap();
        let jw = JordanWigner::new(n);
        let a = random(&space, 3);
        for k in 0..=n {
            let lib = jw.rep(&a.cond_expect(k).unwrap());
            let oracle = jw.cond_expect(&jw.rep(&a), k);
            assert!(max_abs(&(lib - oracle)) < TOL, "N={n} k={k}");
        }
    }
}

#[test]
fn left_multiplication_operator_matches() {
    use qslq::clifford::{mul_superop, Side};
    let space = CliffordSpace::new(3, 1.0 / 3.0).unwrap();
    let jw = JordanWigner::new(3);
    let b = random(&space, 11);
    let x = random(&space, 12);
    for side in [Side::Left, Side::Right] {
        let op = mul_superop(&b, side);
        let y = op.apply(&x).unwrap();
        let want = match side {
            Side::Left => jw.rep(&b).dot(&jw.rep(&x)),
            Side::Right => jw.rep(&x).dot(&jw.rep(&b)),
        };
        assert!(max_abs(&(jw.rep(&y) - want)) < TOL);
    }
}
