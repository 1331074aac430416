use misinfo_core::bias::{bootstrap_credibility, mcc, ConfusionMatrix, SIGNIFICANCE};

/// Every way of spreading `n` responses over four cells, with its
/// multinomial probability under the observed cell shares of `cm`.
fn outcomes(cm: &ConfusionMatrix) -> Vec<(ConfusionMatrix, f64)> {
    let n = cm.total();
    let shares = cm.cells().map(|c| c as f64 / n as f64);
    let fact = |k: u64| (1..=k).product::<u64>() as f64;
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                let d = n - a - b - c;
                let cells = [a, b, c, d];
                let mut p = fact(n);
                for (k, &x) in cells.iter().enumerate() {
                    p *= shares[k].powi(x as i32) / fact(x);
                }
                out.push((ConfusionMatrix::from_cells(cells), p));
            }
        }
    }
    out
}

/// Exact probability that a resample of `a` scores above one of `b`,
/// ties counted 1/2.
fn exact_p_a_exceeds_b(a: &ConfusionMatrix, b: &ConfusionMatrix) -> f64 {
    let oa = outcomes(a);
    let ob = outcomes(b);
    let mut p = 0.0;
    for (x, px) in &oa {
        for (y, py) in &ob {
            let (mx, my) = (mcc(x), mcc(y));
            p += px * py * if mx > my { 1.0 } else if mx == my { 0.5 } else { 0.0 };
        }
    }
    p
}

#[test]
fn enumeration_has_35_outcomes() {
    let o = outcomes(&ConfusionMatrix::new(1, 1, 1, 1));
    assert_eq!(o.len(), 35);
    assert!((o.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn tiny_matrices_match_exhaustive_enumeration() {
    let pairs = [
        (ConfusionMatrix::new(2, 0, 1, 1), ConfusionMatrix::new(1, 1, 1, 1)),
        (ConfusionMatrix::new(1, 1, 0, 2), ConfusionMatrix::new(0, 2, 1, 1)),
        (ConfusionMatrix::new(3, 0, 0, 1), ConfusionMatrix::new(1, 2, 1, 0)),
    ];
    for (seed, (a, b)) in pairs.iter().enumerate() {
        let exact = exact_p_a_exceeds_b(a, b);
        let boot = bootstrap_credibility(a, b, 100_000, seed as u64).unwrap();
        assert!(
            (boot.p_a_exceeds_b - exact).abs() < 0.01,
            "{a:?} vs {b:?}: bootstrap {} exact {exact}",
            boot.p_a_exceeds_b
        );
        let oriented = if mcc(a) >= mcc(b) { exact } else { 1.0 - exact };
        assert!((boot.credibility - oriented).abs() < 0.01);
    }
}

#[test]
fn identical_and_separated_matrices() {
    let cm = ConfusionMatrix::new(547, 1429, 547, 1509);
    let same = bootstrap_credibility(&cm, &cm, 10_000, 3).unwrap();
    assert!((same.credibility - 0.5).abs() <= 0.02, "{}", same.credibility);
    assert!(!same.significant);

    let good = ConfusionMatrix::new(1000, 0, 0, 1000);
    let bad = ConfusionMatrix::new(0, 1000, 1000, 0);
    let sep = bootstrap_credibility(&good, &bad, 10_000, 4).unwrap();
    assert!(sep.credibility >= 0.999);
    assert!(sep.significant);
    assert_eq!(sep.significant, sep.credibility >= SIGNIFICANCE);
    let rev = bootstrap_credibility(&bad, &good, 10_000, 4).unwrap();
    assert!(rev.credibility >= 0.999);
    assert!(rev.p_a_exceeds_b <= 0.001);
}
