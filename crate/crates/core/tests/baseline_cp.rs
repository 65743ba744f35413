use avgpower::baseline::{clopper_pearson, compare_lengths};
use avgpower::special::binom_pmf;
use avgpower::{build_decision_matrix, BetaPrior, BinomialModel, DecisionMatrix, TestConfig};

/// Binomial pmf by the multiplicative recurrence from `(1 - t)^n`,
/// reflected above one half so the start value does not underflow.
fn pmf_recurrence(n: u64, t: f64) -> Vec<f64> {
    if t > 0.5 {
        let mut p = pmf_recurrence(n, 1.0 - t);
        p.reverse();
        return p;
    }
    let mut p = vec![(1.0 - t).powi(n as i32)];
    for k in 1..=n {
        let prev = p[k as usize - 1];
        p.push(prev * (n - k + 1) as f64 / k as f64 * t / (1.0 - t));
    }
    p
}

/// Plain bisection for `P(X >= x) = level / 2` and `P(X <= x) = level / 2`.
fn cp_oracle(x: u64, n: u64, level: f64) -> (f64, f64) {
    let solve = |f: &dyn Fn(f64) -> f64| {
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let upper_tail = |t: f64| pmf_recurrence(n, t)[x as usize..].iter().sum::<f64>() - level / 2.0;
    let lower_tail = |t: f64| level / 2.0 - pmf_recurrence(n, t)[..=x as usize].iter().sum::<f64>();
    (solve(&upper_tail), solve(&lower_tail))
}

#[test]
fn central_interval_matches_oracle() {
    let m = BinomialModel::new(100).unwrap();
    let cp = clopper_pearson(50, &m, 0.05).unwrap();
    let (lo, hi) = cp_oracle(50, 100, 0.05);
    assert!((cp.lower - lo).abs() < 1e-6, "{} vs {lo}", cp.lower);
    assert!((cp.upper - hi).abs() < 1e-6, "{} vs {hi}", cp.upper);
    assert!((cp.lower - 0.3983).abs() < 1e-4 && (cp.upper - 0.6017).abs() < 1e-4);
    for x in [1, 7, 33, 80, 99] {
        let cp = clopper_pearson(x, &m, 0.1).unwrap();
        let (lo, hi) = cp_oracle(x, 100, 0.1);
        assert!(
            (cp.lower - lo).abs() < 1e-6 && (cp.upper - hi).abs() < 1e-6,
            "x={x}"
        );
    }
}

#[test]
fn coverage_holds_on_fine_grid() {
    let m = BinomialModel::new(100).unwrap();
    let intervals: Vec<_> = m
        .outcomes()
        .map(|x| clopper_pearson(x, &m, 0.05).unwrap())
        .collect();
    for k in 0..=2000 {
        let theta = k as f64 / 2000.0;
        let cov: f64 = intervals
            .iter()
            .filter(|cp| cp.contains(theta))
            .map(|cp| binom_pmf(cp.x, &m, theta).unwrap())
            .sum();
        assert!(cov >= 0.95 - 1e-12, "theta={theta}: {cov}");
    }
}

#[test]
fn endpoints_are_monotone_and_bounded() {
    let m = BinomialModel::new(100).unwrap();
    let intervals: Vec<_> = m
        .outcomes()
        .map(|x| clopper_pearson(x, &m, 0.05).unwrap())
        .collect();
    for w in intervals.windows(2) {
        assert!(w[0].lower <= w[1].lower && w[0].upper <= w[1].upper);
    }
    for cp in &intervals {
        assert!(0.0 <= cp.lower && cp.lower <= cp.upper && cp.upper <= 1.0);
    }
    assert_eq!(intervals[0].lower, 0.0);
    assert_eq!(intervals[100].upper, 1.0);
}

#[test]
fn proposed_intervals_are_not_longer_on_average() {
    let m = build_decision_matrix(&TestConfig::standard(BetaPrior::non_informative()));
    let cmp = compare_lengths(&m, 0.05).unwrap();
    assert_eq!(cmp.rows.len(), 101);
    assert!((cmp.grid_step - 0.002).abs() < 1e-12);
    assert!(
        cmp.proposed_within_grid_slack(),
        "{} vs {}",
        cmp.mean_proposed_length,
        cmp.mean_cp_length
    );
    assert!(cmp.mean_proposed_length <= cmp.mean_cp_length + 0.002);
}

#[test]
fn full_acceptance_spans_the_grid() {
    let cfg = TestConfig::standard(BetaPrior::non_informative());
    let m = DecisionMatrix::full_acceptance(&cfg);
    let cmp = compare_lengths(&m, 0.05).unwrap();
    for r in &cmp.rows {
        assert!((r.proposed_length - 0.996).abs() < 1e-12);
    }
}

#[test]
fn informative_central_interval_is_shorter_than_cp() {
    let m = build_decision_matrix(&TestConfig::standard(BetaPrior::informative()));
    let cmp = compare_lengths(&m, 0.05).unwrap();
    let row = &cmp.rows[50];
    assert!(
        row.proposed_length < row.cp.length(),
        "{} vs {}",
        row.proposed_length,
        row.cp.length()
    );
}

#[test]
fn comparison_csv_layout() {
    let m = build_decision_matrix(&TestConfig::standard(BetaPrior::non_informative()));
    let cmp = compare_lengths(&m, 0.05).unwrap();
    let mut buf = Vec::new();
    cmp.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,cp_lower,cp_upper,prop_lower,prop_upper");
    assert_eq!(lines.len(), 102);
    assert!(!text.contains('\r'));
    assert!(lines[51].starts_with("50,0.3983"));
}
