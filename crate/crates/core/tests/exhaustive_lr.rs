//! Both backtest statistics against likelihoods evaluated directly from
//! counts, over every indicator sequence of length up to 20.

use mmw_core::backtest::{christoffersen_test, kupiec_test};

fn ln_bernoulli(ones: f64, zeros: f64, p: f64) -> f64 {
    let term = |k: f64, q: f64| if k == 0.0 { 0.0 } else { k * q.ln() };
    term(ones, p) + term(zeros, 1.0 - p)
}

fn oracle_kupiec(n: usize, t: usize, alpha: f64) -> f64 {
    let (ones, zeros) = (n as f64, (t - n) as f64);
    let lr = -2.0 * (ln_bernoulli(ones, zeros, alpha) - ln_bernoulli(ones, zeros, ones / t as f64));
    lr.max(0.0)
}

fn oracle_christoffersen(c: [[usize; 2]; 2]) -> Option<f64> {
    let [[n00, n01], [n10, n11]] = c.map(|r| r.map(|v| v as f64));
    if n00 + n01 == 0.0 || n10 + n11 == 0.0 {
        return None;
    }
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let restricted = ln_bernoulli(n01 + n11, n00 + n10, pi);
    let free = ln_bernoulli(n01, n00, n01 / (n00 + n01)) + ln_bernoulli(n11, n10, n11 / (n10 + n11));
    Some((-2.0 * (restricted - free)).max(0.0))
}

#[test]
fn kupiec_matches_oracle_up_to_20() {
    for t in 1..=20usize {
        for n in 0..=t {
            for alpha in [0.001, 0.01, 0.05, 0.3] {
                let lr = kupiec_test(n, t, alpha).unwrap().statistic;
                let o = oracle_kupiec(n, t, alpha);
                assert!((lr - o).abs() <= 1e-9 * o.max(1.0), "T={t} N={n} alpha={alpha}: {lr} vs {o}");
            }
        }
    }
}

#[test]
fn christoffersen_matches_oracle_on_all_sequences_up_to_20() {
    let mut seq = Vec::with_capacity(20);
    for t in 2..=20usize {
        for bits in 0u32..(1 << t) {
            seq.clear();
            seq.extend((0..t).map(|k| ((bits >> k) & 1) as u8));
            let mut c = [[0usize; 2]; 2];
            for w in seq.windows(2) {
                c[w[0] as usize][w[1] as usize] += 1;
            }
            let got = christoffersen_test(&seq).unwrap().map(|r| r.statistic);
            match (got, oracle_christoffersen(c)) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{seq:?}: {a} vs {b}"),
                (None, None) => {}
                (a, b) => panic!("{seq:?}: applicability differs, {a:?} vs {b:?}"),
            }
        }
    }
}
