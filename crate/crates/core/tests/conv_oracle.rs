//! Weight-t classes of the rate-1/2 codes cross-checked against the
//! polynomial description of their duals: every dual sequence of a
//! noncatastrophic (2,1) code is a(D)·(g2(D), g1(D)) read backwards in time.

use std::collections::BTreeSet;

use blindconv::conv::{enumerate_classes, ConvCode, EquationClass, ParityCheck};

fn poly_mul(a: u64, b: u64) -> u64 {
    let mut r = 0;
    for i in 0..64 {
        if (a >> i) & 1 == 1 {
            r ^= b << i;
        }
    }
    r
}

fn to_mask(p: &[u8]) -> u64 {
    p.iter().enumerate().fold(0, |acc, (i, &c)| acc | ((c as u64) << i))
}

fn dual_classes(code: &ConvCode, t: usize, s_max: i64) -> BTreeSet<ParityCheck> {
    let g1 = to_mask(&code.generators()[0][0]);
    let g2 = to_mask(&code.generators()[0][1]);
    let max_deg = (s_max / 2 + 1) as u32;
    let mut out = BTreeSet::new();
    for a in (1u64..(1 << (max_deg + 1))).step_by(2) {
        let h1 = poly_mul(a, g2);
        let h2 = poly_mul(a, g1);
        if (h1.count_ones() + h2.count_ones()) as usize != t {
            continue;
        }
        let top = 63 - (h1 | h2).leading_zeros() as i64;
        let mut pos = Vec::new();
        for d in 0..=top {
            if (h1 >> d) & 1 == 1 {
                pos.push(2 * (top - d) + 1);
            }
            if (h2 >> d) & 1 == 1 {
                pos.push(2 * (top - d) + 2);
            }
        }
        let e = ParityCheck::new(pos).unwrap();
        if e.span() <= s_max {
            out.insert(EquationClass::from_check(&e, 2).representative);
        }
    }
    out
}

#[test]
fn classes_match_polynomial_duals() {
    for (name, t, s_max) in [("C1", 8, 30), ("C2", 6, 24), ("C3", 10, 36)] {
        let code = ConvCode::named(name).unwrap();
        let got: BTreeSet<ParityCheck> = enumerate_classes(&code, t, s_max, 60)
            .unwrap()
            .into_iter()
            .map(|c| c.representative)
            .collect();
        assert_eq!(got, dual_classes(&code, t, s_max as i64), "{name}");
    }
}

#[test]
fn class_counts_of_fixture_codes() {
    for (name, t, want) in [("C1", 8, 1), ("C2", 6, 5), ("C3", 10, 11)] {
        let code = ConvCode::named(name).unwrap();
        let classes = enumerate_classes(&code, t, 40, 60).unwrap();
        assert_eq!(classes.len(), want, "{name}: {classes:?}");
    }
}
