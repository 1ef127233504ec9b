mod common;

use common::{simpson_oracle, FROZEN_BF10};
use voicecue_core::analysis::{jzs_bf10, DEFAULT_R_SCALE};

#[test]
fn bf10_matches_arbitrary_precision_values() {
    for (t, n1, n2, want) in FROZEN_BF10 {
        let got = jzs_bf10(t, n1, n2, DEFAULT_R_SCALE).unwrap().bf10;
        assert!(((got - want) / want).abs() < 1e-6, "t={t} n1={n1} n2={n2:?}: {got} vs {want}");
    }
}

#[test]
fn bf10_matches_simpson_oracle() {
    for (t, n1, n2, frozen) in FROZEN_BF10 {
        let oracle = simpson_oracle(t, n1, n2, DEFAULT_R_SCALE);
        // the oracle itself agrees with the frozen values
        assert!(((oracle - frozen) / frozen).abs() < 1e-8, "oracle {oracle} vs {frozen}");
        let got = jzs_bf10(t, n1, n2, DEFAULT_R_SCALE).unwrap().bf10;
        assert!(((got - oracle) / oracle).abs() < 1e-6);
    }
}

#[test]
fn bf10_increases_with_abs_t_and_is_continuous() {
    for n in [5, 10, 28, 100] {
        let mut prev = 0.0;
        for k in 0..=32 {
            let t = k as f64 * 0.25;
            let bf = jzs_bf10(t, n, None, DEFAULT_R_SCALE).unwrap().bf10;
            assert!(bf > prev, "n={n} t={t}");
            let near = jzs_bf10(t + 1e-6, n, None, DEFAULT_R_SCALE).unwrap().bf10;
            assert!(((near - bf) / bf).abs() < 1e-4, "jump at n={n} t={t}");
            prev = bf;
        }
    }
    let b4 = jzs_bf10(4.0, 28, None, DEFAULT_R_SCALE).unwrap().bf10;
    let b2 = jzs_bf10(2.0, 28, None, DEFAULT_R_SCALE).unwrap().bf10;
    assert!(b4 > b2);
}

#[test]
fn reciprocal_identity_everywhere() {
    for (t, n1, n2, _) in FROZEN_BF10 {
        let r = jzs_bf10(t, n1, n2, DEFAULT_R_SCALE).unwrap();
        assert_eq!(r.bf01, 1.0 / r.bf10);
        assert!((r.bf01 * r.bf10 - 1.0).abs() <= 2.0 * f64::EPSILON);
    }
}
