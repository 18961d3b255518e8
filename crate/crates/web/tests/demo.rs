use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use walkerbell_web::{sampled_chsh_value, singlet_chsh_value, BathDemo};

#[test]
fn exact_chsh_reaches_two_root_two() {
    let r = singlet_chsh_value(0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4).unwrap();
    assert!((r["s_value"].as_f64().unwrap().abs() - 2.0 * SQRT_2).abs() < 1e-10);
    assert_eq!(r["verdict"], "violated");
    assert!(r["independence_violation"].as_f64().unwrap() > 0.0);
}

#[test]
fn sampled_chsh_tracks_the_exact_value() {
    let r = sampled_chsh_value(0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4, 4000, 3).unwrap();
    let s = r["s_value"].as_f64().unwrap();
    let err = r["s_error"].as_f64().unwrap();
    assert!((s + 2.0 * SQRT_2).abs() < 4.0 * err, "{s} ± {err}");
    assert_eq!(r["runs_per_pair"], 4000);
}

#[test]
fn bath_demo_advances_and_measures() {
    let mut demo = BathDemo::create(0.099, 0.099, 0.0, 1, false).unwrap();
    assert_eq!(demo.x_a(), 0.5);
    demo.step_n(64).unwrap();
    assert!((demo.periods() - 0.5).abs() < 1e-12);
    assert_eq!(demo.eta().len(), demo.depth().len());
    assert!(demo.eta().iter().any(|e| *e != 0.0));
    assert!(BathDemo::create(0.6, 0.099, 0.0, 1, false).is_err());
}
