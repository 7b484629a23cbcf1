use std::sync::OnceLock;

use icx_core::estimate::{
    g_of, h_inverse, h_of, indirect_fit_values, ols_fit_values, simulated_binding, BindingTable, InverseRegion,
};
use icx_core::model::{ErrorSpec, InitSpec, ModelSpec};
use icx_core::rng::mix;
use icx_core::{gen_path, ols_fit};

fn table() -> &'static BindingTable {
    static T: OnceLock<BindingTable> = OnceLock::new();
    T.get_or_init(|| BindingTable::build_default().unwrap())
}

#[test]
fn g_at_zero_matches_unit_root_bias() {
    let sim = simulated_binding(&[1.0], 2000, 20_000, 5).unwrap();
    let mc = sim[0].scaled_mean(2000).unwrap();
    let g0 = g_of(0.0).unwrap();
    assert!((g0 - mc).abs() < 0.05, "g(0) = {g0}, MC = {mc}");
}

#[test]
fn h_tracks_simulated_means_on_the_explosive_side() {
    let n = 1000;
    for c in [1.0, 4.0, 10.0] {
        let sim = simulated_binding(&[1.0 + c / n as f64], n, 4000, 6).unwrap();
        let mc = sim[0].scaled_mean(n).unwrap();
        let h = h_of(c).unwrap();
        assert!((h - mc).abs() < 0.1 * (1.0 + h.abs()).sqrt(), "c = {c}: h = {h}, MC = {mc}");
    }
}

#[test]
fn g_is_continuous_at_zero() {
    // Richardson extrapolation from each side.
    let side = |s: f64| {
        let (a, b) = (g_of(s * 1e-3).unwrap(), g_of(s * 2e-3).unwrap());
        2.0 * a - b
    };
    let g0 = g_of(0.0).unwrap();
    assert!((side(1.0) - g0).abs() < 1e-6);
    assert!((side(-1.0) - g0).abs() < 1e-6);
}

#[test]
fn h_is_increasing_and_approaches_identity() {
    let mut prev = f64::NEG_INFINITY;
    let mut c = -20.0;
    while c <= 20.0 {
        let h = h_of(c).unwrap();
        assert!(h > prev, "h not increasing at {c}");
        prev = h;
        c += 0.5;
    }
    assert!((h_of(50.0).unwrap() - 50.0).abs() < 0.2);
}

#[test]
fn inverse_regions() {
    let t = table();
    let inside = h_inverse(h_of(3.3).unwrap(), t).unwrap();
    assert_eq!(inside.region, InverseRegion::Interior);
    assert!((inside.c - 3.3).abs() < 1e-6);
    let above = h_inverse(100.0, t).unwrap();
    assert_eq!(above.region, InverseRegion::UpperIdentity);
    assert_eq!(above.c, 100.0);
    let below = h_inverse(h_of(t.c_min()).unwrap() - 5.0, t).unwrap();
    assert!(below.saturated());
    assert_eq!(below.c, t.c_min());
}

#[test]
fn table_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    table().save(&path).unwrap();
    let back = BindingTable::load(&path).unwrap();
    assert_eq!(back.c_grid(), table().c_grid());
    assert_eq!(back.h_values(), table().h_values());
}

#[test]
fn table_check_passes() {
    let report = table().check(10, 3).unwrap();
    assert!(report.max_deviation <= 1e-6, "{report:?}");
}

#[test]
fn noiseless_explosive_path_is_recovered() {
    let path = gen_path(
        &ModelSpec::Explosive { rho: 1.2 },
        &ErrorSpec::Constant { value: 0.0 },
        &InitSpec::Fixed { value: 1.0 },
        50,
        0,
    )
    .unwrap();
    let ols = ols_fit(&path).unwrap();
    assert!((ols.rho_hat - 1.2).abs() < 1e-12);
    let iie = indirect_fit_values(&path.values, table()).unwrap();
    assert!((iie.rho_hat - 1.2).abs() < 2e-3, "{}", iie.rho_hat);
}

#[test]
fn hand_computed_indirect_fit() {
    let values = [0.0, 1.0, 2.0];
    let iie = indirect_fit_values(&values, table()).unwrap();
    let expected = 1.0 + h_inverse(2.0, table()).unwrap().c / 2.0;
    assert!((iie.rho_hat - expected).abs() < 1e-12);
    assert_eq!(ols_fit_values(&values).unwrap().rho_hat, 2.0);
}

#[test]
fn indirect_inference_reduces_unit_root_bias() {
    let n = 100;
    let reps = 4000;
    let (mut ols, mut iie) = (0.0, 0.0);
    for r in 0..reps {
        let path = gen_path(&ModelSpec::UnitRoot, &ErrorSpec::default(), &InitSpec::FixedZero, n, mix(11, &[r])).unwrap();
        ols += ols_fit(&path).unwrap().rho_hat;
        iie += indirect_fit_values(&path.values, table()).unwrap().rho_hat;
    }
    let (ols, iie) = (ols / reps as f64 - 1.0, iie / reps as f64 - 1.0);
    assert!(ols < -0.01);
    assert!(iie.abs() < 0.5 * ols.abs(), "ols bias {ols}, iie bias {iie}");
}

#[test]
fn simulated_binding_examples() {
    let pts = simulated_binding(&[1.2], 50, 2000, 1).unwrap();
    assert!((pts[0].mean_rho_hat.unwrap() - 1.2).abs() < 1e-2);
    assert!(simulated_binding(&[0.9], 50, 10, 1).is_err());
    assert!(simulated_binding(&[1.0], 50, 0, 1).is_err());
}
