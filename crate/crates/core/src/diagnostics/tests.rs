use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::discretization::{gaussian_data, RadialGrid};
use crate::evolution::{Integrator, IntegratorConfig, Mode};
use crate::geometry::ManifoldProfile;

fn grid(profile: ManifoldProfile, r_max: f64, m: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(profile, r_max, m).unwrap())
}

fn at(state: &FieldState, t: f64) -> FieldState {
    FieldState { t, ..state.clone() }
}

/// Free Euclidean solution from `e^{-r^2/2}`, built from `w = r^{(n-1)/2} u`.
fn euclidean_gaussian(g: Arc<RadialGrid>, t: f64) -> FieldState {
    let n = g.profile().n as f64;
    let z = Complex64::new(1.0, 2.0 * t);
    let w = g
        .nodes()
        .iter()
        .map(|&r| z.powf(-0.5 * n) * (-r * r / (2.0 * z)).exp() * r.powf(0.5 * (n - 1.0)))
        .collect();
    FieldState { grid: g, t, w }
}

fn free_config(dt: f64) -> IntegratorConfig {
    IntegratorConfig { dt, mode: Mode::Free, ..IntegratorConfig::default() }
}

#[test]
fn morawetz_of_zero_field() {
    let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 20.0, 200);
    let z = FieldState::zeros(g);
    let mut acc = MorawetzAccumulator::new(0.02);
    for k in 0..5 {
        acc.observe(&at(&z, k as f64));
    }
    let rep = acc.finish();
    assert!(rep.series.cumulative.iter().all(|v| *v == 0.0));
    assert!(rep.series.bound_ratio.iter().all(|v| *v == 0.0));
    assert!(rep.saturated);
}

#[test]
fn morawetz_of_frozen_profile_grows_linearly() {
    // hyperbolic: ∫ coth r csch² r e^{-r²} sinh³ r dr = ∫ cosh r e^{-r²} dr = (√π/2) e^{1/4}
    let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 14.0, 20000);
    let h = g.h();
    let s = gaussian_data(g, 1.0, 1.0).unwrap();
    // the integrand is 1 at the origin and the node sum starts at r = h: subtract h/2
    let slope = 2.0 * PI * PI * (0.5 * PI.sqrt() * 0.25f64.exp() - 0.5 * h);
    let mut acc = MorawetzAccumulator::new(0.02);
    for k in 0..=8 {
        acc.observe(&at(&s, 0.5 * k as f64));
    }
    let rep = acc.finish();
    for (t, m) in rep.series.t.iter().zip(&rep.series.cumulative) {
        assert!((m - slope * t).abs() <= 1e-6 * slope * t.max(1.0), "{t} {m}");
    }
    assert!(!rep.saturated);
    assert!(rep.kernel_normalized && !rep.degenerate_dimension);
    // constant growth: the last quarter adds a quarter of the total
    assert!((rep.last_quarter_increase - 0.25).abs() < 1e-12);

    // Euclidean: the kernel is 1/r^3, so both integrals equal π^{5/2} per unit time
    let e = grid(ManifoldProfile::euclidean(4).unwrap(), 14.0, 20000);
    let h = e.h();
    let (k, c) = MorawetzAccumulator::integrands(&gaussian_data(e, 1.0, 1.0).unwrap());
    let target = 2.0 * PI * PI * 0.5 * (PI.sqrt() - h);
    assert!(((k - target) / target).abs() < 1e-6, "{k}");
    assert!(((c - target) / target).abs() < 1e-6, "{c}");
}

#[test]
fn morawetz_flags_dimension_three() {
    let g = grid(ManifoldProfile::finite(3, 1).unwrap(), 20.0, 200);
    let mut acc = MorawetzAccumulator::new(0.02);
    acc.observe(&gaussian_data(g, 1.0, 1.0).unwrap());
    let rep = acc.finish();
    assert!(rep.degenerate_dimension && !rep.kernel_normalized);
}

#[test]
fn virial_zero_and_linear_density() {
    let e = grid(ManifoldProfile::euclidean(4).unwrap(), 14.0, 20000);
    let mut v = VirialAccumulator::new(0.5);
    let z = FieldState::zeros(e.clone());
    v.observe(&z);
    v.observe(&at(&z, 1.0));
    let rep = v.finish();
    assert_eq!((rep.final_lhs, rep.final_rhs, rep.constant), (0.0, 0.0, 0.0));

    // -Δ²a = 3/r³ on R^4: linear density (3/2) π^{5/2}, less the h/2 endpoint term
    let h = e.h();
    let s = gaussian_data(e, 1.0, 1.0).unwrap();
    let (lin, nl, flux) = VirialAccumulator::integrands(&s, 0.5);
    let lin_ref = 1.5 * 2.0 * PI * PI * 0.5 * (PI.sqrt() - h);
    assert!(((lin - lin_ref) / lin).abs() < 1e-6, "{lin}");
    // σ/(σ+1) ∫ |u|^3 (3/r) dΩ = 2π² ∫ e^{-3r²/2} r² dr
    let nl_ref = (1.0 / 3.0) * 2.0 * PI * PI * 3.0 * (PI.sqrt() / 4.0) * (2.0f64 / 3.0).powf(1.5);
    assert!(((nl - nl_ref) / nl_ref).abs() < 1e-6, "{nl} {nl_ref}");
    // ∫ |u u'| dΩ = 2π² ∫ e^{-r²} r⁴ dr = 2π² · 3√π/8
    let flux_ref = 2.0 * PI * PI * 3.0 * PI.sqrt() / 8.0;
    assert!(((flux - flux_ref) / flux).abs() < 1e-6, "{flux}");
}

#[test]
fn free_defect_vanishes_and_is_a_pseudometric() {
    let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 40.0, 2000);
    let cfg = free_config(1e-2);
    let mut integ = Integrator::new(g.clone(), cfg).unwrap();
    let mut tracker = ScatteringTracker::new(g.clone(), &cfg, vec![1.0, 2.0, 4.0]).unwrap();
    let mut s = gaussian_data(g, 1.0, 1.5).unwrap();
    for _ in 0..4 {
        integ.advance(&mut s, 100).unwrap();
        tracker.observe(&s).unwrap();
    }
    assert_eq!(tracker.snapshots().len(), 3);
    assert_eq!(tracker.defect(2.0, 2.0).unwrap().defect, 0.0);
    let d12 = tracker.defect(1.0, 2.0).unwrap();
    assert!(d12.reliable && d12.defect < 1e-10, "{d12:?}");
    let d = |a, b| tracker.defect(a, b).unwrap().defect;
    assert!(d(1.0, 4.0) <= d(1.0, 2.0) + d(2.0, 4.0) + 1e-15);
    let rep = tracker.finish();
    assert_eq!(rep.pairs.len(), 2);
    assert_eq!(rep.dyadic_ratios.len(), 1);
}

#[test]
fn standalone_defect_matches_tracker() {
    let g = grid(ManifoldProfile::finite(4, 1).unwrap(), 40.0, 1000);
    let cfg = IntegratorConfig { dt: 1e-2, sigma: 0.5, ..IntegratorConfig::default() };
    let mut nl = Integrator::new(g.clone(), cfg).unwrap();
    let mut s = gaussian_data(g.clone(), 2.0, 1.5).unwrap();
    nl.advance(&mut s, 100).unwrap();
    let s1 = s.clone();
    nl.advance(&mut s, 100).unwrap();
    let mut free = Integrator::new(g.clone(), free_config(1e-2)).unwrap();
    let d = scattering_defect(&mut free, &s1, &s).unwrap();
    assert!(d > 1e-6, "nonlinear defect should be visible: {d}");
    let mut tracker = ScatteringTracker::new(g, &cfg, vec![1.0, 2.0]).unwrap();
    tracker.observe(&s1).unwrap();
    tracker.observe(&s).unwrap();
    assert_eq!(tracker.defect(1.0, 2.0).unwrap().defect, d);
    assert!(scattering_defect(&mut nl, &s1, &s).is_err());
}

#[test]
fn euclidean_profile_matches_closed_form() {
    // t^{n/2}|u(t, tρ)| = (t²/(1+4t²))^{n/4} exp(-t²ρ²/(2(1+4t²))) → 2^{-n/2} e^{-ρ²/8}
    let g = grid(ManifoldProfile::euclidean(4).unwrap(), 200.0, 40000);
    let rg = RhoGrid::uniform(8.0, 800).unwrap();
    let mass0 = PI * PI;
    let t = 20.0;
    let snap = extract_profile(&euclidean_gaussian(g, t), &rg, mass0).unwrap();
    assert!(snap.truncated_at.is_none());
    let c = t * t / (1.0 + 4.0 * t * t);
    for (p, f) in snap.rho.iter().zip(&snap.f) {
        let exact = c * (-c * p * p / 2.0).exp();
        assert!((f - exact).abs() < 1e-6, "{p} {f} {exact}");
        assert!((f - 0.25 * (-p * p / 8.0).exp()).abs() < 2e-3);
    }
    // mass beyond ρ = 8 is about 17 e^{-16}; the rest is quadrature error
    assert!(snap.unitarity_defect.unwrap() < 1e-4, "{:?}", snap.unitarity_defect);
}

#[test]
fn profile_truncation_and_zero_state() {
    let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 50.0, 500);
    let rg = RhoGrid::uniform(4.0, 40).unwrap();
    let z = at(&FieldState::zeros(g), 20.0);
    let snap = extract_profile(&z, &rg, 0.0).unwrap();
    assert!(snap.f.iter().all(|v| *v == 0.0));
    assert!(snap.unitarity_defect.is_none());
    assert_eq!(snap.truncated_at, Some(2.6));
    assert_eq!(snap.rho.len(), 25);
    assert_eq!(snap.relative_sup_difference(&snap), 0.0);
    assert!(extract_profile(&at(&z, 0.0), &rg, 1.0).is_err());
}

#[test]
fn phase_of_euclidean_gaussian_is_flat() {
    let g = grid(ManifoldProfile::euclidean(4).unwrap(), 200.0, 20000);
    let rg = RhoGrid::uniform(4.0, 80).unwrap();
    let mut p = PhaseTracker::new(&rg, (10.0, 20.0), 200.0).unwrap();
    for k in 0..=100 {
        p.observe(&euclidean_gaussian(g.clone(), 10.0 + 0.1 * k as f64));
    }
    let rep = p.finish(4, 0.1).unwrap();
    assert!(rep.lambda_fit.abs() < 0.01, "{rep:?}");
    assert!(rep.rho_star > 0.0);
}

#[test]
fn phase_on_hyperbolic_three_space_is_one() {
    // n = 3: V_eff ≡ 1, so w = e^{-it} (1+2it)^{-3/2} r e^{-r²/(2(1+2it))} solves the reduced equation
    let g = grid(ManifoldProfile::hyperbolic(3).unwrap(), 200.0, 20000);
    let rg = RhoGrid::uniform(4.0, 80).unwrap();
    let mut p = PhaseTracker::new(&rg, (10.0, 20.0), 200.0).unwrap();
    for k in 0..=100 {
        let t = 10.0 + 0.1 * k as f64;
        let z = Complex64::new(1.0, 2.0 * t);
        let w = g
            .nodes()
            .iter()
            .map(|&r| Complex64::from_polar(1.0, -t) * z.powf(-1.5) * r * (-r * r / (2.0 * z)).exp())
            .collect();
        p.observe(&FieldState { grid: g.clone(), t, w });
    }
    let rep = p.finish(3, 0.1).unwrap();
    assert!((rep.lambda_fit - 1.0).abs() < 0.01, "{rep:?}");
    assert_eq!(rep.matches, vec![1.0]);
    assert_eq!(rep.candidates, [1.0, 1.0]);
}

#[test]
fn phase_unwrapping_failure_is_reported() {
    let g = grid(ManifoldProfile::hyperbolic(3).unwrap(), 100.0, 5000);
    let rg = RhoGrid::uniform(2.0, 20).unwrap();
    let mut p = PhaseTracker::new(&rg, (10.0, 20.0), 100.0).unwrap();
    for k in 0..=5 {
        let t = 10.0 + 2.0 * k as f64;
        // a phase rotating by 2 rad per sample
        let s = gaussian_data(g.clone(), 1.0, 1.0).unwrap();
        let w = g
            .nodes()
            .iter()
            .zip(&s.w)
            .map(|(&r, v)| v * Complex64::from_polar(1.0, r * r / (4.0 * t) + k as f64 * 2.0))
            .collect();
        p.observe(&FieldState { grid: g.clone(), t, w });
    }
    assert!(p.finish(3, 0.1).is_err());
}

#[test]
fn longrange_of_zero_field_is_undetermined() {
    let g = grid(ManifoldProfile::euclidean(4).unwrap(), 30.0, 300);
    let cfg = IntegratorConfig { dt: 1e-2, sigma: 0.2, ..IntegratorConfig::default() };
    let mut lr = LongRangeTracker::new(g.clone(), &cfg, (1.0, 3.0), 1.0).unwrap();
    for k in 0..=8 {
        lr.observe(&at(&FieldState::zeros(g.clone()), 0.5 * k as f64)).unwrap();
    }
    let rep = lr.finish(0.0);
    assert!(rep.pairing.iter().all(|d| *d == 0.0));
    assert_eq!(rep.exponent, DecayExponent::Undetermined);
    assert!((rep.predicted.unwrap() - 0.8).abs() < 1e-15);
    assert!(LongRangeTracker::new(g, &free_config(1e-2), (1.0, 3.0), 1.0).is_err());
}

#[test]
fn longrange_pairing_quadrature() {
    // ψ = u = e^{-r²/2}, σ = 1/2: ∫ ψ |u| u dΩ on R^4 = 2π² ∫ e^{-3r²/2} r³ dr = 4π²/9
    let g = grid(ManifoldProfile::euclidean(4).unwrap(), 12.0, 8000);
    let s = gaussian_data(g, 1.0, 1.0).unwrap();
    let d = LongRangeTracker::pairing(&s, &s, 0.5);
    assert!(((d - 4.0 * PI * PI / 9.0) / d).abs() < 1e-6, "{d}");
}

#[test]
fn x_integrand_is_positive_and_absent_in_two_dimensions() {
    let g = grid(ManifoldProfile::hyperbolic(4).unwrap(), 20.0, 500);
    assert!(x_integrand(&gaussian_data(g, 1.0, 1.0).unwrap()).unwrap() > 0.0);
    let g2 = grid(ManifoldProfile::euclidean(2).unwrap(), 20.0, 500);
    assert!(x_integrand(&gaussian_data(g2, 1.0, 1.0).unwrap()).is_none());
}

fn options() -> DiagnosticsOptions {
    DiagnosticsOptions {
        morawetz: true,
        virial: true,
        scattering: true,
        defect_times: vec![0.5, 1.0, 2.0],
        profile: true,
        profile_times: vec![1.0, 2.0],
        rho_max: 2.0,
        rho_points: 40,
        profile_compare_rho_min: 0.0,
        phase: true,
        phase_window: (1.0, 2.0),
        longrange: true,
        longrange_window_start: 0.5,
        psi_support: (1.0, 3.0),
        saturation_fraction: 0.02,
        phase_match_tolerance: 0.1,
    }
}

#[test]
fn bundle_on_a_free_euclidean_run() {
    let g = grid(ManifoldProfile::euclidean(4).unwrap(), 30.0, 3000);
    let cfg = free_config(1e-2);
    let mut diag = Diagnostics::new(g.clone(), &cfg, options()).unwrap();
    let mut integ = Integrator::new(g.clone(), cfg).unwrap();
    integ.evolve(gaussian_data(g, 1.0, 1.0).unwrap(), 2.0, 0.1, |s| diag.observe(s).map(|_| ())).unwrap();
    let rep = diag.finish();
    assert_eq!(rep.series.len(), 21);
    assert!(rep.invariant_violations.is_empty(), "{:?}", rep.invariant_violations);
    assert!(rep.conservation.mass_drift < 1e-12);
    let defects: Vec<f64> = rep.series.iter().filter_map(|r| r.defect).collect();
    assert_eq!(defects.len(), 2);
    assert!(defects.iter().all(|d| *d < 1e-10));
    assert_eq!(rep.profiles.len(), 2);
    assert_eq!(rep.profile_comparisons.len(), 1);
    assert!(rep.longrange.is_none());
    assert!(rep.phase.is_some());
    let cum: Vec<f64> = rep.series.iter().map(|r| r.morawetz_cum.unwrap()).collect();
    assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    let line = rep.series[0].csv_line();
    assert_eq!(line.split(',').count(), SERIES_CSV_HEADER.split(',').count());
}

proptest! {
    #[test]
    fn nonlinear_virial_term_is_non_negative(
        vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64), sigma in 0.05f64..2.0, k in 0u32..4, hyper in any::<bool>()
    ) {
        let p = if hyper { ManifoldProfile::hyperbolic(4).unwrap() } else { ManifoldProfile::finite(4, k).unwrap() };
        let g = grid(p, 20.0, 64);
        let u: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let s = FieldState::from_u(g, 0.0, &u).unwrap();
        let (lin, nl, flux) = VirialAccumulator::integrands(&s, sigma);
        prop_assert!(nl >= 0.0 && lin >= 0.0 && flux >= 0.0);
    }

    #[test]
    fn morawetz_is_monotone_on_arbitrary_samples(
        amps in proptest::collection::vec(0.0f64..3.0, 2..12)
    ) {
        let g = grid(ManifoldProfile::finite(5, 2).unwrap(), 20.0, 100);
        let mut acc = MorawetzAccumulator::new(0.02);
        for (j, a) in amps.iter().enumerate() {
            acc.observe(&at(&gaussian_data(g.clone(), *a, 1.0).unwrap(), j as f64));
        }
        let rep = acc.finish();
        prop_assert_eq!(rep.negative_increments, 0);
        prop_assert!(rep.series.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn profile_comparison_can_skip_small_rho() {
    let snap = |t: f64, f: Vec<f64>| ProfileSnapshot {
        t,
        rho: vec![0.1, 0.5, 1.0, 2.0],
        f,
        truncated_at: None,
        unitarity_defect: None,
    };
    // a spike at the smallest ρ, as for F ~ ρ^{-1/2} cut off at ρ ~ 1/t
    let a = snap(20.0, vec![2.0, 1.0, 0.8, 0.3]);
    let b = snap(40.0, vec![3.0, 1.02, 0.8, 0.3]);
    assert!((a.relative_sup_difference(&b) - 1.0 / 3.0).abs() < 1e-15);
    assert!((a.relative_sup_difference_from(&b, 0.5) - 0.02 / 1.02).abs() < 1e-15);
    assert_eq!(a.relative_sup_difference_from(&b, 5.0), 0.0);
}
