mod common;

use approx::assert_relative_eq;
use bpswitch_core::sensitivity::{fit_report, k_grid, polyfit, scale_traffic, SensitivityError, Sweeper};
use bpswitch_core::{BillingMode, PlanId};
use nalgebra::{DMatrix, DVector};

fn sweeper_fixture() -> (bpswitch_core::Catalog, bpswitch_core::TrafficProfile) {
    (common::mts_catalog(), common::mts_profile())
}

#[test]
fn scaling_examples() {
    let profile = common::mts_profile();
    assert_eq!(scale_traffic(&profile, 1.0).unwrap(), profile);
    let doubled = scale_traffic(&profile, 2.0).unwrap();
    let row: Vec<f64> = doubled.plan(PlanId(6)).unwrap().iter().map(|s| s.calls_per_month).collect();
    assert_eq!(row, [66.0, 12.0]);
    let halved = scale_traffic(&profile, 0.5).unwrap();
    assert_eq!(halved.plan(PlanId(1)).unwrap()[0].calls_per_month, 11.5);
    assert!(matches!(scale_traffic(&profile, 0.0), Err(SensitivityError::BadMultiplier(_))));
    assert!(matches!(scale_traffic(&profile, -1.0), Err(SensitivityError::BadMultiplier(_))));
}

#[test]
fn sweep_end_points() {
    let (catalog, profile) = sweeper_fixture();
    let sweeper = Sweeper::new(&catalog, &profile, BillingMode::Lookup);
    let at_one = sweeper.point(1.0).unwrap();
    assert_eq!(at_one.optimal_plan_id, PlanId(6));
    assert_relative_eq!(at_one.optimal_full_cost, 105.0, epsilon = 1e-9);
    let at_ten = sweeper.point(10.0).unwrap();
    assert_eq!(at_ten.optimal_plan_id, PlanId(2));
    assert_relative_eq!(at_ten.optimal_full_cost, 315.0, epsilon = 1e-9);
    assert_relative_eq!(at_ten.stay_cost, 1050.0, epsilon = 1e-9);

    let single = sweeper.sweep(&[1.0]).unwrap();
    let report = bpswitch_core::CostReport::evaluate(&catalog, &profile, BillingMode::Lookup).unwrap();
    assert_eq!(single[0].optimal_plan_id, report.ranking.optimal);
    assert!(matches!(sweeper.sweep(&[]), Err(SensitivityError::EmptyGrid)));
    assert!(matches!(sweeper.sweep(&[2.0, 1.0]), Err(SensitivityError::UnsortedGrid)));
}

#[test]
fn switch_points_match_brute_force() {
    let (catalog, profile) = sweeper_fixture();
    let sweeper = Sweeper::new(&catalog, &profile, BillingMode::Lookup);
    let sweep = sweeper.sweep(&k_grid(0.5, 10.0, 0.5).unwrap()).unwrap();
    let intervals = sweeper.switch_points(&sweep).unwrap();
    let plans: Vec<u32> = intervals.iter().map(|i| i.plan_id.0).collect();
    assert_eq!(plans, [6, 1, 2]);
    assert_eq!(intervals[0].k_from, 0.5);
    assert_eq!(intervals[2].k_to, 10.0);

    let oracle = common::brute_force_switches(&catalog, &profile, 0.41, &common::MTS_FIXED, 1e-4);
    assert_eq!(oracle.iter().map(|s| s.1).collect::<Vec<_>>(), [6, 1, 2]);
    assert!((intervals[0].k_to - oracle[1].0).abs() < 2e-4);
    assert!((intervals[1].k_to - oracle[2].0).abs() < 2e-4);
    // hand-solved crossings of the affine cost lines
    assert_relative_eq!(intervals[0].k_to, 90.0 / (105.0 - 52.787_108_166_743_5), epsilon = 1e-9);
    assert_relative_eq!(intervals[1].k_to, 225.0 / 52.787_108_166_743_5, epsilon = 1e-9);
}

#[test]
fn plans_winning_between_grid_points_are_found() {
    let (catalog, profile) = sweeper_fixture();
    let sweeper = Sweeper::new(&catalog, &profile, BillingMode::Lookup);
    // plan 1 is optimal only on (1.72, 4.26); a coarse grid skips it
    let sweep = sweeper.sweep(&[1.0, 5.0]).unwrap();
    let plans: Vec<u32> = sweeper.switch_points(&sweep).unwrap().iter().map(|i| i.plan_id.0).collect();
    assert_eq!(plans, [6, 1, 2]);
}

#[test]
fn fits_on_the_sweep() {
    let (catalog, profile) = sweeper_fixture();
    let sweep = Sweeper::new(&catalog, &profile, BillingMode::Lookup)
        .sweep(&k_grid(0.5, 10.0, 0.5).unwrap())
        .unwrap();
    let report = fit_report(&sweep).unwrap();
    // staying on the current plan costs exactly 105 per unit of k
    assert_relative_eq!(report.stay_through_origin.fit.coefficients[0], 105.0, epsilon = 1e-9);
    assert_relative_eq!(report.stay_through_origin.fit.r_squared, 1.0, epsilon = 1e-12);
    let r2 = |f: &bpswitch_core::sensitivity::NamedFit| f.fit.r_squared;
    assert!(r2(&report.optimal_linear) < r2(&report.optimal_quadratic));
    assert!(r2(&report.optimal_quadratic) < r2(&report.optimal_cubic));
    // lower envelope of lines is concave
    assert!(report.optimal_quadratic.fit.coefficient(2) <= 0.0);
    assert!(matches!(fit_report(&sweep[..4]), Err(SensitivityError::TooFewPoints { need: 5, got: 4 })));
}

fn reference_lstsq(points: &[(f64, f64)], degree: usize, intercept: bool) -> Vec<f64> {
    let first = usize::from(!intercept);
    let cols = degree + usize::from(intercept);
    let x = DMatrix::from_fn(points.len(), cols, |r, c| points[r].0.powi((c + first) as i32));
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    x.svd(true, true).solve(&y, 1e-14).unwrap().iter().copied().collect()
}

#[test]
fn polyfit_matches_reference_solver() {
    let noisy: Vec<(f64, f64)> = (0..40)
        .map(|i| {
            let x = 0.25 * f64::from(i) + 0.5;
            (x, 40.0 + 60.0 * x - 4.0 * x * x + ((i * 7919) % 13) as f64 - 6.0)
        })
        .collect();
    for degree in 1..=3 {
        for intercept in [true, false] {
            let ours = polyfit(&noisy, degree, intercept).unwrap();
            let reference = reference_lstsq(&noisy, degree, intercept);
            for (a, b) in ours.coefficients.iter().zip(&reference) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "deg {degree} icpt {intercept}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn nested_models_never_lose_r2() {
    let pts: Vec<(f64, f64)> = (1..=20).map(|i| f64::from(i) * 0.5).map(|k| (k, (105.0 * k).min(90.0 + 52.8 * k).min(315.0))).collect();
    let r2: Vec<f64> = (1..=3).map(|d| polyfit(&pts, d, true).unwrap().r_squared).collect();
    assert!(r2[0] <= r2[1] && r2[1] <= r2[2]);
    assert!(r2.iter().all(|r| (0.0..=1.0).contains(r)));
}
