//! Smoothing and region-filter properties.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use wildgen::postprocess::{convex_hull, mbr_filter, savgol_coefficients, smooth_series, smooth_trajectory, SavgolSpec};
use wildgen::rng;
use wildgen::{GeoPoint, Trajectory, TrajectorySet};

/// Least-squares smoothing weights by Householder QR of the raw (unscaled)
/// Vandermonde matrix: weight j is the fitted value at offset 0 when the
/// data is the j-th unit impulse.
fn qr_oracle(window: usize, order: usize) -> Vec<f64> {
    let n = (window / 2) as f64;
    let rows = window;
    let cols = order + 1;
    let design: Vec<Vec<f64>> = (0..rows)
        .map(|i| (0..cols).map(|j| (i as f64 - n).powi(j as i32)).collect())
        .collect();
    (0..rows)
        .map(|impulse| {
            let mut a = design.clone();
            let mut b: Vec<f64> = (0..rows).map(|i| if i == impulse { 1.0 } else { 0.0 }).collect();
            for k in 0..cols {
                let norm = (k..rows).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
                let alpha = if a[k][k] > 0.0 { -norm } else { norm };
                let mut v: Vec<f64> = (0..rows).map(|i| if i < k { 0.0 } else { a[i][k] }).collect();
                v[k] -= alpha;
                let vnorm2: f64 = v.iter().map(|x| x * x).sum();
                if vnorm2 == 0.0 {
                    continue;
                }
                for j in 0..cols {
                    let dot: f64 = (k..rows).map(|i| v[i] * a[i][j]).sum();
                    for i in k..rows {
                        a[i][j] -= 2.0 * dot / vnorm2 * v[i];
                    }
                }
                let dot: f64 = (k..rows).map(|i| v[i] * b[i]).sum();
                for i in k..rows {
                    b[i] -= 2.0 * dot / vnorm2 * v[i];
                }
            }
            let mut coef = vec![0.0; cols];
            for k in (0..cols).rev() {
                let s: f64 = (k + 1..cols).map(|j| a[k][j] * coef[j]).sum();
                coef[k] = (b[k] - s) / a[k][k];
            }
            // Fitted polynomial evaluated at offset 0.
            coef[0]
        })
        .collect()
}

#[test]
fn window_three_order_one_is_moving_average() {
    let c = savgol_coefficients(&SavgolSpec::new(3, 1).unwrap()).unwrap();
    let oracle = qr_oracle(3, 1);
    for (a, b) in c.iter().zip(&oracle) {
        assert!((a - 1.0 / 3.0).abs() < 1e-12);
        assert!((b - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn window_five_order_two_tabulated() {
    let c = savgol_coefficients(&SavgolSpec::new(5, 2).unwrap()).unwrap();
    let table = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
    let oracle = qr_oracle(5, 2);
    for i in 0..5 {
        assert!((oracle[i] - table[i]).abs() < 1e-12, "oracle {oracle:?}");
        assert!((c[i] - table[i]).abs() < 1e-12, "{c:?}");
    }
}

#[test]
fn coefficients_match_qr_oracle() {
    for window in (3..=25).step_by(2) {
        for order in 0..=(window - 2).min(6) {
            let c = savgol_coefficients(&SavgolSpec::new(window, order).unwrap()).unwrap();
            let o = qr_oracle(window, order);
            for (a, b) in c.iter().zip(&o) {
                assert!((a - b).abs() < 1e-10, "w{window} p{order}");
            }
        }
    }
}

proptest! {
    #[test]
    fn reproduces_low_degree_polynomials(
        half in 1usize..12,
        order_frac in 0.0f64..1.0,
        coeffs in prop::collection::vec(-2.0f64..2.0, 8),
        len_extra in 0usize..40,
    ) {
        let window = 2 * half + 1;
        let order = ((window - 2) as f64 * order_frac).floor() as usize;
        let order = order.min(5);
        let spec = SavgolSpec::new(window, order).unwrap();
        let len = window + len_extra;
        let poly = |x: f64| (0..=order).map(|k| coeffs[k] * (x / len as f64).powi(k as i32)).sum::<f64>();
        let values: Vec<f64> = (0..len).map(|i| poly(i as f64)).collect();
        let c = savgol_coefficients(&spec).unwrap();
        let smoothed = smooth_series(&values, &c).unwrap();
        for i in half..len - half {
            prop_assert!((smoothed[i] - values[i]).abs() < 1e-9);
        }
        // Overshoot bound.
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let bound: f64 = c.iter().map(|x| x.abs()).sum::<f64>() * (hi - lo);
        for s in &smoothed {
            prop_assert!(*s <= hi + bound + 1e-12 && *s >= lo - bound - 1e-12);
        }
    }
}

#[test]
fn smoothing_shortens_noisy_paths() {
    let mut r = rng::seeded(21);
    let noise = Normal::new(0.0, 0.4).unwrap();
    let lons: Vec<f64> = (0..185).map(|i| 5.0 + 0.2 * i as f64 + noise.sample(&mut r)).collect();
    let lats: Vec<f64> = (0..185).map(|i| 52.0 + 0.08 * i as f64 + noise.sample(&mut r)).collect();
    let t = Trajectory::from_coords(&lons, &lats).unwrap();
    let s = smooth_trajectory(&t, &SavgolSpec::new(21, 3).unwrap()).unwrap();
    assert_eq!(s.len(), t.len());
    assert!(s.path_length() < t.path_length());
}

#[test]
fn hull_contains_every_generator() {
    let mut r = rng::seeded(33);
    for _ in 0..1000 {
        let n = r.random_range(3..120);
        let pts: Vec<GeoPoint> = (0..n)
            .map(|_| GeoPoint::new(r.random_range(-50.0..50.0), r.random_range(-30.0..30.0)))
            .collect();
        let Ok(hull) = convex_hull(&pts) else { continue };
        assert!(pts.iter().all(|p| hull.contains(p)));
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut r);
        assert_eq!(convex_hull(&shuffled).unwrap(), hull);
    }
}

#[test]
fn real_set_survives_its_own_hull() {
    let set = wildgen::synthgen::generate_corpus(&Default::default()).unwrap();
    let hull = convex_hull(&set.pooled_points()).unwrap();
    let (kept, discarded) = mbr_filter(&set, &hull).unwrap();
    assert_eq!(discarded, 0);
    assert_eq!(kept, set);

    let mut shifted = set.trajectories()[0].clone();
    shifted.points[100].lon += 1000.0;
    let with_outlier = TrajectorySet::new(vec![shifted, set.trajectories()[1].clone()]).unwrap();
    let (kept, discarded) = mbr_filter(&with_outlier, &hull).unwrap();
    assert_eq!(discarded, 1);
    assert_eq!(kept.trajectories()[0], set.trajectories()[1]);
    for t in kept.iter() {
        assert!(hull.contains_all(&t.points));
    }
}
