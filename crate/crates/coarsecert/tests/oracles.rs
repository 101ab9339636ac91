//! Frozen numeric facts, each verified against an independent oracle
//! computed with different data structures than the library uses:
//! hash-map rows instead of interned tube kernels, metric search
//! instead of word surgery for ray vertices, measure arithmetic
//! instead of integer prefix counting. Agreement pins both the values
//! and the semantics.

use std::collections::{BTreeMap, HashSet};

use coarsecert::boundary::{cylinder_sample, BoundaryPoint};
use coarsecert::certificate::{
    aicm_deficiency, boundary_aicm, deficiency_l1, folner_certificate, free_ray_certificate,
    geodesic_ray,
};
use coarsecert::embedding::{
    distortion_profile, embedding_distance, folner_sqrt_sequence, tail_bound,
};
use coarsecert::group::{Ball, GroupDescriptor, GroupElement};
use coarsecert::kernel::{KernelBuilder, KernelKind};
use coarsecert::linalg::symmetric_eigen;
use coarsecert::transform::{density_to_l2, l2_to_coefficient};

fn z(dim: u32) -> GroupDescriptor {
    GroupDescriptor::lattice(dim).unwrap()
}

fn f2() -> GroupDescriptor {
    GroupDescriptor::free(2).unwrap()
}

fn el(d: GroupDescriptor, s: &str) -> GroupElement {
    d.parse_element(s).unwrap()
}

// ======================================================================
// Word geometry
// ======================================================================

#[test]
fn ball_orders_and_counts() {
    // Free group of rank 2: 1 + Σ_{i≤k} 4·3^{i-1}.
    let expected_f2 = [1usize, 5, 17, 53, 161, 485];
    for (k, want) in expected_f2.iter().enumerate() {
        let ball = Ball::enumerate(f2(), k as u64).unwrap();
        assert_eq!(ball.len(), *want, "F2 ball radius {k}");
    }

    // Lattices: 2k+1 on the line; diamond counts on the plane.
    for k in 0..6u64 {
        assert_eq!(Ball::enumerate(z(1), k).unwrap().len() as u64, 2 * k + 1);
    }
    assert_eq!(Ball::enumerate(z(2), 2).unwrap().len(), 13);
    assert_eq!(Ball::enumerate(z(2), 3).unwrap().len(), 25);

    // Enumeration discipline: identity first, lengths nondecreasing,
    // ids consistent, no duplicates.
    for d in [f2(), z(2)] {
        let ball = Ball::enumerate(d, 3).unwrap();
        assert_eq!(ball.elements()[0], d.identity());
        let lengths: Vec<u64> = ball.elements().iter().map(|g| g.length()).collect();
        assert!(lengths.windows(2).all(|w| w[0] <= w[1]));
        let distinct: HashSet<_> = ball.elements().iter().collect();
        assert_eq!(distinct.len(), ball.len());
        for (i, g) in ball.elements().iter().enumerate() {
            assert_eq!(ball.index_of(g), Some(i as u32));
        }
    }

    // Independent oracle for the plane ball: brute double loop.
    let ball = Ball::enumerate(z(2), 2).unwrap();
    let mut brute = HashSet::new();
    for x in -2i64..=2 {
        for y in -2i64..=2 {
            if x.abs() + y.abs() <= 2 {
                brute.insert(el(z(2), &format!("{x},{y}")));
            }
        }
    }
    let listed: HashSet<_> = ball.elements().iter().cloned().collect();
    assert_eq!(listed, brute);
}

// ======================================================================
// Cube certificates vs. hash-map arithmetic
// ======================================================================

#[test]
fn cube_certificate_matches_hash_map_oracle() {
    let n = 3u64;
    let w = 4u64;
    let cert = folner_certificate(z(1), n, w).unwrap();
    let window = Ball::enumerate(z(1), w).unwrap();

    // Oracle rows: integer-keyed maps, l1 by explicit union merge.
    let oracle_row = |s: i64| -> BTreeMap<i64, f64> {
        (s - n as i64..=s + n as i64)
            .map(|x| (x, 1.0 / (2 * n + 1) as f64))
            .collect()
    };
    let oracle_l1 = |a: &BTreeMap<i64, f64>, b: &BTreeMap<i64, f64>| -> f64 {
        let keys: HashSet<i64> = a.keys().chain(b.keys()).copied().collect();
        keys.iter()
            .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
            .sum()
    };

    let mut oracle_sup: f64 = 0.0;
    for s in -(w as i64)..=w as i64 {
        for t in s + 1..=w as i64 {
            if (t - s) as u64 > n {
                continue;
            }
            oracle_sup = oracle_sup.max(oracle_l1(&oracle_row(s), &oracle_row(t)));
            let lib = cert
                .row_l1_distance(&el(z(1), &s.to_string()), &el(z(1), &t.to_string()))
                .unwrap();
            assert!((lib - oracle_l1(&oracle_row(s), &oracle_row(t))).abs() <= 1e-15);
        }
    }
    let report = deficiency_l1(&cert, n, &window).unwrap();
    assert!((report.sup - oracle_sup).abs() <= 1e-15);

    // Exact per-distance law 2d/(2n+1).
    for row in &report.table {
        let exact = 2.0 * row.distance as f64 / (2 * n + 1) as f64;
        assert!(
            (row.max_deficiency - exact).abs() <= 1e-15,
            "distance {}",
            row.distance
        );
    }

    // Frozen: resolution 10 on the line leaks exactly 2/21 per step.
    let cert10 = folner_certificate(z(1), 10, 2).unwrap();
    let report10 = deficiency_l1(&cert10, 1, &Ball::enumerate(z(1), 2).unwrap()).unwrap();
    assert!((report10.sup - 2.0 / 21.0).abs() <= 1e-15);

    // Plane cubes: 25-point supports at n = 2; one step displaces two
    // rows of five points each: 10/25.
    let plane = folner_certificate(z(2), 2, 2).unwrap();
    assert_eq!(plane.row_entries(&z(2).identity()).unwrap().len(), 25);
    let step = plane
        .row_l1_distance(&z(2).identity(), &el(z(2), "1,0"))
        .unwrap();
    assert!((step - 0.4).abs() <= 1e-15);
}

// ======================================================================
// Ray geometry vs. metric search
// ======================================================================

#[test]
fn ray_vertices_match_the_metric_characterization() {
    // The j-th ray vertex after s toward ω is the unique point at
    // distance j from s that is j closer to a deep anchor on ω.
    let anchor_depth = 12u64;
    for omega_text in [":a", "b:ab"] {
        let omega: BoundaryPoint = omega_text.parse().unwrap();
        let anchor = omega.prefix(anchor_depth);
        for s in Ball::enumerate(f2(), 2).unwrap().elements() {
            let ray = geodesic_ray(f2(), s, &omega, 3).unwrap();
            let d_s = f2().distance(s, &anchor).unwrap();
            for j in 1..=3u64 {
                let mut matches = Vec::new();
                for u in Ball::enumerate(f2(), j).unwrap().elements() {
                    if u.length() != j {
                        continue;
                    }
                    let v = f2().mul(s, u).unwrap();
                    if f2().distance(&v, &anchor).unwrap() == d_s - j {
                        matches.push(v);
                    }
                }
                assert_eq!(
                    matches.len(),
                    1,
                    "s = {s}, ω = {omega_text}, step {j}: candidates {matches:?}"
                );
                assert_eq!(matches[0], ray[j as usize - 1]);
            }
        }
    }
}

#[test]
fn ray_certificate_rows_are_ray_windows() {
    let omega: BoundaryPoint = ":a".parse().unwrap();
    let n = 5u64;
    let cert = free_ray_certificate(f2(), n, &omega, 2).unwrap();
    let window = Ball::enumerate(f2(), 2).unwrap();

    for s in window.elements() {
        let ray = geodesic_ray(f2(), s, &omega, n).unwrap();
        let entries = cert.row_entries(s).unwrap();
        assert_eq!(entries.len(), n as usize);
        let support: HashSet<&GroupElement> = entries.iter().map(|(g, _)| *g).collect();
        let expected: HashSet<&GroupElement> = ray.iter().collect();
        assert_eq!(support, expected, "row at {s}");
        for (_, v) in entries {
            assert_eq!(v, 0.2);
        }
    }

    // Brute ℓ² oracle for the square-rooted rows.
    let xi = density_to_l2(&cert).unwrap();
    let brute_row = |s: &GroupElement| -> BTreeMap<GroupElement, f64> {
        geodesic_ray(f2(), s, &omega, n)
            .unwrap()
            .into_iter()
            .map(|g| (g, (1.0f64 / n as f64).sqrt()))
            .collect()
    };
    for (i, s) in window.elements().iter().enumerate() {
        for t in window.elements().iter().skip(i + 1) {
            let (a, b) = (brute_row(s), brute_row(t));
            let keys: HashSet<&GroupElement> = a.keys().chain(b.keys()).collect();
            let brute: f64 = keys
                .iter()
                .map(|k| {
                    let diff = a.get(*k).unwrap_or(&0.0) - b.get(*k).unwrap_or(&0.0);
                    diff * diff
                })
                .sum();
            let lib = xi.row_l2_distance_sq(s, t).unwrap();
            assert!((lib - brute).abs() <= 1e-15, "pair ({s}, {t})");
        }
    }
}

// ======================================================================
// Boundary means vs. measure arithmetic
// ======================================================================

#[test]
fn boundary_means_match_measure_arithmetic() {
    use coarsecert::measure::{translate, tv_distance};

    let family = boundary_aicm(f2(), 4).unwrap();
    for omega in cylinder_sample(f2(), 2).unwrap() {
        for s in Ball::enumerate(f2(), 2).unwrap().elements() {
            let lib = family.pair_deficiency(&omega, s).unwrap();
            let pushed = translate(s, &family.mean(&omega).unwrap()).unwrap();
            let target = family.mean(&omega.acted_by(s).unwrap()).unwrap();
            let oracle = tv_distance(&pushed, &target).unwrap();
            assert!(
                (lib - oracle).abs() <= 1e-12,
                "ω = {omega}, s = {s}: {lib} vs {oracle}"
            );
        }
    }

    // Frozen: at resolution 2 a generator move displaces both prefixes
    // of some direction entirely — the sup saturates at 1 = 2/2.
    let family2 = boundary_aicm(f2(), 2).unwrap();
    let omegas = cylinder_sample(f2(), 2).unwrap();
    let window = Ball::enumerate(f2(), 1).unwrap();
    let report = aicm_deficiency(&family2, &omegas, &window).unwrap();
    assert_eq!(report.sup, 1.0);
    assert_eq!(report.sup_fraction, Some([2, 2]));
    assert!(report.witness.is_some());

    // The 2|s|/n envelope holds across resolutions and shrinks.
    let mut sups = Vec::new();
    for n in [2u64, 4, 8, 16] {
        let fam = boundary_aicm(f2(), n).unwrap();
        let rep = aicm_deficiency(&fam, &omegas, &window).unwrap();
        assert!(rep.sup <= 2.0 / n as f64 + 1e-15);
        sups.push(rep.sup);
    }
    assert!(sups.windows(2).all(|w| w[1] <= w[0]));
}

// ======================================================================
// Conversions and linear algebra
// ======================================================================

#[test]
fn conversion_chain_frozen_values() {
    // Square-root cube at n=2 on the line: windows share 4 of their 5
    // points after one step, so h(0, 1) = 4/5.
    let xi = density_to_l2(&folner_certificate(z(1), 2, 4).unwrap()).unwrap();
    let h = l2_to_coefficient(&xi).unwrap();
    let got = h.value(&z(1).identity(), &el(z(1), "1")).unwrap();
    assert!((got - 0.8).abs() <= 1e-15);

    // Dyadic rows make the row arithmetic exact: a 4-point ±? no —
    // uniform 0.5 row against a dirac row, overlapping at one point:
    // 3·(0.5)² + (0.5 − 1)² = 1 with no rounding anywhere.
    let mut b = KernelBuilder::new(z(1), KernelKind::L2Normalized, 2);
    b.push_row(
        &z(1).identity(),
        &[
            (el(z(1), "-1"), 0.5),
            (z(1).identity(), 0.5),
            (el(z(1), "1"), 0.5),
            (el(z(1), "2"), 0.5),
        ],
    )
    .unwrap();
    b.push_row(&el(z(1), "1"), &[(el(z(1), "1"), 1.0)]).unwrap();
    let k = b.finalize().unwrap();
    assert_eq!(
        k.row_l2_distance_sq(&z(1).identity(), &el(z(1), "1")).unwrap(),
        1.0
    );
    assert_eq!(k.row_inner(&z(1).identity(), &el(z(1), "1")).unwrap(), 0.5);
}

#[test]
fn eigensolver_frozen_spectrum() {
    // 2I − J on three points: eigenvalues −1, 2, 2; the negative
    // direction is the constant vector.
    let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -1.0 });
    let (w, v) = symmetric_eigen(&m).unwrap();
    assert!((w[0] + 1.0).abs() <= 1e-12);
    assert!((w[1] - 2.0).abs() <= 1e-12);
    assert!((w[2] - 2.0).abs() <= 1e-12);
    let c = 1.0 / 3.0f64.sqrt();
    let first: Vec<f64> = v.column(0).iter().copied().collect();
    let sign = first[0].signum();
    for x in first {
        assert!((x - sign * c).abs() <= 1e-12);
    }

    // Tail of Σ 1/k²: π²/6 − 49/36 after three terms.
    let direct = std::f64::consts::PI.powi(2) / 6.0 - 49.0 / 36.0;
    assert!((tail_bound(3) - direct).abs() <= 1e-15);
}

// ======================================================================
// Plane embedding hand values
// ======================================================================

#[test]
fn plane_embedding_hand_values() {
    let seq = folner_sqrt_sequence(z(2), 2, 2).unwrap();

    // Level 1 (3×3 cube): one step displaces a 3-point column: 2·3/9.
    let sup1 = seq.measured_sup(1).unwrap();
    assert!((sup1 - 2.0 / 3.0).abs() <= 1e-15, "{sup1}");
    // Level 2 (17×17 cube): the worst distance-2 move is the straight
    // one, 2·(2·17)/289 = 4/17 (the diagonal only reaches 66/289).
    let sup2 = seq.measured_sup(2).unwrap();
    assert!((sup2 - 4.0 / 17.0).abs() <= 1e-15, "{sup2}");
    assert_eq!(seq.support_radius(1), 2);
    assert_eq!(seq.support_radius(2), 16);

    // Truncated distance at the diagonal step (1,1):
    // 2(1 − (2/3)²) + 2(1 − (16/17)²) = 10/9 + 66/289.
    let (sq, tail) = embedding_distance(&seq, &z(2).identity(), &el(z(2), "1,1")).unwrap();
    let hand = 10.0 / 9.0 + 66.0 / 289.0;
    assert!((sq - hand).abs() <= 1e-14, "{sq} vs {hand}");
    assert!((tail - tail_bound(2)).abs() == 0.0);

    // Full profile over B(2): realized distances 1..=4, pair counts
    // confirmed by brute double loop.
    let window = Ball::enumerate(z(2), 2).unwrap();
    let profile = distortion_profile(&seq, &window).unwrap();
    assert_eq!(profile.rows.len(), 4);
    let mut brute_counts = [0u64; 5];
    let els = window.elements();
    for i in 0..els.len() {
        for j in i + 1..els.len() {
            brute_counts[z(2).distance(&els[i], &els[j]).unwrap() as usize] += 1;
        }
    }
    for row in &profile.rows {
        assert_eq!(row.pair_count, brute_counts[row.distance as usize]);
        assert!(row.min_sq <= row.max_sq);
        assert!(row.max_sq <= row.upper_allowed);
    }
}
