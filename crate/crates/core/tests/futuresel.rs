use idmk::futuresel::*;
use idmk::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(n: usize, spacing: f64) -> Vec<Position> {
    (0..n)
        .map(|i| Position::planar(i as f64 * spacing, 0.0))
        .collect()
}

#[test]
fn static_examples() {
    assert_eq!(static_select(7, 10, 100), 17);
    assert_eq!(static_select(0, 0, 100), 0);
    assert_eq!(static_select(95, 10, 100), 99);
}

#[test]
fn closest_examples() {
    let r = line(20, 1.0);
    assert_eq!(closest_select(&r, &r[3], 5), 8);
    assert_eq!(closest_select(&r, &r[18], 5), 19);

    // equidistant from index 2 and 9
    let mut r = line(12, 10.0);
    r[9] = Position::planar(20.0, 2.0);
    r[2] = Position::planar(20.0, -2.0);
    assert_eq!(closest_select(&r, &Position::planar(20.0, 0.0), 0), 2);
}

#[test]
fn closest_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r: Vec<_> = (0..50)
        .map(|_| Position::planar(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
        .collect();
    for _ in 0..200 {
        let a = Position::planar(rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0));
        let ds: Vec<f64> = r.iter().map(|p| p.distance(&a)).collect();
        let min = ds.iter().cloned().fold(f64::INFINITY, f64::min);
        let oracle = ds.iter().position(|&d| d == min).unwrap();
        assert_eq!(closest_select(&r, &a, 0), oracle);
    }
}

#[test]
fn radius_update_cases() {
    let r = line(10, 1.0);
    let s = SelectorState::new(SelectorKind::Radius { r: 1.0, k: 2 }, &r).unwrap();
    assert_eq!(s.fut_idx, 2);
    assert_eq!(radius_update(s, &r[2]).fut_idx, 3);
    assert_eq!(radius_update(s, &Position::planar(2.0, 5.0)).fut_idx, 2);
    // boundary is inclusive
    assert_eq!(radius_update(s, &Position::planar(2.0, 1.0)).fut_idx, 3);
    let end = SelectorState { fut_idx: 9, ..s };
    assert_eq!(radius_update(end, &r[9]).fut_idx, 9);
}

#[test]
fn inner_outer_cases() {
    let r = line(20, 0.5);
    let kind = SelectorKind::InnerOuter {
        r_in: 1.0,
        r_out: 3.0,
        k: 0,
    };
    let s = SelectorState {
        fut_idx: 4,
        ..SelectorState::new(kind, &r).unwrap()
    };
    let far = Position::planar(2.0, 5.0);
    assert_eq!(inner_outer_update(s, &far).fut_idx, 4);
    let mid = Position::planar(2.0, 2.0);
    assert_eq!(inner_outer_update(s, &mid).fut_idx, 5);
    // agent at r[4]: points 4..=5 (distances 0, 0.5) are inside r_in,
    // index 6 is exactly r_in away and stops the scan
    assert_eq!(inner_outer_update(s, &r[4]).fut_idx, 6);
}

#[test]
fn inner_outer_skips_a_dense_cluster() {
    let mut r = line(10, 2.0);
    for (i, p) in r.iter_mut().enumerate().take(7).skip(3) {
        *p = Position::planar(6.0 + 0.01 * i as f64, 0.0);
    }
    let kind = SelectorKind::InnerOuter {
        r_in: 0.5,
        r_out: 2.0,
        k: 0,
    };
    let s = SelectorState {
        fut_idx: 3,
        ..SelectorState::new(kind, &r).unwrap()
    };
    assert_eq!(
        inner_outer_update(s, &Position::planar(6.0, 0.0)).fut_idx,
        7
    );
}

#[test]
fn inner_outer_stops_at_the_end() {
    let r = vec![Position::ORIGIN; 5];
    let kind = SelectorKind::InnerOuter {
        r_in: 1.0,
        r_out: 2.0,
        k: 0,
    };
    let s = SelectorState::new(kind, &r).unwrap();
    assert_eq!(inner_outer_update(s, &Position::ORIGIN).fut_idx, 4);
}

#[test]
fn invalid_kinds_are_rejected() {
    let r = line(3, 1.0);
    assert!(SelectorState::new(SelectorKind::Radius { r: 0.0, k: 0 }, &r).is_err());
    let bad = SelectorKind::InnerOuter {
        r_in: 2.0,
        r_out: 2.0,
        k: 0,
    };
    assert!(SelectorState::new(bad, &r).is_err());
    assert!(SelectorState::new(SelectorKind::Static { k: 0 }, &[]).is_err());
}

#[test]
fn radius_with_glued_agent_advances_each_step() {
    let r = line(30, 0.7);
    let k = 4;
    let mut sel = Selector::new(SelectorKind::Radius { r: 0.1, k }, &r).unwrap();
    let mut got = Vec::new();
    for t in 0..10 {
        let target = r[sel.state().fut_idx];
        got.push(sel.select(t, target));
    }
    assert_eq!(got, (k..k + 10).collect::<Vec<_>>());
}

#[test]
fn static_dispatch_matches_formula() {
    let r = line(40, 1.0);
    let mut sel = Selector::new(SelectorKind::Static { k: 7 }, &r).unwrap();
    for t in 0..40 {
        let pos = Position::planar(-(t as f64), 3.0);
        assert_eq!(sel.select(t, pos), static_select(t, 7, 40));
    }
    assert_eq!(sel.trace().entries.len(), 40);
}

#[test]
fn trace_csv_layout() {
    let r = line(3, 1.0);
    let mut sel = Selector::new(SelectorKind::Static { k: 1 }, &r).unwrap();
    sel.select(0, Position::ORIGIN);
    let mut buf = Vec::new();
    sel.trace().write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t,fut_idx,dist\n0,1,1\n");
}

fn walk(seed: u64, n: usize) -> Vec<Position> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Position::ORIGIN;
    (0..n)
        .map(|_| {
            p = p + Position::planar(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            p
        })
        .collect()
}

proptest! {
    #[test]
    fn pointer_strategies_are_monotone(seed in 0u64..10_000, r in 0.1f64..3.0, k in 0usize..5) {
        let reference = walk(seed, 40);
        let agent = walk(seed ^ 0xabcdef, 60);
        for kind in [
            SelectorKind::Radius { r, k },
            SelectorKind::InnerOuter { r_in: r / 2.0, r_out: r, k },
        ] {
            let mut sel = Selector::new(kind, &reference).unwrap();
            let mut prev = 0;
            for (t, &p) in agent.iter().enumerate() {
                let idx = sel.select(t, p);
                prop_assert!(idx >= prev && idx < reference.len());
                prev = idx;
            }
        }
    }

    #[test]
    fn inner_outer_with_zero_inner_is_radius(seed in 0u64..10_000, r in 0.1f64..3.0, k in 0usize..5) {
        let reference = walk(seed, 40);
        let agent = walk(seed.wrapping_mul(31), 60);
        let mut a = Selector::new(SelectorKind::Radius { r, k }, &reference).unwrap();
        let mut b = Selector::new(SelectorKind::InnerOuter { r_in: 0.0, r_out: r, k }, &reference).unwrap();
        for (t, &p) in agent.iter().enumerate() {
            a.select(t, p);
            b.select(t, p);
        }
        prop_assert_eq!(a.trace(), b.trace());
    }

    #[test]
    fn closest_is_translation_covariant(seed in 0u64..10_000, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let reference = walk(seed, 30);
        let agent = walk(seed + 1, 1)[0];
        let shift = Position::planar(dx, dy);
        let moved: Vec<_> = reference.iter().map(|&p| p + shift).collect();
        let a = closest_select(&reference, &agent, 0);
        let b = closest_select(&moved, &(agent + shift), 0);
        // rounding may flip near-ties
        prop_assert!(a == b || (reference[a].distance(&agent) - reference[b].distance(&agent)).abs() < 1e-9);
    }
}
