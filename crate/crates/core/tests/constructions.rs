use wijsman_lab::constructions::{
    build, build_lacunary_separation, build_lacunary_ui_separation, build_stat_separation, build_ui_separation,
    schedule_sequence, verify_schedule, ConstructionKind, EpsRule, SeparationParams,
};
use wijsman_lab::modulus::ModulusFunction;
use wijsman_lab::{gap, Error, LacunarySchedule, Point};

fn log1p(t: f64) -> f64 {
    t.ln_1p()
}

/// Linear-scan reference for the checkpoint search with `f = ln(1 + t)`,
/// `eps_k = 2^-k`.
fn scan_checkpoints(c: f64, k_max: usize, forward: bool) -> (Vec<u64>, Vec<u64>, Vec<f64>) {
    let eps = |k: usize| 0.5f64.powi(k as i32);
    let (mut m, mut n, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for k in 1..=k_max {
        let e = eps(k);
        let mut cand = m.last().copied().unwrap_or(0) + 1;
        loop {
            let ratio_ok = log1p(cand as f64 * e) >= c * log1p(cand as f64);
            let rest_ok = match (m.last(), n.last()) {
                (Some(&mp), Some(&np)) => {
                    let ep = eps(k - 1);
                    let step = 1.0 - eps(k + 1) - 1.0 / cand as f64 > (1.0 - ep) * mp as f64 / cand as f64;
                    let count = (cand as f64 * e).floor() as u64 + 1;
                    let value = (cand as f64 * e - mp as f64 * ep) / (cand - mp) as f64;
                    step && count > np && (!forward || value >= eps(k + 1))
                }
                _ => true,
            };
            if ratio_ok && rest_ok {
                break;
            }
            cand += 1;
        }
        let value = match m.last() {
            Some(&mp) => (cand as f64 * e - mp as f64 * eps(k - 1)) / (cand - mp) as f64,
            None => e,
        };
        values.push(value);
        n.push((cand as f64 * e).floor() as u64 + 1);
        m.push(cand);
    }
    (m, n, values)
}

#[test]
fn statistical_schedule_matches_linear_scan_and_frozen_values() {
    let sep = build_stat_separation(&SeparationParams::new(ModulusFunction::log1p(), 0.5, 8)).unwrap();
    let (m, n, _) = scan_checkpoints(0.5, 8, false);
    assert_eq!(sep.schedule.m, m);
    assert_eq!(sep.schedule.n, n);
    assert_eq!(m, [1, 9, 48, 224, 960, 3968, 16128, 65024]);
    assert_eq!(n, [1, 3, 7, 15, 31, 63, 127, 255]);
    assert_eq!(sep.schedule.length, 65024);
}

#[test]
fn ui_schedule_matches_linear_scan_and_frozen_values() {
    let sep = build_ui_separation(&SeparationParams::new(ModulusFunction::log1p(), 0.5, 6)).unwrap();
    let (m, _, values) = scan_checkpoints(0.5, 6, true);
    assert_eq!(sep.schedule.m, m);
    assert_eq!(m, [1, 9, 48, 224, 960, 3968]);
    let got = sep.schedule.values.clone().unwrap();
    for (a, b) in got.iter().zip(&values) {
        assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
    }
    let frozen = [0.5, 0.21875, 0.09615384615384616, 0.045454545454545456, 0.021739130434782608, 0.010638297872340425];
    for (a, b) in got.iter().zip(frozen) {
        assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
    }
}

#[test]
fn checkpoints_are_minimal() {
    let f = ModulusFunction::log1p();
    let sep = build_stat_separation(&SeparationParams::new(f.clone(), 0.5, 8)).unwrap();
    let s = &sep.schedule;
    for k in 0..s.m.len() {
        let below = s.m[k] - 1;
        if below == 0 || (k > 0 && below <= s.m[k - 1]) {
            continue;
        }
        // the ratio alone, or together with the step constraints, fails one below
        let ratio_ok = f.eval(below as f64 * s.eps[k]) >= 0.5 * f.eval(below as f64);
        let step_ok = k == 0
            || wijsman_lab::constructions::check_step_inequality(s.m[k - 1], s.eps[k - 1], s.eps[k], below)
                && wijsman_lab::constructions::count_for(below, s.eps[k]) > s.n[k - 1];
        assert!(!(ratio_ok && step_ok), "m_{} - 1 = {below} already qualifies", k + 1);
    }
}

#[test]
fn statistical_sequence_is_the_block_indicator() {
    let sep = build_stat_separation(&SeparationParams::new(ModulusFunction::log1p(), 0.5, 5)).unwrap();
    let x = Point::scalar(0.0);
    let blocks = &sep.schedule.blocks;
    for k in 1..=sep.schedule.length {
        let inside = blocks.iter().any(|[lo, hi]| (*lo..=*hi).contains(&k));
        assert_eq!(gap(&x, k, &sep.sequence).unwrap(), if inside { 1.0 } else { 0.0 }, "index {k}");
    }
    // block k holds n_k - n_{k-1} ones ending at m_k
    let s = &sep.schedule;
    for k in 0..s.m.len() {
        let [lo, hi] = blocks[k];
        assert_eq!(hi, s.m[k]);
        let want = s.n[k] - if k == 0 { 0 } else { s.n[k - 1] };
        assert_eq!(hi - lo + 1, want);
    }
}

#[test]
fn lacunary_blocks_match_frozen_indices() {
    let theta = LacunarySchedule::pow2();
    for (c, want) in [(0.9, vec![11, 21, 31, 41, 51, 61]), (0.5, vec![3, 5, 7, 9, 11, 13])] {
        let p = SeparationParams::new(ModulusFunction::log1p(), c, 6).with_theta(theta.clone());
        let sep = build_lacunary_separation(&p).unwrap();
        assert_eq!(sep.schedule.r.as_ref().unwrap(), &want);
        let ui = build_lacunary_ui_separation(&p).unwrap();
        assert_eq!(ui.schedule.r.as_ref().unwrap(), &want);
        // reference scan over h_r = 2^(r-1)
        let mut start = 1;
        for (k, &r) in want.iter().enumerate() {
            let e = 0.5f64.powi(k as i32 + 1);
            let ok = |r: usize| {
                let h = if r == 1 { 2.0 } else { 2f64.powi(r as i32 - 1) };
                log1p(h * e) >= c * log1p(h) && h * (1.0 - e) - 1.0 > 0.0
            };
            assert!(ok(r));
            assert!((start..r).all(|q| !ok(q)), "block {r} is not the first qualifying one");
            start = r + 1;
        }
        for (k, &r) in want.iter().enumerate() {
            assert_eq!(sep.schedule.m[k], 1u64 << r);
            assert_eq!(sep.schedule.h.as_ref().unwrap()[k], 1u64 << (r - 1));
        }
    }
}

#[test]
fn lacunary_ui_values_fill_their_blocks() {
    let theta = LacunarySchedule::pow2();
    let p = SeparationParams::new(ModulusFunction::log1p(), 0.5, 4).with_theta(theta.clone());
    let sep = build_lacunary_ui_separation(&p).unwrap();
    let x = Point::scalar(0.0);
    for (k, &r) in sep.schedule.r.as_ref().unwrap().iter().enumerate() {
        let (lo, hi) = theta.block(r).unwrap();
        let e = sep.schedule.eps[k];
        for idx in [lo + 1, (lo + hi) / 2, hi] {
            assert_eq!(gap(&x, idx, &sep.sequence).unwrap(), e);
        }
        assert_eq!(gap(&x, lo, &sep.sequence).unwrap(), 0.0);
    }
}

#[test]
fn constructions_are_deterministic() {
    let theta = LacunarySchedule::pow2();
    for kind in [
        ConstructionKind::StatSeparation,
        ConstructionKind::CesaroSeparation,
        ConstructionKind::UiSeparation,
        ConstructionKind::LacunarySeparation,
        ConstructionKind::LacunaryUiSeparation,
    ] {
        let p = SeparationParams::new(ModulusFunction::log1p(), 0.5, 5).with_theta(theta.clone());
        let a = build(kind, &p).unwrap();
        let b = build(kind, &p).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(schedule_sequence(&a.schedule).unwrap(), a.sequence);
        verify_schedule(&a.schedule, &p.f, Some(&theta)).unwrap();
    }
}

#[test]
fn compatible_moduli_fail_with_the_step_named() {
    let p = SeparationParams::new(ModulusFunction::identity(), 0.9, 4);
    match build_stat_separation(&p) {
        Err(Error::Construction { k, .. }) => assert_eq!(k, 1),
        other => panic!("expected a construction failure, got {other:?}"),
    }
    let capped = SeparationParams::new(ModulusFunction::log1p(), 0.5, 8).with_search_cap(1000);
    match build_stat_separation(&capped) {
        Err(Error::Construction { k, .. }) => assert_eq!(k, 6),
        other => panic!("expected a construction failure, got {other:?}"),
    }
}

#[test]
fn tampered_schedules_are_rejected() {
    let f = ModulusFunction::log1p();
    let sep = build_stat_separation(&SeparationParams::new(f.clone(), 0.5, 6)).unwrap();
    let mut s = sep.schedule.clone();
    s.m[3] = s.m[2] + 1;
    assert!(verify_schedule(&s, &f, None).is_err());
    let mut s = sep.schedule.clone();
    s.n[2] += 1;
    assert!(verify_schedule(&s, &f, None).is_err());
    let mut s = sep.schedule;
    s.blocks[4][0] = 1;
    assert!(verify_schedule(&s, &f, None).is_err());
}

#[test]
fn geometric_eps_rule() {
    let p = SeparationParams::new(ModulusFunction::log1p(), 0.5, 4).with_eps_rule(EpsRule::Geom(0.25));
    let sep = build_stat_separation(&p).unwrap();
    assert_eq!(sep.schedule.eps, [0.25, 0.0625, 0.015625, 0.00390625]);
    assert_eq!(sep.schedule.eps_rule, "geom:0.25");
}
