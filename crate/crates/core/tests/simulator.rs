use pwdecay::error::Error;
use pwdecay::fitter::local_exponent;
use pwdecay::simulator::{
    evolve, evolve_with, forced_error, manufactured_suite, GridSpec, InitialData, ModelEquation, SamplerSpec,
};

fn grid(u_max: f64, v_max: f64, h: f64) -> GridSpec {
    GridSpec { u_min: 0.0, u_max, v_max, h, output_stride: 1 }
}

fn perturbed() -> ModelEquation {
    ModelEquation { sigma: Some(0.5), delta: Some(0.5), amp_v: 0.3, amp_h: 0.2, amp_a: 0.2, ell: 0 }
}

#[test]
fn manufactured_convergence() {
    for eq in [ModelEquation::flat(), perturbed()] {
        for m in manufactured_suite() {
            let coarse = forced_error(&grid(4.0, 8.0, 1.0 / 8.0), &eq, &m).unwrap();
            let fine = forced_error(&grid(4.0, 8.0, 1.0 / 16.0), &eq, &m).unwrap();
            let ratio = coarse / fine;
            assert!((3.5..=4.5).contains(&ratio), "{} ell={}: ratio {ratio}", m.name, eq.ell);
        }
    }
}

#[test]
fn flat_huygens() {
    let data = InitialData::default();
    let out = evolve(&grid(60.0, 80.0, 1.0 / 8.0), &ModelEquation::flat(), &data, &[SamplerSpec::FixedR { r: 5.0 }])
        .unwrap();
    let transit = data.center + data.width + 5.0;
    let tail: Vec<_> = out.series[0].points.iter().filter(|p| p.0 > transit).collect();
    assert!(tail.len() > 100);
    assert!(tail.iter().all(|p| p.1.abs() <= 1e-10));
    // the pulse does pass through
    assert!(out.series[0].points.iter().any(|p| p.1.abs() > 0.1));
}

#[test]
fn fixed_u_constant_after_transit() {
    let data = InitialData::default();
    let out = evolve(&grid(20.0, 60.0, 1.0 / 8.0), &ModelEquation::flat(), &data, &[SamplerSpec::FixedU { u: 9.0 }])
        .unwrap();
    let late: Vec<f64> = out.series[0].points.iter().filter(|p| p.0 > 15.0).map(|p| p.1).collect();
    assert!(late.iter().all(|v| (v + data.value(9.0)).abs() < 1e-10));
}

#[test]
fn center_and_bounds() {
    let eq = perturbed();
    let out = evolve(&grid(16.0, 32.0, 1.0 / 8.0), &eq, &InitialData::default(), &[]).unwrap();
    let center = out.sample(&SamplerSpec::FixedR { r: 0.0 }).unwrap();
    assert!(!center.points.is_empty());
    assert!(center.points.iter().all(|p| p.1 == 0.0));
    assert!(matches!(out.sample(&SamplerSpec::FixedT { t: 40.0 }), Err(Error::Usage(_))));
    let along_t = out.sample(&SamplerSpec::FixedT { t: 12.0 }).unwrap();
    assert!(along_t.points.windows(2).all(|w| w[1].0 > w[0].0));
}

#[test]
fn linear_in_data() {
    let g = grid(24.0, 40.0, 1.0 / 8.0);
    let eq = perturbed();
    let d1 = InitialData::default();
    let d2 = InitialData { center: 16.0, width: 3.0, amplitude: -0.7 };
    let (a, b) = (1.5, -2.25);
    let curves = [SamplerSpec::FixedR { r: 4.0 }, SamplerSpec::FixedU { u: 10.0 }];
    let s1 = evolve(&g, &eq, &d1, &curves).unwrap();
    let s2 = evolve(&g, &eq, &d2, &curves).unwrap();
    let mix = evolve_with(&g, &eq, &|v| a * d1.value(v) + b * d2.value(v), &curves).unwrap();
    for k in 0..curves.len() {
        let scale = mix.series[k].points.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
        for ((p, q), r) in mix.series[k].points.iter().zip(&s1.series[k].points).zip(&s2.series[k].points) {
            assert!((p.1 - a * q.1 - b * r.1).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn flat_time_reversal() {
    // (u, v) -> (L−v, L−u) maps the triangle to itself and t to L−t
    let l = 48.0;
    let g = GridSpec { output_stride: 4, ..grid(l, l, 1.0 / 8.0) };
    let d = InitialData { center: 12.0, width: 4.0, amplitude: 1.0 };
    let mirrored = InitialData { center: l - 12.0, ..d.clone() };
    let fwd = evolve(&g, &ModelEquation::flat(), &d, &[]).unwrap();
    let rev = evolve(&g, &ModelEquation::flat(), &mirrored, &[]).unwrap();
    for t0 in [10.0, 17.5, 24.0, 31.0] {
        let a = fwd.sample(&SamplerSpec::FixedT { t: t0 }).unwrap();
        let b = rev.sample(&SamplerSpec::FixedT { t: l - t0 }).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.0 - q.0).abs() < 1e-12);
            assert!((p.1 + q.1).abs() < 1e-9, "t={t0} r={}: {} vs {}", p.0, p.1, q.1);
        }
    }
}

#[test]
fn small_perturbations_stay_bounded() {
    for (s, d) in [(0.25, 0.25), (0.25, 1.0), (1.0, 0.25), (2.0, 2.0)] {
        for ell in [0, 1, 2] {
            let eq = ModelEquation { sigma: Some(s), delta: Some(d), amp_v: 0.1, amp_h: 0.1, amp_a: 0.1, ell };
            let out = evolve(&grid(80.0, 120.0, 1.0 / 8.0), &eq, &InitialData::default(), &[]).unwrap();
            assert!(out.sup_abs <= 10.0, "σ={s} δ={d} ℓ={ell}: {}", out.sup_abs);
        }
    }
}

#[test]
fn deterministic() {
    let g = grid(30.0, 50.0, 1.0 / 8.0);
    let curves = [SamplerSpec::FixedR { r: 10.0 }];
    let a = evolve(&g, &perturbed(), &InitialData::default(), &curves).unwrap();
    let b = evolve(&g, &perturbed(), &InitialData::default(), &curves).unwrap();
    assert_eq!(a.series, b.series);
}

#[test]
fn potential_tail_settles_at_two_plus_delta() {
    let eq = ModelEquation { delta: Some(0.5), amp_v: 0.1, ..ModelEquation::flat() };
    let g = GridSpec { u_min: 0.0, u_max: 1000.0, v_max: 1010.0, h: 0.125, output_stride: 64 };
    let out = evolve(&g, &eq, &InitialData::default(), &[SamplerSpec::FixedR { r: 10.0 }]).unwrap();
    let tail: Vec<_> =
        out.series[0].points.iter().copied().filter(|p| p.0 >= 100.0 && p.0 <= 1000.0).step_by(16).collect();
    let loc = local_exponent(&tail).unwrap();
    let last = loc.last().unwrap().1;
    assert!((last - 2.5).abs() < 0.05, "{last}");
    // the approach is from above here, and monotone
    assert!(loc.windows(2).all(|w| w[1].1 < w[0].1 + 1e-3));
    assert!(loc.iter().all(|p| p.1 > 2.5));
}
