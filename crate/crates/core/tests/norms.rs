use std::f64::consts::PI;

use pwdecay::error::Error;
use pwdecay::geometry::{DyadicRegion, RegionKind};
use pwdecay::norms::{dyadic_h1_check, dyadic_h1_sweep, hardy_check, le_norm, DiscreteField, NormKind};
use pwdecay::simulator::{evolve, GridSpec, InitialData, ModelEquation};

const KINDS: [NormKind; 3] = [NormKind::Le, NormKind::Le1, NormKind::LeStar];

fn static_field(slab: f64, r_max: f64, nr: usize) -> DiscreteField {
    DiscreteField::from_fn((0.0, slab), r_max, (4, nr), |_, r| {
        let q = 1.0 + r * r;
        (1.0 / q, 0.0, -2.0 * r / (q * q))
    })
    .unwrap()
}

/// `ψ = [G(t+r) − G(t−r)]/r`, `G = 1/(1+x²)`: a free outgoing/incoming pair.
fn free_wave(t: f64, r: f64) -> (f64, f64, f64) {
    let g = |x: f64| 1.0 / (1.0 + x * x);
    let dg = |x: f64| -2.0 * x / (1.0 + x * x).powi(2);
    let psi = (g(t + r) - g(t - r)) / r;
    let psi_t = (dg(t + r) - dg(t - r)) / r;
    let psi_r = (dg(t + r) + dg(t - r)) / r - psi / r;
    (psi, psi_t, psi_r)
}

fn bump(center: f64, width: f64) -> impl Fn(f64, f64) -> (f64, f64, f64) + Sync {
    move |_, r| {
        let z = (r - center) / width;
        if z.abs() >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let b = (1.0 - 1.0 / (1.0 - z * z)).exp();
        (b, 0.0, b * (-2.0 * z / (1.0 - z * z).powi(2)) / width)
    }
}

#[test]
fn zero_field() {
    let f = DiscreteField::from_fn((0.0, 4.0), 20.0, (8, 200), |_, _| (0.0, 0.0, 0.0)).unwrap();
    for k in KINDS {
        let rep = le_norm(&f, k).unwrap();
        assert_eq!(rep.value, 0.0);
        assert!(!rep.truncated);
    }
}

#[test]
fn static_field_le_is_innermost_annulus() {
    // ∫ r²⟨r⟩^{−5} dr = r³ / (3⟨r⟩³)
    let antideriv = |r: f64| r.powi(3) / (3.0 * (1.0 + r * r).powf(1.5));
    let slab = 3.0;
    let rep = le_norm(&static_field(slab, 64.0, 6400), NormKind::Le).unwrap();
    let exact = (4.0 * PI * slab * antideriv(2.0)).sqrt();
    assert!((rep.value - exact).abs() < 1e-4 * exact, "{} vs {exact}", rep.value);
    let sup_at = rep.annuli.iter().enumerate().max_by(|a, b| a.1.terms[0].total_cmp(&b.1.terms[0])).unwrap().0;
    assert_eq!(sup_at, 0);
    for a in &rep.annuli[1..] {
        if a.partial {
            continue;
        }
        let e = (4.0 * PI * slab * (antideriv(a.hi) - antideriv(a.lo))).sqrt();
        assert!((a.terms[0] - e).abs() < 1e-3 * e);
    }
    assert!(!rep.truncated);
}

#[test]
fn static_field_lestar_grows_per_annulus() {
    // ⟨r⟩^{1/2}⟨r⟩^{−2} over (R, 2R) tends to (4πT ln 2)^{1/2} per annulus
    let slab = 2.0;
    let limit = (4.0 * PI * slab * 2f64.ln()).sqrt();
    let small = le_norm(&static_field(slab, 64.0, 3200), NormKind::LeStar).unwrap();
    let large = le_norm(&static_field(slab, 256.0, 12800), NormKind::LeStar).unwrap();
    assert!(small.truncated && large.truncated);
    let last = large.annuli.iter().rev().find(|a| !a.partial).unwrap();
    assert!((last.terms[0] - limit).abs() < 0.01 * limit);
    let gained = large.value - small.value;
    assert!((gained - 2.0 * limit).abs() < 0.05 * limit, "{gained}");
}

#[test]
fn scaling() {
    let f = DiscreteField::from_fn((100.0, 110.0), 40.0, (40, 320), free_wave).unwrap();
    for k in KINDS {
        let base = le_norm(&f, k).unwrap().value;
        assert_eq!(le_norm(&f.scaled(-4.0), k).unwrap().value, 4.0 * base);
        let v = le_norm(&f.scaled(0.3), k).unwrap().value;
        assert!((v - 0.3 * base).abs() <= 1e-12 * base);
    }
}

#[test]
fn mesh_halving() {
    let coarse = DiscreteField::from_fn((20.0, 40.0), 64.0, (80, 256), free_wave).unwrap();
    let fine = DiscreteField::from_fn((20.0, 40.0), 64.0, (160, 512), free_wave).unwrap();
    for k in KINDS {
        let (a, b) = (le_norm(&coarse, k).unwrap().value, le_norm(&fine, k).unwrap().value);
        assert!((a - b).abs() <= 0.05 * b, "{k:?}: {a} vs {b}");
    }
}

#[test]
fn derivative_samples_are_consistent() {
    let f = DiscreteField::from_fn((20.0, 40.0), 64.0, (160, 512), free_wave).unwrap();
    let g = DiscreteField::from_fn((20.0, 40.0), 64.0, (320, 1024), free_wave).unwrap();
    let (a, b) = (f.derivative_mismatch(), g.derivative_mismatch());
    assert!(a / b > 3.5 && a / b < 4.5, "{a} {b}");
}

#[test]
fn coarse_lattice_rejected() {
    let f = DiscreteField::from_fn((0.0, 1.0), 40.0, (4, 20), free_wave).unwrap();
    assert!(matches!(le_norm(&f, NormKind::Le), Err(Error::Usage(_))));
}

#[test]
fn csv_roundtrip() {
    let f = DiscreteField::from_fn((10.0, 12.0), 8.0, (5, 16), free_wave).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let g = DiscreteField::read_csv(buf.as_slice()).unwrap();
    assert_eq!((g.nt, g.nr), (5, 16));
    assert!((g.dt - f.dt).abs() < 1e-12 && (g.dr - f.dr).abs() < 1e-12);
    assert!(g.value.iter().zip(&f.value).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1e-300)));
}

fn single_time(f: impl Fn(f64, f64) -> (f64, f64, f64) + Sync, r_max: f64, nr: usize) -> DiscreteField {
    DiscreteField::from_fn((-0.5, 0.5), r_max, (1, nr), f).unwrap()
}

/// Composite Simpson on the analytic bump, independent of the lattice.
fn hardy_direct(center: f64, width: f64, gamma: f64, t: f64) -> f64 {
    let f = bump(center, width);
    let (a, b, n) = (center - width, center + width, 20_000);
    let h = (b - a) / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let r = a + k as f64 * h;
        let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let (v, _, dv) = f(t, r);
        let jp = (1.0 + (t - r) * (t - r)).sqrt();
        num += w * r * r * v * v * jp.powf(-gamma);
        den += w * r * r * dv * dv * jp.powf(2.0 - gamma);
    }
    num / den
}

#[test]
fn hardy_matches_direct_quadrature() {
    let rep = hardy_check(&single_time(bump(5.0, 2.0), 10.0, 4000), 2.0).unwrap();
    let exact = hardy_direct(5.0, 2.0, 2.0, 0.0);
    assert!((rep.ratio - exact).abs() < 1e-3 * exact, "{} vs {exact}", rep.ratio);
}

#[test]
fn hardy_narrower_bump_has_smaller_ratio() {
    let mut last = f64::INFINITY;
    for w in [2.0, 1.0, 0.5, 0.25] {
        let r = hardy_check(&single_time(bump(5.0, w), 10.0, 8000), 2.0).unwrap().ratio;
        assert!(r < last, "width {w}: {r} !< {last}");
        last = r;
    }
}

#[test]
fn hardy_guards() {
    let f = single_time(bump(5.0, 1.0), 10.0, 1000);
    assert!(matches!(hardy_check(&f, 3.0), Err(Error::Unsupported(_))));
    assert!(matches!(hardy_check(&f, 1.0), Err(Error::Unsupported(_))));
    let flat = single_time(|_, r| (if r < 5.0 { 1.0 } else { 0.0 }, 0.0, 0.0), 10.0, 1000);
    assert!(matches!(hardy_check(&flat, 2.0), Err(Error::Usage(_))));
}

/// Twenty bump/weight cases, each bounded by the constant fitted for its γ.
fn hardy_suite() -> Vec<(f64, Vec<f64>)> {
    let bumps = [(5.0, 1.0), (5.0, 2.0), (10.0, 3.0), (20.0, 1.0), (3.0, 2.5)];
    [1.5, 2.0, 2.5, 4.0]
        .into_iter()
        .map(|g| {
            let ratios = bumps
                .iter()
                .map(|&(c, w)| {
                    let f = DiscreteField::from_fn((0.0, 40.0), 30.0, (8, 3000), bump(c, w)).unwrap();
                    hardy_check(&f, g).unwrap().ratio
                })
                .collect();
            (g, ratios)
        })
        .collect()
}

#[test]
fn hardy_suite_bounded() {
    let suite = hardy_suite();
    assert_eq!(suite.iter().map(|s| s.1.len()).sum::<usize>(), 20);
    for (g, ratios) in suite {
        let fitted = ratios.iter().copied().fold(0.0, f64::max);
        assert!(fitted.is_finite() && fitted < 10.0, "γ={g}: {fitted}");
        assert!(ratios.iter().all(|&r| r > 0.0 && r <= fitted));
    }
}

/// The constant is not uniform in the support scale: dilating a bump by λ
/// (support and times together) grows the ratio like λ^{γ−1}.
#[test]
fn hardy_constant_grows_with_scale() {
    for g in [1.5, 2.0, 2.5, 4.0] {
        let ratio = |lam: f64| {
            let (c, w) = (5.0 * lam, 4.0 * lam);
            let f = DiscreteField::from_fn((0.0, 3.0 * c), c + w + 1.0, (30, 4000), bump(c, w)).unwrap();
            hardy_check(&f, g).unwrap().ratio
        };
        let slope = (ratio(64.0) / ratio(16.0)).ln() / 4f64.ln();
        assert!((slope - (g - 1.0)).abs() < 0.4, "γ={g}: slope {slope}");
    }
}

fn h1_ratio(nt: usize, nr: usize) -> f64 {
    let f = DiscreteField::from_fn((100.0, 300.0), 30.0, (nt, nr), free_wave).unwrap();
    let region = DyadicRegion { kind: RegionKind::Ctr, big_t: 128.0, scale: 8.0, base: 2.0 };
    dyadic_h1_check(&f, &ModelEquation::flat(), &region).unwrap().ratio.unwrap()
}

#[test]
fn h1_free_wave_mesh_stable() {
    let (a, b) = (h1_ratio(400, 60), h1_ratio(800, 120));
    assert!(a.is_finite() && b > 0.0);
    assert!((a - b).abs() <= 0.2 * b, "{a} vs {b}");
}

#[test]
fn h1_zero_field_degenerate() {
    let f = DiscreteField::from_fn((100.0, 300.0), 30.0, (100, 60), |_, _| (0.0, 0.0, 0.0)).unwrap();
    let region = DyadicRegion { kind: RegionKind::Ctr, big_t: 128.0, scale: 8.0, base: 2.0 };
    let rep = dyadic_h1_check(&f, &ModelEquation::flat(), &region).unwrap();
    assert!(rep.degenerate && rep.ratio.is_none());
}

#[test]
fn h1_region_outside_lattice() {
    let f = DiscreteField::from_fn((100.0, 200.0), 30.0, (100, 60), free_wave).unwrap();
    let region = DyadicRegion { kind: RegionKind::Ctr, big_t: 128.0, scale: 8.0, base: 2.0 };
    assert!(matches!(dyadic_h1_check(&f, &ModelEquation::flat(), &region), Err(Error::Usage(_))));
}

#[test]
fn h1_potential_solution_bounded() {
    let eq = ModelEquation { delta: Some(0.5), amp_v: 0.1, ..ModelEquation::flat() };
    let grid = GridSpec { u_min: 0.0, u_max: 160.0, v_max: 200.0, h: 0.125, output_stride: 2 };
    let out = evolve(&grid, &eq, &InitialData::default(), &[]).unwrap();
    let field = DiscreteField::from_slices(&out, (50.0, 150.0), 40.0, (400, 160)).unwrap();
    let (reports, max) = dyadic_h1_sweep(&field, &eq, 2.0).unwrap();
    assert!(reports.len() >= 4, "{}", reports.len());
    assert!(max.is_finite() && max > 0.0);
    assert!(reports.iter().all(|r| r.ratio.is_some_and(|x| x <= max)));
}
