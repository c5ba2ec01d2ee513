//! Local-energy norms and auxiliary inequalities on sampled radial fields.
//!
//! Fields live on a cell-centred `(t, r)` lattice over a slab
//! `[T₁, T₂] × [0, r_max]`; integrals are midpoint sums with the spherical
//! weight `4πr²`. Finite slabs can support local energy decay, never
//! certify it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DyadicRegion, RegionKind, ENLARGEMENT};
use crate::simulator::{FieldSlices, ModelEquation, SamplerSpec, Tortoise};

/// Cells needed inside `{r < 2}` before the innermost annulus counts as resolved.
pub const MIN_INNER_CELLS: usize = 4;
/// Relative size of the outermost annulus term above which a norm is flagged
/// as truncated by the lattice.
pub const TRUNCATION_TOL: f64 = 1e-3;
pub const NOISE_FLOOR: f64 = 1e-300;

pub const SLAB_LIMITATION: &str =
    "norms are over a finite slab; they can support local energy decay but not certify it";

fn japanese(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteField {
    pub t_start: f64,
    pub dt: f64,
    pub nt: usize,
    pub r_start: f64,
    pub dr: f64,
    pub nr: usize,
    /// Row-major by time: index `k·nr + m`.
    pub value: Vec<f64>,
    pub d_t: Vec<f64>,
    pub d_r: Vec<f64>,
}

impl DiscreteField {
    /// Sample `f(t, r) = (value, ∂_t, ∂_r)` at cell centres of
    /// `[t1, t2] × [0, r_max]`.
    pub fn from_fn(
        (t1, t2): (f64, f64),
        r_max: f64,
        (nt, nr): (usize, usize),
        f: impl Fn(f64, f64) -> (f64, f64, f64) + Sync,
    ) -> Result<Self> {
        if !(t2 > t1 && r_max > 0.0 && nt > 0 && nr > 0) {
            return Err(Error::usage("empty lattice"));
        }
        let (dt, dr) = ((t2 - t1) / nt as f64, r_max / nr as f64);
        let cells: Vec<(f64, f64, f64)> = (0..nt * nr)
            .into_par_iter()
            .map(|idx| f(t1 + (idx / nr) as f64 * dt + 0.5 * dt, (idx % nr) as f64 * dr + 0.5 * dr))
            .collect();
        let field = DiscreteField {
            t_start: t1,
            dt,
            nt,
            r_start: 0.0,
            dr,
            nr,
            value: cells.iter().map(|c| c.0).collect(),
            d_t: cells.iter().map(|c| c.1).collect(),
            d_r: cells.iter().map(|c| c.2).collect(),
        };
        field.validate()?;
        Ok(field)
    }

    /// `ψ = φ/r` from a simulation, with derivatives by centred differences.
    pub fn from_slices(slices: &FieldSlices, (t1, t2): (f64, f64), r_max: f64, (nt, nr): (usize, usize)) -> Result<Self> {
        let (dt, dr) = ((t2 - t1) / nt as f64, r_max / nr as f64);
        let radii: Vec<f64> = (0..nr).map(|m| (m as f64 + 0.5) * dr).collect();
        let rows = (0..nt)
            .map(|k| {
                let t = t1 + (k as f64 + 0.5) * dt;
                let mut s = slices.sample(&SamplerSpec::FixedT { t })?;
                // φ vanishes at the centre
                if s.points.first().is_some_and(|p| p.0 > 0.0) {
                    s.points.insert(0, (0.0, 0.0));
                }
                radii
                    .iter()
                    .map(|&r| interpolate(&s.points, r).map(|phi| phi / r))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let value: Vec<f64> = rows.concat();
        let diff = |i: usize, n: usize, step: f64, at: &dyn Fn(usize) -> f64| {
            if n < 2 {
                0.0
            } else if i == 0 {
                (at(1) - at(0)) / step
            } else if i + 1 == n {
                (at(i) - at(i - 1)) / step
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * step)
            }
        };
        let mut d_t = vec![0.0; nt * nr];
        let mut d_r = vec![0.0; nt * nr];
        for k in 0..nt {
            for m in 0..nr {
                d_t[k * nr + m] = diff(k, nt, dt, &|kk| value[kk * nr + m]);
                d_r[k * nr + m] = diff(m, nr, dr, &|mm| value[k * nr + mm]);
            }
        }
        let field = DiscreteField { t_start: t1, dt, nt, r_start: 0.0, dr, nr, value, d_t, d_r };
        field.validate()?;
        Ok(field)
    }

    /// Rows `t, r, value, dt, dr` on a regular lattice of cell centres, in
    /// any order; `#` lines and a header row are skipped.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
                continue;
            }
            let vals = (0..5)
                .map(|k| rec.get(k).and_then(|s| s.parse::<f64>().ok()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::usage(format!("bad field row {rec:?}")))?;
            rows.push(vals);
        }
        let axis = |col: usize| -> Result<(f64, f64, usize)> {
            let mut xs: Vec<f64> = rows.iter().map(|r| r[col]).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
            if xs.len() < 2 {
                return Err(Error::usage("field lattice needs at least two samples per axis"));
            }
            let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
            if xs.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step) {
                return Err(Error::usage("field lattice is not regular"));
            }
            Ok((xs[0] - 0.5 * step, step, xs.len()))
        };
        let (t_start, dt, nt) = axis(0)?;
        let (r_start, dr, nr) = axis(1)?;
        if rows.len() != nt * nr {
            return Err(Error::usage(format!("{} rows for a {nt}×{nr} lattice", rows.len())));
        }
        let mut field = DiscreteField {
            t_start,
            dt,
            nt,
            r_start,
            dr,
            nr,
            value: vec![0.0; nt * nr],
            d_t: vec![0.0; nt * nr],
            d_r: vec![0.0; nt * nr],
        };
        for row in &rows {
            let k = ((row[0] - t_start) / dt - 0.5).round() as usize;
            let m = ((row[1] - r_start) / dr - 0.5).round() as usize;
            let idx = k * nr + m;
            field.value[idx] = row[2];
            field.d_t[idx] = row[3];
            field.d_r[idx] = row[4];
        }
        field.validate()?;
        Ok(field)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "r", "value", "dt", "dr"])?;
        for k in 0..self.nt {
            for m in 0..self.nr {
                let i = k * self.nr + m;
                w.serialize((self.t(k), self.r(m), self.value[i], self.d_t[i], self.d_r[i]))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dr > 0.0) {
            return Err(Error::Validation("lattice spacings must be positive".into()));
        }
        let n = self.nt * self.nr;
        if n == 0 || self.value.len() != n || self.d_t.len() != n || self.d_r.len() != n {
            return Err(Error::Validation("field arrays do not match the lattice".into()));
        }
        if self.r_start < -1e-12 {
            return Err(Error::Validation("negative radii".into()));
        }
        if self.value.iter().chain(&self.d_t).chain(&self.d_r).any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite field sample".into()));
        }
        Ok(())
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t_start + (k as f64 + 0.5) * self.dt
    }

    pub fn r(&self, m: usize) -> f64 {
        self.r_start + (m as f64 + 0.5) * self.dr
    }

    pub fn slab(&self) -> (f64, f64) {
        (self.t_start, self.t_start + self.nt as f64 * self.dt)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect();
        DiscreteField { value: s(&self.value), d_t: s(&self.d_t), d_r: s(&self.d_r), ..self.clone() }
    }

    /// Largest gap between the derivative samples and centred differences
    /// of the values, over interior cells.
    pub fn derivative_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.nt.saturating_sub(1) {
            for m in 1..self.nr.saturating_sub(1) {
                let i = k * self.nr + m;
                let ft = (self.value[i + self.nr] - self.value[i - self.nr]) / (2.0 * self.dt);
                let fr = (self.value[i + 1] - self.value[i - 1]) / (2.0 * self.dr);
                worst = worst.max((ft - self.d_t[i]).abs()).max((fr - self.d_r[i]).abs());
            }
        }
        worst
    }

    fn cell_measure(&self, m: usize) -> f64 {
        let r = self.r(m);
        4.0 * PI * r * r * self.dr * self.dt
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> Result<f64> {
    let k = points.partition_point(|p| p.0 < x);
    if k == 0 {
        return points.first().filter(|p| (p.0 - x).abs() < 1e-12).map(|p| p.1).ok_or_else(|| {
            Error::usage(format!("r = {x} below the sampled range"))
        });
    }
    if k == points.len() {
        return Err(Error::usage(format!("r = {x} beyond the sampled range")));
    }
    let ((x0, y0), (x1, y1)) = (points[k - 1], points[k]);
    Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[serde(rename = "LE")]
    Le,
    #[serde(rename = "LE1")]
    Le1,
    #[serde(rename = "LEstar")]
    LeStar,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LE" | "le" => Ok(NormKind::Le),
            "LE1" | "le1" => Ok(NormKind::Le1),
            "LEstar" | "LE*" | "lestar" => Ok(NormKind::LeStar),
            _ => Err(Error::usage(format!("unknown norm kind {s:?}"))),
        }
    }
}

/// Annuli `{r < 2}` and `(R, 2R)` for `R = 2, 4, 8, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusTerm {
    pub lo: f64,
    pub hi: f64,
    /// One entry per component of the norm: `[u]` for LE and LE*,
    /// `[∂u, u/⟨r⟩]` for LE1.
    pub terms: Vec<f64>,
    /// The lattice stops inside this annulus.
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub value: f64,
    pub slab: (f64, f64),
    pub annuli: Vec<AnnulusTerm>,
    pub truncated: bool,
    pub note: String,
}

fn annulus_edges(r_max: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 2.0)];
    let mut big_r = 2.0;
    while big_r < r_max {
        out.push((big_r, 2.0 * big_r));
        big_r *= 2.0;
    }
    out
}

/// `‖⟨r⟩^{p} g‖_{L²(slab × A)}` per annulus, for each component `g` of `integrand`.
fn annulus_norms(
    field: &DiscreteField,
    p: f64,
    components: usize,
    integrand: impl Fn(usize) -> Vec<f64> + Sync,
) -> Vec<AnnulusTerm> {
    let r_max = field.r_start + field.nr as f64 * field.dr;
    annulus_edges(r_max)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut sums = vec![0.0; components];
            for m in 0..field.nr {
                let r = field.r(m);
                if r < lo || r >= hi {
                    continue;
                }
                let w = japanese(r).powf(2.0 * p) * field.cell_measure(m);
                for k in 0..field.nt {
                    for (s, g) in sums.iter_mut().zip(integrand(k * field.nr + m)) {
                        *s += w * g * g;
                    }
                }
            }
            AnnulusTerm { lo, hi, terms: sums.into_iter().map(f64::sqrt).collect(), partial: hi > r_max }
        })
        .collect()
}

pub fn le_norm(field: &DiscreteField, kind: NormKind) -> Result<NormReport> {
    field.validate()?;
    let inner = (0..field.nr).filter(|&m| field.r(m) < 2.0).count();
    if field.r_start > field.dr || inner < MIN_INNER_CELLS {
        return Err(Error::usage(format!(
            "lattice too coarse for the annulus r<2: {inner} cells, need {MIN_INNER_CELLS}"
        )));
    }
    let (annuli, value, truncated) = match kind {
        NormKind::Le | NormKind::Le1 => {
            let annuli = if kind == NormKind::Le {
                annulus_norms(field, -0.5, 1, |i| vec![field.value[i]])
            } else {
                annulus_norms(field, -0.5, 2, |i| {
                    let r = field.r(i % field.nr);
                    vec![field.d_t[i].hypot(field.d_r[i]), field.value[i] / japanese(r)]
                })
            };
            let comps = annuli[0].terms.len();
            let mut value = 0.0;
            let mut truncated = false;
            for c in 0..comps {
                let sup = annuli.iter().map(|a| a.terms[c]).fold(0.0, f64::max);
                let last = annuli.last().expect("nonempty").terms[c];
                truncated |= sup > 0.0 && last >= (1.0 - TRUNCATION_TOL) * sup;
                value += sup;
            }
            (annuli, value, truncated)
        }
        NormKind::LeStar => {
            let annuli = annulus_norms(field, 0.5, 1, |i| vec![field.value[i]]);
            let value: f64 = annuli.iter().map(|a| a.terms[0]).sum();
            let last = annuli.last().expect("nonempty").terms[0];
            (annuli, value, value > 0.0 && last > TRUNCATION_TOL * value)
        }
    };
    Ok(NormReport { kind, value, slab: field.slab(), annuli, truncated, note: SLAB_LIMITATION.into() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub gamma: f64,
    /// Max over sampled times.
    pub ratio: f64,
    pub at_t: f64,
    pub per_time: Vec<(f64, f64)>,
}

/// `max_t ∫ f²⟨t−r⟩^{−γ} dx / ∫ (∂_r f)²⟨t−r⟩^{2−γ} dx`, for `γ > 1`, `γ ≠ 3`.
pub fn hardy_check(field: &DiscreteField, gamma: f64) -> Result<HardyReport> {
    field.validate()?;
    if !(gamma > 1.0) || gamma == 3.0 {
        return Err(Error::Unsupported(format!("Hardy weight exponent γ = {gamma} needs γ > 1, γ ≠ 3")));
    }
    let mut per_time = Vec::with_capacity(field.nt);
    for k in 0..field.nt {
        let t = field.t(k);
        let (mut num, mut den) = (0.0, 0.0);
        for m in 0..field.nr {
            let i = k * field.nr + m;
            let w = japanese(t - field.r(m));
            let mu = field.cell_measure(m);
            num += mu * field.value[i].powi(2) * w.powf(-gamma);
            den += mu * field.d_r[i].powi(2) * w.powf(2.0 - gamma);
        }
        if num == 0.0 && den == 0.0 {
            continue;
        }
        if den <= NOISE_FLOOR {
            return Err(Error::usage(format!("Hardy denominator vanishes at t = {t} (∂_r f ≡ 0)")));
        }
        per_time.push((t, num / den));
    }
    let &(at_t, ratio) = per_time
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::usage("field vanishes on the whole slab"))?;
    Ok(HardyReport { gamma, ratio, at_t, per_time })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub big_t: f64,
    pub scale: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when both sides vanish.
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

/// `R‖∂w‖_{L²(C)} / (‖w_{≤1}‖_{L²(C̃)} + R²‖Pw‖_{L²(C̃)})` on an interior
/// cell `C = C_T^R` and its enlargement `C̃`. `w_{≤1}` is `w, Sw, ∂w`
/// (the angular derivatives vanish); `Pw` is formed by differencing.
pub fn dyadic_h1_check(field: &DiscreteField, eq: &ModelEquation, region: &DyadicRegion) -> Result<H1Report> {
    field.validate()?;
    eq.validate()?;
    let (big_t, big_r) = (region.big_t, region.scale);
    if region.kind != RegionKind::Ctr || !(1.0 <= big_r && big_r <= 3.0 * big_t / 8.0) {
        return Err(Error::usage(format!("need an interior r-cell with 1 ≤ R ≤ 3T/8, got {region:?}")));
    }
    let (t_lo, t_hi) = (big_t / ENLARGEMENT, 2.0 * big_t * ENLARGEMENT);
    let r_hi = big_r * region.base * ENLARGEMENT;
    let (s_lo, s_hi) = field.slab();
    let r_max = field.r_start + field.nr as f64 * field.dr;
    if t_lo < s_lo + field.dt || t_hi > s_hi - field.dt || r_hi > r_max - field.dr {
        return Err(Error::usage(format!("region T={big_t} R={big_r} is not inside the lattice interior")));
    }
    let x_max = 2.0 * r_max + 1.0;
    let tortoise = Tortoise::new(eq, field.dr / 8.0, x_max);
    let profile: Vec<(f64, f64, f64, f64)> = (0..field.nr)
        .map(|m| {
            let r = field.r(m);
            let x = tortoise.x_of(r).unwrap_or(r);
            let (big_f, a) = eq.coefficients(x, r);
            let df = (eq.f(r + 1e-5) - eq.f(r - 1e-5)) / 2e-5;
            (eq.f(r), df, big_f, -4.0 * a)
        })
        .collect();
    let (nr, dt, dr) = (field.nr, field.dt, field.dr);
    let (mut num, mut low, mut dil, mut grad, mut pw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..field.nt - 1 {
        let t = field.t(k);
        for m in 1..nr - 1 {
            let r = field.r(m);
            let in_core = region.contains(t, r, false);
            if !in_core && !region.contains(t, r, true) {
                continue;
            }
            let i = k * nr + m;
            let (w, wt, wr) = (field.value[i], field.d_t[i], field.d_r[i]);
            let mu = field.cell_measure(m);
            let g2 = wt * wt + wr * wr;
            if in_core {
                num += mu * g2;
            }
            low += mu * w * w;
            dil += mu * (t * wt + r * wr).powi(2);
            grad += mu * g2;
            // φ = r w; Pw = −[φ_tt − φ_xx − 4Fφ − Aφ_x]/r with ∂_x = f ∂_r
            let wtt = (field.d_t[i + nr] - field.d_t[i - nr]) / (2.0 * dt);
            let wrr = (field.d_r[i + 1] - field.d_r[i - 1]) / (2.0 * dr);
            let (f, df, big_f, big_a) = profile[m];
            let (phi, phi_r, phi_rr) = (r * w, w + r * wr, 2.0 * wr + r * wrr);
            let phi_xx = f * f * phi_rr + f * df * phi_r;
            let p = -(r * wtt - phi_xx - 4.0 * big_f * phi - big_a * f * phi_r) / r;
            pw += mu * p * p;
        }
    }
    let numerator = big_r * num.sqrt();
    let denominator = low.sqrt() + dil.sqrt() + grad.sqrt() + big_r * big_r * pw.sqrt();
    let degenerate = denominator <= NOISE_FLOOR;
    let ratio = if degenerate {
        (numerator > NOISE_FLOOR).then_some(f64::INFINITY)
    } else {
        Some(numerator / denominator)
    };
    Ok(H1Report { big_t, scale: big_r, numerator, denominator, ratio, degenerate })
}

/// [`dyadic_h1_check`] over every interior cell `(T, R)`, `R = 1, a, a², …`,
/// that fits inside the lattice. Returns the reports and the largest ratio.
pub fn dyadic_h1_sweep(field: &DiscreteField, eq: &ModelEquation, base: f64) -> Result<(Vec<H1Report>, f64)> {
    let (s_lo, s_hi) = field.slab();
    let mut reports = Vec::new();
    let mut big_t = 1.0;
    while 2.0 * big_t * ENLARGEMENT <= s_hi {
        let mut big_r = 1.0;
        while big_r <= 3.0 * big_t / 8.0 {
            let region = DyadicRegion { kind: RegionKind::Ctr, big_t, scale: big_r, base };
            if big_t / ENLARGEMENT >= s_lo {
                match dyadic_h1_check(field, eq, &region) {
                    Ok(rep) => reports.push(rep),
                    Err(Error::Usage(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            big_r *= base;
        }
        big_t *= 2.0;
    }
    let max = reports.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    Ok((reports, max))
}
