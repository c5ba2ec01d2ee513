//! Double-null evolution of the radial model problem.
//!
//! For `ψ = φ/r` on the static metric `−f dt² + f^{−1}dr² + r²dΩ²` with
//! `f = 1 − h(r)`, plus a radial first-order term and a potential, the
//! equation `□ψ + A·∂ψ + Vψ = 0` becomes, in `u = t−x`, `v = t+x` with the
//! tortoise coordinate `dx = dr/f`,
//!
//! `φ_uv = F(x) φ + a(x) (φ_u − φ_v)`,
//!
//! `F = ¼[fV − f(ℓ(ℓ+1)/r² − h'/r) + A' + A/x]`, `a = −A/4`.
//!
//! The scheme updates the north corner of each null diamond from the other
//! three; `φ(u,u) = 0` at the center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `|φ|` before a run is declared unstable.
pub const BLOWUP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub h: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

fn default_stride() -> usize {
    16
}

fn steps(len: f64, h: f64) -> Option<usize> {
    let n = len / h;
    let k = n.round();
    ((n - k).abs() <= 1e-9 * k.max(1.0) && k >= 1.0).then_some(k as usize)
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::Validation(format!("mesh width must be positive, got {}", self.h)));
        }
        if !(self.u_min < self.u_max && self.u_max <= self.v_max) {
            return Err(Error::Validation(format!(
                "need u_min < u_max <= v_max, got {} {} {}",
                self.u_min, self.u_max, self.v_max
            )));
        }
        if steps(self.u_max - self.u_min, self.h).is_none()
            || steps(self.v_max - self.u_min, self.h).is_none()
        {
            return Err(Error::Validation("grid extents must be integer multiples of h".into()));
        }
        if self.output_stride == 0 {
            return Err(Error::Validation("output_stride must be positive".into()));
        }
        Ok(())
    }

    /// Number of `u` steps and of `v` steps.
    pub fn counts(&self) -> (usize, usize) {
        let nu = steps(self.u_max - self.u_min, self.h).unwrap_or(0);
        let nv = steps(self.v_max - self.u_min, self.h).unwrap_or(0);
        (nu, nv)
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u_min + i as f64 * self.h
    }

    pub fn v(&self, j: usize) -> f64 {
        self.u_min + j as f64 * self.h
    }
}

/// Radial coefficient profiles. `sigma`/`delta` of `None` disable the
/// corresponding coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEquation {
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default, rename = "amp_V")]
    pub amp_v: f64,
    #[serde(default)]
    pub amp_h: f64,
    #[serde(default, rename = "amp_A")]
    pub amp_a: f64,
    #[serde(default)]
    pub ell: u32,
}

impl ModelEquation {
    pub fn flat() -> Self {
        ModelEquation { sigma: None, delta: None, amp_v: 0.0, amp_h: 0.0, amp_a: 0.0, ell: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("amp_V", self.amp_v), ("amp_h", self.amp_h), ("amp_A", self.amp_a)] {
            if !(0.0..=0.5).contains(&a) {
                return Err(Error::Validation(format!("{name} = {a} outside [0, 0.5]")));
            }
        }
        for (name, x) in [("sigma", self.sigma), ("delta", self.delta)] {
            if let Some(x) = x {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::Validation(format!(
                        "{name} = {x} violates decay-rate hypothesis 0<σ,δ<∞"
                    )));
                }
            }
        }
        if self.sigma.is_none() && (self.amp_h > 0.0 || self.amp_a > 0.0) {
            return Err(Error::Validation("amp_h/amp_A need sigma".into()));
        }
        if self.delta.is_none() && self.amp_v > 0.0 {
            return Err(Error::Validation("amp_V needs delta".into()));
        }
        Ok(())
    }

    /// `h(r) = amp_h r² ⟨r⟩^{−3−σ}`, decaying like `r^{−1−σ}`.
    pub fn metric_h(&self, r: f64) -> f64 {
        match self.sigma {
            Some(s) if self.amp_h > 0.0 => self.amp_h * r * r * (1.0 + r * r).powf(-(3.0 + s) / 2.0),
            _ => 0.0,
        }
    }

    /// `h'(r)/r`, regular at the origin.
    fn metric_h_prime_over_r(&self, r: f64) -> f64 {
        match self.sigma {
            Some(s) if self.amp_h > 0.0 => {
                let q = 1.0 + r * r;
                self.amp_h * (2.0 * q.powf(-(3.0 + s) / 2.0) - (3.0 + s) * r * r * q.powf(-(5.0 + s) / 2.0))
            }
            _ => 0.0,
        }
    }

    pub fn potential(&self, r: f64) -> f64 {
        match self.delta {
            Some(d) if self.amp_v > 0.0 => self.amp_v * (1.0 + r * r).powf(-(2.0 + d) / 2.0),
            _ => 0.0,
        }
    }

    /// `A(x) = amp_A x ⟨x⟩^{−2−σ}` and `(A', A/x)`.
    fn first_order(&self, x: f64) -> (f64, f64, f64) {
        match self.sigma {
            Some(s) if self.amp_a > 0.0 => {
                let q = 1.0 + x * x;
                let over_x = self.amp_a * q.powf(-(2.0 + s) / 2.0);
                let prime = over_x - self.amp_a * (2.0 + s) * x * x * q.powf(-(4.0 + s) / 2.0);
                (over_x * x, prime, over_x)
            }
            _ => (0.0, 0.0, 0.0),
        }
    }

    pub fn f(&self, r: f64) -> f64 {
        1.0 - self.metric_h(r)
    }

    /// `(F, a)` at tortoise coordinate `x > 0` with areal radius `r`.
    pub fn coefficients(&self, x: f64, r: f64) -> (f64, f64) {
        let f = self.f(r);
        let l = self.ell as f64;
        let centrifugal = if self.ell == 0 { 0.0 } else { l * (l + 1.0) / (r * r) };
        let (a, a_prime, a_over_x) = self.first_order(x);
        let big_f = 0.25
            * (f * self.potential(r) - f * (centrifugal - self.metric_h_prime_over_r(r))
                + a_prime
                + a_over_x);
        (big_f, -0.25 * a)
    }
}

/// Areal radius as a function of the tortoise coordinate, tabulated by RK4
/// on `dr/dx = f(r)`, `r(0) = 0`.
pub struct Tortoise {
    dx: f64,
    r: Vec<f64>,
}

impl Tortoise {
    pub fn new(eq: &ModelEquation, dx: f64, x_max: f64) -> Self {
        let n = (x_max / dx).ceil() as usize + 1;
        let mut r = Vec::with_capacity(n + 1);
        r.push(0.0);
        let f = |r: f64| eq.f(r);
        for k in 0..n {
            let y = r[k];
            let k1 = f(y);
            let k2 = f(y + 0.5 * dx * k1);
            let k3 = f(y + 0.5 * dx * k2);
            let k4 = f(y + dx * k3);
            r.push(y + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        }
        Tortoise { dx, r }
    }

    /// `r` at node `k`, i.e. at `x = k·dx`.
    pub fn at_node(&self, k: usize) -> f64 {
        self.r[k]
    }

    /// `x(r)` for a given areal radius, by inverting the table.
    pub fn x_of(&self, r: f64) -> Option<f64> {
        let k = self.r.partition_point(|&y| y < r);
        if k == 0 {
            return Some(0.0);
        }
        if k >= self.r.len() {
            return None;
        }
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        Some(((k - 1) as f64 + (r - r0) / (r1 - r0)) * self.dx)
    }
}

/// `C^∞` bump `amplitude·exp(1 − 1/(1−z²))`, `z = (v−center)/width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    #[serde(default = "default_center")]
    pub center: f64,
    /// Half-width of the support.
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_center() -> f64 {
    10.0
}
fn default_width() -> f64 {
    4.0
}
fn default_amplitude() -> f64 {
    1.0
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData { center: default_center(), width: default_width(), amplitude: default_amplitude() }
    }
}

impl InitialData {
    pub fn value(&self, v: f64) -> f64 {
        let z = (v - self.center) / self.width;
        if z.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - z * z)).exp()
        }
    }
}

/// Curves along which the field is recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "curve", rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Fixed areal radius; parameter `t`.
    FixedR { r: f64 },
    /// Fixed retarded time; parameter `v`.
    FixedU { u: f64 },
    /// Fixed `t = (u+v)/2`; parameter areal `r`.
    FixedT { t: f64 },
}

impl SamplerSpec {
    pub fn label(&self) -> String {
        match self {
            SamplerSpec::FixedR { r } => format!("fixed_r_{r}"),
            SamplerSpec::FixedU { u } => format!("fixed_u_{u}"),
            SamplerSpec::FixedT { t } => format!("fixed_t_{t}"),
        }
    }

    pub fn parameter_name(&self) -> &'static str {
        match self {
            SamplerSpec::FixedR { .. } => "t",
            SamplerSpec::FixedU { .. } => "v",
            SamplerSpec::FixedT { .. } => "r",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub spec: SamplerSpec,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn params(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// Every `stride`-th row, holding every `stride`-th value from the diagonal on.
#[derive(Clone, Debug, PartialEq)]
struct RetainedRow {
    i: usize,
    values: Vec<f64>,
}

pub struct FieldSlices {
    pub grid: GridSpec,
    retained: Vec<RetainedRow>,
    pub series: Vec<Series>,
    tortoise: Tortoise,
    pub sup_abs: f64,
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a * (1.0 - w) + b * w
    }
}

/// Value in a row stored by `j` at fractional position `p` (in `h` units).
fn row_at(row: &[f64], p: f64) -> Option<f64> {
    let j0 = p.floor();
    let w = p - j0;
    let j0 = j0 as usize;
    if j0 >= row.len() || (w > 0.0 && j0 + 1 >= row.len()) {
        return None;
    }
    Some(lerp(row[j0], if w > 0.0 { row[j0 + 1] } else { 0.0 }, w))
}

struct Tracker {
    spec: SamplerSpec,
    points: Vec<(f64, f64)>,
    /// Tortoise position for fixed-r curves.
    x0: f64,
}

impl Tracker {
    fn new(spec: &SamplerSpec, grid: &GridSpec, tortoise: &Tortoise) -> Result<Self> {
        let outside = |what: String| Err(Error::usage(format!("sampler {what} lies outside the grid")));
        let x0 = match *spec {
            SamplerSpec::FixedR { r } => {
                if !(r >= 0.0) {
                    return outside(format!("r = {r}"));
                }
                match tortoise.x_of(r) {
                    Some(x) if grid.u_min + 2.0 * x <= grid.v_max => x,
                    _ => return outside(format!("r = {r}")),
                }
            }
            SamplerSpec::FixedU { u } => {
                if !(u >= grid.u_min && u <= grid.u_max) {
                    return outside(format!("u = {u}"));
                }
                0.0
            }
            SamplerSpec::FixedT { t } => {
                if !(t >= grid.u_min && t <= grid.v_max) {
                    return outside(format!("t = {t}"));
                }
                0.0
            }
        };
        Ok(Tracker { spec: spec.clone(), points: Vec::new(), x0 })
    }

    fn visit(&mut self, grid: &GridSpec, tortoise: &Tortoise, i: usize, prev: &[f64], cur: &[f64]) {
        let h = grid.h;
        let u = grid.u(i);
        match self.spec {
            SamplerSpec::FixedR { .. } => {
                if let Some(val) = row_at(cur, i as f64 + 2.0 * self.x0 / h) {
                    self.points.push((u + self.x0, val));
                }
            }
            SamplerSpec::FixedU { u: u0 } => {
                let p = (u0 - grid.u_min) / h;
                let i0 = p.floor() as usize;
                let w = p - p.floor();
                if w == 0.0 && i == i0 {
                    for j in i..cur.len() {
                        self.points.push((grid.v(j), cur[j]));
                    }
                } else if w > 0.0 && i == i0 + 1 {
                    for j in i..cur.len() {
                        self.points.push((grid.v(j), lerp(prev[j], cur[j], w)));
                    }
                }
            }
            SamplerSpec::FixedT { t } => {
                let v = 2.0 * t - u;
                if v >= u {
                    if let Some(val) = row_at(cur, (v - grid.u_min) / h) {
                        let x = (v - u) / 2.0;
                        self.points.push((tortoise.r_of(x), val));
                    }
                }
            }
        }
    }

    fn finish(mut self) -> Series {
        if matches!(self.spec, SamplerSpec::FixedT { .. }) {
            self.points.reverse();
        }
        Series { spec: self.spec, points: self.points }
    }
}

impl Tortoise {
    /// `r(x)` by linear interpolation in the table.
    pub fn r_of(&self, x: f64) -> f64 {
        let p = x / self.dx;
        let k = p.floor() as usize;
        if k + 1 >= self.r.len() {
            return *self.r.last().expect("nonempty table");
        }
        lerp(self.r[k], self.r[k + 1], p - k as f64)
    }
}

/// Per-diamond coefficients indexed by `k = j − i`, centred at `x = k·h/2`.
fn diamond_coefficients(eq: &ModelEquation, grid: &GridSpec, tortoise: &Tortoise) -> Vec<(f64, f64)> {
    let (_, nv) = grid.counts();
    (0..=nv)
        .map(|k| {
            if k == 0 {
                return (0.0, 0.0);
            }
            let x = k as f64 * grid.h / 2.0;
            eq.coefficients(x, tortoise.at_node(k))
        })
        .collect()
}

type Source<'a> = Option<&'a dyn Fn(f64, f64) -> f64>;

/// How the values on `{u = u_min}` and on the diagonal are supplied.
enum Data<'a> {
    /// Arbitrary data and boundary values, marched directly.
    General { initial: &'a dyn Fn(f64) -> f64, boundary: &'a dyn Fn(f64) -> f64 },
    /// Data `g` with `φ(u,u) = 0`. The free solution `g(v) − g(u)` is split
    /// off and only the remainder is marched, so rounding is relative to the
    /// scattered part rather than to the outgoing pulse.
    Split(&'a dyn Fn(f64) -> f64),
}

/// Row-by-row march over `u`. Each row is stored by `v` index; entries left
/// of the diagonal are unused. `visit` sees every completed row.
fn march(
    grid: &GridSpec,
    coeffs: &[(f64, f64)],
    data: Data<'_>,
    source: Source<'_>,
    mut visit: impl FnMut(usize, &[f64], &[f64]) -> Result<()>,
) -> Result<()> {
    let (nu, nv) = grid.counts();
    let h = grid.h;
    let h2 = h * h;
    // Fφ is taken as the mean of its N and S values, so that
    // N(1 − ½h²F) = E + W − S(1 − ½h²F) + …. The centred explicit form,
    // and the four-corner mean, are unstable next to the centre for ℓ ≥ 2.
    // Entries: (1/(1 − ½h²F), that minus one, h·a).
    let weights: Vec<(f64, f64, f64)> = coeffs
        .iter()
        .map(|&(f, a)| {
            let c = 0.5 * h2 * f;
            (1.0 / (1.0 - c), c / (1.0 - c), h * a)
        })
        .collect();
    let (g, boundary): (Vec<f64>, &dyn Fn(f64) -> f64) = match data {
        Data::General { boundary, .. } => (vec![0.0; nv + 1], boundary),
        Data::Split(g) => ((0..=nv).map(|k| g(grid.v(k))).collect(), &|_| 0.0),
    };
    // remainder rows, and full rows handed to `visit`
    let mut prev: Vec<f64> = match data {
        Data::General { initial, .. } => (0..=nv).map(|j| initial(grid.v(j))).collect(),
        Data::Split(_) => vec![g[0]; nv + 1],
    };
    prev[0] = boundary(grid.u(0));
    let mut cur = vec![0.0; nv + 1];
    let full = |i: usize, rem: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(rem.iter().enumerate().map(|(j, x)| if j < i { 0.0 } else { x + (g[j] - g[i]) }));
    };
    let (mut full_prev, mut full_cur) = (Vec::with_capacity(nv + 1), Vec::with_capacity(nv + 1));
    full(0, &prev, &mut full_prev);
    visit(0, &full_prev, &full_prev)?;
    for i in 1..=nu {
        let u = grid.u(i);
        cur[i] = boundary(u);
        let (gi, gi1) = (g[i], g[i - 1]);
        for j in i + 1..=nv {
            let (s, e, w) = (prev[j - 1], prev[j], cur[j - 1]);
            let (d, dm1, q) = weights[j - i];
            let mut rhs = e + w + q * (w - e);
            if let Some(src) = source {
                rhs += h2 * src(u - 0.5 * h, grid.v(j) - 0.5 * h);
            }
            let mut n = d * rhs - s;
            // the scheme applied to the free part leaves this residue
            let (eb, wb) = (g[j] - gi1, g[j - 1] - gi);
            if eb != 0.0 || wb != 0.0 {
                n += dm1 * (eb + wb) + d * q * (wb - eb);
            }
            if !(n.abs() <= BLOWUP) {
                return Err(Error::Blowup { u, v: grid.v(j), value: n });
            }
            cur[j] = n;
        }
        full(i, &cur, &mut full_cur);
        visit(i, &full_prev, &full_cur)?;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut full_prev, &mut full_cur);
    }
    Ok(())
}

/// Evolve characteristic data on `{u = u_min}` with `φ(u,u) = 0`.
pub fn evolve(
    grid: &GridSpec,
    eq: &ModelEquation,
    data: &InitialData,
    samplers: &[SamplerSpec],
) -> Result<FieldSlices> {
    evolve_with(grid, eq, &|v| data.value(v), samplers)
}

/// [`evolve`] with arbitrary data on `{u = u_min}`.
pub fn evolve_with(
    grid: &GridSpec,
    eq: &ModelEquation,
    data: &dyn Fn(f64) -> f64,
    samplers: &[SamplerSpec],
) -> Result<FieldSlices> {
    grid.validate()?;
    eq.validate()?;
    let (_, nv) = grid.counts();
    let tortoise = Tortoise::new(eq, grid.h / 2.0, nv as f64 * grid.h / 2.0);
    let coeffs = diamond_coefficients(eq, grid, &tortoise);
    let mut trackers =
        samplers.iter().map(|s| Tracker::new(s, grid, &tortoise)).collect::<Result<Vec<_>>>()?;
    let stride = grid.output_stride;
    let mut retained = Vec::new();
    let mut sup_abs: f64 = 0.0;
    march(grid, &coeffs, Data::Split(data), None, |i, prev, cur| {
        for t in trackers.iter_mut() {
            t.visit(grid, &tortoise, i, prev, cur);
        }
        sup_abs = cur[i..].iter().fold(sup_abs, |m, x| m.max(x.abs()));
        if i % stride == 0 {
            retained.push(RetainedRow { i, values: cur[i..].iter().step_by(stride).copied().collect() });
        }
        Ok(())
    })?;
    Ok(FieldSlices {
        grid: grid.clone(),
        retained,
        series: trackers.into_iter().map(Tracker::finish).collect(),
        tortoise,
        sup_abs,
    })
}

/// A closed-form field with its derivatives, for forced convergence runs.
pub struct Manufactured {
    pub name: &'static str,
    pub phi: fn(f64, f64) -> f64,
    pub phi_u: fn(f64, f64) -> f64,
    pub phi_v: fn(f64, f64) -> f64,
    pub phi_uv: fn(f64, f64) -> f64,
}

pub fn manufactured_suite() -> Vec<Manufactured> {
    vec![
        Manufactured {
            name: "sin(u) exp(-v/10)",
            phi: |u, v| u.sin() * (-v / 10.0).exp(),
            phi_u: |u, v| u.cos() * (-v / 10.0).exp(),
            phi_v: |u, v| -0.1 * u.sin() * (-v / 10.0).exp(),
            phi_uv: |u, v| -0.1 * u.cos() * (-v / 10.0).exp(),
        },
        Manufactured {
            name: "cos(0.7u + 0.3v)",
            phi: |u, v| (0.7 * u + 0.3 * v).cos(),
            phi_u: |u, v| -0.7 * (0.7 * u + 0.3 * v).sin(),
            phi_v: |u, v| -0.3 * (0.7 * u + 0.3 * v).sin(),
            phi_uv: |u, v| -0.21 * (0.7 * u + 0.3 * v).cos(),
        },
        Manufactured {
            name: "(v-u)^2/(1+v)",
            phi: |u, v| (v - u).powi(2) / (1.0 + v),
            phi_u: |u, v| -2.0 * (v - u) / (1.0 + v),
            phi_v: |u, v| 2.0 * (v - u) / (1.0 + v) - (v - u).powi(2) / (1.0 + v).powi(2),
            phi_uv: |u, v| -2.0 / (1.0 + v) + 2.0 * (v - u) / (1.0 + v).powi(2),
        },
    ]
}

/// Solve the forced problem whose exact solution is `m`, with its values as
/// data on `{u = u_min}` and on the diagonal. Returns the max nodal error.
pub fn forced_error(grid: &GridSpec, eq: &ModelEquation, m: &Manufactured) -> Result<f64> {
    grid.validate()?;
    eq.validate()?;
    let (_, nv) = grid.counts();
    let tortoise = Tortoise::new(eq, grid.h / 2.0, nv as f64 * grid.h / 2.0);
    let coeffs = |u: f64, v: f64| {
        let x = (v - u) / 2.0;
        eq.coefficients(x, tortoise.r_of(x))
    };
    let residual = |u: f64, v: f64| {
        let (f, a) = coeffs(u, v);
        (m.phi_uv)(u, v) - f * (m.phi)(u, v) - a * ((m.phi_u)(u, v) - (m.phi_v)(u, v))
    };
    let diamond = diamond_coefficients(eq, grid, &tortoise);
    let u0 = grid.u_min;
    let mut worst: f64 = 0.0;
    march(
        grid,
        &diamond,
        Data::General { initial: &|v| (m.phi)(u0, v), boundary: &|u| (m.phi)(u, u) },
        Some(&residual),
        |i, _, cur| {
            let u = grid.u(i);
            for (j, &val) in cur.iter().enumerate().skip(i) {
                worst = worst.max((val - (m.phi)(u, grid.v(j))).abs());
            }
            Ok(())
        },
    )?;
    Ok(worst)
}

impl FieldSlices {
    /// Value of the retained lattice along a curve. Curves tracked during
    /// the run are returned at full resolution.
    pub fn sample(&self, curve: &SamplerSpec) -> Result<Series> {
        if let Some(s) = self.series.iter().find(|s| s.spec == *curve) {
            return Ok(s.clone());
        }
        let tracker = Tracker::new(curve, &self.grid, &self.tortoise)?;
        let g = &self.grid;
        let big_h = g.h * g.output_stride as f64;
        let mut points = Vec::new();
        match *curve {
            SamplerSpec::FixedR { .. } => {
                for row in &self.retained {
                    if let Some(val) = row_at(&row.values, 2.0 * tracker.x0 / big_h) {
                        points.push((g.u(row.i) + tracker.x0, val));
                    }
                }
            }
            SamplerSpec::FixedU { u } => {
                let k = self.retained.partition_point(|row| g.u(row.i) <= u);
                if k == 0 {
                    return Err(Error::usage(format!("sampler u = {u} lies outside the retained grid")));
                }
                let a = &self.retained[k - 1];
                let w = (u - g.u(a.i)) / big_h;
                if w == 0.0 {
                    for (m, val) in a.values.iter().enumerate() {
                        points.push((g.u(a.i) + m as f64 * big_h, *val));
                    }
                } else {
                    let b = self.retained.get(k).ok_or_else(|| {
                        Error::usage(format!("sampler u = {u} lies outside the retained grid"))
                    })?;
                    for (m, val) in b.values.iter().enumerate() {
                        // row a holds the same v one slot further along
                        if let Some(va) = a.values.get(m + 1) {
                            points.push((g.u(b.i) + m as f64 * big_h, lerp(*va, *val, w)));
                        }
                    }
                }
            }
            SamplerSpec::FixedT { t } => {
                for row in self.retained.iter().rev() {
                    let u = g.u(row.i);
                    let v = 2.0 * t - u;
                    if v >= u {
                        if let Some(val) = row_at(&row.values, (v - u) / big_h) {
                            points.push((self.tortoise.r_of((v - u) / 2.0), val));
                        }
                    }
                }
            }
        }
        Ok(Series { spec: curve.clone(), points })
    }
}

/// CSV with `# `-prefixed header lines, then `param,value` rows.
pub fn write_series_csv<W: std::io::Write>(mut out: W, header: &[String], series: &Series) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for &(p, v) in &series.points {
        w.write_record(&[format!("{p:.10e}"), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
