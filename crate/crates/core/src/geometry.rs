//! Backward light-cone domain `D_tr` and the dyadic spacetime regions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Padding factor for the slightly enlarged regions `C̃`.
pub const ENLARGEMENT: f64 = 9.0 / 8.0;

/// `(ρ,s) ∈ D_tr` iff `0 ≤ s−ρ ≤ t−r ≤ s+ρ ≤ t+r`. Boundaries are included.
pub fn dtr_contains(t: f64, r: f64, rho: f64, s: f64) -> bool {
    let u = s - rho;
    let v = s + rho;
    0.0 <= u && u <= t - r && t - r <= v && v <= t + r
}

/// Length of the `s`-slice of `D_tr` at fixed `ρ`.
pub fn vertical_extent(t: f64, r: f64, rho: f64) -> f64 {
    let lo = rho.max(t - r - rho);
    let hi = (rho + t - r).min(t + r - rho);
    (hi - lo).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtrDomain {
    pub t: f64,
    pub r: f64,
}

impl DtrDomain {
    pub fn new(t: f64, r: f64) -> Result<Self> {
        if !(t >= 0.0 && r >= 0.0) {
            return Err(Error::usage(format!("D_tr needs t,r >= 0, got t={t}, r={r}")));
        }
        Ok(DtrDomain { t, r })
    }

    pub fn contains(&self, rho: f64, s: f64) -> bool {
        dtr_contains(self.t, self.r, rho, s)
    }

    pub fn vertical_extent(&self, rho: f64) -> f64 {
        vertical_extent(self.t, self.r, rho)
    }

    /// `ρ` range outside of which every slice is empty.
    pub fn rho_range(&self) -> (f64, f64) {
        (0.0, (self.t + self.r) / 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    R1,
    R2,
    Outside,
}

/// Classify a dyadic radius against `(t,r)`: `R1` if `R < (t−r)/8`,
/// `R2` if `(t−r)/8 ≤ R < t`.
pub fn region_classify(t: f64, r: f64, big_r: f64) -> Region {
    let q = (t - r) / 8.0;
    if big_r < q {
        Region::R1
    } else if big_r < t {
        Region::R2
    } else {
        Region::Outside
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    /// Interior, localized in `r`.
    Ctr,
    /// Interior, localized in `t−r`.
    Ctu,
    /// Exterior, localized in `r` and `r−t`.
    CruExt,
    /// Exterior, localized in `t` and `r−t`.
    CtuExt,
    R1,
    R2,
}

/// One cell of a dyadic family. `scale` is `R` or `U` depending on `kind`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicRegion {
    pub kind: RegionKind,
    pub big_t: f64,
    pub scale: f64,
    pub base: f64,
}

/// Time slabs `[T, 2T)` with `T` a power of two, and spatial scales
/// `{1, a, a², …}` with half-open shells `[a^k, a^{k+1})`, the first shell
/// being `[0, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicFamily {
    pub base: f64,
}

impl Default for DyadicFamily {
    fn default() -> Self {
        DyadicFamily { base: 12f64.sqrt() }
    }
}

impl DyadicFamily {
    pub fn new(base: f64) -> Result<Self> {
        if !(base > 2.0 && base <= 5.0) {
            return Err(Error::usage(format!("dyadic base must lie in (2,5], got {base}")));
        }
        Ok(DyadicFamily { base })
    }

    /// Largest power of two `≤ t`, for `t ≥ 1`.
    pub fn time_scale(t: f64) -> f64 {
        let mut big_t = 2f64.powi(t.log2().floor() as i32);
        // guard against rounding at exact powers
        if big_t * 2.0 <= t {
            big_t *= 2.0;
        } else if big_t > t {
            big_t /= 2.0;
        }
        big_t
    }

    /// Shell scale of `x ≥ 0`: 1 for `x < a`, else the largest `a^k ≤ x`.
    pub fn shell(&self, x: f64) -> f64 {
        if x < self.base {
            return 1.0;
        }
        let mut k = (x.ln() / self.base.ln()).floor() as i32;
        if self.base.powi(k + 1) <= x {
            k += 1;
        } else if self.base.powi(k) > x {
            k -= 1;
        }
        self.base.powi(k.max(1))
    }

    /// The unique cell containing `(t,r)`, for `t ≥ 1`. Points with
    /// `r ≤ t/2` go to `C_T^R`, the rest of `{r ≤ t}` to `C_T^U`; outside
    /// the cone, points with `r−t < t` go to the near-cone exterior cells.
    pub fn locate(&self, t: f64, r: f64) -> DyadicRegion {
        let big_t = Self::time_scale(t);
        let (kind, scale) = if r <= t {
            if r <= t / 2.0 {
                (RegionKind::Ctr, self.shell(r))
            } else {
                (RegionKind::Ctu, self.shell(t - r))
            }
        } else if r - t < t {
            (RegionKind::CtuExt, self.shell(r - t))
        } else {
            (RegionKind::CruExt, self.shell(r))
        };
        DyadicRegion { kind, big_t, scale, base: self.base }
    }

    /// Shells `1, a, a², …` up to and including the first `≥ limit`.
    pub fn scales_upto(&self, limit: f64) -> Vec<f64> {
        let mut out = vec![1.0];
        let mut k = 1;
        while *out.last().unwrap() < limit {
            out.push(self.base.powi(k));
            k += 1;
        }
        out
    }
}

impl DyadicRegion {
    fn shell_bounds(&self) -> (f64, f64) {
        let lo = if self.scale <= 1.0 { 0.0 } else { self.scale };
        let hi = if self.scale <= 1.0 { self.base } else { self.scale * self.base };
        (lo, hi)
    }

    /// Membership; with `enlarged` every bound is relaxed by [`ENLARGEMENT`].
    pub fn contains(&self, t: f64, r: f64, enlarged: bool) -> bool {
        let pad = if enlarged { ENLARGEMENT } else { 1.0 };
        let in_half_open = |x: f64, lo: f64, hi: f64| {
            if enlarged {
                x >= lo / pad && x <= hi * pad
            } else {
                x >= lo && x < hi
            }
        };
        if !in_half_open(t, self.big_t, 2.0 * self.big_t) {
            return false;
        }
        let (lo, hi) = self.shell_bounds();
        match self.kind {
            RegionKind::Ctr => r <= t * pad && r <= t / 2.0 * pad && in_half_open(r, lo, hi),
            RegionKind::Ctu => {
                r <= t * pad && r * pad >= t / 2.0 && in_half_open(t - r, lo, hi)
            }
            RegionKind::CtuExt => r * pad > t && (r - t) < t * pad && in_half_open(r - t, lo, hi),
            RegionKind::CruExt => r * pad > t && (r - t) * pad >= t && in_half_open(r, lo, hi),
            RegionKind::R1 | RegionKind::R2 => {
                let want = if self.kind == RegionKind::R1 { Region::R1 } else { Region::R2 };
                r <= t && region_classify(t, r, self.scale) == want
            }
        }
    }
}
