//! Symbolic pointwise bounds.
//!
//! A [`DecayTerm`] is `ln^m⟨t−r⟩ · ⟨r⟩^{−α} ⟨t+r⟩^{−β} ⟨t−r⟩^{−η}` with
//! `⟨x⟩ = (1+x²)^{1/2}`. A [`BoundExpr`] is a sum of min-groups of terms.
//! The `beta` slot is read as `⟨t+r⟩` on evaluation; channels that use it as
//! `⟨t⟩` only do so where `r ≤ t` and the two weights are comparable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext_rational::ExtRational;

pub fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecayTerm {
    pub m: u32,
    pub alpha: ExtRational,
    pub beta: ExtRational,
    pub eta: ExtRational,
}

impl DecayTerm {
    pub fn new(m: u32, alpha: ExtRational, beta: ExtRational, eta: ExtRational) -> Self {
        DecayTerm { m, alpha, beta, eta }
    }

    /// `⟨t−r⟩^{−η}` alone.
    pub fn cone(eta: ExtRational) -> Self {
        DecayTerm::new(0, ExtRational::zero(), ExtRational::zero(), eta)
    }

    pub fn unit() -> Self {
        Self::cone(ExtRational::zero())
    }

    pub fn with_log(mut self, extra: u32) -> Self {
        self.m += extra;
        self
    }

    /// Pointwise product of two terms.
    pub fn times(self, o: DecayTerm) -> DecayTerm {
        DecayTerm {
            m: self.m + o.m,
            alpha: self.alpha + o.alpha,
            beta: self.beta + o.beta,
            eta: self.eta + o.eta,
        }
    }

    pub fn evaluate(&self, t: f64, r: f64, eps_value: f64) -> f64 {
        self.ln_evaluate(t, r, eps_value).exp()
    }

    /// Natural log of the term value; `-inf` where the log factor vanishes.
    pub fn ln_evaluate(&self, t: f64, r: f64, eps_value: f64) -> f64 {
        let u = japanese(t - r);
        let mut acc = -self.alpha.to_f64(eps_value) * japanese(r).ln()
            - self.beta.to_f64(eps_value) * japanese(t + r).ln()
            - self.eta.to_f64(eps_value) * u.ln();
        if self.m > 0 {
            acc += self.m as f64 * u.ln().ln();
        }
        acc
    }

    /// `self ≤ other` pointwise for every `t,r ≥ 0` and every admissible `ε`:
    /// same log power and no exponent smaller.
    pub fn dominates(&self, other: &DecayTerm) -> bool {
        self.m == other.m
            && self.alpha >= other.alpha
            && self.beta >= other.beta
            && self.eta >= other.eta
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinGroup {
    pub min: Vec<DecayTerm>,
}

impl MinGroup {
    pub fn single(term: DecayTerm) -> Self {
        MinGroup { min: vec![term] }
    }

    fn ln_evaluate(&self, t: f64, r: f64, eps_value: f64) -> f64 {
        self.min
            .iter()
            .map(|term| term.ln_evaluate(t, r, eps_value))
            .fold(f64::INFINITY, f64::min)
    }

    /// Drop every term that some other, different term lies below. Ties
    /// (identical terms) are all kept.
    fn normalize(&mut self) {
        let mut kept: Vec<DecayTerm> = Vec::with_capacity(self.min.len());
        for term in &self.min {
            let dominated = self.min.iter().any(|other| other != term && other.dominates(term));
            if !dominated {
                kept.push(*term);
            }
        }
        self.min = kept;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineKind {
    Sum,
    Min,
}

/// Sum of min-groups. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawExpr", into = "RawExpr")]
pub struct BoundExpr {
    groups: Vec<MinGroup>,
}

#[derive(Serialize, Deserialize)]
struct RawExpr {
    sum: Vec<MinGroup>,
}

impl TryFrom<RawExpr> for BoundExpr {
    type Error = String;
    fn try_from(raw: RawExpr) -> std::result::Result<Self, String> {
        BoundExpr::from_groups(raw.sum).map_err(|e| e.to_string())
    }
}

impl From<BoundExpr> for RawExpr {
    fn from(e: BoundExpr) -> Self {
        RawExpr { sum: e.groups }
    }
}

impl BoundExpr {
    pub fn from_groups(groups: Vec<MinGroup>) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.min.is_empty()) {
            return Err(Error::usage("bound expression needs nonempty groups"));
        }
        Ok(BoundExpr { groups })
    }

    pub fn term(term: DecayTerm) -> Self {
        BoundExpr { groups: vec![MinGroup::single(term)] }
    }

    /// A single min-group.
    pub fn min_of(terms: Vec<DecayTerm>) -> Result<Self> {
        Self::from_groups(vec![MinGroup { min: terms }])
    }

    /// Sum of single-term groups.
    pub fn sum_of(terms: Vec<DecayTerm>) -> Result<Self> {
        Self::from_groups(terms.into_iter().map(MinGroup::single).collect())
    }

    pub fn groups(&self) -> &[MinGroup] {
        &self.groups
    }

    pub fn terms(&self) -> impl Iterator<Item = &DecayTerm> {
        self.groups.iter().flat_map(|g| g.min.iter())
    }

    pub fn map_terms(&self, mut f: impl FnMut(&DecayTerm) -> DecayTerm) -> BoundExpr {
        BoundExpr {
            groups: self
                .groups
                .iter()
                .map(|g| MinGroup { min: g.min.iter().map(&mut f).collect() })
                .collect(),
        }
    }

    pub fn try_map_terms(
        &self,
        mut f: impl FnMut(&DecayTerm) -> Result<DecayTerm>,
    ) -> Result<BoundExpr> {
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let min = g.min.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
            groups.push(MinGroup { min });
        }
        Ok(BoundExpr { groups })
    }

    /// Multiply every term by `factor`.
    pub fn times(&self, factor: DecayTerm) -> BoundExpr {
        self.map_terms(|t| t.times(factor))
    }

    pub fn normalized(mut self) -> BoundExpr {
        for g in &mut self.groups {
            g.normalize();
        }
        self
    }

    pub fn evaluate(&self, t: f64, r: f64, eps_value: f64) -> f64 {
        self.groups
            .iter()
            .map(|g| g.ln_evaluate(t, r, eps_value).exp())
            .sum()
    }

    /// `ln` of the value, stable where the value under/overflows `f64`.
    pub fn ln_evaluate(&self, t: f64, r: f64, eps_value: f64) -> f64 {
        let logs: Vec<f64> = self.groups.iter().map(|g| g.ln_evaluate(t, r, eps_value)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    }

    /// Replace each `ln^m⟨t−r⟩` factor by `⟨t−r⟩^{mε}`.
    pub fn absorb_log(&self) -> BoundExpr {
        self.map_terms(|t| {
            if t.m == 0 {
                *t
            } else {
                DecayTerm { m: 0, eta: t.eta - ExtRational::epsilon() * t.m as i64, ..*t }
            }
        })
    }

    pub fn is_log_free(&self) -> bool {
        self.terms().all(|t| t.m == 0)
    }

    /// The slowest-decaying term of an expression whose terms carry only
    /// `⟨t−r⟩` weights (plus logs). Within a min-group the fastest term is
    /// taken; across the sum the slowest one. Ties in `η` go to the larger
    /// log power.
    pub fn dominant_cone_term(&self) -> Option<DecayTerm> {
        let mut worst: Option<DecayTerm> = None;
        for g in &self.groups {
            let best = g.min.iter().copied().max_by(|a, b| cone_order(a, b))?;
            worst = match worst {
                None => Some(best),
                Some(w) if cone_order(&best, &w).is_lt() => Some(best),
                keep => keep,
            };
        }
        worst
    }
}

/// Orders `⟨t−r⟩`-only terms by asymptotic decay speed (faster is greater).
fn cone_order(a: &DecayTerm, b: &DecayTerm) -> std::cmp::Ordering {
    a.eta.cmp(&b.eta).then(b.m.cmp(&a.m))
}

/// Pointwise sum or min of several expressions.
///
/// `Sum` concatenates groups (exact). `Min` of single-group parts merges
/// them into one group (exact); with multi-group parts it distributes,
/// `min(ΣA_i, ΣB_j) ≤ Σ_{i,j} min(A_i, B_j)`, which is an upper bound.
pub fn combine(kind: CombineKind, parts: &[BoundExpr]) -> Result<BoundExpr> {
    let Some(first) = parts.first() else {
        return Err(Error::usage("combine needs at least one part"));
    };
    let out = match kind {
        CombineKind::Sum => BoundExpr {
            groups: parts.iter().flat_map(|p| p.groups.iter().cloned()).collect(),
        },
        CombineKind::Min => {
            let mut acc = first.groups.clone();
            for p in &parts[1..] {
                let mut next = Vec::with_capacity(acc.len() * p.groups.len());
                for a in &acc {
                    for b in &p.groups {
                        let mut min = a.min.clone();
                        min.extend(b.min.iter().copied());
                        next.push(MinGroup { min });
                    }
                }
                acc = next;
            }
            BoundExpr { groups: acc }
        }
    };
    Ok(out.normalized())
}

/// How a dyadic sum / integral of `⟨·⟩^{−λ}` up to `⟨t−r⟩` behaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "exponent")]
pub enum KappaSymbol {
    /// λ > 1: bounded.
    One,
    /// λ = 1: one logarithm.
    Log,
    /// λ < 1: grows like `⟨t−r⟩^{1−λ}` (the payload is `1−λ`).
    Power(ExtRational),
}

impl KappaSymbol {
    /// Multiply a term by this symbol.
    pub fn apply(self, term: DecayTerm) -> DecayTerm {
        match self {
            KappaSymbol::One => term,
            KappaSymbol::Log => term.with_log(1),
            KappaSymbol::Power(p) => DecayTerm { eta: term.eta - p, ..term },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext_rational::ExtRational as X;

    fn cone(e: X) -> DecayTerm {
        DecayTerm::cone(e)
    }

    #[test]
    fn evaluate_examples() {
        let on_cone = BoundExpr::term(cone(X::int(1)));
        assert!((on_cone.evaluate(5.0, 5.0, 0.01) - 1.0).abs() < 1e-15);
        let logged = BoundExpr::term(DecayTerm::new(1, X::int(1), X::zero(), X::zero()));
        assert_eq!(logged.evaluate(0.0, 0.0, 0.01), 0.0);
        let quad = BoundExpr::term(DecayTerm::new(0, X::int(2), X::zero(), X::zero()));
        assert!((quad.evaluate(0.0, 3f64.sqrt(), 0.01) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn min_keeps_faster_term() {
        let a = BoundExpr::term(cone(X::int(2)));
        let b = BoundExpr::term(cone(X::int(1)));
        let m = combine(CombineKind::Min, &[a.clone(), b]).unwrap();
        assert_eq!(m, a);
    }

    #[test]
    fn min_of_weak_integral_envelopes() {
        // ⟨u⟩^{−1/2−2a} against ⟨u⟩^{−1−a} at a = 1/4: exponents 1 and 5/4,
        // so the second lies below the first everywhere and survives alone.
        let a = X::frac(1, 4);
        let first = cone(X::frac(1, 2) + a * 2);
        let second = cone(X::int(1) + a);
        let m = combine(CombineKind::Min, &[BoundExpr::term(first), BoundExpr::term(second)])
            .unwrap();
        assert_eq!(m, BoundExpr::term(second));
        // With a different ⟨r⟩ weight on each side neither can be dropped.
        let first_r = DecayTerm { alpha: X::int(1), ..first };
        let kept = combine(CombineKind::Min, &[BoundExpr::term(first_r), BoundExpr::term(second)])
            .unwrap();
        assert_eq!(kept.groups()[0].min.len(), 2);
    }

    #[test]
    fn sum_doubles() {
        let x = BoundExpr::min_of(vec![
            DecayTerm::new(1, X::frac(1, 2), X::int(1), X::frac(3, 2)),
            DecayTerm::new(0, X::int(1), X::zero(), X::int(2)),
        ])
        .unwrap();
        let s = combine(CombineKind::Sum, &[x.clone(), x.clone()]).unwrap();
        for &(t, r) in &[(3.0, 1.0), (100.0, 7.0), (40.0, 39.0)] {
            let (vs, vx) = (s.evaluate(t, r, 0.01), x.evaluate(t, r, 0.01));
            assert!((vs - 2.0 * vx).abs() <= 1e-14 * vs);
        }
    }

    #[test]
    fn combine_rejects_empty() {
        assert!(matches!(combine(CombineKind::Sum, &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn absorb_log_weakens_by_eps_per_log() {
        let nu = X::frac(1, 2);
        let t = BoundExpr::term(DecayTerm::new(1, X::zero(), X::zero(), X::int(1) + nu));
        let a = t.absorb_log();
        assert_eq!(a, BoundExpr::term(cone(X::int(1) + nu - X::epsilon())));
        let t2 = BoundExpr::term(DecayTerm::new(2, X::zero(), X::zero(), X::int(2)));
        assert_eq!(t2.absorb_log(), BoundExpr::term(cone(X::int(2) - X::epsilon() * 2)));
        let free = BoundExpr::term(cone(X::int(3)));
        assert_eq!(free.absorb_log(), free);
    }

    #[test]
    fn json_shape() {
        let e = BoundExpr::term(DecayTerm::new(
            0,
            X::int(1),
            X::int(1),
            X::frac(3, 2) - X::epsilon(),
        ));
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(
            s,
            r#"{"sum":[{"min":[{"m":0,"alpha":["1","0"],"beta":["1","0"],"eta":["3/2","-1"]}]}]}"#
        );
        let back: BoundExpr = serde_json::from_str(
            r#"{"sum":[{"min":[{"m":0,"alpha":[1,0],"beta":[1,0],"eta":["3/2","-1"]}]}]}"#,
        )
        .unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<BoundExpr>(r#"{"sum":[]}"#).is_err());
    }

    #[test]
    fn dominant_term() {
        let e = BoundExpr::from_groups(vec![
            MinGroup { min: vec![cone(X::int(1)), cone(X::frac(3, 2))] },
            MinGroup::single(cone(X::frac(3, 2)).with_log(1)),
        ])
        .unwrap();
        assert_eq!(e.dominant_cone_term(), Some(cone(X::frac(3, 2)).with_log(1)));
    }
}
