//! The decay bootstrap: independent channels, each iterating a bound on one
//! component of the solution to a fixed point, assembled into the final
//! pointwise bound.

mod channel;
mod cone;
mod exterior;
mod interior;

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{BoundExpr, DecayTerm};
use crate::conversion::{
    convert_cone, exterior_step, region1_bound, region2_bound, ExteriorState, ExteriorStep,
    SourceBound,
};
use crate::bound::{combine, CombineKind};
use crate::error::{Error, Result};
use crate::ext_rational::{serde_rational, ExtRational, Rational};

pub use channel::{Channel, ChannelOutcome, ChannelRegistry, Regime};
pub use cone::{iterate_cone, ConeChannel};
pub use exterior::{iterate_exterior, ExteriorChannel};
pub use interior::{iterate_interior, InteriorChannel, InteriorVariant};

/// Hard cap on iterations per channel; hitting it is an internal error.
pub const MAX_STEPS: usize = 256;

fn default_part() -> u8 {
    1
}

/// Decay classes of the coefficients: `h, A ∼ ⟨r⟩^{−1−σ}`, `V ∼ ⟨r⟩^{−2−δ}`.
/// `None` means the coefficient is absent (decay rate infinite).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientProfile {
    #[serde(default, with = "serde_rational::option")]
    pub sigma: Option<Rational>,
    #[serde(default, with = "serde_rational::option")]
    pub delta: Option<Rational>,
    #[serde(default = "default_part")]
    pub part: u8,
    #[serde(default)]
    pub amp_h: f64,
    #[serde(default, rename = "amp_A")]
    pub amp_a: f64,
    #[serde(default, rename = "amp_V")]
    pub amp_v: f64,
}

fn min_opt(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Default for CoefficientProfile {
    /// No coefficients; fails validation until a rate is set.
    fn default() -> Self {
        CoefficientProfile { sigma: None, delta: None, part: 1, amp_h: 0.0, amp_a: 0.0, amp_v: 0.0 }
    }
}

impl CoefficientProfile {
    pub fn new(sigma: Option<Rational>, delta: Option<Rational>, part: u8) -> Result<Self> {
        let p = CoefficientProfile { sigma, delta, part, amp_h: 0.0, amp_a: 0.0, amp_v: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let hyp = "decay-rate hypothesis 0<σ,δ<∞";
        for (name, v) in [("sigma", self.sigma), ("delta", self.delta)] {
            if let Some(x) = v {
                if x <= Rational::zero() {
                    return Err(Error::Validation(format!("{name} = {x} violates {hyp}")));
                }
            }
        }
        if self.sigma.is_none() && self.delta.is_none() {
            return Err(Error::Validation(format!("both sigma and delta absent; {hyp} needs at least one")));
        }
        if self.part != 1 && self.part != 2 {
            return Err(Error::Validation(format!("part must be 1 or 2, got {}", self.part)));
        }
        for (name, a) in [("amp_h", self.amp_h), ("amp_A", self.amp_a), ("amp_V", self.amp_v)] {
            if !(0.0..=0.5).contains(&a) {
                return Err(Error::Validation(format!("{name} = {a} outside [0, 0.5]")));
            }
        }
        Ok(())
    }

    /// `1+σ`, if `h, A` are present.
    pub fn one_plus_sigma(&self) -> Option<Rational> {
        self.sigma.map(|s| s + Rational::one())
    }

    /// `min(1+σ, δ)`: the gain per step for the potential component.
    pub fn potential_rate(&self) -> Rational {
        min_opt(self.one_plus_sigma(), self.delta).expect("validated profile")
    }

    /// `min(σ, δ)`.
    pub fn lockstep_rate(&self) -> Rational {
        min_opt(self.sigma, self.delta).expect("validated profile")
    }

    /// The exponent on `⟨t−r⟩` the theorem asserts for this part.
    pub fn closed_form(&self) -> Rational {
        Rational::one()
            + if self.part == 1 { self.lockstep_rate() } else { self.potential_rate() }
    }

    /// Near-cone source decay `q`: `σ` in part 1, `1+σ` in part 2.
    pub fn cone_rate(&self) -> Option<Rational> {
        if self.part == 1 {
            self.sigma
        } else {
            self.one_plus_sigma()
        }
    }
}

/// Which time weight the β slot of a channel's bounds denotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWeight {
    /// `⟨t⟩`; only used for `r ≤ t`, where it is comparable to `⟨t+r⟩`.
    T,
    TPlusR,
}

/// What a trace step consumed, in enough detail to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepInput {
    /// Inner region converted with `source`, outer region with
    /// `source` but `α` replaced by `region2_alpha`.
    Interior { region2_alpha: ExtRational },
    Cone,
    Exterior { state: ExteriorState },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub channel: String,
    pub step: u32,
    pub source: SourceBound,
    pub input: StepInput,
    pub output: BoundExpr,
    /// `⟨t−r⟩` exponent carried to the next step.
    pub exponent: ExtRational,
    pub time_weight: TimeWeight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Recompute a step's output from its recorded input.
pub fn replay(step: &TraceStep) -> Result<BoundExpr> {
    match &step.input {
        StepInput::Interior { region2_alpha } => {
            let outer = SourceBound { alpha: *region2_alpha, ..step.source };
            combine(CombineKind::Sum, &[region1_bound(&step.source)?, region2_bound(&outer)?])
        }
        StepInput::Cone => convert_cone(&step.source),
        StepInput::Exterior { state } => Ok(match exterior_step(state)? {
            ExteriorStep::Next(next) => next.bound(),
            ExteriorStep::Final(e) => final_bound(ExtRational::int(1), e),
        }),
    }
}

/// `⟨r⟩^{−p}⟨t⟩^{−q}⟨t−r⟩^{−η} ↦ ⟨t⟩^{−p−q}⟨t−r⟩^{−η}` termwise, for `p ≤ 1`.
pub fn radial_to_temporal(expr: &BoundExpr) -> Result<BoundExpr> {
    expr.try_map_terms(|t| {
        if t.alpha.standard > Rational::one() {
            return Err(Error::Precondition(format!(
                "radial exponent {} exceeds 1; no radial-to-temporal transfer",
                t.alpha
            )));
        }
        Ok(DecayTerm { alpha: ExtRational::zero(), beta: t.beta + t.alpha, ..*t })
    })
}

/// `⟨r⟩^{−p}⟨t−r⟩^{−e}`.
pub(crate) fn final_bound(p: ExtRational, e: ExtRational) -> BoundExpr {
    BoundExpr::term(DecayTerm::new(0, p, ExtRational::zero(), e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub expected: String,
    pub obtained: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub regime: Regime,
    pub exponent: ExtRational,
    pub bound: BoundExpr,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub profile: CoefficientProfile,
    #[serde(rename = "final")]
    pub final_bound: BoundExpr,
    pub channel_bounds: BTreeMap<String, ChannelSummary>,
    /// Worst channel exponent per regime.
    pub regime_exponents: BTreeMap<String, ExtRational>,
    pub trace: Vec<TraceStep>,
    #[serde(with = "serde_rational")]
    pub theorem_exponent: Rational,
    #[serde(with = "serde_rational")]
    pub closed_form: Rational,
    pub discrepancies: Vec<Discrepancy>,
    pub notes: Vec<String>,
}

impl PredictionReport {
    /// Rows `channel | step | source | carried exponent` for terminal output.
    pub fn step_table(&self) -> String {
        let mut out = format!("{:<18} {:>4}  {:<44} {}\n", "channel", "step", "source (m, α, β, η)", "exponent");
        for s in &self.trace {
            let src = format!("({}, {}, {}, {})", s.source.m, s.source.alpha, s.source.beta, s.source.eta);
            out.push_str(&format!("{:<18} {:>4}  {:<44} {}", s.channel, s.step, src, s.exponent));
            if let Some(n) = &s.note {
                out.push_str(&format!("  [{n}]"));
            }
            out.push('\n');
        }
        out.push_str(&format!("theorem exponent: {}\n", crate::ext_rational::rational_to_string(&self.theorem_exponent)));
        out
    }
}

pub fn predict(profile: &CoefficientProfile) -> Result<PredictionReport> {
    predict_with(&ChannelRegistry::default(), profile)
}

pub fn predict_with(registry: &ChannelRegistry, profile: &CoefficientProfile) -> Result<PredictionReport> {
    profile.validate()?;
    let active: Vec<&dyn Channel> = registry.iter().filter(|c| c.applies(profile)).collect();
    if active.is_empty() {
        return Err(Error::Internal("no channel applies to this profile".into()));
    }
    // results come back in registration order regardless of scheduling
    let outcomes: Vec<ChannelOutcome> =
        active.par_iter().map(|c| c.run(profile)).collect::<Result<_>>()?;

    let mut channel_bounds = BTreeMap::new();
    let mut regime_exponents: BTreeMap<String, ExtRational> = BTreeMap::new();
    let mut trace = Vec::new();
    for (c, o) in active.iter().zip(outcomes) {
        let key = serde_json::to_value(o.regime)?.as_str().unwrap_or_default().to_string();
        regime_exponents
            .entry(key)
            .and_modify(|e| *e = (*e).min(o.exponent))
            .or_insert(o.exponent);
        channel_bounds.insert(
            c.name().to_string(),
            ChannelSummary { regime: o.regime, exponent: o.exponent, bound: o.bound, steps: o.trace.len() },
        );
        trace.extend(o.trace);
    }
    let worst = regime_exponents.values().copied().min().expect("nonempty");
    let theorem_exponent = worst.standard;
    let final_bound =
        BoundExpr::term(DecayTerm::new(0, ExtRational::zero(), ExtRational::int(1), ExtRational::from(theorem_exponent)));
    let closed_form = profile.closed_form();
    let mut discrepancies = Vec::new();
    if theorem_exponent != closed_form {
        discrepancies.push(Discrepancy {
            expected: crate::ext_rational::rational_to_string(&closed_form),
            obtained: crate::ext_rational::rational_to_string(&theorem_exponent),
            detail: format!("worst channel exponent {worst} differs from the closed form"),
        });
    }
    let notes = vec![
        "data terms of the one-dimensional reduction are not tracked; only source contributions".into(),
        "steps with time weight ⟨t⟩ are restricted to r ≤ t".into(),
        "exterior seed step reconstructed from the initial ⟨t−r⟩^{1/2}/⟨t+r⟩ estimate".into(),
    ];
    Ok(PredictionReport {
        profile: profile.clone(),
        final_bound,
        channel_bounds,
        regime_exponents,
        trace,
        theorem_exponent,
        closed_form,
        discrepancies,
        notes,
    })
}
