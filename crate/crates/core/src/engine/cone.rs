use num_traits::One;

use super::{
    final_bound, Channel, ChannelOutcome, CoefficientProfile, Regime, StepInput, TimeWeight,
    TraceStep, MAX_STEPS,
};
use crate::bound::BoundExpr;
use crate::conversion::{convert_cone, SourceBound};
use crate::error::{Error, Result};
use crate::ext_rational::{ExtRational, Rational};

/// Near-cone `h, A` component, bounded through `∂_t`.
///
/// The source is `⟨ρ⟩^{−1−q}` times the current field bound
/// `⟨ρ⟩^{−1}⟨s−ρ⟩^{1/2−θ}`, supported where `ρ ≳ ⟨t−r⟩`. The field gains
/// `θ = N·a` after `N` steps with `a = min(q, δ, 1−ε)`, the rate shared with
/// the interior iteration. The channel halts once `⟨r⟩∂_tψ` decays like
/// `⟨t−r⟩^{−1−min(q,δ)}`.
pub fn iterate_cone(profile: &CoefficientProfile) -> Result<(Vec<TraceStep>, BoundExpr)> {
    let q = profile
        .cone_rate()
        .ok_or_else(|| Error::Precondition("cone channel needs sigma".into()))?;
    let cap = match profile.delta {
        Some(d) => q.min(d),
        None => q,
    };
    let goal = ExtRational::from(Rational::one() + cap);
    let a = ExtRational::from(cap).min(ExtRational::one_minus());
    let alpha = ExtRational::int(2) + ExtRational::from(q);
    let mut trace = Vec::new();
    for n in 0..MAX_STEPS {
        let theta = a * n as i64;
        let source = SourceBound::new(0, alpha, ExtRational::zero(), theta - ExtRational::frac(1, 2));
        let out = convert_cone(&source)?;
        let dominant = out.dominant_cone_term().expect("single term");
        let exponent = BoundExpr::term(dominant).absorb_log().terms().next().expect("term").eta;
        let mut notes = Vec::new();
        if n == 0 {
            notes.push(format!("seed ⟨t−r⟩^{{1/2}}/⟨t+r⟩; q = {q}, lockstep a = {a}"));
        }
        if dominant.m > 0 {
            notes.push(format!("absorbed ln^{}⟨t−r⟩", dominant.m));
        }
        trace.push(TraceStep {
            channel: ConeChannel.name().to_string(),
            step: n as u32,
            source,
            input: StepInput::Cone,
            output: out,
            exponent,
            time_weight: TimeWeight::TPlusR,
            note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
        });
        if exponent >= goal {
            return Ok((trace, final_bound(ExtRational::int(1), goal)));
        }
    }
    Err(Error::Internal(format!("cone: goal {goal} not reached within {MAX_STEPS} steps")))
}

pub struct ConeChannel;

impl Channel for ConeChannel {
    fn name(&self) -> &str {
        "cone"
    }

    fn applies(&self, profile: &CoefficientProfile) -> bool {
        profile.sigma.is_some()
    }

    fn run(&self, profile: &CoefficientProfile) -> Result<ChannelOutcome> {
        let (trace, bound) = iterate_cone(profile)?;
        let exponent = bound.terms().next().expect("single term").eta;
        Ok(ChannelOutcome { regime: Regime::Cone, exponent, bound, trace })
    }
}
