use num_traits::One;
use serde::{Deserialize, Serialize};

use super::{
    final_bound, radial_to_temporal, Channel, ChannelOutcome, CoefficientProfile, Regime,
    StepInput, TimeWeight, TraceStep, MAX_STEPS,
};
use crate::bound::{combine, BoundExpr, CombineKind};
use crate::conversion::{region1_bound, region2_bound, SourceBound};
use crate::error::{Error, Result};
use crate::ext_rational::{ExtRational, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteriorVariant {
    /// Target `min(1+σ, δ)`.
    Potential,
    /// Target `min(σ, δ)`, for the part-one conclusion.
    Lockstep,
}

impl InteriorVariant {
    fn target(self, profile: &CoefficientProfile) -> Rational {
        match self {
            InteriorVariant::Potential => profile.potential_rate(),
            InteriorVariant::Lockstep => profile.lockstep_rate(),
        }
    }
}

/// Per-step gain: the target itself below 1, else `1−ε`.
pub fn step_gain(target: Rational) -> ExtRational {
    if target < Rational::one() {
        ExtRational::from(target)
    } else {
        ExtRational::one_minus()
    }
}

/// `max{n ≥ 0 : 1/2 + nν < 1}`.
pub fn n_prime(nu: ExtRational) -> u32 {
    let half = ExtRational::frac(1, 2);
    let mut n = 0;
    while half + nu * (n as i64 + 1) < ExtRational::int(1) {
        n += 1;
    }
    n
}

/// `max{n ≥ 0 : n(1−ε) < target}`.
pub fn n_double_prime(target: Rational) -> u32 {
    let t = ExtRational::from(target);
    let mut n = 0;
    while ExtRational::one_minus() * (n as i64 + 1) < t {
        n += 1;
    }
    n
}

/// Iterates `V·w` sources through the conversion kernel for `r < t`.
///
/// The source is `⟨r⟩^{−2−ν}⟨t⟩^{−1}⟨t−r⟩^{−η}`, starting from `η = −1/2`.
/// The inner region converts it with `α = 2+ν`, the outer one with the
/// full `α = 2+target`. Each step keeps the slowest term, trades its
/// logarithm for an `ε`, and feeds `⟨r⟩^{−1} ↦ ⟨t⟩^{−1}` back. It stops when
/// the exponent no longer moves.
pub fn iterate_interior(
    profile: &CoefficientProfile,
    variant: InteriorVariant,
) -> Result<(Vec<TraceStep>, BoundExpr)> {
    let name = InteriorChannel(variant).name().to_string();
    let target = variant.target(profile);
    let nu = step_gain(target);
    let alpha1 = ExtRational::int(2) + nu;
    let alpha2 = ExtRational::int(2) + ExtRational::from(target);
    let mut eta = ExtRational::frac(-1, 2);
    let mut trace = Vec::new();
    for step in 0..MAX_STEPS {
        let source = SourceBound::new(0, alpha1, ExtRational::int(1), eta);
        let outer = SourceBound { alpha: alpha2, ..source };
        let raw = combine(CombineKind::Sum, &[region1_bound(&source)?, region2_bound(&outer)?])?;
        let dominant = raw
            .dominant_cone_term()
            .ok_or_else(|| Error::Internal("empty conversion output".into()))?;
        let logs = dominant.m;
        let absorbed = BoundExpr::term(dominant).absorb_log();
        // ⟨r⟩w ≲ ⟨t−r⟩^{−η'}  ⇒  w ≲ ⟨t⟩^{−1}⟨t−r⟩^{−η'}
        let w = radial_to_temporal(&absorbed.times(crate::bound::DecayTerm::new(
            0,
            ExtRational::int(1),
            ExtRational::zero(),
            ExtRational::zero(),
        )))?;
        let next = w.terms().next().expect("single term").eta;
        let mut notes = Vec::new();
        if step == 0 {
            notes.push(if target < Rational::one() {
                format!("seed ⟨r⟩^{{−2−ν}}⟨t⟩^{{−1}}⟨t−r⟩^{{1/2}}; ν = {nu}, n′ = {}", n_prime(nu))
            } else {
                format!("seed ⟨r⟩^{{−2−ν}}⟨t⟩^{{−1}}⟨t−r⟩^{{1/2}}; ν = 1−ε, n″ = {}", n_double_prime(target))
            });
        }
        if logs > 0 {
            notes.push(format!("absorbed ln^{logs}⟨t−r⟩"));
        }
        trace.push(TraceStep {
            channel: name.clone(),
            step: step as u32,
            source,
            input: StepInput::Interior { region2_alpha: alpha2 },
            output: raw,
            exponent: next,
            time_weight: TimeWeight::T,
            note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
        });
        if next == eta {
            return Ok((trace, final_bound(ExtRational::int(1), eta)));
        }
        if next < eta {
            return Err(Error::Internal(format!("{name}: exponent decreased from {eta} to {next}")));
        }
        eta = next;
    }
    Err(Error::Internal(format!("{name}: no fixed point within {MAX_STEPS} steps")))
}

pub struct InteriorChannel(pub InteriorVariant);

impl Channel for InteriorChannel {
    fn name(&self) -> &str {
        match self.0 {
            InteriorVariant::Potential => "interior-potential",
            InteriorVariant::Lockstep => "interior-lockstep",
        }
    }

    fn applies(&self, profile: &CoefficientProfile) -> bool {
        match self.0 {
            InteriorVariant::Potential => true,
            InteriorVariant::Lockstep => profile.part == 1,
        }
    }

    fn run(&self, profile: &CoefficientProfile) -> Result<ChannelOutcome> {
        let (trace, bound) = iterate_interior(profile, self.0)?;
        let exponent = bound.terms().next().expect("single term").eta;
        Ok(ChannelOutcome { regime: Regime::Interior, exponent, bound, trace })
    }
}
