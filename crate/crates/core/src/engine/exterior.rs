use super::{
    final_bound, Channel, ChannelOutcome, CoefficientProfile, Regime, StepInput, TimeWeight,
    TraceStep, MAX_STEPS,
};
use crate::bound::BoundExpr;
use crate::conversion::{exterior_step, ExteriorState, ExteriorStep};
use crate::error::{Error, Result};
use crate::ext_rational::ExtRational;

/// The `r > t` potential component, cycling through the exterior states
/// with `a = min(1+σ, δ)` until the `r` powers are exhausted.
pub fn iterate_exterior(profile: &CoefficientProfile) -> Result<(Vec<TraceStep>, BoundExpr)> {
    let a = ExtRational::from(profile.potential_rate());
    let mut state = ExteriorState::start(a)?;
    let mut trace = Vec::new();
    for n in 0..MAX_STEPS {
        let next = exterior_step(&state)?;
        let (output, exponent) = match next {
            ExteriorStep::Next(s) => {
                let e = s.bound().terms().next().expect("single term").eta;
                (s.bound(), e)
            }
            ExteriorStep::Final(e) => (final_bound(ExtRational::int(1), e), e),
        };
        trace.push(TraceStep {
            channel: ExteriorChannel.name().to_string(),
            step: n as u32,
            source: state.source(),
            input: StepInput::Exterior { state },
            output: output.clone(),
            exponent,
            time_weight: TimeWeight::TPlusR,
            note: (n == 0).then(|| format!("reconstructed seed A(0) from ⟨r⟩^{{−1/2}}; a = {a}")),
        });
        match next {
            ExteriorStep::Final(_) => return Ok((trace, output)),
            ExteriorStep::Next(s) => state = s,
        }
    }
    Err(Error::Internal(format!("exterior: no final bound within {MAX_STEPS} steps")))
}

pub struct ExteriorChannel;

impl Channel for ExteriorChannel {
    fn name(&self) -> &str {
        "exterior"
    }

    fn applies(&self, _profile: &CoefficientProfile) -> bool {
        true
    }

    fn run(&self, profile: &CoefficientProfile) -> Result<ChannelOutcome> {
        let (trace, bound) = iterate_exterior(profile)?;
        let exponent = bound.terms().next().expect("single term").eta;
        Ok(ChannelOutcome { regime: Regime::Exterior, exponent, bound, trace })
    }
}
