use serde::{Deserialize, Serialize};

use super::{CoefficientProfile, ConeChannel, ExteriorChannel, InteriorChannel, InteriorVariant, TraceStep};
use crate::bound::BoundExpr;
use crate::error::{Error, Result};
use crate::ext_rational::ExtRational;

/// Where a channel's final bound is proved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `r < t/2`.
    Interior,
    /// `|r−t|` small relative to `r`.
    Cone,
    /// `r > 2t`.
    Exterior,
}

pub struct ChannelOutcome {
    pub regime: Regime,
    /// Final `⟨t−r⟩` exponent of the channel's bound.
    pub exponent: ExtRational,
    pub bound: BoundExpr,
    pub trace: Vec<TraceStep>,
}

pub trait Channel: Send + Sync {
    fn name(&self) -> &str;
    /// Whether this component exists for the profile at all.
    fn applies(&self, profile: &CoefficientProfile) -> bool;
    fn run(&self, profile: &CoefficientProfile) -> Result<ChannelOutcome>;
}

/// Named channels in registration order.
pub struct ChannelRegistry {
    channels: Vec<Box<dyn Channel>>,
}

impl Default for ChannelRegistry {
    fn default() -> Self {
        let mut r = ChannelRegistry::empty();
        r.register(Box::new(ExteriorChannel)).expect("fresh registry");
        r.register(Box::new(InteriorChannel(InteriorVariant::Potential))).expect("fresh registry");
        r.register(Box::new(InteriorChannel(InteriorVariant::Lockstep))).expect("fresh registry");
        r.register(Box::new(ConeChannel)).expect("fresh registry");
        r
    }
}

impl ChannelRegistry {
    pub fn empty() -> Self {
        ChannelRegistry { channels: Vec::new() }
    }

    pub fn register(&mut self, channel: Box<dyn Channel>) -> Result<()> {
        if self.get(channel.name()).is_some() {
            return Err(Error::usage(format!("channel {} already registered", channel.name())));
        }
        self.channels.push(channel);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn Channel> {
        self.channels.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Channel> {
        self.channels.iter().map(|c| c.as_ref())
    }
}
