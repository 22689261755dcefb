//! On-disk instance format, the canned counterexample instance and random
//! instance generators.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Rational};
use crate::valuation::{
    AdditiveValuation, CoverageValuation, ExplicitValuation, ItemSet, PublicValuation,
};

/// A public valuation of one of the built-in kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawValuation", into = "RawValuation")]
pub enum Valuation {
    Coverage(CoverageValuation),
    Explicit(ExplicitValuation),
    Additive(AdditiveValuation),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawValuation {
    Coverage {
        num_viewers: usize,
        viewers_of_slot: Vec<Vec<usize>>,
    },
    Explicit {
        m: usize,
        #[serde(with = "rational::serde_vec")]
        table: Vec<Rational>,
    },
    Additive {
        #[serde(with = "rational::serde_vec")]
        weights: Vec<Rational>,
    },
}

impl TryFrom<RawValuation> for Valuation {
    type Error = Error;

    fn try_from(raw: RawValuation) -> Result<Self> {
        Ok(match raw {
            RawValuation::Coverage {
                num_viewers,
                viewers_of_slot,
            } => Valuation::Coverage(CoverageValuation::new(num_viewers, viewers_of_slot)?),
            RawValuation::Explicit { m, table } => {
                Valuation::Explicit(ExplicitValuation::new(m, table)?)
            }
            RawValuation::Additive { weights } => {
                Valuation::Additive(AdditiveValuation::new(weights))
            }
        })
    }
}

impl From<Valuation> for RawValuation {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Coverage(c) => RawValuation::Coverage {
                num_viewers: c.num_viewers(),
                viewers_of_slot: c.viewers_of_slot().to_vec(),
            },
            Valuation::Explicit(e) => RawValuation::Explicit {
                m: e.num_items(),
                table: e.table().to_vec(),
            },
            Valuation::Additive(a) => RawValuation::Additive {
                weights: a.weights().to_vec(),
            },
        }
    }
}

impl Valuation {
    fn inner(&self) -> &dyn PublicValuation {
        match self {
            Valuation::Coverage(c) => c,
            Valuation::Explicit(e) => e,
            Valuation::Additive(a) => a,
        }
    }
}

impl PublicValuation for Valuation {
    fn num_items(&self) -> usize {
        self.inner().num_items()
    }

    fn value(&self, set: &ItemSet) -> Result<Rational> {
        self.inner().value(set)
    }

    fn describe(&self) -> String {
        self.inner().describe()
    }
}

/// Contents of an instance file: `{"m": .., "valuation": {"type": ..}}`.
///
/// `n` is an optional agent-count hint written by the generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub valuation: Valuation,
}

impl Instance {
    pub fn new(valuation: Valuation, n: Option<usize>) -> Self {
        Self {
            m: valuation.num_items(),
            n,
            valuation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.valuation.num_items() != self.m {
            return invalid(format!(
                "instance declares m = {} but the valuation has {} items",
                self.m,
                self.valuation.num_items()
            ));
        }
        if self.n == Some(0) {
            return invalid("instance declares n = 0 agents");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("instance JSON: {e}")))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

/// Two advertisers, three slots, ten viewers: slot 0 reaches viewers 0..5,
/// slot 1 reaches 5..10, slot 2 reaches 2..8.
pub fn three_slot_example() -> Valuation {
    Valuation::Coverage(
        CoverageValuation::new(
            10,
            vec![(0..5).collect(), (5..10).collect(), (2..8).collect()],
        )
        .expect("static instance"),
    )
}

pub fn three_slot_instance() -> Instance {
    Instance::new(three_slot_example(), Some(2))
}

/// Random slot/viewer bipartite graph: each slot reaches a uniformly sized,
/// uniformly chosen set of between 1 and `num_viewers` viewers.
pub fn random_coverage<R: Rng + ?Sized>(
    m: usize,
    num_viewers: usize,
    rng: &mut R,
) -> Result<CoverageValuation> {
    if m == 0 || num_viewers == 0 {
        return invalid("coverage instances need m >= 1 and at least one viewer");
    }
    let slots = (0..m)
        .map(|_| {
            let size = rng.gen_range(1..=num_viewers);
            let mut viewers = sample(rng, num_viewers, size).into_vec();
            viewers.sort_unstable();
            viewers
        })
        .collect();
    CoverageValuation::new(num_viewers, slots)
}

/// Additive weights drawn from `{1/4, 2/4, ..., 40/4}`.
pub fn random_additive<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<AdditiveValuation> {
    if m == 0 {
        return invalid("additive instances need m >= 1");
    }
    Ok(AdditiveValuation::new(
        (0..m)
            .map(|_| rational::ratio(rng.gen_range(1..=40), 4))
            .collect(),
    ))
}
