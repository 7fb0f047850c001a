use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Real,
    Sim,
}

impl Domain {
    pub fn to_byte(self) -> u8 {
        match self {
            Domain::Real => 0,
            Domain::Sim => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Domain::Real),
            1 => Some(Domain::Sim),
            _ => None,
        }
    }
}

/// One `(s, a, r, s', terminal)` record with its domain tag.
///
/// `terminal` marks failure only; time-limit truncation is stored as `false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
    pub domain: Domain,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self
                .s
                .iter()
                .chain(&self.a)
                .chain(&self.s_next)
                .all(|v| v.is_finite())
    }
}

/// Fails with a contamination error on the first transition not tagged `expected`.
pub fn require_domain<'a, I>(transitions: I, expected: Domain, context: &'static str) -> crate::Result<()>
where
    I: IntoIterator<Item = &'a Transition>,
{
    match transitions.into_iter().find(|t| t.domain != expected) {
        Some(t) => Err(crate::Error::DomainContamination {
            context,
            found: t.domain,
        }),
        None => Ok(()),
    }
}
