//! Offline datasets and their on-disk format.
//!
//! ```text
//! HYBRIDRL-DATASET 1 <state_dim> <action_dim> <count>\n
//! count × record
//! record = s[state_dim] a[action_dim] r s_next[state_dim]   (f64, little-endian)
//!          terminal (u8: 0|1) domain (u8: 0 = real, 1 = sim)
//! ```

use std::path::Path;

use rand::Rng;

use super::buffer::sample_uniform;
use super::transition::{Domain, Transition};
use crate::error::{DatasetError, Error, Result};

const MAGIC: &str = "HYBRIDRL-DATASET";
const VERSION: u32 = 1;

/// Fixed real-domain transition set.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    state_dim: usize,
    action_dim: usize,
    transitions: Vec<Transition>,
}

impl OfflineDataset {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            transitions: Vec::new(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.domain != Domain::Real {
            return Err(Error::DomainContamination {
                context: "offline dataset insert",
                found: t.domain,
            });
        }
        for (what, len, expected) in [
            ("offline dataset state", t.s.len(), self.state_dim),
            ("offline dataset next state", t.s_next.len(), self.state_dim),
            ("offline dataset action", t.a.len(), self.action_dim),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    context: what,
                    expected,
                    actual: len,
                });
            }
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn sample<'a, R: Rng + ?Sized>(
        &'a self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&'a Transition>> {
        sample_uniform(&self.transitions, batch_size, rng)
    }

    pub fn record_size(state_dim: usize, action_dim: usize) -> usize {
        8 * (2 * state_dim + action_dim + 1) + 2
    }

    fn header(&self) -> String {
        format!(
            "{MAGIC} {VERSION} {} {} {}\n",
            self.state_dim,
            self.action_dim,
            self.transitions.len()
        )
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = self.header();
        let rec = Self::record_size(self.state_dim, self.action_dim);
        let mut out = Vec::with_capacity(header.len() + rec * self.len());
        out.extend_from_slice(header.as_bytes());
        for t in &self.transitions {
            for v in
                t.s.iter()
                    .chain(&t.a)
                    .chain(std::iter::once(&t.r))
                    .chain(&t.s_next)
            {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(u8::from(t.terminal));
            out.push(t.domain.to_byte());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, DatasetError> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| DatasetError::MalformedHeader("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..newline])
            .map_err(|_| DatasetError::MalformedHeader("header is not utf-8".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [magic, version, sd, ad, count] = fields[..] else {
            return Err(DatasetError::MalformedHeader(format!(
                "expected 5 fields, got `{header}`"
            )));
        };
        if magic != MAGIC {
            return Err(DatasetError::MalformedHeader(format!("bad magic `{magic}`")));
        }
        let parse = |name: &str, v: &str| {
            v.parse::<usize>()
                .map_err(|_| DatasetError::MalformedHeader(format!("bad {name} `{v}`")))
        };
        if parse("version", version)? != VERSION as usize {
            return Err(DatasetError::MalformedHeader(format!(
                "unsupported version {version}"
            )));
        }
        let (state_dim, action_dim, count) = (
            parse("state dim", sd)?,
            parse("action dim", ad)?,
            parse("count", count)?,
        );
        if state_dim == 0 || action_dim == 0 {
            return Err(DatasetError::MalformedHeader(
                "dimensions must be positive".into(),
            ));
        }

        let body = &bytes[newline + 1..];
        let rec = Self::record_size(state_dim, action_dim);
        let needed = rec * count;
        if body.len() < needed {
            return Err(DatasetError::Truncated {
                declared: count,
                available: body.len(),
                record_size: rec,
            });
        }
        if body.len() > needed {
            return Err(DatasetError::TrailingBytes {
                extra: body.len() - needed,
            });
        }

        let mut transitions = Vec::with_capacity(count);
        for (index, chunk) in body.chunks_exact(rec).enumerate() {
            let floats: Vec<f64> = chunk[..rec - 2]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let terminal = match chunk[rec - 2] {
                0 => false,
                1 => true,
                b => {
                    return Err(DatasetError::MalformedRecord {
                        index,
                        reason: format!("terminal flag {b}"),
                    })
                }
            };
            let domain = Domain::from_byte(chunk[rec - 1]).ok_or_else(|| DatasetError::MalformedRecord {
                index,
                reason: format!("domain tag {}", chunk[rec - 1]),
            })?;
            if domain != Domain::Real {
                return Err(DatasetError::MalformedRecord {
                    index,
                    reason: "offline datasets hold real-domain transitions only".into(),
                });
            }
            let (s, rest) = floats.split_at(state_dim);
            let (a, rest) = rest.split_at(action_dim);
            let t = Transition {
                s: s.to_vec(),
                a: a.to_vec(),
                r: rest[0],
                s_next: rest[1..].to_vec(),
                terminal,
                domain,
            };
            if !t.is_finite() {
                return Err(DatasetError::MalformedRecord {
                    index,
                    reason: "non-finite value".into(),
                });
            }
            transitions.push(t);
        }
        Ok(Self {
            state_dim,
            action_dim,
            transitions,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::decode(&bytes)?)
    }

    /// Loads and checks the state/action dimensions against what the caller expects.
    pub fn load_expecting(path: &Path, state_dim: usize, action_dim: usize) -> Result<Self> {
        let ds = Self::load(path)?;
        if (ds.state_dim, ds.action_dim) != (state_dim, action_dim) {
            return Err(DatasetError::DimensionMismatch {
                expected: (state_dim, action_dim),
                found: (ds.state_dim, ds.action_dim),
            }
            .into());
        }
        Ok(ds)
    }
}
