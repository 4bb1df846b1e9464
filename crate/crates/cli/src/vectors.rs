use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serpens::DenseVector;

/// Where a dense input vector comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorSource {
    Ones,
    Zeros,
    /// uniform in [-1, 1), seeded
    Random,
    /// whitespace-separated f32 values
    File(PathBuf),
}

impl FromStr for VectorSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ones" => Ok(VectorSource::Ones),
            "zeros" => Ok(VectorSource::Zeros),
            "random" => Ok(VectorSource::Random),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(VectorSource::File(p.into())),
                _ => Err(format!("expected ones, zeros, random or file:PATH, got {s:?}")),
            },
        }
    }
}

impl fmt::Display for VectorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorSource::Ones => f.write_str("ones"),
            VectorSource::Zeros => f.write_str("zeros"),
            VectorSource::Random => f.write_str("random"),
            VectorSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl VectorSource {
    pub fn materialize(&self, len: usize, seed: u64) -> anyhow::Result<DenseVector> {
        Ok(match self {
            VectorSource::Ones => DenseVector::filled(len, 1.0),
            VectorSource::Zeros => DenseVector::zeros(len),
            VectorSource::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>().into()
            }
            VectorSource::File(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let values = text
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f32>()
                            .with_context(|| format!("{}: bad value {t:?}", path.display()))
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                if values.len() != len {
                    bail!("{}: expected {len} values, found {}", path.display(), values.len());
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    bail!("{}: non-finite value {v}", path.display());
                }
                values.into()
            }
        })
    }
}
