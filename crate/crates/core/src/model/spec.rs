use crate::error::{Error, Result};

/// Architecture family of the encoder-decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Bidirectional GRU encoder plus conditional-GRU decoder.
    Shallow,
    /// Each recurrence step is a pipeline of GRU transitions; recurrence
    /// enters only the first transition.
    DeepTransition,
    /// Stacks of recurrent layers with alternating encoder directions and
    /// residual connections.
    Stacked,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Shallow => write!(f, "shallow"),
            Family::DeepTransition => write!(f, "deep_transition"),
            Family::Stacked => write!(f, "stacked"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shallow" => Ok(Family::Shallow),
            "deep_transition" => Ok(Family::DeepTransition),
            "stacked" => Ok(Family::Stacked),
            other => Err(Error::InvalidArg(format!("unknown family `{other}`"))),
        }
    }
}

/// Target generation order. A right-to-left model is trained on reversed
/// target sequences; callers always pass targets in canonical order and the
/// model applies the reversal itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::LeftToRight => write!(f, "left_to_right"),
            Direction::RightToLeft => write!(f, "right_to_left"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left_to_right" | "l2r" => Ok(Direction::LeftToRight),
            "right_to_left" | "r2l" => Ok(Direction::RightToLeft),
            other => Err(Error::InvalidArg(format!("unknown direction `{other}`"))),
        }
    }
}

/// Architecture configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    /// Encoder recurrence depth (deep transition) or stack depth (stacked).
    pub enc_depth: usize,
    /// Decoder transition depth (deep transition, >= 2) or stack depth.
    pub dec_depth: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub tie_output: bool,
    pub layer_norm: bool,
    pub direction: Direction,
}

impl ModelSpec {
    /// Defaults mirroring the toolkit's standard configuration: embedding
    /// 512, hidden 1024, deep transition 4/8 or stacked 4/4.
    pub fn default_for(family: Family, src_vocab: usize, tgt_vocab: usize) -> Self {
        let (enc_depth, dec_depth) = match family {
            Family::Shallow => (1, 2),
            Family::DeepTransition => (4, 8),
            Family::Stacked => (4, 4),
        };
        ModelSpec {
            family,
            enc_depth,
            dec_depth,
            embedding_dim: 512,
            hidden_dim: 1024,
            src_vocab,
            tgt_vocab,
            tie_output: true,
            layer_norm: true,
            direction: Direction::LeftToRight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.embedding_dim,
            self.hidden_dim,
            self.src_vocab,
            self.tgt_vocab,
            self.enc_depth,
            self.dec_depth,
        ];
        if positive.iter().any(|&d| d == 0) {
            return Err(Error::SpecMismatch("all dimensions must be positive".into()));
        }
        match self.family {
            Family::Shallow => {
                if self.enc_depth != 1 || self.dec_depth != 2 {
                    return Err(Error::SpecMismatch(
                        "shallow family has encoder depth 1 and decoder depth 2".into(),
                    ));
                }
            }
            Family::DeepTransition => {
                if self.dec_depth < 2 {
                    return Err(Error::SpecMismatch(
                        "deep transition decoder depth must be at least 2".into(),
                    ));
                }
            }
            Family::Stacked => {}
        }
        Ok(())
    }

    /// Number of GRU cells in the decoder. For the stacked family the base
    /// conditional GRU contributes two transitions and every higher stack
    /// layer one simple GRU.
    pub fn decoder_cells(&self) -> usize {
        match self.family {
            Family::Shallow => 2,
            Family::DeepTransition => self.dec_depth,
            Family::Stacked => self.dec_depth + 1,
        }
    }

    /// Flat key=value block embedded in checkpoints.
    pub fn to_kv_block(&self) -> String {
        format!(
            "family={}\nenc_depth={}\ndec_depth={}\nembedding_dim={}\nhidden_dim={}\nsrc_vocab={}\ntgt_vocab={}\ntie_output={}\nlayer_norm={}\ndirection={}\n",
            self.family,
            self.enc_depth,
            self.dec_depth,
            self.embedding_dim,
            self.hidden_dim,
            self.src_vocab,
            self.tgt_vocab,
            self.tie_output,
            self.layer_norm,
            self.direction,
        )
    }

    pub fn from_kv_pairs(kv: &std::collections::HashMap<String, String>) -> Result<Self> {
        let get = |k: &str| -> Result<&String> {
            kv.get(k)
                .ok_or_else(|| Error::parse("model spec", format!("missing key `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse("model spec", format!("bad number for `{k}`")))
        };
        let flag = |k: &str| -> Result<bool> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse("model spec", format!("bad bool for `{k}`")))
        };
        let spec = ModelSpec {
            family: get("family")?.parse()?,
            enc_depth: num("enc_depth")?,
            dec_depth: num("dec_depth")?,
            embedding_dim: num("embedding_dim")?,
            hidden_dim: num("hidden_dim")?,
            src_vocab: num("src_vocab")?,
            tgt_vocab: num("tgt_vocab")?,
            tie_output: flag("tie_output")?,
            layer_norm: flag("layer_norm")?,
            direction: get("direction")?.parse()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_block_round_trips() {
        let spec = ModelSpec {
            family: Family::DeepTransition,
            enc_depth: 2,
            dec_depth: 3,
            embedding_dim: 32,
            hidden_dim: 64,
            src_vocab: 22,
            tgt_vocab: 22,
            tie_output: true,
            layer_norm: true,
            direction: Direction::RightToLeft,
        };
        let block = spec.to_kv_block();
        let kv: std::collections::HashMap<String, String> = block
            .lines()
            .map(|l| {
                let (k, v) = l.split_once('=').unwrap();
                (k.to_string(), v.to_string())
            })
            .collect();
        assert_eq!(ModelSpec::from_kv_pairs(&kv).unwrap(), spec);
    }

    #[test]
    fn deep_transition_requires_two_decoder_transitions() {
        let mut spec = ModelSpec::default_for(Family::DeepTransition, 10, 10);
        spec.dec_depth = 1;
        assert!(spec.validate().is_err());
    }
}
