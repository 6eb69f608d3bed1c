use std::collections::HashMap;

/// End-of-sentence symbol; also the decoder start convention (the first
/// target embedding is a zero vector, not a token).
pub const EOS: u32 = 0;
/// Unknown-unit symbol.
pub const UNK: u32 = 1;

pub const EOS_STR: &str = "<eos>";
pub const UNK_STR: &str = "<unk>";

/// Network vocabulary: whitespace tokens of the (already segmented) training
/// text mapped to contiguous ids, with `<eos>` and `<unk>` reserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    units: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_units(units: Vec<String>) -> Self {
        let index = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32))
            .collect();
        Vocab { units, index }
    }

    /// Vocabulary of all distinct tokens in the lines, sorted for
    /// reproducibility.
    pub fn from_corpus<'a, I: IntoIterator<Item = &'a str>>(lines: I) -> Self {
        let mut set: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for line in lines {
            for tok in line.split_whitespace() {
                set.insert(tok.to_string());
            }
        }
        set.remove(EOS_STR);
        set.remove(UNK_STR);
        let mut units = vec![EOS_STR.to_string(), UNK_STR.to_string()];
        units.extend(set);
        Vocab::from_units(units)
    }

    /// Restore a vocabulary from its exact unit list (checkpoint loading).
    pub fn from_unit_list(units: Vec<String>) -> Self {
        Vocab::from_units(units)
    }

    /// Synthetic vocabulary `<eos> <unk> u2 .. u{n-1}` for tests and toys.
    pub fn numbered(n: usize) -> Self {
        assert!(n >= 2);
        let mut units = vec![EOS_STR.to_string(), UNK_STR.to_string()];
        for i in 2..n {
            units.push(format!("u{i}"));
        }
        Vocab::from_units(units)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn id(&self, unit: &str) -> u32 {
        self.index.get(unit).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, unit: &str) -> bool {
        self.index.contains_key(unit)
    }

    pub fn unit(&self, id: u32) -> &str {
        &self.units[id as usize]
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn encode_line(&self, line: &str) -> Vec<u32> {
        line.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn decode_ids(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.unit(i))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_vocab_is_sorted_and_reserved() {
        let v = Vocab::from_corpus(["b a", "c a"]);
        assert_eq!(v.units(), &["<eos>", "<unk>", "a", "b", "c"]);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.encode_line("c b missing"), vec![4, 3, UNK]);
    }

    #[test]
    fn decode_round_trips_known_units() {
        let v = Vocab::from_corpus(["x y z"]);
        let ids = v.encode_line("z x y");
        assert_eq!(v.decode_ids(&ids), "z x y");
    }
}
