use sha2::{Digest, Sha256};

/// First printable ASCII code point (space).
const FIRST: u8 = 0x20;
/// Last printable ASCII code point (`~`).
const LAST: u8 = 0x7e;

/// Symbol id type for the character vocabulary.
pub type SymbolId = usize;

pub const VOCAB_SIZE: usize = 98;
pub const SOS: SymbolId = 95;
pub const EOS: SymbolId = 96;
pub const UNK: SymbolId = 97;
pub const SPACE: SymbolId = 0;

/// Fixed 98-symbol inventory: ids 0–94 are printable ASCII 0x20–0x7E in
/// code-point order, then ⟨sos⟩, ⟨eos⟩ and ⟨unk⟩.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharVocab;

impl CharVocab {
    pub fn size(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn id(&self, c: char) -> SymbolId {
        match u8::try_from(u32::from(c)) {
            Ok(b) if (FIRST..=LAST).contains(&b) => SymbolId::from(b - FIRST),
            _ => UNK,
        }
    }

    /// The printable character for an id, `None` for the special symbols.
    pub fn char(&self, id: SymbolId) -> Option<char> {
        if id < SOS {
            Some(char::from(FIRST + id as u8))
        } else {
            None
        }
    }

    pub fn symbol_name(&self, id: SymbolId) -> String {
        match id {
            SOS => "<sos>".into(),
            EOS => "<eos>".into(),
            UNK => "<unk>".into(),
            _ => self.char(id).map(String::from).unwrap_or_default(),
        }
    }

    pub fn encode(&self, s: &str, add_eos: bool) -> Vec<SymbolId> {
        let mut ids: Vec<SymbolId> = s.chars().map(|c| self.id(c)).collect();
        if add_eos {
            ids.push(EOS);
        }
        ids
    }

    /// Inverse of [`encode`](Self::encode) on printable text. ⟨sos⟩ and
    /// ⟨eos⟩ are dropped; ⟨unk⟩ decodes to U+FFFD.
    pub fn decode(&self, ids: &[SymbolId]) -> String {
        ids.iter()
            .filter_map(|&id| match id {
                SOS | EOS => None,
                UNK => Some(char::REPLACEMENT_CHARACTER),
                _ => self.char(id),
            })
            .collect()
    }

    /// Hex SHA-256 over the ordered symbol names; recorded in checkpoints.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for id in 0..VOCAB_SIZE {
            h.update(self.symbol_name(id).as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Encodes `s` with the vocabulary; see [`CharVocab::encode`].
pub fn encode_chars(s: &str, vocab: &CharVocab, add_eos: bool) -> Vec<SymbolId> {
    vocab.encode(s, add_eos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        let v = CharVocab;
        assert_eq!(v.encode("Hi", false), vec![40, 73]);
        assert_eq!(v.encode("Hi", true), vec![40, 73, 96]);
        assert_eq!(v.encode("", true), vec![EOS]);
        assert_eq!(v.encode("é", false), vec![UNK]);
        assert_eq!(v.encode("\t", false), vec![UNK]);
        assert_eq!(v.id(' '), SPACE);
        assert_eq!(v.id('~'), 94);
    }

    #[test]
    fn ids_are_a_bijection() {
        let v = CharVocab;
        assert_eq!(v.size(), 98);
        for id in 0..SOS {
            assert_eq!(v.id(v.char(id).unwrap()), id);
        }
        let mut names: Vec<String> = (0..VOCAB_SIZE).map(|i| v.symbol_name(i)).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), VOCAB_SIZE);
    }

    proptest! {
        #[test]
        fn printable_round_trip(s in "[ -~]{0,40}") {
            let v = CharVocab;
            prop_assert_eq!(v.decode(&v.encode(&s, true)), s);
        }
    }
}
