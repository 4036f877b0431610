use std::collections::HashMap;
use std::path::Path;

use unicode_general_category::{get_general_category, GeneralCategory};

use super::transformer::{sinusoid, uniform, EncoderParams, Transformer};
use super::EncoderError;
use crate::Scalar;

/// Content tokens kept after truncation (the class token is extra).
pub const MAX_CONTENT_TOKENS: usize = 32;
const MAX_WORD_CHARS: usize = 100;
const SHIPPED_VOCAB: &str = include_str!("../../assets/vocab.txt");

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Lowercases, deletes Unicode punctuation (categories `P*`), collapses
/// whitespace runs to one space and trims.
pub fn normalize_text(c: &str) -> String {
    let cleaned: String = c.to_lowercase().chars().filter(|&ch| !is_punctuation(ch)).collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// WordPiece vocabulary: one piece per line, `##` marks a continuation.
/// Must contain `[UNK]` and `[CLS]`.
#[derive(Debug, Clone)]
pub struct Vocab {
    pieces: Vec<String>,
    ids: HashMap<String, u32>,
    unk: u32,
    cls: u32,
}

impl Vocab {
    pub fn from_text(text: &str) -> Result<Self, EncoderError> {
        let pieces: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        let mut ids = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if ids.insert(p.clone(), i as u32).is_some() {
                return Err(EncoderError::InvalidVocab(format!("duplicate piece `{p}`")));
            }
        }
        let special = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| EncoderError::InvalidVocab(format!("missing {name}")))
        };
        let unk = special("[UNK]")?;
        let cls = special("[CLS]")?;
        Ok(Self { pieces, ids, unk, cls })
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EncoderError::InvalidVocab(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// The small vocabulary bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_text(SHIPPED_VOCAB).expect("bundled vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    /// Greedy longest-match-first WordPiece over whitespace-separated words.
    /// A word that cannot be fully covered becomes a single `[UNK]`. At most
    /// [`MAX_CONTENT_TOKENS`] content tokens are kept after the class token.
    pub fn tokenize(&self, normalized: &str) -> TokenSeq {
        let mut ids = vec![self.cls];
        'words: for word in normalized.split_whitespace() {
            if ids.len() > MAX_CONTENT_TOKENS {
                break;
            }
            let chars: Vec<char> = word.chars().collect();
            if chars.len() > MAX_WORD_CHARS {
                ids.push(self.unk);
                continue;
            }
            let mut pieces = Vec::new();
            let mut start = 0;
            while start < chars.len() {
                let mut end = chars.len();
                let mut found = None;
                while end > start {
                    let sub: String = chars[start..end].iter().collect();
                    let candidate = if start > 0 { format!("##{sub}") } else { sub };
                    if let Some(id) = self.id(&candidate) {
                        found = Some(id);
                        break;
                    }
                    end -= 1;
                }
                match found {
                    Some(id) => pieces.push(id),
                    None => {
                        ids.push(self.unk);
                        continue 'words;
                    }
                }
                start = end;
            }
            ids.extend(pieces);
        }
        ids.truncate(MAX_CONTENT_TOKENS + 1);
        TokenSeq { ids }
    }

    /// Joins pieces back into text; `##` pieces attach to the previous one.
    pub fn detokenize(&self, seq: &TokenSeq) -> String {
        let mut out = String::new();
        for &id in seq.content() {
            let piece = self.piece(id).unwrap_or("[UNK]");
            match piece.strip_prefix("##") {
                Some(rest) => out.push_str(rest),
                None => {
                    if !out.is_empty() {
                        out.push(' ');
                    }
                    out.push_str(piece);
                }
            }
        }
        out
    }
}

/// Token ids with the class token at position 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    ids: Vec<u32>,
}

impl TokenSeq {
    pub fn from_ids(ids: Vec<u32>) -> Self {
        Self { ids }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn content(&self) -> &[u32] {
        self.ids.get(1..).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Frozen toy bidirectional encoder returning the class-token output.
#[derive(Debug, Clone)]
pub struct TextEncoder<T> {
    params: EncoderParams,
    vocab_size: usize,
    embedding: Vec<T>,
    body: Transformer<T>,
}

impl<T: Scalar> TextEncoder<T> {
    pub fn new(params: EncoderParams, vocab_size: usize) -> Result<Self, EncoderError> {
        params.validate()?;
        let mut rng = crate::seed::rng_for(params.seed, "text-encoder");
        let embedding = uniform(&mut rng, vocab_size * params.width, 1.0);
        let body = Transformer::init(&mut rng, &params);
        Ok(Self { params, vocab_size, embedding, body })
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn encode(&self, seq: &TokenSeq) -> Result<Vec<T>, EncoderError> {
        if seq.is_empty() {
            return Err(EncoderError::InvalidParams("token sequence lacks a class token".into()));
        }
        let w = self.params.width;
        let mut tokens = Vec::with_capacity(seq.len() * w);
        let mut code = vec![T::zero(); w];
        for (pos, &id) in seq.ids().iter().enumerate() {
            let id = id as usize;
            if id >= self.vocab_size {
                return Err(EncoderError::DimMismatch { expected: self.vocab_size, found: id });
            }
            sinusoid(pos, &mut code);
            tokens.extend(self.embedding[id * w..(id + 1) * w].iter().zip(&code).map(|(&e, &p)| e + p));
        }
        self.body.forward(&mut tokens);
        tokens.truncate(w);
        Ok(tokens)
    }

    /// Normalizes, tokenizes and encodes a raw caption.
    pub fn encode_caption(&self, vocab: &Vocab, caption: &str) -> Result<Vec<T>, EncoderError> {
        self.encode(&vocab.tokenize(&normalize_text(caption)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_text("A Dog Barks, loudly!"), "a dog barks loudly");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("it's 5 o'clock"), "its 5 oclock");
        assert_eq!(normalize_text("  «Rain»\t—  falls…  "), "rain falls");
    }

    #[test]
    fn truncates_to_thirty_two_content_tokens() {
        let vocab = Vocab::shipped();
        let text = vec!["dog"; 40].join(" ");
        let seq = vocab.tokenize(&text);
        assert_eq!(seq.len(), 33);
        assert_eq!(seq.ids()[0], vocab.cls_id());
        assert!(seq.content().iter().all(|&id| id == vocab.id("dog").unwrap()));
    }

    #[test]
    fn empty_string_is_class_token_only() {
        let vocab = Vocab::shipped();
        assert_eq!(vocab.tokenize("").ids(), &[vocab.cls_id()]);
    }

    #[test]
    fn uncovered_word_is_one_unk() {
        let vocab = Vocab::shipped();
        // 'ñ' has no piece, so the greedy cover fails and the whole word is UNK.
        let seq = vocab.tokenize("ñandú");
        assert_eq!(seq.content(), &[vocab.unk_id()]);
        let seq = vocab.tokenize("a ñandú barks");
        assert_eq!(seq.content(), &[vocab.id("a").unwrap(), vocab.unk_id(), vocab.id("barks").unwrap()]);
    }

    #[test]
    fn greedy_prefers_longest_pieces() {
        let vocab = Vocab::from_text("[UNK]\n[CLS]\nbark\nb\n##ing\n##i\n##n\n##g\n##s").unwrap();
        let seq = vocab.tokenize("barking");
        let pieces: Vec<&str> = seq.content().iter().map(|&i| vocab.piece(i).unwrap()).collect();
        assert_eq!(pieces, ["bark", "##ing"]);
    }

    #[test]
    fn vocab_validation() {
        assert!(Vocab::from_text("[CLS]\nfoo").is_err());
        assert!(Vocab::from_text("[UNK]\n[CLS]\nfoo\nfoo").is_err());
    }

    #[test]
    fn text_encoder_behaviour() {
        let vocab = Vocab::shipped();
        let enc: TextEncoder<f64> = TextEncoder::new(EncoderParams { seed: 3, ..Default::default() }, vocab.len()).unwrap();
        let seq = vocab.tokenize("a dog barks loudly");
        assert_eq!(enc.encode(&seq).unwrap(), enc.encode(&seq).unwrap());

        let mut ids = seq.ids().to_vec();
        ids.swap(1, 3);
        assert_ne!(enc.encode(&TokenSeq::from_ids(ids)).unwrap(), enc.encode(&seq).unwrap());

        let cls_only = enc.encode(&vocab.tokenize("")).unwrap();
        assert_eq!(cls_only.len(), 64);
        assert!(cls_only.iter().all(|v| v.is_finite()));

        assert!(enc.encode(&TokenSeq::from_ids(vec![vocab.cls_id(), 10_000])).is_err());
    }

    proptest! {
        #[test]
        fn tokenize_bounds_and_round_trip(words in proptest::collection::vec("[a-z0-9]{1,12}", 0..50)) {
            let vocab = Vocab::shipped();
            let text = words.join(" ");
            let seq = vocab.tokenize(&text);
            prop_assert!(seq.content().len() <= MAX_CONTENT_TOKENS);
            prop_assert!(seq.ids().iter().all(|&i| (i as usize) < vocab.len()));
            if !seq.content().contains(&vocab.unk_id()) {
                let back = vocab.detokenize(&seq);
                prop_assert!(text.starts_with(&back));
                if seq.content().len() < MAX_CONTENT_TOKENS {
                    prop_assert_eq!(back, text);
                }
            }
        }
    }
}
