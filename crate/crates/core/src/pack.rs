//! Language packs: per-language vocabularies, tagger rules and generator
//! phrasing, loaded from TOML resource files.
//!
//! Two packs ship with the crate (`en`, `ko`); others can be loaded from disk
//! with [`LanguagePack::from_toml`].

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use regex::{Regex, RegexBuilder};
use serde::Deserialize;

use crate::error::{CoreError, Result};
use crate::tags::Tag;

const EN_PACK: &str = include_str!("../resources/packs/en.toml");
const KO_PACK: &str = include_str!("../resources/packs/ko.toml");

/// A string or a list of alternatives.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Variants {
    One(String),
    Many(Vec<String>),
}

impl Variants {
    pub fn as_slice(&self) -> &[String] {
        match self {
            Variants::One(s) => std::slice::from_ref(s),
            Variants::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LateralityTerms {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub isthmus: Vec<String>,
    pub both: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionTerms {
    pub upper: Vec<String>,
    pub lower: Vec<String>,
    pub all: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitTerms {
    pub centimeter: Vec<String>,
    pub millimeter: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographicTerms {
    /// Regex whose first capture group is the age in years.
    pub age_pattern: String,
    pub female: Vec<String>,
    pub male: Vec<String>,
}

/// Keywords whose presence makes a span speak about a class.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTerms {
    pub lymph_node_removal: Vec<String>,
    pub enlargement: Vec<String>,
    pub neural_monitor: Vec<String>,
    pub drain: Vec<String>,
    pub capsular: Vec<String>,
    pub extrathyroidal: Vec<String>,
}

/// Phrases for three-way preservation outcomes.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusTerms {
    pub preserved: Vec<String>,
    pub not_preserved: Vec<String>,
    pub not_identified: Vec<String>,
}

/// Canonical value -> surface synonyms.
pub type Vocabulary = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocabularies {
    pub diagnosis: Vocabulary,
    pub surgery_method: Vocabulary,
    pub bleeding: Vocabulary,
    /// Keys are `TOTAL`, `LOBECTOMY_LEFT`, `LOBECTOMY_RIGHT`, `ISTHMUSECTOMY`.
    pub resection_range: Vocabulary,
    /// Ranges outside the known four, recorded verbatim by canonical name.
    pub resection_other: Vocabulary,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggerRuleSpec {
    pub tag: Tag,
    /// The sentence must match this pattern for the rule to fire.
    #[serde(default)]
    pub context: Option<String>,
    /// Matches become spans; a named group `e` narrows the span.
    pub pattern: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub list_sep: String,
    pub list_last: String,
    pub fillers: Vec<String>,
    pub phrases: BTreeMap<String, Variants>,
    pub surfaces: GeneratorSurfaces,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSurfaces {
    pub diagnosis: Vocabulary,
    pub surgery_method: Vocabulary,
    pub bleeding: Vocabulary,
    pub resection_range: Vocabulary,
    pub resection_other: Vocabulary,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackSpec {
    pub name: String,
    /// Whether terms must match on word boundaries (false for agglutinative text).
    pub word_boundaries: bool,
    pub negators: Vec<String>,
    pub laterality: LateralityTerms,
    pub gland_position: PositionTerms,
    pub units: UnitTerms,
    pub demographics: DemographicTerms,
    pub terms: ClassTerms,
    pub nerve_status: StatusTerms,
    pub parathyroid_status: StatusTerms,
    pub vocab: Vocabularies,
    /// Canonical term -> mixed-language renderings of it.
    #[serde(default)]
    pub transliterations: BTreeMap<String, Vec<String>>,
    pub tagger: Vec<TaggerRuleSpec>,
    pub generator: GeneratorSpec,
}

/// Finds any of a fixed set of terms, case-insensitively, longest first.
#[derive(Debug, Clone)]
pub struct TermMatcher {
    regex: Option<Regex>,
}

impl TermMatcher {
    fn new(terms: &[String], word_boundaries: bool) -> Result<Self> {
        let mut sorted: Vec<&String> = terms.iter().filter(|t| !t.trim().is_empty()).collect();
        if sorted.is_empty() {
            return Ok(Self { regex: None });
        }
        sorted.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        let alternation = sorted.iter().map(|t| regex::escape(t)).collect::<Vec<_>>().join("|");
        let pattern = if word_boundaries { format!(r"\b(?:{alternation})\b") } else { format!("(?:{alternation})") };
        Ok(Self { regex: Some(compile(&pattern)?) })
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.as_ref().is_some_and(|r| r.is_match(text))
    }

    /// Byte ranges of non-overlapping matches, left to right.
    pub fn find_all(&self, text: &str) -> Vec<(usize, usize)> {
        match &self.regex {
            Some(r) => r.find_iter(text).map(|m| (m.start(), m.end())).collect(),
            None => Vec::new(),
        }
    }
}

/// A vocabulary compiled for lookup: surface phrase -> canonical value.
#[derive(Debug, Clone)]
pub struct VocabMatcher {
    entries: Vec<(String, String)>,
    word_boundaries: bool,
}

impl VocabMatcher {
    fn new(vocab: &Vocabulary, word_boundaries: bool) -> Self {
        let mut entries: Vec<(String, String)> = vocab
            .iter()
            .flat_map(|(canon, syns)| syns.iter().map(move |s| (s.to_lowercase(), canon.clone())))
            .collect();
        entries.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then(a.cmp(b)));
        Self { entries, word_boundaries }
    }

    /// The canonical value of the longest synonym found in `text`.
    pub fn lookup(&self, text: &str) -> Option<&str> {
        let lower = text.to_lowercase();
        self.entries
            .iter()
            .find(|(syn, _)| contains_term(&lower, syn, self.word_boundaries))
            .map(|(_, canon)| canon.as_str())
    }

    pub fn canonical_values(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.iter().map(|(_, c)| c.as_str()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn synonyms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(s, _)| s.as_str())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Substring search honoring word boundaries when asked.
pub(crate) fn contains_term(haystack: &str, needle: &str, word_boundaries: bool) -> bool {
    if needle.is_empty() {
        return false;
    }
    if !word_boundaries {
        return haystack.contains(needle);
    }
    haystack.match_indices(needle).any(|(i, _)| {
        let before_ok = haystack[..i].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = haystack[i + needle.len()..].chars().next().is_none_or(|c| !is_word_char(c));
        before_ok && after_ok
    })
}

#[derive(Debug, Clone)]
pub struct TaggerRule {
    pub tag: Tag,
    pub context: Option<Regex>,
    pub pattern: Regex,
}

/// Text with mixed-language renderings replaced by canonical terms, plus the
/// character mapping back to the original.
#[derive(Debug, Clone)]
pub struct Canonicalized {
    pub text: String,
    /// For each canonical char: (original char start, original char end).
    map: Vec<(usize, usize)>,
    original_len: usize,
}

impl Canonicalized {
    /// Maps a canonical char range to the original char range.
    pub fn to_original(&self, start: usize, end: usize) -> (usize, usize) {
        debug_assert!(start < end);
        let s = self.map.get(start).map_or(self.original_len, |m| m.0);
        let e = self.map.get(end - 1).map_or(self.original_len, |m| m.1);
        (s, e)
    }
}

/// A loaded, compiled language pack.
#[derive(Debug)]
pub struct LanguagePack {
    spec: PackSpec,
    pub negation: TermMatcher,
    pub left: TermMatcher,
    pub right: TermMatcher,
    pub isthmus: TermMatcher,
    pub both_sides: TermMatcher,
    pub upper: TermMatcher,
    pub lower: TermMatcher,
    pub all_glands: TermMatcher,
    pub female: TermMatcher,
    pub male: TermMatcher,
    pub age: Regex,
    pub size: Regex,
    millimeter_units: Vec<String>,
    pub lymph_node_removal: TermMatcher,
    pub enlargement: TermMatcher,
    pub neural_monitor: TermMatcher,
    pub drain: TermMatcher,
    pub capsular: TermMatcher,
    pub extrathyroidal: TermMatcher,
    pub nerve_status: [TermMatcher; 3],
    pub parathyroid_status: [TermMatcher; 3],
    pub diagnosis: VocabMatcher,
    pub surgery_method: VocabMatcher,
    pub bleeding: VocabMatcher,
    pub resection_range: VocabMatcher,
    pub resection_other: VocabMatcher,
    transliteration: Option<(Regex, BTreeMap<String, String>)>,
    pub tagger_rules: Vec<TaggerRule>,
}

fn compile(pattern: &str) -> Result<Regex> {
    RegexBuilder::new(pattern)
        .case_insensitive(true)
        .build()
        .map_err(|e| CoreError::Pack(format!("bad pattern {pattern:?}: {e}")))
}

impl LanguagePack {
    /// The English pack shipped with the crate.
    pub fn english() -> Arc<LanguagePack> {
        static PACK: OnceLock<Arc<LanguagePack>> = OnceLock::new();
        PACK.get_or_init(|| Arc::new(LanguagePack::from_toml(EN_PACK).expect("bundled en pack is valid"))).clone()
    }

    /// The Korean pack shipped with the crate.
    pub fn korean() -> Arc<LanguagePack> {
        static PACK: OnceLock<Arc<LanguagePack>> = OnceLock::new();
        PACK.get_or_init(|| Arc::new(LanguagePack::from_toml(KO_PACK).expect("bundled ko pack is valid"))).clone()
    }

    /// Looks up a bundled pack by identifier.
    pub fn bundled(name: &str) -> Result<Arc<LanguagePack>> {
        match name {
            "en" => Ok(Self::english()),
            "ko" => Ok(Self::korean()),
            other => Err(CoreError::Pack(format!("no bundled language pack {other:?} (have: en, ko)"))),
        }
    }

    /// Loads a bundled pack by name, or a pack file when `name_or_path` names one.
    pub fn load(name_or_path: &str) -> Result<Arc<LanguagePack>> {
        if name_or_path.ends_with(".toml") {
            let text = std::fs::read_to_string(name_or_path)?;
            return Ok(Arc::new(Self::from_toml(&text)?));
        }
        Self::bundled(name_or_path)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: PackSpec = toml::from_str(text).map_err(|e| CoreError::Pack(e.to_string()))?;
        Self::compile(spec)
    }

    pub fn compile(spec: PackSpec) -> Result<Self> {
        let wb = spec.word_boundaries;
        let m = |terms: &[String]| TermMatcher::new(terms, wb);
        let units: Vec<String> = spec.units.centimeter.iter().chain(&spec.units.millimeter).cloned().collect();
        let mut units_sorted = units.clone();
        units_sorted.sort_by_key(|u| std::cmp::Reverse(u.chars().count()));
        let unit_alt = units_sorted.iter().map(|u| regex::escape(u)).collect::<Vec<_>>().join("|");
        let size = compile(&format!(r"(\d+(?:\.\d+)?)\s*({unit_alt})"))?;

        let transliteration = if spec.transliterations.is_empty() {
            None
        } else {
            let mut reverse = BTreeMap::new();
            for (canon, forms) in &spec.transliterations {
                for form in forms {
                    reverse.insert(form.to_lowercase(), canon.clone());
                }
            }
            let mut forms: Vec<&String> = reverse.keys().collect();
            forms.sort_by_key(|f| std::cmp::Reverse(f.chars().count()));
            let alt = forms.iter().map(|f| regex::escape(f)).collect::<Vec<_>>().join("|");
            Some((compile(&format!("(?:{alt})"))?, reverse))
        };

        let mut tagger_rules = Vec::with_capacity(spec.tagger.len());
        for rule in &spec.tagger {
            let expand = |p: &str| expand_placeholders(p, &spec);
            tagger_rules.push(TaggerRule {
                tag: rule.tag,
                context: rule.context.as_deref().map(|c| compile(&expand(c)?)).transpose()?,
                pattern: compile(&expand(&rule.pattern)?)?,
            });
        }

        let status = |s: &StatusTerms| -> Result<[TermMatcher; 3]> {
            Ok([m(&s.preserved)?, m(&s.not_preserved)?, m(&s.not_identified)?])
        };

        let pack = LanguagePack {
            negation: m(&spec.negators)?,
            left: m(&spec.laterality.left)?,
            right: m(&spec.laterality.right)?,
            isthmus: m(&spec.laterality.isthmus)?,
            both_sides: m(&spec.laterality.both)?,
            upper: m(&spec.gland_position.upper)?,
            lower: m(&spec.gland_position.lower)?,
            all_glands: m(&spec.gland_position.all)?,
            female: m(&spec.demographics.female)?,
            male: m(&spec.demographics.male)?,
            age: compile(&spec.demographics.age_pattern)?,
            size,
            millimeter_units: spec.units.millimeter.iter().map(|u| u.to_lowercase()).collect(),
            lymph_node_removal: m(&spec.terms.lymph_node_removal)?,
            enlargement: m(&spec.terms.enlargement)?,
            neural_monitor: m(&spec.terms.neural_monitor)?,
            drain: m(&spec.terms.drain)?,
            capsular: m(&spec.terms.capsular)?,
            extrathyroidal: m(&spec.terms.extrathyroidal)?,
            nerve_status: status(&spec.nerve_status)?,
            parathyroid_status: status(&spec.parathyroid_status)?,
            diagnosis: VocabMatcher::new(&spec.vocab.diagnosis, wb),
            surgery_method: VocabMatcher::new(&spec.vocab.surgery_method, wb),
            bleeding: VocabMatcher::new(&spec.vocab.bleeding, wb),
            resection_range: VocabMatcher::new(&spec.vocab.resection_range, wb),
            resection_other: VocabMatcher::new(&spec.vocab.resection_other, wb),
            transliteration,
            tagger_rules,
            spec,
        };
        pack.check()?;
        Ok(pack)
    }

    fn check(&self) -> Result<()> {
        const RANGE_KEYS: [&str; 4] = ["TOTAL", "LOBECTOMY_LEFT", "LOBECTOMY_RIGHT", "ISTHMUSECTOMY"];
        for key in self.spec.vocab.resection_range.keys() {
            if !RANGE_KEYS.contains(&key.as_str()) {
                return Err(CoreError::Pack(format!("unknown resection range key {key:?}")));
            }
        }
        if self.age.captures_len() < 2 {
            return Err(CoreError::Pack("age_pattern needs a capture group".into()));
        }
        for tag in Tag::ALL {
            if !self.tagger_rules.iter().any(|r| r.tag == tag) {
                return Err(CoreError::Pack(format!("no tagger rule for {tag}")));
            }
        }
        crate::corpus::check_generator_spec(&self.spec.generator)
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &PackSpec {
        &self.spec
    }

    pub fn word_boundaries(&self) -> bool {
        self.spec.word_boundaries
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.spec.generator
    }

    pub fn is_millimeter(&self, unit: &str) -> bool {
        let u = unit.to_lowercase();
        self.millimeter_units.contains(&u)
    }

    /// Replaces mixed-language renderings with canonical terms, keeping a
    /// character map back to `text`.
    pub fn canonicalize(&self, text: &str) -> Canonicalized {
        let original_len = text.chars().count();
        let Some((regex, reverse)) = &self.transliteration else {
            return Canonicalized {
                text: text.to_string(),
                map: (0..original_len).map(|i| (i, i + 1)).collect(),
                original_len,
            };
        };
        let mut out = String::with_capacity(text.len());
        let mut map = Vec::with_capacity(original_len);
        let mut last_byte = 0;
        let mut char_pos = 0;
        for m in regex.find_iter(text) {
            for c in text[last_byte..m.start()].chars() {
                out.push(c);
                map.push((char_pos, char_pos + 1));
                char_pos += 1;
            }
            let n_orig = m.as_str().chars().count();
            let canon = &reverse[&m.as_str().to_lowercase()];
            for c in canon.chars() {
                out.push(c);
                map.push((char_pos, char_pos + n_orig));
            }
            char_pos += n_orig;
            last_byte = m.end();
        }
        for c in text[last_byte..].chars() {
            out.push(c);
            map.push((char_pos, char_pos + 1));
            char_pos += 1;
        }
        Canonicalized { text: out, map, original_len }
    }

    /// Canonical form of a span surface, for the value parsers.
    pub fn canonical_str(&self, text: &str) -> String {
        match &self.transliteration {
            Some(_) => self.canonicalize(text).text,
            None => text.to_string(),
        }
    }

    pub fn transliterations(&self) -> &BTreeMap<String, Vec<String>> {
        &self.spec.transliterations
    }

    pub fn contains(&self, haystack: &str, needle: &str) -> bool {
        contains_term(&haystack.to_lowercase(), &needle.to_lowercase(), self.spec.word_boundaries)
    }
}

/// Expands `{vocab:NAME}` and `{terms:NAME}` into escaped alternations.
fn expand_placeholders(pattern: &str, spec: &PackSpec) -> Result<String> {
    let mut out = String::with_capacity(pattern.len());
    let mut rest = pattern;
    while let Some(start) = rest.find("{vocab:").or_else(|| rest.find("{terms:")) {
        let open = rest[..start].find("{vocab:").or_else(|| rest[..start].find("{terms:")).unwrap_or(start);
        let (before, tail) = rest.split_at(open);
        out.push_str(before);
        let close = tail.find('}').ok_or_else(|| CoreError::Pack(format!("unclosed placeholder in {pattern:?}")))?;
        let (kind, name) = tail[1..close].split_once(':').expect("prefix checked");
        let terms: Vec<String> = match kind {
            "vocab" => {
                let vocab = match name {
                    "diagnosis" => &spec.vocab.diagnosis,
                    "surgery_method" => &spec.vocab.surgery_method,
                    "bleeding" => &spec.vocab.bleeding,
                    "resection_range" => &spec.vocab.resection_range,
                    "resection_other" => &spec.vocab.resection_other,
                    other => return Err(CoreError::Pack(format!("unknown vocabulary {other:?}"))),
                };
                vocab.values().flatten().cloned().collect()
            }
            _ => match name {
                "negators" => spec.negators.clone(),
                "left" => spec.laterality.left.clone(),
                "right" => spec.laterality.right.clone(),
                "both" => spec.laterality.both.clone(),
                "upper" => spec.gland_position.upper.clone(),
                "lower" => spec.gland_position.lower.clone(),
                "units" => spec.units.centimeter.iter().chain(&spec.units.millimeter).cloned().collect(),
                "female" => spec.demographics.female.clone(),
                "male" => spec.demographics.male.clone(),
                other => return Err(CoreError::Pack(format!("unknown term list {other:?}"))),
            },
        };
        let mut terms = terms;
        terms.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        terms.dedup();
        out.push_str("(?:");
        out.push_str(&terms.iter().map(|t| regex::escape(t)).collect::<Vec<_>>().join("|"));
        out.push(')');
        rest = &tail[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
