//! The entity tag inventory used by every tagger and by the span evaluator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

/// One of the eighteen entity tags, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    Pat,
    Tmr,
    Atm,
    Dxn,
    Lnt,
    Sgm,
    Lnr,
    Eti,
    Lne,
    Nem,
    Rln,
    Sln,
    Prt,
    Rns,
    Com,
    Dnt,
    Fzs,
    Etc,
}

impl Tag {
    pub const ALL: [Tag; 18] = [
        Tag::Pat,
        Tag::Tmr,
        Tag::Atm,
        Tag::Dxn,
        Tag::Lnt,
        Tag::Sgm,
        Tag::Lnr,
        Tag::Eti,
        Tag::Lne,
        Tag::Nem,
        Tag::Rln,
        Tag::Sln,
        Tag::Prt,
        Tag::Rns,
        Tag::Com,
        Tag::Dnt,
        Tag::Fzs,
        Tag::Etc,
    ];

    /// Tags whose content has no record class and is kept as a note.
    pub const NOTE_ONLY: [Tag; 4] = [Tag::Lnt, Tag::Rns, Tag::Fzs, Tag::Etc];

    pub fn code(self) -> &'static str {
        match self {
            Tag::Pat => "PAT",
            Tag::Tmr => "TMR",
            Tag::Atm => "ATM",
            Tag::Dxn => "DXN",
            Tag::Lnt => "LNT",
            Tag::Sgm => "SGM",
            Tag::Lnr => "LNR",
            Tag::Eti => "ETI",
            Tag::Lne => "LNE",
            Tag::Nem => "NEM",
            Tag::Rln => "RLN",
            Tag::Sln => "SLN",
            Tag::Prt => "PRT",
            Tag::Rns => "RNS",
            Tag::Com => "COM",
            Tag::Dnt => "DNT",
            Tag::Fzs => "FZS",
            Tag::Etc => "ETC",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Tag::Pat => "Patient demographics (age and gender)",
            Tag::Tmr => "Tumor location and size before surgery",
            Tag::Atm => "Tumor location and size after surgery",
            Tag::Dxn => "Diagnosis name",
            Tag::Lnt => "Lymph node transfer, or not",
            Tag::Sgm => "Surgery method and resection range information",
            Tag::Lnr => "Lymph node removal, or not",
            Tag::Eti => "Invasion information",
            Tag::Lne => "Lymph node enlargement, or not",
            Tag::Nem => "Using the neural monitor, or not",
            Tag::Rln => "Recurrent laryngeal nerve information (preservation, or not and level of difficulty)",
            Tag::Sln => "Superior laryngeal nerve information (visual confirmation and preservation, or not)",
            Tag::Prt => "Parathyroid information (preservation, or not)",
            Tag::Rns => "During resection of lateral cervical lymph node, nerve preservation, or not",
            Tag::Com => "Bleeding and damage information",
            Tag::Dnt => "Drainage tube insertion, or not",
            Tag::Fzs => "During surgery, frozen section biopsy information",
            Tag::Etc => "Other information to record",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_note_only(self) -> bool {
        Self::NOTE_ONLY.contains(&self)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Tag {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CoreError::UnknownTag(s.to_string()))
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The tag inventory as (code, description) entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    entries: Vec<(Tag, &'static str)>,
}

impl TagSet {
    pub fn standard() -> Self {
        Self { entries: Tag::ALL.iter().map(|t| (*t, t.description())).collect() }
    }

    pub fn entries(&self) -> &[(Tag, &'static str)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_code(&self, code: &str) -> bool {
        self.entries.iter().any(|(t, _)| t.code() == code)
    }
}

impl Default for TagSet {
    fn default() -> Self {
        Self::standard()
    }
}
