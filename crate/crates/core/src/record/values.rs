//! Value types for record fields and their JSON codec.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

/// Literal used in JSON for a class absent from the narrative.
pub const NOT_MENTIONED: &str = "not mentioned";

/// A record field: either absent from the source or carrying a value.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum FieldValue<T> {
    #[default]
    NotMentioned,
    Value(T),
}

impl<T> FieldValue<T> {
    pub fn is_mentioned(&self) -> bool {
        matches!(self, FieldValue::Value(_))
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            FieldValue::Value(v) => Some(v),
            FieldValue::NotMentioned => None,
        }
    }

    pub fn value_mut(&mut self) -> Option<&mut T> {
        match self {
            FieldValue::Value(v) => Some(v),
            FieldValue::NotMentioned => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> FieldValue<U> {
        match self {
            FieldValue::Value(v) => FieldValue::Value(f(v)),
            FieldValue::NotMentioned => FieldValue::NotMentioned,
        }
    }
}

impl<T> From<Option<T>> for FieldValue<T> {
    fn from(v: Option<T>) -> Self {
        match v {
            Some(v) => FieldValue::Value(v),
            None => FieldValue::NotMentioned,
        }
    }
}

/// Normalizes a label for lenient comparison: lowercase, `_`/`-` as space,
/// collapsed whitespace.
pub(crate) fn normalize_label(s: &str) -> String {
    s.trim().to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn is_not_mentioned(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::String(s) => normalize_label(s) == NOT_MENTIONED,
        _ => false,
    }
}

/// JSON encoding of one field's value type.
pub trait FieldCodec: Sized {
    fn encode(&self) -> Value;
    fn decode(v: &Value) -> Result<Self, String>;
}

impl<T: FieldCodec> FieldValue<T> {
    pub fn to_json(&self) -> Value {
        match self {
            FieldValue::NotMentioned => Value::String(NOT_MENTIONED.into()),
            FieldValue::Value(v) => v.encode(),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        if is_not_mentioned(v) {
            return Ok(FieldValue::NotMentioned);
        }
        T::decode(v).map(FieldValue::Value)
    }
}

impl FieldCodec for u32 {
    fn encode(&self) -> Value {
        Value::from(*self)
    }

    fn decode(v: &Value) -> Result<Self, String> {
        match v {
            Value::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| format!("expected a positive integer, got {n}")),
            Value::String(s) if !s.trim().is_empty() && s.trim().chars().all(|c| c.is_ascii_digit()) => {
                s.trim().parse().map_err(|e| format!("{e}"))
            }
            other => Err(format!("expected a positive integer, got {other}")),
        }
    }
}

impl FieldCodec for f64 {
    fn encode(&self) -> Value {
        Value::from(*self)
    }

    fn decode(v: &Value) -> Result<Self, String> {
        match v {
            Value::Number(n) => n.as_f64().ok_or_else(|| format!("expected a number, got {n}")),
            Value::String(s) => {
                s.trim().trim_end_matches("cm").trim().parse().map_err(|_| format!("expected a number, got {s:?}"))
            }
            other => Err(format!("expected a number, got {other}")),
        }
    }
}

impl FieldCodec for String {
    fn encode(&self) -> Value {
        Value::String(self.clone())
    }

    fn decode(v: &Value) -> Result<Self, String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            other => Err(format!("expected text, got {other}")),
        }
    }
}

impl<T: FieldCodec> FieldCodec for Vec<T> {
    fn encode(&self) -> Value {
        Value::Array(self.iter().map(FieldCodec::encode).collect())
    }

    /// Accepts an array, or a single scalar as a one-element list.
    fn decode(v: &Value) -> Result<Self, String> {
        match v {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, item)| T::decode(item).map_err(|e| format!("item {i}: {e}")))
                .collect(),
            scalar => T::decode(scalar).map(|x| vec![x]),
        }
    }
}

macro_rules! labeled_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident {
            $( $variant:ident => $label:literal $(| $alias:literal)* ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn from_label(s: &str) -> Option<Self> {
                let norm = normalize_label(s);
                $(
                    if norm == normalize_label($label)
                        $(|| norm == normalize_label($alias))*
                        || norm == normalize_label(&split_camel(stringify!($variant)))
                    {
                        return Some($name::$variant);
                    }
                )+
                None
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FieldCodec for $name {
            fn encode(&self) -> Value {
                Value::String(self.label().to_string())
            }

            fn decode(v: &Value) -> Result<Self, String> {
                match v {
                    Value::String(s) => $name::from_label(s).ok_or_else(|| {
                        format!(
                            "{s:?} is not one of {}",
                            [$($label),+].join(", ")
                        )
                    }),
                    other => Err(format!("expected text, got {other}")),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                $name::from_label(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid {}: {s:?}", stringify!($name))))
            }
        }
    };
}

/// `NotPreserved` -> `Not Preserved`, so enum variant names parse as labels.
fn split_camel(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 4);
    for (i, c) in s.chars().enumerate() {
        if i > 0 && c.is_ascii_uppercase() {
            out.push(' ');
        }
        out.push(c);
    }
    out
}

labeled_enum! {
    pub enum Sex {
        Male => "Male" | "M" | "man",
        Female => "Female" | "F" | "woman",
    }
}

labeled_enum! {
    /// Tumor site within the thyroid.
    pub enum Location {
        Left => "Left" | "left lobe",
        Right => "Right" | "right lobe",
        Isthmus => "Isthmus",
    }
}

labeled_enum! {
    pub enum LymphNodeRemoval {
        Performed => "Performed" | "done",
        NotPerformed => "Not performed" | "not done",
    }
}

labeled_enum! {
    pub enum Presence {
        Present => "Present",
        Absent => "Absent",
    }
}

labeled_enum! {
    /// Status of a structure that may also go unseen during surgery.
    pub enum PreservationStatus {
        Preserved => "Preserved",
        NotPreserved => "Not preserved",
        NotIdentified => "Not identified",
    }
}

labeled_enum! {
    pub enum NervePreservation {
        Preserved => "Preserved",
        NotPreserved => "Not preserved",
    }
}

labeled_enum! {
    pub enum Usage {
        Used => "Used",
        NotUsed => "Not used",
    }
}

labeled_enum! {
    pub enum DrainStatus {
        Inserted => "Inserted",
        NotInserted => "Not inserted",
    }
}

labeled_enum! {
    pub enum Side {
        Right => "Right",
        Left => "Left",
    }
}

impl Side {
    pub fn mirrored(self) -> Side {
        match self {
            Side::Right => Side::Left,
            Side::Left => Side::Right,
        }
    }
}

impl Location {
    pub fn mirrored(self) -> Location {
        match self {
            Location::Left => Location::Right,
            Location::Right => Location::Left,
            Location::Isthmus => Location::Isthmus,
        }
    }
}

/// Parathyroid gland by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gland {
    UpperRight,
    LowerRight,
    UpperLeft,
    LowerLeft,
}

impl Gland {
    pub const ALL: [Gland; 4] = [Gland::UpperRight, Gland::LowerRight, Gland::UpperLeft, Gland::LowerLeft];

    pub fn new(upper: bool, side: Side) -> Gland {
        match (upper, side) {
            (true, Side::Right) => Gland::UpperRight,
            (false, Side::Right) => Gland::LowerRight,
            (true, Side::Left) => Gland::UpperLeft,
            (false, Side::Left) => Gland::LowerLeft,
        }
    }

    pub fn side(self) -> Side {
        match self {
            Gland::UpperRight | Gland::LowerRight => Side::Right,
            Gland::UpperLeft | Gland::LowerLeft => Side::Left,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Gland::UpperRight | Gland::UpperLeft)
    }

    pub fn mirrored(self) -> Gland {
        Gland::new(self.is_upper(), self.side().mirrored())
    }
}

/// Extent of thyroid resection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ResectionRange {
    Total,
    LobectomyLeft,
    LobectomyRight,
    Isthmusectomy,
    Other(String),
}

impl ResectionRange {
    pub const KNOWN: [ResectionRange; 4] = [
        ResectionRange::Total,
        ResectionRange::LobectomyLeft,
        ResectionRange::LobectomyRight,
        ResectionRange::Isthmusectomy,
    ];

    pub fn label(&self) -> &str {
        match self {
            ResectionRange::Total => "Total thyroidectomy",
            ResectionRange::LobectomyLeft => "Left lobectomy",
            ResectionRange::LobectomyRight => "Right lobectomy",
            ResectionRange::Isthmusectomy => "Isthmusectomy",
            ResectionRange::Other(text) => text,
        }
    }

    fn aliases(&self) -> &'static [&'static str] {
        match self {
            ResectionRange::Total => &["total", "total thyroidectomy"],
            ResectionRange::LobectomyLeft => &["lobectomy left", "left lobectomy", "left hemithyroidectomy"],
            ResectionRange::LobectomyRight => &["lobectomy right", "right lobectomy", "right hemithyroidectomy"],
            ResectionRange::Isthmusectomy => &["isthmusectomy"],
            ResectionRange::Other(_) => &[],
        }
    }

    /// Parses a label; anything that is not a known range becomes `Other`.
    pub fn from_label(s: &str) -> ResectionRange {
        Self::known_from_label(s).unwrap_or_else(|| ResectionRange::Other(s.trim().to_string()))
    }

    pub fn known_from_label(s: &str) -> Option<ResectionRange> {
        let norm = normalize_label(s);
        Self::KNOWN.into_iter().find(|r| r.aliases().iter().any(|a| normalize_label(a) == norm))
    }

    pub fn mirrored(&self) -> ResectionRange {
        match self {
            ResectionRange::LobectomyLeft => ResectionRange::LobectomyRight,
            ResectionRange::LobectomyRight => ResectionRange::LobectomyLeft,
            other => other.clone(),
        }
    }
}

impl std::fmt::Display for ResectionRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FieldCodec for ResectionRange {
    fn encode(&self) -> Value {
        Value::String(self.label().to_string())
    }

    fn decode(v: &Value) -> Result<Self, String> {
        match v {
            Value::String(s) if !s.trim().is_empty() => Ok(ResectionRange::from_label(s)),
            other => Err(format!("expected a resection range, got {other}")),
        }
    }
}
