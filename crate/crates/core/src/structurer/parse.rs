//! Value parsers run on entity span surfaces.
//!
//! Every parser takes the surface text (already canonicalized for the
//! language pack) and returns `None` when it finds nothing it can use.

use crate::error::{CoreError, Result};
use crate::pack::{LanguagePack, TermMatcher};
use crate::record::{Gland, Location, NervePreservation, PreservationStatus, ResectionRange, Sex, Side};

fn guard<'a>(surface: &'a str, parser: &'static str) -> Result<&'a str> {
    let s = surface.trim();
    if s.is_empty() {
        return Err(CoreError::EmptySurface(parser));
    }
    Ok(s)
}

/// Age in years and sex from a demographic phrase.
pub fn parse_demographics(surface: &str, pack: &LanguagePack) -> Result<(Option<u32>, Option<Sex>)> {
    let s = guard(surface, "demographics")?;
    let age = pack
        .age
        .captures(s)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse::<u32>().ok())
        .filter(|a| (1..=130).contains(a));
    let female = pack.female.is_match(s);
    let male = pack.male.is_match(s);
    let sex = match (female, male) {
        (true, false) => Some(Sex::Female),
        (false, true) => Some(Sex::Male),
        _ => None,
    };
    Ok((age, sex))
}

/// Every size in the surface, in centimeters, left to right.
pub fn parse_sizes(surface: &str, pack: &LanguagePack) -> Result<Vec<f64>> {
    let s = guard(surface, "size")?;
    Ok(pack
        .size
        .captures_iter(s)
        .filter_map(|c| {
            let value: f64 = c[1].parse().ok()?;
            let cm = if pack.is_millimeter(&c[2]) { value / 10.0 } else { value };
            (cm.is_finite() && cm > 0.0).then_some(cm)
        })
        .collect())
}

/// The first size in the surface, in centimeters.
pub fn parse_size(surface: &str, pack: &LanguagePack) -> Result<Option<f64>> {
    Ok(parse_sizes(surface, pack)?.into_iter().next())
}

/// Locations named in the surface, in the order left, right, isthmus.
pub fn parse_laterality(surface: &str, pack: &LanguagePack) -> Result<Vec<Location>> {
    let s = guard(surface, "laterality")?;
    let both = pack.both_sides.is_match(s);
    let mut out = Vec::new();
    if both || pack.left.is_match(s) {
        out.push(Location::Left);
    }
    if both || pack.right.is_match(s) {
        out.push(Location::Right);
    }
    if pack.isthmus.is_match(s) {
        out.push(Location::Isthmus);
    }
    Ok(out)
}

/// Sides named in the surface.
pub fn parse_sides(surface: &str, pack: &LanguagePack) -> Result<Vec<Side>> {
    Ok(parse_laterality(surface, pack)?
        .into_iter()
        .filter_map(|l| match l {
            Location::Left => Some(Side::Left),
            Location::Right => Some(Side::Right),
            Location::Isthmus => None,
        })
        .collect())
}

/// Whether the surface contains a negator.
pub fn is_negated(surface: &str, pack: &LanguagePack) -> bool {
    pack.negation.is_match(surface)
}

/// Three-way preservation status; a negated "preserved" reads as not preserved.
pub fn parse_status(
    surface: &str,
    vocabulary: &[TermMatcher; 3],
    pack: &LanguagePack,
) -> Result<Option<PreservationStatus>> {
    let s = guard(surface, "status")?;
    let [preserved, not_preserved, not_identified] = vocabulary;
    Ok(if not_identified.is_match(s) {
        Some(PreservationStatus::NotIdentified)
    } else if not_preserved.is_match(s) {
        Some(PreservationStatus::NotPreserved)
    } else if preserved.is_match(s) {
        Some(if is_negated(s, pack) { PreservationStatus::NotPreserved } else { PreservationStatus::Preserved })
    } else {
        None
    })
}

/// Recurrent laryngeal nerve status; "not identified" has no value here.
pub fn parse_nerve(surface: &str, pack: &LanguagePack) -> Result<Option<NervePreservation>> {
    Ok(match parse_status(surface, &pack.nerve_status, pack)? {
        Some(PreservationStatus::Preserved) => Some(NervePreservation::Preserved),
        Some(PreservationStatus::NotPreserved) => Some(NervePreservation::NotPreserved),
        _ => None,
    })
}

/// Parathyroid glands named in the surface.
pub fn parse_glands(surface: &str, pack: &LanguagePack) -> Result<Vec<Gland>> {
    let s = guard(surface, "glands")?;
    if pack.all_glands.is_match(s) {
        return Ok(Gland::ALL.to_vec());
    }
    let mut positions = Vec::new();
    if pack.upper.is_match(s) {
        positions.push(true);
    }
    if pack.lower.is_match(s) {
        positions.push(false);
    }
    let sides = parse_sides(s, pack)?;
    let mut glands: Vec<Gland> =
        positions.iter().flat_map(|&upper| sides.iter().map(move |&side| Gland::new(upper, side))).collect();
    glands.sort_by_key(|g| Gland::ALL.iter().position(|x| x == g));
    Ok(glands)
}

/// Canonical vocabulary value, or the trimmed surface when nothing matches.
pub fn parse_text(surface: &str, vocab: &crate::pack::VocabMatcher) -> Result<String> {
    let s = guard(surface, "text")?;
    Ok(vocab.lookup(s).map(str::to_string).unwrap_or_else(|| s.to_string()))
}

/// Resection range named in the surface, if any.
pub fn parse_range(surface: &str, pack: &LanguagePack) -> Result<Option<ResectionRange>> {
    let s = guard(surface, "range")?;
    if let Some(other) = pack.resection_other.lookup(s) {
        return Ok(Some(ResectionRange::Other(other.to_string())));
    }
    Ok(pack.resection_range.lookup(s).map(|code| match code {
        "TOTAL" => ResectionRange::Total,
        "LOBECTOMY_LEFT" => ResectionRange::LobectomyLeft,
        "LOBECTOMY_RIGHT" => ResectionRange::LobectomyRight,
        _ => ResectionRange::Isthmusectomy,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en() -> std::sync::Arc<LanguagePack> {
        LanguagePack::english()
    }

    #[test]
    fn demographics() {
        let p = en();
        assert_eq!(parse_demographics("50-year-old female", &p).unwrap(), (Some(50), Some(Sex::Female)));
        assert_eq!(parse_demographics("64-year-old male", &p).unwrap(), (Some(64), Some(Sex::Male)));
        assert_eq!(parse_demographics("female", &p).unwrap(), (None, Some(Sex::Female)));
        assert_eq!(parse_demographics("0-year-old", &p).unwrap(), (None, None));
        assert!(parse_demographics("  ", &p).is_err());
    }

    #[test]
    fn sizes_normalize_to_cm() {
        let p = en();
        assert_eq!(parse_size("1.3 cm", &p).unwrap(), Some(1.3));
        assert_eq!(parse_size("11 mm", &p).unwrap(), Some(1.1));
        assert_eq!(parse_size("right lobe 1.3cm", &p).unwrap(), Some(1.3));
        assert_eq!(parse_size("nodule", &p).unwrap(), None);
        assert!(parse_size("", &p).is_err());
    }

    #[test]
    fn laterality() {
        let p = en();
        assert_eq!(parse_laterality("bilateral", &p).unwrap(), vec![Location::Left, Location::Right]);
        assert_eq!(parse_laterality("nodule in the isthmus", &p).unwrap(), vec![Location::Isthmus]);
        assert_eq!(parse_laterality("left lobe", &p).unwrap(), vec![Location::Left]);
        assert!(parse_laterality("bilaterally", &p).unwrap().len() == 2);
    }

    #[test]
    fn statuses() {
        let p = en();
        let v = &p.parathyroid_status;
        assert_eq!(parse_status("was preserved", v, &p).unwrap(), Some(PreservationStatus::Preserved));
        assert_eq!(parse_status("was not preserved", v, &p).unwrap(), Some(PreservationStatus::NotPreserved));
        assert_eq!(parse_status("was not identified", v, &p).unwrap(), Some(PreservationStatus::NotIdentified));
        assert_eq!(parse_status("was identified and preserved", v, &p).unwrap(), Some(PreservationStatus::Preserved));
        assert_eq!(parse_status("could not be preserved", v, &p).unwrap(), Some(PreservationStatus::NotPreserved));
        assert_eq!(parse_status("was seen", v, &p).unwrap(), None);
        assert_eq!(parse_nerve("was sacrificed", &p).unwrap(), Some(NervePreservation::NotPreserved));
    }

    #[test]
    fn glands() {
        let p = en();
        assert_eq!(parse_glands("all four parathyroid glands", &p).unwrap().len(), 4);
        assert_eq!(
            parse_glands("both upper parathyroid glands", &p).unwrap(),
            vec![Gland::UpperRight, Gland::UpperLeft]
        );
        assert_eq!(parse_glands("inferior left parathyroid gland", &p).unwrap(), vec![Gland::LowerLeft]);
        assert!(parse_glands("a parathyroid gland", &p).unwrap().is_empty());
        assert!(parse_glands("upper parathyroid gland", &p).unwrap().is_empty());
    }

    #[test]
    fn ranges() {
        let p = en();
        assert_eq!(parse_range("total thyroidectomy", &p).unwrap(), Some(ResectionRange::Total));
        assert_eq!(parse_range("open total thyroidectomy", &p).unwrap(), Some(ResectionRange::Total));
        assert_eq!(
            parse_range("near-total thyroidectomy", &p).unwrap(),
            Some(ResectionRange::Other("Near-total thyroidectomy".into()))
        );
        assert_eq!(parse_range("skin incision", &p).unwrap(), None);
    }
}
