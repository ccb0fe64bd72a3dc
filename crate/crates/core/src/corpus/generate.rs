//! Template-driven narrative generator.
//!
//! Facts are sampled first; the gold record is built from the facts and the
//! text from the language pack's phrases, so spans and record line up by
//! construction.

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::RegexBuilder;

use super::markup::parse_markup;
use super::GeneratorProfile;
use crate::error::{CoreError, Result};
use crate::gold::GoldDocument;
use crate::pack::{GeneratorSpec, LanguagePack};
use crate::record::{
    DrainStatus, Field, FieldValue, Gland, Location, LymphNodeRemoval, NervePreservation, Note, OperationRecord,
    Presence, PreservationStatus, ResectionRange, Sex, Side, Usage,
};
use crate::tags::Tag;
use crate::transcript::{LanguageMode, Transcript, TranscriptId};

const REQUIRED_PHRASES: &[&str] = &[
    "subject_age_sex",
    "subject_age",
    "subject_sex",
    "subject_none",
    "intro",
    "procedure_none",
    "procedure_join",
    "range",
    "range_swapped",
    "lnr_performed",
    "lnr_negated",
    "method",
    "dx",
    "sex_female",
    "sex_male",
    "tumor_pre",
    "tumor_post",
    "tmr_full",
    "tmr_size",
    "tmr_location",
    "atm_full",
    "atm_size",
    "atm_location",
    "size_cm",
    "size_mm",
    "location_left",
    "location_right",
    "location_isthmus",
    "fzs",
    "eti_capsular_present",
    "eti_capsular_absent",
    "eti_extrathyroidal_present",
    "eti_extrathyroidal_absent",
    "eti_both_absent",
    "lne_present",
    "lne_absent",
    "lne_lost",
    "lnt",
    "nem_used",
    "nem_not_used",
    "side_left",
    "side_right",
    "side_both",
    "position_upper",
    "position_lower",
    "rln_single",
    "rln_both",
    "rln_preserved",
    "rln_not_preserved",
    "sln_single",
    "sln_both",
    "sln_preserved",
    "sln_not_preserved",
    "sln_not_identified",
    "prt_single",
    "prt_pair",
    "prt_all",
    "prt_preserved",
    "prt_not_preserved",
    "prt_not_identified",
    "rns",
    "etc",
    "dnt_inserted",
    "dnt_not_inserted",
    "sentence",
];

const RANGE_KEYS: [&str; 4] = ["TOTAL", "LOBECTOMY_LEFT", "LOBECTOMY_RIGHT", "ISTHMUSECTOMY"];
const MIN_SENTENCES: usize = 6;
const MAX_SENTENCES: usize = 8;
const ATM_PROBABILITY: f64 = 0.3;

/// Checks that a pack's generator section has every phrase the generator uses.
pub fn check_generator_spec(spec: &GeneratorSpec) -> Result<()> {
    for key in REQUIRED_PHRASES {
        match spec.phrases.get(*key) {
            None => return Err(CoreError::Pack(format!("generator phrase {key:?} missing"))),
            Some(v) if v.as_slice().is_empty() => {
                return Err(CoreError::Pack(format!("generator phrase {key:?} has no variants")))
            }
            Some(_) => {}
        }
    }
    for key in RANGE_KEYS {
        if !spec.surfaces.resection_range.contains_key(key) {
            return Err(CoreError::Pack(format!("generator has no surface for range {key}")));
        }
    }
    let s = &spec.surfaces;
    for (name, vocab) in [
        ("diagnosis", &s.diagnosis),
        ("surgery_method", &s.surgery_method),
        ("bleeding", &s.bleeding),
        ("resection_other", &s.resection_other),
    ] {
        if vocab.is_empty() || vocab.values().any(|v| v.is_empty()) {
            return Err(CoreError::Pack(format!("generator surfaces for {name} are empty")));
        }
    }
    if spec.fillers.len() < MIN_SENTENCES {
        return Err(CoreError::Pack(format!("need at least {MIN_SENTENCES} filler sentences")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Tumor {
    location: Location,
    tenths: u32,
}

impl Tumor {
    fn cm(self) -> f64 {
        f64::from(self.tenths) / 10.0
    }
}

#[derive(Debug, Default)]
struct Facts {
    age: Option<u32>,
    sex: Option<Sex>,
    tumors: Vec<Tumor>,
    tumor_location: bool,
    tumor_size: bool,
    post_op: Option<Vec<Tumor>>,
    diagnosis: Option<String>,
    method: Option<String>,
    range: Option<ResectionRange>,
    swapped: bool,
    lnr: Option<LymphNodeRemoval>,
    lnr_negated: bool,
    capsular: Option<Presence>,
    extrathyroidal: Option<Presence>,
    enlargement: Option<Presence>,
    enlargement_lost: bool,
    glands: [Option<PreservationStatus>; 4],
    monitor: Option<Usage>,
    rln: [Option<NervePreservation>; 2],
    sln: [Option<PreservationStatus>; 2],
    bleeding: Option<String>,
    drain: Option<DrainStatus>,
    frozen: bool,
    transfer: bool,
    lateral: Option<Vec<Side>>,
    other_notes: usize,
}

const SIDES: [Side; 2] = [Side::Right, Side::Left];

fn side_index(side: Side) -> usize {
    match side {
        Side::Right => 0,
        Side::Left => 1,
    }
}

fn gland_index(g: Gland) -> usize {
    Gland::ALL.iter().position(|x| *x == g).expect("gland in ALL")
}

struct Writer<'a> {
    spec: &'a GeneratorSpec,
    rng: &'a mut ChaCha8Rng,
}

impl Writer<'_> {
    fn pick(&mut self, key: &str) -> String {
        let variants = self.spec.phrases[key].as_slice();
        variants.choose(self.rng).expect("checked non-empty").clone()
    }

    fn phrase(&mut self, key: &str, vars: &[(&str, &str)]) -> String {
        let template = self.pick(key);
        fill(&template, vars)
    }

    fn list(&self, items: &[String]) -> String {
        match items {
            [] => String::new(),
            [one] => one.clone(),
            [init @ .., last] => format!("{}{}{}", init.join(&self.spec.list_sep), self.spec.list_last, last),
        }
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

fn pick_key(rng: &mut ChaCha8Rng, vocab: &crate::pack::Vocabulary) -> String {
    let keys: Vec<&String> = vocab.keys().collect();
    (*keys.choose(rng).expect("checked non-empty")).clone()
}

fn indefinite_article(age: u32) -> &'static str {
    if age == 8 || age == 11 || age == 18 || (80..90).contains(&age) {
        "An"
    } else {
        "A"
    }
}

fn capitalize(sentence: &str) -> String {
    let (prefix, body) = match sentence.strip_prefix("[[") {
        Some(rest) if rest.len() > 4 && rest.as_bytes()[3] == b':' => sentence.split_at(6),
        _ => ("", sentence),
    };
    let mut chars = body.chars();
    match chars.next() {
        Some(c) => format!("{prefix}{}{}", c.to_uppercase(), chars.as_str()),
        None => sentence.to_string(),
    }
}

fn sample_facts(profile: &GeneratorProfile, spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Facts {
    let mut f = Facts::default();
    let cov = |rng: &mut ChaCha8Rng, field: Field| chance(rng, profile.coverage(field));

    if cov(rng, Field::Age) {
        f.age = Some(rng.random_range(18..=85));
    }
    if cov(rng, Field::Sex) {
        f.sex = Some(if rng.random_bool(0.7) { Sex::Female } else { Sex::Male });
    }
    f.tumor_location = cov(rng, Field::TumorLocation);
    f.tumor_size = cov(rng, Field::TumorSize);
    if f.tumor_location || f.tumor_size {
        let n = if rng.random_bool(0.7) { 1 } else { 2 };
        let mut locations = vec![Location::Left, Location::Right, Location::Isthmus];
        locations.shuffle(rng);
        locations.truncate(n);
        locations.sort_by_key(|l| Location::ALL.iter().position(|x| x == l));
        f.tumors = locations.into_iter().map(|location| Tumor { location, tenths: rng.random_range(3..=40) }).collect();
        if rng.random_bool(ATM_PROBABILITY) {
            f.post_op = Some(
                f.tumors
                    .iter()
                    .map(|t| Tumor {
                        location: t.location,
                        tenths: (t.tenths as i64 + rng.random_range(-3..=3)).max(2) as u32,
                    })
                    .collect(),
            );
        }
    }
    if cov(rng, Field::DiagnosisName) {
        f.diagnosis = Some(pick_key(rng, &spec.surfaces.diagnosis));
    }
    if cov(rng, Field::SurgeryMethod) {
        f.method = Some(pick_key(rng, &spec.surfaces.surgery_method));
    }
    if cov(rng, Field::ThyroidResectionRange) {
        let roll: f64 = rng.random();
        f.range = Some(if roll < 0.5 {
            ResectionRange::Total
        } else if roll < 0.7 {
            ResectionRange::LobectomyLeft
        } else if roll < 0.9 {
            ResectionRange::LobectomyRight
        } else if roll < 0.95 {
            ResectionRange::Isthmusectomy
        } else {
            ResectionRange::Other(pick_key(rng, &spec.surfaces.resection_other))
        });
    }
    if chance(rng, profile.noise.synonym_swap) && f.method.is_some() && f.range.is_some() {
        f.swapped = true;
        f.method = Some("Open".into());
        f.range = Some(ResectionRange::Total);
    }
    if cov(rng, Field::LymphNodeRemoval) {
        f.lnr = Some(LymphNodeRemoval::Performed);
    }
    if chance(rng, profile.noise.negated_dissection) {
        f.lnr = Some(LymphNodeRemoval::NotPerformed);
        f.lnr_negated = true;
    }
    let presence = |rng: &mut ChaCha8Rng| if rng.random_bool(0.3) { Presence::Present } else { Presence::Absent };
    if cov(rng, Field::CapsularInvasion) {
        f.capsular = Some(presence(rng));
    }
    if cov(rng, Field::ExtrathyroidalInvasion) {
        f.extrathyroidal = Some(presence(rng));
    }
    if cov(rng, Field::LymphNodeEnlargement) {
        f.enlargement = Some(presence(rng));
    }
    if chance(rng, profile.noise.descriptor_grouping_loss) {
        f.enlargement = None;
        f.enlargement_lost = true;
    }
    let status = |rng: &mut ChaCha8Rng| {
        let roll: f64 = rng.random();
        if roll < 0.8 {
            PreservationStatus::Preserved
        } else if roll < 0.9 {
            PreservationStatus::NotPreserved
        } else {
            PreservationStatus::NotIdentified
        }
    };
    for g in Gland::ALL {
        if cov(rng, Field::parathyroid(g)) {
            f.glands[gland_index(g)] = Some(status(rng));
        }
    }
    if cov(rng, Field::NeuralMonitorUse) {
        f.monitor = Some(if rng.random_bool(0.8) { Usage::Used } else { Usage::NotUsed });
    }
    for side in SIDES {
        if cov(rng, Field::rln(side)) {
            f.rln[side_index(side)] =
                Some(if rng.random_bool(0.9) { NervePreservation::Preserved } else { NervePreservation::NotPreserved });
        }
        if cov(rng, Field::sln(side)) {
            f.sln[side_index(side)] = Some(status(rng));
        }
    }
    if cov(rng, Field::BleedingOnCleanup) {
        f.bleeding = Some(pick_key(rng, &spec.surfaces.bleeding));
    }
    if cov(rng, Field::DrainInsertion) {
        f.drain = Some(if rng.random_bool(0.75) { DrainStatus::Inserted } else { DrainStatus::NotInserted });
    }
    f.frozen = chance(rng, profile.note_coverage);
    f.transfer = chance(rng, profile.note_coverage);
    if chance(rng, profile.note_coverage) {
        f.lateral = Some(match rng.random_range(0..3) {
            0 => vec![Side::Left],
            1 => vec![Side::Right],
            _ => vec![Side::Right, Side::Left],
        });
    }
    if chance(rng, profile.note_coverage) {
        f.other_notes = rng.random_range(1..=2);
    }
    f
}

fn gold_record(f: &Facts) -> OperationRecord {
    let mut r = OperationRecord::empty();
    r.age = f.age.into();
    r.sex = f.sex.into();
    let tumors = f.post_op.as_ref().unwrap_or(&f.tumors);
    if f.tumor_location && !tumors.is_empty() {
        r.tumor_location = FieldValue::Value(tumors.iter().map(|t| t.location).collect());
    }
    if f.tumor_size && !tumors.is_empty() {
        r.tumor_size = FieldValue::Value(tumors.iter().map(|t| t.cm()).collect());
    }
    r.diagnosis_name = f.diagnosis.clone().into();
    r.surgery_method = f.method.clone().into();
    r.thyroid_resection_range = f.range.clone().into();
    r.lymph_node_removal = f.lnr.into();
    r.capsular_invasion = f.capsular.into();
    r.extrathyroidal_invasion = f.extrathyroidal.into();
    r.lymph_node_enlargement = f.enlargement.into();
    for g in Gland::ALL {
        *r.parathyroid_mut(g) = f.glands[gland_index(g)].into();
    }
    r.neural_monitor_use = f.monitor.into();
    for side in SIDES {
        *r.rln_mut(side) = f.rln[side_index(side)].into();
        *r.sln_mut(side) = f.sln[side_index(side)].into();
    }
    r.bleeding_on_cleanup = f.bleeding.clone().into();
    r.drain_insertion = f.drain.into();
    r
}

fn range_surface(w: &mut Writer<'_>, range: &ResectionRange) -> String {
    let s = &w.spec.surfaces;
    let variants = match range {
        ResectionRange::Total => &s.resection_range["TOTAL"],
        ResectionRange::LobectomyLeft => &s.resection_range["LOBECTOMY_LEFT"],
        ResectionRange::LobectomyRight => &s.resection_range["LOBECTOMY_RIGHT"],
        ResectionRange::Isthmusectomy => &s.resection_range["ISTHMUSECTOMY"],
        ResectionRange::Other(name) => &s.resection_other[name],
    };
    variants.choose(w.rng).expect("checked non-empty").clone()
}

fn surface_for(w: &mut Writer<'_>, vocab: fn(&GeneratorSpec) -> &crate::pack::Vocabulary, key: &str) -> String {
    vocab(w.spec)[key].choose(w.rng).expect("checked non-empty").clone()
}

fn location_word(w: &mut Writer<'_>, l: Location) -> String {
    w.pick(match l {
        Location::Left => "location_left",
        Location::Right => "location_right",
        Location::Isthmus => "location_isthmus",
    })
}

fn side_word(w: &mut Writer<'_>, sides: &[Side]) -> String {
    match sides {
        [Side::Left] => w.pick("side_left"),
        [Side::Right] => w.pick("side_right"),
        _ => w.pick("side_both"),
    }
}

fn tumor_items(w: &mut Writer<'_>, f: &Facts, tumors: &[Tumor], prefix: &str) -> Vec<String> {
    tumors
        .iter()
        .map(|t| {
            let size = if w.rng.random_bool(0.7) {
                let v = format!("{}.{}", t.tenths / 10, t.tenths % 10);
                w.phrase("size_cm", &[("value", &v)])
            } else {
                w.phrase("size_mm", &[("value", &t.tenths.to_string())])
            };
            let location = location_word(w, t.location);
            let key = match (f.tumor_location, f.tumor_size) {
                (true, true) => "full",
                (false, true) => "size",
                _ => "location",
            };
            w.phrase(&format!("{prefix}_{key}"), &[("size", &size), ("location", &location)])
        })
        .collect()
}

fn nerve_clauses<S: Copy + PartialEq>(
    w: &mut Writer<'_>,
    values: [Option<S>; 2],
    prefix: &str,
    status_key: impl Fn(S) -> &'static str,
) -> Vec<String> {
    match values {
        [Some(a), Some(b)] if a == b && w.rng.random_bool(0.6) => {
            let status = w.pick(&format!("{prefix}_{}", status_key(a)));
            vec![w.phrase(&format!("{prefix}_both"), &[("status", &status)])]
        }
        _ => SIDES
            .iter()
            .filter_map(|&side| values[side_index(side)].map(|v| (side, v)))
            .map(|(side, v)| {
                let status = w.pick(&format!("{prefix}_{}", status_key(v)));
                let side = side_word(w, &[side]);
                w.phrase(&format!("{prefix}_single"), &[("side", &side), ("status", &status)])
            })
            .collect(),
    }
}

fn preservation_key(s: PreservationStatus) -> &'static str {
    match s {
        PreservationStatus::Preserved => "preserved",
        PreservationStatus::NotPreserved => "not_preserved",
        PreservationStatus::NotIdentified => "not_identified",
    }
}

fn parathyroid_clauses(w: &mut Writer<'_>, glands: [Option<PreservationStatus>; 4]) -> Vec<String> {
    let mut out = Vec::new();
    let status = |w: &mut Writer<'_>, s: PreservationStatus| w.pick(&format!("prt_{}", preservation_key(s)));
    if let [Some(a), Some(b), Some(c), Some(d)] = glands {
        if a == b && b == c && c == d {
            let st = status(w, a);
            return vec![w.phrase("prt_all", &[("status", &st)])];
        }
    }
    let mut done = [false; 4];
    for upper in [true, false] {
        let (r, l) = (gland_index(Gland::new(upper, Side::Right)), gland_index(Gland::new(upper, Side::Left)));
        if let (Some(a), Some(b)) = (glands[r], glands[l]) {
            if a == b && w.rng.random_bool(0.6) {
                let st = status(w, a);
                let pos = w.pick(if upper { "position_upper" } else { "position_lower" });
                out.push(w.phrase("prt_pair", &[("position", &pos), ("status", &st)]));
                done[r] = true;
                done[l] = true;
            }
        }
    }
    for g in Gland::ALL {
        let i = gland_index(g);
        if let (Some(s), false) = (glands[i], done[i]) {
            let st = status(w, s);
            let pos = w.pick(if g.is_upper() { "position_upper" } else { "position_lower" });
            let side = side_word(w, &[g.side()]);
            out.push(w.phrase("prt_single", &[("position", &pos), ("side", &side), ("status", &st)]));
        }
    }
    out
}

fn write_document(f: &Facts, w: &mut Writer<'_>) -> Vec<String> {
    let mut groups: Vec<String> = Vec::new();

    let age = f.age.map(|a| a.to_string()).unwrap_or_default();
    let sex = match f.sex {
        Some(Sex::Female) => w.pick("sex_female"),
        Some(Sex::Male) => w.pick("sex_male"),
        None => String::new(),
    };
    let article = f.age.map_or("A", indefinite_article);
    let subject = match (f.age, f.sex) {
        (Some(_), Some(_)) => w.phrase("subject_age_sex", &[("a", article), ("age", &age), ("sex", &sex)]),
        (Some(_), None) => w.phrase("subject_age", &[("a", article), ("age", &age)]),
        (None, Some(_)) => w.phrase("subject_sex", &[("sex", &sex)]),
        (None, None) => w.pick("subject_none"),
    };
    let mut procedure = Vec::new();
    if f.swapped {
        procedure.push(w.pick("range_swapped"));
    } else if let Some(range) = &f.range {
        let surface = range_surface(w, range);
        procedure.push(w.phrase("range", &[("range", &surface)]));
    }
    if f.lnr == Some(LymphNodeRemoval::Performed) && !f.lnr_negated {
        procedure.push(w.pick("lnr_performed"));
    }
    let procedure = if procedure.is_empty() {
        w.pick("procedure_none")
    } else {
        let join = w.pick("procedure_join");
        procedure.join(&join)
    };
    let method = match (&f.method, f.swapped) {
        (Some(m), false) => {
            let surface = surface_for(w, |s| &s.surfaces.surgery_method, m);
            w.phrase("method", &[("method", &surface)])
        }
        _ => String::new(),
    };
    let dx = match &f.diagnosis {
        Some(d) => {
            let surface = surface_for(w, |s| &s.surfaces.diagnosis, d);
            w.phrase("dx", &[("dx", &surface)])
        }
        None => String::new(),
    };
    groups
        .push(w.phrase("intro", &[("subject", &subject), ("procedure", &procedure), ("method", &method), ("dx", &dx)]));

    if !f.tumors.is_empty() {
        let items = tumor_items(w, f, &f.tumors, "tmr");
        let items = w.list(&items);
        groups.push(w.phrase("tumor_pre", &[("items", &items)]));
    }
    if let Some(post) = &f.post_op {
        let items = tumor_items(w, f, post, "atm");
        let items = w.list(&items);
        groups.push(w.phrase("tumor_post", &[("items", &items)]));
    }

    let mut clause_groups: Vec<Vec<String>> = Vec::new();

    let mut findings = Vec::new();
    if f.frozen {
        let key = pick_key(w.rng, &w.spec.surfaces.diagnosis);
        let dx = f.diagnosis.clone().unwrap_or(key);
        let surface = surface_for(w, |s| &s.surfaces.diagnosis, &dx);
        findings.push(w.phrase("fzs", &[("dx", &surface)]));
    }
    match (f.capsular, f.extrathyroidal) {
        (Some(Presence::Absent), Some(Presence::Absent)) if w.rng.random_bool(0.5) => {
            findings.push(w.pick("eti_both_absent"));
        }
        (c, e) => {
            for (value, name) in [(c, "capsular"), (e, "extrathyroidal")] {
                match value {
                    Some(Presence::Present) => findings.push(w.pick(&format!("eti_{name}_present"))),
                    Some(Presence::Absent) => findings.push(w.pick(&format!("eti_{name}_absent"))),
                    None => {}
                }
            }
        }
    }
    match (f.enlargement, f.enlargement_lost) {
        (_, true) => findings.push(w.pick("lne_lost")),
        (Some(Presence::Present), _) => findings.push(w.pick("lne_present")),
        (Some(Presence::Absent), _) => findings.push(w.pick("lne_absent")),
        (None, _) => {}
    }
    if f.transfer {
        findings.push(w.pick("lnt"));
    }
    if f.lnr_negated {
        findings.push(w.pick("lnr_negated"));
    }
    clause_groups.push(findings);

    let mut nerves = Vec::new();
    match f.monitor {
        Some(Usage::Used) => nerves.push(w.pick("nem_used")),
        Some(Usage::NotUsed) => nerves.push(w.pick("nem_not_used")),
        None => {}
    }
    nerves.extend(nerve_clauses(w, f.rln, "rln", |s| match s {
        NervePreservation::Preserved => "preserved",
        NervePreservation::NotPreserved => "not_preserved",
    }));
    nerves.extend(nerve_clauses(w, f.sln, "sln", preservation_key));
    clause_groups.push(nerves);

    clause_groups.push(parathyroid_clauses(w, f.glands));

    if let Some(sides) = &f.lateral {
        let side = side_word(w, sides);
        clause_groups.push(vec![w.phrase("rns", &[("side", &side)])]);
    }

    let mut closing = Vec::new();
    if let Some(b) = &f.bleeding {
        closing.push(surface_for(w, |s| &s.surfaces.bleeding, b));
    }
    if f.other_notes > 0 {
        let mut etc: Vec<String> = w.spec.phrases["etc"].as_slice().to_vec();
        etc.shuffle(w.rng);
        closing.extend(etc.into_iter().take(f.other_notes));
    }
    match f.drain {
        Some(DrainStatus::Inserted) => closing.push(w.pick("dnt_inserted")),
        Some(DrainStatus::NotInserted) => closing.push(w.pick("dnt_not_inserted")),
        None => {}
    }
    clause_groups.push(closing);

    for clauses in clause_groups.into_iter().filter(|c| !c.is_empty()) {
        let joined = w.list(&clauses);
        groups.push(w.phrase("sentence", &[("clauses", &joined)]));
    }

    let target = w.rng.random_range(MIN_SENTENCES..=MAX_SENTENCES).max(groups.len());
    let mut fillers = w.spec.fillers.clone();
    fillers.shuffle(w.rng);
    for filler in fillers.into_iter().take(target - groups.len()) {
        let at = w.rng.random_range(1..=groups.len());
        groups.insert(at, filler);
    }
    groups.into_iter().map(|s| capitalize(&s)).collect()
}

fn transliterate(marked: &str, pack: &LanguagePack, rng: &mut ChaCha8Rng) -> Result<(String, bool)> {
    let mut out = marked.to_string();
    let mut changed = false;
    for (canon, forms) in pack.transliterations() {
        let Some(form) = forms.first() else { continue };
        let pattern =
            if pack.word_boundaries() { format!(r"\b{}\b", regex::escape(canon)) } else { regex::escape(canon) };
        let re =
            RegexBuilder::new(&pattern).case_insensitive(true).build().map_err(|e| CoreError::Pack(e.to_string()))?;
        if re.is_match(&out) && rng.random_bool(0.6) {
            out = re.replace_all(&out, regex::NoExpand(form)).into_owned();
            changed = true;
        }
    }
    Ok((out, changed))
}

fn timestamp(i: usize) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).single().expect("valid date") + chrono::Duration::minutes(i as i64)
}

/// Generates document `index` of the corpus described by `profile`.
pub fn generate_one(profile: &GeneratorProfile, pack: &LanguagePack, index: usize) -> Result<GoldDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(index as u64);
    let spec = pack.generator();
    let facts = sample_facts(profile, spec, &mut rng);
    let sentences = {
        let mut w = Writer { spec, rng: &mut rng };
        write_document(&facts, &mut w)
    };
    let marked = sentences.join(" ");
    if marked.contains('{') {
        return Err(CoreError::Pack(format!("unfilled placeholder in generated text: {marked}")));
    }
    let (marked, mixed) = if chance(&mut rng, profile.noise.transliteration_mix) {
        transliterate(&marked, pack, &mut rng)?
    } else {
        (marked, false)
    };
    let (text, spans) = parse_markup(&marked)?;
    let mode = if mixed { LanguageMode::Mixed } else { LanguageMode::Monolingual };

    let mut record = gold_record(&facts);
    record.notes = spans
        .iter()
        .filter_map(|s| match s.tag {
            t if t.is_note_only() => Some(Note::new(t, s.surface.clone())),
            Tag::Lne if facts.enlargement_lost => Some(Note::unparsed(Tag::Lne, s.surface.clone())),
            _ => None,
        })
        .collect();

    let source = format!("synthetic:{}:seed={}:doc={}", pack.name(), profile.seed, index);
    let transcript = Transcript::with_id(TranscriptId::for_content(&text, mode), text, mode, source, timestamp(index))?;
    let doc = GoldDocument { transcript, gold_spans: spans, gold_record: record };
    doc.validate()?;
    Ok(doc)
}

/// Generates the whole corpus; output depends only on the profile.
pub fn generate(profile: &GeneratorProfile) -> Result<Vec<GoldDocument>> {
    profile.validate()?;
    let pack = LanguagePack::load(&profile.language_pack)?;
    (0..profile.n_documents).map(|i| generate_one(profile, &pack, i)).collect()
}
