#![allow(dead_code)]

use opnote_core::record::{
    DrainStatus, FieldValue, Gland, Location, LymphNodeRemoval, NervePreservation, Note, OperationRecord, Presence,
    PreservationStatus, ResectionRange, Sex, Side, Usage,
};
use opnote_core::Tag;
use proptest::prelude::*;
use proptest::sample::select;

fn fv<T: std::fmt::Debug + Clone + 'static>(s: impl Strategy<Value = T> + 'static) -> BoxedStrategy<FieldValue<T>> {
    prop::option::of(s).prop_map(|o| o.map_or(FieldValue::NotMentioned, FieldValue::Value)).boxed()
}

fn text(options: &'static [&'static str]) -> BoxedStrategy<FieldValue<String>> {
    fv(select(options).prop_map(str::to_string))
}

fn range() -> impl Strategy<Value = ResectionRange> {
    prop_oneof![
        Just(ResectionRange::Total),
        Just(ResectionRange::LobectomyLeft),
        Just(ResectionRange::LobectomyRight),
        Just(ResectionRange::Isthmusectomy),
        select(&["Completion thyroidectomy", "Subtotal thyroidectomy"][..])
            .prop_map(|s| ResectionRange::Other(s.into())),
    ]
}

fn tumors() -> impl Strategy<Value = (FieldValue<Vec<Location>>, FieldValue<Vec<f64>>)> {
    let loc = select(&[Location::Left, Location::Right, Location::Isthmus][..]);
    prop_oneof![
        Just((FieldValue::NotMentioned, FieldValue::NotMentioned)),
        prop::collection::vec((loc.clone(), 1u32..400), 1..3).prop_map(|v| {
            let (l, s): (Vec<_>, Vec<_>) = v.into_iter().map(|(l, t)| (l, t as f64 / 10.0)).unzip();
            (FieldValue::Value(l), FieldValue::Value(s))
        }),
        prop::collection::vec(loc, 1..3).prop_map(|l| (FieldValue::Value(l), FieldValue::NotMentioned)),
        prop::collection::vec(1u32..400, 1..3).prop_map(|s| (
            FieldValue::NotMentioned,
            FieldValue::Value(s.into_iter().map(|t| t as f64 / 10.0).collect())
        )),
    ]
}

fn notes() -> impl Strategy<Value = Vec<Note>> {
    let note = (
        select(&Tag::NOTE_ONLY[..]),
        select(
            &[
                "during left lateral neck dissection, the spinal accessory nerve was preserved",
                "during right lateral neck dissection, the vagus nerve was preserved",
                "during bilateral lateral neck dissection, the spinal accessory nerve was preserved",
                "frozen section revealed papillary thyroid carcinoma",
                "the specimen was sent for permanent pathology",
                "좌측 측경부 곽청술 중 척수부신경 보존함",
            ][..],
        ),
    )
        .prop_map(|(t, s)| Note::new(t, s));
    prop::collection::vec(note, 0..3)
}

fn status() -> impl Strategy<Value = PreservationStatus> {
    select(&[PreservationStatus::Preserved, PreservationStatus::NotPreserved, PreservationStatus::NotIdentified][..])
}

/// Schema-valid records covering every field type.
pub fn arb_record() -> impl Strategy<Value = OperationRecord> {
    let a = (
        fv(1u32..=130),
        fv(select(&[Sex::Male, Sex::Female][..])),
        tumors(),
        text(&["Papillary thyroid carcinoma", "Follicular adenoma"]),
        text(&["Open", "Robotic"]),
        fv(range()),
        fv(select(&[LymphNodeRemoval::Performed, LymphNodeRemoval::NotPerformed][..])),
        fv(select(&[Presence::Present, Presence::Absent][..])),
        fv(select(&[Presence::Present, Presence::Absent][..])),
        fv(select(&[Presence::Present, Presence::Absent][..])),
    );
    let b = (
        fv(status()),
        fv(status()),
        fv(status()),
        fv(status()),
        fv(select(&[Usage::Used, Usage::NotUsed][..])),
        fv(select(&[NervePreservation::Preserved, NervePreservation::NotPreserved][..])),
        fv(select(&[NervePreservation::Preserved, NervePreservation::NotPreserved][..])),
        fv(status()),
        fv(status()),
        text(&["No active bleeding", "Minimal oozing"]),
        fv(select(&[DrainStatus::Inserted, DrainStatus::NotInserted][..])),
        notes(),
    );
    (a, b).prop_map(|((age, sex, (loc, size), dx, method, range, lnr, cap, eti, lne), b)| {
        let (ur, lr, ul, ll, nem, rln_r, rln_l, sln_r, sln_l, bleeding, drain, notes) = b;
        let mut r = OperationRecord::empty();
        r.age = age;
        r.sex = sex;
        r.tumor_location = loc;
        r.tumor_size = size;
        r.diagnosis_name = dx;
        r.surgery_method = method;
        r.thyroid_resection_range = range;
        r.lymph_node_removal = lnr;
        r.capsular_invasion = cap;
        r.extrathyroidal_invasion = eti;
        r.lymph_node_enlargement = lne;
        *r.parathyroid_mut(Gland::UpperRight) = ur;
        *r.parathyroid_mut(Gland::LowerRight) = lr;
        *r.parathyroid_mut(Gland::UpperLeft) = ul;
        *r.parathyroid_mut(Gland::LowerLeft) = ll;
        r.neural_monitor_use = nem;
        *r.rln_mut(Side::Right) = rln_r;
        *r.rln_mut(Side::Left) = rln_l;
        *r.sln_mut(Side::Right) = sln_r;
        *r.sln_mut(Side::Left) = sln_l;
        r.bleeding_on_cleanup = bleeding;
        r.drain_insertion = drain;
        r.notes = notes;
        r
    })
}
