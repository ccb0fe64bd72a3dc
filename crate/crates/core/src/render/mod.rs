//! Anatomy scenes built from records, and their layered SVG rendering.

mod svg;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::pack::LanguagePack;
use crate::record::{
    DrainStatus, FieldValue, Gland, LymphNodeRemoval, NervePreservation, OperationRecord, PreservationStatus,
    ResectionRange, Side,
};
use crate::structurer::parse::parse_sides;
use crate::tags::Tag;

pub use svg::{render_svg, render_svg_with, AnatomyAsset, CANVAS_HEIGHT, CANVAS_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    ThyroidLobeRight,
    ThyroidLobeLeft,
    Isthmus,
    CentralLnRight,
    CentralLnLeft,
    LateralLnRight,
    LateralLnLeft,
    #[serde(rename = "PARATHYROID_UR")]
    ParathyroidUr,
    #[serde(rename = "PARATHYROID_LR")]
    ParathyroidLr,
    #[serde(rename = "PARATHYROID_UL")]
    ParathyroidUl,
    #[serde(rename = "PARATHYROID_LL")]
    ParathyroidLl,
    RlnRight,
    RlnLeft,
    Drain,
}

impl Region {
    /// Layering order.
    pub const ALL: [Region; 14] = [
        Region::ThyroidLobeRight,
        Region::ThyroidLobeLeft,
        Region::Isthmus,
        Region::CentralLnRight,
        Region::CentralLnLeft,
        Region::LateralLnRight,
        Region::LateralLnLeft,
        Region::ParathyroidUr,
        Region::ParathyroidLr,
        Region::ParathyroidUl,
        Region::ParathyroidLl,
        Region::RlnRight,
        Region::RlnLeft,
        Region::Drain,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Region::ThyroidLobeRight => "THYROID_LOBE_RIGHT",
            Region::ThyroidLobeLeft => "THYROID_LOBE_LEFT",
            Region::Isthmus => "ISTHMUS",
            Region::CentralLnRight => "CENTRAL_LN_RIGHT",
            Region::CentralLnLeft => "CENTRAL_LN_LEFT",
            Region::LateralLnRight => "LATERAL_LN_RIGHT",
            Region::LateralLnLeft => "LATERAL_LN_LEFT",
            Region::ParathyroidUr => "PARATHYROID_UR",
            Region::ParathyroidLr => "PARATHYROID_LR",
            Region::ParathyroidUl => "PARATHYROID_UL",
            Region::ParathyroidLl => "PARATHYROID_LL",
            Region::RlnRight => "RLN_RIGHT",
            Region::RlnLeft => "RLN_LEFT",
            Region::Drain => "DRAIN",
        }
    }

    /// The same region on the other side; midline regions map to themselves.
    pub fn mirrored(self) -> Region {
        match self {
            Region::ThyroidLobeRight => Region::ThyroidLobeLeft,
            Region::ThyroidLobeLeft => Region::ThyroidLobeRight,
            Region::CentralLnRight => Region::CentralLnLeft,
            Region::CentralLnLeft => Region::CentralLnRight,
            Region::LateralLnRight => Region::LateralLnLeft,
            Region::LateralLnLeft => Region::LateralLnRight,
            Region::ParathyroidUr => Region::ParathyroidUl,
            Region::ParathyroidUl => Region::ParathyroidUr,
            Region::ParathyroidLr => Region::ParathyroidLl,
            Region::ParathyroidLl => Region::ParathyroidLr,
            Region::RlnRight => Region::RlnLeft,
            Region::RlnLeft => Region::RlnRight,
            r => r,
        }
    }

    pub fn parathyroid(gland: Gland) -> Region {
        match gland {
            Gland::UpperRight => Region::ParathyroidUr,
            Gland::LowerRight => Region::ParathyroidLr,
            Gland::UpperLeft => Region::ParathyroidUl,
            Gland::LowerLeft => Region::ParathyroidLl,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Region status. `Present` and `Absent` apply to the drain only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionStatus {
    Resected,
    Preserved,
    NotMentioned,
    Present,
    Absent,
}

impl RegionStatus {
    pub fn code(self) -> &'static str {
        match self {
            RegionStatus::Resected => "RESECTED",
            RegionStatus::Preserved => "PRESERVED",
            RegionStatus::NotMentioned => "NOT_MENTIONED",
            RegionStatus::Present => "PRESENT",
            RegionStatus::Absent => "ABSENT",
        }
    }

    pub fn color(self) -> &'static str {
        match self {
            RegionStatus::Resected => "#C0392B",
            RegionStatus::Preserved => "#27AE60",
            RegionStatus::NotMentioned => "#BDC3C7",
            RegionStatus::Present => "#2980B9",
            RegionStatus::Absent => "#ECF0F1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub region: Region,
    pub status: RegionStatus,
}

/// Status for every region, in layering order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnatomyScene {
    pub regions: Vec<RegionEntry>,
}

impl AnatomyScene {
    pub fn uniform(status: RegionStatus) -> Self {
        AnatomyScene { regions: Region::ALL.iter().map(|&region| RegionEntry { region, status }).collect() }
    }

    pub fn status(&self, region: Region) -> RegionStatus {
        self.regions.iter().find(|e| e.region == region).map(|e| e.status).unwrap_or(RegionStatus::NotMentioned)
    }

    fn set(&mut self, region: Region, status: RegionStatus) {
        if let Some(e) = self.regions.iter_mut().find(|e| e.region == region) {
            e.status = status;
        }
    }

    /// True when every region appears once, in inventory order, and only the
    /// drain uses drain statuses.
    pub fn is_valid(&self) -> bool {
        self.regions.len() == Region::ALL.len()
            && self.regions.iter().zip(Region::ALL).all(|(e, r)| {
                e.region == r
                    && (r == Region::Drain || !matches!(e.status, RegionStatus::Present | RegionStatus::Absent))
                    && (r != Region::Drain || !matches!(e.status, RegionStatus::Resected | RegionStatus::Preserved))
            })
    }
}

fn side_regions(side: Side, right: Region, left: Region) -> Region {
    match side {
        Side::Right => right,
        Side::Left => left,
    }
}

/// Builds the scene using the bundled language packs to read lateral
/// dissection notes.
pub fn build_scene(record: &OperationRecord) -> AnatomyScene {
    build_scene_with(record, &[LanguagePack::english(), LanguagePack::korean()])
}

pub fn build_scene_with(record: &OperationRecord, packs: &[Arc<LanguagePack>]) -> AnatomyScene {
    use RegionStatus::*;
    let mut scene = AnatomyScene::uniform(NotMentioned);

    if let FieldValue::Value(range) = &record.thyroid_resection_range {
        let lobes = match range {
            ResectionRange::Total => Some((Resected, Resected, Resected)),
            ResectionRange::LobectomyRight => Some((Resected, Preserved, Preserved)),
            ResectionRange::LobectomyLeft => Some((Preserved, Resected, Preserved)),
            ResectionRange::Isthmusectomy => Some((Preserved, Preserved, Resected)),
            ResectionRange::Other(_) => None,
        };
        if let Some((right, left, isthmus)) = lobes {
            scene.set(Region::ThyroidLobeRight, right);
            scene.set(Region::ThyroidLobeLeft, left);
            scene.set(Region::Isthmus, isthmus);
        }
    }

    if let FieldValue::Value(lnr) = &record.lymph_node_removal {
        let status = match lnr {
            LymphNodeRemoval::Performed => Resected,
            LymphNodeRemoval::NotPerformed => Preserved,
        };
        scene.set(Region::CentralLnRight, status);
        scene.set(Region::CentralLnLeft, status);
    }

    for note in record.notes.iter().filter(|n| n.tag == Tag::Rns) {
        for pack in packs {
            for side in parse_sides(&note.text, pack).unwrap_or_default() {
                scene.set(side_regions(side, Region::LateralLnRight, Region::LateralLnLeft), Resected);
            }
        }
    }

    for gland in Gland::ALL {
        if let FieldValue::Value(status) = record.parathyroid(gland) {
            let s = match status {
                PreservationStatus::Preserved => Preserved,
                PreservationStatus::NotPreserved => Resected,
                PreservationStatus::NotIdentified => NotMentioned,
            };
            scene.set(Region::parathyroid(gland), s);
        }
    }

    for side in [Side::Right, Side::Left] {
        if let FieldValue::Value(n) = record.rln(side) {
            let s = match n {
                NervePreservation::Preserved => Preserved,
                NervePreservation::NotPreserved => Resected,
            };
            scene.set(side_regions(side, Region::RlnRight, Region::RlnLeft), s);
        }
    }

    if let FieldValue::Value(d) = &record.drain_insertion {
        scene.set(
            Region::Drain,
            match d {
                DrainStatus::Inserted => Present,
                DrainStatus::NotInserted => Absent,
            },
        );
    }
    scene
}
