//! SVG output: a base layer plus one colored fragment layer per region.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use super::{AnatomyScene, Region, RegionStatus};
use crate::error::{CoreError, Result};

pub const CANVAS_WIDTH: u32 = 800;
pub const CANVAS_HEIGHT: u32 = 600;

const STANDARD_ASSET: &str = include_str!("../../resources/anatomy.svg");
const BASE_ID: &str = "base";

/// Artwork split into the base outline and one fragment per region, kept
/// as raw SVG markup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnatomyAsset {
    base: String,
    fragments: BTreeMap<Region, String>,
}

impl AnatomyAsset {
    pub fn standard() -> Arc<AnatomyAsset> {
        static ASSET: OnceLock<Arc<AnatomyAsset>> = OnceLock::new();
        ASSET
            .get_or_init(|| Arc::new(AnatomyAsset::parse(STANDARD_ASSET).expect("bundled anatomy asset is valid")))
            .clone()
    }

    pub fn load(path: &Path) -> Result<AnatomyAsset> {
        let text = std::fs::read_to_string(path)?;
        AnatomyAsset::parse(&text)
    }

    /// Reads an SVG holding an element with id `base` and one element per
    /// region id. Fragments must leave `fill` unset.
    pub fn parse(svg: &str) -> Result<AnatomyAsset> {
        let doc = roxmltree::Document::parse(svg).map_err(|e| CoreError::Asset(e.to_string()))?;
        let root = doc.root_element();
        if root.tag_name().name() != "svg" {
            return Err(CoreError::Asset("root element is not <svg>".into()));
        }
        let expected_box = format!("0 0 {CANVAS_WIDTH} {CANVAS_HEIGHT}");
        let view_box = root.attribute("viewBox").map(|v| v.split_whitespace().collect::<Vec<_>>().join(" "));
        if view_box.as_deref() != Some(expected_box.as_str()) {
            return Err(CoreError::Asset(format!("viewBox must be {expected_box:?}")));
        }
        let raw = |node: roxmltree::Node| svg[node.range()].to_string();
        let find = |id: &str| root.descendants().find(|n| n.is_element() && n.attribute("id") == Some(id));

        let base_node = find(BASE_ID).ok_or_else(|| CoreError::Asset("missing base element".into()))?;
        let base = base_node.children().filter(|n| n.is_element()).map(raw).collect::<Vec<_>>().join("\n");

        let mut fragments = BTreeMap::new();
        for region in Region::ALL {
            let node = find(region.id()).ok_or_else(|| CoreError::Asset(format!("missing fragment {region}")))?;
            if node.descendants().any(|n| n.is_element() && (n.attribute("fill").is_some() || has_fill_style(n))) {
                return Err(CoreError::Asset(format!("fragment {region} sets its own fill")));
            }
            fragments.insert(region, raw(node));
        }
        Ok(AnatomyAsset { base, fragments })
    }
}

fn has_fill_style(node: roxmltree::Node) -> bool {
    node.attribute("style").is_some_and(|s| s.split(';').any(|d| d.trim_start().starts_with("fill")))
}

pub fn render_svg(scene: &AnatomyScene) -> String {
    render_svg_with(scene, &AnatomyAsset::standard())
}

pub fn render_svg_with(scene: &AnatomyScene, asset: &AnatomyAsset) -> String {
    let mut out = String::with_capacity(8 * 1024);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{CANVAS_WIDTH}\" height=\"{CANVAS_HEIGHT}\" viewBox=\"0 0 {CANVAS_WIDTH} {CANVAS_HEIGHT}\">"
    );
    out.push_str("<g id=\"layer-base\" class=\"layer base\">\n");
    out.push_str(&asset.base);
    out.push_str("\n</g>\n");
    for region in Region::ALL {
        let status = scene.status(region);
        let _ = writeln!(
            out,
            "<g id=\"layer-{id}\" class=\"layer fragment\" data-region=\"{id}\" data-status=\"{code}\" fill=\"{color}\">",
            id = region.id(),
            code = status.code(),
            color = status.color()
        );
        out.push_str(&asset.fragments[&region]);
        out.push_str("\n</g>\n");
    }
    legend(&mut out);
    out.push_str("</svg>\n");
    out
}

fn legend(out: &mut String) {
    let entries = [
        RegionStatus::Resected,
        RegionStatus::Preserved,
        RegionStatus::NotMentioned,
        RegionStatus::Present,
        RegionStatus::Absent,
    ];
    let labels = ["Resected", "Preserved", "Not mentioned", "Drain inserted", "Drain not inserted"];
    out.push_str("<g id=\"legend\" font-family=\"sans-serif\" font-size=\"13\">\n");
    for (i, (status, label)) in entries.iter().zip(labels).enumerate() {
        let y = 24 + i as u32 * 22;
        let _ = writeln!(
            out,
            "<rect x=\"600\" y=\"{}\" width=\"14\" height=\"14\" fill=\"{}\" stroke=\"#7F8C8D\"/><text x=\"622\" y=\"{}\" fill=\"#2C3E50\">{}</text>",
            y - 11,
            status.color(),
            y,
            label
        );
    }
    out.push_str("</g>\n");
}
