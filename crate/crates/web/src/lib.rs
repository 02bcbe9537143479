//! Browser bindings: Gale dual with chambers, the r = 3 section drawing, border classification.

use galefan::analysis::{analyze, parse_matrix_str, render_section_svg, AnalysisReport, AnalyzeOptions, MatrixKind};
use galefan::collections::BorderKind;
use galefan::exactla::IntMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn run(text: &str, kind: &str) -> Result<AnalysisReport, String> {
    let parsed = parse_matrix_str(text).map_err(|e| e.to_string())?;
    let kind = match kind {
        "" | "auto" => parsed.kind,
        k => Some(k.parse::<MatrixKind>().map_err(|e| e.to_string())?),
    };
    let opts = AnalyzeOptions { kind, ..Default::default() };
    analyze(&parsed, &opts).map_err(|e| format!("{}: {}", e.stage, e.error))
}

fn rows(m: &IntMatrix) -> Vec<Vec<String>> {
    m.row_vecs().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()
}

fn one_based(cones: &[Vec<usize>]) -> Vec<String> {
    cones.iter().map(|c| c.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")).collect()
}

#[derive(Serialize)]
struct ChamberView {
    label: String,
    rays: Vec<Vec<String>>,
    maximal_cones: Vec<String>,
    q_fano: bool,
}

#[derive(Serialize)]
struct DualView {
    n: usize,
    r: usize,
    fan_matrix: Vec<Vec<String>>,
    weight_matrix: Vec<Vec<String>>,
    is_cf: bool,
    chambers_in_mov: usize,
    chambers_outside_mov: usize,
    chambers: Vec<ChamberView>,
}

#[derive(Serialize)]
struct BorderView {
    label: String,
    kind: BorderKind,
    hyperplanes: Vec<Vec<String>>,
    nef_collections: Vec<String>,
}

pub fn gale_dual_json(text: &str, kind: &str) -> Result<String, String> {
    let rep = run(text, kind)?;
    let chambers = rep
        .chambers
        .iter()
        .map(|c| ChamberView {
            label: c.label.clone(),
            rays: c.cone.rays().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect(),
            maximal_cones: one_based(&c.fan.maximal_cones),
            q_fano: c.q_fano,
        })
        .collect();
    let view = DualView {
        n: rep.flags.n,
        r: rep.flags.r,
        fan_matrix: rows(&rep.gale_dual.v),
        weight_matrix: rows(&rep.gale_dual.q),
        is_cf: rep.flags.fan.is_cf,
        chambers_in_mov: rep.mov.chambers_in_mov,
        chambers_outside_mov: rep.mov.chambers_outside_mov,
        chambers,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

pub fn section_svg_string(text: &str, kind: &str) -> Result<String, String> {
    let rep = run(text, kind)?;
    render_section_svg(&rep).map_err(|e| e.to_string())
}

pub fn borders_json(text: &str, kind: &str) -> Result<String, String> {
    let rep = run(text, kind)?;
    let views: Vec<BorderView> = rep
        .chambers
        .iter()
        .map(|c| BorderView {
            label: c.label.clone(),
            kind: c.border.kind,
            hyperplanes: c.border.hyperplanes.iter().map(|h| h.iter().map(|x| x.to_string()).collect()).collect(),
            nef_collections: c
                .primitive_collections
                .iter()
                .filter(|p| p.is_nef)
                .map(|p| one_based(std::slice::from_ref(&p.p)).remove(0))
                .collect(),
        })
        .collect();
    serde_json::to_string(&views).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = galeDual)]
pub fn gale_dual(text: &str, kind: &str) -> Result<String, JsValue> {
    gale_dual_json(text, kind).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sectionSvg)]
pub fn section_svg(text: &str, kind: &str) -> Result<String, JsValue> {
    section_svg_string(text, kind).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = borders)]
pub fn borders(text: &str, kind: &str) -> Result<String, JsValue> {
    borders_json(text, kind).map_err(|e| JsValue::from_str(&e))
}
