//! Matrix file parsing, the full analysis pipeline and the r = 3 section drawing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::bundles::{contractibility, decompose, recursive_decomposition, split_weight_matrix, BundleDecomposition, Contractibility};
use crate::collections::{classify_border, collections_with_relations, BorderClass, BorderKind, PrimitiveCollection};
use crate::cones::{hyperplane_key, Cone};
use crate::matrices::{check_f, check_w, gale_dual, transform_bordering, weight_matrix, FanFlags, WeightFlags};
use crate::quotient::{torsion_matrix_gamma, PinnedTransforms, QuotientReport};
use crate::rank2::{flip_taxonomy, FlipTaxonomy};
use crate::secfan::{
    chamber_of_fan, enumerate_chambers, enumerate_complete_fans, flip_graph, mov_cone, q_fano, singularity_profile,
    Chamber, EnumerationLimits, FlipGraph, SimplicialFan, SingularityProfile,
};
use crate::{Error, Int, IntMatrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Fan,
    Weight,
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<MatrixKind> {
        match s.trim() {
            "fan" => Ok(MatrixKind::Fan),
            "weight" => Ok(MatrixKind::Weight),
            other => Err(Error::Parse(format!("unknown matrix kind '{other}' (expected fan or weight)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMatrix {
    pub matrix: IntMatrix,
    /// Kind declared by a `# kind=…` header, if any.
    pub kind: Option<MatrixKind>,
}

/// Whitespace-separated integer rows; `#` lines are comments, `# kind=fan|weight` tags the matrix.
pub fn parse_matrix_str(text: &str) -> Result<ParsedMatrix> {
    let mut rows: Vec<Vec<Int>> = vec![];
    let mut kind = None;
    let mut width: Option<(usize, usize)> = None;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let t = line.trim();
        if let Some(comment) = t.strip_prefix('#') {
            let c = comment.trim();
            if let Some(v) = c.strip_prefix("kind") {
                if let Some(v) = v.trim_start().strip_prefix('=') {
                    kind = Some(v.parse::<MatrixKind>().map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?);
                }
            }
            continue;
        }
        if t.is_empty() {
            continue;
        }
        let mut row = vec![];
        for tok in t.split_whitespace() {
            let x = tok
                .parse::<Int>()
                .map_err(|_| Error::Parse(format!("line {lineno}: '{tok}' is not an integer")))?;
            row.push(x);
        }
        match width {
            None => width = Some((row.len(), lineno)),
            Some((w, first)) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "line {lineno}: ragged row with {} entries, line {first} has {w}",
                    row.len()
                )));
            }
            _ => {}
        }
        rows.push(row);
    }
    let Some((w, _)) = width else {
        return Err(Error::Parse("empty matrix file".into()));
    };
    Ok(ParsedMatrix { matrix: IntMatrix::from_int_rows_with_cols(&rows, w), kind })
}

pub fn parse_matrix_file(path: &Path) -> Result<ParsedMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix_str(&text)
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Overrides the file header; fan is assumed when neither is given.
    pub kind: Option<MatrixKind>,
    pub enumerate_complete: bool,
    pub limits: EnumerationLimits,
    pub pins: Option<PinnedTransforms>,
    /// Wall-clock stage timings make the report non-reproducible, so they are opt-in.
    pub record_timings: bool,
}

/// A pipeline failure tagged with the stage that raised it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{stage}: {error}")]
pub struct AnalysisError {
    pub stage: &'static str,
    pub error: Error,
}

impl AnalysisError {
    /// 2 for input errors, 3 for exceeded budgets, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.error {
            Error::BudgetExceeded(_) => 3,
            Error::Internal(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(x) => Outcome::Ok(x),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputEcho {
    pub kind: MatrixKind,
    pub matrix: IntMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub n: usize,
    pub r: usize,
    pub fan: FanFlags,
    pub weight: WeightFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GaleDualReport {
    #[serde(rename = "V")]
    pub v: IntMatrix,
    #[serde(rename = "Q")]
    pub q: IntMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MovReport {
    pub cone: Cone,
    pub effective_cone: Cone,
    pub chambers_in_mov: usize,
    pub chambers_outside_mov: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChamberReport {
    pub label: String,
    pub cone: Cone,
    pub bunch: Vec<Vec<usize>>,
    pub fan: SimplicialFan,
    pub primitive_collections: Vec<PrimitiveCollection>,
    pub border: BorderClass,
    pub singularity: SingularityProfile,
    pub q_fano: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompleteFanEntry {
    pub maximal_cones: Vec<Vec<usize>>,
    pub projective: bool,
    /// Label of the chamber when the fan is projective.
    pub chamber: Option<String>,
    /// Intersection of the cones ⟨Q_J⟩ over the complements J of the maximal cones.
    pub chamber_intersection: Cone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompleteFansReport {
    pub total: usize,
    pub projective: usize,
    pub non_projective: usize,
    pub fans: Vec<CompleteFanEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HyperplaneDecomposition {
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub hyperplane: Vec<Int>,
    pub result: Outcome<BundleDecomposition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractibilityEntry {
    pub collection: Vec<usize>,
    pub verdict: Contractibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChamberDecompositions {
    pub label: String,
    pub border: BorderKind,
    pub maxbord: Vec<HyperplaneDecomposition>,
    pub tower: Outcome<Vec<BundleDecomposition>>,
    pub contractibility: Vec<ContractibilityEntry>,
}

/// Q′ of the splitting along a facet carrying a nef primitive collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaseCheck {
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub hyperplane: Vec<Int>,
    pub nef_collection: Vec<usize>,
    pub qprime: IntMatrix,
    pub failures: Vec<String>,
    #[serde(serialize_with = "crate::exactla::ser::opt_vec")]
    pub f_witness: Option<Vec<Int>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WptbEquivalence {
    /// Some chamber of Mov is maxbord, so X is flip-equivalent to a toric cover of a WPTB.
    pub equivalent: bool,
    pub maxbord_chambers: Vec<String>,
    pub base_checks: Vec<BaseCheck>,
    /// The failure condition when not equivalent.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecompositionsReport {
    /// "V", or "Vhat" when V is not CF and the universal cover is decomposed instead.
    pub fan_matrix: &'static str,
    pub per_chamber: Vec<ChamberDecompositions>,
    pub wptb_equivalence: WptbEquivalence,
    pub rank2: Option<Outcome<FlipTaxonomy>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisReport {
    pub input: InputEcho,
    pub flags: Flags,
    pub gale_dual: GaleDualReport,
    pub mov: MovReport,
    pub chambers: Vec<ChamberReport>,
    pub complete_fans: Option<CompleteFansReport>,
    pub flip_graph: FlipGraph,
    pub decompositions: DecompositionsReport,
    pub quotient: Option<QuotientReport>,
    /// Stage name to microseconds; empty unless timings were requested.
    pub timings: BTreeMap<String, u64>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Chamber of Mov with the given label.
    pub fn chamber(&self, label: &str) -> Option<&ChamberReport> {
        self.chambers.iter().find(|c| c.label == label)
    }
}

struct Stages {
    record: bool,
    timings: BTreeMap<String, u64>,
}

impl Stages {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> std::result::Result<T, AnalysisError> {
        let start = self.record.then(std::time::Instant::now);
        let out = f().map_err(|error| AnalysisError { stage, error });
        if let Some(t) = start {
            self.timings.insert(stage.to_string(), t.elapsed().as_micros() as u64);
        }
        out
    }
}

fn label(k: usize) -> String {
    format!("γ_{}", k + 1)
}

fn wptb_equivalence(q: &IntMatrix, chambers: &[ChamberReport]) -> Result<WptbEquivalence> {
    let maxbord_chambers: Vec<String> =
        chambers.iter().filter(|c| c.border.kind >= BorderKind::Maxbord).map(|c| c.label.clone()).collect();
    let mut seen = BTreeMap::new();
    for c in chambers {
        for h in &c.border.per_hyperplane {
            if let Some(p) = &h.nef_collection {
                seen.entry(hyperplane_key(&h.normal)).or_insert((h.normal.clone(), p.clone()));
            }
        }
    }
    let mut base_checks = vec![];
    for (_, (normal, p)) in seen {
        let bord = transform_bordering(q, &normal)?;
        let Ok((qprime, _, _)) = split_weight_matrix(&bord.q_new) else { continue };
        let flags = check_w(&qprime);
        base_checks.push(BaseCheck {
            hyperplane: normal,
            nef_collection: p,
            failures: flags.failures().iter().map(|s| s.to_string()).collect(),
            f_witness: flags.f_witness.clone(),
            qprime,
        });
    }
    let equivalent = !maxbord_chambers.is_empty();
    let reason = (!equivalent).then(|| {
        let fails: Vec<String> = base_checks
            .iter()
            .flat_map(|b| b.failures.iter().filter(|f| f.as_str() != "b").cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if fails.is_empty() {
            "Mov not maxbord".to_string()
        } else {
            let conds: Vec<String> = fails.iter().map(|f| format!("({f})")).collect();
            format!("Mov not maxbord, Q′ fails {}", conds.join(", "))
        }
    });
    Ok(WptbEquivalence { equivalent, maxbord_chambers, base_checks, reason })
}

fn chamber_decompositions(v: &IntMatrix, q: &IntMatrix, ch: &Chamber, rep: &ChamberReport) -> ChamberDecompositions {
    let r = q.rows();
    let maxbord = rep
        .border
        .per_hyperplane
        .iter()
        .filter(|h| h.maxbord && r >= 2)
        .map(|h| HyperplaneDecomposition {
            hyperplane: h.normal.clone(),
            result: decompose(v, q, &ch.cone, &h.normal).into(),
        })
        .collect();
    let tower = if r >= 2 && rep.border.kind >= BorderKind::Maxbord {
        recursive_decomposition(v, q, ch).into()
    } else {
        Outcome::Error(Error::NotMaxbord.to_string())
    };
    let contractibility = rep
        .primitive_collections
        .iter()
        .filter(|p| p.is_nef)
        .filter_map(|p| {
            contractibility(v, q, ch, p).ok().map(|verdict| ContractibilityEntry { collection: p.p.clone(), verdict })
        })
        .collect();
    ChamberDecompositions { label: rep.label.clone(), border: rep.border.kind, maxbord, tower, contractibility }
}

/// Runs flags → Gale dual → Mov → chambers → collections → border classes →
/// decompositions → quotient on a parsed matrix.
pub fn analyze(input: &ParsedMatrix, opts: &AnalyzeOptions) -> std::result::Result<AnalysisReport, AnalysisError> {
    let mut st = Stages { record: opts.record_timings, timings: BTreeMap::new() };
    let kind = opts.kind.or(input.kind).unwrap_or(MatrixKind::Fan);
    let m = &input.matrix;

    let (v, q, fan_flags, weight_flags) = st.run("flags", || {
        let v = match kind {
            MatrixKind::Fan => m.clone(),
            MatrixKind::Weight => {
                let wf = check_w(m);
                if !wf.is_w {
                    return Err(Error::NotWMatrix(format!("conditions {:?} fail", wf.failures())));
                }
                gale_dual(m)?
            }
        };
        let ff = check_f(&v)?;
        if !ff.is_f {
            return Err(Error::NotFMatrix(format!("{ff:?}")));
        }
        let q = weight_matrix(&v)?;
        let wf = check_w(&q);
        Ok((v, q, ff, wf))
    })?;
    let (n, r) = (v.rows(), q.rows());

    let (mov, effective) = st.run("mov", || Ok((mov_cone(&q)?, Cone::from_generator_matrix_cols(&q)?)))?;
    let all = st.run("chambers", || enumerate_chambers(&q))?;
    let outside = all.iter().filter(|c| !c.in_moving).count();
    let inside: Vec<Chamber> = all.into_iter().filter(|c| c.in_moving).collect();

    // torsion is invisible to Q, so the cover V̂ carries the bundle structure
    let cover = if fan_flags.is_cf { None } else { Some(st.run("quotient", || torsion_matrix_gamma(&v, opts.pins.as_ref()))?) };
    let v_dec = cover.as_ref().map_or_else(|| v.clone(), |c| c.v_hat.clone());

    let chambers: Vec<ChamberReport> = st.run("collections", || {
        inside
            .iter()
            .enumerate()
            .map(|(k, ch)| {
                Ok(ChamberReport {
                    label: label(k),
                    cone: ch.cone.clone(),
                    bunch: ch.bunch.clone(),
                    fan: ch.fan.clone(),
                    primitive_collections: collections_with_relations(&ch.fan, &v, &q)?,
                    border: classify_border(&v, &q, ch)?,
                    singularity: singularity_profile(&v, &q, &ch.fan)?,
                    q_fano: q_fano(&q, ch),
                })
            })
            .collect()
    })?;

    let complete_fans = if opts.enumerate_complete {
        Some(st.run("complete_fans", || {
            let fans = enumerate_complete_fans(&v, opts.limits)?;
            let mut entries = vec![];
            for f in &fans {
                let cf = chamber_of_fan(&q, f)?;
                let chamber = chambers.iter().find(|c| c.fan.same_cones(f)).map(|c| c.label.clone());
                entries.push(CompleteFanEntry {
                    maximal_cones: f.maximal_cones.clone(),
                    projective: f.is_projective,
                    chamber,
                    chamber_intersection: cf.cone,
                });
            }
            let projective = entries.iter().filter(|e| e.projective).count();
            Ok(CompleteFansReport {
                total: entries.len(),
                projective,
                non_projective: entries.len() - projective,
                fans: entries,
            })
        })?)
    } else {
        None
    };

    let graph = st.run("flip_graph", || flip_graph(&v, &inside))?;

    let decompositions = st.run("decompositions", || {
        let per_chamber =
            inside.iter().zip(&chambers).map(|(ch, rep)| chamber_decompositions(&v_dec, &q, ch, rep)).collect();
        Ok(DecompositionsReport {
            fan_matrix: if cover.is_some() { "Vhat" } else { "V" },
            per_chamber,
            wptb_equivalence: wptb_equivalence(&q, &chambers)?,
            rank2: (r == 2).then(|| flip_taxonomy(&q).into()),
        })
    })?;

    Ok(AnalysisReport {
        input: InputEcho { kind, matrix: m.clone() },
        flags: Flags { n, r, fan: fan_flags, weight: weight_flags },
        gale_dual: GaleDualReport { v, q },
        mov: MovReport { cone: mov, effective_cone: effective, chambers_in_mov: chambers.len(), chambers_outside_mov: outside },
        chambers,
        complete_fans,
        flip_graph: graph,
        decompositions,
        quotient: cover,
        timings: st.timings,
    })
}

/// Barycentric point of a ray of the positive orthant on x_1 + x_2 + x_3 = 1, in drawing coordinates.
fn project(x: &[Int], size: f64, pad: f64) -> (f64, f64) {
    let f: Vec<f64> = x.iter().map(|t| t.to_f64().unwrap_or(0.0)).collect();
    let s: f64 = f.iter().sum();
    let (b2, b3) = (f[1] / s, f[2] / s);
    let px = pad + size * (b2 + b3 / 2.0);
    let py = pad + size * (3f64.sqrt() / 2.0) * (1.0 - b3);
    (px, py)
}

fn ordered_polygon(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let mut out = pts.to_vec();
    out.sort_by(|a, b| {
        let ta = (a.1 - cy).atan2(a.0 - cx);
        let tb = (b.1 - cy).atan2(b.0 - cx);
        ta.partial_cmp(&tb).expect("finite angles")
    });
    out
}

fn points_attr(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

/// SVG of ⟨Q⟩, Mov and the chambers cut by the plane x_1 + x_2 + x_3 = 1.
pub fn render_section_svg(report: &AnalysisReport) -> Result<String> {
    let q = &report.gale_dual.q;
    if q.rows() != 3 {
        return Err(Error::Rank(format!("section drawing needs r = 3, got r = {}", q.rows())));
    }
    let (size, pad) = (600.0, 40.0);
    let (w, h) = (size + 2.0 * pad, size * 3f64.sqrt() / 2.0 + 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let outline = |cone: &Cone| -> Vec<(f64, f64)> {
        ordered_polygon(&cone.rays().iter().map(|x| project(x, size, pad)).collect::<Vec<_>>())
    };
    let eff = outline(&report.mov.effective_cone);
    let _ = writeln!(
        s,
        r#"<path class="effective" d="M {} Z" fill="none" stroke="black" stroke-width="2"/>"#,
        points_attr(&eff).replace(' ', " L ")
    );
    let palette = ["#d8e6f3", "#f3e0d8", "#dff0d8", "#efe3f5", "#f7f1d0", "#d9f2ef"];
    for (k, c) in report.chambers.iter().enumerate() {
        let poly = outline(&c.cone);
        let _ = writeln!(
            s,
            r##"<polygon class="chamber" data-label="{}" points="{}" fill="{}" stroke="#555" stroke-width="1"/>"##,
            c.label,
            points_attr(&poly),
            palette[k % palette.len()]
        );
        let cx = poly.iter().map(|p| p.0).sum::<f64>() / poly.len() as f64;
        let cy = poly.iter().map(|p| p.1).sum::<f64>() / poly.len() as f64;
        let sub = c.label.trim_start_matches("γ_");
        let _ = writeln!(
            s,
            r#"<text class="chamber-label" x="{cx:.2}" y="{cy:.2}" font-size="14" text-anchor="middle">γ<tspan baseline-shift="sub" font-size="10">{sub}</tspan></text>"#
        );
    }
    if report.mov.cone.dim() == 3 {
        let mv = outline(&report.mov.cone);
        let _ = writeln!(
            s,
            r#"<path class="mov" d="M {} Z" fill="none" stroke="red" stroke-width="2.5" stroke-dasharray="6 3"/>"#,
            points_attr(&mv).replace(' ', " L ")
        );
    }
    // one marker per distinct direction of the columns
    let mut dirs: BTreeMap<Vec<Int>, Vec<usize>> = BTreeMap::new();
    for (j, col) in q.col_vecs().iter().enumerate() {
        dirs.entry(crate::exactla::primitive(col)).or_default().push(j + 1);
    }
    for (dir, idx) in &dirs {
        let (x, y) = project(dir, size, pad);
        let names: Vec<String> = idx.iter().map(|j| format!("q{j}")).collect();
        let _ = writeln!(s, r#"<circle class="column" cx="{x:.2}" cy="{y:.2}" r="4" fill="black"><title>{}</title></circle>"#, names.join("="));
        let _ = writeln!(s, r#"<text class="column-label" x="{:.2}" y="{:.2}" font-size="11">{}</text>"#, x + 6.0, y - 6.0, names.join("="));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
