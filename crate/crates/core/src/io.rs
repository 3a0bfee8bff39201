//! Profile export and import (CSV, JSON) and OBJ meshes of rotational
//! translators.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit-exactly. JSON has no literal for non-finite numbers; those are
//! written as the strings `"inf"`, `"-inf"` and `"NaN"`.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{solve_l, LimitReport};
use crate::model::{FamilyKind, ParallelFamily, SpaceForm};
use crate::profile::{MarkKind, Profile, ProfileSample, SampleFlag, SignBranch, SingularMark};
use crate::translators::{Regularity, Translator, TranslatorBranch, TranslatorSpec};

pub const CSV_HEADER: &str = "s,tau,rho,rho_prime,phi,theta,k_tangent,k_normal,H_r,residual,flags";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshModel {
    Euclidean,
    Poincare,
}

/// Text form of a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_f64(text: &str) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {text:?}")))
}

mod num17 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::value::RawValue;

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            let raw = RawValue::from_string(super::fmt_f64(*x)).map_err(serde::ser::Error::custom)?;
            raw.serialize(ser)
        } else {
            ser.serialize_str(&super::fmt_f64(*x))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Wire {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Wire::deserialize(de)? {
            Wire::Num(x) => Ok(x),
            Wire::Text(t) => super::parse_f64(&t).map_err(D::Error::custom),
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, ser),
                None => ser.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
            match Option::<Wire>::deserialize(de)? {
                None => Ok(None),
                Some(Wire::Num(x)) => Ok(Some(x)),
                Some(Wire::Text(t)) => super::super::parse_f64(&t).map(Some).map_err(D::Error::custom),
            }
        }
    }
}

/// One exported sample row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    #[serde(with = "num17")]
    pub s: f64,
    #[serde(with = "num17")]
    pub tau: f64,
    #[serde(with = "num17")]
    pub rho: f64,
    #[serde(with = "num17")]
    pub rho_prime: f64,
    #[serde(with = "num17")]
    pub phi: f64,
    #[serde(with = "num17")]
    pub theta: f64,
    #[serde(with = "num17")]
    pub k_tangent: f64,
    #[serde(with = "num17")]
    pub k_normal: f64,
    #[serde(rename = "H_r", with = "num17")]
    pub h_r: f64,
    #[serde(with = "num17")]
    pub residual: f64,
    pub flags: SampleFlag,
}

impl From<&ProfileSample> for ProfileRecord {
    fn from(p: &ProfileSample) -> Self {
        ProfileRecord {
            s: p.s,
            tau: p.tau,
            rho: p.rho,
            rho_prime: p.rho_prime,
            phi: p.phi,
            theta: p.theta,
            k_tangent: p.k_tangent,
            k_normal: p.k_normal,
            h_r: p.h_r,
            residual: p.residual,
            flags: p.flag,
        }
    }
}

impl From<&ProfileRecord> for ProfileSample {
    fn from(p: &ProfileRecord) -> Self {
        ProfileSample {
            s: p.s,
            tau: p.tau,
            rho: p.rho,
            rho_prime: p.rho_prime,
            phi: p.phi,
            theta: p.theta,
            k_tangent: p.k_tangent,
            k_normal: p.k_normal,
            h_r: p.h_r,
            residual: p.residual,
            flag: p.flags,
        }
    }
}

impl ProfileRecord {
    fn csv_row(&self) -> String {
        let nums = [
            self.s,
            self.tau,
            self.rho,
            self.rho_prime,
            self.phi,
            self.theta,
            self.k_tangent,
            self.k_normal,
            self.h_r,
            self.residual,
        ];
        let mut row = nums.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",");
        row.push(',');
        row.push_str(self.flags.as_str());
        row
    }

    fn from_csv(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse(format!("expected 11 columns, found {}: {line:?}", fields.len())));
        }
        let v = fields[..10].iter().map(|f| parse_f64(f)).collect::<Result<Vec<_>>>()?;
        Ok(ProfileRecord {
            s: v[0],
            tau: v[1],
            rho: v[2],
            rho_prime: v[3],
            phi: v[4],
            theta: v[5],
            k_tangent: v[6],
            k_normal: v[7],
            h_r: v[8],
            residual: v[9],
            flags: SampleFlag::parse(fields[10].trim())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkRecord {
    #[serde(with = "num17")]
    pub s_loc: f64,
    pub kind: MarkKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub tag: String,
    pub reflected: bool,
    pub orientation: i8,
    pub sign_branch: SignBranch,
    pub marks: Vec<MarkRecord>,
    pub samples: Vec<ProfileRecord>,
}

/// The JSON export of a translator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub spec: TranslatorSpec,
    pub limits: LimitReport,
    pub regularity: Regularity,
    pub degenerate: bool,
    #[serde(with = "num17::option")]
    pub min_height: Option<f64>,
    #[serde(with = "num17::option")]
    pub s_min_height: Option<f64>,
    pub branches: Vec<BranchRecord>,
}

impl ProfileDocument {
    pub fn from_translator(t: &Translator) -> Self {
        let branches = t
            .branches
            .iter()
            .map(|b| BranchRecord {
                tag: b.tag.clone(),
                reflected: b.reflected,
                orientation: b.orientation,
                sign_branch: b.profile.sign_branch(),
                marks: b.profile.marks().iter().map(|m| MarkRecord { s_loc: m.s_loc, kind: m.kind }).collect(),
                samples: b.profile.samples().iter().map(ProfileRecord::from).collect(),
            })
            .collect();
        ProfileDocument {
            spec: t.spec,
            limits: solve_l(&t.spec.params),
            regularity: t.regularity,
            degenerate: t.degenerate,
            min_height: t.min_height,
            s_min_height: t.s_min_height,
            branches,
        }
    }

    /// Rebuilds a translator; profiles carry samples only (no dense output).
    pub fn into_translator(self) -> Result<Translator> {
        let params = self.spec.params;
        let family = ParallelFamily::new(self.spec.family(), &params)?;
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in self.branches {
            if b.samples.is_empty() {
                return Err(Error::Parse(format!("branch {} has no samples", b.tag)));
            }
            let samples = b.samples.iter().map(ProfileSample::from).collect();
            let marks = b.marks.iter().map(|m| SingularMark { s_loc: m.s_loc, kind: m.kind }).collect();
            branches.push(TranslatorBranch {
                profile: Profile::from_parts(params, family, b.sign_branch, samples, marks),
                orientation: b.orientation,
                reflected: b.reflected,
                tag: b.tag,
            });
        }
        Ok(Translator {
            spec: self.spec,
            branches,
            regularity: self.regularity,
            min_height: self.min_height,
            s_min_height: self.s_min_height,
            degenerate: self.degenerate,
        })
    }
}

/// CSV: a header, then each branch introduced by `# branch <tag> reflected=<bool>`.
pub fn to_csv(t: &Translator) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    if t.degenerate {
        out.push_str("# degenerate vertical hyperplane\n");
    }
    for b in &t.branches {
        let _ = writeln!(out, "# branch {} reflected={}", b.tag, b.reflected);
        for smp in b.profile.samples() {
            out.push_str(&ProfileRecord::from(smp).csv_row());
            out.push('\n');
        }
    }
    out
}

/// A branch read back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvBranch {
    pub tag: String,
    pub reflected: bool,
    pub records: Vec<ProfileRecord>,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvBranch>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("bad CSV header: {other:?}"))),
    }
    let mut branches: Vec<CsvBranch> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# branch ") {
            let (tag, refl) = rest
                .rsplit_once(" reflected=")
                .ok_or_else(|| Error::Parse(format!("bad branch line {line:?}")))?;
            let reflected = refl.trim().parse::<bool>().map_err(|_| Error::Parse(format!("bad flag in {line:?}")))?;
            branches.push(CsvBranch { tag: tag.to_string(), reflected, records: Vec::new() });
        } else if line.starts_with('#') {
            continue;
        } else {
            let branch = branches.last_mut().ok_or_else(|| Error::Parse("row before any branch line".into()))?;
            branch.records.push(ProfileRecord::from_csv(line)?);
        }
    }
    Ok(branches)
}

pub fn to_json(t: &Translator) -> Result<String> {
    serde_json::to_string_pretty(&ProfileDocument::from_translator(t)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_json(text: &str) -> Result<ProfileDocument> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes the profile export to `sink`.
pub fn export_profile(t: &Translator, format: Format, sink: &mut impl Write) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(t),
        Format::Json => to_json(t)?,
    };
    sink.write_all(text.as_bytes())?;
    Ok(())
}

/// Radius of the parallel at distance `s` in the chosen model.
fn model_radius(model: MeshModel, s: f64) -> f64 {
    match model {
        MeshModel::Euclidean => s,
        MeshModel::Poincare => (0.5 * s).tanh(),
    }
}

/// OBJ surface of revolution with `segments` steps in angle per ring.
pub fn mesh_obj(t: &Translator, model: MeshModel, segments: usize) -> Result<String> {
    let params = t.spec.params;
    if t.spec.family() != FamilyKind::Rotational || t.degenerate {
        return Err(Error::domain("meshes are surfaces of revolution; the translator must be rotational"));
    }
    if segments < 8 {
        return Err(Error::domain(format!("need at least 8 angular segments, got {segments}")));
    }
    if model == MeshModel::Poincare && params.space() != SpaceForm::Hyperbolic {
        return Err(Error::domain("the Poincare model applies to hyperbolic space only"));
    }
    let mut out = String::new();
    let _ = writeln!(out, "# translator-lab mesh {:?} {}", t.spec.family_kind, params);
    let _ = writeln!(out, "# model {model:?}, {segments} segments");
    if params.n() > 2 {
        let _ = writeln!(out, "# schematic: the 2D profile revolved once; the true hypersurface has dimension {}", params.n());
    }
    let mut base = 1usize;
    for b in &t.branches {
        let prof = &b.profile;
        let _ = writeln!(out, "o {}{}", b.tag, if b.reflected { "_reflected" } else { "" });
        for m in prof.marks() {
            let _ = writeln!(out, "# mark {:?} ring at s = {}", m.kind, fmt_f64(m.s_loc));
        }
        for smp in prof.samples() {
            let radius = model_radius(model, smp.s);
            for j in 0..segments {
                let psi = std::f64::consts::TAU * j as f64 / segments as f64;
                let _ = writeln!(out, "v {} {} {}", fmt_f64(radius * psi.cos()), fmt_f64(radius * psi.sin()), fmt_f64(smp.phi));
            }
        }
        let rings = prof.samples().len();
        for i in 0..rings.saturating_sub(1) {
            for j in 0..segments {
                let jn = (j + 1) % segments;
                let a = base + i * segments + j;
                let b2 = base + i * segments + jn;
                let c = base + (i + 1) * segments + jn;
                let d = base + (i + 1) * segments + j;
                let _ = writeln!(out, "f {a} {b2} {c} {d}");
            }
        }
        base += rings * segments;
    }
    Ok(out)
}

pub fn export_mesh(t: &Translator, model: MeshModel, segments: usize, sink: &mut impl Write) -> Result<()> {
    sink.write_all(mesh_obj(t, model, segments)?.as_bytes())?;
    Ok(())
}
