//! JSON and CSV documents: map specifications, generating sequences and
//! normalization results.
//!
//! Every emitter walks ordered containers, so identical inputs produce
//! byte-identical files. Exact coefficients serialize as `"p/q"` strings,
//! float coefficients as plain numbers.

use crate::algebra::{FtCaps, FtField, FtTerm, GradedPolyField, HomogeneousPolyField, ModeKey};
use crate::coeff::{Coeff, Mode};
use crate::error::{Error, Result};
use crate::lie::GenSeq;
use crate::normalform::{Diagnostics, Driver};
use crate::poly::Poly;
use crate::represent::{KroneckerPart, LinearPart, MapSpec, Perturbation, Unperturbed};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrStr {
    Num(f64),
    Str(String),
}

fn coeff_parts(c: &Coeff) -> (NumOrStr, NumOrStr) {
    match c {
        Coeff::F(v) => (NumOrStr::Num(v.re), NumOrStr::Num(v.im)),
        Coeff::Q(q) => (NumOrStr::Str(q.re.to_string()), NumOrStr::Str(q.im.to_string())),
    }
}

fn part_value(p: &NumOrStr, mode: Mode) -> Result<BigRational> {
    match p {
        NumOrStr::Str(s) => {
            BigRational::from_str(s).map_err(|_| Error::Spec(format!("bad rational `{s}`")))
        }
        NumOrStr::Num(x) => {
            if mode == Mode::Exact && (x.fract() != 0.0 || x.abs() >= 9e15) {
                return Err(Error::Spec(
                    "exact mode needs integer or \"p/q\" coefficients".into(),
                ));
            }
            Ok(BigRational::from_float(*x)
                .ok_or_else(|| Error::Spec("non-finite coefficient".into()))?)
        }
    }
}

pub fn parts_to_coeff(re: &NumOrStr, im: &NumOrStr, mode: Mode) -> Result<Coeff> {
    match mode {
        Mode::Float => {
            let f = |p: &NumOrStr| -> Result<f64> {
                match p {
                    NumOrStr::Num(x) => Ok(*x),
                    NumOrStr::Str(s) => BigRational::from_str(s)
                        .ok()
                        .and_then(|r| r.to_f64())
                        .ok_or_else(|| Error::Spec(format!("bad number `{s}`"))),
                }
            };
            Ok(Coeff::from_f64(f(re)?, f(im)?))
        }
        Mode::Exact => Ok(Coeff::from_big(part_value(re, mode)?, part_value(im, mode)?)),
    }
}

/// One sparse term of a serialized series. Polynomial terms carry
/// `exponents`; Fourier--Taylor terms carry `mode` (the Fourier index) and
/// `exponents` (the action-monomial exponents).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub order: u32,
    pub component: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<Vec<i32>>,
    pub exponents: Vec<u32>,
    pub re: NumOrStr,
    pub im: NumOrStr,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Poly,
    FourierTaylor,
}

/// A generating sequence (or graded field) as a flat document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub kind: SeriesKind,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub actions: Option<usize>,
    pub order: u32,
    pub arithmetic: Mode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fourier_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action_degree_cap: Option<u32>,
    pub terms: Vec<SeriesTerm>,
}

pub fn poly_seq_to_doc(seq: &GenSeq<HomogeneousPolyField>, dim: usize, mode: Mode) -> SeriesDoc {
    let mut terms = Vec::new();
    for (s, t) in seq.iter() {
        for j in 0..dim {
            for (m, c) in t.component(j).terms() {
                let (re, im) = coeff_parts(c);
                terms.push(SeriesTerm {
                    order: s,
                    component: j,
                    mode: None,
                    exponents: m.0.to_vec(),
                    re,
                    im,
                });
            }
        }
    }
    SeriesDoc {
        kind: SeriesKind::Poly,
        dim,
        actions: None,
        order: seq.capacity(),
        arithmetic: mode,
        fourier_cutoff: None,
        action_degree_cap: None,
        terms,
    }
}

pub fn poly_seq_from_doc(doc: &SeriesDoc) -> Result<GenSeq<HomogeneousPolyField>> {
    if doc.kind != SeriesKind::Poly {
        return Err(Error::Spec("expected a polynomial series document".into()));
    }
    let mut seq = GenSeq::new(doc.order);
    let mut per_order: std::collections::BTreeMap<u32, HomogeneousPolyField> =
        std::collections::BTreeMap::new();
    for t in &doc.terms {
        if t.component >= doc.dim {
            return Err(Error::Spec(format!("component {} out of range", t.component)));
        }
        if t.exponents.len() != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                got: t.exponents.len(),
            });
        }
        let degree: u32 = t.exponents.iter().sum();
        if degree != t.order + 1 {
            return Err(Error::Grading(format!(
                "order-{} term must have degree {}, found {degree}",
                t.order,
                t.order + 1
            )));
        }
        let c = parts_to_coeff(&t.re, &t.im, doc.arithmetic)?;
        let field = per_order.entry(t.order).or_insert_with(|| {
            HomogeneousPolyField::zero(doc.dim, t.order + 1, doc.arithmetic)
        });
        let mut comp = field.component(t.component).clone();
        comp.add_term(crate::poly::Mono(t.exponents.clone().into_boxed_slice()), c);
        field.set_component(t.component, comp);
    }
    for (_, f) in per_order {
        seq.set(f)?;
    }
    Ok(seq)
}

pub fn ft_seq_to_doc(
    seq: &GenSeq<FtTerm>,
    n: usize,
    m: usize,
    caps: FtCaps,
) -> SeriesDoc {
    let mut terms = Vec::new();
    for (s, t) in seq.iter() {
        for c in 0..n + m {
            for (k, p) in t.comp(c).modes() {
                for (mono, coeff) in p.terms() {
                    let (re, im) = coeff_parts(coeff);
                    terms.push(SeriesTerm {
                        order: s,
                        component: c,
                        mode: Some(k.0.to_vec()),
                        exponents: mono.0.to_vec(),
                        re,
                        im,
                    });
                }
            }
        }
    }
    SeriesDoc {
        kind: SeriesKind::FourierTaylor,
        dim: n,
        actions: Some(m),
        order: seq.capacity(),
        arithmetic: Mode::Float,
        fourier_cutoff: Some(caps.k1),
        action_degree_cap: Some(caps.action_cap),
        terms,
    }
}

pub fn ft_seq_from_doc(doc: &SeriesDoc) -> Result<GenSeq<FtTerm>> {
    if doc.kind != SeriesKind::FourierTaylor {
        return Err(Error::Spec("expected a Fourier-Taylor series document".into()));
    }
    let n = doc.dim;
    let m = doc
        .actions
        .ok_or_else(|| Error::Spec("missing action dimension".into()))?;
    let caps = FtCaps {
        k1: doc.fourier_cutoff.unwrap_or(1),
        action_cap: doc.action_degree_cap.unwrap_or(8),
    };
    let mut per_order: std::collections::BTreeMap<u32, FtTerm> = std::collections::BTreeMap::new();
    for t in &doc.terms {
        let k = t
            .mode
            .clone()
            .ok_or_else(|| Error::Spec("missing Fourier index".into()))?;
        if k.len() != n || t.exponents.len() != m || t.component >= n + m {
            return Err(Error::Spec("inconsistent Fourier-Taylor term shape".into()));
        }
        let c = parts_to_coeff(&t.re, &t.im, Mode::Float)?;
        let term = per_order
            .entry(t.order)
            .or_insert_with(|| FtTerm::zero(n, m, t.order, Mode::Float, caps));
        let mut slice = term.comp(t.component).clone();
        slice.accumulate(
            ModeKey(k.into_boxed_slice()),
            Poly::monomial(m, &t.exponents, c),
        );
        if t.component < n {
            term.set_angle(t.component, slice)?;
        } else {
            term.set_action(t.component - n, slice)?;
        }
    }
    let mut seq = GenSeq::new(doc.order);
    for (_, t) in per_order {
        seq.set(t)?;
    }
    Ok(seq)
}

/// Either kind of sequence document, for the compose command.
pub fn seq_doc_to_kind(doc: &SeriesDoc) -> Result<crate::represent::GenSeqKind> {
    match doc.kind {
        SeriesKind::Poly => Ok(crate::represent::GenSeqKind::Poly(poly_seq_from_doc(doc)?)),
        SeriesKind::FourierTaylor => Ok(crate::represent::GenSeqKind::Ft(ft_seq_from_doc(doc)?)),
    }
}

// ------------------------------------------------------------------- MapSpec

/// Polynomial term of a frequency component ω_j(I).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaTerm {
    pub exponents: Vec<u32>,
    pub re: NumOrStr,
    #[serde(default = "zero_part")]
    pub im: NumOrStr,
}

fn zero_part() -> NumOrStr {
    NumOrStr::Num(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenRepr {
    pub re: NumOrStr,
    #[serde(default = "zero_part")]
    pub im: NumOrStr,
}

/// On-disk map specification:
/// `{kind, eigenvalues|omega, perturbation, order, fourier_cutoff, ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapSpecDoc {
    pub kind: String,
    #[serde(default = "default_mode")]
    pub arithmetic: Mode,
    pub order: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eigenvalues: Option<Vec<EigenRepr>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega_shifts: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega: Option<Vec<Vec<OmegaTerm>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub actions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fourier_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action_degree_cap: Option<u32>,
    pub perturbation: Vec<SeriesTerm>,
}

fn default_mode() -> Mode {
    Mode::Float
}

pub fn mapspec_from_doc(doc: &MapSpecDoc) -> Result<MapSpec> {
    match doc.kind.as_str() {
        "linear" => {
            let eigen = doc
                .eigenvalues
                .as_ref()
                .ok_or_else(|| Error::Spec("linear maps need eigenvalues".into()))?;
            let lambda: Vec<Coeff> = eigen
                .iter()
                .map(|e| parts_to_coeff(&e.re, &e.im, doc.arithmetic))
                .collect::<Result<_>>()?;
            let dim = lambda.len();
            let lin = LinearPart::new(lambda, doc.omega_shifts.as_deref())?;
            let mut pert = GradedPolyField::zero(dim, doc.order, doc.arithmetic);
            let mut per_order: std::collections::BTreeMap<u32, HomogeneousPolyField> =
                std::collections::BTreeMap::new();
            for t in &doc.perturbation {
                if t.exponents.len() != dim || t.component >= dim {
                    return Err(Error::Spec("inconsistent perturbation term shape".into()));
                }
                let degree: u32 = t.exponents.iter().sum();
                if degree != t.order + 1 {
                    return Err(Error::Grading(format!(
                        "order-{} perturbation must have degree {}, found {degree}",
                        t.order,
                        t.order + 1
                    )));
                }
                let c = parts_to_coeff(&t.re, &t.im, doc.arithmetic)?;
                let field = per_order.entry(t.order).or_insert_with(|| {
                    HomogeneousPolyField::zero(dim, t.order + 1, doc.arithmetic)
                });
                let mut comp = field.component(t.component).clone();
                comp.add_term(crate::poly::Mono(t.exponents.clone().into_boxed_slice()), c);
                field.set_component(t.component, comp);
            }
            for (_, f) in per_order {
                pert.set_term(f)?;
            }
            let spec = MapSpec {
                unperturbed: Unperturbed::Linear(lin),
                perturbation: Perturbation::Poly(pert),
                order: doc.order,
                mode: doc.arithmetic,
            };
            spec.validate()?;
            Ok(spec)
        }
        "kronecker" => {
            if doc.arithmetic == Mode::Exact {
                return Err(Error::Unsupported(
                    "Kronecker specifications run in float mode (transcendental phases)".into(),
                ));
            }
            let omega_terms = doc
                .omega
                .as_ref()
                .ok_or_else(|| Error::Spec("Kronecker maps need a frequency map".into()))?;
            let m = doc
                .actions
                .ok_or_else(|| Error::Spec("Kronecker maps need the action dimension".into()))?;
            let n = omega_terms.len();
            let caps = FtCaps {
                k1: doc.fourier_cutoff.unwrap_or(1),
                action_cap: doc.action_degree_cap.unwrap_or(8),
            };
            let omega: Vec<Poly> = omega_terms
                .iter()
                .map(|comp| {
                    let mut p = Poly::zero(m, Mode::Float);
                    for t in comp {
                        if t.exponents.len() != m {
                            return Err(Error::DimensionMismatch {
                                expected: m,
                                got: t.exponents.len(),
                            });
                        }
                        p.add_term(
                            crate::poly::Mono(t.exponents.clone().into_boxed_slice()),
                            parts_to_coeff(&t.re, &t.im, Mode::Float)?,
                        );
                    }
                    Ok(p)
                })
                .collect::<Result<_>>()?;
            let kron = KroneckerPart::new(omega, m, caps)?;
            let mut per_order: std::collections::BTreeMap<u32, FtTerm> =
                std::collections::BTreeMap::new();
            for t in &doc.perturbation {
                let k = t
                    .mode
                    .clone()
                    .ok_or_else(|| Error::Spec("Kronecker perturbations need Fourier indices".into()))?;
                if k.len() != n || t.exponents.len() != m || t.component >= n + m {
                    return Err(Error::Spec("inconsistent perturbation term shape".into()));
                }
                let c = parts_to_coeff(&t.re, &t.im, Mode::Float)?;
                let term = per_order
                    .entry(t.order)
                    .or_insert_with(|| FtTerm::zero(n, m, t.order, Mode::Float, caps));
                let mut slice = term.comp(t.component).clone();
                slice.accumulate(
                    ModeKey(k.into_boxed_slice()),
                    Poly::monomial(m, &t.exponents, c),
                );
                if t.component < n {
                    term.set_angle(t.component, slice)?;
                } else {
                    term.set_action(t.component - n, slice)?;
                }
            }
            let mut pert = FtField::zero(n, m, doc.order, Mode::Float, caps);
            for (_, t) in per_order {
                pert.set_term(t)?;
            }
            let spec = MapSpec {
                unperturbed: Unperturbed::Kronecker(kron),
                perturbation: Perturbation::Ft(pert),
                order: doc.order,
                mode: Mode::Float,
            };
            spec.validate()?;
            Ok(spec)
        }
        other => Err(Error::Spec(format!("unknown map kind `{other}`"))),
    }
}

// -------------------------------------------------------------- result files

/// Output of the `represent` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentDoc {
    pub result: String, // "represent"
    pub order: u32,
    pub v: SeriesDoc,
    pub w: SeriesDoc,
}

/// Output of the `normalize` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormalFormDoc {
    pub result: String, // "normalform"
    pub driver: Driver,
    pub order: u32,
    /// Set when the reversible Kronecker path was taken; the W sequence then
    /// equals the perturbation fields themselves.
    pub reversible: bool,
    pub x: SeriesDoc,
    pub z: SeriesDoc,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega_prime: Option<Vec<Vec<OmegaTerm>>>,
}

pub fn omega_to_terms(omega: &[Poly]) -> Vec<Vec<OmegaTerm>> {
    omega
        .iter()
        .map(|p| {
            p.terms()
                .map(|(m, c)| {
                    let (re, im) = coeff_parts(c);
                    OmegaTerm {
                        exponents: m.0.to_vec(),
                        re,
                        im,
                    }
                })
                .collect()
        })
        .collect()
}

// ----------------------------------------------------------------------- CSV

/// Flat CSV rows `series,order,component,key,re,im`; the key column holds
/// the monomial exponents, with the Fourier index prefixed as `k|exponents`
/// for Fourier--Taylor data.
pub fn series_doc_to_csv(label: &str, doc: &SeriesDoc, out: &mut String) {
    for t in &doc.terms {
        let key = match &t.mode {
            Some(k) => format!(
                "{}|{}",
                join_i32(k),
                join_u32(&t.exponents)
            ),
            None => join_u32(&t.exponents),
        };
        let re = part_str(&t.re);
        let im = part_str(&t.im);
        out.push_str(&format!(
            "{label},{},{},{key},{re},{im}\n",
            t.order, t.component
        ));
    }
}

pub const CSV_HEADER: &str = "series,order,component,key,re,im\n";

fn part_str(p: &NumOrStr) -> String {
    match p {
        NumOrStr::Num(x) => {
            let mut buf = ryu_format(*x);
            if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") {
                buf.push_str(".0");
            }
            buf
        }
        NumOrStr::Str(s) => s.clone(),
    }
}

fn ryu_format(x: f64) -> String {
    // serde_json's float formatting, for byte-stable CSV output
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

fn join_u32(v: &[u32]) -> String {
    v.iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn join_i32(v: &[i32]) -> String {
    v.iter()
        .map(i32::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}
