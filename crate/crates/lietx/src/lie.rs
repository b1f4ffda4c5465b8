//! Lie derivative, Lie series, Lie transform and composition-of-Lie-series
//! operators with triangular order-by-order truncation.
//!
//! The operator recursions are written once over two small traits:
//! [`FieldOps`] for single-order vector fields (the generators) and
//! [`LieTarget`] for the graded objects they act on. The `j/s` recursion
//! weights are exact rationals in both arithmetic modes.

use crate::algebra::{FtField, FtScalar, FtTerm, GradedPolyField, HomogeneousPolyField};
use crate::coeff::ratio;
use crate::error::{Error, Result};
use crate::poly::Poly;
use num_rational::BigRational;
use std::collections::BTreeMap;

/// Single-order vector field: the element type of generating sequences.
pub trait FieldOps: Clone + std::fmt::Debug {
    fn order(&self) -> u32;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale_br(&self, w: &BigRational) -> Self;
    fn is_zero(&self) -> bool;
    /// Commutator `{self, v}`; the Lie derivative of a field along `self`.
    fn commutator(&self, v: &Self) -> Self;
    /// Componentwise scalar Lie derivative: the transformation law of
    /// coordinate-map corrections.
    fn scalar_lie(&self, t: &Self) -> Self;
}

impl FieldOps for HomogeneousPolyField {
    fn order(&self) -> u32 {
        self.order()
    }
    fn add(&self, other: &Self) -> Self {
        HomogeneousPolyField::add(self, other)
    }
    fn neg(&self) -> Self {
        HomogeneousPolyField::neg(self)
    }
    fn scale_br(&self, w: &BigRational) -> Self {
        HomogeneousPolyField::scale_br(self, w)
    }
    fn is_zero(&self) -> bool {
        HomogeneousPolyField::is_zero(self)
    }
    fn commutator(&self, v: &Self) -> Self {
        HomogeneousPolyField::commutator(self, v)
    }
    fn scalar_lie(&self, t: &Self) -> Self {
        HomogeneousPolyField::scalar_lie(self, t)
    }
}

impl FieldOps for FtTerm {
    fn order(&self) -> u32 {
        self.order()
    }
    fn add(&self, other: &Self) -> Self {
        FtTerm::add(self, other)
    }
    fn neg(&self) -> Self {
        FtTerm::neg(self)
    }
    fn scale_br(&self, w: &BigRational) -> Self {
        FtTerm::scale_br(self, w)
    }
    fn is_zero(&self) -> bool {
        FtTerm::is_zero(self)
    }
    fn commutator(&self, v: &Self) -> Self {
        FtTerm::commutator(self, v)
    }
    fn scalar_lie(&self, t: &Self) -> Self {
        FtTerm::scalar_lie(self, t)
    }
}

/// Graded object a Lie derivative acts on.
pub trait LieTarget<G: FieldOps>: Clone {
    /// `L_g(self)`, content exact up to the object's own caps.
    fn lie(&self, g: &G) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn scale_br(&self, w: &BigRational) -> Self;
    /// Drop graded content above `max_order` (in the object's own grading).
    fn truncate(&self, max_order: i64) -> Self;
    fn is_zero(&self) -> bool;
}

/// Scalar polynomial series; grading is the total degree.
impl LieTarget<HomogeneousPolyField> for Poly {
    fn lie(&self, g: &HomogeneousPolyField) -> Self {
        g.lie_scalar(self)
    }
    fn add(&self, other: &Self) -> Self {
        Poly::add(self, other)
    }
    fn scale_br(&self, w: &BigRational) -> Self {
        Poly::scale_br(self, w)
    }
    fn truncate(&self, max_order: i64) -> Self {
        if max_order < 0 {
            Poly::zero(self.nvars(), self.mode())
        } else {
            self.truncate_degree(max_order as u32)
        }
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
}

impl LieTarget<HomogeneousPolyField> for GradedPolyField {
    fn lie(&self, g: &HomogeneousPolyField) -> Self {
        let mut out = GradedPolyField::zero(self.dim(), self.max_order(), self.mode());
        for (_, t) in self.terms() {
            out.accumulate(&g.commutator(t));
        }
        out
    }
    fn add(&self, other: &Self) -> Self {
        GradedPolyField::add(self, other)
    }
    fn scale_br(&self, w: &BigRational) -> Self {
        GradedPolyField::scale_br(self, w)
    }
    fn truncate(&self, max_order: i64) -> Self {
        GradedPolyField::truncate(self, max_order)
    }
    fn is_zero(&self) -> bool {
        GradedPolyField::is_zero(self)
    }
}

impl LieTarget<FtTerm> for FtScalar {
    fn lie(&self, g: &FtTerm) -> Self {
        g.lie_scalar(self)
    }
    fn add(&self, other: &Self) -> Self {
        FtScalar::add(self, other)
    }
    fn scale_br(&self, w: &BigRational) -> Self {
        FtScalar::scale_br(self, w)
    }
    fn truncate(&self, max_order: i64) -> Self {
        FtScalar::truncate(self, max_order)
    }
    fn is_zero(&self) -> bool {
        FtScalar::is_zero(self)
    }
}

impl LieTarget<FtTerm> for FtField {
    fn lie(&self, g: &FtTerm) -> Self {
        let mut out = FtField::zero(self.n(), self.m(), self.max_order(), self.mode(), self.caps());
        for (_, t) in self.terms() {
            out.accumulate(&g.commutator(t));
        }
        out
    }
    fn add(&self, other: &Self) -> Self {
        FtField::add(self, other)
    }
    fn scale_br(&self, w: &BigRational) -> Self {
        FtField::scale_br(self, w)
    }
    fn truncate(&self, max_order: i64) -> Self {
        FtField::truncate(self, max_order)
    }
    fn is_zero(&self) -> bool {
        FtField::is_zero(self)
    }
}

/// Generating sequence {X_1, X_2, ...}; the slot at index s-1 holds the
/// order-s element, missing elements are zero fields.
#[derive(Clone, Debug)]
pub struct GenSeq<G: FieldOps> {
    elems: Vec<Option<G>>,
}

impl<G: FieldOps> GenSeq<G> {
    pub fn new(capacity: u32) -> Self {
        GenSeq {
            elems: vec![None; capacity as usize],
        }
    }

    pub fn capacity(&self) -> u32 {
        self.elems.len() as u32
    }

    pub fn get(&self, order: u32) -> Option<&G> {
        if order == 0 || order > self.capacity() {
            return None;
        }
        self.elems[(order - 1) as usize].as_ref()
    }

    pub fn set(&mut self, g: G) -> Result<()> {
        let order = g.order();
        if order == 0 || order > self.capacity() {
            return Err(Error::Grading(format!(
                "sequence element order {order} outside 1..={}",
                self.capacity()
            )));
        }
        self.elems[(order - 1) as usize] = if g.is_zero() { None } else { Some(g) };
        Ok(())
    }

    pub fn from_single(g: G, capacity: u32) -> Result<Self> {
        let mut seq = GenSeq::new(capacity);
        seq.set(g)?;
        Ok(seq)
    }

    pub fn is_zero(&self) -> bool {
        self.elems.iter().all(Option::is_none)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &G)> {
        self.elems
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (i as u32 + 1, g)))
    }

    pub fn neg(&self) -> Self {
        self.map(|g| g.neg())
    }

    pub fn map(&self, f: impl Fn(&G) -> G) -> Self {
        GenSeq {
            elems: self
                .elems
                .iter()
                .map(|e| e.as_ref().map(&f).filter(|g| !g.is_zero()))
                .collect(),
        }
    }
}

/// Lie series `exp(L_g) target` truncated at `cap`; the generator order must
/// be >= 1 so the series terminates by grading.
pub fn exp_lie<G: FieldOps, T: LieTarget<G>>(g: &G, target: &T, cap: i64) -> T {
    assert!(g.order() >= 1, "Lie series generator needs order >= 1");
    let mut acc = target.truncate(cap);
    let mut term = acc.clone();
    let mut p: i64 = 1;
    loop {
        term = term.lie(g).scale_br(&ratio(1, p)).truncate(cap);
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
        p += 1;
        if p > cap.max(1) + 1 {
            break;
        }
    }
    acc
}

/// First `nterms` terms of `exp(L_g) target` without grading-based
/// termination; supports order-zero generators such as linear fields.
pub fn exp_lie_terms<G: FieldOps, T: LieTarget<G>>(g: &G, target: &T, nterms: u32) -> T {
    let mut acc = target.clone();
    let mut term = target.clone();
    for p in 1..=i64::from(nterms) {
        term = term.lie(g).scale_br(&ratio(1, p));
        acc = acc.add(&term);
    }
    acc
}

/// Per-order operator images E_s(target) (or G_s(target)) cached during one
/// computation; extended lazily as higher orders are requested.
#[derive(Clone, Debug)]
pub struct OperatorTrace<T> {
    pub images: Vec<T>,
}

impl<T> OperatorTrace<T> {
    pub fn new(target: T) -> Self {
        OperatorTrace {
            images: vec![target],
        }
    }
}

impl<T: Clone> OperatorTrace<T> {
    /// Extend the E-trace through order `upto` for the given sequence.
    pub fn extend_e<G: FieldOps>(&mut self, seq: &GenSeq<G>, upto: u32, cap: i64)
    where
        T: LieTarget<G>,
    {
        for s in self.images.len()..=upto as usize {
            let mut acc: Option<T> = None;
            for j in 1..=s.min(seq.capacity() as usize) {
                if let Some(xj) = seq.get(j as u32) {
                    let term = self.images[s - j]
                        .lie(xj)
                        .scale_br(&ratio(j as i64, s as i64))
                        .truncate(cap);
                    acc = Some(match acc {
                        Some(a) => a.add(&term),
                        None => term,
                    });
                }
            }
            let image = acc.unwrap_or_else(|| {
                // zero of the right shape
                self.images[0].truncate(-1)
            });
            self.images.push(image);
        }
    }
}

/// Lie transform `T_X target = sum_s E_s target` through order `cap`.
pub fn lie_transform_apply<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    target: &T,
    cap: i64,
) -> T {
    let (out, _) = lie_transform_apply_traced(seq, target, cap);
    out
}

pub fn lie_transform_apply_traced<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    target: &T,
    cap: i64,
) -> (T, OperatorTrace<T>) {
    let mut trace = OperatorTrace::new(target.truncate(cap));
    let upto = cap.max(0) as u32;
    trace.extend_e(seq, upto, cap);
    let mut acc = trace.images[0].clone();
    for s in 1..=upto as usize {
        acc = acc.add(&trace.images[s]);
    }
    (acc, trace)
}

/// `G_s(target)` for the inverse transform: G_0 = 1,
/// G_s = -sum_j (j/s) G_{s-j} L_{X_j}. The operators stand left of the Lie
/// derivatives, so the recursion branches over words of derivatives.
fn g_apply<G: FieldOps, T: LieTarget<G>>(seq: &GenSeq<G>, s: u32, target: &T, cap: i64) -> T {
    if s == 0 {
        return target.truncate(cap);
    }
    let mut acc: Option<T> = None;
    for j in 1..=s.min(seq.capacity()) {
        if let Some(xj) = seq.get(j) {
            let inner = target.lie(xj).truncate(cap);
            if inner.is_zero() {
                continue;
            }
            let sub = g_apply(seq, s - j, &inner, cap)
                .scale_br(&ratio(-i64::from(j), i64::from(s)));
            acc = Some(match acc {
                Some(a) => a.add(&sub),
                None => sub,
            });
        }
    }
    acc.unwrap_or_else(|| target.truncate(-1))
}

/// Inverse Lie transform `T_X^{-1} target` through order `cap`.
pub fn lie_transform_inverse_apply<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    target: &T,
    cap: i64,
) -> T {
    let (out, _) = lie_transform_inverse_apply_traced(seq, target, cap);
    out
}

/// Inverse transform together with the per-order images G_s(target).
pub fn lie_transform_inverse_apply_traced<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    target: &T,
    cap: i64,
) -> (T, OperatorTrace<T>) {
    let mut trace = OperatorTrace::new(target.truncate(cap));
    let mut acc = trace.images[0].clone();
    for s in 1..=cap.max(0) as u32 {
        let img = g_apply(seq, s, target, cap);
        acc = acc.add(&img);
        trace.images.push(img);
    }
    (acc, trace)
}

/// Composition of Lie series applied to a target: exp(L_{X_1}) acts first,
/// exp(L_{X_r}) last.
pub fn compose_lie_series_apply<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    target: &T,
    cap: i64,
    up_to: u32,
) -> T {
    let mut img = target.truncate(cap);
    for r in 1..=up_to.min(seq.capacity()) {
        if let Some(x) = seq.get(r) {
            img = exp_lie(x, &img, cap);
        }
    }
    img
}

/// Same composition with the factors applied in the reverse order:
/// exp(L_{X_r}) acts on the target first. This is the operator of the
/// transformation built by iterated conjugation steps.
pub fn compose_lie_series_apply_rev<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    target: &T,
    cap: i64,
    up_to: u32,
) -> T {
    let mut img = target.truncate(cap);
    for r in (1..=up_to.min(seq.capacity())).rev() {
        if let Some(x) = seq.get(r) {
            img = exp_lie(x, &img, cap);
        }
    }
    img
}

/// Ordered tuples of positive integers summing to `s`.
fn compositions(s: u32) -> Vec<Vec<u32>> {
    if s == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=s {
        for mut rest in compositions(s - first) {
            let mut tuple = vec![first];
            tuple.append(&mut rest);
            out.push(tuple);
        }
    }
    out
}

/// The reordered operator `:E_s:` of the Fasso identity: expand E_s into
/// words of Lie derivatives, sort each word's indices non-increasingly and
/// apply with the smallest index acting on the target first.
pub fn reordered_e<G: FieldOps, T: LieTarget<G>>(
    seq: &GenSeq<G>,
    s: u32,
    target: &T,
    cap: i64,
) -> T {
    let mut acc = if s == 0 {
        return target.truncate(cap);
    } else {
        target.truncate(-1)
    };
    'tuples: for tuple in compositions(s) {
        // weight from the unsorted word: prod_i k_i / (k_i + ... + k_p)
        let mut weight = ratio(1, 1);
        let mut suffix: i64 = tuple.iter().map(|&k| i64::from(k)).sum();
        for &k in &tuple {
            weight *= ratio(i64::from(k), suffix);
            suffix -= i64::from(k);
        }
        let mut word = tuple.clone();
        word.sort_unstable_by(|a, b| b.cmp(a));
        // apply right-to-left: the last (smallest) index hits the target first
        let mut img = target.truncate(cap);
        for &k in word.iter().rev() {
            match seq.get(k) {
                Some(x) => img = img.lie(x).truncate(cap),
                None => continue 'tuples,
            }
            if img.is_zero() {
                continue 'tuples;
            }
        }
        acc = acc.add(&img.scale_br(&weight));
    }
    acc
}

/// Near-identity coordinate map stored as its graded corrections; the
/// identity part is implicit.
#[derive(Clone, Debug)]
pub struct CoordSeries<G: FieldOps> {
    pieces: BTreeMap<u32, G>,
}

impl<G: FieldOps> Default for CoordSeries<G> {
    fn default() -> Self {
        CoordSeries {
            pieces: BTreeMap::new(),
        }
    }
}

impl<G: FieldOps> CoordSeries<G> {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn piece(&self, s: u32) -> Option<&G> {
        self.pieces.get(&s)
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&u32, &G)> {
        self.pieces.iter()
    }

    pub fn max_piece_order(&self) -> u32 {
        self.pieces.keys().next_back().copied().unwrap_or(0)
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn accumulate(&mut self, g: G) {
        if g.is_zero() {
            return;
        }
        let s = g.order();
        let merged = match self.pieces.get(&s) {
            Some(t) => t.add(&g),
            None => g,
        };
        if merged.is_zero() {
            self.pieces.remove(&s);
        } else {
            self.pieces.insert(s, merged);
        }
    }

    pub fn set_piece(&mut self, g: G) -> Result<()> {
        if g.order() == 0 {
            return Err(Error::Grading("coordinate corrections start at order 1".into()));
        }
        if g.is_zero() {
            self.pieces.remove(&g.order());
        } else {
            self.pieces.insert(g.order(), g);
        }
        Ok(())
    }

    /// Corrections of `self` plus corrections of `other` (identities merge).
    pub fn add_corrections(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for g in other.pieces.values() {
            out.accumulate(g.clone());
        }
        out
    }

    /// Correction difference (map minus map, identity cancels).
    pub fn sub_corrections(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for g in other.pieces.values() {
            out.accumulate(g.neg());
        }
        out
    }

    pub fn truncate(&self, max_order: i64) -> Self {
        let mut out = CoordSeries::identity();
        for (s, g) in self.pieces.iter() {
            if i64::from(*s) <= max_order {
                out.accumulate(g.clone());
            }
        }
        out
    }

    /// Componentwise scalar Lie derivative of the corrections only.
    fn scalar_lie_all(&self, g: &G, cap: i64) -> Self {
        let mut out = CoordSeries::identity();
        for (s, c) in self.pieces.iter() {
            if i64::from(s + g.order()) <= cap {
                out.accumulate(g.scalar_lie(c));
            }
        }
        out
    }

    /// `exp(L_g)` applied to this coordinate map, truncated at `cap`.
    /// The identity part contributes the chain starting at `g` itself.
    pub fn exp_by(&self, g: &G, cap: i64) -> Self {
        assert!(g.order() >= 1);
        let mut out = self.truncate(cap);
        // t_1 = L_g(id + C) = g + L_g C; t_p = L_g t_{p-1} / p
        let mut t = self.scalar_lie_all(g, cap);
        if i64::from(g.order()) <= cap {
            t.accumulate(g.clone());
        }
        let mut p: i64 = 1;
        while !t.is_identity() {
            out = out.add_corrections(&t);
            p += 1;
            t = t.scalar_lie_all_self(g, cap).scale_br(&ratio(1, p));
            if p > cap.max(1) + 1 {
                break;
            }
        }
        out
    }

    fn scalar_lie_all_self(&self, g: &G, cap: i64) -> Self {
        self.scalar_lie_all(g, cap)
    }

    pub fn scale_br(&self, w: &BigRational) -> Self {
        let mut out = CoordSeries::identity();
        for g in self.pieces.values() {
            out.accumulate(g.scale_br(w));
        }
        out
    }

    pub fn neg_corrections(&self) -> Self {
        let mut out = CoordSeries::identity();
        for g in self.pieces.values() {
            out.accumulate(g.neg());
        }
        out
    }
}

/// E_s applied to the coordinates for s = 0..=upto; entry s is the order-s
/// correction field (entry 0 is None, standing for the identity).
pub fn coords_e_trace<G: FieldOps>(seq: &GenSeq<G>, upto: u32) -> Vec<Option<G>> {
    let mut images: Vec<Option<G>> = vec![None];
    for s in 1..=upto {
        // E_s x = X_s + sum_{j<s} (j/s) L_{X_j} (E_{s-j} x)
        let mut acc: Option<G> = seq.get(s).cloned();
        for j in 1..s {
            if let (Some(xj), Some(c)) = (seq.get(j), images[(s - j) as usize].as_ref()) {
                let term = xj
                    .scalar_lie(c)
                    .scale_br(&ratio(i64::from(j), i64::from(s)));
                acc = Some(match acc {
                    Some(a) => a.add(&term),
                    None => term,
                });
            }
        }
        images.push(acc.filter(|g| !g.is_zero()));
    }
    images
}

/// Coordinate image of the Lie transform: `y = T_X x` as a near-identity map.
pub fn lie_transform_coords<G: FieldOps>(seq: &GenSeq<G>, cap: u32) -> CoordSeries<G> {
    let trace = coords_e_trace(seq, cap);
    let mut out = CoordSeries::identity();
    for img in trace.into_iter().flatten() {
        out.accumulate(img);
    }
    out
}

fn g_apply_scalar<G: FieldOps>(seq: &GenSeq<G>, s: u32, target: &G, cap: u32) -> Option<G> {
    if s == 0 {
        return Some(target.clone());
    }
    let mut acc: Option<G> = None;
    for j in 1..=s.min(seq.capacity()) {
        if let Some(xj) = seq.get(j) {
            let inner = xj.scalar_lie(target);
            if inner.is_zero() || inner.order() > cap {
                continue;
            }
            if let Some(sub) = g_apply_scalar(seq, s - j, &inner, cap) {
                let sub = sub.scale_br(&ratio(-i64::from(j), i64::from(s)));
                acc = Some(match acc {
                    Some(a) => a.add(&sub),
                    None => sub,
                });
            }
        }
    }
    acc.filter(|g| !g.is_zero())
}

/// Coordinate image of the inverse Lie transform `x = T_X^{-1} y`.
pub fn lie_transform_inverse_coords<G: FieldOps>(seq: &GenSeq<G>, cap: u32) -> CoordSeries<G> {
    let mut out = CoordSeries::identity();
    for s in 1..=cap {
        // G_s x = -sum_j (j/s) G_{s-j} (L_{X_j} x) = -sum_j (j/s) G_{s-j} X_j
        let mut acc: Option<G> = None;
        for j in 1..=s.min(seq.capacity()) {
            if let Some(xj) = seq.get(j) {
                if let Some(sub) = g_apply_scalar(seq, s - j, xj, cap) {
                    let sub = sub.scale_br(&ratio(-i64::from(j), i64::from(s)));
                    acc = Some(match acc {
                        Some(a) => a.add(&sub),
                        None => sub,
                    });
                }
            }
        }
        if let Some(g) = acc {
            out.accumulate(g);
        }
    }
    out
}

/// Apply `T_seq` to an existing coordinate map (componentwise, scalar
/// action): the operator form of composing the two transformations.
pub fn lie_transform_apply_map<G: FieldOps>(
    seq: &GenSeq<G>,
    map: &CoordSeries<G>,
    cap: u32,
) -> CoordSeries<G> {
    // T(id + C) = T(id) + sum_s E_s(C)
    let mut out = lie_transform_coords(seq, cap);
    // E-trace on the pure corrections
    let mut images: Vec<CoordSeries<G>> = vec![map.truncate(i64::from(cap))];
    for s in 1..=cap {
        let mut acc = CoordSeries::identity();
        for j in 1..=s.min(seq.capacity()) {
            if let Some(xj) = seq.get(j) {
                let term = images[(s - j) as usize]
                    .scalar_lie_all(xj, i64::from(cap))
                    .scale_br(&ratio(i64::from(j), i64::from(s)));
                acc = acc.add_corrections(&term);
            }
        }
        images.push(acc);
    }
    for img in images {
        out = out.add_corrections(&img);
    }
    out
}

/// Coordinate image of the composition of Lie series.
/// `reversed = false` follows the written order (exp(L_{X_1}) innermost on
/// the coordinate functions); `reversed = true` applies exp(L_{X_r}) with the
/// largest r innermost, the operator produced by iterated conjugation.
pub fn compose_lie_series_coords<G: FieldOps>(
    seq: &GenSeq<G>,
    cap: u32,
    up_to: u32,
    reversed: bool,
) -> CoordSeries<G> {
    let mut img = CoordSeries::identity();
    // exp_by applies its factor to the current component functions, so the
    // factor meant to act on the coordinates first must be applied first.
    let orders: Vec<u32> = if reversed {
        (1..=up_to.min(seq.capacity())).rev().collect()
    } else {
        (1..=up_to.min(seq.capacity())).collect()
    };
    for r in orders {
        if let Some(x) = seq.get(r) {
            img = img.exp_by(x, i64::from(cap));
        }
    }
    img
}
