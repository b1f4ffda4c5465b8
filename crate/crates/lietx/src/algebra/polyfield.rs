//! Polynomial vector fields on C^n, graded by perturbation order.
//!
//! A field of order `s` has homogeneous polynomial components of degree
//! `s + 1`, so that the Lie derivative along an order-`r` field shifts order
//! by exactly `r`.

use crate::coeff::{Coeff, Mode};
use crate::error::{Error, Result};
use crate::poly::Poly;
use num_complex::Complex64;
use num_rational::BigRational;
use std::collections::BTreeMap;

/// Vector field with homogeneous components of a single degree.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousPolyField {
    dim: usize,
    degree: u32,
    mode: Mode,
    comps: Vec<Poly>,
}

impl HomogeneousPolyField {
    pub fn zero(dim: usize, degree: u32, mode: Mode) -> Self {
        assert!(degree >= 1, "polynomial fields start at degree 1");
        HomogeneousPolyField {
            dim,
            degree,
            mode,
            comps: vec![Poly::zero(dim, mode); dim],
        }
    }

    /// Field `c * x^exps e_component`.
    pub fn monomial(dim: usize, component: usize, exps: &[u32], c: Coeff) -> Result<Self> {
        if exps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: exps.len(),
            });
        }
        let degree: u32 = exps.iter().sum();
        if degree < 1 {
            return Err(Error::Grading("field monomials need degree >= 1".into()));
        }
        let mut f = HomogeneousPolyField::zero(dim, degree, c.mode());
        f.comps[component] = Poly::monomial(dim, exps, c);
        Ok(f)
    }

    /// Wrap components, checking homogeneity.
    pub fn from_components(degree: u32, comps: Vec<Poly>, mode: Mode) -> Result<Self> {
        let dim = comps.len();
        for p in &comps {
            if !p.is_homogeneous(degree) {
                return Err(Error::Grading(format!(
                    "component is not homogeneous of degree {degree}"
                )));
            }
        }
        Ok(HomogeneousPolyField {
            dim,
            degree,
            mode,
            comps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Perturbation order: degree minus one.
    pub fn order(&self) -> u32 {
        self.degree - 1
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn component(&self, j: usize) -> &Poly {
        &self.comps[j]
    }

    pub fn components(&self) -> &[Poly] {
        &self.comps
    }

    pub fn set_component(&mut self, j: usize, p: Poly) {
        assert!(p.is_homogeneous(self.degree), "grading violation");
        self.comps[j] = p;
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.degree, other.degree, "grading mismatch");
        HomogeneousPolyField {
            dim: self.dim,
            degree: self.degree,
            mode: self.mode,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|p| p.neg())
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        self.map(|p| p.scale(c))
    }

    pub fn scale_br(&self, w: &BigRational) -> Self {
        self.map(|p| p.scale_br(w))
    }

    fn map(&self, f: impl Fn(&Poly) -> Poly) -> Self {
        HomogeneousPolyField {
            dim: self.dim,
            degree: self.degree,
            mode: self.mode,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    /// Commutator `{self, v}_j = sum_l (self_l d v_j/dx_l - v_l d self_j/dx_l)`.
    /// Homogeneous degrees (d1, d2) combine to degree d1 + d2 - 1.
    pub fn commutator(&self, v: &Self) -> Self {
        assert_eq!(self.dim, v.dim, "dimension mismatch");
        let degree = self.degree + v.degree - 1;
        let mut out = HomogeneousPolyField::zero(self.dim, degree, self.mode);
        for j in 0..self.dim {
            let mut acc = Poly::zero(self.dim, self.mode);
            for l in 0..self.dim {
                acc = acc.add(&self.comps[l].mul(&v.comps[j].partial(l), None));
                acc = acc.add(&v.comps[l].mul(&self.comps[j].partial(l), None).neg());
            }
            out.comps[j] = acc;
        }
        out
    }

    /// Componentwise scalar Lie derivative `(L_self t)_j = L_self(t_j)`.
    /// This is the transformation law of coordinate-map corrections, not of
    /// vector fields.
    pub fn scalar_lie(&self, t: &Self) -> Self {
        assert_eq!(self.dim, t.dim, "dimension mismatch");
        let degree = self.degree + t.degree - 1;
        let mut out = HomogeneousPolyField::zero(self.dim, degree, self.mode);
        for j in 0..self.dim {
            out.comps[j] = self.lie_scalar(&t.comps[j]);
        }
        out
    }

    /// Scalar Lie derivative `L_self f = sum_l self_l df/dx_l`.
    pub fn lie_scalar(&self, f: &Poly) -> Poly {
        assert_eq!(f.nvars(), self.dim, "dimension mismatch");
        let mut acc = Poly::zero(self.dim, self.mode);
        for l in 0..self.dim {
            acc = acc.add(&self.comps[l].mul(&f.partial(l), None));
        }
        acc
    }

    pub fn evaluate(&self, point: &[Complex64]) -> Vec<Complex64> {
        self.comps.iter().map(|p| p.evaluate(point)).collect()
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.comps
            .iter()
            .map(Poly::max_coeff_modulus)
            .fold(0.0, f64::max)
    }
}

/// Sum of homogeneous fields indexed by perturbation order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedPolyField {
    dim: usize,
    mode: Mode,
    max_order: u32,
    terms: BTreeMap<u32, HomogeneousPolyField>,
}

impl GradedPolyField {
    pub fn zero(dim: usize, max_order: u32, mode: Mode) -> Self {
        GradedPolyField {
            dim,
            mode,
            max_order,
            terms: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn term(&self, order: u32) -> Option<&HomogeneousPolyField> {
        self.terms.get(&order)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&u32, &HomogeneousPolyField)> {
        self.terms.iter()
    }

    pub fn set_term(&mut self, f: HomogeneousPolyField) -> Result<()> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.dim(),
            });
        }
        let order = f.order();
        if order > self.max_order {
            return Err(Error::Grading(format!(
                "order {order} exceeds max order {}",
                self.max_order
            )));
        }
        if f.is_zero() {
            self.terms.remove(&order);
        } else {
            self.terms.insert(order, f);
        }
        Ok(())
    }

    pub fn accumulate(&mut self, f: &HomogeneousPolyField) {
        if f.order() > self.max_order || f.is_zero() {
            return;
        }
        let merged = match self.terms.get(&f.order()) {
            Some(t) => t.add(f),
            None => f.clone(),
        };
        if merged.is_zero() {
            self.terms.remove(&f.order());
        } else {
            self.terms.insert(f.order(), merged);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficientwise sum, truncated to the smaller capacity.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let max_order = self.max_order.min(other.max_order);
        let mut out = GradedPolyField::zero(self.dim, max_order, self.mode);
        for (_, f) in self.terms.iter().filter(|(s, _)| **s <= max_order) {
            out.accumulate(f);
        }
        for (_, f) in other.terms.iter().filter(|(s, _)| **s <= max_order) {
            out.accumulate(f);
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = GradedPolyField::zero(self.dim, self.max_order, self.mode);
        for f in self.terms.values() {
            out.accumulate(&f.neg());
        }
        out
    }

    pub fn scale_br(&self, w: &BigRational) -> Self {
        let mut out = GradedPolyField::zero(self.dim, self.max_order, self.mode);
        for f in self.terms.values() {
            out.accumulate(&f.scale_br(w));
        }
        out
    }

    /// Drop terms above `max_order`; the storage capacity is unchanged.
    pub fn truncate(&self, max_order: i64) -> Self {
        let mut out = GradedPolyField::zero(self.dim, self.max_order, self.mode);
        for (s, f) in self.terms.iter() {
            if i64::from(*s) <= max_order {
                out.accumulate(f);
            }
        }
        out
    }

    /// Commutator order by order, truncated at the capacity.
    pub fn commutator(&self, v: &Self) -> Self {
        assert_eq!(self.dim, v.dim, "dimension mismatch");
        let max_order = self.max_order.min(v.max_order);
        let mut out = GradedPolyField::zero(self.dim, max_order, self.mode);
        for (sa, fa) in self.terms.iter() {
            for (sb, fb) in v.terms.iter() {
                if sa + sb <= max_order {
                    out.accumulate(&fa.commutator(fb));
                }
            }
        }
        out
    }

    pub fn evaluate(&self, point: &[Complex64]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.dim];
        for f in self.terms.values() {
            for (a, v) in acc.iter_mut().zip(f.evaluate(point)) {
                *a += v;
            }
        }
        acc
    }

    pub fn from_single(f: HomogeneousPolyField, max_order: u32) -> Self {
        let mut g = GradedPolyField::zero(f.dim(), max_order, f.mode());
        g.accumulate(&f);
        g
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.terms
            .values()
            .map(HomogeneousPolyField::max_coeff_modulus)
            .fold(0.0, f64::max)
    }
}
