//! Sparse multivariate polynomials over [`Coeff`].
//!
//! The same type serves the power-series components of vector fields on C^n
//! and the action-polynomial coefficients of Fourier sums. Terms are kept in
//! a `BTreeMap` ordered by (total degree, exponents) so iteration order, and
//! therefore every downstream serialization, is deterministic.

use crate::coeff::{Coeff, Mode};
use num_complex::Complex64;
use num_rational::BigRational;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mono(pub Box<[u32]>);

impl Mono {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn unit(nvars: usize, var: usize) -> Self {
        let mut e = vec![0u32; nvars];
        e[var] = 1;
        Mono(e.into_boxed_slice())
    }

    pub fn constant(nvars: usize) -> Self {
        Mono(vec![0u32; nvars].into_boxed_slice())
    }

    fn mul(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    mode: Mode,
    terms: BTreeMap<Mono, Coeff>,
}

impl Poly {
    pub fn zero(nvars: usize, mode: Mode) -> Self {
        Poly {
            nvars,
            mode,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Coeff) -> Self {
        let mode = c.mode();
        let mut p = Poly::zero(nvars, mode);
        p.add_term(Mono::constant(nvars), c);
        p
    }

    pub fn monomial(nvars: usize, exps: &[u32], c: Coeff) -> Self {
        assert_eq!(exps.len(), nvars, "exponent vector length mismatch");
        let mode = c.mode();
        let mut p = Poly::zero(nvars, mode);
        p.add_term(Mono(exps.to_vec().into_boxed_slice()), c);
        p
    }

    /// The coordinate polynomial `x_var`.
    pub fn var(nvars: usize, var: usize, mode: Mode) -> Self {
        let mut p = Poly::zero(nvars, mode);
        p.add_term(Mono::unit(nvars, var), Coeff::one(mode));
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Coeff)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> Coeff {
        self.terms
            .get(&Mono(exps.to_vec().into_boxed_slice()))
            .cloned()
            .unwrap_or_else(|| Coeff::zero(self.mode))
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(|m| m.degree())
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().next().map(|m| m.degree())
    }

    /// Accumulate a term, dropping the entry on exact cancellation or
    /// negligible float remainder.
    pub fn add_term(&mut self, m: Mono, c: Coeff) {
        debug_assert_eq!(m.0.len(), self.nvars);
        debug_assert_eq!(c.mode(), self.mode, "mixed-mode polynomial term");
        if c.is_negligible() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_negligible() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars, "dimension mismatch");
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        self.map_coeffs(|c| c.neg())
    }

    pub fn scale(&self, c: &Coeff) -> Poly {
        if c.is_exact_zero() {
            return Poly::zero(self.nvars, self.mode);
        }
        self.map_coeffs(|x| x.mul(c))
    }

    pub fn scale_br(&self, w: &BigRational) -> Poly {
        self.map_coeffs(|x| x.scale_br(w))
    }

    pub fn conj(&self) -> Poly {
        self.map_coeffs(|x| x.conj())
    }

    /// Keep the real part of every coefficient.
    pub fn map_real(&self) -> Poly {
        self.map_coeffs(|x| x.real_part())
    }

    fn map_coeffs(&self, f: impl Fn(&Coeff) -> Coeff) -> Poly {
        let mut out = Poly::zero(self.nvars, self.mode);
        for (m, c) in self.terms.iter() {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Product, keeping only result terms of total degree <= `cap`.
    pub fn mul(&self, other: &Poly, cap: Option<u32>) -> Poly {
        assert_eq!(self.nvars, other.nvars, "dimension mismatch");
        let mut out = Poly::zero(self.nvars, self.mode);
        for (ma, ca) in self.terms.iter() {
            let da = ma.degree();
            for (mb, cb) in other.terms.iter() {
                if let Some(cap) = cap {
                    if da + mb.degree() > cap {
                        continue;
                    }
                }
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
        out
    }

    pub fn partial(&self, var: usize) -> Poly {
        assert!(var < self.nvars);
        let mut out = Poly::zero(self.nvars, self.mode);
        for (m, c) in self.terms.iter() {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.to_vec();
            exps[var] = e - 1;
            out.add_term(
                Mono(exps.into_boxed_slice()),
                c.scale_br(&BigRational::from_integer(e.into())),
            );
        }
        out
    }

    pub fn truncate_degree(&self, cap: u32) -> Poly {
        let mut out = Poly::zero(self.nvars, self.mode);
        for (m, c) in self.terms.iter() {
            if m.degree() <= cap {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn homogeneous_part(&self, degree: u32) -> Poly {
        let mut out = Poly::zero(self.nvars, self.mode);
        for (m, c) in self.terms.iter() {
            if m.degree() == degree {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn is_homogeneous(&self, degree: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == degree)
    }

    pub fn evaluate(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.nvars, "dimension mismatch");
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in self.terms.iter() {
            let mut t = c.to_c64();
            for (x, &e) in point.iter().zip(m.0.iter()) {
                t *= x.powu(e);
            }
            acc += t;
        }
        acc
    }

    /// Substitute `subs[l]` for variable `l`, truncating at total degree
    /// `cap`. All substituents must share `self`'s variable count.
    pub fn compose(&self, subs: &[Poly], cap: u32) -> Poly {
        assert_eq!(subs.len(), self.nvars, "substitution arity mismatch");
        let out_vars = subs.first().map_or(self.nvars, |p| p.nvars);
        let mut out = Poly::zero(out_vars, self.mode);
        // Cache powers per variable as needed.
        let mut powers: Vec<Vec<Poly>> = subs
            .iter()
            .map(|p| vec![Poly::constant(out_vars, Coeff::one(self.mode)), p.clone()])
            .collect();
        for (m, c) in self.terms.iter() {
            let mut t = Poly::constant(out_vars, c.clone());
            for (l, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[l].len() <= e as usize {
                    let last = powers[l].last().unwrap();
                    let next = last.mul(&subs[l], Some(cap));
                    powers[l].push(next);
                }
                t = t.mul(&powers[l][e as usize], Some(cap));
                if t.is_zero() {
                    break;
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Largest coefficient modulus, for float-mode comparisons.
    pub fn max_coeff_modulus(&self) -> f64 {
        self.terms.values().map(|c| c.modulus()).fold(0.0, f64::max)
    }
}
