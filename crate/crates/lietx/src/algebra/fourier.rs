//! Fourier–Taylor series on T^n x G, G an open action domain in R^m.
//!
//! Values are finite Fourier sums in the angles whose coefficients are
//! polynomials in the actions, graded by an explicit perturbation order. At
//! order `s` the Fourier support is capped at `|k|_1 <= s * K1` (products of
//! trigonometric polynomials widen support linearly, so the cap is stable
//! under the algebra); content dropped by a cap is counted in `dropped`.

use crate::coeff::{Coeff, Mode};
use crate::error::{Error, Result};
use crate::poly::Poly;
use num_complex::Complex64;
use num_rational::BigRational;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Fourier index k in Z^n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeKey(pub Box<[i32]>);

impl ModeKey {
    pub fn l1(&self) -> u32 {
        self.0.iter().map(|k| k.unsigned_abs()).sum()
    }

    pub fn zero(n: usize) -> Self {
        ModeKey(vec![0i32; n].into_boxed_slice())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    pub fn neg(&self) -> Self {
        ModeKey(self.0.iter().map(|k| -k).collect())
    }

    pub fn add(&self, other: &ModeKey) -> ModeKey {
        ModeKey(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for ModeKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.l1()
            .cmp(&other.l1())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for ModeKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Truncation policy: order-s content keeps `|k|_1 <= s * k1` and action
/// degrees `<= action_cap`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FtCaps {
    pub k1: u32,
    pub action_cap: u32,
}

impl FtCaps {
    pub fn kcap(&self, order: u32) -> u32 {
        order.saturating_mul(self.k1)
    }
}

/// One perturbation order of a scalar Fourier--Taylor function.
#[derive(Clone, Debug, PartialEq)]
pub struct FtSlice {
    n: usize,
    m: usize,
    mode: Mode,
    modes: BTreeMap<ModeKey, Poly>,
}

impl FtSlice {
    pub fn zero(n: usize, m: usize, mode: Mode) -> Self {
        FtSlice {
            n,
            m,
            mode,
            modes: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeKey, &Poly)> {
        self.modes.iter()
    }

    pub fn mode_coeff(&self, k: &ModeKey) -> Option<&Poly> {
        self.modes.get(k)
    }

    pub fn accumulate(&mut self, k: ModeKey, p: Poly) {
        debug_assert_eq!(k.0.len(), self.n);
        debug_assert_eq!(p.nvars(), self.m);
        if p.is_zero() {
            return;
        }
        let merged = match self.modes.get(&k) {
            Some(q) => q.add(&p),
            None => p,
        };
        if merged.is_zero() {
            self.modes.remove(&k);
        } else {
            self.modes.insert(k, merged);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n, self.m), (other.n, other.m), "dimension mismatch");
        let mut out = self.clone();
        for (k, p) in other.modes.iter() {
            out.accumulate(k.clone(), p.clone());
        }
        out
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

    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> Self {
        let mut out = FtSlice::zero(self.n, self.m, self.mode);
        for (k, p) in self.modes.iter() {
            let q = f(p);
            if !q.is_zero() {
                out.accumulate(k.clone(), q);
            }
        }
        out
    }

    /// Map that can also inspect the mode index.
    pub fn mode_map(&self, f: impl Fn(&ModeKey, &Poly) -> Poly) -> Self {
        let mut out = FtSlice::zero(self.n, self.m, self.mode);
        for (k, p) in self.modes.iter() {
            let q = f(k, p);
            if !q.is_zero() {
                out.accumulate(k.clone(), q);
            }
        }
        out
    }

    /// d/dphi_j: multiplies mode k by i*k_j.
    pub fn dphi(&self, j: usize) -> Self {
        assert!(j < self.n);
        let mut out = FtSlice::zero(self.n, self.m, self.mode);
        for (k, p) in self.modes.iter() {
            let kj = k.0[j];
            if kj == 0 {
                continue;
            }
            let factor = Coeff::from_int(i64::from(kj), self.mode).mul_i();
            out.accumulate(k.clone(), p.scale(&factor));
        }
        out
    }

    /// d/dI_l on the action polynomials.
    pub fn di(&self, l: usize) -> Self {
        self.map(|p| p.partial(l))
    }

    /// Product with Fourier and action-degree caps; dropped content is
    /// counted into `dropped`.
    pub fn mul(&self, other: &Self, kcap: u32, action_cap: u32, dropped: &mut u64) -> Self {
        assert_eq!((self.n, self.m), (other.n, other.m), "dimension mismatch");
        let mut out = FtSlice::zero(self.n, self.m, self.mode);
        for (ka, pa) in self.modes.iter() {
            for (kb, pb) in other.modes.iter() {
                let k = ka.add(kb);
                if k.l1() > kcap {
                    *dropped += 1;
                    continue;
                }
                let full = pa.mul(pb, None);
                let kept = full.truncate_degree(action_cap);
                *dropped += (full.num_terms() - kept.num_terms()) as u64;
                if !kept.is_zero() {
                    out.accumulate(k, kept);
                }
            }
        }
        out
    }

    pub fn truncate_modes(&self, kcap: u32, dropped: &mut u64) -> Self {
        let mut out = FtSlice::zero(self.n, self.m, self.mode);
        for (k, p) in self.modes.iter() {
            if k.l1() > kcap {
                *dropped += 1;
            } else {
                out.accumulate(k.clone(), p.clone());
            }
        }
        out
    }

    pub fn k0(&self) -> Option<&Poly> {
        self.modes.get(&ModeKey::zero(self.n))
    }

    pub fn evaluate(&self, angles: &[f64], actions: &[f64]) -> Complex64 {
        assert_eq!(angles.len(), self.n, "angle dimension mismatch");
        assert_eq!(actions.len(), self.m, "action dimension mismatch");
        let pt: Vec<Complex64> = actions.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, p) in self.modes.iter() {
            let phase: f64 = k
                .0
                .iter()
                .zip(angles.iter())
                .map(|(&kj, &phi)| f64::from(kj) * phi)
                .sum();
            acc += p.evaluate(&pt) * Complex64::new(0.0, phase).exp();
        }
        acc
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.modes
            .values()
            .map(Poly::max_coeff_modulus)
            .fold(0.0, f64::max)
    }

    /// Max deviation from the reality condition c_{-k} = conj(c_k).
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, p) in self.modes.iter() {
            let mirrored = match self.modes.get(&k.neg()) {
                Some(q) => q.conj(),
                None => Poly::zero(self.m, self.mode),
            };
            worst = worst.max(p.sub(&mirrored).max_coeff_modulus());
        }
        worst
    }

    /// Max deviation from c_{-k} = sign * c_k (sign = +1: even in the
    /// angles, sign = -1: odd).
    pub fn parity_defect(&self, sign: i64) -> f64 {
        let mut worst = 0.0f64;
        for (k, p) in self.modes.iter() {
            let mirrored = match self.modes.get(&k.neg()) {
                Some(q) => q.clone(),
                None => Poly::zero(self.m, self.mode),
            };
            let target = p.scale(&Coeff::from_int(sign, self.mode));
            worst = worst.max(target.sub(&mirrored).max_coeff_modulus());
        }
        worst
    }
}

/// Scalar Fourier--Taylor series graded by perturbation order.
#[derive(Clone, Debug, PartialEq)]
pub struct FtScalar {
    n: usize,
    m: usize,
    mode: Mode,
    caps: FtCaps,
    pub dropped: u64,
    orders: BTreeMap<u32, FtSlice>,
}

impl FtScalar {
    pub fn zero(n: usize, m: usize, mode: Mode, caps: FtCaps) -> Self {
        FtScalar {
            n,
            m,
            mode,
            caps,
            dropped: 0,
            orders: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn caps(&self) -> FtCaps {
        self.caps
    }

    pub fn orders(&self) -> impl Iterator<Item = (&u32, &FtSlice)> {
        self.orders.iter()
    }

    pub fn term(&self, s: u32) -> Option<&FtSlice> {
        self.orders.get(&s)
    }

    pub fn is_zero(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn accumulate(&mut self, s: u32, slice: FtSlice) {
        if slice.is_zero() {
            return;
        }
        let mut dropped = 0;
        let capped = slice.truncate_modes(self.caps.kcap(s), &mut dropped);
        self.dropped += dropped;
        if capped.is_zero() {
            return;
        }
        let merged = match self.orders.get(&s) {
            Some(t) => t.add(&capped),
            None => capped,
        };
        if merged.is_zero() {
            self.orders.remove(&s);
        } else {
            self.orders.insert(s, merged);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n, self.m), (other.n, other.m), "dimension mismatch");
        let mut out = self.clone();
        out.dropped += other.dropped;
        for (s, slice) in other.orders.iter() {
            out.accumulate(*s, slice.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.map_slices(|sl| sl.neg())
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        self.map_slices(|sl| sl.scale(c))
    }

    pub fn scale_br(&self, w: &BigRational) -> Self {
        self.map_slices(|sl| sl.scale_br(w))
    }

    fn map_slices(&self, f: impl Fn(&FtSlice) -> FtSlice) -> Self {
        let mut out = FtScalar::zero(self.n, self.m, self.mode, self.caps);
        out.dropped = self.dropped;
        for (s, slice) in self.orders.iter() {
            out.accumulate(*s, f(slice));
        }
        out
    }

    pub fn truncate(&self, max_order: i64) -> Self {
        let mut out = FtScalar::zero(self.n, self.m, self.mode, self.caps);
        out.dropped = self.dropped;
        for (s, slice) in self.orders.iter() {
            if i64::from(*s) <= max_order {
                out.accumulate(*s, slice.clone());
            }
        }
        out
    }

    /// Product, orders adding, capped by the policy.
    pub fn mul(&self, other: &Self, max_order: u32) -> Self {
        assert_eq!((self.n, self.m), (other.n, other.m), "dimension mismatch");
        let mut out = FtScalar::zero(self.n, self.m, self.mode, self.caps);
        out.dropped = self.dropped + other.dropped;
        for (sa, a) in self.orders.iter() {
            for (sb, b) in other.orders.iter() {
                let s = sa + sb;
                if s > max_order {
                    continue;
                }
                let mut dropped = 0;
                let prod = a.mul(b, self.caps.kcap(s), self.caps.action_cap, &mut dropped);
                out.dropped += dropped;
                out.accumulate(s, prod);
            }
        }
        out
    }

    pub fn evaluate(&self, angles: &[f64], actions: &[f64]) -> Complex64 {
        self.orders
            .values()
            .map(|sl| sl.evaluate(angles, actions))
            .sum()
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.orders
            .values()
            .map(FtSlice::max_coeff_modulus)
            .fold(0.0, f64::max)
    }

    pub fn from_slice(s: u32, slice: FtSlice, caps: FtCaps) -> Self {
        let mut out = FtScalar::zero(slice.n, slice.m, slice.mode, caps);
        out.accumulate(s, slice);
        out
    }

    /// Multiply by the pure phase e^{i<k, φ>}: every mode shifts by k.
    pub fn mode_shift(&self, k: &ModeKey) -> Self {
        let mut out = FtScalar::zero(self.n, self.m, self.mode, self.caps);
        out.dropped = self.dropped;
        for (s, slice) in self.orders.iter() {
            let mut shifted = FtSlice::zero(self.n, self.m, self.mode);
            for (k0, p) in slice.modes() {
                shifted.accumulate(k0.add(k), p.clone());
            }
            out.accumulate(*s, shifted);
        }
        out
    }

    /// The constant 1 at order 0.
    pub fn one(n: usize, m: usize, mode: Mode, caps: FtCaps) -> Self {
        let mut slice = FtSlice::zero(n, m, mode);
        slice.accumulate(ModeKey::zero(n), Poly::constant(m, Coeff::one(mode)));
        FtScalar::from_slice(0, slice, caps)
    }
}

/// Vector field on T^n x G at a single perturbation order: n angle
/// components and m action components.
#[derive(Clone, Debug, PartialEq)]
pub struct FtTerm {
    n: usize,
    m: usize,
    order: u32,
    mode: Mode,
    caps: FtCaps,
    pub dropped: u64,
    angle: Vec<FtSlice>,
    action: Vec<FtSlice>,
}

impl FtTerm {
    pub fn zero(n: usize, m: usize, order: u32, mode: Mode, caps: FtCaps) -> Self {
        assert!(order >= 1, "field terms start at order 1");
        FtTerm {
            n,
            m,
            order,
            mode,
            caps,
            dropped: 0,
            angle: vec![FtSlice::zero(n, m, mode); n],
            action: vec![FtSlice::zero(n, m, mode); m],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn caps(&self) -> FtCaps {
        self.caps
    }

    pub fn angle_comp(&self, j: usize) -> &FtSlice {
        &self.angle[j]
    }

    pub fn action_comp(&self, l: usize) -> &FtSlice {
        &self.action[l]
    }

    /// Combined component access: 0..n angles, then n..n+m actions.
    pub fn comp(&self, c: usize) -> &FtSlice {
        if c < self.n {
            &self.angle[c]
        } else {
            &self.action[c - self.n]
        }
    }

    pub fn set_angle(&mut self, j: usize, slice: FtSlice) -> Result<()> {
        self.set_comp_checked(true, j, slice)
    }

    pub fn set_action(&mut self, l: usize, slice: FtSlice) -> Result<()> {
        self.set_comp_checked(false, l, slice)
    }

    fn set_comp_checked(&mut self, is_angle: bool, idx: usize, slice: FtSlice) -> Result<()> {
        if slice.n() != self.n || slice.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: slice.n(),
            });
        }
        let mut dropped = 0;
        let capped = slice.truncate_modes(self.caps.kcap(self.order), &mut dropped);
        self.dropped += dropped;
        if is_angle {
            self.angle[idx] = capped;
        } else {
            self.action[idx] = capped;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.angle.iter().all(FtSlice::is_zero) && self.action.iter().all(FtSlice::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.order, other.order, "grading mismatch");
        assert_eq!((self.n, self.m), (other.n, other.m), "dimension mismatch");
        let mut out = self.clone();
        out.dropped += other.dropped;
        for (a, b) in out.angle.iter_mut().zip(&other.angle) {
            *a = a.add(b);
        }
        for (a, b) in out.action.iter_mut().zip(&other.action) {
            *a = a.add(b);
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.map(|sl| sl.neg())
    }

    pub fn scale_br(&self, w: &BigRational) -> Self {
        self.map(|sl| sl.scale_br(w))
    }

    pub fn map(&self, f: impl Fn(&FtSlice) -> FtSlice) -> Self {
        let mut out = self.clone();
        for a in out.angle.iter_mut() {
            *a = f(a);
        }
        for a in out.action.iter_mut() {
            *a = f(a);
        }
        out
    }

    fn d_comp(slice: &FtSlice, c: usize, n: usize) -> FtSlice {
        if c < n {
            slice.dphi(c)
        } else {
            slice.di(c - n)
        }
    }

    /// Scalar Lie derivative of one slice sitting at `f_order`.
    pub fn lie_scalar_slice(&self, f: &FtSlice, f_order: u32) -> FtSlice {
        let out_order = self.order + f_order;
        let kcap = self.caps.kcap(out_order);
        let mut acc = FtSlice::zero(self.n, self.m, self.mode);
        let mut dropped = 0;
        for c in 0..self.n + self.m {
            let df = Self::d_comp(f, c, self.n);
            if df.is_zero() {
                continue;
            }
            acc = acc.add(&self.comp(c).mul(&df, kcap, self.caps.action_cap, &mut dropped));
        }
        acc
    }

    /// Scalar Lie derivative of a graded scalar series.
    pub fn lie_scalar(&self, f: &FtScalar) -> FtScalar {
        let mut out = FtScalar::zero(self.n, self.m, self.mode, self.caps);
        out.dropped = self.dropped + f.dropped;
        for (s, slice) in f.orders() {
            out.accumulate(self.order + s, self.lie_scalar_slice(slice, *s));
        }
        out
    }

    /// Commutator `{self, v}` with the angle/action block structure.
    pub fn commutator(&self, v: &Self) -> Self {
        assert_eq!((self.n, self.m), (v.n, v.m), "dimension mismatch");
        let order = self.order + v.order;
        let kcap = self.caps.kcap(order);
        let mut out = FtTerm::zero(self.n, self.m, order, self.mode, self.caps);
        out.dropped = self.dropped + v.dropped;
        let mut dropped = 0;
        for j in 0..self.n + self.m {
            let mut acc = FtSlice::zero(self.n, self.m, self.mode);
            for c in 0..self.n + self.m {
                let dv = Self::d_comp(v.comp(j), c, self.n);
                if !dv.is_zero() {
                    acc = acc.add(&self.comp(c).mul(&dv, kcap, self.caps.action_cap, &mut dropped));
                }
                let du = Self::d_comp(self.comp(j), c, self.n);
                if !du.is_zero() {
                    acc = acc.add(&v.comp(c).mul(&du, kcap, self.caps.action_cap, &mut dropped).neg());
                }
            }
            if j < self.n {
                out.angle[j] = acc;
            } else {
                out.action[j - self.n] = acc;
            }
        }
        out.dropped += dropped;
        out
    }

    /// Componentwise scalar Lie derivative; the transformation law of
    /// coordinate-map corrections.
    pub fn scalar_lie(&self, t: &Self) -> Self {
        assert_eq!((self.n, self.m), (t.n, t.m), "dimension mismatch");
        let order = self.order + t.order;
        let mut out = FtTerm::zero(self.n, self.m, order, self.mode, self.caps);
        out.dropped = self.dropped + t.dropped;
        for j in 0..self.n {
            out.angle[j] = self.lie_scalar_slice(&t.angle[j], t.order);
        }
        for l in 0..self.m {
            out.action[l] = self.lie_scalar_slice(&t.action[l], t.order);
        }
        out
    }

    pub fn evaluate(&self, angles: &[f64], actions: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        (
            self.angle.iter().map(|s| s.evaluate(angles, actions)).collect(),
            self.action.iter().map(|s| s.evaluate(angles, actions)).collect(),
        )
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.angle
            .iter()
            .chain(self.action.iter())
            .map(FtSlice::max_coeff_modulus)
            .fold(0.0, f64::max)
    }

    pub fn reality_defect(&self) -> f64 {
        self.angle
            .iter()
            .chain(self.action.iter())
            .map(FtSlice::reality_defect)
            .fold(0.0, f64::max)
    }

    /// Deviation from type (+,-): angle blocks even, action blocks odd.
    pub fn plus_minus_defect(&self) -> f64 {
        let a = self
            .angle
            .iter()
            .map(|s| s.parity_defect(1))
            .fold(0.0f64, f64::max);
        let b = self
            .action
            .iter()
            .map(|s| s.parity_defect(-1))
            .fold(0.0f64, f64::max);
        a.max(b)
    }

    /// Deviation from type (-,+): angle blocks odd, action blocks even.
    pub fn minus_plus_defect(&self) -> f64 {
        let a = self
            .angle
            .iter()
            .map(|s| s.parity_defect(-1))
            .fold(0.0f64, f64::max);
        let b = self
            .action
            .iter()
            .map(|s| s.parity_defect(1))
            .fold(0.0f64, f64::max);
        a.max(b)
    }
}

/// Graded Fourier--Taylor vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct FtField {
    n: usize,
    m: usize,
    mode: Mode,
    caps: FtCaps,
    max_order: u32,
    pub dropped: u64,
    terms: BTreeMap<u32, FtTerm>,
}

impl FtField {
    pub fn zero(n: usize, m: usize, max_order: u32, mode: Mode, caps: FtCaps) -> Self {
        FtField {
            n,
            m,
            mode,
            caps,
            max_order,
            dropped: 0,
            terms: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn caps(&self) -> FtCaps {
        self.caps
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn term(&self, s: u32) -> Option<&FtTerm> {
        self.terms.get(&s)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&u32, &FtTerm)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn accumulate(&mut self, t: &FtTerm) {
        if t.order() > self.max_order || t.is_zero() {
            return;
        }
        let merged = match self.terms.get(&t.order()) {
            Some(u) => u.add(t),
            None => t.clone(),
        };
        self.dropped += merged.dropped;
        if merged.is_zero() {
            self.terms.remove(&t.order());
        } else {
            self.terms.insert(t.order(), merged);
        }
    }

    pub fn set_term(&mut self, t: FtTerm) -> Result<()> {
        if t.n() != self.n || t.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: t.n(),
            });
        }
        if t.order() > self.max_order {
            return Err(Error::Grading(format!(
                "order {} exceeds max order {}",
                t.order(),
                self.max_order
            )));
        }
        if t.is_zero() {
            self.terms.remove(&t.order());
        } else {
            self.terms.insert(t.order(), t);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n, self.m), (other.n, other.m), "dimension mismatch");
        let max_order = self.max_order.min(other.max_order);
        let mut out = FtField::zero(self.n, self.m, max_order, self.mode, self.caps);
        out.dropped = self.dropped + other.dropped;
        for t in self.terms.values().filter(|t| t.order() <= max_order) {
            out.accumulate(t);
        }
        for t in other.terms.values().filter(|t| t.order() <= max_order) {
            out.accumulate(t);
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = FtField::zero(self.n, self.m, self.max_order, self.mode, self.caps);
        out.dropped = self.dropped;
        for t in self.terms.values() {
            out.accumulate(&t.neg());
        }
        out
    }

    pub fn scale_br(&self, w: &BigRational) -> Self {
        let mut out = FtField::zero(self.n, self.m, self.max_order, self.mode, self.caps);
        out.dropped = self.dropped;
        for t in self.terms.values() {
            out.accumulate(&t.scale_br(w));
        }
        out
    }

    /// Drop terms above `max_order`; the storage capacity is unchanged.
    pub fn truncate(&self, max_order: i64) -> Self {
        let mut out = FtField::zero(self.n, self.m, self.max_order, self.mode, self.caps);
        out.dropped = self.dropped;
        for (s, t) in self.terms.iter() {
            if i64::from(*s) <= max_order {
                out.accumulate(t);
            }
        }
        out
    }

    pub fn commutator(&self, v: &Self) -> Self {
        assert_eq!((self.n, self.m), (v.n, v.m), "dimension mismatch");
        let max_order = self.max_order.min(v.max_order);
        let mut out = FtField::zero(self.n, self.m, max_order, self.mode, self.caps);
        out.dropped = self.dropped + v.dropped;
        for (sa, a) in self.terms.iter() {
            for (sb, b) in v.terms.iter() {
                if sa + sb <= max_order {
                    out.accumulate(&a.commutator(b));
                }
            }
        }
        out
    }

    pub fn from_single(t: FtTerm, max_order: u32) -> Self {
        let mut out = FtField::zero(t.n(), t.m(), max_order, t.mode(), t.caps());
        out.accumulate(&t);
        out
    }

    pub fn evaluate(&self, angles: &[f64], actions: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut ang = vec![Complex64::new(0.0, 0.0); self.n];
        let mut act = vec![Complex64::new(0.0, 0.0); self.m];
        for t in self.terms.values() {
            let (a, b) = t.evaluate(angles, actions);
            for (x, y) in ang.iter_mut().zip(a) {
                *x += y;
            }
            for (x, y) in act.iter_mut().zip(b) {
                *x += y;
            }
        }
        (ang, act)
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.terms
            .values()
            .map(FtTerm::max_coeff_modulus)
            .fold(0.0, f64::max)
    }

    pub fn reality_defect(&self) -> f64 {
        self.terms
            .values()
            .map(FtTerm::reality_defect)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> FtCaps {
        FtCaps {
            k1: 2,
            action_cap: 6,
        }
    }

    /// exp(i k phi) with a constant unit action polynomial.
    fn mode_slice(k: i32, re: f64, im: f64) -> FtSlice {
        let mut s = FtSlice::zero(1, 1, Mode::Float);
        s.accumulate(
            ModeKey(vec![k].into_boxed_slice()),
            Poly::constant(1, Coeff::from_f64(re, im)),
        );
        s
    }

    fn cos_phi() -> FtSlice {
        mode_slice(1, 0.5, 0.0).add(&mode_slice(-1, 0.5, 0.0))
    }

    fn sin_phi() -> FtSlice {
        mode_slice(1, 0.0, -0.5).add(&mode_slice(-1, 0.0, 0.5))
    }

    #[test]
    fn commutator_with_self_vanishes() {
        let mut t = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        t.set_angle(0, cos_phi()).unwrap();
        t.set_action(0, sin_phi()).unwrap();
        assert!(t.commutator(&t).is_zero());
    }

    #[test]
    fn commutator_zero_field() {
        let z = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        let mut v = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        v.set_angle(0, mode_slice(1, 1.0, 0.0)).unwrap();
        assert!(z.commutator(&v).is_zero());
    }

    #[test]
    fn commutator_twist_against_mode() {
        // X = (I, 0), V = (0, e^{i phi}): {X, V} = (-e^{i phi}, i I e^{i phi})
        let mut x = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        let mut i_slice = FtSlice::zero(1, 1, Mode::Float);
        i_slice.accumulate(
            ModeKey::zero(1),
            Poly::var(1, 0, Mode::Float),
        );
        x.set_angle(0, i_slice).unwrap();
        let mut v = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        v.set_action(0, mode_slice(1, 1.0, 0.0)).unwrap();

        let c = x.commutator(&v);
        let key = ModeKey(vec![1].into_boxed_slice());
        let angle = c.angle_comp(0).mode_coeff(&key).unwrap();
        assert_eq!(angle.coeff(&[0]).to_c64(), Complex64::new(-1.0, 0.0));
        let action = c.action_comp(0).mode_coeff(&key).unwrap();
        assert_eq!(action.coeff(&[1]).to_c64(), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn reality_and_parity() {
        let mut t = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        t.set_angle(0, cos_phi()).unwrap();
        t.set_action(0, sin_phi()).unwrap();
        assert!(t.reality_defect() < 1e-15);
        assert!(t.plus_minus_defect() < 1e-15);
        assert!(t.minus_plus_defect() > 0.4);
    }

    #[test]
    fn evaluate_single_mode_at_zero() {
        let s = mode_slice(1, 1.0, 0.0);
        let v = s.evaluate(&[0.0], &[0.0]);
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mode_cap_drops_and_counts() {
        let a = mode_slice(2, 1.0, 0.0);
        let b = mode_slice(2, 1.0, 0.0);
        let mut dropped = 0;
        let prod = a.mul(&b, 3, 6, &mut dropped);
        assert!(prod.is_zero());
        assert_eq!(dropped, 1);
    }
}
