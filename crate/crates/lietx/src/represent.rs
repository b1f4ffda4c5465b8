//! Unperturbed-map operators, extraction of generating sequences from
//! near-identity maps, factorization of full maps, and composition and
//! commutation formulas for Lie transforms.
//!
//! Composition symbols follow the operator convention: `x' = T_W ∘ R x`
//! means the coordinate functions are `x'_j = T_W(R x_j)`, equivalently the
//! near-identity point map acts first and the integrable one second.

use crate::algebra::{
    FtCaps, FtField, FtScalar, FtSlice, FtTerm, GradedPolyField, HomogeneousPolyField, ModeKey,
};
use crate::coeff::{ratio, Coeff, Mode};
use crate::error::{Error, Result};
use crate::lie::{CoordSeries, FieldOps, GenSeq};
use crate::poly::Poly;
use num_complex::Complex64;
use num_rational::BigRational;
use std::f64::consts::TAU;

/// Diagonal linear part with eigenvalues λ_j = e^{μ_j + i ω_j}.
#[derive(Clone, Debug)]
pub struct LinearPart {
    dim: usize,
    mode: Mode,
    lambda: Vec<Coeff>,
    alpha: Vec<Complex64>,
}

impl LinearPart {
    /// `omega_shifts` moves each log to another branch by integer multiples
    /// of 2π; the interpolating field changes, the map does not.
    pub fn new(lambda: Vec<Coeff>, omega_shifts: Option<&[i64]>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Spec("empty eigenvalue list".into()));
        }
        let mode = lambda[0].mode();
        let mut alpha = Vec::with_capacity(lambda.len());
        for (j, l) in lambda.iter().enumerate() {
            if l.mode() != mode {
                return Err(Error::Spec("mixed-mode eigenvalues".into()));
            }
            if l.is_exact_zero() || l.modulus() == 0.0 {
                return Err(Error::Spec(format!("eigenvalue {} is zero", j + 1)));
            }
            let mut a = l.to_c64().ln();
            if let Some(shifts) = omega_shifts {
                a.im += TAU * shifts.get(j).copied().unwrap_or(0) as f64;
            }
            alpha.push(a);
        }
        Ok(LinearPart {
            dim: lambda.len(),
            mode,
            lambda,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn lambda(&self) -> &[Coeff] {
        &self.lambda
    }

    /// Principal (or shifted) logs μ_j + i ω_j.
    pub fn alpha(&self) -> &[Complex64] {
        &self.alpha
    }

    /// λ^k for a monomial exponent vector.
    pub fn eigen_scalar(&self, exps: &[u32]) -> Coeff {
        let mut acc = Coeff::one(self.mode);
        for (l, &e) in self.lambda.iter().zip(exps.iter()) {
            acc = acc.mul(&l.powi(i64::from(e)));
        }
        acc
    }

    /// λ^k / λ_j: the factor picked up by the component-j monomial of a
    /// vector field under R.
    pub fn eigen_field(&self, exps: &[u32], j: usize) -> Coeff {
        self.eigen_scalar(exps).div(&self.lambda[j])
    }

    /// R f = f(Λ x) on scalars; the monomial x^k gains λ^k (λ^{-k} inverted).
    pub fn apply_scalar(&self, f: &Poly, inverse: bool) -> Poly {
        assert_eq!(f.nvars(), self.dim, "dimension mismatch");
        let mut out = Poly::zero(self.dim, self.mode);
        for (m, c) in f.terms() {
            let mut factor = self.eigen_scalar(&m.0);
            if inverse {
                factor = Coeff::one(self.mode).div(&factor);
            }
            out.add_term(m.clone(), c.mul(&factor));
        }
        out
    }

    /// R v = Λ^{-1} v(Λ x) on vector fields; factor λ^k/λ_j per monomial.
    pub fn apply_field(&self, v: &HomogeneousPolyField, inverse: bool) -> HomogeneousPolyField {
        assert_eq!(v.dim(), self.dim, "dimension mismatch");
        let mut out = HomogeneousPolyField::zero(self.dim, v.degree(), self.mode);
        for j in 0..self.dim {
            let mut comp = Poly::zero(self.dim, self.mode);
            for (m, c) in v.component(j).terms() {
                let mut factor = self.eigen_field(&m.0, j);
                if inverse {
                    factor = Coeff::one(self.mode).div(&factor);
                }
                comp.add_term(m.clone(), c.mul(&factor));
            }
            out.set_component(j, comp);
        }
        out
    }

    pub fn apply_graded(&self, v: &GradedPolyField, inverse: bool) -> GradedPolyField {
        let mut out = GradedPolyField::zero(v.dim(), v.max_order(), v.mode());
        for (_, t) in v.terms() {
            out.accumulate(&self.apply_field(t, inverse));
        }
        out
    }

    /// The interpolating linear field Ω x with Ω = diag(α_j), float mode.
    pub fn generator_field(&self) -> HomogeneousPolyField {
        let mut f = HomogeneousPolyField::zero(self.dim, 1, Mode::Float);
        for j in 0..self.dim {
            let mut e = vec![0u32; self.dim];
            e[j] = 1;
            f.set_component(
                j,
                Poly::monomial(
                    self.dim,
                    &e,
                    Coeff::from_f64(self.alpha[j].re, self.alpha[j].im),
                ),
            );
        }
        f
    }
}

/// Kronecker part: rigid rotation φ' = φ + ω(I), I' = I, with the Jacobian
/// block B = {∂ω_j/∂I_l} derived on construction.
#[derive(Clone, Debug)]
pub struct KroneckerPart {
    n: usize,
    m: usize,
    caps: FtCaps,
    omega: Vec<Poly>,
    b: Vec<Vec<Poly>>,
    constant: Option<Vec<f64>>,
}

impl KroneckerPart {
    pub fn new(omega: Vec<Poly>, m: usize, caps: FtCaps) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::Spec("empty frequency map".into()));
        }
        for w in &omega {
            if w.nvars() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: w.nvars(),
                });
            }
            if w.mode() != Mode::Float {
                return Err(Error::Unsupported(
                    "Kronecker rotations use float phases; exact mode is not available here"
                        .into(),
                ));
            }
        }
        let b: Vec<Vec<Poly>> = omega
            .iter()
            .map(|w| (0..m).map(|l| w.partial(l)).collect())
            .collect();
        let is_const = omega.iter().all(|w| w.max_degree().unwrap_or(0) == 0);
        let constant = is_const.then(|| {
            omega
                .iter()
                .map(|w| w.coeff(&vec![0u32; m]).to_c64().re)
                .collect()
        });
        Ok(KroneckerPart {
            n,
            m,
            caps,
            omega,
            b,
            constant,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn caps(&self) -> FtCaps {
        self.caps
    }

    pub fn omega(&self) -> &[Poly] {
        &self.omega
    }

    pub fn jacobian_block(&self) -> &[Vec<Poly>] {
        &self.b
    }

    pub fn constant_omega(&self) -> Option<&[f64]> {
        self.constant.as_deref()
    }

    /// e^{i <k, ω>} for constant frequencies.
    pub fn phase_const(&self, k: &ModeKey, inverse: bool) -> Complex64 {
        let w = self.constant.as_ref().expect("constant frequencies");
        let mut arg: f64 = k
            .0
            .iter()
            .zip(w.iter())
            .map(|(&kj, &wj)| f64::from(kj) * wj)
            .sum();
        if inverse {
            arg = -arg;
        }
        Complex64::new(0.0, arg).exp()
    }

    /// e^{i <k, ω(I)>} expanded in Taylor form around I = 0 up to the action
    /// degree cap. Returns the phase polynomial and the number of dropped
    /// terms (nonzero when the expansion exceeds the cap).
    pub fn phase_poly(&self, k: &ModeKey, inverse: bool) -> (Poly, u64) {
        let sign = if inverse { -1.0 } else { 1.0 };
        // <k, ω(I)> split into its value at 0 and the rest
        let mut arg0 = 0.0f64;
        let mut delta = Poly::zero(self.m, Mode::Float);
        let zero_exps = vec![0u32; self.m];
        for (w, &kj) in self.omega.iter().zip(k.0.iter()) {
            if kj == 0 {
                continue;
            }
            let scaled = w.scale(&Coeff::from_f64(f64::from(kj), 0.0));
            let c0 = scaled.coeff(&zero_exps).to_c64().re;
            arg0 += c0;
            let mut rest = scaled;
            rest.add_term(
                crate::poly::Mono::constant(self.m),
                Coeff::from_f64(-c0, 0.0),
            );
            delta = delta.add(&rest);
        }
        let phase0 = Complex64::new(0.0, sign * arg0).exp();
        // exp(i s δ) = Σ_p (i s δ)^p / p!
        let i_delta = delta.scale(&Coeff::from_f64(0.0, sign));
        let mut acc = Poly::constant(self.m, Coeff::from_f64(phase0.re, phase0.im));
        let mut term = acc.clone();
        let mut dropped = 0u64;
        let mut p: i64 = 1;
        loop {
            let full = term.mul(&i_delta, None);
            let kept = full.truncate_degree(self.caps.action_cap);
            dropped += (full.num_terms() - kept.num_terms()) as u64;
            term = kept.scale_br(&ratio(1, p));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
            p += 1;
        }
        (acc, dropped)
    }

    /// Angle shift on one scalar slice: every mode k gains e^{±i <k, ω(I)>}.
    fn shift_slice(&self, slice: &FtSlice, inverse: bool, dropped: &mut u64) -> FtSlice {
        let mut out = FtSlice::zero(self.n, self.m, slice.mode());
        for (k, p) in slice.modes() {
            if k.is_zero() {
                out.accumulate(k.clone(), p.clone());
                continue;
            }
            if self.constant.is_some() {
                let ph = self.phase_const(k, inverse);
                out.accumulate(k.clone(), p.scale(&Coeff::from_f64(ph.re, ph.im)));
            } else {
                let (ph, d) = self.phase_poly(k, inverse);
                *dropped += d;
                let full = p.mul(&ph, None);
                let kept = full.truncate_degree(self.caps.action_cap);
                *dropped += (full.num_terms() - kept.num_terms()) as u64;
                out.accumulate(k.clone(), kept);
            }
        }
        out
    }

    /// R f = f(φ + ω(I), I) on graded scalars (φ - ω(I) inverted).
    pub fn apply_scalar(&self, f: &FtScalar, inverse: bool) -> FtScalar {
        let mut out = FtScalar::zero(self.n, self.m, f.mode(), f.caps());
        let mut dropped = f.dropped;
        for (s, slice) in f.orders() {
            out.accumulate(*s, self.shift_slice(slice, inverse, &mut dropped));
        }
        out.dropped = dropped;
        out
    }

    /// R v = J^{-1} v(φ + ω(I), I): shift both blocks, then subtract the
    /// B-coupling from the angle block. The inverse applies J instead.
    pub fn apply_term(&self, v: &FtTerm, inverse: bool) -> FtTerm {
        let mut out = FtTerm::zero(self.n, self.m, v.order(), v.mode(), v.caps());
        let mut dropped = v.dropped;
        let shifted_action: Vec<FtSlice> = (0..self.m)
            .map(|l| self.shift_slice(v.action_comp(l), inverse, &mut dropped))
            .collect();
        for j in 0..self.n {
            let mut angle = self.shift_slice(v.angle_comp(j), inverse, &mut dropped);
            for (l, act) in shifted_action.iter().enumerate() {
                let bjl = &self.b[j][l];
                if bjl.is_zero() || act.is_zero() {
                    continue;
                }
                let coupled = act.map(|p| p.mul(bjl, None).truncate_degree(self.caps.action_cap));
                angle = if inverse {
                    angle.add(&coupled)
                } else {
                    angle.add(&coupled.neg())
                };
            }
            out.set_angle(j, angle).expect("dimensions fixed");
        }
        for (l, act) in shifted_action.into_iter().enumerate() {
            out.set_action(l, act).expect("dimensions fixed");
        }
        out.dropped = dropped;
        out
    }

    pub fn apply_field(&self, v: &FtField, inverse: bool) -> FtField {
        let mut out = FtField::zero(self.n, self.m, v.max_order(), v.mode(), v.caps());
        for (_, t) in v.terms() {
            out.accumulate(&self.apply_term(t, inverse));
        }
        out.dropped += v.dropped;
        out
    }
}

/// The integrable factor of a map specification.
#[derive(Clone, Debug)]
pub enum Unperturbed {
    Linear(LinearPart),
    Kronecker(KroneckerPart),
}

/// Perturbation data, graded by order.
#[derive(Clone, Debug)]
pub enum Perturbation {
    Poly(GradedPolyField),
    Ft(FtField),
}

/// A perturbed map `x' = R x + f_1(x) + f_2(x) + ...` with its truncation
/// order.
#[derive(Clone, Debug)]
pub struct MapSpec {
    pub unperturbed: Unperturbed,
    pub perturbation: Perturbation,
    pub order: u32,
    pub mode: Mode,
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        match (&self.unperturbed, &self.perturbation) {
            (Unperturbed::Linear(lin), Perturbation::Poly(f)) => {
                if lin.dim() != f.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: lin.dim(),
                        got: f.dim(),
                    });
                }
                for (s, t) in f.terms() {
                    if t.degree() != s + 1 {
                        return Err(Error::Grading(format!(
                            "order-{s} perturbation must have degree {}",
                            s + 1
                        )));
                    }
                }
                Ok(())
            }
            (Unperturbed::Kronecker(k), Perturbation::Ft(f)) => {
                if k.n() != f.n() || k.m() != f.m() {
                    return Err(Error::DimensionMismatch {
                        expected: k.n(),
                        got: f.n(),
                    });
                }
                Ok(())
            }
            _ => Err(Error::Spec(
                "perturbation grading does not match the unperturbed kind".into(),
            )),
        }
    }
}

/// Extract the generating sequence of `y = T_X x` from a near-identity map
/// given by its graded corrections:
/// X_1 = φ_1, X_r = φ_r - Σ_{k<r} (k/r) L_{X_k} E_{r-k} x.
///
/// The recursion keeps E_s x = φ_s at every completed order, so the trace of
/// operator images is the input map itself.
pub fn extract_generating_sequence<G: FieldOps>(
    map: &CoordSeries<G>,
    n: u32,
) -> Result<GenSeq<G>> {
    let mut seq: GenSeq<G> = GenSeq::new(n);
    for r in 1..=n {
        let mut acc: Option<G> = map.piece(r).cloned();
        for k in 1..r {
            if let (Some(xk), Some(phi)) = (seq.get(k), map.piece(r - k)) {
                let term = xk
                    .scalar_lie(phi)
                    .scale_br(&ratio(-i64::from(k), i64::from(r)));
                acc = Some(match acc {
                    Some(a) => a.add(&term),
                    None => term,
                });
            }
        }
        if let Some(x) = acc {
            if !x.is_zero() {
                if x.order() != r {
                    return Err(Error::Grading(format!(
                        "extraction produced order {} at step {r}",
                        x.order()
                    )));
                }
                seq.set(x)?;
            }
        }
    }
    Ok(seq)
}

/// Extract the generating sequence of a composition of Lie series
/// `y = S_X x`: X_r is the order-r mismatch left by the previous factors.
pub fn extract_lie_series_factorization<G: FieldOps>(
    map: &CoordSeries<G>,
    n: u32,
) -> Result<GenSeq<G>> {
    let mut seq: GenSeq<G> = GenSeq::new(n);
    let mut img: CoordSeries<G> = CoordSeries::identity();
    for r in 1..=n {
        let residual = match (map.piece(r), img.piece(r)) {
            (Some(phi), Some(done)) => Some(phi.add(&done.neg())),
            (Some(phi), None) => Some(phi.clone()),
            (None, Some(done)) => Some(done.neg()),
            (None, None) => None,
        };
        if let Some(x) = residual {
            if !x.is_zero() {
                img = img.exp_by(&x, i64::from(n));
                seq.set(x)?;
            }
        }
    }
    Ok(seq)
}

/// Generating sequence of either kind.
#[derive(Clone, Debug)]
pub enum GenSeqKind {
    Poly(GenSeq<HomogeneousPolyField>),
    Ft(GenSeq<FtTerm>),
}

/// Both factorizations of the perturbed map: `x' = R ∘ T_V x` and
/// `x' = T_W ∘ R x` with W_s = R V_s.
pub fn factor_map(spec: &MapSpec) -> Result<(GenSeqKind, GenSeqKind)> {
    spec.validate()?;
    match (&spec.unperturbed, &spec.perturbation) {
        (Unperturbed::Linear(lin), Perturbation::Poly(f)) => {
            let (v, w) = factor_poly(lin, f, spec.order)?;
            Ok((GenSeqKind::Poly(v), GenSeqKind::Poly(w)))
        }
        (Unperturbed::Kronecker(k), Perturbation::Ft(f)) => {
            let (v, w) = factor_kronecker(k, f, spec.order)?;
            Ok((GenSeqKind::Ft(v), GenSeqKind::Ft(w)))
        }
        _ => unreachable!("validated above"),
    }
}

fn factor_poly(
    lin: &LinearPart,
    f: &GradedPolyField,
    n: u32,
) -> Result<(GenSeq<HomogeneousPolyField>, GenSeq<HomogeneousPolyField>)> {
    // x'_j = R(T_V x_j): the rotation acts on the coordinates first, so
    // φ_V(u) = u + f(Λ^{-1} u); x'_j = T_W(R x_j) gives φ_W = x + Λ^{-1} f.
    let mut phi_v = CoordSeries::identity();
    let mut phi_w = CoordSeries::identity();
    for (_, t) in f.terms() {
        let mut v_piece = HomogeneousPolyField::zero(t.dim(), t.degree(), t.mode());
        let mut w_piece = HomogeneousPolyField::zero(t.dim(), t.degree(), t.mode());
        for j in 0..t.dim() {
            v_piece.set_component(j, lin.apply_scalar(t.component(j), true));
            let inv = Coeff::one(lin.mode()).div(&lin.lambda()[j]);
            w_piece.set_component(j, t.component(j).scale(&inv));
        }
        phi_v.accumulate(v_piece);
        phi_w.accumulate(w_piece);
    }
    let v = extract_generating_sequence(&phi_v, n)?;
    let w = extract_generating_sequence(&phi_w, n)?;
    Ok((v, w))
}

fn factor_kronecker(
    kron: &KroneckerPart,
    f: &FtField,
    n: u32,
) -> Result<(GenSeq<FtTerm>, GenSeq<FtTerm>)> {
    // φ_V = M ∘ ρ^{-1}: the perturbations with angles shifted by -ω(I).
    let mut phi_v = CoordSeries::identity();
    for (_, t) in f.terms() {
        let mut dropped = t.dropped;
        let mut term = FtTerm::zero(kron.n(), kron.m(), t.order(), t.mode(), t.caps());
        for j in 0..kron.n() {
            term.set_angle(j, kron_shift_inverse(kron, t.angle_comp(j), &mut dropped))?;
        }
        for l in 0..kron.m() {
            term.set_action(l, kron_shift_inverse(kron, t.action_comp(l), &mut dropped))?;
        }
        term.dropped = dropped;
        phi_v.accumulate(term);
    }
    // φ_W = ρ^{-1} ∘ M: action corrections are g, angle corrections are
    // f - [ω(I + g) - ω(I)].
    let mut phi_w = CoordSeries::identity();
    for (_, t) in f.terms() {
        phi_w.accumulate(t.clone());
    }
    if kron.constant_omega().is_none() {
        for piece in omega_growth(kron, f, n)? {
            phi_w.accumulate(piece);
        }
    }
    let v = extract_generating_sequence(&phi_v, n)?;
    let w = extract_generating_sequence(&phi_w, n)?;
    Ok((v, w))
}

fn kron_shift_inverse(kron: &KroneckerPart, slice: &FtSlice, dropped: &mut u64) -> FtSlice {
    // the substitution φ -> φ - ω(I) on scalars is the inverse rotation
    let f = FtScalar::from_slice(1, slice.clone(), kron.caps());
    let shifted = kron.apply_scalar(&f, true);
    *dropped += shifted.dropped;
    shifted
        .term(1)
        .cloned()
        .unwrap_or_else(|| FtSlice::zero(kron.n(), kron.m(), slice.mode()))
}

/// Order-by-order corrections `-(ω_j(I + g) - ω_j(I))` for a non-constant
/// frequency map, as angle-block fields.
fn omega_growth(kron: &KroneckerPart, f: &FtField, n: u32) -> Result<Vec<FtTerm>> {
    let caps = kron.caps();
    let mode = f.mode();
    let g: Vec<FtScalar> = (0..kron.m())
        .map(|l| {
            let mut acc = FtScalar::zero(kron.n(), kron.m(), mode, caps);
            for (s, t) in f.terms() {
                acc.accumulate(*s, t.action_comp(l).clone());
            }
            acc
        })
        .collect();
    let mut per_order: Vec<FtTerm> = (1..=n)
        .map(|s| FtTerm::zero(kron.n(), kron.m(), s, mode, caps))
        .collect();
    for j in 0..kron.n() {
        // ω_j(I + g) - ω_j(I): every surviving term carries at least one
        // factor of g, hence order >= 1
        let composed = compose_action_poly(&kron.omega()[j], &g, kron, n);
        let base = FtScalar::from_slice(0, action_poly_slice(&kron.omega()[j], kron, mode), caps);
        let diff = composed.add(&base.neg());
        for (s, slice) in diff.orders() {
            if *s == 0 || *s > n {
                continue;
            }
            let idx = (*s - 1) as usize;
            let prev = per_order[idx].angle_comp(j).clone();
            per_order[idx].set_angle(j, prev.add(&slice.neg()))?;
        }
    }
    Ok(per_order.into_iter().filter(|t| !t.is_zero()).collect())
}

/// Embed a polynomial in the actions as an order-0 scalar slice.
pub fn action_poly_slice(p: &Poly, kron: &KroneckerPart, mode: Mode) -> FtSlice {
    let mut slice = FtSlice::zero(kron.n(), kron.m(), mode);
    if !p.is_zero() {
        slice.accumulate(ModeKey::zero(kron.n()), p.clone());
    }
    slice
}

/// c(I + v) for an action polynomial `c` and graded scalar shifts `v`.
pub fn compose_action_poly(
    c: &Poly,
    shifts: &[FtScalar],
    kron: &KroneckerPart,
    max_order: u32,
) -> FtScalar {
    let caps = kron.caps();
    let mode = shifts.first().map(|s| s.mode()).unwrap_or(Mode::Float);
    let mut acc = FtScalar::zero(kron.n(), kron.m(), mode, caps);
    let vars: Vec<FtScalar> = (0..kron.m())
        .map(|l| {
            let mut base = FtScalar::zero(kron.n(), kron.m(), mode, caps);
            let mut slice = FtSlice::zero(kron.n(), kron.m(), mode);
            slice.accumulate(ModeKey::zero(kron.n()), Poly::var(kron.m(), l, mode));
            base.accumulate(0, slice);
            base.add(&shifts[l])
        })
        .collect();
    for (m, coeff) in c.terms() {
        let mut term = FtScalar::zero(kron.n(), kron.m(), mode, caps);
        let mut unit = FtSlice::zero(kron.n(), kron.m(), mode);
        unit.accumulate(
            ModeKey::zero(kron.n()),
            Poly::constant(kron.m(), coeff.clone()),
        );
        term.accumulate(0, unit);
        for (l, &e) in m.0.iter().enumerate() {
            for _ in 0..e {
                term = term.mul(&vars[l], max_order);
            }
        }
        acc = acc.add(&term);
    }
    acc
}

/// E_s applied to a single-order field target along a sequence, by the
/// commutator action; entry s of the result is E_s(target), `None` when it
/// vanishes or would exceed `cap`.
pub fn e_field_trace<G: FieldOps>(
    seq: &GenSeq<G>,
    target: &G,
    upto: u32,
    cap: u32,
) -> Vec<Option<G>> {
    let mut images: Vec<Option<G>> = vec![Some(target.clone())];
    for s in 1..=upto {
        let mut acc: Option<G> = None;
        for j in 1..=s.min(seq.capacity()) {
            if let (Some(xj), Some(prev)) = (seq.get(j), images[(s - j) as usize].as_ref()) {
                if xj.order() + prev.order() > cap {
                    continue;
                }
                let term = xj
                    .commutator(prev)
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

/// The sequence generating `T_X^{-1}`, read off the inverse coordinate map.
pub fn inverse_sequence<G: FieldOps>(x: &GenSeq<G>, n: u32) -> Result<GenSeq<G>> {
    let inv_map = crate::lie::lie_transform_inverse_coords(x, n);
    extract_generating_sequence(&inv_map, n)
}

/// Commutation of a Lie transform past another: `T_X ∘ T_Y = T_W ∘ T_X`.
/// At leading orders W_s matches the order-s part of the fields T_X Y_j;
/// the exact sequence is the one generating T_X ∘ T_Y ∘ T_X^{-1}, computed
/// here through the composition formula.
pub fn commute_past<G: FieldOps>(x: &GenSeq<G>, y: &GenSeq<G>, n: u32) -> Result<GenSeq<G>> {
    let xy = compose_transforms(x, y, n)?;
    let x_inv = inverse_sequence(x, n)?;
    compose_transforms(&xy, &x_inv, n)
}

/// Closed-form commutation past the linear rotation: W_s = R Y_s.
pub fn commute_past_r_linear(
    lin: &LinearPart,
    y: &GenSeq<HomogeneousPolyField>,
    inverse: bool,
) -> Result<GenSeq<HomogeneousPolyField>> {
    let mut w = GenSeq::new(y.capacity());
    for (_, ys) in y.iter() {
        w.set(lin.apply_field(ys, inverse))?;
    }
    Ok(w)
}

/// Closed-form commutation past the Kronecker rotation: W_s = R Y_s.
pub fn commute_past_r_kronecker(
    kron: &KroneckerPart,
    y: &GenSeq<FtTerm>,
    inverse: bool,
) -> Result<GenSeq<FtTerm>> {
    let mut w = GenSeq::new(y.capacity());
    for (_, ys) in y.iter() {
        w.set(kron.apply_term(ys, inverse))?;
    }
    Ok(w)
}

/// Composition of two Lie transforms as a single one:
/// `T_X ∘ T_Y = T_Z` with Z_s = X_s + Y_s + Σ_{j<s} (j/s) E^X_{s-j} Y_j.
pub fn compose_transforms<G: FieldOps>(
    x: &GenSeq<G>,
    y: &GenSeq<G>,
    n: u32,
) -> Result<GenSeq<G>> {
    let mut parts: Vec<Option<G>> = vec![None; n as usize + 1];
    let put = |parts: &mut Vec<Option<G>>, g: G| {
        let s = g.order() as usize;
        if s <= n as usize {
            parts[s] = Some(match parts[s].take() {
                Some(p) => p.add(&g),
                None => g,
            });
        }
    };
    for (_, xs) in x.iter() {
        put(&mut parts, xs.clone());
    }
    for (_, ys) in y.iter() {
        put(&mut parts, ys.clone());
    }
    for (j, yj) in y.iter() {
        if j >= n {
            continue;
        }
        let trace = e_field_trace(x, yj, n - j, n);
        for (a, img) in trace.into_iter().enumerate().skip(1) {
            if let Some(img) = img {
                let s = j + a as u32;
                put(&mut parts, img.scale_br(&ratio(i64::from(j), i64::from(s))));
            }
        }
    }
    let mut z = GenSeq::new(n);
    for part in parts.into_iter().flatten() {
        if !part.is_zero() {
            z.set(part)?;
        }
    }
    Ok(z)
}

/// `exp(L_X) ∘ exp(L_Y) = T_W` for two order-1 fields:
/// W_1 = X + Y, W_s = (1/s!) L_X^{s-1} Y.
pub fn bch_compose<G: FieldOps>(x: &G, y: &G, n: u32) -> Result<GenSeq<G>> {
    if x.order() != 1 || y.order() != 1 {
        return Err(Error::Grading(
            "the exponential composition formula needs two order-1 fields".into(),
        ));
    }
    let mut w = GenSeq::new(n);
    w.set(x.add(y))?;
    let mut term = y.clone();
    let mut factorial = BigRational::from_integer(1.into());
    for s in 2..=n {
        term = x.commutator(&term);
        factorial *= BigRational::from_integer(i64::from(s).into());
        if term.is_zero() {
            break;
        }
        w.set(term.scale_br(&factorial.recip()))?;
    }
    Ok(w)
}

/// Full coordinate functions of the polynomial map: Λ x + Σ f_s.
pub fn poly_map_series(lin: &LinearPart, f: &GradedPolyField) -> Vec<Poly> {
    let dim = lin.dim();
    let mut comps: Vec<Poly> = (0..dim)
        .map(|j| Poly::var(dim, j, lin.mode()).scale(&lin.lambda()[j]))
        .collect();
    for (_, t) in f.terms() {
        for (j, comp) in comps.iter_mut().enumerate() {
            *comp = comp.add(t.component(j));
        }
    }
    comps
}
