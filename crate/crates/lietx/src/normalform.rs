//! Homological-equation solvers and the two normalization drivers, with
//! resonance splitting, small-divisor diagnostics and the symmetry-type
//! calculus for reversible maps.
//!
//! The solvers implement `D X + Z = Ψ` with `Z` in the kernel of
//! `D = R - 1` and `X` in its range. The conjugation equations read
//! `D X_s = Z_s - Ψ_s`, so the drivers negate the solved `X`.

use crate::algebra::{FtField, FtSlice, FtTerm, GradedPolyField, HomogeneousPolyField, ModeKey};
use crate::coeff::{ratio, Coeff, Mode};
use crate::error::{Error, Result};
use crate::lie::{lie_transform_apply_map, lie_transform_coords, CoordSeries, FieldOps, GenSeq};
use crate::poly::Poly;
use crate::represent::{e_field_trace, KroneckerPart, LinearPart};
use serde::{Deserialize, Serialize};

/// Resonance and small-divisor thresholds.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// |d| below this counts as an exact resonance in float mode.
    pub resonance: f64,
    /// Divisors between `resonance` and this floor are solved but reported.
    pub divisor_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            resonance: 1e-10,
            divisor_floor: 1e-6,
        }
    }
}

/// A monomial or Fourier mode routed to the kernel, or close to it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DivisorEvent {
    pub order: u32,
    pub component: usize,
    pub key: String,
    pub divisor_modulus: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Smallest divisor modulus encountered (resonant divisors count as 0).
    pub min_divisor: Option<f64>,
    pub resonant_modes: Vec<DivisorEvent>,
    pub near_resonant: Vec<DivisorEvent>,
    pub warnings: Vec<String>,
    pub dropped_modes: u64,
}

impl Diagnostics {
    fn record_divisor(&mut self, d: f64) {
        self.min_divisor = Some(self.min_divisor.map_or(d, |m| m.min(d)));
    }
}

/// Normalization driver selection.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Driver {
    Transform,
    Series,
}

/// Result of a normalization: normalizing sequence X, normal-form sequence Z
/// and divisor diagnostics. The conjugated map is `T_Z ∘ R`.
#[derive(Clone, Debug)]
pub struct NormalForm<G: FieldOps> {
    pub x: GenSeq<G>,
    pub z: GenSeq<G>,
    pub order: u32,
    pub driver: Driver,
    pub diagnostics: Diagnostics,
}

/// The operator `D = R - 1` on one grading, with the kernel/range solve of
/// `D X + Z = Ψ`.
pub trait HomologicalOperator<G: FieldOps> {
    fn apply_r(&self, f: &G, inverse: bool) -> G;
    /// Solve `D X + Z = Ψ`: X carries the range part over its divisor, Z
    /// the kernel part.
    fn solve(&self, psi: &G, diag: &mut Diagnostics) -> Result<(G, G)>;
}

/// Diagonal solver for the linear case: divisor d(k, j) = λ^k/λ_j - 1 on
/// the monomial x^k e_j.
pub struct LinearHomological<'a> {
    pub part: &'a LinearPart,
    pub tol: Tolerances,
}

impl<'a> LinearHomological<'a> {
    pub fn new(part: &'a LinearPart, tol: Tolerances) -> Self {
        LinearHomological { part, tol }
    }

    pub fn divisor(&self, exps: &[u32], j: usize) -> Coeff {
        self.part
            .eigen_field(exps, j)
            .sub(&Coeff::one(self.part.mode()))
    }

    pub fn is_resonant(&self, d: &Coeff) -> bool {
        match self.part.mode() {
            Mode::Exact => d.is_exact_zero(),
            Mode::Float => d.modulus() < self.tol.resonance,
        }
    }
}

impl<'a> HomologicalOperator<HomogeneousPolyField> for LinearHomological<'a> {
    fn apply_r(&self, f: &HomogeneousPolyField, inverse: bool) -> HomogeneousPolyField {
        self.part.apply_field(f, inverse)
    }

    fn solve(
        &self,
        psi: &HomogeneousPolyField,
        diag: &mut Diagnostics,
    ) -> Result<(HomogeneousPolyField, HomogeneousPolyField)> {
        let dim = psi.dim();
        let order = psi.order();
        let mut x = HomogeneousPolyField::zero(dim, psi.degree(), psi.mode());
        let mut z = HomogeneousPolyField::zero(dim, psi.degree(), psi.mode());
        for j in 0..dim {
            let mut xj = Poly::zero(dim, psi.mode());
            let mut zj = Poly::zero(dim, psi.mode());
            for (m, c) in psi.component(j).terms() {
                let d = self.divisor(&m.0, j);
                if self.is_resonant(&d) {
                    diag.record_divisor(0.0);
                    diag.resonant_modes.push(DivisorEvent {
                        order,
                        component: j,
                        key: format_exps(&m.0),
                        divisor_modulus: 0.0,
                    });
                    zj.add_term(m.clone(), c.clone());
                } else {
                    let dmod = d.modulus();
                    diag.record_divisor(dmod);
                    if dmod < self.tol.divisor_floor {
                        diag.near_resonant.push(DivisorEvent {
                            order,
                            component: j,
                            key: format_exps(&m.0),
                            divisor_modulus: dmod,
                        });
                        diag.warnings.push(format!(
                            "near-resonant divisor |d| = {dmod:.3e} at order {order}, \
                             component {}, monomial {}",
                            j + 1,
                            format_exps(&m.0)
                        ));
                    }
                    xj.add_term(m.clone(), c.div(&d));
                }
            }
            x.set_component(j, xj);
            z.set_component(j, zj);
        }
        Ok((x, z))
    }
}

fn format_exps(exps: &[u32]) -> String {
    let parts: Vec<String> = exps.iter().map(u32::to_string).collect();
    parts.join(",")
}

fn format_mode_key(k: &ModeKey) -> String {
    let parts: Vec<String> = k.0.iter().map(i32::to_string).collect();
    parts.join(",")
}

/// Fourier-mode solver for the Kronecker case with constant frequencies:
/// divisor e^{i<k,ω>} - 1, with the B-coupling correction in the angle
/// block. Action-dependent frequencies are rejected: their divisors vanish
/// somewhere on the action domain.
pub struct KroneckerHomological<'a> {
    pub part: &'a KroneckerPart,
    pub tol: Tolerances,
}

impl<'a> KroneckerHomological<'a> {
    pub fn new(part: &'a KroneckerPart, tol: Tolerances) -> Self {
        KroneckerHomological { part, tol }
    }

    pub fn divisor(&self, k: &ModeKey) -> num_complex::Complex64 {
        self.part.phase_const(k, false) - 1.0
    }
}

impl<'a> HomologicalOperator<FtTerm> for KroneckerHomological<'a> {
    fn apply_r(&self, f: &FtTerm, inverse: bool) -> FtTerm {
        self.part.apply_term(f, inverse)
    }

    fn solve(&self, psi: &FtTerm, diag: &mut Diagnostics) -> Result<(FtTerm, FtTerm)> {
        let order = psi.order();
        if self.part.constant_omega().is_none() {
            return Err(Error::Resonance {
                order,
                detail: "action-dependent frequencies: divisors e^{i<k,ω(I)>} - 1 vanish on \
                         the action domain"
                    .into(),
            });
        }
        let n = psi.n();
        let m = psi.m();
        let caps = psi.caps();
        let mode = psi.mode();
        let mut x = FtTerm::zero(n, m, order, mode, caps);
        let mut z = FtTerm::zero(n, m, order, mode, caps);
        let record = |diag: &mut Diagnostics, k: &ModeKey, comp: usize, d: f64| {
            if d == 0.0 {
                diag.resonant_modes.push(DivisorEvent {
                    order,
                    component: comp,
                    key: format_mode_key(k),
                    divisor_modulus: 0.0,
                });
            } else if d < self.tol.divisor_floor {
                diag.near_resonant.push(DivisorEvent {
                    order,
                    component: comp,
                    key: format_mode_key(k),
                    divisor_modulus: d,
                });
                diag.warnings.push(format!(
                    "near-resonant divisor |d| = {d:.3e} at order {order}, component {}, \
                     mode {}",
                    comp + 1,
                    format_mode_key(k)
                ));
            }
            diag.record_divisor(d);
        };
        // action block first: d_k = β_k / divisor
        for l in 0..m {
            let mut xl = FtSlice::zero(n, m, mode);
            let mut zl = FtSlice::zero(n, m, mode);
            for (k, beta) in psi.action_comp(l).modes() {
                if k.is_zero() {
                    zl.accumulate(k.clone(), beta.clone());
                    continue;
                }
                let d = self.divisor(k);
                if d.norm() < self.tol.resonance {
                    record(&mut *diag, k, n + l, 0.0);
                    zl.accumulate(k.clone(), beta.clone());
                } else {
                    record(&mut *diag, k, n + l, d.norm());
                    let recip = Coeff::one(mode).div(&Coeff::from_f64(d.re, d.im));
                    xl.accumulate(k.clone(), beta.scale(&recip));
                }
            }
            x.set_action(l, xl)?;
            z.set_action(l, zl)?;
        }
        // angle block: c_k = α_k/d + e^{i<k,ω>} B β_k / d^2. With constant
        // ω the Jacobian block vanishes and the blocks decouple; the cross
        // term is kept for the general formula.
        for j in 0..n {
            let mut xj = FtSlice::zero(n, m, mode);
            let mut zj = FtSlice::zero(n, m, mode);
            for (k, alpha) in psi.angle_comp(j).modes() {
                if k.is_zero() {
                    zj.accumulate(k.clone(), alpha.clone());
                    continue;
                }
                let d = self.divisor(k);
                if d.norm() < self.tol.resonance {
                    record(&mut *diag, k, j, 0.0);
                    zj.accumulate(k.clone(), alpha.clone());
                } else {
                    record(&mut *diag, k, j, d.norm());
                    let recip = Coeff::one(mode).div(&Coeff::from_f64(d.re, d.im));
                    xj.accumulate(k.clone(), alpha.scale(&recip));
                }
            }
            for (l, bl) in self.part.jacobian_block()[j].iter().enumerate() {
                if bl.is_zero() {
                    continue;
                }
                for (k, beta) in psi.action_comp(l).modes() {
                    if k.is_zero() {
                        continue;
                    }
                    let d = self.divisor(k);
                    if d.norm() < self.tol.resonance {
                        continue;
                    }
                    let phase = self.part.phase_const(k, false);
                    let factor = phase / (d * d);
                    let coupled = beta
                        .mul(bl, None)
                        .truncate_degree(caps.action_cap)
                        .scale(&Coeff::from_f64(factor.re, factor.im));
                    xj.accumulate(k.clone(), coupled);
                }
            }
            x.set_angle(j, xj)?;
            z.set_angle(j, zj)?;
        }
        Ok((x, z))
    }
}

/// Smallest divisor modulus over the whole potential mode range
/// 1 <= |k|_1 <= kmax for a constant-frequency rotation.
pub fn divisor_range_min(kron: &KroneckerPart, kmax: u32) -> Option<f64> {
    let omega = kron.constant_omega()?;
    let n = omega.len();
    let mut min = f64::INFINITY;
    let mut k = vec![-(kmax as i32); n];
    loop {
        let l1: u32 = k.iter().map(|x| x.unsigned_abs()).sum();
        if l1 >= 1 && l1 <= kmax {
            let arg: f64 = k
                .iter()
                .zip(omega.iter())
                .map(|(&kj, &wj)| f64::from(kj) * wj)
                .sum();
            let d = (num_complex::Complex64::new(0.0, arg).exp() - 1.0).norm();
            min = min.min(d);
        }
        // odometer over the box [-kmax, kmax]^n
        let mut i = 0;
        loop {
            if i == n {
                return if min.is_finite() { Some(min) } else { None };
            }
            k[i] += 1;
            if k[i] > kmax as i32 {
                k[i] = -(kmax as i32);
                i += 1;
            } else {
                break;
            }
        }
    }
}

fn opt_add_scaled<G: FieldOps>(acc: Option<G>, term: &G, num: i64, den: i64) -> Option<G> {
    let scaled = term.scale_br(&ratio(num, den));
    Some(match acc {
        Some(a) => a.add(&scaled),
        None => scaled,
    })
}

fn extend_field_trace<G: FieldOps>(
    seq: &GenSeq<G>,
    images: &mut Vec<Option<G>>,
    upto: u32,
    cap: u32,
) {
    for s in images.len() as u32..=upto {
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
}

/// Single-Lie-transform driver: for each order assemble
/// Ψ_s = W_s - Σ_{j<s} (j/s) (E^X_{s-j} Z_j - E^W_{s-j} R X_j),
/// solve `D X̂ + Z = Ψ` and take X_s = -X̂ so that the conjugation equation
/// D X_s = Z_s - Ψ_s holds.
pub fn normalize_lie_transform<G: FieldOps, S: HomologicalOperator<G>>(
    sys: &S,
    w: &GenSeq<G>,
    n: u32,
) -> Result<NormalForm<G>> {
    let mut diag = Diagnostics::default();
    let mut x_seq: GenSeq<G> = GenSeq::new(n);
    let mut z_seq: GenSeq<G> = GenSeq::new(n);
    // per-target operator traces: E^X applied to Z_j, E^W applied to R X_j
    let mut z_traces: Vec<(u32, Vec<Option<G>>)> = Vec::new();
    let mut rx_traces: Vec<(u32, Vec<Option<G>>)> = Vec::new();
    for s in 1..=n {
        let mut psi: Option<G> = w.get(s).cloned();
        for (j, images) in z_traces.iter_mut() {
            let a = s - *j;
            extend_field_trace(&x_seq, images, a, n);
            if let Some(img) = images[a as usize].as_ref() {
                psi = opt_add_scaled(psi, img, -i64::from(*j), i64::from(s));
            }
        }
        for (j, images) in rx_traces.iter_mut() {
            let a = s - *j;
            extend_field_trace(w, images, a, n);
            if let Some(img) = images[a as usize].as_ref() {
                psi = opt_add_scaled(psi, img, i64::from(*j), i64::from(s));
            }
        }
        let psi = match psi.filter(|p| !p.is_zero()) {
            Some(p) => p,
            None => continue,
        };
        let (x_hat, z) = sys.solve(&psi, &mut diag)?;
        if !z.is_zero() {
            z_seq.set(z.clone())?;
            z_traces.push((s, vec![Some(z)]));
        }
        if !x_hat.is_zero() {
            let xs = x_hat.neg();
            let rx = sys.apply_r(&xs, false);
            x_seq.set(xs)?;
            rx_traces.push((s, vec![Some(rx)]));
        }
    }
    Ok(NormalForm {
        x: x_seq,
        z: z_seq,
        order: n,
        driver: Driver::Transform,
        diagnostics: diag,
    })
}

/// Composition-of-Lie-series driver: at sweep r solve
/// D X_r = Z_r - W^{(r-1)}_r, then rebuild every higher order of the working
/// sequence through
/// W^{(r)}_s = W^{(r-1)}_s + (r/s) E^{W^{(r-1)}}_{s-r} R X_r
///              - Σ_j ((s-jr)/(s·j!)) L_{X_r}^j W^{(r)}_{s-jr}.
pub fn normalize_lie_series<G: FieldOps, S: HomologicalOperator<G>>(
    sys: &S,
    w: &GenSeq<G>,
    n: u32,
) -> Result<NormalForm<G>> {
    let mut diag = Diagnostics::default();
    let mut x_seq: GenSeq<G> = GenSeq::new(n);
    let mut work: Vec<Option<G>> = (1..=n).map(|s| w.get(s).cloned()).collect();
    for r in 1..=n {
        let psi = match work[(r - 1) as usize].clone().filter(|p| !p.is_zero()) {
            Some(p) => p,
            None => continue,
        };
        // snapshot of W^{(r-1)} for its operator trace, taken before the
        // order-r element is replaced
        let mut old_seq: GenSeq<G> = GenSeq::new(n);
        for g in work.iter().flatten() {
            old_seq.set(g.clone())?;
        }
        let (x_hat, z) = sys.solve(&psi, &mut diag)?;
        work[(r - 1) as usize] = Some(z).filter(|z| !z.is_zero());
        if x_hat.is_zero() {
            continue;
        }
        let xr = x_hat.neg();
        let rx = sys.apply_r(&xr, false);
        let rx_trace = e_field_trace(&old_seq, &rx, n.saturating_sub(r), n);
        for s in (r + 1)..=n {
            let mut upd = work[(s - 1) as usize].clone();
            if let Some(Some(img)) = rx_trace.get((s - r) as usize) {
                upd = opt_add_scaled(upd, img, i64::from(r), i64::from(s));
            }
            let mut jfact: i64 = 1;
            let mut j = 1u32;
            while j * r < s {
                jfact *= i64::from(j);
                if let Some(base) = work[(s - j * r - 1) as usize].clone() {
                    let mut powered = base;
                    let mut vanished = false;
                    for _ in 0..j {
                        powered = xr.commutator(&powered);
                        if powered.is_zero() {
                            vanished = true;
                            break;
                        }
                    }
                    if !vanished {
                        upd = opt_add_scaled(
                            upd,
                            &powered,
                            -i64::from(s - j * r),
                            i64::from(s) * jfact,
                        );
                    }
                }
                j += 1;
            }
            work[(s - 1) as usize] = upd.filter(|g| !g.is_zero());
        }
        x_seq.set(xr)?;
    }
    let mut z_seq: GenSeq<G> = GenSeq::new(n);
    for g in work.into_iter().flatten() {
        z_seq.set(g)?;
    }
    Ok(NormalForm {
        x: x_seq,
        z: z_seq,
        order: n,
        driver: Driver::Series,
        diagnostics: diag,
    })
}

/// Coordinate image of the normalizing transformation `y = 𝒯(x)`.
pub fn transform_coords<G: FieldOps>(nf: &NormalForm<G>) -> CoordSeries<G> {
    match nf.driver {
        Driver::Transform => lie_transform_coords(&nf.x, nf.order),
        // each sweep conjugates from outside, so the highest-order
        // exponential acts on the coordinate functions first
        Driver::Series => crate::lie::compose_lie_series_coords(&nf.x, nf.order, nf.order, true),
    }
}

/// Coordinate image of the inverse transformation `x = 𝒯^{-1}(y)`.
pub fn inverse_transform_coords<G: FieldOps>(nf: &NormalForm<G>) -> CoordSeries<G> {
    match nf.driver {
        Driver::Transform => crate::lie::lie_transform_inverse_coords(&nf.x, nf.order),
        // inverse of exp(L_{X_1}) ∘ ... ∘ exp(L_{X_N}): exponentials of the
        // negated fields applied in the written order
        Driver::Series => {
            crate::lie::compose_lie_series_coords(&nf.x.neg(), nf.order, nf.order, false)
        }
    }
}

/// Largest coefficient by which the conjugation identity
/// `T_W ∘ T_{R X} = T_X ∘ T_Z` fails on the coordinates (zero in exact
/// arithmetic). Meaningful for the transform driver, whose X generates a
/// single Lie transform.
pub fn conjugacy_defect<G, S, F>(sys: &S, w: &GenSeq<G>, nf: &NormalForm<G>, coeff_norm: F) -> f64
where
    G: FieldOps,
    S: HomologicalOperator<G>,
    F: Fn(&G) -> f64,
{
    let n = nf.order;
    let rx = nf.x.map(|g| sys.apply_r(g, false));
    let inner = lie_transform_coords(&rx, n);
    let lhs = lie_transform_apply_map(w, &inner, n);
    let rhs = lie_transform_apply_map(&nf.x, &lie_transform_coords(&nf.z, n), n);
    let diff = lhs.sub_corrections(&rhs);
    let mut worst = 0.0f64;
    for (_, g) in diff.pieces() {
        worst = worst.max(coeff_norm(g));
    }
    worst
}

/// Symmetry type of a Fourier--Taylor field under φ -> -φ.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryType {
    /// Angle blocks even, action blocks odd.
    PlusMinus,
    /// Angle blocks odd, action blocks even.
    MinusPlus,
    None,
}

/// Classify a single-order field. Zero blocks satisfy both parities; a zero
/// field reports `PlusMinus`.
pub fn classify_symmetry(t: &FtTerm, tol: f64) -> SymmetryType {
    let pm = t.plus_minus_defect() <= tol;
    let mp = t.minus_plus_defect() <= tol;
    match (pm, mp) {
        (true, _) => SymmetryType::PlusMinus,
        (false, true) => SymmetryType::MinusPlus,
        (false, false) => SymmetryType::None,
    }
}

/// Fold the Fourier/action-cap truncation counters of a Fourier--Taylor
/// normal form into its diagnostics.
pub fn record_ft_truncation(nf: &mut NormalForm<FtTerm>) {
    let mut dropped = 0u64;
    for (_, t) in nf.x.iter() {
        dropped += t.dropped;
    }
    for (_, t) in nf.z.iter() {
        dropped += t.dropped;
    }
    nf.diagnostics.dropped_modes = dropped;
    if dropped > 0 {
        nf.diagnostics.warnings.push(format!(
            "{dropped} terms beyond the Fourier or action-degree caps were dropped"
        ));
    }
}

/// Outcome of a reversible normalization.
pub struct ReversibleOutcome {
    pub nf: NormalForm<FtTerm>,
    /// Frequency polynomials of the normalized rotation φ' = φ + ω'(I).
    pub omega_prime: Vec<Poly>,
}

/// Reversible Kronecker normal form.
///
/// The perturbation orders are taken as the generating sequence of the
/// near-identity factor, `x' = T_W ∘ R x` with W_s = (f_s, g_s); under this
/// reading the even/odd symmetry forces every Z_s into the k = 0 mode with a
/// vanishing action block, and the normalized map is the Kronecker rotation
/// by ω'(I) = ω + Σ_s Z_s^{angle}.
pub fn normalize_reversible(
    kron: &KroneckerPart,
    perturbation: &FtField,
    n: u32,
    tol: Tolerances,
) -> Result<ReversibleOutcome> {
    const SYM_TOL: f64 = 1e-9;
    if kron.constant_omega().is_none() {
        return Err(Error::Unsupported(
            "reversible normalization needs constant frequencies".into(),
        ));
    }
    // f_s even, g_s odd in the angles: perturbation fields of type (+,-)
    for (s, t) in perturbation.terms() {
        for j in 0..t.n() {
            if t.angle_comp(j).parity_defect(1) > SYM_TOL {
                return Err(Error::Symmetry {
                    order: *s,
                    block: "angle",
                });
            }
        }
        for l in 0..t.m() {
            if t.action_comp(l).parity_defect(-1) > SYM_TOL {
                return Err(Error::Symmetry {
                    order: *s,
                    block: "action",
                });
            }
        }
    }
    let mut w: GenSeq<FtTerm> = GenSeq::new(n);
    for (_, t) in perturbation.terms() {
        w.set(t.clone())?;
    }
    let sys = KroneckerHomological::new(kron, tol);
    let mut nf = normalize_lie_transform(&sys, &w, n)?;
    // report the divisor floor over the whole mode range the run could touch
    if let Some(range_min) = divisor_range_min(kron, kron.caps().kcap(n)) {
        nf.diagnostics.record_divisor(range_min);
    }
    record_ft_truncation(&mut nf);
    // structural checks on the outcome
    for (s, z) in nf.z.iter() {
        for c in 0..z.n() + z.m() {
            for (k, _) in z.comp(c).modes() {
                if !k.is_zero() {
                    return Err(Error::Symmetry {
                        order: s,
                        block: if c < z.n() { "angle" } else { "action" },
                    });
                }
            }
        }
        for l in 0..z.m() {
            if z.action_comp(l).max_coeff_modulus() > SYM_TOL {
                return Err(Error::Symmetry {
                    order: s,
                    block: "action",
                });
            }
        }
    }
    for (s, x) in nf.x.iter() {
        // the solved X_s need not be of pure type: the divisors e^{ikω} - 1
        // mix the parities; record the defect instead of failing
        let defect = x.minus_plus_defect();
        if defect > SYM_TOL {
            nf.diagnostics.warnings.push(format!(
                "normalizing field at order {s} is not of type (-,+) (defect {defect:.3e})"
            ));
        }
    }
    // ω'(I) = ω + Σ_s Z_s angle blocks at k = 0
    let mut omega_prime: Vec<Poly> = kron.omega().to_vec();
    for (_, z) in nf.z.iter() {
        for (j, wj) in omega_prime.iter_mut().enumerate() {
            if let Some(p) = z.angle_comp(j).k0() {
                // the k = 0 coefficient of a real field is real up to
                // rounding; keep the real part
                *wj = wj.add(&p.map_real());
            }
        }
    }
    Ok(ReversibleOutcome { nf, omega_prime })
}

/// Normalization entry point for the linear case: factor the map, then run
/// the chosen driver. Returns the normal form and the factor sequence W.
pub fn normalize_poly(
    lin: &LinearPart,
    perturbation: &GradedPolyField,
    n: u32,
    driver: Driver,
    tol: Tolerances,
) -> Result<(NormalForm<HomogeneousPolyField>, GenSeq<HomogeneousPolyField>)> {
    let spec = crate::represent::MapSpec {
        unperturbed: crate::represent::Unperturbed::Linear(lin.clone()),
        perturbation: crate::represent::Perturbation::Poly(perturbation.clone()),
        order: n,
        mode: perturbation.mode(),
    };
    let (_, w) = crate::represent::factor_map(&spec)?;
    let w = match w {
        crate::represent::GenSeqKind::Poly(w) => w,
        _ => unreachable!(),
    };
    let sys = LinearHomological::new(lin, tol);
    let nf = match driver {
        Driver::Transform => normalize_lie_transform(&sys, &w, n)?,
        Driver::Series => normalize_lie_series(&sys, &w, n)?,
    };
    Ok((nf, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FtCaps;

    type H = HomogeneousPolyField;

    fn q(n: i64, d: i64) -> Coeff {
        Coeff::from_ratio(n, d, 0, 1)
    }

    fn mono(dim: usize, comp: usize, exps: &[u32], n: i64, d: i64) -> H {
        H::monomial(dim, comp, exps, q(n, d)).unwrap()
    }

    fn lin(vals: &[(i64, i64, i64, i64)]) -> LinearPart {
        LinearPart::new(
            vals.iter()
                .map(|&(rn, rd, im, id)| Coeff::from_ratio(rn, rd, im, id))
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn solve_zero_is_zero() {
        let part = lin(&[(2, 1, 0, 1)]);
        let sys = LinearHomological::new(&part, Tolerances::default());
        let psi = H::zero(1, 2, Mode::Exact);
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        assert!(x.is_zero() && z.is_zero());
    }

    #[test]
    fn solve_nonresonant_divisor_one() {
        // λ = 2, monomial z^2 e_1: divisor λ^2/λ - 1 = 1, X = ψ
        let part = lin(&[(2, 1, 0, 1)]);
        let sys = LinearHomological::new(&part, Tolerances::default());
        let psi = mono(1, 0, &[2], 5, 3);
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        assert_eq!(x, psi);
        assert!(z.is_zero());
        assert_eq!(d.min_divisor, Some(1.0));
    }

    #[test]
    fn solve_resonant_root_of_unity() {
        // λ = i, monomial z^5 e_1: λ^5/λ = λ^4 = 1, divisor exactly zero
        let part = lin(&[(0, 1, 1, 1)]);
        let sys = LinearHomological::new(&part, Tolerances::default());
        let psi = mono(1, 0, &[5], 7, 2);
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        assert!(x.is_zero());
        assert_eq!(z, psi);
        assert_eq!(d.min_divisor, Some(0.0));
        assert_eq!(d.resonant_modes.len(), 1);
        assert_eq!(d.resonant_modes[0].key, "5");
    }

    /// Schröder--Siegel z' = 2z + z^2 in exact arithmetic: every driver
    /// datum matches the hand-computed recursion values.
    #[test]
    fn schroeder_lambda_two_transform_driver() {
        let part = lin(&[(2, 1, 0, 1)]);
        let mut f = GradedPolyField::zero(1, 6, Mode::Exact);
        f.set_term(mono(1, 0, &[2], 1, 1)).unwrap();
        let (nf, w) =
            normalize_poly(&part, &f, 3, Driver::Transform, Tolerances::default()).unwrap();
        // W = {z^2/2, -z^3/4, z^4/6}
        assert_eq!(w.get(1).unwrap().component(0).coeff(&[2]), q(1, 2));
        assert_eq!(w.get(2).unwrap().component(0).coeff(&[3]), q(-1, 4));
        assert_eq!(w.get(3).unwrap().component(0).coeff(&[4]), q(1, 6));
        // X = {-z^2/2, z^3/12, -z^4/36}, Z = 0
        assert!(nf.z.is_zero());
        assert_eq!(nf.x.get(1).unwrap().component(0).coeff(&[2]), q(-1, 2));
        assert_eq!(nf.x.get(2).unwrap().component(0).coeff(&[3]), q(1, 12));
        assert_eq!(nf.x.get(3).unwrap().component(0).coeff(&[4]), q(-1, 36));
        // transform coordinates: ln(1+x) = x - x^2/2 + x^3/3 - x^4/4
        let coords = transform_coords(&nf);
        assert_eq!(coords.piece(1).unwrap().component(0).coeff(&[2]), q(-1, 2));
        assert_eq!(coords.piece(2).unwrap().component(0).coeff(&[3]), q(1, 3));
        assert_eq!(coords.piece(3).unwrap().component(0).coeff(&[4]), q(-1, 4));
        // inverse transform: e^y - 1 = y + y^2/2 + y^3/6 + y^4/24
        let h = inverse_transform_coords(&nf);
        assert_eq!(h.piece(1).unwrap().component(0).coeff(&[2]), q(1, 2));
        assert_eq!(h.piece(2).unwrap().component(0).coeff(&[3]), q(1, 6));
        assert_eq!(h.piece(3).unwrap().component(0).coeff(&[4]), q(1, 24));
        // conjugation identity, exact
        let sys = LinearHomological::new(&part, Tolerances::default());
        let defect = conjugacy_defect(&sys, &w, &nf, H::max_coeff_modulus);
        assert_eq!(defect, 0.0);
    }

    /// The series driver on the same map: hand-checked sweep values and the
    /// same transform coordinates.
    #[test]
    fn schroeder_lambda_two_series_driver() {
        let part = lin(&[(2, 1, 0, 1)]);
        let mut f = GradedPolyField::zero(1, 6, Mode::Exact);
        f.set_term(mono(1, 0, &[2], 1, 1)).unwrap();
        let (nf, _) = normalize_poly(&part, &f, 3, Driver::Series, Tolerances::default()).unwrap();
        assert!(nf.z.is_zero());
        // X = {-z^2/2, z^3/12, 0}
        assert_eq!(nf.x.get(1).unwrap().component(0).coeff(&[2]), q(-1, 2));
        assert_eq!(nf.x.get(2).unwrap().component(0).coeff(&[3]), q(1, 12));
        assert!(nf.x.get(3).is_none());
        // the composed transform has the same coordinate image ln(1+x)
        let coords = transform_coords(&nf);
        assert_eq!(coords.piece(1).unwrap().component(0).coeff(&[2]), q(-1, 2));
        assert_eq!(coords.piece(2).unwrap().component(0).coeff(&[3]), q(1, 3));
        assert_eq!(coords.piece(3).unwrap().component(0).coeff(&[4]), q(-1, 4));
    }

    #[test]
    fn already_normal_input_is_fixed_point() {
        // λ1 = 4, λ2 = 2: the monomial x2^2 e_1 has λ^k/λ_1 = 4/4 = 1
        let part = lin(&[(4, 1, 0, 1), (2, 1, 0, 1)]);
        let sys = LinearHomological::new(&part, Tolerances::default());
        let w1 = mono(2, 0, &[0, 2], 1, 1);
        let w = GenSeq::from_single(w1.clone(), 4).unwrap();
        let nf = normalize_lie_transform(&sys, &w, 4).unwrap();
        assert!(nf.x.is_zero());
        assert_eq!(nf.z.get(1).unwrap(), &w1);
        let nf2 = normalize_lie_series(&sys, &w, 4).unwrap();
        assert!(nf2.x.is_zero());
        assert_eq!(nf2.z.get(1).unwrap(), &w1);
    }

    #[test]
    fn drivers_agree_on_nonresonant_two_dim() {
        let part = lin(&[(2, 1, 0, 1), (-3, 1, 0, 1)]);
        let mut f = GradedPolyField::zero(2, 4, Mode::Exact);
        f.set_term(mono(2, 0, &[2, 0], 1, 1).add(&mono(2, 1, &[1, 1], 1, 2)))
            .unwrap();
        f.set_term(mono(2, 1, &[3, 0], -1, 3)).unwrap();
        let (nf_t, w) =
            normalize_poly(&part, &f, 4, Driver::Transform, Tolerances::default()).unwrap();
        let (nf_s, _) =
            normalize_poly(&part, &f, 4, Driver::Series, Tolerances::default()).unwrap();
        assert!(nf_t.z.is_zero());
        assert!(nf_s.z.is_zero());
        let a = transform_coords(&nf_t);
        let b = transform_coords(&nf_s);
        for s in 1..=4 {
            assert_eq!(a.piece(s), b.piece(s), "transform coordinates at order {s}");
        }
        let sys = LinearHomological::new(&part, Tolerances::default());
        assert_eq!(conjugacy_defect(&sys, &w, &nf_t, H::max_coeff_modulus), 0.0);
    }

    #[test]
    fn resonant_monomial_routed_to_z() {
        // λ = i with a z^5 perturbation (order 4): Z_4 absorbs it and the
        // conjugation identity still holds exactly
        let part = lin(&[(0, 1, 1, 1)]);
        let mut f = GradedPolyField::zero(1, 6, Mode::Exact);
        f.set_term(mono(1, 0, &[5], 1, 1)).unwrap();
        let (nf, w) =
            normalize_poly(&part, &f, 6, Driver::Transform, Tolerances::default()).unwrap();
        assert!(nf.x.is_zero());
        let z4 = nf.z.get(4).unwrap();
        // W_4 = λ^{-1} z^5 = -i z^5 and Z_4 = W_4
        assert_eq!(z4.component(0).coeff(&[5]), Coeff::from_ratio(0, 1, -1, 1));
        assert_eq!(nf.diagnostics.min_divisor, Some(0.0));
        assert_eq!(nf.diagnostics.resonant_modes.len(), 1);
        assert_eq!(nf.diagnostics.resonant_modes[0].key, "5");
        let sys = LinearHomological::new(&part, Tolerances::default());
        assert_eq!(conjugacy_defect(&sys, &w, &nf, H::max_coeff_modulus), 0.0);
    }

    fn caps() -> FtCaps {
        FtCaps {
            k1: 1,
            action_cap: 4,
        }
    }

    fn kron_const(om: f64) -> KroneckerPart {
        KroneckerPart::new(vec![Poly::constant(1, Coeff::from_f64(om, 0.0))], 1, caps()).unwrap()
    }

    fn slice_mode(k: i32, re: f64, im: f64) -> FtSlice {
        let mut s = FtSlice::zero(1, 1, Mode::Float);
        s.accumulate(
            ModeKey(vec![k].into_boxed_slice()),
            Poly::constant(1, Coeff::from_f64(re, im)),
        );
        s
    }

    fn cos_phi() -> FtSlice {
        slice_mode(1, 0.5, 0.0).add(&slice_mode(-1, 0.5, 0.0))
    }

    fn sin_phi() -> FtSlice {
        slice_mode(1, 0.0, -0.5).add(&slice_mode(-1, 0.0, 0.5))
    }

    #[test]
    fn kronecker_solver_k0_goes_to_kernel() {
        let kron = kron_const(1.3);
        let sys = KroneckerHomological::new(&kron, Tolerances::default());
        let mut psi = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        let mut s = FtSlice::zero(1, 1, Mode::Float);
        s.accumulate(ModeKey::zero(1), Poly::var(1, 0, Mode::Float));
        psi.set_action(0, s).unwrap();
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        assert!(x.is_zero());
        assert_eq!(&z, &psi);
    }

    #[test]
    fn kronecker_solver_divisor_minus_two() {
        // ω = π, mode k = 1: divisor e^{iπ} - 1 = -2, X angle = -α/2
        let kron = kron_const(std::f64::consts::PI);
        let sys = KroneckerHomological::new(&kron, Tolerances::default());
        let mut psi = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        psi.set_angle(0, slice_mode(1, 1.0, 0.0)).unwrap();
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        assert!(z.is_zero());
        let c = x
            .angle_comp(0)
            .mode_coeff(&ModeKey(vec![1].into_boxed_slice()))
            .unwrap()
            .coeff(&[0])
            .to_c64();
        assert!((c - num_complex::Complex64::new(-0.5, 0.0)).norm() < 1e-12);
        // with constant ω the B block vanishes and the blocks decouple:
        // a pure action-block Ψ solves with a zero angle block
        let mut psi2 = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        psi2.set_action(0, slice_mode(1, 1.0, 0.0)).unwrap();
        let (x2, _) = sys.solve(&psi2, &mut d).unwrap();
        assert!(x2.angle_comp(0).is_zero());
        assert!(!x2.action_comp(0).is_zero());
    }

    #[test]
    fn kronecker_solver_rejects_action_dependent_frequencies() {
        let caps = caps();
        let om = Poly::constant(1, Coeff::from_f64(0.9, 0.0)).add(&Poly::var(1, 0, Mode::Float));
        let kron = KroneckerPart::new(vec![om], 1, caps).unwrap();
        let sys = KroneckerHomological::new(&kron, Tolerances::default());
        let mut psi = FtTerm::zero(1, 1, 1, Mode::Float, caps);
        psi.set_angle(0, slice_mode(1, 1.0, 0.0)).unwrap();
        let mut d = Diagnostics::default();
        assert!(matches!(
            sys.solve(&psi, &mut d),
            Err(Error::Resonance { order: 1, .. })
        ));
    }

    #[test]
    fn symmetry_classification_and_table() {
        let mut pm = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        pm.set_angle(0, cos_phi()).unwrap();
        pm.set_action(0, sin_phi()).unwrap();
        assert_eq!(classify_symmetry(&pm, 1e-12), SymmetryType::PlusMinus);

        let mut mp = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        mp.set_angle(0, sin_phi()).unwrap();
        mp.set_action(0, cos_phi()).unwrap();
        assert_eq!(classify_symmetry(&mp, 1e-12), SymmetryType::MinusPlus);

        // {(+,-), (+,-)} -> (-,+)
        let mut pm2 = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        pm2.set_angle(0, cos_phi().add(&slice_mode(0, 0.3, 0.0)))
            .unwrap();
        pm2.set_action(0, sin_phi().scale(&Coeff::from_f64(-2.0, 0.0)))
            .unwrap();
        let c = pm.commutator(&pm2);
        assert!(c.minus_plus_defect() < 1e-12);
        // {(+,-), (-,+)} -> (+,-)
        let c2 = pm.commutator(&mp);
        assert!(c2.plus_minus_defect() < 1e-12);
        // {(-,+), (-,+)} -> (-,+)
        let mut mp2 = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        mp2.set_angle(0, sin_phi().scale(&Coeff::from_f64(0.7, 0.0)))
            .unwrap();
        mp2.set_action(0, slice_mode(0, 1.1, 0.0)).unwrap();
        let c3 = mp.commutator(&mp2);
        assert!(c3.minus_plus_defect() < 1e-12);

        let mut untyped = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        untyped.set_angle(0, cos_phi().add(&sin_phi())).unwrap();
        assert_eq!(classify_symmetry(&untyped, 1e-12), SymmetryType::None);
    }

    #[test]
    fn reversible_golden_rotation() {
        let om = std::f64::consts::TAU * (5f64.sqrt() - 1.0) / 2.0;
        let kron = kron_const(om);
        let mut t = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        t.set_angle(0, cos_phi()).unwrap();
        t.set_action(0, sin_phi()).unwrap();
        let mut f = FtField::zero(1, 1, 4, Mode::Float, caps());
        f.set_term(t).unwrap();
        let out = normalize_reversible(&kron, &f, 4, Tolerances::default()).unwrap();
        // Z_1 = 0: both order-1 means vanish
        assert!(out.nf.z.get(1).is_none());
        // all Z action blocks vanish; only k = 0 angle modes remain
        for (_, z) in out.nf.z.iter() {
            assert!(z.action_comp(0).max_coeff_modulus() < 1e-10);
            for (k, _) in z.angle_comp(0).modes() {
                assert!(k.is_zero());
            }
        }
        // ω' stays within O(ε^2) of ω
        let w0 = out.omega_prime[0].coeff(&[0]).to_c64().re;
        assert!((w0 - om).abs() < 0.5);
        // rejects a non-reversible perturbation (odd angle block)
        let mut bad = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        bad.set_angle(0, sin_phi()).unwrap();
        let mut fb = FtField::zero(1, 1, 2, Mode::Float, caps());
        fb.set_term(bad).unwrap();
        assert!(matches!(
            normalize_reversible(&kron, &fb, 2, Tolerances::default()),
            Err(Error::Symmetry {
                order: 1,
                block: "angle"
            })
        ));
    }

    #[test]
    fn solve_reconstructs_psi_linear() {
        // D X + Z = Ψ exactly: apply_r(X) - X + Z == Ψ
        let part = lin(&[(2, 1, 0, 1), (-3, 1, 1, 2)]);
        let sys = LinearHomological::new(&part, Tolerances::default());
        let psi = mono(2, 0, &[2, 1], 5, 3)
            .add(&mono(2, 1, &[0, 3], -1, 7))
            .add(&mono(2, 1, &[3, 0], 2, 1));
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        let dx = sys.apply_r(&x, false).add(&x.neg());
        assert_eq!(dx.add(&z), psi);
    }

    #[test]
    fn solve_reconstructs_psi_kronecker() {
        let kron = kron_const(2.3);
        let sys = KroneckerHomological::new(&kron, Tolerances::default());
        let mut psi = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        psi.set_angle(0, cos_phi().add(&slice_mode(0, 0.7, 0.0))).unwrap();
        psi.set_action(0, sin_phi()).unwrap();
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        let dx = sys.apply_r(&x, false).add(&x.neg());
        let diff = dx.add(&z).add(&psi.neg());
        assert!(diff.max_coeff_modulus() < 1e-14);
    }

    #[test]
    fn near_resonant_divisor_warns_and_solves() {
        // λ = 1 + 1e-8: the degree-2 divisor λ^2/λ - 1 = 1e-8 sits between
        // the resonance threshold and the divisor floor
        let part = LinearPart::new(vec![Coeff::from_f64(1.0 + 1e-8, 0.0)], None).unwrap();
        let sys = LinearHomological::new(&part, Tolerances::default());
        let psi = HomogeneousPolyField::monomial(1, 0, &[2], Coeff::from_f64(1.0, 0.0)).unwrap();
        let mut d = Diagnostics::default();
        let (x, z) = sys.solve(&psi, &mut d).unwrap();
        assert!(z.is_zero(), "near-resonant monomials are still solved");
        assert!(!x.is_zero());
        assert_eq!(d.near_resonant.len(), 1);
        assert!(d.warnings[0].contains("near-resonant"));
        assert!(d.min_divisor.unwrap() < 1e-6);
    }

    #[test]
    fn kronecker_drivers_agree_on_nonreversible_spec() {
        // mixed-parity perturbation: the general extraction path runs,
        // and both drivers give the same kernel sequence Z
        let kron = kron_const(2.4);
        let mut t = FtTerm::zero(1, 1, 1, Mode::Float, caps());
        t.set_angle(0, sin_phi().add(&slice_mode(0, 0.2, 0.0))).unwrap();
        t.set_action(0, cos_phi()).unwrap();
        let mut f = FtField::zero(1, 1, 3, Mode::Float, caps());
        f.set_term(t).unwrap();
        let spec = crate::represent::MapSpec {
            unperturbed: crate::represent::Unperturbed::Kronecker(kron.clone()),
            perturbation: crate::represent::Perturbation::Ft(f),
            order: 3,
            mode: Mode::Float,
        };
        let w = match crate::represent::factor_map(&spec).unwrap().1 {
            crate::represent::GenSeqKind::Ft(w) => w,
            _ => unreachable!(),
        };
        let sys = KroneckerHomological::new(&kron, Tolerances::default());
        let nf_t = normalize_lie_transform(&sys, &w, 3).unwrap();
        let nf_s = normalize_lie_series(&sys, &w, 3).unwrap();
        for s in 1..=3 {
            match (nf_t.z.get(s), nf_s.z.get(s)) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    let diff = a.add(&b.neg());
                    assert!(diff.max_coeff_modulus() < 1e-12, "Z at order {s}");
                }
                (a, b) => panic!("order {s}: {a:?} vs {b:?}"),
            }
        }
        // both transforms conjugate the map
        let d_t = crate::oracle::map_conjugacy_defect_kronecker(&kron, &w, &nf_t).unwrap();
        let d_s = crate::oracle::map_conjugacy_defect_kronecker(&kron, &w, &nf_s).unwrap();
        assert!(d_t < 1e-12, "transform driver defect {d_t:.3e}");
        assert!(d_s < 1e-12, "series driver defect {d_s:.3e}");
    }

    #[test]
    fn reversible_zero_perturbation_keeps_omega() {
        let kron = kron_const(1.0);
        let f = FtField::zero(1, 1, 3, Mode::Float, caps());
        let out = normalize_reversible(&kron, &f, 3, Tolerances::default()).unwrap();
        assert!(out.nf.x.is_zero());
        assert!(out.nf.z.is_zero());
        assert_eq!(out.omega_prime[0].coeff(&[0]).to_c64().re, 1.0);
    }
}
