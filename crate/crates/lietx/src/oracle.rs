//! Independent brute-force verifiers: direct series substitution (with
//! explicit Jacobian handling) and floating-point map iteration.
//!
//! Nothing here goes through the Lie-operator recursions; agreement between
//! the two routes is the executable form of the exchange theorem.

use crate::algebra::{FtCaps, FtField, FtScalar, FtSlice, FtTerm, GradedPolyField, HomogeneousPolyField, ModeKey};
use crate::coeff::{ratio, Coeff, Mode};
use crate::error::{Error, Result};
use crate::lie::CoordSeries;
use crate::normalform::{inverse_transform_coords, transform_coords, NormalForm};
use crate::poly::Poly;
use crate::represent::{poly_map_series, KroneckerPart, LinearPart, MapSpec, Perturbation, Unperturbed};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Worker pool for sample evaluation, capped by `LIETX_THREADS`.
fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("LIETX_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}

// ---------------------------------------------------------------- polynomial

/// Full component series of a near-identity polynomial map.
pub fn poly_coord_map_series(
    map: &CoordSeries<HomogeneousPolyField>,
    dim: usize,
    mode: Mode,
) -> Vec<Poly> {
    let mut comps: Vec<Poly> = (0..dim).map(|j| Poly::var(dim, j, mode)).collect();
    for (_, piece) in map.pieces() {
        for (j, c) in comps.iter_mut().enumerate() {
            *c = c.add(piece.component(j));
        }
    }
    comps
}

/// Scalar substitution `f(y)|_{y = map(x)}`, truncated at total degree `cap`.
pub fn substitute_scalar_poly(f: &Poly, map: &[Poly], cap: u32) -> Poly {
    f.compose(map, cap)
}

fn invert_matrix(a: &[Vec<Coeff>], mode: Mode) -> Result<Vec<Vec<Coeff>>> {
    let n = a.len();
    let mut work: Vec<Vec<Coeff>> = a.to_vec();
    let mut inv: Vec<Vec<Coeff>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Coeff::one(mode)
                    } else {
                        Coeff::zero(mode)
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                work[p][col]
                    .modulus()
                    .partial_cmp(&work[q][col].modulus())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if work[pivot][col].is_exact_zero() || work[pivot][col].modulus() == 0.0 {
            return Err(Error::NonInvertibleLinear);
        }
        work.swap(col, pivot);
        inv.swap(col, pivot);
        let d = work[col][col].clone();
        for j in 0..n {
            work[col][j] = work[col][j].div(&d);
            inv[col][j] = inv[col][j].div(&d);
        }
        for row in 0..n {
            if row == col || work[row][col].is_exact_zero() {
                continue;
            }
            let factor = work[row][col].clone();
            for j in 0..n {
                let w = work[col][j].mul(&factor);
                work[row][j] = work[row][j].sub(&w);
                let v = inv[col][j].mul(&factor);
                inv[row][j] = inv[row][j].sub(&v);
            }
        }
    }
    Ok(inv)
}

/// Series inverse of the Jacobian of a polynomial map, by Neumann iteration
/// on the nonlinear part: J = A(1 + A^{-1}K), J^{-1} = (Σ (-A^{-1}K)^p) A^{-1}.
pub fn jacobian_inverse_poly(map: &[Poly], cap: u32) -> Result<Vec<Vec<Poly>>> {
    let dim = map.len();
    let mode = map[0].mode();
    let jac: Vec<Vec<Poly>> = map
        .iter()
        .map(|mj| (0..dim).map(|k| mj.partial(k)).collect())
        .collect();
    let a: Vec<Vec<Coeff>> = jac
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| p.coeff(&vec![0u32; dim]))
                .collect()
        })
        .collect();
    let a_inv = invert_matrix(&a, mode)?;
    // M = A^{-1} (J - A), entries of degree >= 1
    let mut m: Vec<Vec<Poly>> = vec![vec![Poly::zero(dim, mode); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let mut acc = Poly::zero(dim, mode);
            for (l, jac_row) in jac.iter().enumerate() {
                let mut k_entry = jac_row[j].clone();
                k_entry.add_term(crate::poly::Mono::constant(dim), a[l][j].neg());
                acc = acc.add(&k_entry.scale(&a_inv[i][l]));
            }
            *entry = acc;
        }
    }
    // S = sum_p (-M)^p
    let ident = |i: usize, j: usize| {
        if i == j {
            Poly::constant(dim, Coeff::one(mode))
        } else {
            Poly::zero(dim, mode)
        }
    };
    let mut s: Vec<Vec<Poly>> = (0..dim).map(|i| (0..dim).map(|j| ident(i, j)).collect()).collect();
    let mut power: Vec<Vec<Poly>> = s.clone();
    for p in 1..=cap {
        let mut next = vec![vec![Poly::zero(dim, mode); dim]; dim];
        let mut nonzero = false;
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = Poly::zero(dim, mode);
                for (l, m_row) in m.iter().enumerate() {
                    acc = acc.add(&power[i][l].mul(&m_row[j], Some(cap)).neg());
                }
                if !acc.is_zero() {
                    nonzero = true;
                }
                next[i][j] = acc;
            }
        }
        power = next;
        for i in 0..dim {
            for j in 0..dim {
                s[i][j] = s[i][j].add(&power[i][j]);
            }
        }
        if !nonzero {
            break;
        }
        let _ = p;
    }
    // J^{-1} = S A^{-1}
    let mut out = vec![vec![Poly::zero(dim, mode); dim]; dim];
    for i in 0..dim {
        for (j, out_entry) in out[i].iter_mut().enumerate().take(dim) {
            let mut acc = Poly::zero(dim, mode);
            for l in 0..dim {
                acc = acc.add(&s[i][l].scale(&a_inv[l][j]));
            }
            *out_entry = acc;
        }
    }
    Ok(out)
}

/// Vector-field substitution `J^{-1} v(y)|_{y = map(x)}`, the left-hand side
/// of the exchange theorem. Components are returned as plain series.
pub fn substitute_field_poly(
    v: &GradedPolyField,
    map: &[Poly],
    cap: u32,
) -> Result<Vec<Poly>> {
    let dim = map.len();
    let mode = map[0].mode();
    let j_inv = jacobian_inverse_poly(map, cap)?;
    // v components summed over orders, composed with the map
    let mut composed: Vec<Poly> = vec![Poly::zero(dim, mode); dim];
    for (_, t) in v.terms() {
        for (k, c) in composed.iter_mut().enumerate() {
            *c = c.add(&t.component(k).compose(map, cap));
        }
    }
    let mut out = vec![Poly::zero(dim, mode); dim];
    for (j, out_j) in out.iter_mut().enumerate() {
        let mut acc = Poly::zero(dim, mode);
        for (k, comp) in composed.iter().enumerate() {
            acc = acc.add(&j_inv[j][k].mul(comp, Some(cap)));
        }
        *out_j = acc;
    }
    Ok(out)
}

// ------------------------------------------------------------ Fourier-Taylor

/// Component c (0..n angles, then n..n+m actions) of a near-identity
/// Fourier--Taylor map, as a graded scalar series of its corrections.
pub fn ft_component_series(
    map: &CoordSeries<FtTerm>,
    c: usize,
    n: usize,
    m: usize,
    mode: Mode,
    caps: FtCaps,
) -> FtScalar {
    let mut acc = FtScalar::zero(n, m, mode, caps);
    for (s, piece) in map.pieces() {
        acc.accumulate(*s, piece.comp(c).clone());
    }
    acc
}

/// c(I + v) for an action polynomial and graded scalar shifts.
fn compose_action_series(
    c: &Poly,
    shifts: &[FtScalar],
    n: usize,
    m: usize,
    mode: Mode,
    caps: FtCaps,
    cap: u32,
) -> FtScalar {
    let mut acc = FtScalar::zero(n, m, mode, caps);
    let vars: Vec<FtScalar> = (0..m)
        .map(|l| {
            let mut slice = FtSlice::zero(n, m, mode);
            slice.accumulate(ModeKey::zero(n), Poly::var(m, l, mode));
            FtScalar::from_slice(0, slice, caps).add(&shifts[l])
        })
        .collect();
    for (mono, coeff) in c.terms() {
        let mut unit = FtSlice::zero(n, m, mode);
        unit.accumulate(ModeKey::zero(n), Poly::constant(m, coeff.clone()));
        let mut term = FtScalar::from_slice(0, unit, caps);
        for (l, &e) in mono.0.iter().enumerate() {
            for _ in 0..e {
                term = term.mul(&vars[l], cap);
            }
        }
        acc = acc.add(&term);
    }
    acc
}

/// exp(i <k, u>) for angle-correction series u of order >= 1.
fn exp_ik_dot(
    k: &ModeKey,
    u: &[FtScalar],
    n: usize,
    m: usize,
    mode: Mode,
    caps: FtCaps,
    cap: u32,
) -> FtScalar {
    let mut w = FtScalar::zero(n, m, mode, caps);
    for (j, uj) in u.iter().enumerate() {
        if k.0[j] != 0 {
            w = w.add(&uj.scale_br(&ratio(i64::from(k.0[j]), 1)));
        }
    }
    // i * w
    let iw = {
        let mut acc = FtScalar::zero(n, m, mode, caps);
        for (s, slice) in w.orders() {
            acc.accumulate(*s, slice.map(|p| p.scale(&Coeff::from_f64(0.0, 1.0))));
        }
        acc
    };
    let mut acc = FtScalar::one(n, m, mode, caps);
    let mut term = acc.clone();
    let mut p: i64 = 1;
    loop {
        term = term.mul(&iw, cap).scale_br(&ratio(1, p));
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
        p += 1;
        if p > i64::from(cap) + 1 {
            break;
        }
    }
    acc
}

/// Scalar substitution for Fourier--Taylor series:
/// `f((φ, I) + shift + corrections)` with an optional constant angle shift.
pub fn substitute_scalar_ft(
    f: &FtScalar,
    shift: Option<&[f64]>,
    map: &CoordSeries<FtTerm>,
    cap: u32,
) -> FtScalar {
    let n = f.n();
    let m = f.m();
    let mode = f.mode();
    let caps = f.caps();
    let u: Vec<FtScalar> = (0..n)
        .map(|j| ft_component_series(map, j, n, m, mode, caps))
        .collect();
    let v: Vec<FtScalar> = (0..m)
        .map(|l| ft_component_series(map, n + l, n, m, mode, caps))
        .collect();
    let mut out = FtScalar::zero(n, m, mode, caps);
    for (s, slice) in f.orders() {
        for (k, c) in slice.modes() {
            // c(I + v) * e^{i<k, ω>} * e^{i<k, u>} * e^{i<k, φ>}
            let mut term = compose_action_series(c, &v, n, m, mode, caps, cap);
            if let Some(w) = shift {
                let arg: f64 = k
                    .0
                    .iter()
                    .zip(w.iter())
                    .map(|(&kj, &wj)| f64::from(kj) * wj)
                    .sum();
                let ph = Complex64::new(0.0, arg).exp();
                term = term.scale(&Coeff::from_f64(ph.re, ph.im));
            }
            let e = exp_ik_dot(k, &u, n, m, mode, caps, cap);
            term = term.mul(&e, cap);
            // re-grade: contributions of the order-s slice start at order s
            let mut regraded = FtScalar::zero(n, m, mode, caps);
            for (ds, sl) in term.orders() {
                regraded.accumulate(s + ds, sl.clone());
            }
            out = out.add(&regraded.mode_shift(k)).truncate(i64::from(cap));
        }
    }
    out
}

/// Vector-field substitution `J^{-1} v(map)` for a near-identity
/// Fourier--Taylor map; components returned as graded scalar series over the
/// combined coordinates.
pub fn substitute_field_ft(
    v: &FtField,
    map: &CoordSeries<FtTerm>,
    cap: u32,
) -> Vec<FtScalar> {
    let n = v.n();
    let m = v.m();
    let mode = v.mode();
    let caps = v.caps();
    let dim = n + m;
    // composed components
    let composed: Vec<FtScalar> = (0..dim)
        .map(|c| {
            let mut comp = FtScalar::zero(n, m, mode, caps);
            for (s, t) in v.terms() {
                comp.accumulate(*s, t.comp(c).clone());
            }
            substitute_scalar_ft(&comp, None, map, cap)
        })
        .collect();
    // K_{jc} = ∂(corrections_j)/∂u_c; J = 1 + K; J^{-1} = Σ (-K)^p
    let comp_series: Vec<FtScalar> = (0..dim)
        .map(|c| ft_component_series(map, c, n, m, mode, caps))
        .collect();
    let deriv = |f: &FtScalar, c: usize| -> FtScalar {
        let mut acc = FtScalar::zero(n, m, mode, caps);
        for (s, slice) in f.orders() {
            let d = if c < n { slice.dphi(c) } else { slice.di(c - n) };
            acc.accumulate(*s, d);
        }
        acc
    };
    let k_mat: Vec<Vec<FtScalar>> = (0..dim)
        .map(|j| (0..dim).map(|c| deriv(&comp_series[j], c)).collect())
        .collect();
    let mut jinv: Vec<Vec<FtScalar>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    if i == j {
                        FtScalar::one(n, m, mode, caps)
                    } else {
                        FtScalar::zero(n, m, mode, caps)
                    }
                })
                .collect()
        })
        .collect();
    let mut power = jinv.clone();
    for _ in 1..=cap {
        let mut next: Vec<Vec<FtScalar>> = (0..dim)
            .map(|_| (0..dim).map(|_| FtScalar::zero(n, m, mode, caps)).collect())
            .collect();
        let mut nonzero = false;
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = FtScalar::zero(n, m, mode, caps);
                for (l, k_row) in k_mat.iter().enumerate() {
                    acc = acc.add(&power[i][l].mul(&k_row[j], cap).neg());
                }
                if !acc.is_zero() {
                    nonzero = true;
                }
                next[i][j] = acc;
            }
        }
        power = next;
        for i in 0..dim {
            for j in 0..dim {
                jinv[i][j] = jinv[i][j].add(&power[i][j]);
            }
        }
        if !nonzero {
            break;
        }
    }
    (0..dim)
        .map(|j| {
            let mut acc = FtScalar::zero(n, m, mode, caps);
            for (c, comp) in composed.iter().enumerate() {
                acc = acc.add(&jinv[j][c].mul(comp, cap));
            }
            acc.truncate(i64::from(cap))
        })
        .collect()
}

/// Regrade component series into a graded Fourier--Taylor field.
pub fn ft_components_to_field(
    comps: &[FtScalar],
    n: usize,
    m: usize,
    max_order: u32,
    mode: Mode,
    caps: FtCaps,
) -> Result<FtField> {
    let mut out = FtField::zero(n, m, max_order, mode, caps);
    for s in 1..=max_order {
        let mut term = FtTerm::zero(n, m, s, mode, caps);
        let mut any = false;
        for (c, comp) in comps.iter().enumerate() {
            if let Some(slice) = comp.term(s) {
                any = true;
                if c < n {
                    term.set_angle(c, slice.clone())?;
                } else {
                    term.set_action(c - n, slice.clone())?;
                }
            }
        }
        if any {
            out.set_term(term)?;
        }
    }
    Ok(out)
}

// ------------------------------------------------------------------ numerics

/// Trajectory of the polynomial map `x' = Λ x + Σ f_s(x)`.
pub fn iterate_linear(
    lin: &LinearPart,
    pert: &GradedPolyField,
    start: &[Complex64],
    steps: u32,
) -> Result<Vec<Vec<Complex64>>> {
    let comps = poly_map_series(lin, pert);
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut x = start.to_vec();
    out.push(x.clone());
    for _ in 0..steps {
        let next: Vec<Complex64> = comps.iter().map(|c| c.evaluate(&x)).collect();
        if next.iter().any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() > 1e12) {
            return Err(Error::Unsupported(
                "trajectory diverged beyond overflow threshold".into(),
            ));
        }
        x = next;
        out.push(x.clone());
    }
    Ok(out)
}

/// Trajectory of the Kronecker map `φ' = φ + ω(I) + f(φ,I), I' = I + g(φ,I)`
/// (real evaluation of the truncated series).
pub fn iterate_kronecker(
    kron: &KroneckerPart,
    pert: &FtField,
    start_angles: &[f64],
    start_actions: &[f64],
    steps: u32,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut phi = start_angles.to_vec();
    let mut act = start_actions.to_vec();
    out.push((phi.clone(), act.clone()));
    for _ in 0..steps {
        let (df, dg) = pert.evaluate(&phi, &act);
        let mut new_phi = Vec::with_capacity(phi.len());
        for (j, w) in kron.omega().iter().enumerate() {
            let base: Vec<Complex64> = act.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            new_phi.push(phi[j] + w.evaluate(&base).re + df[j].re);
        }
        let new_act: Vec<f64> = act
            .iter()
            .zip(dg.iter())
            .map(|(&i0, d)| i0 + d.re)
            .collect();
        if new_act.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return Err(Error::Unsupported(
                "trajectory diverged beyond overflow threshold".into(),
            ));
        }
        phi = new_phi;
        act = new_act;
        out.push((phi.clone(), act.clone()));
    }
    Ok(out)
}

// ------------------------------------------------------------------ residual

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub radius: f64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub order: u32,
    pub samples: u32,
}

/// Numeric conjugacy residual for the linear case: for sample points y with
/// |y| = ρ evaluate `h(NF(y)) - M(h(y))` where h is the truncated inverse
/// transform (normal to original coordinates).
pub fn conjugacy_residual_poly(
    lin: &LinearPart,
    pert: &GradedPolyField,
    nf: &NormalForm<HomogeneousPolyField>,
    radius: f64,
    samples: u32,
    seed: u64,
) -> ResidualReport {
    let dim = lin.dim();
    let mode = lin.mode();
    // h: normal -> original
    let h = poly_coord_map_series(&inverse_transform_coords(nf), dim, mode);
    // NF map: x'_j = T_Z(R x_j) = λ_j (T_Z x_j)
    let z_coords = poly_coord_map_series(&crate::lie::lie_transform_coords(&nf.z, nf.order), dim, mode);
    let nf_map: Vec<Poly> = z_coords
        .iter()
        .enumerate()
        .map(|(j, c)| c.scale(&lin.lambda()[j]))
        .collect();
    let orig = poly_map_series(lin, pert);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<Complex64>> = (0..samples)
        .map(|_| {
            let mut v: Vec<Complex64> = (0..dim)
                .map(|_| {
                    Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
                })
                .collect();
            let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for c in v.iter_mut() {
                *c *= radius / norm;
            }
            v
        })
        .collect();

    let residuals: Vec<f64> = thread_pool().install(|| {
        points
            .par_iter()
            .map(|y| {
                let nf_y: Vec<Complex64> = nf_map.iter().map(|c| c.evaluate(y)).collect();
                let lhs: Vec<Complex64> = h.iter().map(|c| c.evaluate(&nf_y)).collect();
                let hy: Vec<Complex64> = h.iter().map(|c| c.evaluate(y)).collect();
                let rhs: Vec<Complex64> = orig.iter().map(|c| c.evaluate(&hy)).collect();
                lhs.iter()
                    .zip(rhs.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    });
    summarize(residuals, radius, nf.order, samples)
}

/// Numeric conjugacy residual for a constant-frequency Kronecker normal
/// form, with the perturbation read as the generating sequence of the
/// near-identity factor (`x' = T_W ∘ R x`).
pub fn conjugacy_residual_kronecker(
    kron: &KroneckerPart,
    w_seq: &crate::lie::GenSeq<FtTerm>,
    nf: &NormalForm<FtTerm>,
    radius: f64,
    samples: u32,
    seed: u64,
) -> Result<ResidualReport> {
    let omega = kron
        .constant_omega()
        .ok_or_else(|| Error::Unsupported("residuals need constant frequencies".into()))?
        .to_vec();
    let n = kron.n();
    let m = kron.m();
    let h = inverse_transform_coords(nf);
    let w_corr = crate::lie::lie_transform_coords(w_seq, nf.order);
    let z_corr = crate::lie::lie_transform_coords(&nf.z, nf.order);

    let eval_map = |corr: &CoordSeries<FtTerm>,
                    phi: &[f64],
                    act: &[f64],
                    with_shift: bool|
     -> (Vec<f64>, Vec<f64>) {
        let mut dphi = vec![0.0; n];
        let mut dact = vec![0.0; m];
        for (_, piece) in corr.pieces() {
            let (a, b) = piece.evaluate(phi, act);
            for (x, y) in dphi.iter_mut().zip(a) {
                *x += y.re;
            }
            for (x, y) in dact.iter_mut().zip(b) {
                *x += y.re;
            }
        }
        let phi_out: Vec<f64> = phi
            .iter()
            .enumerate()
            .map(|(j, &p)| p + dphi[j] + if with_shift { omega[j] } else { 0.0 })
            .collect();
        let act_out: Vec<f64> = act.iter().zip(dact.iter()).map(|(&a, &d)| a + d).collect();
        (phi_out, act_out)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let phi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
            let mut act: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let norm: f64 = act.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                for a in act.iter_mut() {
                    *a *= radius / norm;
                }
            }
            (phi, act)
        })
        .collect();

    let residuals: Vec<f64> = thread_pool().install(|| {
        points
            .par_iter()
            .map(|(phi, act)| {
                // h(NF(y)): the normal-form map is x' = T_Z(R x): apply the
                // near-identity Z corrections first, then the rotation
                let (p1, a1) = eval_map(&z_corr, phi, act, false);
                let p1: Vec<f64> = p1
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| p + omega[j])
                    .collect();
                let (lp, la) = eval_map(&h, &p1, &a1, false);
                // M(h(y)) with M = ρ ∘ φ_W
                let (hp, ha) = eval_map(&h, phi, act, false);
                let (mp, ma) = eval_map(&w_corr, &hp, &ha, true);
                let dphi: f64 = lp
                    .iter()
                    .zip(mp.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let dact: f64 = la
                    .iter()
                    .zip(ma.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (dphi + dact).sqrt()
            })
            .collect()
    });
    Ok(summarize(residuals, radius, nf.order, samples))
}

fn summarize(residuals: Vec<f64>, radius: f64, order: u32, samples: u32) -> ResidualReport {
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let mean = if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().sum::<f64>() / residuals.len() as f64
    };
    ResidualReport {
        radius,
        max_residual: max,
        mean_residual: mean,
        order,
        samples,
    }
}

// ------------------------------------------------- series-level map identity

/// Coefficientwise defect of the conjugation `𝒯 ∘ M = M̃ ∘ 𝒯` for the
/// linear case, computed by direct substitution and resolved per order
/// (degree - 1); exact runs return zeros.
pub fn map_conjugacy_defects_poly(
    lin: &LinearPart,
    pert: &GradedPolyField,
    nf: &NormalForm<HomogeneousPolyField>,
) -> Vec<(u32, f64)> {
    let dim = lin.dim();
    let mode = lin.mode();
    let capdeg = nf.order + 1;
    let t = poly_coord_map_series(&transform_coords(nf), dim, mode);
    let m = poly_map_series(lin, pert);
    let z_coords = poly_coord_map_series(&crate::lie::lie_transform_coords(&nf.z, nf.order), dim, mode);
    let nf_map: Vec<Poly> = z_coords
        .iter()
        .enumerate()
        .map(|(j, c)| c.scale(&lin.lambda()[j]))
        .collect();
    let mut per_order = vec![0.0f64; nf.order as usize + 1];
    for j in 0..dim {
        let lhs = t[j].compose(&m, capdeg);
        let rhs = nf_map[j].compose(&t, capdeg);
        let diff = lhs.sub(&rhs);
        for s in 1..=nf.order {
            let part = diff.homogeneous_part(s + 1).max_coeff_modulus();
            per_order[s as usize] = per_order[s as usize].max(part);
        }
    }
    (1..=nf.order).map(|s| (s, per_order[s as usize])).collect()
}

/// Worst-order summary of [`map_conjugacy_defects_poly`].
pub fn map_conjugacy_defect_poly(
    lin: &LinearPart,
    pert: &GradedPolyField,
    nf: &NormalForm<HomogeneousPolyField>,
) -> f64 {
    map_conjugacy_defects_poly(lin, pert, nf)
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max)
}

/// Worst-order summary of [`map_conjugacy_defects_kronecker`].
pub fn map_conjugacy_defect_kronecker(
    kron: &KroneckerPart,
    w_seq: &crate::lie::GenSeq<FtTerm>,
    nf: &NormalForm<FtTerm>,
) -> Result<f64> {
    Ok(map_conjugacy_defects_kronecker(kron, w_seq, nf)?
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max))
}

/// Per-order conjugation defect for a constant-frequency Kronecker normal
/// form through order N.
pub fn map_conjugacy_defects_kronecker(
    kron: &KroneckerPart,
    w_seq: &crate::lie::GenSeq<FtTerm>,
    nf: &NormalForm<FtTerm>,
) -> Result<Vec<(u32, f64)>> {
    let omega: Vec<f64> = kron
        .constant_omega()
        .ok_or_else(|| Error::Unsupported("series conjugacy needs constant frequencies".into()))?
        .to_vec();
    let n = kron.n();
    let m = kron.m();
    let cap = nf.order;
    let caps = kron.caps();
    let mode = Mode::Float;
    let theta = transform_coords(nf);
    let w_corr = crate::lie::lie_transform_coords(w_seq, cap);
    let z_corr = crate::lie::lie_transform_coords(&nf.z, cap);
    let mut per_order = vec![0.0f64; cap as usize + 1];
    for c in 0..n + m {
        // lhs corrections: W corr + θ_c ∘ M  (M = ρ ∘ φ_W, shift ω)
        let theta_c = ft_component_series(&theta, c, n, m, mode, caps);
        let w_c = ft_component_series(&w_corr, c, n, m, mode, caps);
        let z_c = ft_component_series(&z_corr, c, n, m, mode, caps);
        let lhs = w_c.add(&substitute_scalar_ft(&theta_c, Some(&omega), &w_corr, cap));
        // rhs corrections: θ_c + Z corr ∘ 𝒯 shifted by ω ... the rotation
        // acts after the Z corrections on the transformed point:
        // M̃(y) = ρ(φ_Z(y)): component c of M̃ ∘ 𝒯 minus identity/shift is
        // θ_c + (Z corr)_c evaluated at 𝒯(x) — no extra shift on the
        // arguments of Z since ρ acts outside.
        let rhs = theta_c.add(&substitute_scalar_ft(&z_c, None, &theta, cap));
        let diff = lhs.add(&rhs.neg()).truncate(i64::from(cap));
        for (s, slice) in diff.orders() {
            if *s >= 1 && *s <= cap {
                per_order[*s as usize] = per_order[*s as usize].max(slice.max_coeff_modulus());
            }
        }
    }
    Ok((1..=cap).map(|s| (s, per_order[s as usize])).collect())
}

/// Reconstruction defect of a factorization: how far `x' = T_W(R x)` and
/// `x' = R(T_V x)` are from the specified map, coefficientwise.
pub fn reconstruction_defect(spec: &MapSpec, v: &crate::represent::GenSeqKind, w: &crate::represent::GenSeqKind) -> Result<f64> {
    match (&spec.unperturbed, &spec.perturbation, v, w) {
        (
            Unperturbed::Linear(lin),
            Perturbation::Poly(f),
            crate::represent::GenSeqKind::Poly(v),
            crate::represent::GenSeqKind::Poly(w),
        ) => {
            let dim = lin.dim();
            let mode = lin.mode();
            let capdeg = spec.order + 1;
            let truth = poly_map_series(lin, f);
            let mut worst = 0.0f64;
            // T_W(R x_j) = λ_j T_W(x_j)
            let w_coords = poly_coord_map_series(&crate::lie::lie_transform_coords(w, spec.order), dim, mode);
            for j in 0..dim {
                let lhs = w_coords[j].scale(&lin.lambda()[j]).truncate_degree(capdeg);
                worst = worst.max(lhs.sub(&truth[j].truncate_degree(capdeg)).max_coeff_modulus());
            }
            // R(T_V x_j): substitute Λx into the T_V coordinate functions
            let v_coords = poly_coord_map_series(&crate::lie::lie_transform_coords(v, spec.order), dim, mode);
            for j in 0..dim {
                let lhs = lin.apply_scalar(&v_coords[j], false).truncate_degree(capdeg);
                worst = worst.max(lhs.sub(&truth[j].truncate_degree(capdeg)).max_coeff_modulus());
            }
            Ok(worst)
        }
        (
            Unperturbed::Kronecker(kron),
            Perturbation::Ft(f),
            crate::represent::GenSeqKind::Ft(v),
            crate::represent::GenSeqKind::Ft(w),
        ) => {
            let n = kron.n();
            let m = kron.m();
            let caps = kron.caps();
            let cap = spec.order;
            let mut worst = 0.0f64;
            // truth corrections per combined component
            let truth: Vec<FtScalar> = (0..n + m)
                .map(|c| {
                    let mut acc = FtScalar::zero(n, m, Mode::Float, caps);
                    for (s, t) in f.terms() {
                        acc.accumulate(*s, t.comp(c).clone());
                    }
                    acc
                })
                .collect();
            // x' = T_W(R x): corrections are the T_W coords plus (T_W - 1)ω
            let w_corr = crate::lie::lie_transform_coords(w, cap);
            for (c, truth_c) in truth.iter().enumerate() {
                let mut lhs = ft_component_series(&w_corr, c, n, m, Mode::Float, caps);
                if c < n {
                    let omega_c = crate::represent::action_poly_slice(
                        &kron.omega()[c],
                        kron,
                        Mode::Float,
                    );
                    let omega_series = FtScalar::from_slice(0, omega_c, caps);
                    let transformed = apply_transform_scalar(w, &omega_series, cap);
                    lhs = lhs.add(&transformed.add(&omega_series.neg()));
                }
                let diff = lhs.add(&truth_c.neg()).truncate(i64::from(cap));
                worst = worst.max(diff.max_coeff_modulus());
            }
            // x' = R(T_V x): corrections are R applied to the T_V corrections
            let v_corr = crate::lie::lie_transform_coords(v, cap);
            for (c, truth_c) in truth.iter().enumerate() {
                let series = ft_component_series(&v_corr, c, n, m, Mode::Float, caps);
                let lhs = kron.apply_scalar(&series, false);
                let diff = lhs.add(&truth_c.neg()).truncate(i64::from(cap));
                worst = worst.max(diff.max_coeff_modulus());
            }
            Ok(worst)
        }
        _ => Err(Error::Spec("factorization kind does not match the map".into())),
    }
}

/// `T_seq` applied to a graded scalar (order-by-order Lie transform).
fn apply_transform_scalar(
    seq: &crate::lie::GenSeq<FtTerm>,
    f: &FtScalar,
    cap: u32,
) -> FtScalar {
    crate::lie::lie_transform_apply(seq, f, i64::from(cap))
}
