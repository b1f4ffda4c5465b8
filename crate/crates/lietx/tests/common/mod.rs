//! Shared helpers for the acceptance suite: seeded random series and the
//! independent Koenigs linearization oracle.

use lietx::algebra::{FtCaps, FtSlice, FtTerm, HomogeneousPolyField, ModeKey};
use lietx::coeff::{Coeff, Mode};
use lietx::lie::GenSeq;
use lietx::poly::Poly;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_q(rng: &mut ChaCha8Rng) -> Coeff {
    let num = rng.gen_range(-9i64..=9);
    let den = rng.gen_range(1i64..=3);
    let inum = rng.gen_range(-4i64..=4);
    Coeff::from_ratio(num, den, inum, 2)
}

/// Exponent vectors of total degree `degree` in `dim` variables.
pub fn monomials_of_degree(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, degree: u32, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 1 {
            let mut full = acc.clone();
            full.push(degree);
            out.push(full);
            return;
        }
        for e in 0..=degree {
            acc.push(e);
            rec(dim - 1, degree - e, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out
}

/// Sparse homogeneous field with a couple of random monomials per component.
pub fn rand_field(
    rng: &mut ChaCha8Rng,
    dim: usize,
    degree: u32,
    per_comp: usize,
) -> HomogeneousPolyField {
    let monos = monomials_of_degree(dim, degree);
    let mut f = HomogeneousPolyField::zero(dim, degree, Mode::Exact);
    for j in 0..dim {
        let mut comp = Poly::zero(dim, Mode::Exact);
        for _ in 0..per_comp {
            let exps = &monos[rng.gen_range(0..monos.len())];
            comp.add_term(lietx::poly::Mono(exps.clone().into_boxed_slice()), rand_q(rng));
        }
        f.set_component(j, comp);
    }
    f
}

pub fn rand_seq(rng: &mut ChaCha8Rng, dim: usize, n: u32, per_comp: usize) -> GenSeq<HomogeneousPolyField> {
    let mut seq = GenSeq::new(n);
    for s in 1..=n {
        let f = rand_field(rng, dim, s + 1, per_comp);
        if !f.is_zero() {
            seq.set(f).unwrap();
        }
    }
    seq
}

pub fn rand_scalar(rng: &mut ChaCha8Rng, dim: usize, max_degree: u32, terms: usize) -> Poly {
    let mut p = Poly::zero(dim, Mode::Exact);
    for _ in 0..terms {
        let d = rng.gen_range(1..=max_degree);
        let monos = monomials_of_degree(dim, d);
        let exps = &monos[rng.gen_range(0..monos.len())];
        p.add_term(lietx::poly::Mono(exps.clone().into_boxed_slice()), rand_q(rng));
    }
    p
}

/// Koenigs linearization of `z' = λ z + Σ_d a_d z^d` solved order by order
/// from `h(λ y) = λ h(y) + Σ_d a_d h(y)^d`, h(y) = y + Σ h_d y^d. Entirely
/// independent of the Lie machinery.
pub fn koenigs_oracle(lambda: &Coeff, pert: &[(u32, Coeff)], max_degree: u32) -> Vec<(u32, Coeff)> {
    let mode = lambda.mode();
    let mut h = Poly::var(1, 0, mode);
    for d in 2..=max_degree {
        // rhs = λ h + Σ a_p h^p using h through degree d - 1
        let mut rhs = h.scale(lambda);
        for (p, a) in pert {
            let mut power = Poly::constant(1, Coeff::one(mode));
            for _ in 0..*p {
                power = power.mul(&h, Some(d));
            }
            rhs = rhs.add(&power.scale(a));
        }
        // h_d (λ^d - λ) = [y^d] rhs
        let divisor = lambda.powi(i64::from(d)).sub(lambda);
        let hd = rhs.coeff(&[d]).div(&divisor);
        h.add_term(lietx::poly::Mono(vec![d].into_boxed_slice()), hd);
    }
    (2..=max_degree).map(|d| (d, h.coeff(&[d]))).collect()
}

/// Random trigonometric polynomial slice with the requested angle parity
/// (n = m = 1); sign = +1 even, -1 odd.
pub fn rand_parity_slice(rng: &mut ChaCha8Rng, kmax: i32, sign: f64) -> FtSlice {
    let mut s = FtSlice::zero(1, 1, Mode::Float);
    for k in 1..=kmax {
        let deg = rng.gen_range(0..=1u32);
        let amp = rng.gen_range(-1.0..1.0);
        // even: c cos(kφ) terms; odd: c sin(kφ) terms (times I^deg)
        let (cp, cm) = if sign > 0.0 {
            (Coeff::from_f64(amp / 2.0, 0.0), Coeff::from_f64(amp / 2.0, 0.0))
        } else {
            (Coeff::from_f64(0.0, -amp / 2.0), Coeff::from_f64(0.0, amp / 2.0))
        };
        let mono = Poly::monomial(1, &[deg], Coeff::one(Mode::Float));
        s.accumulate(ModeKey(vec![k].into_boxed_slice()), mono.scale(&cp));
        s.accumulate(ModeKey(vec![-k].into_boxed_slice()), mono.scale(&cm));
    }
    if sign > 0.0 && rng.gen_bool(0.5) {
        s.accumulate(
            ModeKey::zero(1),
            Poly::monomial(1, &[rng.gen_range(0..=1u32)], Coeff::from_f64(rng.gen_range(-1.0..1.0), 0.0)),
        );
    }
    s
}

/// Random field of symmetry type (+,-) or (-,+).
pub fn rand_typed_field(rng: &mut ChaCha8Rng, plus_minus: bool, caps: FtCaps) -> FtTerm {
    let mut t = FtTerm::zero(1, 1, 1, Mode::Float, caps);
    let (angle_sign, action_sign) = if plus_minus { (1.0, -1.0) } else { (-1.0, 1.0) };
    t.set_angle(0, rand_parity_slice(rng, caps.k1 as i32, angle_sign))
        .unwrap();
    t.set_action(0, rand_parity_slice(rng, caps.k1 as i32, action_sign))
        .unwrap();
    t
}
