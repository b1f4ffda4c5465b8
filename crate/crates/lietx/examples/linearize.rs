//! Linearize the quadratic map z' = (2/5) z + z² in exact arithmetic and
//! print the normalizing sequence.

use lietx::algebra::{GradedPolyField, HomogeneousPolyField};
use lietx::normalform::{normalize_poly, transform_coords, Driver, Tolerances};
use lietx::represent::LinearPart;
use lietx::{Coeff, Mode};

fn main() {
    let lin = LinearPart::new(vec![Coeff::from_ratio(2, 5, 0, 1)], None).unwrap();
    let mut pert = GradedPolyField::zero(1, 6, Mode::Exact);
    let quad = HomogeneousPolyField::monomial(1, 0, &[2], Coeff::from_int(1, Mode::Exact)).unwrap();
    pert.set_term(quad).unwrap();

    let (nf, _w) = normalize_poly(&lin, &pert, 6, Driver::Transform, Tolerances::default()).unwrap();
    assert!(nf.z.is_zero()); // nonresonant: the map linearizes

    println!("normalizing sequence:");
    for (s, x) in nf.x.iter() {
        println!("  X_{s} = {} z^{}", x.component(0).coeff(&[s + 1]), s + 1);
    }
    println!("transform coordinates y(x):");
    for (s, piece) in transform_coords(&nf).pieces() {
        println!("  order {s}: {} z^{}", piece.component(0).coeff(&[s + 1]), s + 1);
    }
    match nf.diagnostics.min_divisor {
        Some(d) => println!("min |divisor| = {d}"),
        None => println!("no divisors encountered"),
    }
}
