//! The Poincaré model of H^{p,q}: embed disc × sphere points, check the
//! quadric, and compare the pseudo-distance with the hyperbolic distance on
//! the totally geodesic H^p.

use nalgebra::DVector;
use robust_families::forms::{boost, random_so};
use robust_families::hpq::{pseudo_distance, PoincareModel};
use rand::SeedableRng;

fn main() -> robust_families::error::Result<()> {
    let model = PoincareModel::standard(2, 1)?;
    let form = model.form();
    let v = DVector::from_vec(vec![1.0, 0.0]);
    let o = model.embed(&[0.0, 0.0], &v)?;
    println!("basepoint {:?}, Q = {}", o.as_slice(), form.norm2(&o));

    // along a diameter of the disc with v fixed, the pseudo-distance is 2 artanh r
    for r in [0.25, 0.5, 0.75, 0.9] {
        let x = model.embed(&[r, 0.0], &v)?;
        println!("r = {r:4}  pseudo {:.12}  2·artanh r {:.12}", pseudo_distance(form, &o, &x), 2.0 * f64::atanh(r));
    }

    // over the same u, a small fibre angle keeps |⟨a,b⟩| ≤ 1: pseudo-distance 0
    let w = DVector::from_vec(vec![0.6, 0.8]);
    let x = model.embed(&[0.5, 0.2], &w)?;
    println!("fibre-separated pair: pseudo {:.3e}", pseudo_distance(form, &model.embed(&[0.5, 0.2], &v)?, &x));

    // isometries preserve it
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let g = random_so(form, 1.0, &mut rng) * boost(4, 0, 3, 0.8);
    let (a, b) = (model.embed(&[0.1, -0.3], &v)?, model.embed(&[-0.4, 0.5], &w)?);
    println!(
        "invariance: d(a,b) = {:.12}, d(ga,gb) = {:.12}",
        pseudo_distance(form, &a, &b),
        pseudo_distance(form, &(&g * &a), &(&g * &b))
    );
    let (u, back) = model.project(&(&g * &a))?;
    println!("g·a projects to u = {:?}, v = {:?}", u.as_slice(), back.as_slice());
    Ok(())
}
