use troplib::exactnum::Rat;
use troplib::theta::{regular_subdivision, regularity_check, ThetaData};
use troplib::torus::{Polarization, TropicalTorus};

fn main() {
    let torus = TropicalTorus::standard(2);
    let pol = Polarization::identity(&torus).unwrap();
    let t0 = std::time::Instant::now();
    let td = ThetaData::constant(pol.clone(), 1).unwrap();
    let sub = regular_subdivision(&td).unwrap();
    println!("k=1 delta=0: {} cells in {:?}", sub.cells.len(), t0.elapsed());
    println!("regular: {}", regularity_check(&sub).regular);

    let reps: Vec<Vec<i64>> = ThetaData::constant(pol.clone(), 2)
        .unwrap()
        .coset_reps()
        .to_vec();
    let delta: Vec<(Vec<i64>, Rat)> = reps
        .iter()
        .enumerate()
        .map(|(i, rep)| (rep.clone(), Rat::new(3 + 2 * i as i64, 300)))
        .collect();
    let td2 = ThetaData::new(pol, 2, delta).unwrap();
    let t1 = std::time::Instant::now();
    let sub2 = regular_subdivision(&td2).unwrap();
    println!("k=2 perturbed: {} cells in {:?}", sub2.cells.len(), t1.elapsed());
    println!("regular: {}", regularity_check(&sub2).regular);
}
