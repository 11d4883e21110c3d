//! Team capability model: pool a coalition's capabilities and discount them
//! by per-capability degradation.

use nalgebra::DVector;
use resalloc::team::{aggregate_capabilities, binary_shadow, effective_capabilities, CapabilityMatrix, SpeciesMapping};

fn main() -> resalloc::Result<()> {
    // perception, ground speed, air speed
    let q = CapabilityMatrix::from_rows(&[vec![10.0, 2.0, 0.0], vec![10.0, 0.0, 5.0]])?;
    let shadow = binary_shadow(q.matrix());
    for s in 0..q.num_species() {
        println!("species {s}: Q row {:?}, binary {:?}", q.row(s).as_slice(), shadow.row(s).iter().collect::<Vec<_>>());
    }

    // robots 0-1 are ground, 2-4 aerial
    let mapping = SpeciesMapping::from_species(2, vec![0, 0, 1, 1, 1])?;
    let coalition = [1.0, 0.0, 1.0, 1.0, 0.0];
    let c = aggregate_capabilities(&coalition, &mapping, &q)?;
    println!("coalition {{0, 2, 3}} pools {:?}", c.as_slice());

    let d = DVector::from_vec(vec![0.15, 0.0, 0.3]);
    let effective = effective_capabilities(&c, &d)?;
    println!("with degradation {:?} it offers {:.2?}", d.as_slice(), effective.as_slice());
    Ok(())
}
