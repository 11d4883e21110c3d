//! Capability degradation: attribute robot discrepancies to capabilities,
//! average them over time and decide when to re-allocate.

use nalgebra::DMatrix;
use resalloc::degradation::{
    capability_indicator, instantaneous_degradation, reallocation_trigger, task_submatrices, update_degradation,
};
use resalloc::team::{CapabilityMatrix, SpeciesMapping};

fn main() -> resalloc::Result<()> {
    // perception, ground speed, air speed; a ground and an aerial robot
    let q = CapabilityMatrix::from_rows(&[vec![10.0, 2.0, 0.0], vec![10.0, 0.0, 5.0]])?;
    let mapping = SpeciesMapping::from_species(2, vec![0, 1])?;
    let (p_sub, qbar_sub) = task_submatrices(&[0, 1], &mapping, &q);
    let theta = capability_indicator(&qbar_sub);

    // The aerial robot makes 30% less progress than predicted.
    let dv = [0.0, 0.3];
    let d_star = instantaneous_degradation(&dv, &p_sub, &qbar_sub)?;
    println!("instantaneous degradation {:.3?}", d_star.as_slice());

    let dt = 0.01;
    let mut d = d_star.map(|_| 0.0);
    let snapshot = DMatrix::from_row_slice(1, d.len(), d.as_slice());
    for tick in 1..=800 {
        d = update_degradation(&d, &d_star, &theta, dt);
        let now = DMatrix::from_row_slice(1, d.len(), d.as_slice());
        if tick % 100 == 0 {
            println!(
                "t={:.0} s  d={:.3?}  trigger(chi=0.33)={}",
                tick as f64 * dt,
                d.as_slice(),
                reallocation_trigger(&now, &snapshot, 0.33)
            );
        }
    }
    Ok(())
}
