//! Frequency shift of a molecule next to a single trapped charge, for a
//! centrosymmetric host (quadratic, red only) and a polar one (linear).

use zpltune::stark::{field_at, stark_shift};
use zpltune::{HostMatrix, PointCharge, Vec3};

fn main() -> zpltune::Result<()> {
    let axis = Vec3::z();
    println!("{:>8} {:>16} {:>16}", "r_nm", "anthracene_mhz", "dbn_mhz");
    for r_nm in [5.0, 10.0, 20.0, 50.0, 100.0, 200.0] {
        let charge = [PointCharge::new(Vec3::new(0.0, 0.0, r_nm * 1e-3), -1)];
        let field = field_at(&charge, &Vec3::zeros(), zpltune::host::EPSILON_R)?;
        let quad = 1e3 * stark_shift(&field, &HostMatrix::Anthracene.stark_response(), &axis);
        let lin = 1e3 * stark_shift(&field, &HostMatrix::Dibromonaphthalene.stark_response(), &axis);
        println!("{r_nm:>8.0} {quad:>16.4} {lin:>16.4}");
    }
    Ok(())
}
