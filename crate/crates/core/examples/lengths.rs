//! Hofer-like lengths: versions, inverses and the triangle inequality.
use cosymplectic::catalog;
use cosymplectic::isotopy::{compose_isotopies, invert_isotopy};
use cosymplectic::norms::{length, HarmonicNorm, LengthKind, LengthVersion, NormOptions};

fn main() -> cosymplectic::error::Result<()> {
    let s = catalog::t2s1();
    let grid = s.chart.grid(16, 17);
    let opts = NormOptions::default();
    let shear = catalog::shear(0.5).1;
    let cross = catalog::cross_shear(0.3).1;
    let both = compose_isotopies(&s, &shear, &cross)?;
    let inv = invert_isotopy(&shear)?;
    for (name, iso) in [("shear", &shear), ("shear^-1", &inv), ("cross", &cross), ("shear.cross", &both)] {
        let r = length(&s, iso, LengthKind::CoHofer, LengthVersion::Sup, 8, &grid, &opts)?;
        println!("{name:<12} sup {:.6}  integral {:.6}", r.sup_value, r.integral_value);
    }

    let rot = catalog::torus_rotation(&[1.0], &[2.0], 0.5, 0.0)?.1;
    for harmonic in [HarmonicNorm::L2, HarmonicNorm::CoefficientL1] {
        let o = NormOptions { harmonic, paper_normalization: true, ..NormOptions::default() };
        let r = length(&s, &rot, LengthKind::AlmostCoHoferLike, LengthVersion::Sup, 8, &grid, &o)?;
        println!("rotation(1, 2; h0 = 0.5) {harmonic:?}: {:.6}", r.value);
    }
    Ok(())
}
