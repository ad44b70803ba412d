//! Split closed 1-forms into harmonic and exact parts under two sections.
use cosymplectic::catalog;
use cosymplectic::cosym::invert_i;
use cosymplectic::forms::{d, Form, VectorField};
use cosymplectic::norms::{section_equivalence_test, split_closed_form, NormOptions, SectionSpec};

fn main() -> cosymplectic::error::Result<()> {
    let s = catalog::t2s1();
    let grid = s.chart.grid(16, 17);
    let u = Form::of(3, 0, cosymplectic::pointfn!(3 => 1, |_t, p| [p[0].sin() * p[1].cos()]));
    let alpha = Form::constant(3, 1, vec![1.0, -0.5, 2.0]).add(&d(&u));
    let avg = SectionSpec::CoefficientAverage;
    let user = SectionSpec::rescaled_circles(&s.chart, &[2.0, 0.5, 1.0], 0.3)?;
    for (name, sec) in [("average", &avg), ("rescaled", &user)] {
        let sp = split_closed_form(&s.chart, &alpha, sec, 0.0, &grid, 1e-8)?;
        println!(
            "{name:<9} coefficients {:?}  osc(U) {:.6}  potential residual {:.1e}",
            sp.coefficients,
            sp.osc,
            sp.potential_residual(&alpha, &grid)
        );
    }

    let samples: Vec<VectorField> = (0..10)
        .map(|k| {
            let c = k as f64 * 0.3 - 1.0;
            VectorField::constant(&[c, 1.0 - c, 0.5]).add(&invert_i(&s, &d(&u.scale(c))))
        })
        .collect();
    let eq = section_equivalence_test(&s, &avg, &user, &samples, 0.0, &grid, &NormOptions::default())?;
    println!("norm ratio range [{:.4}, {:.4}], constant {:.4}", eq.min, eq.max, eq.constant);
    Ok(())
}
