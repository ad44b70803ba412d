//! Reproduce the worked examples and print their JSON reports.
//!
//! `cargo run --release --example reproduce -- torus-rotation` runs one.
use cosymplectic::catalog::Params;
use cosymplectic::cli::{reproduce, Settings, REPRODUCTIONS};

fn main() -> cosymplectic::error::Result<()> {
    let pick: Option<String> = std::env::args().nth(1);
    for (id, about) in REPRODUCTIONS {
        if pick.as_deref().is_some_and(|p| p != id) {
            continue;
        }
        eprintln!("{id}: {about}");
        let r = reproduce(id, &Params::new(), &Settings::default())?;
        for c in &r.comparisons {
            eprintln!("  {}", c.describe());
        }
        println!("{}", r.to_json());
    }
    Ok(())
}
