use std::path::Path;

use serde::Serialize;
use turlab_core::correlator::{
    correlator_bound, exact_correlator, BoundReport, BoundVariant, Part,
};
use turlab_core::tur::TurReport;

use crate::experiment::parse_reading;
use crate::failure::Failure;
use crate::spec;

#[derive(Serialize)]
struct BoundOutput {
    /// `[re, im]`.
    correlator: [f64; 2],
    bound: BoundReport,
    bound_imag: BoundReport,
    bound_neumann1: BoundReport,
    tur: TurReport,
    tur_imag: TurReport,
}

pub fn run(path: &Path, reading: &str) -> Result<(), Failure> {
    let reading = parse_reading(reading)?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path.display(), e))?;
    let inst = spec::parse(&text)?;
    let (rho, ch, a, b) = (&inst.rho, &inst.channel, &inst.a, &inst.b);
    let corr = exact_correlator(rho, ch, a, b)?;
    let bound = correlator_bound(rho, ch, a, b, Part::Real, BoundVariant::Exact, reading)?;
    let bound_imag = correlator_bound(rho, ch, a, b, Part::Imag, BoundVariant::Exact, reading)?;
    let bound_neumann1 =
        correlator_bound(rho, ch, a, b, Part::Real, BoundVariant::Neumann1, reading)?;
    let out = BoundOutput {
        correlator: [corr.re, corr.im],
        tur: bound.as_tur(),
        tur_imag: bound_imag.as_tur(),
        bound,
        bound_imag,
        bound_neumann1,
    };
    let text = serde_json::to_string_pretty(&out)
        .map_err(|e| Failure::Input(format!("serializing report: {e}")))?;
    println!("{text}");
    let holds = out.bound.holds && out.bound_imag.holds && out.tur.holds && out.tur_imag.holds;
    if holds {
        Ok(())
    } else {
        Err(Failure::Invariant(
            "exact bound or TUR does not hold".into(),
        ))
    }
}
