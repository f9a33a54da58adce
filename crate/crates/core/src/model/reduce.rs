use crate::asymptotics::AsymptoticScalar;

use super::{Diagnostic, Origin, RawSpec, ReducedSpec, SpecError};

/// Lift a raw family to pair states `(a, b)`, one per positive edge.
///
/// The pair `(a, b)` means "currently in `a`, next in `b`". It moves to
/// `(b, d)` with probability `P_bd` and carries the time and sojourn law of the
/// edge `a -> b`, so times depend only on the current pair.
pub fn reduce_to_extended(spec: &RawSpec) -> Result<ReducedSpec, SpecError> {
    let diags = spec.validate();
    if diags.iter().any(Diagnostic::is_error) {
        return Err(SpecError::Invalid(diags));
    }
    let spec = spec.normalized();
    let m = spec.len();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (0..m).map(move |b| (a, b)))
        .filter(|&(a, b)| !spec.p[a][b].is_zero())
        .collect();

    let p = pairs
        .iter()
        .map(|&(_, b)| {
            pairs
                .iter()
                .map(|&(c, d)| {
                    if b == c {
                        spec.p[c][d].clone()
                    } else {
                        AsymptoticScalar::Zero
                    }
                })
                .collect()
        })
        .collect();
    let tau = pairs
        .iter()
        .map(|&(a, b)| spec.t[a][b].clone().expect("validated time"))
        .collect();
    let sojourn = pairs
        .iter()
        .map(|&(a, b)| spec.sojourn[a][b].clone())
        .collect();
    let states = pairs
        .iter()
        .map(|&(a, b)| format!("{}->{}", spec.states[a], spec.states[b]))
        .collect();

    Ok(ReducedSpec {
        basis: spec.basis.clone(),
        states,
        p,
        tau,
        sojourn,
        origin: Some(Origin {
            states: spec.states.clone(),
            pairs,
        }),
    })
}
