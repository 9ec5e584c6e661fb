use super::estimate::CircuitEstimate;
use crate::error::{Error, Result};
use crate::spike::SpikeTrain;

/// Estimates `q·k` as the sum over dimensions of pairwise coincidence rates.
///
/// Unbiased when the query and key trains are independent encodings. The
/// stderr treats each dimension as an independent Bernoulli mean, and the
/// spikes counted are the coincidence-detector outputs.
pub fn inner_product_circuit(q: &[SpikeTrain], k: &[SpikeTrain]) -> Result<CircuitEstimate> {
    if q.len() != k.len() {
        return Err(Error::domain(format!(
            "query has {} dimensions but key has {}",
            q.len(),
            k.len()
        )));
    }
    if q.is_empty() {
        return Err(Error::domain("inner product needs at least one dimension"));
    }
    let steps = q[0].len() as f64;
    let mut value = 0.0;
    let mut variance = 0.0;
    let mut spikes = 0;
    for (a, b) in q.iter().zip(k) {
        let c = a.coincidences(b)?;
        spikes += c;
        let p = c as f64 / steps;
        value += p;
        variance += p * (1.0 - p) / steps;
    }
    Ok(CircuitEstimate::new(value, variance.sqrt(), spikes))
}
