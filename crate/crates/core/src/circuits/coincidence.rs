use crate::error::{Error, Result};
use crate::spike::SpikeTrain;

/// Per-timestep AND of all trains. For independent inputs the output rate is
/// the product of the input rates.
pub fn coincidence_product(trains: &[SpikeTrain]) -> Result<SpikeTrain> {
    let (first, rest) = trains
        .split_first()
        .ok_or_else(|| Error::domain("coincidence needs at least one train"))?;
    let mut out = first.clone();
    for t in rest {
        out.and_assign(t)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::{decode_rate, encode_rate, RngSeed};

    #[test]
    fn trivial_cases() {
        let ones = SpikeTrain::ones(50);
        assert_eq!(coincidence_product(&[ones.clone(), ones.clone()]).unwrap(), ones);
        let mixed = SpikeTrain::from_bits((0..50).map(|t| t % 3 == 0));
        let zero = SpikeTrain::zeros(50);
        assert_eq!(coincidence_product(&[mixed, zero.clone()]).unwrap(), zero);
        assert!(coincidence_product(&[]).is_err());
        assert!(coincidence_product(&[SpikeTrain::ones(3), SpikeTrain::ones(4)]).is_err());
    }

    #[test]
    fn independent_halves_multiply() {
        let a = encode_rate(0.5, 10_000, RngSeed(1)).unwrap();
        let b = encode_rate(0.5, 10_000, RngSeed(2)).unwrap();
        let r = decode_rate(&coincidence_product(&[a, b]).unwrap());
        assert!((r - 0.25).abs() <= 0.013, "{r}");
    }

    #[test]
    fn rate_multiplicativity_holds_for_most_seeds() {
        // |rate − ∏r| ≤ 4·sqrt(p(1−p)/T) in at least 99% of seeds.
        let rates = [0.7, 0.4, 0.9];
        let p: f64 = rates.iter().product();
        let steps = 4096;
        let bound = 4.0 * (p * (1.0 - p) / steps as f64).sqrt();
        let ok = (0..200u64)
            .filter(|&s| {
                let seed = RngSeed(s);
                let trains: Vec<_> = rates
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| encode_rate(r, steps, seed.derive(k as u64)).unwrap())
                    .collect();
                let got = decode_rate(&coincidence_product(&trains).unwrap());
                (got - p).abs() <= bound
            })
            .count();
        assert!(ok >= 198, "{ok}/200");
    }
}
