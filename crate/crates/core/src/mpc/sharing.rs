use rand::RngCore;

use super::{Field, MpcError};

/// One party's additive share of a field element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share {
    pub party: usize,
    pub value: u128,
}

/// Splits `secret` into `k` shares summing to it modulo `p`.
///
/// The first `k - 1` shares are uniform; the last one closes the sum.
pub fn share_secret(
    field: &Field,
    secret: u128,
    k: usize,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Vec<Share>, MpcError> {
    if k < 2 {
        return Err(MpcError::TooFewParties { k });
    }
    let mut shares = Vec::with_capacity(k);
    let mut acc = 0;
    for party in 0..k - 1 {
        let value = field.random(rng);
        acc = field.add(acc, value);
        shares.push(Share { party, value });
    }
    shares.push(Share {
        party: k - 1,
        value: field.sub(field.reduce(secret), acc),
    });
    Ok(shares)
}

/// Sum of the shares modulo `p`.
pub fn reconstruct(field: &Field, shares: &[Share]) -> Result<u128, MpcError> {
    if shares.is_empty() {
        return Err(MpcError::MissingParty { party: 0 });
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in shares {
        if !seen.insert(s.party) {
            return Err(MpcError::DuplicateParty { party: s.party });
        }
    }
    Ok(field.sum(shares.iter().map(|s| s.value)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_secret_two_parties() {
        let f = Field::mersenne(127).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = share_secret(&f, 0, 2, &mut rng).unwrap();
        assert_eq!(f.add(s[0].value, s[1].value), 0);
    }

    #[test]
    fn reconstruct_inverts_sharing() {
        let f = Field::mersenne(127).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in [2, 3, 5, 10] {
            for _ in 0..50 {
                let e = f.random(&mut rng);
                let shares = share_secret(&f, e, k, &mut rng).unwrap();
                assert_eq!(shares.len(), k);
                assert!(shares.iter().all(|s| s.value < f.modulus()));
                assert_eq!(reconstruct(&f, &shares).unwrap(), e);
            }
        }
    }

    #[test]
    fn rejects_single_party_and_duplicates() {
        let f = Field::mersenne(61).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(share_secret(&f, 5, 1, &mut rng), Err(MpcError::TooFewParties { k: 1 })));
        let mut shares = share_secret(&f, 5, 3, &mut rng).unwrap();
        shares[2].party = 0;
        assert!(matches!(reconstruct(&f, &shares), Err(MpcError::DuplicateParty { party: 0 })));
    }
}
