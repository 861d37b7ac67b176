use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Default modulus: a 64-bit safe prime. Frames are padded to a fixed size,
/// so the key size has no effect on link-layer behavior.
pub const DEFAULT_P: u64 = 18_446_744_073_709_550_147;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhGroup {
    pub p: BigUint,
    pub g: BigUint,
    /// Order of the multiplicative group, `p - 1`.
    pub order: BigUint,
}

impl DhGroup {
    /// Validates `p` (probabilistic primality test) and `1 < g < p`.
    pub fn new(p: BigUint, g: BigUint) -> Result<Self> {
        if p < BigUint::from(5u32) || !num_prime::nt_funcs::is_prime(&p, None).probably() {
            return Err(Error::config("dh.p", "must be a prime > 3"));
        }
        if g <= BigUint::one() || g >= p {
            return Err(Error::config("dh.g", "must satisfy 1 < g < p"));
        }
        let order = &p - 1u32;
        Ok(DhGroup { p, g, order })
    }

    /// Bytes needed to encode any group element.
    pub fn element_len(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }
}

impl Default for DhGroup {
    fn default() -> Self {
        DhGroup::new(BigUint::from(DEFAULT_P), BigUint::from(2u32)).expect("default group is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhKeyPair {
    pub secret: BigUint,
    pub public: BigUint,
}

impl DhKeyPair {
    pub fn from_secret(group: &DhGroup, secret: BigUint) -> Result<Self> {
        let public = dh_public(group, &secret)?;
        Ok(DhKeyPair { secret, public })
    }

    /// Secret drawn uniformly from `[1, p - 2]`.
    pub fn generate<R: Rng + ?Sized>(group: &DhGroup, rng: &mut R) -> Self {
        let secret = rng.gen_biguint_range(&BigUint::one(), &group.order);
        Self::from_secret(group, secret).expect("secret in range")
    }
}

/// Left-to-right square-and-multiply.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
    if modulus.is_one() {
        return BigUint::zero();
    }
    let base = base % modulus;
    let mut acc = BigUint::one();
    for i in (0..exp.bits()).rev() {
        acc = &acc * &acc % modulus;
        if exp.bit(i) {
            acc = acc * &base % modulus;
        }
    }
    acc
}

pub fn dh_public(group: &DhGroup, secret: &BigUint) -> Result<BigUint> {
    if secret >= &group.p {
        return Err(Error::InvalidArgument("secret must be < p".into()));
    }
    Ok(mod_pow(&group.g, secret, &group.p))
}

pub fn dh_shared(group: &DhGroup, secret: &BigUint, peer_public: &BigUint) -> Result<BigUint> {
    if peer_public.is_zero() || peer_public >= &group.p {
        return Err(Error::InvalidArgument(
            "peer public value must be in [1, p)".into(),
        ));
    }
    if secret >= &group.p {
        return Err(Error::InvalidArgument("secret must be < p".into()));
    }
    Ok(mod_pow(peer_public, secret, &group.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> DhGroup {
        DhGroup::new(11u32.into(), 2u32.into()).unwrap()
    }

    #[test]
    fn hand_examples() {
        let g = small();
        assert_eq!(dh_public(&g, &3u32.into()).unwrap(), 8u32.into());
        assert_eq!(dh_public(&g, &4u32.into()).unwrap(), 5u32.into());
        assert_eq!(dh_public(&g, &0u32.into()).unwrap(), 1u32.into());
        let a = dh_shared(&g, &3u32.into(), &dh_public(&g, &4u32.into()).unwrap()).unwrap();
        let b = dh_shared(&g, &4u32.into(), &dh_public(&g, &3u32.into()).unwrap()).unwrap();
        assert_eq!(a, BigUint::from(4u32));
        assert_eq!(a, b);
        assert_eq!(
            dh_shared(&g, &7u32.into(), &1u32.into()).unwrap(),
            1u32.into()
        );
    }

    #[test]
    fn rejects_out_of_range() {
        let g = small();
        assert!(dh_public(&g, &11u32.into()).is_err());
        assert!(dh_shared(&g, &3u32.into(), &0u32.into()).is_err());
        assert!(dh_shared(&g, &3u32.into(), &11u32.into()).is_err());
    }

    #[test]
    fn group_validation() {
        assert!(matches!(
            DhGroup::new(15u32.into(), 2u32.into()),
            Err(Error::Config { key, .. }) if key == "dh.p"
        ));
        assert!(matches!(
            DhGroup::new(11u32.into(), 1u32.into()),
            Err(Error::Config { key, .. }) if key == "dh.g"
        ));
        assert_eq!(DhGroup::default().element_len(), 8);
    }

    #[test]
    fn square_and_multiply_matches_library() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = BigUint::from(DEFAULT_P);
        for _ in 0..200 {
            let b = rng.gen_biguint(64);
            let e = rng.gen_biguint(70);
            assert_eq!(mod_pow(&b, &e, &m), b.modpow(&e, &m));
        }
    }

    #[test]
    fn random_pairs_agree() {
        let g = DhGroup::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = DhKeyPair::generate(&g, &mut rng);
            let b = DhKeyPair::generate(&g, &mut rng);
            assert_eq!(
                dh_shared(&g, &a.secret, &b.public).unwrap(),
                dh_shared(&g, &b.secret, &a.public).unwrap()
            );
        }
    }
}
