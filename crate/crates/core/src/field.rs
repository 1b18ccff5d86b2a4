//! Prime-field arithmetic over the Mersenne prime `Q = 2^61 - 1`.
//!
//! Node IDs embed directly as field elements (every valid ID is below `Q`),
//! and the unique-ID certificate compares multi-sets by evaluating product
//! polynomials whose factors live in this field. All arithmetic goes through
//! 128-bit intermediates, so no operation overflows or leaves canonical form.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Field modulus, the Mersenne prime `2^61 - 1`.
pub const MODULUS: u64 = (1 << 61) - 1;

/// An element of `Z_Q` in canonical form (`0 <= value < Q`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Reduces an arbitrary integer into the field.
    pub const fn new(value: u64) -> Self {
        FieldElement(value % MODULUS)
    }

    pub const fn value(self) -> u64 {
        self.0
    }
}

impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: FieldElement) -> FieldElement {
        // Both operands are < 2^61, so the sum fits in u64.
        FieldElement((self.0 + rhs.0) % MODULUS)
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;

    fn sub(self, rhs: FieldElement) -> FieldElement {
        // a - b computed as a + Q - b; never goes negative.
        FieldElement((self.0 + MODULUS - rhs.0) % MODULUS)
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;

    fn mul(self, rhs: FieldElement) -> FieldElement {
        FieldElement(((self.0 as u128 * rhs.0 as u128) % MODULUS as u128) as u64)
    }
}

impl From<u64> for FieldElement {
    fn from(value: u64) -> Self {
        FieldElement::new(value)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Folds a running product: `init * Π factors`, all modulo `Q`.
pub fn field_mul_fold(
    init: FieldElement,
    factors: impl IntoIterator<Item = FieldElement>,
) -> FieldElement {
    factors.into_iter().fold(init, |acc, f| acc * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    #[test]
    fn mul_fold_empty_product_is_identity() {
        assert_eq!(field_mul_fold(FieldElement::ONE, []), FieldElement::ONE);
    }

    #[test]
    fn mul_fold_small_integers() {
        let out = field_mul_fold(
            FieldElement::new(2),
            [FieldElement::new(3), FieldElement::new(5)],
        );
        assert_eq!(out, FieldElement::new(30));
    }

    #[test]
    fn mul_fold_reduces_past_the_modulus() {
        // 2^60 * 2^60 = 2^120; since 2^61 = 1 (mod Q), 2^120 = 2^59 (mod Q).
        let out = field_mul_fold(FieldElement::new(1 << 60), [FieldElement::new(1 << 60)]);
        assert_eq!(out.value(), 1 << 59);

        // Cross-check against a big-integer reduction done outside the field type.
        let oracle = (BigUint::from(2u64).pow(120) % BigUint::from(MODULUS))
            .to_u64_digits()
            .first()
            .copied()
            .unwrap();
        assert_eq!(out.value(), oracle);
    }

    fn element() -> impl Strategy<Value = FieldElement> {
        any::<u64>().prop_map(FieldElement::new)
    }

    proptest! {
        #[test]
        fn add_commutes(a in element(), b in element()) {
            prop_assert_eq!(a + b, b + a);
        }

        #[test]
        fn mul_is_associative_and_commutative(a in element(), b in element(), c in element()) {
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a * b, b * a);
        }

        #[test]
        fn mul_distributes_over_add(a in element(), b in element(), c in element()) {
            prop_assert_eq!(a * (b + c), a * b + a * c);
        }

        #[test]
        fn sub_is_never_negative_and_inverts_add(a in element(), b in element()) {
            let d = a - b;
            prop_assert!(d.value() < MODULUS);
            prop_assert_eq!(d + b, a);
        }

        #[test]
        fn matches_biguint_arithmetic(a in element(), b in element()) {
            let q = BigUint::from(MODULUS);
            let big = |x: FieldElement| BigUint::from(x.value());
            prop_assert_eq!(BigUint::from((a * b).value()), big(a) * big(b) % &q);
            prop_assert_eq!(BigUint::from((a + b).value()), (big(a) + big(b)) % &q);
        }
    }
}
