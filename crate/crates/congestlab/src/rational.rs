//! Exact nonnegative rational arithmetic for conductance values.
//!
//! Cut conductances are ratios of edge counts to volumes, so numerators and
//! denominators stay well inside `u64` for any graph this crate handles.
//! Comparisons cross-multiply in `u128` to avoid overflow.

use std::cmp::Ordering;
use std::fmt;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A reduced nonnegative rational `num/den` with `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "rational with zero denominator");
        let g = gcd(num, den);
        if g == 0 {
            return Ratio { num: 0, den: 1 };
        }
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self * v`, exact, for integer `v`.
    pub fn scale(&self, v: u64) -> Ratio {
        Ratio::new(
            self.num.checked_mul(v).expect("rational overflow"),
            self.den,
        )
    }

    /// Compare against `a/b` without constructing a `Ratio`.
    pub fn cmp_frac(&self, a: u64, b: u64) -> Ordering {
        assert!(b != 0);
        (self.num as u128 * b as u128).cmp(&(a as u128 * self.den as u128))
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces() {
        assert_eq!(Ratio::new(2, 4), Ratio::new(1, 2));
        assert_eq!(Ratio::new(0, 7), Ratio::ZERO);
    }

    #[test]
    fn orders_by_cross_multiplication() {
        assert!(Ratio::new(1, 3) < Ratio::new(1, 2));
        assert!(Ratio::new(2, 4) == Ratio::new(3, 6));
        assert_eq!(Ratio::new(5, 7).cmp_frac(5, 7), Ordering::Equal);
        assert_eq!(Ratio::new(5, 7).cmp_frac(3, 4), Ordering::Less);
    }

    #[test]
    fn displays_as_fraction() {
        assert_eq!(Ratio::new(6, 4).to_string(), "3/2");
    }
}
