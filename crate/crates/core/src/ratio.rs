//! Exact nonnegative rationals for tie-break enumeration probabilities.
//! Distribution equality must be decided exactly, so no floats here.
//! Denominators stay small for the graph sizes enumeration accepts (n <= 12);
//! arithmetic is checked and panics on overflow rather than silently wrapping.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Ratio {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den);
        Ratio {
            num: num / g.max(1),
            den: den / g.max(1),
        }
    }

    pub fn zero() -> Ratio {
        Ratio { num: 0, den: 1 }
    }

    pub fn one() -> Ratio {
        Ratio { num: 1, den: 1 }
    }

    pub fn add(self, other: Ratio) -> Ratio {
        let num = self
            .num
            .checked_mul(other.den)
            .and_then(|a| {
                other
                    .num
                    .checked_mul(self.den)
                    .and_then(|b| a.checked_add(b))
            })
            .expect("ratio overflow");
        let den = self.den.checked_mul(other.den).expect("ratio overflow");
        Ratio::new(num, den)
    }

    pub fn div_by(self, divisor: u128) -> Ratio {
        assert!(divisor != 0);
        Ratio::new(
            self.num,
            self.den.checked_mul(divisor).expect("ratio overflow"),
        )
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
