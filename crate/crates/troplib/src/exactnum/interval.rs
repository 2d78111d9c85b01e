use super::rational::Rat;
use super::Sign;

/// Closed rational interval `[lo, hi]`, used to enclose values of symbolic
/// expressions evaluated over declared symbol enclosures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatInterval {
    pub lo: Rat,
    pub hi: Rat,
}

impl RatInterval {
    pub fn new(lo: Rat, hi: Rat) -> Self {
        assert!(lo <= hi, "inverted interval");
        RatInterval { lo, hi }
    }

    pub fn point(r: Rat) -> Self {
        RatInterval { lo: r.clone(), hi: r }
    }

    pub fn contains(&self, r: &Rat) -> bool {
        &self.lo <= r && r <= &self.hi
    }

    pub fn contains_interval(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rat {
        (&self.lo + &self.hi) / Rat::from_int(2)
    }

    /// Certified sign of every point of the interval, if uniform.
    pub fn sign(&self) -> Option<Sign> {
        if self.lo.is_positive() {
            Some(Sign::Positive)
        } else if self.hi.is_negative() {
            Some(Sign::Negative)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(Sign::Zero)
        } else {
            None
        }
    }

    pub fn add(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn mul(&self, other: &RatInterval) -> RatInterval {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let mut lo = products[0].clone();
        let mut hi = products[0].clone();
        for p in &products[1..] {
            if p < &lo {
                lo = p.clone();
            }
            if p > &hi {
                hi = p.clone();
            }
        }
        RatInterval { lo, hi }
    }

    pub fn scale(&self, c: &Rat) -> RatInterval {
        if c.is_negative() {
            RatInterval {
                lo: &self.hi * c,
                hi: &self.lo * c,
            }
        } else {
            RatInterval {
                lo: &self.lo * c,
                hi: &self.hi * c,
            }
        }
    }

    /// Tight power: handles sign-straddling intervals for even exponents.
    pub fn pow(&self, e: u32) -> RatInterval {
        if e == 0 {
            return RatInterval::point(Rat::one());
        }
        let lo_p = self.lo.pow(e as i32);
        let hi_p = self.hi.pow(e as i32);
        if e % 2 == 1 {
            RatInterval { lo: lo_p, hi: hi_p }
        } else if !self.lo.is_negative() {
            RatInterval { lo: lo_p, hi: hi_p }
        } else if !self.hi.is_positive() {
            RatInterval { lo: hi_p, hi: lo_p }
        } else {
            RatInterval {
                lo: Rat::zero(),
                hi: Rat::max2(&lo_p, &hi_p),
            }
        }
    }

    /// Split at the midpoint into two halves covering `self`.
    pub fn bisect(&self) -> (RatInterval, RatInterval) {
        let m = self.midpoint();
        (
            RatInterval::new(self.lo.clone(), m.clone()),
            RatInterval::new(m, self.hi.clone()),
        )
    }
}
