use super::interval::RatInterval;
use super::rational::Rat;
use super::Sign;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Budget of box-bisection rounds before `sign_of` gives up.
pub const SIGN_REFINEMENT_ROUNDS: usize = 16;
const SIGN_BOX_CAP: usize = 4096;

/// A named symbol with a rational interval enclosure of its (irrational) value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub lo: Rat,
    pub hi: Rat,
}

/// Ordered set of independent irrational symbols with interval enclosures.
///
/// Independence of the symbols together with 1 over the rationals is a
/// declared hypothesis; it is trusted, never verified, and every certificate
/// derived from it records the assumption.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSet {
    symbols: Vec<Symbol>,
    independent: bool,
}

impl Default for SymbolSet {
    fn default() -> Self {
        SymbolSet::empty()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SymbolSetError {
    #[error("enclosure for `{0}` is empty or inverted")]
    BadEnclosure(String),
    #[error("duplicate symbol name `{0}`")]
    DuplicateName(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("refined enclosure for `{0}` is not contained in its predecessor")]
    NotARefinement(String),
}

impl SymbolSet {
    pub fn empty() -> Self {
        SymbolSet {
            symbols: Vec::new(),
            independent: true,
        }
    }

    pub fn new(
        symbols: Vec<(String, Rat, Rat)>,
        independent: bool,
    ) -> Result<Self, SymbolSetError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(symbols.len());
        for (name, lo, hi) in symbols {
            if lo >= hi {
                return Err(SymbolSetError::BadEnclosure(name));
            }
            if !seen.insert(name.clone()) {
                return Err(SymbolSetError::DuplicateName(name));
            }
            out.push(Symbol { name, lo, hi });
        }
        Ok(SymbolSet {
            symbols: out,
            independent,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn independent(&self) -> bool {
        self.independent
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    pub fn enclosure(&self, i: usize) -> RatInterval {
        RatInterval::new(self.symbols[i].lo.clone(), self.symbols[i].hi.clone())
    }

    pub fn enclosure_box(&self) -> Vec<RatInterval> {
        (0..self.len()).map(|i| self.enclosure(i)).collect()
    }

    /// New set with one symbol's enclosure shrunk; the new interval must sit
    /// inside the old one.
    pub fn refine(&self, name: &str, lo: Rat, hi: Rat) -> Result<Self, SymbolSetError> {
        let i = self
            .index_of(name)
            .ok_or_else(|| SymbolSetError::UnknownSymbol(name.to_string()))?;
        if lo >= hi {
            return Err(SymbolSetError::BadEnclosure(name.to_string()));
        }
        let old = self.enclosure(i);
        let new = RatInterval::new(lo.clone(), hi.clone());
        if !old.contains_interval(&new) {
            return Err(SymbolSetError::NotARefinement(name.to_string()));
        }
        let mut next = self.clone();
        next.symbols[i].lo = lo;
        next.symbols[i].hi = hi;
        Ok(next)
    }
}

/// Exact multivariate polynomial in the symbols of a `SymbolSet`, with
/// rational coefficients. Purely rational values carry only the constant
/// monomial. Zero coefficients are never stored.
///
/// Monomials are exponent vectors indexed by symbol position, with trailing
/// zeros trimmed so the constant monomial is the empty vector.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct SymbolicReal {
    terms: BTreeMap<Vec<u32>, Rat>,
}

fn trim(mut expts: Vec<u32>) -> Vec<u32> {
    while expts.last() == Some(&0) {
        expts.pop();
    }
    expts
}

impl SymbolicReal {
    pub fn zero() -> Self {
        SymbolicReal::default()
    }

    pub fn one() -> Self {
        SymbolicReal::from_rat(Rat::one())
    }

    pub fn from_rat(r: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(Vec::new(), r);
        }
        SymbolicReal { terms }
    }

    pub fn from_int(n: i64) -> Self {
        SymbolicReal::from_rat(Rat::from_int(n))
    }

    /// The symbol with index `i`, as a degree-1 polynomial.
    pub fn symbol(i: usize) -> Self {
        let mut expts = vec![0u32; i + 1];
        expts[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(expts, Rat::one());
        SymbolicReal { terms }
    }

    pub fn monomial(expts: Vec<u32>, coeff: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(trim(expts), coeff);
        }
        SymbolicReal { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rat)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value, if no symbol appears.
    pub fn as_rational(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Vec::new()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn constant_part(&self) -> Rat {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Largest symbol index appearing, plus one.
    pub fn arity(&self) -> usize {
        self.terms.keys().map(|e| e.len()).max().unwrap_or(0)
    }

    fn add_term(&mut self, expts: Vec<u32>, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        let key = trim(expts);
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn scale(&self, c: &Rat) -> SymbolicReal {
        if c.is_zero() {
            return SymbolicReal::zero();
        }
        SymbolicReal {
            terms: self
                .terms
                .iter()
                .map(|(e, r)| (e.clone(), r * c))
                .collect(),
        }
    }

    /// Decompose as `c0 + sum_i c_i * symbol_i` when total degree <= 1.
    pub fn linear_decompose(&self) -> Option<(Rat, Vec<Rat>)> {
        if self.total_degree() > 1 {
            return None;
        }
        let n = self.arity();
        let mut coeffs = vec![Rat::zero(); n];
        let mut constant = Rat::zero();
        for (e, c) in &self.terms {
            if e.is_empty() {
                constant = c.clone();
            } else {
                let i = e.iter().position(|&x| x == 1).unwrap();
                coeffs[i] = c.clone();
            }
        }
        Some((constant, coeffs))
    }

    /// Coefficient polynomial of a single monomial.
    pub fn coefficient(&self, expts: &[u32]) -> Rat {
        self.terms
            .get(&trim(expts.to_vec()))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    /// Interval enclosure of the value over a box of symbol enclosures.
    pub fn eval_box(&self, boxes: &[RatInterval]) -> RatInterval {
        let mut acc = RatInterval::point(Rat::zero());
        for (e, c) in &self.terms {
            let mut mono = RatInterval::point(Rat::one());
            for (i, &exp) in e.iter().enumerate() {
                if exp > 0 {
                    assert!(i < boxes.len(), "symbol index outside enclosure box");
                    mono = mono.mul(&boxes[i].pow(exp));
                }
            }
            acc = acc.add(&mono.scale(c));
        }
        acc
    }

    /// Exact evaluation at a rational point (used by tests and oracles).
    pub fn eval_rat(&self, point: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for (e, c) in &self.terms {
            let mut mono = c.clone();
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    mono = &mono * &point[i];
                }
            }
            acc += &mono;
        }
        acc
    }

    pub fn display_with<'a>(&'a self, ctx: &'a SymbolSet) -> SymbDisplay<'a> {
        SymbDisplay { value: self, ctx: Some(ctx) }
    }
}

impl fmt::Debug for SymbolicReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", SymbDisplay { value: self, ctx: None })
    }
}

impl fmt::Display for SymbolicReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", SymbDisplay { value: self, ctx: None })
    }
}

pub struct SymbDisplay<'a> {
    value: &'a SymbolicReal,
    ctx: Option<&'a SymbolSet>,
}

impl fmt::Display for SymbDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.value.terms {
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = c.abs();
            let mut wrote = false;
            if !mag.is_one() || e.is_empty() {
                write!(f, "{}", mag)?;
                wrote = true;
            }
            for (i, &exp) in e.iter().enumerate() {
                if exp == 0 {
                    continue;
                }
                if wrote {
                    write!(f, "*")?;
                }
                match self.ctx {
                    Some(ctx) if i < ctx.len() => write!(f, "{}", ctx.symbols()[i].name)?,
                    _ => write!(f, "s{}", i)?,
                }
                if exp > 1 {
                    write!(f, "^{}", exp)?;
                }
                wrote = true;
            }
        }
        Ok(())
    }
}

impl Add<&SymbolicReal> for &SymbolicReal {
    type Output = SymbolicReal;
    fn add(self, rhs: &SymbolicReal) -> SymbolicReal {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub<&SymbolicReal> for &SymbolicReal {
    type Output = SymbolicReal;
    fn sub(self, rhs: &SymbolicReal) -> SymbolicReal {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

impl Mul<&SymbolicReal> for &SymbolicReal {
    type Output = SymbolicReal;
    fn mul(self, rhs: &SymbolicReal) -> SymbolicReal {
        let mut out = SymbolicReal::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let n = ea.len().max(eb.len());
                let mut e = vec![0u32; n];
                for (i, x) in ea.iter().enumerate() {
                    e[i] += x;
                }
                for (i, x) in eb.iter().enumerate() {
                    e[i] += x;
                }
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl Neg for &SymbolicReal {
    type Output = SymbolicReal;
    fn neg(self) -> SymbolicReal {
        SymbolicReal {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait<SymbolicReal> for SymbolicReal {
            type Output = SymbolicReal;
            fn $method(self, rhs: SymbolicReal) -> SymbolicReal {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&SymbolicReal> for SymbolicReal {
            type Output = SymbolicReal;
            fn $method(self, rhs: &SymbolicReal) -> SymbolicReal {
                (&self).$method(rhs)
            }
        }
        impl $trait<SymbolicReal> for &SymbolicReal {
            type Output = SymbolicReal;
            fn $method(self, rhs: SymbolicReal) -> SymbolicReal {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for SymbolicReal {
    type Output = SymbolicReal;
    fn neg(self) -> SymbolicReal {
        -&self
    }
}

impl Serialize for SymbolicReal {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        if let Some(r) = self.as_rational() {
            return ser.serialize_str(&r.to_string());
        }
        use serde::ser::SerializeMap;
        let mut map = ser.serialize_map(Some(self.terms.len()))?;
        for (e, c) in &self.terms {
            let key = e
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            map.serialize_entry(&key, &c.to_string())?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SymbolicReal {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Constant(String),
            Terms(BTreeMap<String, String>),
        }
        match Repr::deserialize(de)? {
            Repr::Constant(s) => {
                let r: Rat = s.parse().map_err(serde::de::Error::custom)?;
                Ok(SymbolicReal::from_rat(r))
            }
            Repr::Terms(map) => {
                let mut out = SymbolicReal::zero();
                for (key, val) in map {
                    let expts: Vec<u32> = if key.is_empty() {
                        Vec::new()
                    } else {
                        key.split(',')
                            .map(|p| p.trim().parse::<u32>())
                            .collect::<Result<_, _>>()
                            .map_err(serde::de::Error::custom)?
                    };
                    let coeff: Rat = val.parse().map_err(serde::de::Error::custom)?;
                    out.add_term(expts, coeff);
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SignError {
    /// The evaluated enclosure still straddles zero after the refinement
    /// budget; the caller may refine the symbol enclosures and retry.
    #[error("sign indeterminate after {SIGN_REFINEMENT_ROUNDS} refinement rounds")]
    Indeterminate,
    #[error("expression uses symbol index {used} but the set has {available} symbols")]
    ContextMismatch { used: usize, available: usize },
}

/// Certified sign of a symbolic value over the declared enclosures.
///
/// Zero is decided exactly: a stored polynomial is zero iff it has no terms,
/// and for affine-linear values the declared independence of the symbols with
/// 1 rules out hidden cancellation. Strict signs are certified by interval
/// arithmetic, subdividing the enclosure box to fight dependency loss.
pub fn sign_of(x: &SymbolicReal, ctx: &SymbolSet) -> Result<Sign, SignError> {
    if x.is_zero() {
        return Ok(Sign::Zero);
    }
    if let Some(c) = x.as_rational() {
        return Ok(if c.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        });
    }
    if x.arity() > ctx.len() {
        return Err(SignError::ContextMismatch {
            used: x.arity(),
            available: ctx.len(),
        });
    }

    let mut boxes = vec![ctx.enclosure_box()];
    for _ in 0..=SIGN_REFINEMENT_ROUNDS {
        let mut positive = true;
        let mut negative = true;
        let mut undecided = Vec::new();
        for b in &boxes {
            match x.eval_box(b).sign() {
                Some(Sign::Positive) => negative = false,
                Some(Sign::Negative) => positive = false,
                _ => {
                    positive = false;
                    negative = false;
                    undecided.push(b.clone());
                }
            }
        }
        if positive {
            return Ok(Sign::Positive);
        }
        if negative {
            return Ok(Sign::Negative);
        }
        if undecided.is_empty() || boxes.len() * 2 > SIGN_BOX_CAP {
            // Either sub-boxes certify opposite signs (the enclosures cannot
            // separate the value from zero) or the budget is spent.
            return Err(SignError::Indeterminate);
        }
        let decided: Vec<_> = boxes
            .iter()
            .filter(|b| x.eval_box(b).sign().is_some())
            .cloned()
            .collect();
        let mut next = decided;
        for b in undecided {
            let widest = (0..b.len())
                .max_by(|&i, &j| b[i].width().cmp(&b[j].width()))
                .unwrap();
            let (left, right) = b[widest].bisect();
            let mut bl = b.clone();
            bl[widest] = left;
            let mut br = b;
            br[widest] = right;
            next.push(bl);
            next.push(br);
        }
        boxes = next;
    }
    Err(SignError::Indeterminate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    fn sym(names: &[(&str, &str, &str)]) -> SymbolSet {
        SymbolSet::new(
            names
                .iter()
                .map(|(n, lo, hi)| (n.to_string(), r(lo), r(hi)))
                .collect(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn zero_polynomial_is_zero() {
        let ctx = sym(&[("s", "1", "2")]);
        let x = SymbolicReal::symbol(0);
        let diff = &x - &x;
        assert_eq!(sign_of(&diff, &ctx), Ok(Sign::Zero));
    }

    #[test]
    fn linear_sign_by_intervals() {
        // 3s - 4 with s in [141/100, 142/100] -> [23/100, 26/100] positive
        let ctx = sym(&[("s", "141/100", "142/100")]);
        let x = SymbolicReal::symbol(0).scale(&r("3")) - SymbolicReal::from_int(4);
        assert_eq!(sign_of(&x, &ctx), Ok(Sign::Positive));
        let enc = x.eval_box(&ctx.enclosure_box());
        assert_eq!(enc, RatInterval::new(r("23/100"), r("26/100")));
    }

    #[test]
    fn quadratic_sign_by_interval_products() {
        // s0*s2 - s1^2 with enclosures [1,1.1] x [2,2.1] x [3,3.1]: max 3.41 - 4 < 0
        let ctx = sym(&[("a", "1", "11/10"), ("b", "2", "21/10"), ("c", "3", "31/10")]);
        let x = &(&SymbolicReal::symbol(0) * &SymbolicReal::symbol(2))
            - &(&SymbolicReal::symbol(1) * &SymbolicReal::symbol(1));
        assert_eq!(sign_of(&x, &ctx), Ok(Sign::Negative));
    }

    #[test]
    fn straddling_enclosure_is_indeterminate() {
        // s - 283/200 with s in [141/100, 142/100]: root in the interior
        let ctx = sym(&[("s", "141/100", "142/100")]);
        let x = SymbolicReal::symbol(0) - SymbolicReal::from_rat(r("283/200"));
        assert_eq!(sign_of(&x, &ctx), Err(SignError::Indeterminate));
    }

    #[test]
    fn subdivision_beats_dependency_loss() {
        // s*(1-s) over [0, 1/4]: naive product enclosure straddles zero but
        // the value is positive on the interior; over [1/8, 1/4] the box
        // subdivision certifies positivity.
        let ctx = sym(&[("s", "1/8", "1/4")]);
        let s = SymbolicReal::symbol(0);
        let x = &s * &(&SymbolicReal::one() - &s);
        assert_eq!(sign_of(&x, &ctx), Ok(Sign::Positive));
    }

    #[test]
    fn refinement_rules() {
        let ctx = sym(&[("s", "1", "2")]);
        assert!(ctx.refine("s", r("5/4"), r("3/2")).is_ok());
        assert_eq!(
            ctx.refine("s", r("1/2"), r("3/2")),
            Err(SymbolSetError::NotARefinement("s".into()))
        );
        assert_eq!(
            ctx.refine("t", r("1"), r("2")),
            Err(SymbolSetError::UnknownSymbol("t".into()))
        );
    }

    #[test]
    fn linear_decomposition() {
        let x = SymbolicReal::symbol(1).scale(&r("2")) + SymbolicReal::from_int(5);
        let (c0, cs) = x.linear_decompose().unwrap();
        assert_eq!(c0, r("5"));
        assert_eq!(cs, vec![r("0"), r("2")]);
        let q = &SymbolicReal::symbol(0) * &SymbolicReal::symbol(0);
        assert!(q.linear_decompose().is_none());
    }
}
