use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::point::{Point, Quadrant};
use crate::error::{GeoError, Result};

/// Which geodesic model space a point set lives in.
///
/// `Product` carries the l2-product metric `sqrt(d1^2 + d2^2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceDescriptor {
    Euclidean {
        dim: usize,
    },
    /// Two closed quadrants of the plane glued at the origin.
    Biquadrant,
    Product {
        left: Box<SpaceDescriptor>,
        right: Box<SpaceDescriptor>,
    },
}

impl SpaceDescriptor {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GeoError::InvalidInput("euclidean dimension must be >= 1".into()));
        }
        Ok(Self::Euclidean { dim })
    }

    pub fn biquadrant() -> Self {
        Self::Biquadrant
    }

    pub fn product(left: SpaceDescriptor, right: SpaceDescriptor) -> Self {
        Self::Product { left: Box::new(left), right: Box::new(right) }
    }

    /// Checks the descriptor invariants (deserialized descriptors skip the constructors).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Euclidean { dim } if *dim == 0 => {
                Err(GeoError::InvalidInput("euclidean dimension must be >= 1".into()))
            }
            Self::Euclidean { .. } | Self::Biquadrant => Ok(()),
            Self::Product { left, right } => {
                left.validate()?;
                right.validate()
            }
        }
    }

    /// Length of the flat coordinate vector used for spatial indexing.
    pub fn flat_dim(&self) -> usize {
        match self {
            Self::Euclidean { dim } => *dim,
            Self::Biquadrant => 2,
            Self::Product { left, right } => left.flat_dim() + right.flat_dim(),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, Self::Euclidean { .. })
    }

    /// True when every factor is Euclidean, i.e. the space is isometric to some E^d.
    pub fn is_flat_euclidean_product(&self) -> bool {
        match self {
            Self::Euclidean { .. } => true,
            Self::Biquadrant => false,
            Self::Product { left, right } => {
                left.is_flat_euclidean_product() && right.is_flat_euclidean_product()
            }
        }
    }

    /// Errors unless `x` is a valid point of this space.
    pub fn check_point(&self, x: &Point) -> Result<()> {
        match (self, x) {
            (Self::Euclidean { dim }, Point::Euclidean(c)) => {
                if c.len() != *dim {
                    return Err(GeoError::KindMismatch {
                        expected: self.to_string(),
                        found: format!("euclidean:{}", c.len()),
                    });
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(GeoError::InvalidPoint("non-finite coordinate".into()));
                }
                Ok(())
            }
            (Self::Biquadrant, Point::Biquadrant { quadrant, xy }) => {
                let [a, b] = *xy;
                if !a.is_finite() || !b.is_finite() {
                    return Err(GeoError::InvalidPoint("non-finite coordinate".into()));
                }
                let ok = match quadrant {
                    Quadrant::Plus => a >= 0.0 && b >= 0.0,
                    Quadrant::Minus => a <= 0.0 && b <= 0.0 && (a, b) != (0.0, 0.0),
                };
                if ok {
                    Ok(())
                } else {
                    Err(GeoError::InvalidPoint(format!("({a}, {b}) is not in quadrant {quadrant}")))
                }
            }
            (Self::Product { left, right }, Point::Product(pair)) => {
                left.check_point(&pair.0)?;
                right.check_point(&pair.1)
            }
            _ => Err(GeoError::KindMismatch {
                expected: self.to_string(),
                found: x.kind_name().to_string(),
            }),
        }
    }

    /// Uniform sample: box `[-radius, radius]^d` for Euclidean factors, a fair coin for the
    /// biquadrant quadrant followed by a uniform draw in `[0, radius]^2`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> Point {
        match self {
            Self::Euclidean { dim } => {
                Point::euclidean((0..*dim).map(|_| rng.random_range(-radius..=radius)))
            }
            Self::Biquadrant => {
                let quadrant = if rng.random_bool(0.5) { Quadrant::Plus } else { Quadrant::Minus };
                let a = rng.random_range(0.0..=radius);
                let b = rng.random_range(0.0..=radius);
                Point::biquadrant_clamped(quadrant, a.copysign(quadrant.sign()), b.copysign(quadrant.sign()))
            }
            Self::Product { left, right } => {
                Point::product(left.sample_point(rng, radius), right.sample_point(rng, radius))
            }
        }
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            Self::Biquadrant => f.write_str("biquadrant"),
            Self::Product { left, right } => write!(f, "product({left},{right})"),
        }
    }
}

/// Grammar: `euclidean:<d>` | `biquadrant` | `product(<spec>,<spec>)`.
impl FromStr for SpaceDescriptor {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parser = SpecParser { src: s, pos: 0 };
        let space = parser.parse_space()?;
        parser.skip_ws();
        if parser.pos != s.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(space)
    }
}

struct SpecParser<'a> {
    src: &'a str,
    pos: usize,
}

impl SpecParser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn error(&self, msg: &str) -> GeoError {
        GeoError::Parse(format!("{msg} at offset {} in space spec {:?}", self.pos, self.src))
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {token:?}")))
        }
    }

    fn parse_space(&mut self) -> Result<SpaceDescriptor> {
        if self.eat("euclidean") {
            self.expect(":")?;
            self.skip_ws();
            let digits = self.rest().chars().take_while(char::is_ascii_digit).count();
            if digits == 0 {
                return Err(self.error("expected dimension"));
            }
            let dim: usize = self.rest()[..digits].parse().map_err(|_| self.error("bad dimension"))?;
            self.pos += digits;
            SpaceDescriptor::euclidean(dim)
        } else if self.eat("biquadrant") {
            Ok(SpaceDescriptor::Biquadrant)
        } else if self.eat("product") {
            self.expect("(")?;
            let left = self.parse_space()?;
            self.expect(",")?;
            let right = self.parse_space()?;
            self.expect(")")?;
            Ok(SpaceDescriptor::product(left, right))
        } else {
            Err(self.error("expected euclidean, biquadrant or product"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar() {
        assert_eq!("euclidean:3".parse::<SpaceDescriptor>().unwrap(), SpaceDescriptor::Euclidean { dim: 3 });
        assert_eq!("biquadrant".parse::<SpaceDescriptor>().unwrap(), SpaceDescriptor::Biquadrant);
        let p: SpaceDescriptor = "product(euclidean:1, product(biquadrant,euclidean:2))".parse().unwrap();
        assert_eq!(p.flat_dim(), 5);
        assert_eq!(p.to_string(), "product(euclidean:1,product(biquadrant,euclidean:2))");
        assert_eq!(p.to_string().parse::<SpaceDescriptor>().unwrap(), p);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["euclidean:0", "euclidean:", "product(biquadrant)", "sphere", "biquadrant x", ""] {
            assert!(bad.parse::<SpaceDescriptor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_shape() {
        let p = SpaceDescriptor::product(SpaceDescriptor::Euclidean { dim: 1 }, SpaceDescriptor::Biquadrant);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"kind": "product", "left": {"kind": "euclidean", "dim": 1}, "right": {"kind": "biquadrant"}})
        );
        let back: SpaceDescriptor = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
