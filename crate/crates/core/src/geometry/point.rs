use std::fmt;

use serde_json::{json, Value};
use smallvec::SmallVec;

use super::space::SpaceDescriptor;
use crate::error::{GeoError, Result};

pub type Coords = SmallVec<[f64; 4]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrant {
    Plus,
    Minus,
}

impl Quadrant {
    pub fn sign(self) -> f64 {
        match self {
            Quadrant::Plus => 1.0,
            Quadrant::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Quadrant::Plus => Quadrant::Minus,
            Quadrant::Minus => Quadrant::Plus,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Quadrant::Plus => "plus",
            Quadrant::Minus => "minus",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point tagged with the kind of space it belongs to.
///
/// Biquadrant points keep their plane coordinates; the glue point `(0, 0)` is always
/// tagged [`Quadrant::Plus`] so that equality is syntactic.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Euclidean(Coords),
    Biquadrant { quadrant: Quadrant, xy: [f64; 2] },
    Product(Box<(Point, Point)>),
}

impl Point {
    pub fn euclidean<I: IntoIterator<Item = f64>>(coords: I) -> Self {
        Point::Euclidean(coords.into_iter().collect())
    }

    /// Validated biquadrant constructor.
    pub fn biquadrant(quadrant: Quadrant, a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeoError::InvalidPoint("non-finite coordinate".into()));
        }
        let inside = match quadrant {
            Quadrant::Plus => a >= 0.0 && b >= 0.0,
            Quadrant::Minus => a <= 0.0 && b <= 0.0,
        };
        if !inside {
            return Err(GeoError::InvalidPoint(format!("({a}, {b}) is not in quadrant {quadrant}")));
        }
        Ok(Self::biquadrant_clamped(quadrant, a, b))
    }

    /// Biquadrant point from plane coordinates; the quadrant is inferred.
    pub fn biquadrant_from_plane(a: f64, b: f64) -> Result<Self> {
        if a >= 0.0 && b >= 0.0 {
            Self::biquadrant(Quadrant::Plus, a, b)
        } else if a <= 0.0 && b <= 0.0 {
            Self::biquadrant(Quadrant::Minus, a, b)
        } else {
            Err(GeoError::InvalidPoint(format!("({a}, {b}) lies in neither closed quadrant")))
        }
    }

    /// Projects rounding noise back into the quadrant and canonicalizes the origin.
    pub(crate) fn biquadrant_clamped(quadrant: Quadrant, a: f64, b: f64) -> Self {
        let (a, b) = match quadrant {
            Quadrant::Plus => (a.max(0.0), b.max(0.0)),
            Quadrant::Minus => (a.min(0.0), b.min(0.0)),
        };
        // normalize -0.0
        let (a, b) = (a + 0.0, b + 0.0);
        if a == 0.0 && b == 0.0 {
            Point::Biquadrant { quadrant: Quadrant::Plus, xy: [0.0, 0.0] }
        } else {
            Point::Biquadrant { quadrant, xy: [a, b] }
        }
    }

    pub fn product(left: Point, right: Point) -> Self {
        Point::Product(Box::new((left, right)))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Point::Euclidean(_) => "euclidean",
            Point::Biquadrant { .. } => "biquadrant",
            Point::Product(_) => "product",
        }
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Euclidean(c) => Some(c),
            _ => None,
        }
    }

    /// Appends the flat (plane/concatenated) coordinates.
    ///
    /// The flat Euclidean distance never exceeds the geodesic distance in any shipped
    /// space, so it is a valid lower bound for spatial indexing.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            Point::Euclidean(c) => out.extend_from_slice(c),
            Point::Biquadrant { xy, .. } => out.extend_from_slice(xy),
            Point::Product(pair) => {
                pair.0.write_flat(out);
                pair.1.write_flat(out);
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Point::Euclidean(c) => json!(c.as_slice()),
            Point::Biquadrant { quadrant, xy } => json!({"quadrant": quadrant.as_str(), "xy": xy}),
            Point::Product(pair) => Value::Array(vec![pair.0.to_json(), pair.1.to_json()]),
        }
    }

    /// Decodes a point; the space descriptor drives the expected shape.
    pub fn from_json(space: &SpaceDescriptor, value: &Value) -> Result<Self> {
        let bad = |msg: &str| GeoError::Parse(format!("{msg} for {space}: {value}"));
        let point = match space {
            SpaceDescriptor::Euclidean { dim } => {
                let arr = value.as_array().ok_or_else(|| bad("expected coordinate array"))?;
                if arr.len() != *dim {
                    return Err(bad("wrong coordinate count"));
                }
                let coords = arr
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| bad("non-numeric coordinate")))
                    .collect::<Result<Coords>>()?;
                Point::Euclidean(coords)
            }
            SpaceDescriptor::Biquadrant => {
                let quadrant = match value.get("quadrant").and_then(Value::as_str) {
                    Some("plus") => Quadrant::Plus,
                    Some("minus") => Quadrant::Minus,
                    _ => return Err(bad("expected quadrant \"plus\" or \"minus\"")),
                };
                let xy = value
                    .get("xy")
                    .and_then(Value::as_array)
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| bad("expected xy pair"))?;
                let a = xy[0].as_f64().ok_or_else(|| bad("non-numeric coordinate"))?;
                let b = xy[1].as_f64().ok_or_else(|| bad("non-numeric coordinate"))?;
                Point::biquadrant(quadrant, a, b)?
            }
            SpaceDescriptor::Product { left, right } => {
                let arr = value
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| bad("expected [left, right] pair"))?;
                Point::product(Point::from_json(left, &arr[0])?, Point::from_json(right, &arr[1])?)
            }
        };
        space.check_point(&point)?;
        Ok(point)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Euclidean(c) => {
                f.write_str("(")?;
                for (i, v) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Point::Biquadrant { quadrant, xy } => write!(f, "{quadrant}({}, {})", xy[0], xy[1]),
            Point::Product(pair) => write!(f, "<{}, {}>", pair.0, pair.1),
        }
    }
}
