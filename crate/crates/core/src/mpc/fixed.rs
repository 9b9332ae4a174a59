use std::fmt;

use super::{Field, MpcError};

pub const DEFAULT_FIELD_BITS: u32 = 127;
pub const DEFAULT_FRAC_BITS: u32 = 24;

/// Field and fixed-point scale shared by every party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPointParams {
    pub field: Field,
    pub frac_bits: u32,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        FixedPointParams::new(DEFAULT_FIELD_BITS, DEFAULT_FRAC_BITS).expect("default parameters are valid")
    }
}

impl FixedPointParams {
    pub fn new(field_bits: u32, frac_bits: u32) -> Result<Self, MpcError> {
        let field = Field::mersenne(field_bits)?;
        if frac_bits == 0 || 2 * frac_bits + 1 >= field_bits {
            return Err(MpcError::InvalidParams(format!(
                "{frac_bits} fractional bits leave no headroom in a {field_bits}-bit field"
            )));
        }
        Ok(FixedPointParams { field, frac_bits })
    }

    /// Largest magnitude `M` whose double-scale encoding stays below `p/2`.
    pub fn max_magnitude(&self) -> f64 {
        (self.field.modulus() / 2) as f64 / 2f64.powi(2 * self.frac_bits as i32)
    }

    pub fn scale_bits(&self, scale: Scale) -> u32 {
        match scale {
            Scale::Single => self.frac_bits,
            Scale::Double => 2 * self.frac_bits,
        }
    }

    /// `round(v * 2^f) mod p`.
    pub fn encode(&self, v: f64) -> Result<u128, MpcError> {
        let bound = self.max_magnitude();
        if !v.is_finite() || v.abs() > bound {
            return Err(MpcError::Overflow { value: v, bound });
        }
        let scaled = (v * 2f64.powi(self.frac_bits as i32)).round();
        Ok(self.field.from_i128(scaled as i128))
    }

    pub fn encode_fixed(&self, v: f64) -> Result<Fixed, MpcError> {
        Ok(Fixed {
            value: self.encode(v)?,
            scale: Scale::Single,
        })
    }

    /// Centered lift divided by `2^f` or `2^(2f)`.
    pub fn decode(&self, e: u128, scale: Scale) -> f64 {
        self.field.lift_centered(e) as f64 / 2f64.powi(self.scale_bits(scale) as i32)
    }

    pub fn decode_fixed(&self, x: Fixed) -> f64 {
        self.decode(x.value, x.scale)
    }
}

/// Power of two a field value is scaled by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// `2^f`: encoded inputs and coefficients.
    Single,
    /// `2^(2f)`: products of two single-scale values.
    Double,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Single => "2^f",
            Scale::Double => "2^2f",
        })
    }
}

/// A field element tagged with its scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fixed {
    pub value: u128,
    pub scale: Scale,
}

impl Fixed {
    pub fn add(self, other: Fixed, field: &Field) -> Result<Fixed, MpcError> {
        if self.scale != other.scale {
            return Err(MpcError::ScaleMismatch {
                left: self.scale,
                right: other.scale,
            });
        }
        Ok(Fixed {
            value: field.add(self.value, other.value),
            scale: self.scale,
        })
    }

    /// Only single-scale values may be multiplied; the product is double-scale.
    pub fn mul(self, other: Fixed, field: &Field) -> Result<Fixed, MpcError> {
        if self.scale != Scale::Single || other.scale != Scale::Single {
            return Err(MpcError::ScaleMismatch {
                left: self.scale,
                right: other.scale,
            });
        }
        Ok(Fixed {
            value: field.mul(self.value, other.value),
            scale: Scale::Double,
        })
    }
}
