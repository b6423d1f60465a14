//! Fixed-width integer values with C-like conversion rules.

use std::fmt;

/// An integer type of the Raven C subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntType {
    pub width: u8,
    pub signed: bool,
}

impl IntType {
    pub const I8: IntType = IntType { width: 8, signed: true };
    pub const I16: IntType = IntType { width: 16, signed: true };
    pub const I32: IntType = IntType { width: 32, signed: true };
    pub const I64: IntType = IntType { width: 64, signed: true };
    pub const U8: IntType = IntType { width: 8, signed: false };
    pub const U16: IntType = IntType { width: 16, signed: false };
    pub const U32: IntType = IntType { width: 32, signed: false };
    pub const U64: IntType = IntType { width: 64, signed: false };

    pub fn new(width: u8, signed: bool) -> Option<Self> {
        matches!(width, 8 | 16 | 32 | 64).then_some(IntType { width, signed })
    }

    pub fn mask(self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    /// Canonical spelling, as accepted by the parser.
    pub fn c_name(self) -> &'static str {
        match (self.width, self.signed) {
            (8, false) => "uint8_t",
            (16, false) => "uint16_t",
            (32, false) => "uint32_t",
            (64, false) => "uint64_t",
            (8, true) => "int8_t",
            (16, true) => "int16_t",
            (32, true) => "int32_t",
            _ => "int64_t",
        }
    }

    /// Reduce `bits` to this type: truncate, then zero- or sign-extend to 64 bits.
    pub fn normalize(self, bits: u64) -> u64 {
        let truncated = bits & self.mask();
        if self.signed && self.width < 64 && truncated >> (self.width - 1) & 1 == 1 {
            truncated | !self.mask()
        } else {
            truncated
        }
    }

    /// Integer promotion: everything narrower than 32 bits becomes `int32_t`.
    pub fn promoted(self) -> IntType {
        if self.width < 32 {
            IntType::I32
        } else {
            self
        }
    }

    /// Usual arithmetic conversions on two promoted types.
    pub fn common(a: IntType, b: IntType) -> IntType {
        let (a, b) = (a.promoted(), b.promoted());
        match a.width.cmp(&b.width) {
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Equal => IntType {
                width: a.width,
                signed: a.signed && b.signed,
            },
        }
    }
}

impl fmt::Display for IntType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.c_name())
    }
}

/// A typed integer. `bits` always holds the normalized two's-complement payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value {
    bits: u64,
    ty: IntType,
}

impl Value {
    pub fn new(bits: u64, ty: IntType) -> Self {
        Value {
            bits: ty.normalize(bits),
            ty,
        }
    }

    pub fn int(v: i32) -> Self {
        Value::new(v as i64 as u64, IntType::I32)
    }

    pub fn u64(v: u64) -> Self {
        Value::new(v, IntType::U64)
    }

    pub fn bool(b: bool) -> Self {
        Value::int(b as i32)
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn ty(self) -> IntType {
        self.ty
    }

    pub fn width(self) -> u8 {
        self.ty.width
    }

    pub fn is_signed(self) -> bool {
        self.ty.signed
    }

    pub fn is_true(self) -> bool {
        self.bits != 0
    }

    /// Value interpreted mathematically (sign-aware).
    pub fn as_i128(self) -> i128 {
        if self.ty.signed {
            self.bits as i64 as i128
        } else {
            self.bits as i128
        }
    }

    pub fn cast(self, ty: IntType) -> Value {
        Value::new(self.bits, ty)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i128())
    }
}
