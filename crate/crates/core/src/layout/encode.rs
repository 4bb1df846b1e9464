use std::fmt;

use serde::{Deserialize, Serialize};

use super::LayoutError;

pub const ROW_LOCAL_BITS: u32 = 18;
pub const COL_LOCAL_BITS: u32 = 13;
const VALID_BIT: u32 = 1 << 31;
const COL_MASK: u32 = (1 << COL_LOCAL_BITS) - 1;
const ROW_MASK: u32 = (1 << ROW_LOCAL_BITS) - 1;

/// One 64-bit sparse element slot.
///
/// The upper 32 bits are the index word, `[31]` valid, `[30:13]` row_local,
/// `[12:0]` col_local; the lower 32 bits hold the FP32 value. The all-zero
/// word is the padding no-op.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedElement(u64);

impl EncodedElement {
    pub const PADDING: EncodedElement = EncodedElement(0);

    pub fn encode(row_local: usize, col_local: usize, value: f32) -> Result<Self, LayoutError> {
        if row_local > ROW_MASK as usize || col_local > COL_MASK as usize {
            return Err(LayoutError::FieldOverflow { row_local, col_local });
        }
        let index = VALID_BIT | ((row_local as u32) << COL_LOCAL_BITS) | col_local as u32;
        Ok(EncodedElement(((index as u64) << 32) | value.to_bits() as u64))
    }

    pub fn from_bits(bits: u64) -> Self {
        EncodedElement(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn index_word(self) -> u32 {
        (self.0 >> 32) as u32
    }

    pub fn is_valid(self) -> bool {
        self.index_word() & VALID_BIT != 0
    }

    pub fn row_local(self) -> usize {
        ((self.index_word() >> COL_LOCAL_BITS) & ROW_MASK) as usize
    }

    pub fn col_local(self) -> usize {
        (self.index_word() & COL_MASK) as usize
    }

    pub fn value(self) -> f32 {
        f32::from_bits(self.0 as u32)
    }

    /// Coalesced row pair; equal colors share a URAM address.
    pub fn color(self) -> usize {
        self.row_local() / 2
    }
}

impl fmt::Debug for EncodedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            write!(f, "E(r{}, c{}, {})", self.row_local(), self.col_local(), self.value())
        } else {
            write!(f, "PAD")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_words() {
        let e = EncodedElement::encode(0, 0, 1.0).unwrap();
        assert_eq!(e.index_word(), 0x8000_0000);
        assert_eq!(e.bits() as u32, 0x3F80_0000);
        let e = EncodedElement::encode(1, 5, -2.5).unwrap();
        assert_eq!(e.index_word(), 0x8000_2005);
        assert_eq!((e.row_local(), e.col_local(), e.value()), (1, 5, -2.5));
        assert_eq!(EncodedElement::PADDING.bits(), 0);
        assert!(!EncodedElement::PADDING.is_valid());
    }

    #[test]
    fn field_limits() {
        let e = EncodedElement::encode((1 << 18) - 1, 8191, 0.0).unwrap();
        assert_eq!(e.index_word(), 0xFFFF_FFFF);
        assert!(e.is_valid() && e.value() == 0.0);
        assert!(EncodedElement::encode(1 << 18, 0, 0.0).is_err());
        assert!(EncodedElement::encode(0, 8192, 0.0).is_err());
    }
}
