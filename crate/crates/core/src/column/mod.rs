//! Element types, immutable columns, statistics and the `.col` file format.

mod bits;
mod data;
pub mod io;
mod types;
mod value;

use std::collections::BTreeMap;

pub use bits::Bits;
pub use data::Column;
pub use types::{ElementType, Kind, MAX_PRODUCT_WIDTH};
pub use value::Value;

#[derive(Debug, thiserror::Error)]
pub enum ColumnError {
    #[error("invalid element type: {0}")]
    InvalidType(String),
    #[error("value {value} at index {index} is outside the domain of {ty}")]
    ValueOutOfDomain { index: usize, value: String, ty: ElementType },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: ElementType, found: ElementType },
    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("segment length must be positive")]
    ZeroSegmentLength,
    #[error("malformed column file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Occurrence counts of the values of a column.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    pub entries: BTreeMap<Value, usize>,
    pub total: usize,
}

impl FrequencyTable {
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, v: &Value) -> usize {
        self.entries.get(v).copied().unwrap_or(0)
    }

    /// The `k` most frequent values; ties broken by value order.
    pub fn top(&self, k: usize) -> Vec<(Value, usize)> {
        let mut v: Vec<(Value, usize)> = self.entries.iter().map(|(a, b)| (a.clone(), *b)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

pub fn frequency_distribution(col: &Column) -> FrequencyTable {
    let mut entries = BTreeMap::new();
    for v in col.iter() {
        *entries.entry(v).or_insert(0) += 1;
    }
    FrequencyTable { entries, total: col.len() }
}

/// A column seen as consecutive segments of `segment_length` elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentedViewSpec {
    pub segment_length: usize,
    pub column_length: usize,
}

impl SegmentedViewSpec {
    pub fn new(segment_length: usize, column_length: usize) -> Result<Self, ColumnError> {
        if segment_length == 0 {
            return Err(ColumnError::ZeroSegmentLength);
        }
        Ok(SegmentedViewSpec { segment_length, column_length })
    }

    pub fn segment_count(&self) -> usize {
        self.column_length.div_ceil(self.segment_length)
    }

    /// Number of elements in the short final segment, 0 if the length divides evenly.
    pub fn slack(&self) -> usize {
        self.column_length % self.segment_length
    }

    pub fn segment_len(&self, j: usize) -> usize {
        let start = j * self.segment_length;
        self.column_length.saturating_sub(start).min(self.segment_length)
    }
}

/// `col[j·ℓ + i]`.
pub fn segmented_get(col: &Column, spec: SegmentedViewSpec, i: usize, j: usize) -> Result<Value, ColumnError> {
    let idx =
        if i < spec.segment_length { j.checked_mul(spec.segment_length).and_then(|s| s.checked_add(i)) } else { None };
    match idx {
        Some(k) if k < col.len() => Ok(col.value(k)),
        _ => Err(ColumnError::OutOfRange {
            index: j.saturating_mul(spec.segment_length).saturating_add(i),
            len: col.len(),
        }),
    }
}

/// Bytes taken by one column: whole bytes per element, bit columns packed.
pub fn column_size_bytes(col: &Column) -> u64 {
    match col.element_type() {
        ElementType::Bit => (col.len() as u64).div_ceil(8),
        t => (t.width_bits() as u64).div_ceil(8) * col.len() as u64,
    }
}

pub fn representation_size_bytes<'a>(cols: impl IntoIterator<Item = &'a Column>) -> u64 {
    cols.into_iter().map(column_size_bytes).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies() {
        let f = frequency_distribution(&Column::u64s(vec![7, 7, 3, 7]));
        assert_eq!(f.total, 4);
        assert_eq!(f.count(&Value::UInt(7)), 3);
        assert_eq!(f.top(1), vec![(Value::UInt(7), 3)]);
        assert_eq!(frequency_distribution(&Column::u64s(vec![])).support_size(), 0);
    }

    #[test]
    fn segmented_addressing() {
        let c = Column::u64s((0..10).collect());
        let s = SegmentedViewSpec::new(3, 10).unwrap();
        assert_eq!(segmented_get(&c, s, 1, 2).unwrap(), Value::UInt(7));
        assert!(segmented_get(&c, s, 2, 3).is_err());
        assert_eq!(segmented_get(&c, SegmentedViewSpec::new(1, 10).unwrap(), 0, 9).unwrap(), Value::UInt(9));
        assert_eq!(s.segment_count(), 4);
        assert_eq!(s.slack(), 1);
        assert_eq!(s.segment_len(3), 1);
    }

    #[test]
    fn sizes() {
        let u32s = Column::from_u64s(ElementType::U32, vec![0; 10]).unwrap();
        assert_eq!(representation_size_bytes([&u32s]), 40);
        assert_eq!(representation_size_bytes([&Column::bools(&[false; 12])]), 2);
        let a = Column::from_u64s(ElementType::U16, vec![0; 4]).unwrap();
        let b = Column::from_u64s(ElementType::U8, vec![0; 3]).unwrap();
        assert_eq!(representation_size_bytes([&a, &b]), 11);
    }
}
