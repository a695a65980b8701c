use std::fmt;
use std::sync::Arc;

use super::{Bits, ColumnError, ElementType, Value};

#[derive(Clone, Debug, PartialEq)]
enum Data {
    UInt(Vec<u64>),
    Int(Vec<i64>),
    Float(Vec<f64>),
    Bit(Bits),
    Unit(usize),
    Product(Vec<Column>),
}

/// An immutable, fixed-width column. Clones share storage.
#[derive(Clone)]
pub struct Column {
    ty: ElementType,
    len: usize,
    data: Arc<Data>,
}

impl Column {
    fn raw(ty: ElementType, len: usize, data: Data) -> Column {
        Column { ty, len, data: Arc::new(data) }
    }

    /// Builds a column from values, checking every value against the element type.
    pub fn new(ty: ElementType, values: Vec<Value>) -> Result<Column, ColumnError> {
        ty.check()?;
        let oob = |index: usize, v: &Value, ty: &ElementType| ColumnError::ValueOutOfDomain {
            index,
            value: v.to_string(),
            ty: ty.clone(),
        };
        let len = values.len();
        let data = match &ty {
            ElementType::UInt(_) | ElementType::Int(_) | ElementType::Bit => {
                let mut ints = Vec::with_capacity(len);
                for (i, v) in values.iter().enumerate() {
                    let c = v.coerce(&ty).ok_or_else(|| oob(i, v, &ty))?;
                    ints.push(c.as_i128().expect("integer value"));
                }
                return Column::from_i128(ty, ints);
            }
            ElementType::Float(_) => {
                let mut fs = Vec::with_capacity(len);
                for (i, v) in values.iter().enumerate() {
                    let c = v.coerce(&ty).ok_or_else(|| oob(i, v, &ty))?;
                    fs.push(c.as_f64().expect("float value"));
                }
                Data::Float(fs)
            }
            ElementType::Unit => {
                if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !matches!(v, Value::Unit)) {
                    return Err(oob(i, v, &ty));
                }
                Data::Unit(len)
            }
            ElementType::Bottom => {
                if let Some(v) = values.first() {
                    return Err(oob(0, v, &ty));
                }
                Data::Unit(0)
            }
            ElementType::Product(cs) => {
                let mut parts: Vec<Vec<Value>> = vec![Vec::with_capacity(len); cs.len()];
                for (i, v) in values.iter().enumerate() {
                    match v.coerce(&ty) {
                        Some(Value::Tuple(xs)) => {
                            for (p, x) in parts.iter_mut().zip(xs) {
                                p.push(x);
                            }
                        }
                        _ => return Err(oob(i, v, &ty)),
                    }
                }
                let comps =
                    cs.iter().zip(parts).map(|(t, p)| Column::new(t.clone(), p)).collect::<Result<Vec<_>, _>>()?;
                Data::Product(comps)
            }
        };
        Ok(Column::raw(ty, len, data))
    }

    /// Builds an integer or bit column from wide integers, checking the range of each.
    pub fn from_i128(ty: ElementType, values: Vec<i128>) -> Result<Column, ColumnError> {
        ty.check()?;
        let (lo, hi) =
            ty.int_range().ok_or_else(|| ColumnError::InvalidType(format!("{ty} is not an integer type")))?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v < lo || **v > hi) {
            return Err(ColumnError::ValueOutOfDomain { index: i, value: v.to_string(), ty });
        }
        let len = values.len();
        let data = match ty {
            ElementType::UInt(_) => Data::UInt(values.into_iter().map(|v| v as u64).collect()),
            ElementType::Int(_) => Data::Int(values.into_iter().map(|v| v as i64).collect()),
            _ => Data::Bit(values.into_iter().map(|v| v == 1).collect()),
        };
        Ok(Column::raw(ty, len, data))
    }

    pub fn from_u64s(ty: ElementType, values: Vec<u64>) -> Result<Column, ColumnError> {
        match ty {
            ElementType::UInt(w) => {
                ty.check()?;
                if w < 64 {
                    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v >> w != 0) {
                        return Err(ColumnError::ValueOutOfDomain { index: i, value: v.to_string(), ty });
                    }
                }
                let len = values.len();
                Ok(Column::raw(ty, len, Data::UInt(values)))
            }
            _ => Column::from_i128(ty, values.into_iter().map(|v| v as i128).collect()),
        }
    }

    pub fn from_i64s(ty: ElementType, values: Vec<i64>) -> Result<Column, ColumnError> {
        match ty {
            ElementType::Int(64) => {
                let len = values.len();
                Ok(Column::raw(ty, len, Data::Int(values)))
            }
            _ => Column::from_i128(ty, values.into_iter().map(|v| v as i128).collect()),
        }
    }

    pub fn from_f64s(ty: ElementType, values: Vec<f64>) -> Result<Column, ColumnError> {
        Column::new(ty, values.into_iter().map(Value::Float).collect())
    }

    /// A `u64` column.
    pub fn u64s(values: Vec<u64>) -> Column {
        let len = values.len();
        Column::raw(ElementType::U64, len, Data::UInt(values))
    }

    /// An `i64` column.
    pub fn i64s(values: Vec<i64>) -> Column {
        let len = values.len();
        Column::raw(ElementType::I64, len, Data::Int(values))
    }

    pub fn bits(values: Bits) -> Column {
        let len = values.len();
        Column::raw(ElementType::Bit, len, Data::Bit(values))
    }

    pub fn bools(values: &[bool]) -> Column {
        Column::bits(values.iter().copied().collect())
    }

    pub fn units(len: usize) -> Column {
        Column::raw(ElementType::Unit, len, Data::Unit(len))
    }

    pub fn empty(ty: ElementType) -> Column {
        match &ty {
            ElementType::Product(cs) => {
                let comps = cs.iter().map(|c| Column::empty(c.clone())).collect();
                Column::raw(ty, 0, Data::Product(comps))
            }
            _ => Column::new(ty, Vec::new()).expect("empty column of a valid type"),
        }
    }

    /// A length-1 column.
    pub fn scalar(ty: ElementType, v: Value) -> Result<Column, ColumnError> {
        Column::new(ty, vec![v])
    }

    pub fn scalar_u64(v: u64) -> Column {
        Column::u64s(vec![v])
    }

    /// Zips equal-length columns into a product-typed column.
    pub fn zip(components: Vec<Column>) -> Result<Column, ColumnError> {
        let len = components.first().map_or(0, |c| c.len);
        if let Some(c) = components.iter().find(|c| c.len != len) {
            return Err(ColumnError::LengthMismatch { expected: len, found: c.len });
        }
        let ty = ElementType::product(components.iter().map(|c| c.ty.clone()).collect())?;
        Ok(Column::raw(ty, len, Data::Product(components)))
    }

    pub fn element_type(&self) -> &ElementType {
        &self.ty
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<Value> {
        if i >= self.len {
            return None;
        }
        Some(match &*self.data {
            Data::UInt(v) => Value::UInt(v[i]),
            Data::Int(v) => Value::Int(v[i]),
            Data::Float(v) => Value::Float(v[i]),
            Data::Bit(b) => Value::Bit(b.get(i)),
            Data::Unit(_) => Value::Unit,
            Data::Product(cs) => Value::Tuple(cs.iter().map(|c| c.value(i)).collect()),
        })
    }

    /// Element `i`; panics when out of range.
    pub fn value(&self, i: usize) -> Value {
        self.get(i).unwrap_or_else(|| panic!("index {i} out of range for column of length {}", self.len))
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.len).map(move |i| self.value(i))
    }

    pub fn values(&self) -> Vec<Value> {
        self.iter().collect()
    }

    pub fn as_u64(&self) -> Option<&[u64]> {
        match &*self.data {
            Data::UInt(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &*self.data {
            Data::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &*self.data {
            Data::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bits(&self) -> Option<&Bits> {
        match &*self.data {
            Data::Bit(b) => Some(b),
            _ => None,
        }
    }

    pub fn components(&self) -> Option<&[Column]> {
        match &*self.data {
            Data::Product(cs) => Some(cs),
            _ => None,
        }
    }

    /// Integer view (integer and bit columns only).
    pub fn to_i128s(&self) -> Option<Vec<i128>> {
        Some(match &*self.data {
            Data::UInt(v) => v.iter().map(|x| *x as i128).collect(),
            Data::Int(v) => v.iter().map(|x| *x as i128).collect(),
            Data::Bit(b) => b.iter().map(|x| x as i128).collect(),
            _ => return None,
        })
    }

    /// Reads an integer column as non-negative indices.
    pub fn to_indices(&self) -> Result<Vec<usize>, ColumnError> {
        match &*self.data {
            Data::UInt(v) => Ok(v.iter().map(|x| *x as usize).collect()),
            Data::Int(v) => v
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    usize::try_from(*x).map_err(|_| ColumnError::ValueOutOfDomain {
                        index: i,
                        value: x.to_string(),
                        ty: ElementType::U64,
                    })
                })
                .collect(),
            Data::Bit(b) => Ok(b.iter().map(|x| x as usize).collect()),
            _ => Err(ColumnError::InvalidType(format!("{} is not an index type", self.ty))),
        }
    }

    /// The single value of a length-1 column, as an unsigned integer.
    pub fn scalar_value_u64(&self) -> Option<u64> {
        if self.len != 1 {
            return None;
        }
        self.value(0).as_u64()
    }

    /// Gathers `idx` (every index must be in range).
    pub fn take(&self, idx: &[usize]) -> Column {
        let data = match &*self.data {
            Data::UInt(v) => Data::UInt(idx.iter().map(|i| v[*i]).collect()),
            Data::Int(v) => Data::Int(idx.iter().map(|i| v[*i]).collect()),
            Data::Float(v) => Data::Float(idx.iter().map(|i| v[*i]).collect()),
            Data::Bit(b) => Data::Bit(idx.iter().map(|i| b.get(*i)).collect()),
            Data::Unit(n) => {
                assert!(idx.iter().all(|i| i < n), "index out of range");
                Data::Unit(idx.len())
            }
            Data::Product(cs) => Data::Product(cs.iter().map(|c| c.take(idx)).collect()),
        };
        Column::raw(self.ty.clone(), idx.len(), data)
    }

    pub fn slice(&self, start: usize, end: usize) -> Column {
        assert!(start <= end && end <= self.len, "slice {start}..{end} of length {}", self.len);
        let data = match &*self.data {
            Data::UInt(v) => Data::UInt(v[start..end].to_vec()),
            Data::Int(v) => Data::Int(v[start..end].to_vec()),
            Data::Float(v) => Data::Float(v[start..end].to_vec()),
            Data::Bit(b) => Data::Bit((start..end).map(|i| b.get(i)).collect()),
            Data::Unit(_) => Data::Unit(end - start),
            Data::Product(cs) => Data::Product(cs.iter().map(|c| c.slice(start, end)).collect()),
        };
        Column::raw(self.ty.clone(), end - start, data)
    }

    /// Concatenates same-typed columns.
    pub fn concat(cols: &[&Column], ty: &ElementType) -> Result<Column, ColumnError> {
        if let Some(c) = cols.iter().find(|c| &c.ty != ty) {
            return Err(ColumnError::TypeMismatch { expected: ty.clone(), found: c.ty.clone() });
        }
        let len = cols.iter().map(|c| c.len).sum();
        let data = match ty {
            ElementType::UInt(_) => Data::UInt(cols.iter().flat_map(|c| c.as_u64().unwrap().iter().copied()).collect()),
            ElementType::Int(_) => Data::Int(cols.iter().flat_map(|c| c.as_i64().unwrap().iter().copied()).collect()),
            ElementType::Float(_) => {
                Data::Float(cols.iter().flat_map(|c| c.as_f64().unwrap().iter().copied()).collect())
            }
            ElementType::Bit => Data::Bit(cols.iter().flat_map(|c| c.as_bits().unwrap().iter()).collect()),
            ElementType::Unit | ElementType::Bottom => Data::Unit(len),
            ElementType::Product(ts) => Data::Product(
                (0..ts.len())
                    .map(|k| {
                        let parts: Vec<&Column> = cols.iter().map(|c| &c.components().unwrap()[k]).collect();
                        Column::concat(&parts, &ts[k])
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        Ok(Column::raw(ty.clone(), len, data))
    }

    /// Copy with `self[pos[j]] = data[j]` (positions in range, data of the same type).
    pub fn scatter(&self, pos: &[usize], data: &Column) -> Column {
        assert_eq!(pos.len(), data.len);
        let out = match (&*self.data, &*data.data) {
            (Data::UInt(a), Data::UInt(b)) => {
                let mut v = a.clone();
                pos.iter().zip(b).for_each(|(p, x)| v[*p] = *x);
                Data::UInt(v)
            }
            (Data::Int(a), Data::Int(b)) => {
                let mut v = a.clone();
                pos.iter().zip(b).for_each(|(p, x)| v[*p] = *x);
                Data::Int(v)
            }
            (Data::Float(a), Data::Float(b)) => {
                let mut v = a.clone();
                pos.iter().zip(b).for_each(|(p, x)| v[*p] = *x);
                Data::Float(v)
            }
            (Data::Bit(a), Data::Bit(b)) => {
                let mut v = a.clone();
                pos.iter().enumerate().for_each(|(j, p)| v.set(*p, b.get(j)));
                Data::Bit(v)
            }
            (Data::Unit(n), Data::Unit(_)) => Data::Unit(*n),
            (Data::Product(a), Data::Product(b)) => {
                Data::Product(a.iter().zip(b).map(|(x, y)| x.scatter(pos, y)).collect())
            }
            _ => panic!("scatter between mismatched storage"),
        };
        Column::raw(self.ty.clone(), self.len, out)
    }
}

impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        if self.ty != other.ty || self.len != other.len {
            return false;
        }
        match (&*self.data, &*other.data) {
            (Data::Float(a), Data::Float(b)) => a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            (a, b) => a == b,
        }
    }
}

impl Eq for Column {}

impl fmt::Debug for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Column<{}>[", self.ty)?;
        for (i, v) in self.iter().take(32).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.len > 32 {
            write!(f, ", … ({} total)", self.len)?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_column_examples() {
        let c = Column::new(ElementType::U8, vec![1u64.into(), 2u64.into(), 3u64.into()]).unwrap();
        assert_eq!(c.len(), 3);
        assert!(Column::new(ElementType::Bit, vec![]).unwrap().is_empty());
        let err = Column::new(ElementType::U8, vec![300u64.into()]).unwrap_err();
        assert!(matches!(err, ColumnError::ValueOutOfDomain { index: 0, .. }));
    }

    #[test]
    fn bottom_admits_no_values() {
        assert!(Column::new(ElementType::Bottom, vec![Value::Unit]).is_err());
        assert_eq!(Column::empty(ElementType::Bottom).len(), 0);
    }

    #[test]
    fn equality_is_typed() {
        let a = Column::from_u64s(ElementType::U8, vec![1, 2]).unwrap();
        let b = Column::from_u64s(ElementType::U16, vec![1, 2]).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, Column::from_u64s(ElementType::U8, vec![1, 2]).unwrap());
    }

    #[test]
    fn product_columns() {
        let z = Column::zip(vec![Column::u64s(vec![1, 2]), Column::bools(&[true, false])]).unwrap();
        assert_eq!(z.element_type().to_string(), "(u64,bit)");
        assert_eq!(z.value(1), Value::Tuple(vec![Value::UInt(2), Value::Bit(false)]));
        let again = Column::new(z.element_type().clone(), z.values()).unwrap();
        assert_eq!(again, z);
    }

    #[test]
    fn kernels() {
        let c = Column::u64s(vec![10, 11, 12, 13]);
        assert_eq!(c.take(&[3, 0, 0]), Column::u64s(vec![13, 10, 10]));
        assert_eq!(c.slice(1, 3), Column::u64s(vec![11, 12]));
        assert_eq!(c.scatter(&[0, 2], &Column::u64s(vec![7, 8])), Column::u64s(vec![7, 11, 8, 13]));
        let cat = Column::concat(&[&c, &Column::u64s(vec![1])], &ElementType::U64).unwrap();
        assert_eq!(cat.len(), 5);
    }
}
