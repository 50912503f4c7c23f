//! Bit strings, most-significant bit first.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn with_capacity(n: usize) -> Self {
        Bits(Vec::with_capacity(n))
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from(&mut self, other: &[bool]) {
        self.0.extend_from_slice(other);
    }

    /// Appends the eight bits of `byte`, MSB first.
    pub fn push_byte(&mut self, byte: u8) {
        for i in (0..8).rev() {
            self.0.push(byte >> i & 1 == 1);
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut b = Bits::with_capacity(bytes.len() * 8);
        for &x in bytes {
            b.push_byte(x);
        }
        b
    }

    /// Packs into bytes MSB first. A trailing partial byte is zero-filled.
    pub fn to_bytes(&self) -> Vec<u8> {
        pack_bytes(&self.0)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

pub fn pack_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
        })
        .collect()
}

impl Deref for Bits {
    type Target = [bool];

    fn deref(&self) -> &[bool] {
        &self.0
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

impl FromStr for Bits {
    type Err = Error;

    /// Parses a string of `0`/`1`; whitespace and `_` are ignored.
    fn from_str(s: &str) -> Result<Self, Error> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Config(format!("invalid bit character {other:?}"))),
            })
            .collect()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_are_msb_first() {
        let b = Bits::from_bytes(&[0xAC]);
        assert_eq!(b.to_string(), "10101100");
        assert_eq!(b.to_bytes(), vec![0xAC]);
    }

    #[test]
    fn parse_ignores_separators() {
        let b: Bits = "1010_1100 01".parse().unwrap();
        assert_eq!(b.len(), 10);
        assert!("10x".parse::<Bits>().is_err());
    }
}
