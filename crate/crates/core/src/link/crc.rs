//! CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, unreflected, no final
//! xor.

const POLY: u16 = 0x1021;
const INIT: u16 = 0xFFFF;

const TABLE: [u16; 256] = {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut k = 0;
        while k < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ POLY } else { crc << 1 };
            k += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
};

pub fn crc16(data: &[u8]) -> u16 {
    data.iter().fold(INIT, |crc, &b| {
        (crc << 8) ^ TABLE[((crc >> 8) as u8 ^ b) as usize]
    })
}


#[cfg(test)]
mod tests {
    use super::reference::crc16_bitwise;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn check_values() {
        assert_eq!(crc16_bitwise(b"123456789"), 0x29B1);
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(crc16(&[]), 0xFFFF);
        assert_eq!(crc16_bitwise(&[]), 0xFFFF);
    }

    proptest! {
        #[test]
        fn table_matches_bitwise(data in prop::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(crc16(&data), crc16_bitwise(&data));
        }

        #[test]
        fn single_bit_flips_change_crc(data in prop::collection::vec(any::<u8>(), 1..16)) {
            let base = crc16(&data);
            for bit in 0..data.len() * 8 {
                let mut d = data.clone();
                d[bit / 8] ^= 0x80 >> (bit % 8);
                prop_assert_ne!(crc16(&d), base);
            }
        }
    }
}
