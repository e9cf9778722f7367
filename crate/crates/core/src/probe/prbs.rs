/// PRBS-31 generator, polynomial x³¹ + x²⁸ + 1.
#[derive(Debug, Clone)]
pub struct Prbs31 {
    state: u32,
}

pub const PRBS31_SEED: u32 = 0x7FFF_FFFF;

impl Default for Prbs31 {
    fn default() -> Self {
        Self::new(PRBS31_SEED)
    }
}

impl Prbs31 {
    /// `seed` is masked to 31 bits; an all-zero register would lock up, so it
    /// is replaced with the default seed.
    pub fn new(seed: u32) -> Self {
        let s = seed & 0x7FFF_FFFF;
        Self {
            state: if s == 0 { PRBS31_SEED } else { s },
        }
    }

    pub fn next_bit(&mut self) -> bool {
        let bit = ((self.state >> 30) ^ (self.state >> 27)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7FFF_FFFF;
        bit == 1
    }

    /// Fills `buf` MSB first.
    pub fn fill(&mut self, buf: &mut [u8]) {
        for byte in buf {
            let mut b = 0u8;
            for _ in 0..8 {
                b = (b << 1) | self.next_bit() as u8;
            }
            *byte = b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference sequence straight from the recurrence o[k] = o[k-31] ^ o[k-28],
    /// with the 31 bits preceding the output all set.
    fn oracle_bits(n: usize) -> Vec<bool> {
        let mut o = vec![true; 31];
        for k in 31..31 + n {
            let b = o[k - 31] ^ o[k - 28];
            o.push(b);
        }
        o.split_off(31)
    }

    fn pack(bits: &[bool]) -> Vec<u8> {
        bits.chunks(8)
            .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8))
            .collect()
    }

    #[test]
    fn first_bytes_match_recurrence() {
        let mut buf = [0u8; 8];
        Prbs31::default().fill(&mut buf);
        assert_eq!(buf.to_vec(), pack(&oracle_bits(64)));
    }

    #[test]
    fn long_run_matches_recurrence() {
        let mut buf = vec![0u8; 4096];
        Prbs31::default().fill(&mut buf);
        assert_eq!(buf, pack(&oracle_bits(4096 * 8)));
    }

    #[test]
    fn zero_seed_does_not_lock_up() {
        let mut g = Prbs31::new(0);
        assert!((0..64).any(|_| g.next_bit()));
    }
}
