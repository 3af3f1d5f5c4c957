//! Binary field snapshots: a fixed little-endian header followed by `u, v, w, z`.

use std::io::{Read, Write};

use chemotax::{Domain, Field, ModelParams, SimState};

use crate::CliError;

pub const MAGIC: [u8; 4] = *b"CTX2";
pub const VERSION: u32 = 1;
/// Magic, version, two `u32` sizes and eight `f64` scalars.
pub const HEADER_LEN: usize = 4 + 4 + 2 * 4 + 8 * 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: u32,
    pub ny: u32,
    pub hx: f64,
    pub hy: f64,
    pub t: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub state: SimState<f64>,
}

impl Snapshot {
    pub fn new(state: &SimState<f64>, dom: &Domain<f64>, params: &ModelParams<f64>) -> Result<Self, CliError> {
        state.validate(dom)?;
        let size = |n: usize| u32::try_from(n).map_err(|_| CliError::Invalid(format!("grid size {n} exceeds u32")));
        Ok(Self {
            header: SnapshotHeader {
                nx: size(dom.nx())?,
                ny: size(dom.ny())?,
                hx: dom.hx(),
                hy: dom.hy(),
                t: state.t,
                tau1: params.tau1,
                tau2: params.tau2,
                chi1: params.chi1,
                chi2: params.chi2,
                chi3: params.chi3,
            },
            state: state.clone(),
        })
    }

    /// Grid rebuilt from the stored cell sizes.
    pub fn domain(&self) -> Result<Domain<f64>, CliError> {
        let h = &self.header;
        Ok(Domain::new(h.hx * f64::from(h.nx), h.hy * f64::from(h.ny), h.nx as usize, h.ny as usize)?)
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        let h = &self.header;
        let mut buf = Vec::with_capacity(HEADER_LEN + 32 * self.state.u.len());
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&h.nx.to_le_bytes());
        buf.extend_from_slice(&h.ny.to_le_bytes());
        for x in [h.hx, h.hy, h.t, h.tau1, h.tau2, h.chi1, h.chi2, h.chi3] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for f in [&self.state.u, &self.state.v, &self.state.w, &self.state.z] {
            for x in f.values() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    pub fn read_from(mut input: impl Read) -> Result<Self, CliError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Snapshot(m);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let (nx, ny) = (u32_at(8), u32_at(12));
        let s: Vec<f64> = (0..8).map(|i| f64_at(16 + 8 * i)).collect();
        let header = SnapshotHeader {
            nx,
            ny,
            hx: s[0],
            hy: s[1],
            t: s[2],
            tau1: s[3],
            tau2: s[4],
            chi1: s[5],
            chi2: s[6],
            chi3: s[7],
        };
        let n = (nx as usize)
            .checked_mul(ny as usize)
            .ok_or_else(|| bad("grid size overflows".into()))?;
        let expected = n.checked_mul(32).ok_or_else(|| bad("payload size overflows".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(bad(format!("payload is {} bytes, expected {expected}", payload.len())));
        }
        let dom = Domain::new(header.hx * nx as f64, header.hy * ny as f64, nx as usize, ny as usize)?;
        let field = |k: usize| -> Result<Field<f64>, CliError> {
            let vals = payload[k * n * 8..(k + 1) * n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Field::from_vec(&dom, vals)?)
        };
        let mut state = SimState::new(field(0)?, field(1)?, field(2)?, field(3)?);
        state.t = header.t;
        Ok(Snapshot { header, state })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chemotax::model::build_random_perturbation;

    fn sample() -> Snapshot {
        let dom = Domain::new(2.0, 1.0, 8, 4).unwrap();
        let f = |s| build_random_perturbation(&dom, 1.0 / 3.0, 0.5, s);
        let mut st = SimState::new(f(1), f(2), f(3), f(4));
        st.t = 0.1 + 0.2;
        let p = ModelParams::new(1.0, 2.0, 0.3, 1.0, 0.5).unwrap();
        Snapshot::new(&st, &dom, &p).unwrap()
    }

    #[test]
    fn layout_is_fixed() {
        let b = sample().to_bytes();
        assert_eq!(&b[..4], b"CTX2");
        assert_eq!(b.len(), HEADER_LEN + 4 * 32 * 8);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 0.1 + 0.2);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let b = s.to_bytes();
        let r = Snapshot::from_bytes(&b).unwrap();
        assert_eq!(r.to_bytes(), b);
        for (a, c) in s.state.fields().iter().zip(r.state.fields()) {
            assert!(a.values().iter().zip(c.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let mut b = sample().to_bytes();
        assert!(Snapshot::from_bytes(&b[..b.len() - 1]).is_err());
        b[0] = b'X';
        assert!(Snapshot::from_bytes(&b).is_err());
    }
}
