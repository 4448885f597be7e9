//! Space-filling-curve keys on a `2^depth` cube of cells.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const MAX_DEPTH: u32 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveKind {
    Morton,
    #[default]
    Hilbert,
}

impl FromStr for CurveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "morton" => Ok(CurveKind::Morton),
            "hilbert" => Ok(CurveKind::Hilbert),
            _ => Err(Error::config("balance", format!("unknown curve `{s}` (expected morton|hilbert)"))),
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::Morton => "morton",
            CurveKind::Hilbert => "hilbert",
        })
    }
}

fn check(ix: u32, iy: u32, iz: u32, depth: u32) {
    assert!(depth <= MAX_DEPTH, "depth {depth} exceeds {MAX_DEPTH}");
    let lim = 1u64 << depth;
    debug_assert!(
        (ix as u64) < lim && (iy as u64) < lim && (iz as u64) < lim,
        "cell ({ix}, {iy}, {iz}) outside a depth-{depth} grid"
    );
}

/// Bit interleave with x in the least significant position of each triad.
pub fn morton_key(ix: u32, iy: u32, iz: u32, depth: u32) -> u64 {
    check(ix, iy, iz, depth);
    let mut k = 0u64;
    for b in 0..depth {
        k |= ((ix as u64 >> b) & 1) << (3 * b);
        k |= ((iy as u64 >> b) & 1) << (3 * b + 1);
        k |= ((iz as u64 >> b) & 1) << (3 * b + 2);
    }
    k
}

/// 3D Hilbert index via Skilling's axes-to-transpose construction.
pub fn hilbert_key(ix: u32, iy: u32, iz: u32, depth: u32) -> u64 {
    check(ix, iy, iz, depth);
    if depth == 0 {
        return 0;
    }
    let mut x = [ix, iy, iz];
    let m = 1u32 << (depth - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    x[1] ^= x[0];
    x[2] ^= x[1];
    let mut t = 0u32;
    q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in &mut x {
        *v ^= t;
    }
    let mut k = 0u64;
    for b in (0..depth).rev() {
        for v in &x {
            k = (k << 1) | ((*v >> b) & 1) as u64;
        }
    }
    k
}

pub fn curve_key(kind: CurveKind, ix: u32, iy: u32, iz: u32, depth: u32) -> u64 {
    match kind {
        CurveKind::Morton => morton_key(ix, iy, iz, depth),
        CurveKind::Hilbert => hilbert_key(ix, iy, iz, depth),
    }
}
