//! XYZ trajectory frames.

use std::io::{self, Write};

use nanopair_core::geometry::Vec3;

/// Write one frame: count, a comment carrying the step, then `A x y z` with
/// 17 significant digits so the text round-trips to the same doubles.
pub fn write_frame<W: Write>(w: &mut W, step: u64, positions: &[Vec3]) -> io::Result<()> {
    writeln!(w, "{}", positions.len())?;
    writeln!(w, "step {step}")?;
    for p in positions {
        writeln!(w, "A {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Parse a multi-frame XYZ file back into `(step, positions)` pairs.
pub fn read_frames(text: &str) -> Result<Vec<(u64, Vec<Vec3>)>, String> {
    let mut lines = text.lines().enumerate();
    let mut frames = Vec::new();
    while let Some((n, head)) = lines.next() {
        if head.trim().is_empty() {
            continue;
        }
        let count: usize = head
            .trim()
            .parse()
            .map_err(|_| format!("line {}: expected particle count", n + 1))?;
        let (n, comment) = lines.next().ok_or("truncated frame header")?;
        let step = comment
            .trim()
            .strip_prefix("step ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("line {}: expected `step <n>`", n + 1))?;
        let mut pos = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, l) = lines.next().ok_or("truncated frame")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(format!("line {}: expected `A x y z`", n + 1));
            }
            let c = |s: &str| s.parse::<f64>().map_err(|_| format!("line {}: bad coordinate `{s}`", n + 1));
            pos.push(Vec3::new(c(f[1])?, c(f[2])?, c(f[3])?));
        }
        frames.push((step, pos));
    }
    Ok(frames)
}
