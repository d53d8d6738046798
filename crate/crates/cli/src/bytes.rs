//! Byte counts with binary suffixes.

/// Parses `512`, `1K`, `128M`, `4G` (case-insensitive, optional trailing
/// `B`, `K = 1024`).
pub fn parse_bytes(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let t = t.strip_suffix(['b', 'B']).unwrap_or(t);
    let (digits, shift) = match t.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => {
            let shift = match c.to_ascii_uppercase() {
                'K' => 10,
                'M' => 20,
                'G' => 30,
                'T' => 40,
                _ => return Err(format!("unknown size suffix `{c}` in `{s}`")),
            };
            (&t[..i], shift)
        }
        _ => (t, 0),
    };
    let n: u64 = digits.parse().map_err(|_| format!("`{s}` is not a byte count"))?;
    if n == 0 {
        return Err("byte limits must be positive".into());
    }
    n.checked_mul(1u64 << shift).ok_or_else(|| format!("`{s}` overflows"))
}
