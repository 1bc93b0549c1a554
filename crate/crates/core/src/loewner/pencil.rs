use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{InterpolationData, LoewnerError};
use crate::linalg::frobenius;
use crate::C64;

/// Loewner and shifted Loewner matrices with the tangential data they came from.
#[derive(Debug, Clone)]
pub struct LoewnerPencil {
    pub ll: DMatrix<C64>,
    pub lls: DMatrix<C64>,
    pub data: InterpolationData,
}

impl LoewnerPencil {
    pub fn v(&self) -> &DMatrix<C64> {
        &self.data.v
    }

    pub fn w(&self) -> &DMatrix<C64> {
        &self.data.w
    }
}

pub fn build_pencil(data: InterpolationData) -> Result<LoewnerPencil, LoewnerError> {
    let (nv, nr) = (data.n_left(), data.n_right());
    let vr = &data.v * &data.r;
    let lw = &data.l * &data.w;
    let mut ll = DMatrix::zeros(nv, nr);
    let mut lls = DMatrix::zeros(nv, nr);
    for i in 0..nr {
        let lam = data.lambda[i];
        for j in 0..nv {
            let mu = data.mu[j];
            let d = mu - lam;
            if d.norm() <= 1e-14 * mu.norm().max(lam.norm()).max(1.0) {
                return Err(LoewnerError::CoincidentPoints { left: j, right: i });
            }
            ll[(j, i)] = (vr[(j, i)] - lw[(j, i)]) / d;
            lls[(j, i)] = (mu * vr[(j, i)] - lam * lw[(j, i)]) / d;
        }
    }
    Ok(LoewnerPencil { ll, lls, data })
}

fn scale_cols(m: &DMatrix<C64>, d: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| m[(a, b)] * d[b])
}

fn scale_rows(d: &[C64], m: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| d[a] * m[(a, b)])
}

/// Relative Frobenius residuals of `𝕃Λ - M𝕃 = LW - VR` and
/// `𝕃sΛ - M𝕃s = LWΛ - MVR`.
pub fn sylvester_residuals(p: &LoewnerPencil) -> (f64, f64) {
    let d = &p.data;
    let lw = &d.l * &d.w;
    let vr = &d.v * &d.r;
    let rhs1 = &lw - &vr;
    let lhs1 = scale_cols(&p.ll, &d.lambda) - scale_rows(&d.mu, &p.ll);
    let rhs2 = scale_cols(&lw, &d.lambda) - scale_rows(&d.mu, &vr);
    let lhs2 = scale_cols(&p.lls, &d.lambda) - scale_rows(&d.mu, &p.lls);
    let rel = |l: DMatrix<C64>, r: &DMatrix<C64>| {
        let n = frobenius(r);
        let res = frobenius(&(l - r));
        if n > 0.0 { res / n } else { res }
    };
    (rel(lhs1, &rhs1), rel(lhs2, &rhs2))
}

/// Real-valued equivalent of a conjugate-closed pencil.
#[derive(Debug, Clone)]
pub struct RealPencil {
    pub ll: DMatrix<f64>,
    pub lls: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// Largest discarded imaginary part relative to the largest entry.
    pub imag_residual: f64,
}

/// Mixes each conjugate pair of rows `(a, a+1)` into `((a+b)/√2, i(a-b)/√2)`.
fn rotate_rows(m: &DMatrix<C64>, blocks: &[usize]) -> DMatrix<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = m.clone();
    let mut r = 0;
    for &b in blocks {
        if b == 2 {
            for c in 0..m.ncols() {
                let (x, y) = (m[(r, c)], m[(r + 1, c)]);
                out[(r, c)] = (x + y) * h;
                out[(r + 1, c)] = C64::new(0.0, h) * (x - y);
            }
        }
        r += b;
    }
    out
}

/// Mixes each conjugate pair of columns `(a, a+1)` into `((a+b)/√2, -i(a-b)/√2)`.
fn rotate_cols(m: &DMatrix<C64>, blocks: &[usize]) -> DMatrix<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = m.clone();
    let mut c = 0;
    for &b in blocks {
        if b == 2 {
            for r in 0..m.nrows() {
                let (x, y) = (m[(r, c)], m[(r, c + 1)]);
                out[(r, c)] = (x + y) * h;
                out[(r, c + 1)] = C64::new(0.0, -h) * (x - y);
            }
        }
        c += b;
    }
    out
}

impl LoewnerPencil {
    /// Applies the block-unitary pair rotation on both sides. For a
    /// conjugate-closed pencil every entry of the result is real.
    pub fn real_form(&self) -> RealPencil {
        let d = &self.data;
        let both = |m: &DMatrix<C64>| rotate_cols(&rotate_rows(m, &d.left_blocks), &d.right_blocks);
        let ll = both(&self.ll);
        let lls = both(&self.lls);
        let v = rotate_rows(&d.v, &d.left_blocks);
        let w = rotate_cols(&d.w, &d.right_blocks);
        let mut residual: f64 = 0.0;
        for m in [&ll, &lls, &v, &w] {
            let big = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let im = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if big > 0.0 {
                residual = residual.max(im / big);
            }
        }
        RealPencil {
            ll: ll.map(|z| z.re),
            lls: lls.map(|z| z.re),
            v: v.map(|z| z.re),
            w: w.map(|z| z.re),
            imag_residual: residual,
        }
    }

    /// Writes `LL, LLs, V, W` to a binary container readable by [`read_pencil_dump`].
    ///
    /// Layout: magic `OMAPENCL`, matrix count (u32), then per matrix the name
    /// length (u32), UTF-8 name, rows and cols (u64) and row-major `(re, im)`
    /// pairs, all little-endian.
    pub fn write_dump(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(b"OMAPENCL")?;
        let mats = [("LL", &self.ll), ("LLs", &self.lls), ("V", &self.data.v), ("W", &self.data.w)];
        out.write_all(&(mats.len() as u32).to_le_bytes())?;
        for (name, m) in mats {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(m.nrows() as u64).to_le_bytes())?;
            out.write_all(&(m.ncols() as u64).to_le_bytes())?;
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    out.write_all(&m[(r, c)].re.to_le_bytes())?;
                    out.write_all(&m[(r, c)].im.to_le_bytes())?;
                }
            }
        }
        out.flush()
    }
}

pub fn read_pencil_dump(path: &Path) -> std::io::Result<Vec<(String, DMatrix<C64>)>> {
    let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != b"OMAPENCL" {
        return Err(bad("not a pencil dump"));
    }
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    f.read_exact(&mut u32b)?;
    let count = u32::from_le_bytes(u32b);
    let mut out = Vec::new();
    for _ in 0..count {
        f.read_exact(&mut u32b)?;
        let mut name = vec![0u8; u32::from_le_bytes(u32b) as usize];
        f.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("matrix name is not UTF-8"))?;
        f.read_exact(&mut u64b)?;
        let rows = u64::from_le_bytes(u64b) as usize;
        f.read_exact(&mut u64b)?;
        let cols = u64::from_le_bytes(u64b) as usize;
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                f.read_exact(&mut u64b)?;
                let re = f64::from_le_bytes(u64b);
                f.read_exact(&mut u64b)?;
                m[(r, c)] = C64::new(re, f64::from_le_bytes(u64b));
            }
        }
        out.push((name, m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::next::FrfDomain;

    fn scalar(mu: &[C64], lam: &[C64], h: impl Fn(C64) -> C64) -> InterpolationData {
        InterpolationData {
            mu: mu.to_vec(),
            l: DMatrix::from_element(mu.len(), 1, C64::new(1.0, 0.0)),
            v: DMatrix::from_iterator(mu.len(), 1, mu.iter().map(|&s| h(s))),
            lambda: lam.to_vec(),
            r: DMatrix::from_element(1, lam.len(), C64::new(1.0, 0.0)),
            w: DMatrix::from_iterator(1, lam.len(), lam.iter().map(|&s| h(s))),
            left_freqs: vec![0.0; mu.len()],
            right_freqs: vec![0.0; lam.len()],
            left_blocks: vec![1; mu.len()],
            right_blocks: vec![1; lam.len()],
            domain: FrfDomain::ContinuousLaplace,
        }
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_function() {
        let k = c(2.5, -1.0);
        let p = build_pencil(scalar(&[c(0.0, 1.0), c(0.0, 3.0)], &[c(0.0, 2.0), c(0.0, 4.0)], |_| k)).unwrap();
        assert!(p.ll.iter().all(|z| z.norm() < 1e-15));
        assert!(p.lls.iter().all(|z| (z - k).norm() < 1e-14));
    }

    #[test]
    fn one_by_one_is_divided_difference() {
        let h = |s: C64| C64::new(1.0, 0.0) / (s * s + 3.0);
        let (mu, lam) = (c(0.0, 1.5), c(0.0, 0.5));
        let p = build_pencil(scalar(&[mu], &[lam], h)).unwrap();
        let dd = (h(mu) - h(lam)) / (mu - lam);
        assert!((p.ll[(0, 0)] - dd).norm() < 1e-15);
    }

    #[test]
    fn sylvester_on_first_order_function() {
        let h = |s: C64| C64::new(1.0, 0.0) / (s + 1.0);
        let p = build_pencil(scalar(&[c(0.0, 1.0), c(0.0, 3.0)], &[c(0.0, 2.0), c(0.0, 4.0)], h)).unwrap();
        let (r1, r2) = sylvester_residuals(&p);
        assert!(r1 <= 1e-12 && r2 <= 1e-12, "{r1} {r2}");
    }

    #[test]
    fn coincident_points_named() {
        let e = build_pencil(scalar(&[c(0.0, 1.0), c(0.0, 2.0)], &[c(0.0, 2.0)], |s| s)).unwrap_err();
        assert!(matches!(e, LoewnerError::CoincidentPoints { left: 1, right: 0 }));
    }

    #[test]
    fn dump_round_trip() {
        let h = |s: C64| C64::new(1.0, 0.0) / (s + 1.0);
        let p = build_pencil(scalar(&[c(0.0, 1.0), c(0.0, 3.0)], &[c(0.0, 2.0)], h)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pencil.bin");
        p.write_dump(&path).unwrap();
        let back = read_pencil_dump(&path).unwrap();
        assert_eq!(back[0], ("LL".to_string(), p.ll.clone()));
        assert_eq!(back[3].1, p.data.w);
    }
}
