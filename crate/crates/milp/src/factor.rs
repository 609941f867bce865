//! Product-form basis inverse.
//!
//! `B = E_1 E_2 ... E_k` where each `E_i` is the identity with one column
//! replaced. FTRAN applies the inverse etas front to back, BTRAN back to front.

const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the replacing column.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct EtaFile {
    etas: Vec<Eta>,
}

impl EtaFile {
    pub fn clear(&mut self) {
        self.etas.clear();
    }

    /// Records that position `pos` of the basis was replaced by a column whose
    /// representation in the current basis is `alpha`.
    pub fn push(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }

    /// `v <- B^{-1} v`
    pub fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let xp = v[eta.pos];
            if xp == 0.0 {
                continue;
            }
            let xp = xp / eta.pivot;
            v[eta.pos] = xp;
            for &(i, a) in &eta.entries {
                v[i] -= a * xp;
            }
        }
    }

    /// `v^T <- v^T B^{-1}`
    pub fn btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * v[i];
            }
            v[eta.pos] = s / eta.pivot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(b: &[[f64; 3]; 3], x: &[f64]) -> Vec<f64> {
        (0..3).map(|i| (0..3).map(|j| b[i][j] * x[j]).sum()).collect()
    }

    #[test]
    fn ftran_and_btran_invert_product() {
        // B columns: e0 replaced by (2,1,0), then e2 replaced by (0,1,4) expressed in the new basis.
        let b = [[2.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, 4.0]];
        let mut f = EtaFile::default();
        f.push(0, &[2.0, 1.0, 0.0]);
        // column (0,1,4) in basis [(2,1,0), e1, e2] is (0,1,4)
        f.push(2, &[0.0, 1.0, 4.0]);

        let rhs = [4.0, 7.0, 8.0];
        let mut x = rhs.to_vec();
        f.ftran(&mut x);
        let back = matvec(&b, &x);
        for (a, e) in back.iter().zip(rhs) {
            assert!((a - e).abs() < 1e-12);
        }

        // y^T B = rhs^T
        let mut y = rhs.to_vec();
        f.btran(&mut y);
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| y[i] * b[i][j]).sum();
            assert!((s - rhs[j]).abs() < 1e-12);
        }
    }
}
