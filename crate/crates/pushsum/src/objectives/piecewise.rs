//! Piecewise polynomial functions of one variable.
//!
//! Pieces are half-open intervals `[lo, hi)` that tile the whole line; the
//! first piece starts at `-∞` and the last ends at `+∞`. Unbounded pieces
//! must be affine so the derivative stays globally bounded, which is what
//! the gradient-bound assumption of the optimization procedure needs.

use super::ObjectiveError;

/// Dense polynomial in ascending powers: `coeffs[k]` multiplies `z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Real roots inside `(lo, hi)`, for degree ≤ 2.
    fn roots_within(&self, lo: f64, hi: f64) -> Result<Vec<f64>, ObjectiveError> {
        let c = &self.coeffs;
        let roots: Vec<f64> = match c.len() {
            1 => Vec::new(), // constant: either no roots or identically zero
            2 => vec![-c[0] / c[1]],
            3 => {
                let (a, b, c0) = (c[2], c[1], c[0]);
                let disc = b * b - 4.0 * a * c0;
                if disc < 0.0 {
                    Vec::new()
                } else {
                    let sq = disc.sqrt();
                    vec![(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
                }
            }
            _ => return Err(ObjectiveError::DegreeTooHigh { degree: c.len() - 1 }),
        };
        Ok(roots.into_iter().filter(|r| *r > lo && *r < hi).collect())
    }

    /// Maximum of `|p|` over a bounded interval, exact for degree ≤ 3:
    /// the extremum sits at an endpoint or a stationary point.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> Result<f64, ObjectiveError> {
        let mut best = self.eval(lo).abs().max(self.eval(hi).abs());
        for r in self.derivative().roots_within(lo, hi)? {
            best = best.max(self.eval(r).abs());
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub poly: Polynomial,
}

/// Piecewise polynomial tiling the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    pieces: Vec<Piece>,
}

impl PiecewisePoly {
    pub fn new(pieces: Vec<Piece>) -> Result<Self, ObjectiveError> {
        if pieces.is_empty() {
            return Err(ObjectiveError::NoPieces);
        }
        if pieces[0].lo != f64::NEG_INFINITY {
            return Err(ObjectiveError::UncoveredLine);
        }
        if pieces[pieces.len() - 1].hi != f64::INFINITY {
            return Err(ObjectiveError::UncoveredLine);
        }
        for pair in pieces.windows(2) {
            if pair[0].hi != pair[1].lo {
                return Err(ObjectiveError::UncoveredLine);
            }
        }
        for p in &pieces {
            if !(p.lo < p.hi) {
                return Err(ObjectiveError::UncoveredLine);
            }
            if p.poly.degree() > 4 {
                return Err(ObjectiveError::DegreeTooHigh {
                    degree: p.poly.degree(),
                });
            }
            if (p.lo.is_infinite() || p.hi.is_infinite()) && p.poly.degree() > 1 {
                return Err(ObjectiveError::UnboundedTail {
                    degree: p.poly.degree(),
                });
            }
        }
        Ok(Self { pieces })
    }

    /// A single polynomial valid on all of ℝ.
    pub fn global(poly: Polynomial) -> Result<Self, ObjectiveError> {
        Self::new(vec![Piece {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            poly,
        }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn piece_for(&self, z: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| z < p.hi)
            .unwrap_or(&self.pieces[self.pieces.len() - 1])
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.piece_for(z).poly.eval(z)
    }

    pub fn derivative(&self) -> PiecewisePoly {
        PiecewisePoly {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    lo: p.lo,
                    hi: p.hi,
                    poly: p.poly.derivative(),
                })
                .collect(),
        }
    }

    /// Interior piece boundaries in ascending order.
    pub fn seams(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .take(self.pieces.len() - 1)
            .map(|p| p.hi)
            .collect()
    }

    /// Largest jump across any seam; zero for a continuous function.
    pub fn max_seam_jump(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|pair| (pair[0].poly.eval(pair[0].hi) - pair[1].poly.eval(pair[1].lo)).abs())
            .fold(0.0, f64::max)
    }

    /// Supremum of `|f|` over the whole line. Requires the unbounded
    /// pieces to be constant, which holds for derivatives of valid
    /// piecewise functions.
    pub fn max_abs(&self) -> Result<f64, ObjectiveError> {
        let mut best: f64 = 0.0;
        for p in &self.pieces {
            let m = if p.lo.is_infinite() || p.hi.is_infinite() {
                if p.poly.degree() > 0 {
                    return Err(ObjectiveError::UnboundedTail {
                        degree: p.poly.degree(),
                    });
                }
                p.poly.eval(0.0).abs()
            } else {
                p.poly.max_abs_on(p.lo, p.hi)?
            };
            best = best.max(m);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_naive() {
        let p = Polynomial::new(vec![-16.0, -32.0, -16.0, 2.0, 1.0]);
        for z in [-3.0f64, 0.0, 0.5, 2.0, 10.0] {
            let naive: f64 = p
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c * z.powi(k as i32))
                .sum();
            assert!((p.eval(z) - naive).abs() <= 1e-9 * naive.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_of_quartic() {
        let p = Polynomial::new(vec![0.0, -32.0, -16.0, 2.0, 1.0]);
        let d = p.derivative();
        assert_eq!(d.coeffs(), &[-32.0, -32.0, 6.0, 4.0]);
    }

    #[test]
    fn max_abs_on_finds_interior_extremum() {
        // |z^2 - 1| on [-2, 2]: endpoints give 3, interior stationary point gives 1
        let p = Polynomial::new(vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.max_abs_on(-2.0, 2.0).unwrap(), 3.0);
        // on [-0.5, 0.5] the extremum is the stationary point at 0
        assert_eq!(p.max_abs_on(-0.5, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn piecewise_validation() {
        let mk = |lo, hi, c: Vec<f64>| Piece {
            lo,
            hi,
            poly: Polynomial::new(c),
        };
        // gap between pieces
        assert_eq!(
            PiecewisePoly::new(vec![
                mk(f64::NEG_INFINITY, 0.0, vec![0.0]),
                mk(1.0, f64::INFINITY, vec![0.0]),
            ]),
            Err(ObjectiveError::UncoveredLine)
        );
        // quadratic tail is rejected
        assert_eq!(
            PiecewisePoly::new(vec![mk(f64::NEG_INFINITY, f64::INFINITY, vec![0.0, 0.0, 1.0])]),
            Err(ObjectiveError::UnboundedTail { degree: 2 })
        );
        // degree cap
        assert_eq!(
            PiecewisePoly::new(vec![
                mk(f64::NEG_INFINITY, 0.0, vec![0.0]),
                mk(0.0, 1.0, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
                mk(1.0, f64::INFINITY, vec![0.0]),
            ]),
            Err(ObjectiveError::DegreeTooHigh { degree: 5 })
        );
    }

    #[test]
    fn eval_uses_half_open_pieces() {
        let pw = PiecewisePoly::new(vec![
            Piece {
                lo: f64::NEG_INFINITY,
                hi: 0.0,
                poly: Polynomial::constant(-1.0),
            },
            Piece {
                lo: 0.0,
                hi: f64::INFINITY,
                poly: Polynomial::constant(1.0),
            },
        ])
        .unwrap();
        assert_eq!(pw.eval(-1e-12), -1.0);
        assert_eq!(pw.eval(0.0), 1.0);
        assert_eq!(pw.eval(1e300), 1.0);
    }
}
