use super::MmsError;

/// Errors on a sequence of meshes with the observed orders between neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct EocTable {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
    pub slopes: Vec<f64>,
}

impl EocTable {
    /// CSV with header `h,error,eoc`; the first row has an empty rate.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,error,eoc\n");
        for (k, (h, e)) in self.h.iter().zip(&self.errors).enumerate() {
            match k.checked_sub(1).map(|j| self.slopes[j]) {
                Some(r) => s.push_str(&format!("{h:.16e},{e:.16e},{r:.16e}\n")),
                None => s.push_str(&format!("{h:.16e},{e:.16e},\n")),
            }
        }
        s
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn eoc(table: &[(f64, f64)]) -> Result<EocTable, MmsError> {
    if table.len() < 2 {
        return Err(MmsError::TooFewLevels(table.len()));
    }
    for w in table.windows(2) {
        if !(w[1].0 < w[0].0 && w[1].0 > 0.0) {
            return Err(MmsError::NonMonotoneH { coarse: w[0].0, fine: w[1].0 });
        }
    }
    if let Some(&(_, e)) = table.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return Err(MmsError::NonPositiveError(e));
    }
    let slopes = table.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
    Ok(EocTable { h: table.iter().map(|p| p.0).collect(), errors: table.iter().map(|p| p.1).collect(), slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_examples() {
        let t = eoc(&[(0.1, 0.04), (0.05, 0.01)]).unwrap();
        assert!((t.slopes[0] - 2.0).abs() < 1e-12);
        let t = eoc(&[(0.1, 0.02), (0.05, 0.01)]).unwrap();
        assert!((t.slopes[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(eoc(&[(0.1, 1.0)]), Err(MmsError::TooFewLevels(1))));
        assert!(matches!(eoc(&[(0.1, 1.0), (0.2, 0.5)]), Err(MmsError::NonMonotoneH { .. })));
        assert!(matches!(eoc(&[(0.1, 1.0), (0.1, 0.5)]), Err(MmsError::NonMonotoneH { .. })));
        assert!(matches!(eoc(&[(0.1, 1.0), (0.05, 0.0)]), Err(MmsError::NonPositiveError(_))));
    }

    #[test]
    fn csv_layout() {
        let csv = eoc(&[(0.5, 0.4), (0.25, 0.1)]).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "h,error,eoc");
        assert!(lines[1].ends_with(','));
        assert!(lines[2].starts_with("2.5000000000000000e-1,"));
    }
}
