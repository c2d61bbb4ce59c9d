//! Minimal CSV writer; every field here is numeric or empty, so no quoting.

/// Reals are written in round-trip scientific notation.
pub fn real(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    width: usize,
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            width: header.len(),
            text: header.join(",") + "\n",
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.width, "row width");
        self.text.push_str(&row.join(","));
        self.text.push('\n');
    }

    pub fn render(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for v in [0.1, -3.25e-300, 1.0 / 3.0, 6.02e23] {
            assert_eq!(real(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(real(f64::NAN), "NaN");
        assert_eq!(real(0.5), "5.0000000000000000e-1");
    }
}
