//! Report rows and their two renderings: a summary table (10 significant
//! digits) and CSV with full round-trip precision. Both consume the same
//! computed values.

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub units: &'static str,
    pub component: &'static str,
}

#[derive(Debug, Default)]
pub struct Report {
    pub rows: Vec<Row>,
}

impl Report {
    pub fn push(
        &mut self,
        name: impl Into<String>,
        value: f64,
        units: &'static str,
        component: &'static str,
    ) {
        self.rows.push(Row {
            name: name.into(),
            value,
            units,
            component,
        });
    }

    pub fn render_table(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_w$}  {:>18}  {:<13}  {}\n",
            "quantity", "value", "units", "component"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<name_w$}  {:>18}  {:<13}  {}\n",
                r.name,
                format_sig(r.value, 10),
                r.units,
                r.component
            ));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("name,value,units,component\n");
        for r in &self.rows {
            // `{}` on f64 prints the shortest representation that parses back
            // to the same bits.
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.name, r.value, r.units, r.component
            ));
        }
        out
    }
}

/// Format with the given number of significant digits.
pub fn format_sig(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(123.456789123, 10), "123.4567891");
        assert_eq!(format_sig(0.000123456789123, 10), "0.0001234567891");
        assert_eq!(format_sig(-98765.4321999, 10), "-98765.43220");
        assert_eq!(format_sig(0.0, 10), "0");
        assert_eq!(format_sig(1e12, 10), "1000000000000");
    }

    #[test]
    fn csv_round_trips_exactly() {
        let mut rep = Report::default();
        rep.push("x", 0.1 + 0.2, "currency", "price");
        rep.push("y", 1.0 / 3.0, "years", "risk");
        let csv = rep.render_csv();
        for (line, row) in csv.lines().skip(1).zip(&rep.rows) {
            let val: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(val.to_bits(), row.value.to_bits());
        }
    }
}
