// structured pass/fail records for every inequality the lab checks, plus a
// deterministic json rendering (sorted keys, 17 significant digits) so that
// identical runs produce identical bytes

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    // the inequality itself, rendered as text
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    // signed distance to the pass boundary; positive means pass with room
    pub margin: f64,
    pub pass: bool,
}

impl CheckResult {
    // check lhs <= rhs within slack
    pub fn le(name: &str, statement: &str, lhs: f64, rhs: f64, slack: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            statement: statement.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs + slack,
        }
    }

    // check lhs >= rhs within slack
    pub fn ge(name: &str, statement: &str, lhs: f64, rhs: f64, slack: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            statement: statement.into(),
            lhs,
            rhs,
            margin: lhs - rhs,
            pass: lhs >= rhs - slack,
        }
    }

    pub fn summary_line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        format!(
            "{tag} {}: {} (lhs={:.6e}, rhs={:.6e}, margin={:.3e})",
            self.name, self.statement, self.lhs, self.rhs, self.margin
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub experiment: String,
    pub config_echo: Vec<(String, String)>,
    pub checks: Vec<CheckResult>,
    pub runtime_seconds: f64,
}

impl VerificationReport {
    pub fn new(experiment: &str) -> VerificationReport {
        VerificationReport {
            experiment: experiment.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn echo(&mut self, key: &str, value: String) {
        self.config_echo.push((key.into(), value));
    }

    pub fn overall_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self.checks.iter().map(|c| c.summary_line()).collect();
        lines.push(format!(
            "{}: {}",
            self.experiment,
            if self.overall_pass() { "ALL CHECKS PASS" } else { "CHECKS FAILED" }
        ));
        lines
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n  \"checks\": [");
        for (i, c) in self.checks.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str("\n    {");
            out.push_str(&format!("\"lhs\": {}, ", json_num(c.lhs)));
            out.push_str(&format!("\"margin\": {}, ", json_num(c.margin)));
            out.push_str(&format!("\"name\": {}, ", json_str(&c.name)));
            out.push_str(&format!("\"pass\": {}, ", c.pass));
            out.push_str(&format!("\"rhs\": {}, ", json_num(c.rhs)));
            out.push_str(&format!("\"statement\": {}", json_str(&c.statement)));
            out.push('}');
        }
        out.push_str("\n  ],\n  \"config\": {");
        let mut echo = self.config_echo.clone();
        echo.sort();
        for (i, (k, v)) in echo.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{}: {}", json_str(k), json_str(v)));
        }
        out.push_str("},\n");
        out.push_str(&format!("  \"experiment\": {},\n", json_str(&self.experiment)));
        out.push_str(&format!("  \"overall_pass\": {},\n", self.overall_pass()));
        out.push_str(&format!("  \"runtime_seconds\": {}\n", json_num(self.runtime_seconds)));
        out.push_str("}\n");
        out
    }
}

fn json_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
