use std::fmt::{self, Write as _};

use super::FabricateError;

/// Rounds to the emitted fixed-point resolution (3 decimals).
#[inline]
pub fn quantize(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Move {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
}

impl Move {
    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            x: Some(quantize(x)),
            y: Some(quantize(y)),
            ..Self::default()
        }
    }

    pub fn with_e(mut self, e: f64) -> Self {
        self.e = Some(quantize(e));
        self
    }

    pub fn with_f(mut self, f: f64) -> Self {
        self.f = Some(quantize(f));
        self
    }

    pub fn z(z: f64) -> Self {
        Self {
            z: Some(quantize(z)),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    /// Full-line comment; the text after `;`.
    Comment(String),
    /// `G0` travel.
    Travel(Move),
    /// `G1` extruding (or feed) move.
    Extrude(Move),
    /// `G92 E..` extruder reset.
    ResetExtruder(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GcodeProgram {
    pub commands: Vec<Command>,
}

fn write_move(out: &mut String, word: &str, m: &Move) {
    out.push_str(word);
    for (letter, v) in [('X', m.x), ('Y', m.y), ('Z', m.z), ('E', m.e), ('F', m.f)] {
        if let Some(v) = v {
            let _ = write!(out, " {letter}{v:.3}");
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        match self {
            Command::Comment(c) => {
                s.push(';');
                s.push_str(c);
            }
            Command::Travel(m) => write_move(&mut s, "G0", m),
            Command::Extrude(m) => write_move(&mut s, "G1", m),
            Command::ResetExtruder(e) => {
                let _ = write!(s, "G92 E{e:.3}");
            }
        }
        f.write_str(&s)
    }
}

impl GcodeProgram {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.commands {
            let _ = writeln!(s, "{c}");
        }
        s
    }

    /// Parses the emitted dialect: `G0`, `G1`, `G92` and `;` comment lines.
    pub fn parse(text: &str) -> Result<Self, FabricateError> {
        let mut commands = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(c) = raw.strip_prefix(';') {
                commands.push(Command::Comment(c.to_string()));
                continue;
            }
            let code = raw.split(';').next().unwrap_or("").trim();
            if code.is_empty() {
                continue;
            }
            let mut words = code.split_whitespace();
            let head = words.next().expect("non-empty line");
            let err = |message: String| FabricateError::Gcode { line: line_no, message };
            let mut m = Move::default();
            for w in words {
                let mut chars = w.chars();
                let letter = chars.next().expect("non-empty word").to_ascii_uppercase();
                let num = chars.as_str();
                let v: f64 = num
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| err(format!("malformed number in `{w}`")))?;
                let slot = match letter {
                    'X' => &mut m.x,
                    'Y' => &mut m.y,
                    'Z' => &mut m.z,
                    'E' => &mut m.e,
                    'F' => &mut m.f,
                    _ => return Err(err(format!("unknown word `{w}`"))),
                };
                if slot.replace(quantize(v)).is_some() {
                    return Err(err(format!("repeated word `{letter}`")));
                }
            }
            let cmd = match head.to_ascii_uppercase().as_str() {
                "G0" | "G00" => Command::Travel(m),
                "G1" | "G01" => Command::Extrude(m),
                "G92" => {
                    if m.x.is_some() || m.y.is_some() || m.z.is_some() || m.f.is_some() {
                        return Err(err("G92 only resets E".into()));
                    }
                    Command::ResetExtruder(m.e.unwrap_or(0.0))
                }
                other => return Err(err(format!("unknown command `{other}`"))),
            };
            commands.push(cmd);
        }
        Ok(Self { commands })
    }

    /// Sum of positive E increments over the program, mm of filament.
    pub fn filament_length(&self) -> f64 {
        let mut e = 0.0;
        let mut total = 0.0;
        for c in &self.commands {
            match c {
                Command::ResetExtruder(v) => e = *v,
                Command::Extrude(m) | Command::Travel(m) => {
                    if let Some(v) = m.e {
                        total += (v - e).max(0.0);
                        e = v;
                    }
                }
                Command::Comment(_) => {}
            }
        }
        total
    }

    /// Checks that Z never decreases and E never decreases between resets.
    pub fn check_monotone(&self) -> Result<(), String> {
        let (mut z, mut e) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, c) in self.commands.iter().enumerate() {
            match c {
                Command::ResetExtruder(v) => e = *v,
                Command::Extrude(m) | Command::Travel(m) => {
                    if let Some(v) = m.z {
                        if v < z {
                            return Err(format!("command {i}: Z {v} below {z}"));
                        }
                        z = v;
                    }
                    if let Some(v) = m.e {
                        if v < e {
                            return Err(format!("command {i}: E {v} below {e}"));
                        }
                        e = v;
                    }
                }
                Command::Comment(_) => {}
            }
        }
        Ok(())
    }

    /// Tool positions visited, with whether the move into them extruded.
    pub fn path(&self) -> Vec<([f64; 3], bool)> {
        let mut p = [0.0; 3];
        let mut e = 0.0;
        let mut out = Vec::new();
        for c in &self.commands {
            let (m, extruding) = match c {
                Command::Travel(m) => (m, false),
                Command::Extrude(m) => (m, m.e.is_some_and(|v| v > e)),
                Command::ResetExtruder(v) => {
                    e = *v;
                    continue;
                }
                Command::Comment(_) => continue,
            };
            if let Some(v) = m.e {
                e = v;
            }
            p = [m.x.unwrap_or(p[0]), m.y.unwrap_or(p[1]), m.z.unwrap_or(p[2])];
            out.push((p, extruding));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_extrude_move() {
        let p = GcodeProgram::parse("G1 X1 Y2 E0.5").unwrap();
        assert_eq!(
            p.commands,
            vec![Command::Extrude(Move {
                x: Some(1.0),
                y: Some(2.0),
                e: Some(0.5),
                ..Move::default()
            })]
        );
    }

    #[test]
    fn unknown_commands_and_words_rejected() {
        assert!(matches!(
            GcodeProgram::parse("G5 X1"),
            Err(FabricateError::Gcode { line: 1, .. })
        ));
        assert!(GcodeProgram::parse("G1 X1\nM104 S200").is_err());
        assert!(GcodeProgram::parse("G1 Q1").is_err());
        assert!(GcodeProgram::parse("G1 Xabc").is_err());
        assert!(GcodeProgram::parse("G1 X1 X2").is_err());
    }

    #[test]
    fn emit_parse_identity() {
        let prog = GcodeProgram {
            commands: vec![
                Command::Comment(" layer 0".into()),
                Command::ResetExtruder(0.0),
                Command::Travel(Move::z(0.1)),
                Command::Travel(Move::xy(-1.23456, 7.0)),
                Command::Extrude(Move::xy(3.0, 4.0).with_e(0.0333).with_f(1200.0)),
                Command::Extrude(Move::xy(1e-4, -0.0004).with_e(0.07)),
            ],
        };
        let text = prog.to_text();
        let back = GcodeProgram::parse(&text).unwrap();
        assert_eq!(back, prog);
        assert_eq!(back.to_text(), text);
        assert!(text.contains("G1 X3.000 Y4.000 E0.033 F1200.000"));
    }

    #[test]
    fn filament_respects_resets() {
        let p = GcodeProgram::parse("G1 X1 E1\nG1 X2 E3\nG92 E0\nG1 X3 E0.5").unwrap();
        assert!((p.filament_length() - 3.5).abs() < 1e-12);
        assert!(p.check_monotone().is_ok());
        let bad = GcodeProgram::parse("G0 Z1\nG0 Z0.5").unwrap();
        assert!(bad.check_monotone().is_err());
    }
}
