use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Sym(&'static str),
    Newline,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Number(v) => format!("number {v}"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Newline => "end of line".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub(crate) tok: Tok,
    pub(crate) line: usize,
    pub(crate) column: usize,
}

const SYMBOLS: [&str; 15] = [
    "<=", ">=", "<", ">", "=", "+", "-", "*", "/", "(", ")", ",", ":", "{", "}",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (li, line) in src.split('\n').enumerate() {
        let line_no = li + 1;
        let chars: Vec<char> = line.trim_end_matches('\r').chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let tok = if c.is_ascii_alphabetic() {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
            {
                i = scan_number(&chars, i);
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| {
                    ParseError::new(src, line_no, column, format!("malformed number '{text}'"))
                })?;
                if !value.is_finite() {
                    return Err(ParseError::new(
                        src,
                        line_no,
                        column,
                        format!("number '{text}' out of range"),
                    ));
                }
                Tok::Number(value)
            } else if let Some(sym) = SYMBOLS.iter().find(|s| {
                let s: Vec<char> = s.chars().collect();
                chars[i..].starts_with(&s)
            }) {
                i += sym.len();
                Tok::Sym(sym)
            } else {
                return Err(ParseError::new(
                    src,
                    line_no,
                    column,
                    format!("unexpected character '{c}'"),
                ));
            };
            out.push(Token {
                tok,
                line: line_no,
                column,
            });
        }
        out.push(Token {
            tok: Tok::Newline,
            line: line_no,
            column: chars.len() + 1,
        });
    }
    let (line, column) = out.last().map(|t| (t.line, t.column)).unwrap_or((1, 1));
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

fn scan_number(chars: &[char], mut i: usize) -> usize {
    let digits = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
    };
    digits(&mut i);
    if i < chars.len() && chars[i] == '.' {
        i += 1;
        digits(&mut i);
    }
    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
        let mut j = i + 1;
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            i = j;
            digits(&mut i);
        }
    }
    i
}
