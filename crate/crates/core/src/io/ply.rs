//! Minimal polygon-file-format support: ASCII and binary little-endian
//! bodies, scalar and list properties of any standard numeric type.

use std::io::{BufRead, Write};

use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Scalar::I8 => "char",
            Scalar::U8 => "uchar",
            Scalar::I16 => "short",
            Scalar::U16 => "ushort",
            Scalar::I32 => "int",
            Scalar::U32 => "uint",
            Scalar::F32 => "float",
            Scalar::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    pub fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub format: Format,
    pub elements: Vec<Element>,
    pub comments: Vec<String>,
}

impl Header {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        at: format!("header line {line}"),
        msg: msg.into(),
    }
}

pub fn read_header<R: BufRead>(r: &mut R) -> Result<Header, IoError> {
    let mut line = String::new();
    let mut n = 0;
    let mut next = |line: &mut String| -> Result<bool, IoError> {
        line.clear();
        n += 1;
        Ok(r.read_line(line)? > 0)
    };
    if !next(&mut line)? || line.trim_end() != "ply" {
        return Err(parse_err(1, "missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut comments = Vec::new();
    let mut lineno = 1;
    loop {
        if !next(&mut line)? {
            return Err(parse_err(lineno, "unexpected end of header"));
        }
        lineno += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => {
                comments.push(line.trim_end().split_once(' ').map_or("", |(_, c)| c).to_string())
            }
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLittleEndian,
                    other => return Err(parse_err(lineno, format!("unsupported format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad element count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(lineno, "property before element"))?;
                let count = Scalar::parse(c).ok_or_else(|| parse_err(lineno, format!("bad type {c}")))?;
                let item = Scalar::parse(i).ok_or_else(|| parse_err(lineno, format!("bad type {i}")))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", t, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(lineno, "property before element"))?;
                let ty = Scalar::parse(t).ok_or_else(|| parse_err(lineno, format!("bad type {t}")))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(parse_err(lineno, format!("unrecognised header line '{}'", line.trim_end()))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| parse_err(lineno, "missing format line"))?,
        elements,
        comments,
    })
}

/// One decoded element row: scalar values and list values in property
/// order (each property fills exactly one of the two).
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub scalars: Vec<f64>,
    pub lists: Vec<Vec<f64>>,
}

/// Streams rows of the elements in file order.
pub struct BodyReader<'h, R> {
    header: &'h Header,
    r: R,
    offset: u64,
    ascii_line: usize,
    buf: Vec<u8>,
    text: String,
}

impl<'h, R: BufRead> BodyReader<'h, R> {
    pub fn new(header: &'h Header, r: R) -> Self {
        BodyReader {
            header,
            r,
            offset: 0,
            ascii_line: 0,
            buf: Vec::new(),
            text: String::new(),
        }
    }

    fn err(&self, msg: impl Into<String>) -> IoError {
        IoError::Parse {
            at: match self.header.format {
                Format::Ascii => format!("body line {}", self.ascii_line),
                Format::BinaryLittleEndian => format!("body byte offset {}", self.offset),
            },
            msg: msg.into(),
        }
    }

    fn read_scalar(&mut self, ty: Scalar) -> Result<f64, IoError> {
        let n = ty.size();
        self.buf.resize(n, 0);
        let at = self.offset;
        self.r.read_exact(&mut self.buf[..n]).map_err(|_| IoError::Parse {
            at: format!("body byte offset {at}"),
            msg: "truncated binary body".into(),
        })?;
        self.offset += n as u64;
        Ok(ty.decode(&self.buf[..n]))
    }

    /// Reads one row of element `el` into `row`.
    pub fn read_row(&mut self, el: &Element, row: &mut Row) -> Result<(), IoError> {
        row.scalars.clear();
        let nl = el.props.iter().filter(|p| matches!(p, Property::List { .. })).count();
        row.lists.resize_with(nl, Vec::new);
        let mut li = 0;
        match self.header.format {
            Format::BinaryLittleEndian => {
                for p in &el.props {
                    match p {
                        Property::Scalar { ty, .. } => {
                            let v = self.read_scalar(*ty)?;
                            row.scalars.push(v);
                        }
                        Property::List { count, item, .. } => {
                            let k = self.read_scalar(*count)?;
                            if k < 0.0 {
                                return Err(self.err("negative list length"));
                            }
                            let mut list = std::mem::take(&mut row.lists[li]);
                            list.clear();
                            for _ in 0..k as usize {
                                list.push(self.read_scalar(*item)?);
                            }
                            row.lists[li] = list;
                            li += 1;
                        }
                    }
                }
            }
            Format::Ascii => {
                self.text.clear();
                self.ascii_line += 1;
                if self.r.read_line(&mut self.text)? == 0 {
                    return Err(self.err("unexpected end of body"));
                }
                let text = std::mem::take(&mut self.text);
                let mut toks = text.split_whitespace();
                let mut num = |this: &Self| -> Result<f64, IoError> {
                    let t = toks.next().ok_or_else(|| this.err("missing value"))?;
                    t.parse::<f64>().map_err(|_| this.err(format!("bad number '{t}'")))
                };
                for p in &el.props {
                    match p {
                        Property::Scalar { .. } => {
                            let v = num(self)?;
                            row.scalars.push(v);
                        }
                        Property::List { .. } => {
                            let k = num(self)?;
                            let mut list = std::mem::take(&mut row.lists[li]);
                            list.clear();
                            for _ in 0..k as usize {
                                list.push(num(self)?);
                            }
                            row.lists[li] = list;
                            li += 1;
                        }
                    }
                }
                self.text = text;
            }
        }
        Ok(())
    }
}

pub(crate) fn write_header(w: &mut impl Write, comments: &[String], elements: &[Element]) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    for e in elements {
        writeln!(w, "element {} {}", e.name, e.count)?;
        for p in &e.props {
            match p {
                Property::Scalar { name, ty } => writeln!(w, "property {} {}", ty.name(), name)?,
                Property::List { name, count, item } => {
                    writeln!(w, "property list {} {} {}", count.name(), item.name(), name)?
                }
            }
        }
    }
    writeln!(w, "end_header")
}

/// Skips the rows of an element the caller does not need.
pub(crate) fn skip_element<R: BufRead>(body: &mut BodyReader<'_, R>, el: &Element) -> Result<(), IoError> {
    let mut row = Row::default();
    for _ in 0..el.count {
        body.read_row(el, &mut row)?;
    }
    Ok(())
}
