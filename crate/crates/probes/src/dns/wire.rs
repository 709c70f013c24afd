//! Minimal DNS message codec: one-question A/IN queries and the responses to
//! them. No EDNS, no record types beyond what timing needs; answers of other
//! types are decoded as opaque data.

use std::net::Ipv4Addr;

use thiserror::Error;

pub const TYPE_A: u16 = 1;
pub const CLASS_IN: u16 = 1;
pub const RCODE_NOERROR: u8 = 0;
pub const RCODE_FORMERR: u8 = 1;
pub const RCODE_SERVFAIL: u8 = 2;
pub const RCODE_NXDOMAIN: u8 = 3;

const HEADER_LEN: usize = 12;
const MAX_POINTER_HOPS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated at offset {0}")]
    Truncated(usize),
    #[error("invalid domain name: {0}")]
    BadName(String),
    #[error("compression pointer loop")]
    PointerLoop,
    #[error("label has reserved prefix bits at offset {0}")]
    BadLabel(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub name: String,
    pub qtype: u16,
    pub qclass: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRecord {
    pub name: String,
    pub rtype: u16,
    pub class: u16,
    pub ttl: u32,
    pub data: Vec<u8>,
}

impl ResourceRecord {
    pub fn ipv4(&self) -> Option<Ipv4Addr> {
        (self.rtype == TYPE_A && self.data.len() == 4)
            .then(|| Ipv4Addr::new(self.data[0], self.data[1], self.data[2], self.data[3]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: u16,
    pub is_response: bool,
    pub opcode: u8,
    pub recursion_desired: bool,
    pub recursion_available: bool,
    pub rcode: u8,
    pub questions: Vec<Question>,
    pub answers: Vec<ResourceRecord>,
}

impl Message {
    pub fn first_a(&self) -> Option<Ipv4Addr> {
        self.answers.iter().find_map(ResourceRecord::ipv4)
    }
}

fn encode_name(out: &mut Vec<u8>, name: &str) -> Result<(), WireError> {
    let name = name.trim_end_matches('.');
    if name.is_empty() || name.len() > 253 {
        return Err(WireError::BadName(name.to_string()));
    }
    for label in name.split('.') {
        if label.is_empty() || label.len() > 63 || !label.is_ascii() {
            return Err(WireError::BadName(name.to_string()));
        }
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
    Ok(())
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn encode_query(id: u16, domain: &str) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(HEADER_LEN + domain.len() + 6);
    push_u16(&mut out, id);
    push_u16(&mut out, 0x0100); // RD
    push_u16(&mut out, 1);
    push_u16(&mut out, 0);
    push_u16(&mut out, 0);
    push_u16(&mut out, 0);
    encode_name(&mut out, domain)?;
    push_u16(&mut out, TYPE_A);
    push_u16(&mut out, CLASS_IN);
    Ok(out)
}

/// Builds the response to `query`, echoing its id and question section. The
/// answer names use a compression pointer back to the question.
pub fn encode_response(query: &Message, rcode: u8, answers: &[Ipv4Addr], ttl: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    push_u16(&mut out, query.id);
    let mut flags: u16 = 0x8000 | 0x0080; // QR, RA
    if query.recursion_desired {
        flags |= 0x0100;
    }
    flags |= u16::from(query.opcode & 0x0f) << 11;
    flags |= u16::from(rcode & 0x0f);
    push_u16(&mut out, flags);
    push_u16(&mut out, query.questions.len() as u16);
    push_u16(&mut out, answers.len() as u16);
    push_u16(&mut out, 0);
    push_u16(&mut out, 0);
    for q in &query.questions {
        // names came from a decoded message so they re-encode cleanly
        let _ = encode_name(&mut out, &q.name);
        push_u16(&mut out, q.qtype);
        push_u16(&mut out, q.qclass);
    }
    for ip in answers {
        push_u16(&mut out, 0xc000 | HEADER_LEN as u16);
        push_u16(&mut out, TYPE_A);
        push_u16(&mut out, CLASS_IN);
        out.extend_from_slice(&ttl.to_be_bytes());
        push_u16(&mut out, 4);
        out.extend_from_slice(&ip.octets());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or(WireError::Truncated(self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn name(&mut self) -> Result<String, WireError> {
        let mut labels: Vec<String> = Vec::new();
        let mut pos = self.pos;
        let mut jumped = false;
        let mut hops = 0;
        loop {
            let len = *self.buf.get(pos).ok_or(WireError::Truncated(pos))?;
            match len & 0xc0 {
                0x00 => {
                    if len == 0 {
                        pos += 1;
                        break;
                    }
                    let start = pos + 1;
                    let end = start + len as usize;
                    let label = self.buf.get(start..end).ok_or(WireError::Truncated(start))?;
                    labels.push(String::from_utf8_lossy(label).into_owned());
                    pos = end;
                }
                0xc0 => {
                    let lo = *self.buf.get(pos + 1).ok_or(WireError::Truncated(pos + 1))?;
                    let target = (usize::from(len & 0x3f) << 8) | usize::from(lo);
                    hops += 1;
                    if hops > MAX_POINTER_HOPS {
                        return Err(WireError::PointerLoop);
                    }
                    if !jumped {
                        self.pos = pos + 2;
                        jumped = true;
                    }
                    pos = target;
                }
                _ => return Err(WireError::BadLabel(pos)),
            }
        }
        if !jumped {
            self.pos = pos;
        }
        Ok(labels.join("."))
    }
}

pub fn decode(buf: &[u8]) -> Result<Message, WireError> {
    let mut r = Reader { buf, pos: 0 };
    let id = r.u16()?;
    let flags = r.u16()?;
    let qd = r.u16()?;
    let an = r.u16()?;
    let _ns = r.u16()?;
    let _ar = r.u16()?;
    let mut questions = Vec::with_capacity(qd as usize);
    for _ in 0..qd {
        let name = r.name()?;
        let qtype = r.u16()?;
        let qclass = r.u16()?;
        questions.push(Question { name, qtype, qclass });
    }
    let mut answers = Vec::with_capacity(an as usize);
    for _ in 0..an {
        let name = r.name()?;
        let rtype = r.u16()?;
        let class = r.u16()?;
        let ttl = r.u32()?;
        let len = r.u16()? as usize;
        let data = r.take(len)?.to_vec();
        answers.push(ResourceRecord {
            name,
            rtype,
            class,
            ttl,
            data,
        });
    }
    Ok(Message {
        id,
        is_response: flags & 0x8000 != 0,
        opcode: ((flags >> 11) & 0x0f) as u8,
        recursion_desired: flags & 0x0100 != 0,
        recursion_available: flags & 0x0080 != 0,
        rcode: (flags & 0x0f) as u8,
        questions,
        answers,
    })
}
